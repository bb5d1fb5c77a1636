"""Command line interface: ``popcal <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from popcal import data as dataio
from popcal import itemknn
from popcal.data import Dataset, SupplierMap
from popcal.experiment import ExperimentConfig, read_target, run_experiment
from popcal.metrics import evaluate
from popcal.partition import (
    ITEM_GROUPS,
    SUPPLIER_GROUPS,
    Partition,
    UserGroups,
    partition_items,
    partition_suppliers,
    partition_users,
)
from popcal.rerank import ALGORITHMS, RerankConfig, read_lists, rerank_all, write_lists

_log = logging.getLogger("popcal")


def cmd_ingest(args):
    interactions = dataio.load_ratings(args.ratings, args.delim)
    if args.format == "playcount":
        d = dataio.frequency_to_ratings(interactions)
    else:
        d = dataio.explicit_ratings(interactions)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.suppliers:
        smap, d = dataio.load_supplier_map(args.suppliers, d, args.supplier_delim)
    d = dataio.filter_min_profile(d, args.min_profile)
    if args.suppliers:
        SupplierMap({i: smap[i] for i in d.items}).write(out / "suppliers.tsv")
    sp = dataio.split(d, args.split, args.seed)
    sp.train.write(out / "train.tsv")
    sp.test.write(out / "test.tsv")
    _log.info("train: %d ratings, test: %d ratings", len(sp.train), len(sp.test))


def _write_shares(path, part: Partition):
    with open(path, "a", encoding="utf-8") as f:
        for g in part.groups:
            f.write(f"{g}\t{len(part.members(g))}\t{part.rating_share[g]:.6f}\n")


def cmd_partition(args):
    train = Dataset.read(args.train)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    part = partition_items(train, args.head, args.tail)
    part.write(out / "items.tsv")
    partition_users(train, part).write(out / "users.tsv")
    shares = out / "shares.tsv"
    shares.write_text("group\tsize\trating_share\n", encoding="utf-8")
    _write_shares(shares, part)
    if args.suppliers:
        smap = dataio.read_supplier_file(args.suppliers)
        sup = partition_suppliers(train, smap, args.head, args.tail)
        sup.write(out / "suppliers.tsv")
        _write_shares(shares, sup)


def _read_partition_dir(path: Path, which: str):
    shares = {}
    share_file = path / "shares.tsv"
    if share_file.exists():
        df = pd.read_csv(share_file, sep="\t")
        shares = dict(zip(df["group"], df["rating_share"]))
    if which == "items":
        return Partition.read(path / "items.tsv", ITEM_GROUPS, {g: shares.get(g, float("nan")) for g in ITEM_GROUPS})
    return Partition.read(path / "suppliers.tsv", SUPPLIER_GROUPS,
                          {g: shares.get(g, float("nan")) for g in SUPPLIER_GROUPS})


def cmd_recommend(args):
    train = Dataset.read(args.train)
    model = itemknn.fit(train, args.k, args.shrink)
    itemknn.write_candidates(itemknn.recommend_all(model, train, args.m), args.out)


def cmd_rerank(args):
    train = Dataset.read(args.train)
    cands = {u: c for u, c in itemknn.read_candidates(args.candidates).items() if len(c)}
    part = _read_partition_dir(Path(args.partition), "items")
    m = max((len(c) for c in cands.values()), default=args.n)
    cfg = RerankConfig(lam=args.lam, n=args.n, m=max(m, args.n), fs_p=args.fs_p, fs_alpha=args.fs_alpha)
    target = read_target(args.dm_target) if args.dm_target else None
    write_lists(rerank_all(args.algo, cands, train, part, cfg, target), args.out)


def cmd_evaluate(args):
    train, test = Dataset.read(args.train), Dataset.read(args.test)
    lists = read_lists(args.lists)
    pdir = Path(args.partition)
    part = _read_partition_dir(pdir, "items")
    users = UserGroups.read(pdir / "users.tsv")
    sup_part = smap = None
    if args.suppliers:
        smap = dataio.read_supplier_file(args.suppliers)
        sup_part = _read_partition_dir(pdir, "suppliers")
    report = evaluate(lists, train, test, part, users, sup_part, smap, n=args.n)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([report.row()]).to_csv(out, index=False, float_format="%.6f")
    report.exposure.to_csv(out.with_name("exposure.csv"), index=False, float_format="%.6f")
    print(json.dumps({k: round(v, 6) for k, v in report.row().items()}))


def cmd_experiment(args):
    cfg = ExperimentConfig.load(args.config)
    if args.workers:
        cfg.workers = args.workers
    sweep = run_experiment(cfg, args.out)
    for algo, point in sorted(sweep.matched.items()):
        r = sweep.reports[point]
        print(f"{algo}\t{point.label}\tprecision={r.precision:.4f}\tupd={r.upd:.4f}")
    if sweep.errors:
        print(f"{len(sweep.errors)} grid points failed; see errors.tsv", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="popcal", description="Popularity-calibrated re-ranking and evaluation.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert, filter and split rating data")
    p.add_argument("--ratings", required=True)
    p.add_argument("--format", choices=["explicit", "playcount"], default="explicit")
    p.add_argument("--delim", default="::")
    p.add_argument("--suppliers")
    p.add_argument("--supplier-delim", default="\t")
    p.add_argument("--min-profile", type=int, default=20)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("partition", help="assign items, users and suppliers to popularity groups")
    p.add_argument("--train", required=True)
    p.add_argument("--suppliers")
    p.add_argument("--head", type=float, default=0.2)
    p.add_argument("--tail", type=float, default=0.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("recommend", help="item-KNN candidate generation")
    p.add_argument("--train", required=True)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--k", type=int, default=40)
    p.add_argument("--shrink", type=float, default=10.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("rerank", help="re-rank candidate lists")
    p.add_argument("--algo", choices=ALGORITHMS, required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--fs-p", type=float, default=0.5)
    p.add_argument("--fs-alpha", type=float, default=0.1)
    p.add_argument("--dm-target")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("evaluate", help="compute metrics for ranked lists")
    p.add_argument("--lists", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--suppliers")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a full sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except (dataio.DataError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
