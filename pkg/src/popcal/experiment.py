"""End-to-end experiment runner: data prep, hyperparameter sweeps and reports."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import pandas as pd

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from popcal import data as dataio
from popcal import itemknn
from popcal.data import Dataset, SupplierMap
from popcal.metrics import MetricsReport, evaluate, per_user_table
from popcal.partition import Partition, UserGroups, partition_items, partition_suppliers, partition_users
from popcal.rerank import RerankConfig, rerank_all, write_lists
from popcal.synthetic import generate_synthetic

_log = logging.getLogger(__name__)

BASE = "Base"
TABLE1_HEADER = ["algorithm", "params", "Precision", "Agg-Div", "LC", "Gini", "ESF", "IPD", "UPD", "SPD"]
TABLE1_FIELDS = ["precision", "agg_div", "lc", "gini", "esf", "ipd", "upd", "spd"]
GROUPS_HEADER = ["algorithm", "params", "metric", "group", "value"]
EXPOSURE_HEADER = ["algorithm", "params", "item", "train_count", "group", "exposure"]
SWEEP_HEADER = ["algorithm", "params", "metric", "value"]
SWEEP_METRICS = dict(zip(TABLE1_HEADER[2:], TABLE1_FIELDS))


@dataclass
class ExperimentConfig:
    """Every knob of a run. Paths may be relative to the config file."""

    ratings: str = "synthetic"
    format: str = "explicit"
    delim: str = "::"
    suppliers: str = ""
    supplier_delim: str = "\t"
    min_profile: int = 20
    split_ratio: float = 0.8
    seed: int = 0
    head_share: float = 0.2
    tail_share: float = 0.2
    k: int = 40
    shrinkage: float = 10.0
    m: int = 100
    n: int = 10
    algorithms: list[str] = field(default_factory=lambda: ["cp", "xq", "fs", "dm"])
    cp_lambdas: list[float] = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    xq_lambdas: list[float] = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    fs_p: list[float] = field(default_factory=lambda: [0.25, 0.5, 0.75, 0.95])
    fs_alpha: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.15])
    dm_target: str = "uniform"
    target_precision: float = math.nan
    precision_offset: float = 0.01
    precision_tol: float = 0.01
    workers: int = 1
    synthetic_users: int = 500
    synthetic_items: int = 300
    synthetic_suppliers: int = 60
    synthetic_exponent: float = 1.5

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any], base_dir: str | Path | None = None) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**raw)
        if base_dir is not None:
            for key in ("ratings", "suppliers", "dm_target"):
                val = getattr(cfg, key)
                if val and val not in ("synthetic", "uniform") and not Path(val).is_absolute():
                    setattr(cfg, key, str(Path(base_dir) / val))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, "rb") as f:
            raw = tomllib.load(f)
        return cls.from_mapping(raw, Path(path).parent)

    def validate(self) -> None:
        for name in ("cp_lambdas", "xq_lambdas", "fs_p", "fs_alpha", "algorithms"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        bad = set(self.algorithms) - {"cp", "xq", "fs", "dm"}
        if bad:
            raise ValueError(f"unknown algorithms: {sorted(bad)}")
        for key in ("ratings", "suppliers", "dm_target"):
            val = getattr(self, key)
            if val and val not in ("synthetic", "uniform") and not Path(val).exists():
                raise FileNotFoundError(f"{key}: {val} does not exist")
        if self.format not in ("explicit", "playcount"):
            raise ValueError("format must be 'explicit' or 'playcount'")
        if self.n > self.m:
            raise ValueError("n must not exceed m")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha1(blob).hexdigest()[:12]


@dataclass
class Prepared:
    train: Dataset
    test: Dataset
    items: Partition
    users: UserGroups
    suppliers: Partition | None
    smap: SupplierMap | None
    candidates: dict[str, itemknn.CandidateList]


@dataclass(frozen=True)
class GridPoint:
    algorithm: str
    params: tuple[tuple[str, Any], ...] = ()

    @property
    def label(self) -> str:
        if not self.params:
            return "-"
        return ";".join(f"{k}={v}" for k, v in self.params)

    @property
    def key(self) -> str:
        return f"{self.algorithm}_{self.label}".replace(";", "_").replace("=", "").replace("/", "_")


@dataclass
class SweepResult:
    reports: dict[GridPoint, MetricsReport] = field(default_factory=dict)
    errors: dict[GridPoint, str] = field(default_factory=dict)
    matched: dict[str, GridPoint] = field(default_factory=dict)
    run_dir: Path | None = None

    def points(self, algorithm: str) -> list[GridPoint]:
        return [p for p in self.reports if p.algorithm == algorithm]


def load_dataset(cfg: ExperimentConfig) -> tuple[Dataset, SupplierMap | None]:
    if cfg.ratings == "synthetic":
        return generate_synthetic(cfg.synthetic_users, cfg.synthetic_items, cfg.synthetic_suppliers,
                                  cfg.synthetic_exponent, cfg.seed)
    interactions = dataio.load_ratings(cfg.ratings, cfg.delim)
    if cfg.format == "playcount":
        d = dataio.frequency_to_ratings(interactions)
    else:
        d = dataio.explicit_ratings(interactions)
    smap = None
    if cfg.suppliers:
        smap, d = dataio.load_supplier_map(cfg.suppliers, d, cfg.supplier_delim)
    return d, smap


def prepare(cfg: ExperimentConfig, d: Dataset | None = None, smap: SupplierMap | None = None) -> Prepared:
    """Filter, split, partition and produce base candidates."""
    if d is None:
        d, smap = load_dataset(cfg)
    d = dataio.filter_min_profile(d, cfg.min_profile)
    if smap is not None:
        smap = SupplierMap({i: smap[i] for i in d.items})
    sp = dataio.split(d, cfg.split_ratio, cfg.seed)
    part = partition_items(sp.train, cfg.head_share, cfg.tail_share)
    ugroups = partition_users(sp.train, part)
    sup_part = partition_suppliers(sp.train, smap, cfg.head_share, cfg.tail_share) if smap else None
    model = itemknn.fit(sp.train, cfg.k, cfg.shrinkage)
    cands = itemknn.recommend_all(model, sp.train, cfg.m)
    empty = [u for u, c in cands.items() if len(c) == 0]
    if empty:
        _log.warning("%d users have no scoreable candidates and are left out", len(empty))
        cands = {u: c for u, c in cands.items() if len(c)}
    return Prepared(sp.train, sp.test, part, ugroups, sup_part, smap, cands)


def grid(cfg: ExperimentConfig) -> list[GridPoint]:
    points = [GridPoint("none")]
    for algo in cfg.algorithms:
        if algo == "cp":
            points += [GridPoint("cp", (("lambda", lam),)) for lam in cfg.cp_lambdas]
        elif algo == "xq":
            points += [GridPoint("xq", (("lambda", lam),)) for lam in cfg.xq_lambdas]
        elif algo == "fs":
            points += [GridPoint("fs", (("p", p), ("alpha", a))) for p in cfg.fs_p for a in cfg.fs_alpha]
        elif algo == "dm":
            points.append(GridPoint("dm", (("target", Path(cfg.dm_target).name),)))
    return points


def read_target(path: str | Path) -> dict[str, int]:
    target = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                item, count = line.rstrip("\r\n").split("\t")
                target[item] = int(count)
    return target


def run_point(prep: Prepared, point: GridPoint, cfg: ExperimentConfig):
    params = dict(point.params)
    rcfg = RerankConfig(
        lam=float(params.get("lambda", 0.0)), n=cfg.n, m=cfg.m,
        fs_p=float(params.get("p", 0.5)), fs_alpha=float(params.get("alpha", 0.1)),
    )
    target = None
    if point.algorithm == "dm" and cfg.dm_target != "uniform":
        target = read_target(cfg.dm_target)
    lists = rerank_all(point.algorithm, prep.candidates, prep.train, prep.items, rcfg, target)
    report = evaluate(lists, prep.train, prep.test, prep.items, prep.users, prep.suppliers, prep.smap, n=cfg.n)
    return lists, report


def _write_prepared(prep: Prepared, run_dir: Path) -> None:
    prep.train.write(run_dir / "train.tsv")
    prep.test.write(run_dir / "test.tsv")
    prep.items.write(run_dir / "items.tsv")
    prep.users.write(run_dir / "users.tsv")
    if prep.suppliers is not None:
        prep.suppliers.write(run_dir / "supplier_groups.tsv")
        prep.smap.write(run_dir / "suppliers.tsv")
    itemknn.write_candidates(prep.candidates, run_dir / "candidates.tsv")


def run_sweep(cfg: ExperimentConfig, out_dir: str | Path | None = None,
              prepared: Prepared | None = None) -> SweepResult:
    """Run the base recommender and every grid point.

    With ``out_dir`` set, all intermediate files go under
    ``out_dir/run-<config hash>/``. A failing grid point is logged and
    recorded in ``errors``; the others still run.
    """
    prep = prepared if prepared is not None else prepare(cfg)
    result = SweepResult()
    if out_dir is not None:
        run_dir = Path(out_dir) / f"run-{cfg.digest()}"
        (run_dir / "lists").mkdir(parents=True, exist_ok=True)
        (run_dir / "reports").mkdir(exist_ok=True)
        with open(run_dir / "config.json", "w", encoding="utf-8") as f:
            json.dump(cfg.to_dict(), f, indent=2, sort_keys=True, default=str)
        _write_prepared(prep, run_dir)
        result.run_dir = run_dir

    points = grid(cfg)

    def job(point):
        try:
            return point, run_point(prep, point, cfg), None
        except Exception as exc:  # noqa: BLE001 - a failed point must not stop the sweep
            _log.exception("grid point %s %s failed", point.algorithm, point.label)
            return point, None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        outcomes = list(pool.map(job, points))

    for point, res, err in outcomes:
        if err is not None:
            result.errors[point] = err
            continue
        lists, report = res
        result.reports[point] = report
        if result.run_dir is not None:
            write_lists(lists, result.run_dir / "lists" / f"{point.key}.tsv")
            pd.DataFrame([report.row()]).to_csv(result.run_dir / "reports" / f"{point.key}.csv", index=False)
            per_user_table(lists, prep.train, prep.test, prep.items, prep.users, cfg.n).to_csv(
                result.run_dir / "reports" / f"{point.key}_users.csv", index=False, float_format="%.6f")
    if result.run_dir is not None and result.errors:
        with open(result.run_dir / "errors.tsv", "w", encoding="utf-8") as f:
            for p, msg in result.errors.items():
                f.write(f"{p.algorithm}\t{p.label}\t{msg}\n")
    return result


def base_point(sweep: SweepResult) -> GridPoint:
    return next(p for p in sweep.reports if p.algorithm == "none")


def precision_match(sweep: SweepResult, target: float, tol: float) -> dict[str, tuple[GridPoint, bool]]:
    """Pick, per algorithm, the grid point whose precision is nearest ``target``.

    The flag is True when that nearest point is still more than ``tol`` away.
    Ties go to the earlier grid point.
    """
    out = {}
    algos = sorted({p.algorithm for p in sweep.reports if p.algorithm != "none"})
    for algo in algos:
        pts = sweep.points(algo)
        best = min(pts, key=lambda p: abs(sweep.reports[p].precision - target))
        off = abs(sweep.reports[best].precision - target) > tol
        if off:
            _log.warning("%s: closest precision %.4f is more than %.4f from %.4f",
                         algo, sweep.reports[best].precision, tol, target)
        out[algo] = (best, off)
    return out


def _fmt(v: float) -> str:
    return "nan" if isinstance(v, float) and math.isnan(v) else f"{v:.6f}"


def emit_report(sweep: SweepResult, matched: Mapping[str, tuple[GridPoint, bool]] | Mapping[str, GridPoint],
                out_dir: str | Path) -> dict[str, Path]:
    """Write table1.csv, groups.csv, exposure.csv and sweep.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chosen = [(BASE, base_point(sweep))]
    for algo in sorted(matched):
        m = matched[algo]
        chosen.append((algo.upper(), m[0] if isinstance(m, tuple) else m))

    paths = {name: out_dir / f"{name}.csv" for name in ("table1", "groups", "exposure", "sweep")}
    with open(paths["table1"], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(TABLE1_HEADER)
        for name, p in chosen:
            r = sweep.reports[p]
            w.writerow([name, p.label] + [_fmt(getattr(r, k)) for k in TABLE1_FIELDS])
    with open(paths["groups"], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(GROUPS_HEADER)
        for name, p in chosen:
            r = sweep.reports[p]
            for metric, groups in (("IPD", r.ipd_groups), ("UPD", r.upd_groups), ("SPD", r.spd_groups)):
                for g, v in groups.items():
                    w.writerow([name, p.label, metric, g, _fmt(v)])
    with open(paths["exposure"], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(EXPOSURE_HEADER)
        for name, p in chosen:
            ex = sweep.reports[p].exposure
            for row in ex.itertuples(index=False):
                w.writerow([name, p.label, row.item, row.train_count, row.group, _fmt(row.exposure)])
    with open(paths["sweep"], "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for p, r in sweep.reports.items():
            name = BASE if p.algorithm == "none" else p.algorithm.upper()
            for metric, attr in SWEEP_METRICS.items():
                w.writerow([name, p.label, metric, _fmt(getattr(r, attr))])
    return paths


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path) -> SweepResult:
    sweep = run_sweep(cfg, out_dir)
    target = cfg.target_precision
    if math.isnan(target):
        target = sweep.reports[base_point(sweep)].precision - cfg.precision_offset
    matched = precision_match(sweep, target, cfg.precision_tol)
    sweep.matched = {a: p for a, (p, _) in matched.items()}
    emit_report(sweep, matched, out_dir)
    return sweep
