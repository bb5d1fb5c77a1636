import math

import numpy as np
import pytest

from popcal import itemknn
from popcal.data import Dataset


def test_identical_items_similarity_one():
    d = Dataset.from_triples([(u, i, r) for u, r in (("a", 5), ("b", 3), ("c", 1)) for i in ("x", "y")])
    model = itemknn.fit(d, k=40, shrinkage=0)
    assert model.similarity("x", "y") == pytest.approx(1.0)
    assert model.similarity("y", "x") == pytest.approx(1.0)


def test_no_common_rater_absent():
    d = Dataset.from_triples([("a", "x", 5), ("b", "y", 4)])
    model = itemknn.fit(d, shrinkage=0)
    assert model.similarity("x", "y") == 0.0
    assert model.neighbors.nnz == 0


def test_hand_cosine():
    d = Dataset.from_triples([("a", "i", 5), ("b", "i", 3), ("a", "j", 3), ("b", "j", 5)])
    model = itemknn.fit(d, shrinkage=0)
    assert model.similarity("i", "j") == pytest.approx(30 / 34)


def test_shrinkage_damps_by_corater_count():
    d = Dataset.from_triples([("a", "i", 5), ("b", "i", 3), ("a", "j", 3), ("b", "j", 5)])
    model = itemknn.fit(d, shrinkage=10)
    assert model.similarity("i", "j") == pytest.approx(30 / 34 * 2 / 12)


def test_self_similarity_not_stored():
    d = Dataset.from_triples([("a", "i", 5), ("a", "j", 4), ("b", "i", 1)])
    model = itemknn.fit(d)
    assert all(model.neighbors[k, k] == 0 for k in range(len(model.items)))


def random_dataset(seed, users=30, items=25, density=0.3):
    rng = np.random.default_rng(seed)
    rows = []
    for u in range(users):
        for i in range(items):
            if rng.random() < density:
                rows.append((f"u{u:02d}", f"i{i:02d}", float(rng.integers(1, 6))))
    return Dataset.from_triples(rows)


def brute_similarity(d, a, b, shrinkage):
    pa, pb = {}, {}
    for u, prof in d.profiles().items():
        if a in prof:
            pa[u] = prof[a]
        if b in prof:
            pb[u] = prof[b]
    common = set(pa) & set(pb)
    if not common:
        return 0.0
    dot = sum(pa[u] * pb[u] for u in common)
    cos = dot / (math.sqrt(sum(v * v for v in pa.values())) * math.sqrt(sum(v * v for v in pb.values())))
    return cos * len(common) / (len(common) + shrinkage)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_similarity_matches_brute_force(seed):
    d = random_dataset(seed)
    model = itemknn.fit(d, k=1000, shrinkage=10)
    for a in d.items[:8]:
        for b in d.items[:8]:
            if a != b:
                assert model.similarity(a, b) == pytest.approx(brute_similarity(d, a, b, 10), abs=1e-12)


def test_topk_truncation_and_symmetric_values():
    d = random_dataset(5)
    k = 4
    model = itemknn.fit(d, k=k, shrinkage=10)
    W = model.neighbors
    assert max(np.diff(W.indptr)) <= k
    full = itemknn.fit(d, k=1000, shrinkage=10).neighbors.toarray()
    dense = W.toarray()
    for i, j in zip(*dense.nonzero()):
        assert dense[i, j] == pytest.approx(full[j, i])
        # kept neighbours are the k strongest
        assert dense[i, j] >= np.sort(full[i])[-k] - 1e-12


def test_single_neighbour_score_is_rating():
    # u rated only j (5); i's only neighbour is j
    rows = [("u", "j", 5), ("v", "j", 4), ("v", "i", 2), ("w", "i", 3), ("w", "j", 1)]
    d = Dataset.from_triples(rows)
    model = itemknn.fit(d, shrinkage=0)
    cands = itemknn.recommend(model, "u", d, m=10)
    assert cands.items == ("i",)
    assert cands.scores[0] == pytest.approx(5.0)


def brute_scores(model, d, u):
    prof = d.profile(u)
    out = {}
    for i in model.items:
        if i in prof:
            continue
        num = den = 0.0
        for j, r in prof.items():
            s = model.similarity(i, j)
            if s != 0:
                num += s * r
                den += abs(s)
        if den > 0:
            out[i] = num / den
    return out


@pytest.mark.parametrize("seed", [0, 3])
def test_recommend_matches_brute_force(seed):
    d = random_dataset(seed)
    model = itemknn.fit(d, k=6, shrinkage=10)
    cands = itemknn.recommend_all(model, d, m=100)
    counts = d.item_counts
    for u in d.users[:10]:
        expected = brute_scores(model, d, u)
        ranked = sorted(expected, key=lambda i: (-round(expected[i], 12), -counts[i], i))
        got = cands[u]
        assert list(got.items) == ranked
        for i, s in zip(got.items, got.scores):
            assert s == pytest.approx(expected[i], abs=1e-12)


def test_candidates_exclude_profile_and_truncate():
    d = random_dataset(7)
    model = itemknn.fit(d)
    cands = itemknn.recommend_all(model, d, m=5)
    for u, c in cands.items():
        assert len(c) <= 5
        assert not set(c.items) & set(d.profile(u))
        assert list(c.scores) == sorted(c.scores, reverse=True)


def test_ties_broken_by_popularity_then_id():
    # all ratings 1 -> every score is 1, order is popularity then id
    rows = [("a", "p", 1), ("b", "p", 1), ("c", "p", 1), ("a", "q", 1), ("b", "q", 1), ("a", "r", 1),
            ("b", "s", 1), ("z", "p", 1), ("z", "q", 1), ("z", "r", 1), ("z", "s", 1), ("c", "x", 1)]
    d = Dataset.from_triples(rows)
    model = itemknn.fit(d)
    c = itemknn.recommend(model, "c", d)
    assert c.items == ("q", "r", "s")


def test_scaling_one_users_ratings_keeps_order():
    d = random_dataset(11)
    model = itemknn.fit(d)
    u = d.users[0]
    before = itemknn.recommend(model, u, d, m=50)
    doubled = Dataset(d.frame.assign(rating=np.where(d.frame.user == u, d.frame.rating * 2, d.frame.rating)))
    after = itemknn.recommend(model, u, doubled, m=50)
    assert after.items == before.items
    np.testing.assert_allclose(after.scores, 2 * np.array(before.scores))


def test_recommend_unknown_user():
    d = random_dataset(1)
    with pytest.raises(ValueError):
        itemknn.recommend(itemknn.fit(d), "nobody", d)


def test_candidates_file_roundtrip(tmp_path):
    d = random_dataset(2)
    cands = itemknn.recommend_all(itemknn.fit(d), d, m=7)
    itemknn.write_candidates(cands, tmp_path / "c.tsv")
    back = itemknn.read_candidates(tmp_path / "c.tsv")
    assert back == {u: c for u, c in cands.items() if len(c)}
    # byte-identical on a second run
    itemknn.write_candidates(itemknn.recommend_all(itemknn.fit(d), d, m=7), tmp_path / "c2.tsv")
    assert (tmp_path / "c.tsv").read_bytes() == (tmp_path / "c2.tsv").read_bytes()
