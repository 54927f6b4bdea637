import itertools
import math
import random

import pytest
from hypothesis import given, strategies as st

from cdsal.errors import ConfigError, ParseError
from cdsal.stats import (ALL, ANY, Cell, ScoreRecord, ScoreTable, Summary, aggregate, describe,
                         overlaps, rank_sequences, sequence_means, top_performers)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_describe_hand_example():
    c = describe([0.0, 1.0])
    assert c.mean == 0.5 and c.n == 2
    assert c.sem == pytest.approx(0.5, abs=1e-15)
    assert c.ci_low == pytest.approx(0.5 - 0.98, abs=1e-12)
    assert c.ci_high == pytest.approx(0.5 + 0.98, abs=1e-12)


def test_describe_single_and_empty():
    assert describe([3.0]) == Cell(3.0, 0.0, 3.0, 3.0, 1)
    assert describe([], skipped=4).empty


@given(st.lists(finite, min_size=2, max_size=40), st.randoms())
def test_describe_permutation_invariant(vals, r):
    shuffled = vals[:]
    r.shuffle(shuffled)
    a, b = describe(sorted(vals)), describe(sorted(shuffled))
    assert a == b
    c = describe(shuffled)
    assert c.mean == pytest.approx(a.mean, abs=1e-9) and c.sem == pytest.approx(a.sem, abs=1e-9)


@given(st.lists(finite, min_size=2, max_size=40), st.floats(-100, 100))
def test_describe_shift(vals, k):
    a, b = describe(vals), describe([v + k for v in vals])
    assert b.mean == pytest.approx(a.mean + k, abs=1e-9)
    assert b.sem == pytest.approx(a.sem, abs=1e-6)


def _rec(m, s, f, v, metric="auc", ft="P"):
    return ScoreRecord(m, s, f, ft, metric, v)


def test_table_rejects_duplicates_and_nan():
    t = ScoreTable([_rec("a", "s", 0, 0.5)])
    with pytest.raises(ValueError):
        t.add(_rec("a", "s", 0, 0.6))
    with pytest.raises(ValueError):
        t.add(_rec("a", "s", 1, float("nan")))


def test_table_csv_round_trip(tmp_path):
    t = ScoreTable([_rec("b", "s", 2, None), _rec("a", "s", 1, 0.1 + 0.2), _rec("a", "r", 0, -1e-300, ft="I")])
    t.write_csv(tmp_path / "s.csv")
    back = ScoreTable.read_csv(tmp_path / "s.csv")
    assert back.records() == t.records()
    (tmp_path / "bad.csv").write_text("x,y\n")
    with pytest.raises(ParseError):
        ScoreTable.read_csv(tmp_path / "bad.csv")


def test_aggregate_cells_and_marginals():
    recs = [_rec("m", "s1", 0, 0.0), _rec("m", "s1", 1, 1.0, ft="I"), _rec("m", "s2", 0, None),
            _rec("m", "s2", 1, math.inf)]
    summ = aggregate(recs)
    assert summ.cell("m", "s1", "auc") == describe([0.0, 1.0])
    assert summ.cell("m", "s1", "auc", "I").n == 1
    assert summ.cell("m", "s2", "auc").empty and summ.cell("m", "s2", "auc").skipped == 2
    assert summ.cell("m", ANY, "auc").n == 2
    assert ("m", "s1", "auc", "P") not in aggregate(recs, split_frame_types=False)
    with pytest.raises(ValueError):
        aggregate([])


def test_summary_csv_round_trip(tmp_path):
    summ = aggregate([_rec("m", "s", f, f / 7, ft="IP"[f % 2]) for f in range(6)])
    summ.write_csv(tmp_path / "a.csv")
    summ.write_split_csv(tmp_path / "b.csv")
    a, b = Summary.read_csv(tmp_path / "a.csv"), Summary.read_csv(tmp_path / "b.csv")
    assert a.cell("m", "s", "auc").mean == summ.cell("m", "s", "auc").mean
    assert set(b) == set(summ)


def _summary(means, sem=0.01):
    return Summary({(m, s, "auc", ALL): Cell(v, sem, v - 1.96 * sem, v + 1.96 * sem, 10)
                    for (m, s), v in means.items()})


def test_rank_sequences():
    summ = _summary({("a", "s1"): 0.6, ("b", "s1"): 0.8, ("a", "s2"): 0.9, ("b", "s2"): 0.9,
                     ("io", "s1"): 1.0, ("gauss", "s3"): 1.0, ("a", "s3"): 0.7})
    assert sequence_means(summ, "auc", exclude=("io", "gauss"))["s1"] == pytest.approx(0.7)
    assert rank_sequences(summ, "auc") == ["s2", "s1", "s3"]
    with pytest.raises(ConfigError):
        rank_sequences(summ, "nss")


def test_rank_ties_by_id():
    summ = _summary({("a", "z"): 0.5, ("a", "b"): 0.5})
    assert rank_sequences(summ, "auc") == ["b", "z"]


def test_top_performers_dominance():
    # "a" is far ahead on every sequence.
    means = {(m, s): v for s in ("s1", "s2", "s3") for m, v in (("a", 0.9), ("b", 0.6), ("c", 0.5))}
    assert top_performers(_summary(means), "auc") == {"a": 3, "b": 0, "c": 0}


def _top_brute(summ, metric, exclude):
    cells = {(k[0], k[1]): c for k, c in summ.items() if k[2] == metric and k[1] != ANY and k[0] not in exclude}
    models = sorted({m for m, _ in cells})
    out = {m: 0 for m in models}
    for s in sorted({s for _, s in cells}):
        here = [(m, cells[(m, s)]) for m in models if (m, s) in cells]
        best_mean = max(c.mean for _, c in here)
        best = sorted(m for m, c in here if c.mean == best_mean)[0]
        b = cells[(best, s)]
        for m, c in here:
            if max(c.ci_low, b.ci_low) <= min(c.ci_high, b.ci_high):
                out[m] += 1
    return out


@given(st.integers(0, 10_000))
def test_top_performers_brute_force(seed):
    r = random.Random(seed)
    summ = Summary()
    for m, s in itertools.product("abcd", ("s1", "s2", "s3", "s4")):
        v = r.choice([0.5, 0.6, 0.7, r.random()])
        sem = r.choice([0.0, 0.01, 0.05])
        summ[(m, s, "auc", ALL)] = Cell(v, sem, v - 1.96 * sem, v + 1.96 * sem, 5)
    assert top_performers(summ, "auc", exclude=("d",)) == _top_brute(summ, "auc", ("d",))


def test_overlaps_symmetric():
    a, b = Cell(0.5, 0.1, 0.3, 0.7, 3), Cell(0.8, 0.05, 0.7, 0.9, 3)
    assert overlaps(a, b) and overlaps(b, a)
    assert not overlaps(a, Cell(1.0, 0.0, 1.0, 1.0, 3))
