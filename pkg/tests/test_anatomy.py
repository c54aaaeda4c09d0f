import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anonattack.anatomy import (
    anonymize,
    check_eligibility,
    group_sizes,
    merge_groups,
    read_release,
    validate,
    write_release,
)
from anonattack.dataset import MISSING, Schema, Table
from anonattack.errors import ConfigError, DataError, EligibilityError

SCHEMA = Schema(("a", "b", "s"), ("a", "b"), "s")


def random_table(rng, n, n_sa, skew=1.0):
    p = rng.dirichlet(np.full(n_sa, skew))
    sa = rng.choice(n_sa, size=n, p=p)
    rows = [
        {"a": f"a{rng.integers(3)}", "b": f"b{rng.integers(4)}", "s": f"s{v:02d}"}
        for v in sa
    ]
    return Table.from_rows(SCHEMA, rows)


def partition_feasible(labels, l):
    """Exhaustive search: can the rows be split into groups of size >= l
    whose SA values are pairwise distinct?"""
    n = len(labels)

    def rec(remaining):
        if not remaining:
            return True
        first, rest = remaining[0], remaining[1:]
        # choose the rest of first's group as a subset of rest
        def grow(group, idx):
            if len(group) >= l:
                left = [r for r in rest if r not in group]
                if rec(left):
                    return True
            for j in range(idx, len(rest)):
                r = rest[j]
                if all(labels[r] != labels[g] for g in group):
                    if grow(group + [r], j + 1):
                        return True
            return False

        return grow([first], 0)

    return rec(list(range(n)))


@pytest.mark.parametrize("n", range(1, 9))
@pytest.mark.parametrize("l", [2, 3, 4])
def test_eligibility_matches_brute_force(n, l):
    rng = np.random.default_rng(n * 10 + l)
    for _ in range(25):
        labels = rng.integers(0, rng.integers(1, 5), n).tolist()
        t = Table.from_rows(SCHEMA, [{"a": "x", "b": "y", "s": str(v)} for v in labels])
        assert check_eligibility(t, l).feasible == partition_feasible(labels, l)


def test_anonymize_invariants_1000_seeds():
    done = 0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 201))
        l = int(rng.integers(2, 8))
        t = random_table(rng, n, int(rng.integers(l, 16)), skew=float(rng.uniform(0.3, 5)))
        if not check_eligibility(t, l).feasible:
            with pytest.raises(EligibilityError):
                anonymize(t, l, rng)
            continue
        rel = anonymize(t, l, rng)
        validate(rel)
        assert np.array_equal(rel.truth_values(), t.column("s"))
        done += 1
    assert done > 300


@given(st.integers(1, 500), st.integers(2, 10))
def test_group_sizes(n, l):
    sizes = group_sizes(n, l)
    assert sum(sizes) == (n if n >= l else 0)
    assert len(sizes) == n // l
    if sizes:
        assert max(sizes) - min(sizes) <= 1 and min(sizes) >= l
        assert sizes == sorted(sizes, reverse=True)


def test_eligibility_error_carries_value():
    t = Table.from_rows(SCHEMA, [{"a": "x", "b": "y", "s": v} for v in "aaab"])
    with pytest.raises(EligibilityError) as info:
        anonymize(t, 2, np.random.default_rng(0))
    assert info.value.value == "a" and info.value.count == 3


def test_anonymize_rejects_missing_sa():
    t = Table.from_rows(SCHEMA, [{"a": "x", "b": "y", "s": v} for v in ["a", "b", MISSING]])
    with pytest.raises(DataError):
        anonymize(t, 2, np.random.default_rng(0))


def test_l_below_two():
    t = random_table(np.random.default_rng(0), 10, 5)
    with pytest.raises(ConfigError):
        check_eligibility(t, 1)


def test_anonymize_seeded():
    t = random_table(np.random.default_rng(1), 120, 8, skew=50)
    a = anonymize(t, 3, np.random.default_rng(5))
    b = anonymize(t, 3, np.random.default_rng(5))
    assert np.array_equal(a.members, b.members) and np.array_equal(a.group_ptr, b.group_ptr)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(2, 5), st.integers(1, 4))
def test_merge_groups(seed, l, factor):
    rng = np.random.default_rng(seed)
    t = random_table(rng, int(rng.integers(l, 150)), 12, skew=5.0)
    if not check_eligibility(t, l).feasible:
        return
    base = anonymize(t, l, rng)
    merged = merge_groups(base, factor)
    validate(merged, base=factor == 1)
    assert np.array_equal(merged.members, base.members)
    assert merged.n_groups == -(-base.n_groups // factor)
    assert merged.merge_factor == factor
    if factor == 1:
        assert merged is base


def test_merge_rejects_zero():
    t = random_table(np.random.default_rng(0), 20, 10, skew=50)
    with pytest.raises(ConfigError):
        merge_groups(anonymize(t, 2, np.random.default_rng(0)), 0)


def test_write_read_roundtrip(tmp_path):
    t = random_table(np.random.default_rng(2), 60, 10, skew=50)
    rel = merge_groups(anonymize(t, 3, np.random.default_rng(2)), 2)
    write_release(rel, tmp_path)
    back = read_release(tmp_path)
    assert back.l == 3 and back.merge_factor == 2
    assert np.array_equal(back.group_ptr, rel.group_ptr)
    assert np.array_equal(back.group_sa, rel.group_sa)
    for g in range(rel.n_groups):
        assert back.sa_multiset(g) == rel.sa_multiset(g)
        assert [back.qi_record(r) for r in back.group_rows(g)] == [rel.qi_record(r) for r in rel.group_rows(g)]
    assert back.truth_values().tolist() == [rel.truth_values()[list(rel.row_ids).index(i)] for i in back.row_ids]
    validate(back, base=False)


def test_write_without_truth(tmp_path):
    t = random_table(np.random.default_rng(3), 30, 10, skew=50)
    write_release(anonymize(t, 2, np.random.default_rng(3)), tmp_path, include_truth=False)
    assert not (tmp_path / "truth.csv").exists()
    assert read_release(tmp_path).truth is None


def _table(sa):
    return Table.from_rows(SCHEMA, [{"a": f"a{k}", "b": "b", "s": v} for k, v in enumerate(sa)])


def test_small_examples():
    rel = anonymize(_table("aabb"), 2, np.random.default_rng(0))
    assert [rel.sa_multiset(g) for g in range(rel.n_groups)] == [["a", "b"], ["a", "b"]]
    rel = anonymize(_table("aabbc"), 2, np.random.default_rng(0))
    assert sorted(rel.sizes.tolist()) == [2, 3]
    validate(rel)
    assert not check_eligibility(_table("aaab"), 2).feasible


@pytest.mark.parametrize("groups,factor,expected", [(4, 2, [4, 4]), (9, 3, [6, 6, 6]), (5, 2, [4, 4, 2])])
def test_merge_shapes(groups, factor, expected):
    rel = anonymize(_table([chr(97 + k % 2) for k in range(2 * groups)]), 2, np.random.default_rng(0))
    assert merge_groups(rel, factor).sizes.tolist() == expected
