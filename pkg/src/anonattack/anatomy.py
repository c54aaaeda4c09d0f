"""Anatomy-style l-diverse releases and group merging.

A release partitions the rows into groups and publishes, per group, the
multiset of QI records and the multiset of SA values, withholding which
record carries which value. Base groups have size ``l`` (or ``l + 1``)
with pairwise distinct SA values.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .classifier import encode_counting, encode_sa, workload_domains
from .dataset import MISSING, Table
from .errors import ConfigError, DataError, EligibilityError


@dataclass(frozen=True)
class AnatomyRelease:
    """Grouped release over table-local row positions ``0..n-1``.

    ``members[group_ptr[g]:group_ptr[g+1]]`` are the rows of group ``g`` and
    ``group_sa`` over the same slice holds the group's SA multiset, sorted
    so that it carries no information about the row order. ``truth`` is the
    true SA code per row and is used only for scoring.
    """

    l: int
    qi: tuple[str, ...]
    domains: tuple[tuple[str, ...], ...]
    sa_domain: tuple[str, ...]
    X: np.ndarray  # (n, m) counting codes
    row_ids: np.ndarray
    group_ptr: np.ndarray
    members: np.ndarray
    group_sa: np.ndarray
    truth: np.ndarray | None = None
    merge_factor: int = 1

    @property
    def n(self) -> int:
        return len(self.row_ids)

    @property
    def n_groups(self) -> int:
        return len(self.group_ptr) - 1

    @property
    def sizes(self) -> np.ndarray:
        return np.diff(self.group_ptr)

    def group_index(self) -> np.ndarray:
        """Group id of every row position."""
        gid = np.empty(self.n, dtype=np.int64)
        gid[self.members] = np.repeat(np.arange(self.n_groups), self.sizes)
        return gid

    def group_rows(self, g: int) -> np.ndarray:
        return self.members[self.group_ptr[g]:self.group_ptr[g + 1]]

    def sa_multiset(self, g: int) -> list[str]:
        return [self.sa_domain[c] for c in self.group_sa[self.group_ptr[g]:self.group_ptr[g + 1]]]

    def qi_record(self, row: int) -> dict[str, str]:
        return {a: self.domains[i][self.X[row, i]] for i, a in enumerate(self.qi)}

    def truth_values(self) -> np.ndarray:
        if self.truth is None:
            raise DataError("release carries no ground truth")
        return np.asarray(self.sa_domain, dtype=object)[self.truth]


class Eligibility(NamedTuple):
    feasible: bool
    max_count: int
    value: str | None
    n: int


def check_eligibility(table: Table, l: int) -> Eligibility:
    """Anatomy is possible iff the most frequent SA value occurs at most n/l times."""
    if l < 2:
        raise ConfigError("l must be at least 2")
    col = table.column(table.schema.sa)
    counts = Counter(v for v in col.tolist() if v != MISSING)
    if not counts:
        return Eligibility(True, 0, None, 0)
    value, top = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    n = sum(counts.values())
    return Eligibility(top * l <= n, top, value, n)


def _pack(groups: list[list[int]], y: np.ndarray):
    sizes = np.array([len(g) for g in groups], dtype=np.int64)
    ptr = np.zeros(len(groups) + 1, dtype=np.int64)
    np.cumsum(sizes, out=ptr[1:])
    members = np.fromiter((r for g in groups for r in g), dtype=np.int64, count=int(ptr[-1]))
    group_sa = np.concatenate([np.sort(y[g]) for g in groups]).astype(np.int32) if groups else np.empty(0, np.int32)
    return ptr, members, group_sa


def group_sizes(n: int, l: int) -> list[int]:
    """``n // l`` group sizes, as even as possible, larger groups first.

    Sizes are ``l`` or ``l + 1`` whenever ``n % l <= n // l`` (always true
    once ``n >= l * (l - 1)``).
    """
    q = n // l
    if q == 0:
        return []
    base, extra = divmod(n, q)
    return [base + 1] * extra + [base] * (q - extra)


def anonymize(table: Table, l: int, rng: np.random.Generator) -> AnatomyRelease:
    """Greedy Anatomy bucketization.

    The group sizes are fixed up front (see :func:`group_sizes`). Each group
    of size ``k`` then takes one uniformly chosen remaining row from each of
    the ``k`` SA values with the most remaining rows (ties by domain order).
    Under eligibility (max SA count <= n/l) this largest-first rule never
    runs out of distinct values: it is Ryser's construction for a bipartite
    degree sequence, whose Gale-Ryser condition reduces to eligibility here.
    """
    elig = check_eligibility(table, l)
    if (table.column(table.schema.sa) == MISSING).any():
        raise DataError("drop rows with a missing sensitive value before anonymizing")
    if not elig.feasible:
        raise EligibilityError(
            f"not {l}-eligible: {elig.value!r} occurs {elig.max_count} times in {elig.n} rows "
            f"(limit {elig.n // l})",
            value=elig.value,
            count=elig.max_count,
        )
    domains, sa_domain = workload_domains(table)
    y = encode_sa(table, sa_domain)
    n_sa = len(sa_domain)
    pools = [list(rng.permutation(np.flatnonzero(y == s))) for s in range(n_sa)]
    remaining = np.array([len(p) for p in pools], dtype=np.int64)
    tiebreak = np.arange(n_sa)
    groups: list[list[int]] = []
    for size in group_sizes(len(y), l):
        top = np.lexsort((tiebreak, -remaining))[:size]
        if remaining[top[-1]] == 0:
            raise DataError("ran out of distinct SA values while forming a group")
        groups.append([int(pools[s].pop()) for s in top])
        remaining[top] -= 1
    ptr, members, group_sa = _pack(groups, y)
    return AnatomyRelease(
        l=l,
        qi=table.schema.qi,
        domains=domains,
        sa_domain=sa_domain,
        X=encode_counting(table, domains),
        row_ids=table.row_ids.copy(),
        group_ptr=ptr,
        members=members,
        group_sa=group_sa,
        truth=y,
    )


def merge_groups(release: AnatomyRelease, factor: int) -> AnatomyRelease:
    """Concatenate consecutive runs of ``factor`` groups (creation order).

    A trailing run shorter than ``factor`` becomes one group as-is. Each SA
    value then occurs at most ``factor`` times in a merged group, so the
    release stays l-diverse. ``factor == 1`` returns the release unchanged.
    """
    if factor < 1:
        raise ConfigError("merge factor must be at least 1")
    if factor == 1:
        return release
    if release.n_groups <= 1:
        return replace(release, merge_factor=release.merge_factor * factor)
    ptr = release.group_ptr[::factor]
    if ptr[-1] != release.group_ptr[-1]:
        ptr = np.append(ptr, release.group_ptr[-1])
    group_sa = release.group_sa.copy()
    for a, b in zip(ptr[:-1], ptr[1:]):
        group_sa[a:b].sort()
    return replace(
        release,
        group_ptr=ptr.astype(np.int64),
        group_sa=group_sa,
        merge_factor=release.merge_factor * factor,
    )


def validate(release: AnatomyRelease, base: bool = True) -> None:
    """Raise ``DataError`` if the release breaks any structural invariant."""
    n, l = release.n, release.l
    if np.any(np.sort(release.members) != np.arange(n)):
        raise DataError("groups do not partition the rows")
    if base and sorted(release.sizes.tolist()) != sorted(group_sizes(n, l)):
        raise DataError(f"group sizes {sorted(set(release.sizes.tolist()))} do not match the plan for n={n}, l={l}")
    for g in range(release.n_groups):
        a, b = release.group_ptr[g], release.group_ptr[g + 1]
        size = b - a
        mult = np.bincount(release.group_sa[a:b], minlength=1)
        if mult.max(initial=0) * l > size:
            raise DataError(f"group {g} is not {l}-diverse")
        if base and mult.max(initial=0) > 1:
            raise DataError(f"group {g} repeats an SA value")
        if release.truth is not None:
            truth = np.sort(release.truth[release.members[a:b]])
            if not np.array_equal(truth, release.group_sa[a:b]):
                raise DataError(f"group {g}: published SA multiset does not match the rows")


# ---------------------------------------------------------------------------
# CSV serialization


def write_release(release: AnatomyRelease, directory, include_truth: bool = True) -> None:
    """Write ``members.csv``, ``sa_multisets.csv``, ``meta.json`` and
    (evaluation only) ``truth.csv`` into ``directory``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "members.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group_id", "row_id", *release.qi])
        for g in range(release.n_groups):
            for r in release.group_rows(g):
                w.writerow([g, int(release.row_ids[r]), *release.qi_record(r).values()])
    with open(out / "sa_multisets.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["group_id", "sa_value", "multiplicity"])
        for g in range(release.n_groups):
            for value, k in sorted(Counter(release.sa_multiset(g)).items()):
                w.writerow([g, value, k])
    meta = {"l": release.l, "merge_factor": release.merge_factor, "qi": list(release.qi),
            "sa_domain": list(release.sa_domain)}
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    if include_truth and release.truth is not None:
        with open(out / "truth.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row_id", "sa_value"])
            for r in range(release.n):
                w.writerow([int(release.row_ids[r]), release.sa_domain[release.truth[r]]])


def read_release(directory) -> AnatomyRelease:
    src = Path(directory)
    meta = json.loads((src / "meta.json").read_text())
    qi = tuple(meta["qi"])
    sa_domain = tuple(meta["sa_domain"])
    with open(src / "members.csv", newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    groups: dict[int, list[int]] = {}
    row_ids = np.array([int(r[1]) for r in rows], dtype=np.int64)
    values = [r[2:] for r in rows]
    domains = tuple(tuple(sorted({v[i] for v in values})) for i in range(len(qi)))
    lookup = [{v: k for k, v in enumerate(d)} for d in domains]
    X = np.array([[lookup[i][v[i]] for i in range(len(qi))] for v in values], dtype=np.int32).reshape(len(rows), len(qi))
    for pos, r in enumerate(rows):
        groups.setdefault(int(r[0]), []).append(pos)
    sa_of = {s: k for k, s in enumerate(sa_domain)}
    multisets: dict[int, list[int]] = {}
    with open(src / "sa_multisets.csv", newline="") as fh:
        for g, value, k in list(csv.reader(fh))[1:]:
            multisets.setdefault(int(g), []).extend([sa_of[value]] * int(k))
    order = sorted(groups)
    ptr = np.zeros(len(order) + 1, dtype=np.int64)
    np.cumsum([len(groups[g]) for g in order], out=ptr[1:])
    members = np.array([p for g in order for p in groups[g]], dtype=np.int64)
    group_sa = np.array([s for g in order for s in sorted(multisets[g])], dtype=np.int32)
    truth = None
    if (src / "truth.csv").exists():
        with open(src / "truth.csv", newline="") as fh:
            by_id = {int(rid): sa_of[v] for rid, v in list(csv.reader(fh))[1:]}
        truth = np.array([by_id[int(r)] for r in row_ids], dtype=np.int32)
    return AnatomyRelease(
        l=int(meta["l"]), qi=qi, domains=domains, sa_domain=sa_domain, X=X, row_ids=row_ids,
        group_ptr=ptr, members=members, group_sa=group_sa, truth=truth,
        merge_factor=int(meta.get("merge_factor", 1)),
    )
