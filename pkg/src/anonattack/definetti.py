"""The deFinetti attack on Anatomy releases.

The sampler state assigns every row one value from its group's SA
multiset (a per-group bijection). The assignment induces joint counts and
hence a Naive Bayes model. Each sweep visits every group once, proposes
swapping the SA values of two uniformly chosen members, and accepts with
probability ``min(1, R)`` where, under the model frozen for that sweep::

    R = prod_i Pr[a_i | s_b] Pr[b_i | s_a] / (Pr[a_i | s_a] Pr[b_i | s_b])

Prior factors cancel: a swap leaves the multiset of assigned SA values,
and so ``prod_r Pr[s_r]``, unchanged. After each sweep the model is
re-estimated from the updated counts.

Predictions come in three flavours: ``permutation`` (majority of the row's
recent assignments), ``group`` (posterior restricted to the group's SA
multiset) and ``open`` (plain classifier, ignoring groups).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import kernels
from .anatomy import AnatomyRelease
from .classifier import NBModel, fit, log_scores, predict
from .dataset import MISSING
from .errors import ConfigError, DataError
from .workload import CountWorkload

METHODS = ("permutation", "group", "open")


@dataclass
class AssignmentState:
    release: AnatomyRelease
    assign: np.ndarray  # (n,) int32: SA code currently given to each row
    counts: np.ndarray  # (m, vmax, S) int64 counts induced by ``assign``

    def workload(self) -> CountWorkload:
        r = self.release
        return CountWorkload(r.qi, r.domains, r.sa_domain, self.counts.astype(np.float64), clipped=True)

    def recount(self) -> np.ndarray:
        return kernels.count_joint(self.release.X, self.assign, self.counts.shape[1], self.counts.shape[2])

    def check(self) -> None:
        """Raise if the assignment or counts drifted from their invariants."""
        r = self.release
        for g in range(r.n_groups):
            a, b = r.group_ptr[g], r.group_ptr[g + 1]
            if not np.array_equal(np.sort(self.assign[r.members[a:b]]), r.group_sa[a:b]):
                raise DataError(f"group {g}: assignment is not a permutation of its SA multiset")
        if not np.array_equal(self.recount(), self.counts):
            raise DataError("incremental counts disagree with a full recount")


@dataclass
class SamplerTrace:
    sa_domain: tuple[str, ...]
    l1: np.ndarray  # (iterations,) L1 distance between consecutive models
    accepted: np.ndarray  # (iterations,) accepted swaps per sweep
    history: np.ndarray  # (window, n) assignments after the last sweeps, oldest first


def _slot_groups(release: AnatomyRelease) -> np.ndarray:
    return np.repeat(np.arange(release.n_groups), release.sizes)


def _vmax(release: AnatomyRelease) -> int:
    return max([len(d) for d in release.domains] + [1])


def evidence_matrix(release: AnatomyRelease) -> np.ndarray:
    """Release codes with MISSING replaced by -1 (no likelihood factor)."""
    X = np.array(release.X, dtype=np.int32, copy=True)
    for i, dom in enumerate(release.domains):
        if MISSING in dom:
            X[X[:, i] == dom.index(MISSING), i] = -1
    return X


def init(release: AnatomyRelease, rng: np.random.Generator) -> AssignmentState:
    """Uniformly random bijection between each group's rows and SA multiset."""
    order = np.lexsort((rng.random(release.n), _slot_groups(release)))
    assign = np.empty(release.n, dtype=np.int32)
    assign[release.members] = release.group_sa[order]
    counts = kernels.count_joint(release.X, assign, _vmax(release), max(len(release.sa_domain), 1))
    return AssignmentState(release, assign, counts)


def estimate(state: AssignmentState) -> NBModel:
    return fit(state.workload())


def propose(release: AnatomyRelease, rng: np.random.Generator):
    """One uniform pair of distinct in-group positions per group, plus log-uniforms."""
    sizes = release.sizes
    u = rng.random((3, release.n_groups))
    pos_a = np.floor(u[0] * sizes).astype(np.int64)
    pos_b = np.floor(u[1] * np.maximum(sizes - 1, 0)).astype(np.int64)
    pos_b += pos_b >= pos_a
    with np.errstate(divide="ignore"):
        log_u = np.log(u[2])
    return pos_a, pos_b, log_u


def sweep(
    state: AssignmentState,
    model: NBModel,
    rng: np.random.Generator,
    evidence: np.ndarray | None = None,
) -> int:
    """One Metropolis swap proposal per group; returns the number accepted."""
    r = state.release
    if evidence is None:
        evidence = evidence_matrix(r)
    pos_a, pos_b, log_u = propose(r, rng)
    return int(
        kernels.sweep(
            r.X, evidence, state.assign, r.group_ptr, r.members,
            pos_a, pos_b, log_u, model.log_cond, state.counts,
        )
    )


def l1_convergence(model_a: NBModel, model_b: NBModel) -> float:
    """``sum |Pr_a[v|s] Pr_a[s] - Pr_b[v|s] Pr_b[s]|`` over all workload cells."""
    if not model_a.same_domains(model_b):
        raise ConfigError("models are defined over different domains")
    diff = np.abs(model_a.joint() - model_b.joint())
    return float(diff[model_a.mask].sum())


def run(
    release: AnatomyRelease,
    iterations: int = 1000,
    window: int = 100,
    rng: np.random.Generator | None = None,
    debug: bool = False,
) -> tuple[NBModel, AssignmentState, SamplerTrace]:
    if iterations < 1:
        raise ConfigError("iterations must be at least 1")
    if window < 1:
        raise ConfigError("window must be at least 1")
    rng = np.random.default_rng() if rng is None else rng
    window = min(window, iterations)
    evidence = evidence_matrix(release)
    state = init(release, rng)
    model = estimate(state)
    l1 = np.zeros(iterations)
    accepted = np.zeros(iterations, dtype=np.int64)
    history = np.empty((window, release.n), dtype=np.int16)
    first_recorded = iterations - window
    for t in range(iterations):
        accepted[t] = sweep(state, model, rng, evidence)
        new = estimate(state)
        l1[t] = l1_convergence(model, new)
        model = new
        if t >= first_recorded:
            history[t - first_recorded] = state.assign
        if debug:
            state.check()
    return model, state, SamplerTrace(release.sa_domain, l1, accepted, history)


# ---------------------------------------------------------------------------
# predictions


def permutation_codes(trace: SamplerTrace) -> np.ndarray:
    """Majority SA code per row over the history window; ties go to the
    value assigned most recently."""
    window, n = trace.history.shape
    rows = np.arange(n)
    votes = np.zeros((n, len(trace.sa_domain)), dtype=np.int64)
    last = np.full_like(votes, -1)
    for w in range(window):
        h = trace.history[w]
        votes[rows, h] += 1
        last[rows, h] = w
    return np.argmax(votes * (window + 1) + last, axis=1)


def predict_permutation(trace: SamplerTrace, row: int) -> str:
    h = trace.history[:, row]
    votes = np.bincount(h, minlength=len(trace.sa_domain))
    tied = np.flatnonzero(votes == votes.max())
    for code in h[::-1]:
        if code in tied:
            return trace.sa_domain[int(code)]
    raise AssertionError("unreachable")


def group_multiplicity(release: AnatomyRelease) -> np.ndarray:
    """(n_groups, S) count of each SA value in each group's multiset."""
    mult = np.zeros((release.n_groups, len(release.sa_domain)), dtype=np.int64)
    np.add.at(mult, (_slot_groups(release), release.group_sa), 1)
    return mult


def group_codes(model: NBModel, release: AnatomyRelease, evidence: np.ndarray | None = None) -> np.ndarray:
    """Argmax of the posterior restricted to (and weighted by) each row's group multiset."""
    if evidence is None:
        evidence = evidence_matrix(release)
    scores = log_scores(model, evidence)
    mult = group_multiplicity(release)[release.group_index()]
    with np.errstate(divide="ignore"):
        scores = scores + np.log(mult)
    return np.argmax(scores, axis=1)


def predict_group(model: NBModel, release: AnatomyRelease, row: int) -> str:
    g = int(release.group_index()[row])
    a, b = release.group_ptr[g], release.group_ptr[g + 1]
    mult = np.bincount(release.group_sa[a:b], minlength=len(release.sa_domain))
    scores = log_scores(model, evidence_matrix(release)[row:row + 1])[0]
    with np.errstate(divide="ignore"):
        scores = scores + np.log(mult)
    return release.sa_domain[int(np.argmax(scores))]


def open_codes(model: NBModel, release: AnatomyRelease, evidence: np.ndarray | None = None) -> np.ndarray:
    if evidence is None:
        evidence = evidence_matrix(release)
    return np.argmax(log_scores(model, evidence), axis=1)


def predict_open(model: NBModel, qi: Mapping[str, str]) -> str:
    return predict(model, qi)


def method_accuracies(
    model: NBModel, release: AnatomyRelease, trace: SamplerTrace, methods=METHODS
) -> dict[str, float]:
    if release.truth is None:
        raise DataError("release carries no ground truth")
    evidence = evidence_matrix(release)
    out = {}
    for method in methods:
        if method == "permutation":
            codes = permutation_codes(trace)
        elif method == "group":
            codes = group_codes(model, release, evidence)
        elif method == "open":
            codes = open_codes(model, release, evidence)
        else:
            raise ConfigError(f"unknown method {method!r}")
        out[method] = float(np.mean(codes == release.truth))
    return out
