"""Naive Bayes attack classifier built from (possibly noisy) joint counts.

Conditionals use add-one smoothing over the clipped counts::

    Pr[v | s] = (1 + max(0, c[i,v,s])) / sum_t (1 + max(0, c[i,t,s]))

and the SA prior is estimated from the same smoothed counts summed over
every attribute and value, instead of from a separate SA marginal::

    Pr[s] = sum_i sum_t (1 + max(0, c[i,t,s])) / (same sum over all s')

Each row is counted once per attribute, so the numerator is roughly
``m * |{r : r_s = s}|`` and the ratio still estimates the marginal; dropping
the marginal keeps the workload's sensitivity at ``m``.

All probabilities are strictly positive, so scoring happens in log space
without guards. At prediction time a MISSING QI value, or a value absent
from the model's domain, contributes no factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .dataset import MISSING, Table, attribute_domain, encode
from .errors import ConfigError, DataError
from .workload import CountWorkload


@dataclass(frozen=True)
class NBModel:
    qi: tuple[str, ...]
    domains: tuple[tuple[str, ...], ...]
    sa_domain: tuple[str, ...]
    cond: np.ndarray  # (m, vmax, S); zero in padding cells
    prior: np.ndarray  # (S,)

    @property
    def m(self) -> int:
        return len(self.qi)

    @cached_property
    def log_cond(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.cond > 0, np.log(np.where(self.cond > 0, self.cond, 1.0)), 0.0)

    @cached_property
    def log_prior(self) -> np.ndarray:
        return np.log(self.prior)

    @cached_property
    def mask(self) -> np.ndarray:
        sizes = np.array([len(d) for d in self.domains])
        valid = np.arange(self.cond.shape[1])[None, :] < sizes[:, None]
        return np.broadcast_to(valid[:, :, None], self.cond.shape)

    def joint(self) -> np.ndarray:
        """``Pr[v|s] * Pr[s]`` per (i, v, s); zero in padding cells."""
        return self.cond * self.prior[None, None, :]

    def prob(self, attr: str, value: str, sa: str) -> float:
        i = self.qi.index(attr)
        return float(self.cond[i, self.domains[i].index(value), self.sa_domain.index(sa)])

    def same_domains(self, other: "NBModel") -> bool:
        return (
            self.qi == other.qi
            and self.domains == other.domains
            and self.sa_domain == other.sa_domain
        )


def workload_domains(table: Table) -> tuple[tuple[tuple[str, ...], ...], tuple[str, ...]]:
    """QI domains and SA domain observed in ``table``."""
    s = table.schema
    return (
        tuple(attribute_domain(table, a) for a in s.qi),
        tuple(v for v in attribute_domain(table, s.sa) if v != MISSING),
    )


def encode_counting(table: Table, domains) -> np.ndarray:
    """Per-row QI codes used for counting; MISSING is an ordinary category."""
    qi = table.schema.qi
    X = np.empty((table.n, len(qi)), dtype=np.int32)
    for i, a in enumerate(qi):
        X[:, i] = encode(table.column(a), domains[i])
    return X


def encode_sa(table: Table, sa_domain) -> np.ndarray:
    return encode(table.column(table.schema.sa), sa_domain)


def evidence_codes(model: NBModel, table_or_codes) -> np.ndarray:
    """QI codes used for scoring: MISSING and unseen values become -1."""
    if isinstance(table_or_codes, Table):
        table = table_or_codes
        X = np.empty((table.n, model.m), dtype=np.int32)
        for i, a in enumerate(model.qi):
            X[:, i] = encode(table.column(a), model.domains[i])
    else:
        X = np.array(table_or_codes, dtype=np.int32, copy=True)
    for i, dom in enumerate(model.domains):
        if MISSING in dom:
            X[X[:, i] == dom.index(MISSING), i] = -1
    return X


def exact_counts(table: Table, domains=None, sa_domain=None) -> CountWorkload:
    """Exact joint counts of ``table``; domains default to those observed in it."""
    if domains is None or sa_domain is None:
        d, s = workload_domains(table)
        domains = d if domains is None else domains
        sa_domain = s if sa_domain is None else sa_domain
    domains = tuple(tuple(d) for d in domains)
    sa_domain = tuple(sa_domain)
    vmax = max([len(d) for d in domains] + [1])
    X = encode_counting(table, domains)
    y = encode_sa(table, sa_domain)
    counts = kernels.count_joint(X, y, vmax, max(len(sa_domain), 1))
    if not sa_domain:
        counts = counts[:, :, :0]
    return CountWorkload(table.schema.qi, domains, sa_domain, counts.astype(np.float64), clipped=True)


def fit(counts: CountWorkload) -> NBModel:
    if not counts.sa_domain:
        raise ConfigError("cannot fit a classifier with an empty SA domain")
    if any(len(d) == 0 for d in counts.domains):
        raise ConfigError("every QI attribute needs a non-empty domain")
    mask = counts.mask
    smoothed = np.where(mask, 1.0 + np.maximum(0.0, counts.values), 0.0)
    denom = smoothed.sum(axis=1, keepdims=True)
    cond = smoothed / denom
    prior_num = smoothed.sum(axis=(0, 1))
    prior = prior_num / prior_num.sum()
    return NBModel(counts.qi, counts.domains, counts.sa_domain, cond, prior)


def fit_table(table: Table) -> NBModel:
    """Noiseless classifier: ``fit(exact_counts(table))``."""
    return fit(exact_counts(table))


def _normalize_log(scores: np.ndarray) -> np.ndarray:
    scores = scores - scores.max(axis=-1, keepdims=True)
    p = np.exp(scores)
    return p / p.sum(axis=-1, keepdims=True)


def _record_codes(model: NBModel, qi: Mapping[str, str]) -> np.ndarray:
    x = np.full((1, model.m), -1, dtype=np.int32)
    for i, a in enumerate(model.qi):
        v = qi.get(a, MISSING)
        if v != MISSING and v in model.domains[i]:
            x[0, i] = model.domains[i].index(v)
    return x


def log_scores(model: NBModel, X: np.ndarray) -> np.ndarray:
    """Unnormalized ``log Pr[s] + sum_i log Pr[x_i|s]`` for evidence codes ``X``."""
    return kernels.log_joint(np.ascontiguousarray(X, dtype=np.int32), model.log_cond, model.log_prior)


def posterior(model: NBModel, qi: Mapping[str, str]) -> np.ndarray:
    return _normalize_log(log_scores(model, _record_codes(model, qi)))[0]


def posterior_matrix(model: NBModel, table: Table) -> np.ndarray:
    return _normalize_log(log_scores(model, evidence_codes(model, table)))


def predict(model: NBModel, qi: Mapping[str, str]) -> str:
    return model.sa_domain[int(np.argmax(posterior(model, qi)))]


def predict_codes(model: NBModel, X: np.ndarray) -> np.ndarray:
    """Argmax SA codes; ``np.argmax`` keeps the first maximum, i.e. domain order."""
    return np.argmax(log_scores(model, X), axis=1)


def predict_table(model: NBModel, table: Table) -> np.ndarray:
    codes = predict_codes(model, evidence_codes(model, table))
    return np.asarray(model.sa_domain, dtype=object)[codes]


def posterior_restricted(model: NBModel, qi: Mapping[str, str], allowed: Sequence[str]) -> np.ndarray:
    """Posterior reweighted by the multiplicity of each SA value in ``allowed``."""
    if len(allowed) == 0:
        raise DataError("allowed SA multiset is empty")
    mult = np.zeros(len(model.sa_domain))
    for s in allowed:
        mult[model.sa_domain.index(s)] += 1
    w = posterior(model, qi) * mult
    total = w.sum()
    if total <= 0:  # only if every allowed weight underflowed
        return mult / mult.sum()
    return w / total


def high_confidence(model: NBModel, table: Table, threshold: float = 0.8):
    """Rows whose top posterior exceeds ``threshold``.

    Returns ``(row_indices, accuracy, size)``; accuracy is NaN for an
    empty subset.
    """
    if not 0.0 < threshold < 1.0:
        raise ConfigError("threshold must lie strictly between 0 and 1")
    post = posterior_matrix(model, table)
    top = post.max(axis=1)
    idx = np.flatnonzero(top > threshold)
    if len(idx) == 0:
        return idx, float("nan"), 0
    pred = np.asarray(model.sa_domain, dtype=object)[np.argmax(post[idx], axis=1)]
    truth = table.column(table.schema.sa)[idx]
    return idx, float(np.mean(pred == truth)), len(idx)


# ---------------------------------------------------------------------------
# plain-text dump: attr<TAB>value<TAB>sa<TAB>probability; prior rows use attr "*"

PRIOR_KEY = "*"


def dump_model(model: NBModel, path) -> None:
    lines = ["attr\tvalue\tsa\tprobability"]
    for j, s in enumerate(model.sa_domain):
        lines.append(f"{PRIOR_KEY}\t{PRIOR_KEY}\t{s}\t{float(model.prior[j])!r}")
    for i, a in enumerate(model.qi):
        for k, v in enumerate(model.domains[i]):
            for j, s in enumerate(model.sa_domain):
                lines.append(f"{a}\t{v}\t{s}\t{float(model.cond[i, k, j])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> NBModel:
    prior: dict[str, float] = {}
    cells: dict[str, dict[str, dict[str, float]]] = {}
    qi: list[str] = []
    for line in Path(path).read_text().splitlines()[1:]:
        a, v, s, p = line.split("\t")
        if a == PRIOR_KEY:
            prior[s] = float(p)
            continue
        if a not in cells:
            cells[a] = {}
            qi.append(a)
        cells[a].setdefault(v, {})[s] = float(p)
    sa_domain = tuple(prior)
    domains = tuple(tuple(cells[a]) for a in qi)
    vmax = max(len(d) for d in domains)
    cond = np.zeros((len(qi), vmax, len(sa_domain)))
    for i, a in enumerate(qi):
        for k, v in enumerate(domains[i]):
            cond[i, k] = [cells[a][v][s] for s in sa_domain]
    return NBModel(tuple(qi), domains, sa_domain, cond, np.array([prior[s] for s in sa_domain]))
