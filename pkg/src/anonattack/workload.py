"""The count workload: one count per (QI attribute, QI value, SA value)."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterator

import numpy as np


@dataclass(frozen=True)
class CountWorkload:
    """Joint counts ``c[i, v, s] = |{r : r_i = v and r_s = s}|``.

    ``values`` is padded to ``(m, vmax, S)``; cells with ``v`` beyond the
    size of attribute ``i``'s domain are not part of the workload and stay 0.
    No SA marginal is included, so one row touches exactly ``m`` entries and
    the L1 sensitivity is ``m``.
    """

    qi: tuple[str, ...]
    domains: tuple[tuple[str, ...], ...]
    sa_domain: tuple[str, ...]
    values: np.ndarray
    clipped: bool = True

    @property
    def m(self) -> int:
        return len(self.qi)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(d) for d in self.domains], dtype=np.int64)

    @property
    def vmax(self) -> int:
        return self.values.shape[1]

    @property
    def sensitivity(self) -> int:
        return self.m

    @property
    def mask(self) -> np.ndarray:
        """Boolean ``(m, vmax, S)`` array marking real workload entries."""
        valid = np.arange(self.vmax)[None, :] < self.sizes[:, None]
        return np.broadcast_to(valid[:, :, None], self.values.shape)

    def __len__(self) -> int:
        return int(self.sizes.sum()) * len(self.sa_domain)

    def entries(self) -> Iterator[tuple[tuple[str, str, str], float]]:
        for i, name in enumerate(self.qi):
            for k, v in enumerate(self.domains[i]):
                for j, s in enumerate(self.sa_domain):
                    yield (name, v, s), self.values[i, k, j]

    def as_dict(self) -> dict[tuple[str, str, str], float]:
        return dict(self.entries())

    def with_values(self, values: np.ndarray, clipped: bool) -> "CountWorkload":
        values = np.where(self.mask, values, 0)
        return replace(self, values=values, clipped=clipped)

    def same_keys(self, other: "CountWorkload") -> bool:
        return (
            self.qi == other.qi
            and self.domains == other.domains
            and self.sa_domain == other.sa_domain
        )
