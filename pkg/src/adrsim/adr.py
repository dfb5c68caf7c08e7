"""Active debris removal policies: random-k or top-k by risk index."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .catalog import Catalog, ObjectClass
from .constants import DAYS_PER_YEAR
from .risk import Ranking


class PolicyError(ValueError):
    pass


class PolicyKind(Enum):
    None_ = "None"
    RandomK = "RandomK"
    TopKByIndex = "TopKByIndex"


def _default_eligible():
    return ["DerelictPayload", "RocketBody", "Debris"]


@dataclass
class RemovalPolicy:
    kind: str = "None"
    k: int = 0
    cadence_years: float = 1.0
    index: str = "MITRI"  # tracker name used for TopKByIndex
    eligible: list = field(default_factory=_default_eligible)

    def __post_init__(self):
        self.kind_enum
        if self.k < 0 or int(self.k) != self.k:
            raise PolicyError("k must be a non-negative integer")
        if not self.cadence_years > 0:
            raise PolicyError("cadence_years must be positive")
        names = {c.name for c in ObjectClass}
        bad = [c for c in self.eligible if c not in names]
        if bad:
            raise PolicyError(f"unknown object classes in eligibility: {bad}")

    @property
    def kind_enum(self) -> PolicyKind:
        try:
            return PolicyKind(self.kind)
        except ValueError:
            raise PolicyError(f"unknown removal policy {self.kind!r}") from None

    @property
    def active(self) -> bool:
        return self.kind_enum != PolicyKind.None_ and self.k > 0

    def eligible_mask(self, catalog: Catalog) -> np.ndarray:
        codes = [int(ObjectClass[c]) for c in self.eligible]
        return np.isin(catalog.cls, codes)


def removal_due(t: float, policy: RemovalPolicy, dt: float = 5.0) -> bool:
    """True at the first step (ending at ``t`` days) at or after a cadence boundary."""
    if t < 0:
        raise PolicyError("t must be non-negative")
    if t == 0:
        return False
    period = policy.cadence_years * DAYS_PER_YEAR
    eps = 1e-9
    return math.floor(t / period + eps) > math.floor(max(t - dt, 0.0) / period + eps)


def campaign_epochs(horizon_days: float, policy: RemovalPolicy, dt: float = 5.0) -> list[float]:
    n = int(math.ceil(horizon_days / dt - 1e-9))
    return [s * dt for s in range(1, n + 1) if removal_due(s * dt, policy, dt)]


def select_removals(catalog: Catalog, policy: RemovalPolicy, ranking: Ranking | None = None, rng=None) -> np.ndarray:
    """Ids to remove in one campaign.

    RandomK draws k eligible ids without replacement; TopKByIndex walks the
    ranking and keeps the first k eligible ids. Fewer eligible objects than k
    means all of them go.
    """
    if not policy.active:
        return np.zeros(0, np.int64)
    eligible_ids = catalog.ids[policy.eligible_mask(catalog)]
    if len(eligible_ids) <= policy.k:
        return eligible_ids.copy()
    if policy.kind_enum == PolicyKind.RandomK:
        if rng is None:
            raise PolicyError("RandomK needs a random generator")
        pick = rng.choice(len(eligible_ids), size=policy.k, replace=False)
        return np.sort(eligible_ids[pick])
    if ranking is None:
        raise PolicyError("TopKByIndex needs a ranking computed this epoch")
    ok = np.isin(ranking.ids, eligible_ids)
    return ranking.ids[ok][: policy.k].copy()
