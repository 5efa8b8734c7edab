"""Discrete sampling domains and their real embeddings.

States are integer index vectors; every coordinate shares one value set
(binary {0,1}, spin {-1,+1}, or an ordinal grid of N levels on [lo, hi]).
Energy models and samplers only ever see the embedded real coordinates.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, DomainError

BINARY01 = "binary01"
SPIN_PM1 = "spin_pm1"
ORDINAL = "ordinal"


@dataclass(frozen=True)
class DomainSpec:
    """Product domain: `dim` coordinates, each over the same discrete value set."""

    dim: int
    kind: str
    levels: int
    lo: float = 0.0
    hi: float = 1.0
    value_table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError(f"dim must be positive, got {self.dim}")
        if self.kind == BINARY01:
            values = np.array([0.0, 1.0])
        elif self.kind == SPIN_PM1:
            values = np.array([-1.0, 1.0])
        elif self.kind == ORDINAL:
            if self.levels < 2:
                raise DomainError(f"ordinal grid needs at least 2 levels, got {self.levels}")
            if not self.lo < self.hi:
                raise DomainError(f"ordinal grid needs lo < hi, got [{self.lo}, {self.hi}]")
            k = np.arange(self.levels, dtype=float)
            values = self.lo + (self.hi - self.lo) * k / (self.levels - 1)
            values[-1] = self.hi  # endpoints exact by construction
        else:
            raise DomainError(f"unknown domain kind {self.kind!r}")
        if self.kind in (BINARY01, SPIN_PM1) and self.levels != 2:
            raise DomainError(f"{self.kind} domains have exactly 2 levels")
        values.setflags(write=False)
        object.__setattr__(self, "value_table", values)

    @staticmethod
    def binary01(dim: int) -> "DomainSpec":
        return DomainSpec(dim=dim, kind=BINARY01, levels=2)

    @staticmethod
    def spin_pm1(dim: int) -> "DomainSpec":
        return DomainSpec(dim=dim, kind=SPIN_PM1, levels=2)

    @staticmethod
    def ordinal_grid(dim: int, levels: int, lo: float, hi: float) -> "DomainSpec":
        return DomainSpec(dim=dim, kind=ORDINAL, levels=levels, lo=lo, hi=hi)

    @property
    def num_states(self) -> int:
        return self.levels**self.dim

    def validate_state(self, state: np.ndarray) -> np.ndarray:
        state = np.asarray(state)
        if state.shape != (self.dim,):
            raise DomainError(f"state has shape {state.shape}, domain dim is {self.dim}")
        if state.min(initial=0) < 0 or state.max(initial=0) >= self.levels:
            raise DomainError(f"state indices out of range [0, {self.levels}): {state}")
        return state.astype(np.int64, copy=False)


def embed(state: np.ndarray, domain: DomainSpec) -> np.ndarray:
    """Map index vector to embedded real coordinates."""
    return domain.value_table[domain.validate_state(state)]


def state_index(state: np.ndarray, domain: DomainSpec) -> int:
    """Bijection state -> flat index; coordinate 0 is most significant."""
    idx = 0
    for k in domain.validate_state(state):
        idx = idx * domain.levels + int(k)
    return idx


def index_state(index: int, domain: DomainSpec) -> np.ndarray:
    """Inverse of state_index."""
    if not 0 <= index < domain.num_states:
        raise DomainError(f"state index {index} out of range for {domain.num_states} states")
    out = np.empty(domain.dim, dtype=np.int64)
    for d in range(domain.dim - 1, -1, -1):
        out[d] = index % domain.levels
        index //= domain.levels
    return out


def all_states(domain: DomainSpec, capacity: int = 1 << 20) -> np.ndarray:
    """All index vectors in state_index order, shape (num_states, dim)."""
    n = domain.num_states
    if n > capacity:
        raise CapacityError(f"domain has {n} states, enumeration capped at {capacity}")
    grids = np.indices((domain.levels,) * domain.dim).reshape(domain.dim, n)
    return grids.T.astype(np.int64)


def embed_all(domain: DomainSpec, capacity: int = 1 << 20) -> np.ndarray:
    """Embedded coordinates of every state, shape (num_states, dim)."""
    return domain.value_table[all_states(domain, capacity)]
