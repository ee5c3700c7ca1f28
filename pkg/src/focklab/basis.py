"""Occupation-number basis for bosons on a periodic lattice, truncated at a
total particle number, with sparse ladder operators.

The basis is graded: states are grouped by total occupation n (sectors), and
within each sector ordered lexicographically with the site-0 occupation
descending, so e.g. for d=2 the order is (0,0), (1,0), (0,1), (2,0), (1,1),
(0,2), ...  Sector blocks are contiguous, which makes sector projections and
number-operator moments cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Iterator

import numpy as np
from scipy.sparse import csr_matrix

from .errors import CapacityError, NormalizationError

DEFAULT_CAPACITY = 500_000


def sector_dimension(d: int, n: int) -> int:
    """Number of occupation tuples of d sites summing to n."""
    return comb(n + d - 1, d - 1)


def basis_dimension(d: int, m_max: int) -> int:
    """Total number of tuples with sum <= m_max."""
    return comb(m_max + d, d)


def _sector_tuples(d: int, n: int) -> Iterator[tuple[int, ...]]:
    if d == 1:
        yield (n,)
        return
    for k in range(n, -1, -1):
        for rest in _sector_tuples(d - 1, n - k):
            yield (k,) + rest


class OccupationBasis:
    """Occupation tuples (n_0, ..., n_{d-1}) with sum(n) <= m_max.

    Holds the two-way index maps and caches the per-site annihilation
    matrices, from which every composite operator in the package is built.
    """

    def __init__(self, d: int, m_max: int, capacity: int = DEFAULT_CAPACITY):
        if d < 2:
            raise ValueError(f"need at least 2 sites, got d={d}")
        if m_max < 0:
            raise ValueError(f"m_max must be >= 0, got {m_max}")
        size = basis_dimension(d, m_max)
        if size > capacity:
            raise CapacityError(
                f"basis with d={d}, m_max={m_max} has {size} states,"
                f" exceeding the capacity bound {capacity}"
            )
        self.d = d
        self.m_max = m_max
        states = []
        offsets = [0]
        for n in range(m_max + 1):
            states.extend(_sector_tuples(d, n))
            offsets.append(len(states))
        self.states = np.array(states, dtype=np.int64)
        self.size = len(states)
        self.sector_offsets = np.array(offsets, dtype=np.int64)
        self.totals = self.states.sum(axis=1)
        self.index = {tuple(s): i for i, s in enumerate(states)}
        self._annihilators: dict[int, csr_matrix] = {}

    def index_of(self, occ) -> int:
        return self.index[tuple(int(n) for n in occ)]

    def state_of(self, i: int) -> tuple[int, ...]:
        return tuple(int(n) for n in self.states[i])

    def sector_slice(self, n: int) -> slice:
        if not 0 <= n <= self.m_max:
            raise ValueError(f"sector {n} outside 0..{self.m_max}")
        return slice(int(self.sector_offsets[n]), int(self.sector_offsets[n + 1]))

    def sector_states(self, n: int) -> np.ndarray:
        return self.states[self.sector_slice(n)]

    def annihilator(self, x: int) -> csr_matrix:
        """Sparse matrix of a_x: maps |n> to sqrt(n_x) |n - e_x>."""
        if not 0 <= x < self.d:
            raise ValueError(f"site {x} outside 0..{self.d - 1}")
        if x not in self._annihilators:
            src = np.nonzero(self.states[:, x] > 0)[0]
            occ = self.states[src].copy()
            occ[:, x] -= 1
            rows = np.fromiter(
                (self.index[tuple(t)] for t in map(tuple, occ)),
                dtype=np.int64,
                count=len(src),
            )
            vals = np.sqrt(self.states[src, x].astype(float))
            self._annihilators[x] = csr_matrix(
                (vals, (rows, src)), shape=(self.size, self.size)
            )
        return self._annihilators[x]

    def creator(self, x: int) -> csr_matrix:
        """Adjoint of annihilator(x); the image beyond m_max is dropped."""
        return self.annihilator(x).conj().T.tocsr()

    def number_diagonal(self) -> np.ndarray:
        return self.totals.astype(float)

    def parity_diagonal(self) -> np.ndarray:
        """Diagonal of (-1)^N."""
        return np.where(self.totals % 2 == 0, 1.0, -1.0)


def build_basis(d: int, m_max: int, capacity: int = DEFAULT_CAPACITY) -> OccupationBasis:
    return OccupationBasis(d, m_max, capacity=capacity)


@dataclass
class FockVector:
    """Complex amplitudes over an OccupationBasis."""

    basis: OccupationBasis
    amp: np.ndarray

    def __post_init__(self):
        self.amp = np.asarray(self.amp, dtype=complex)
        if self.amp.shape != (self.basis.size,):
            raise ValueError(
                f"amplitude shape {self.amp.shape} does not match basis size {self.basis.size}"
            )

    @classmethod
    def vacuum(cls, basis: OccupationBasis) -> "FockVector":
        amp = np.zeros(basis.size, dtype=complex)
        amp[0] = 1.0
        return cls(basis, amp)

    @classmethod
    def unit(cls, basis: OccupationBasis, occ) -> "FockVector":
        amp = np.zeros(basis.size, dtype=complex)
        amp[basis.index_of(occ)] = 1.0
        return cls(basis, amp)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))

    def inner(self, other: "FockVector") -> complex:
        return complex(np.vdot(self.amp, other.amp))

    def copy(self) -> "FockVector":
        return FockVector(self.basis, self.amp.copy())

    def sector_weights(self) -> np.ndarray:
        """Probability weight per total-occupation sector (unnormalized)."""
        w = np.abs(self.amp) ** 2
        off = self.basis.sector_offsets
        return np.add.reduceat(w, off[:-1])

    def top_sector_weight(self) -> float:
        return float(np.sum(np.abs(self.amp[self.basis.sector_slice(self.basis.m_max)]) ** 2))


def annihilate(x: int, psi: FockVector) -> FockVector:
    """a_x psi; sends n_x = 0 components to zero."""
    return FockVector(psi.basis, psi.basis.annihilator(x) @ psi.amp)


def create(x: int, psi: FockVector) -> tuple[FockVector, float]:
    """a*_x psi within the cutoff, plus the norm of the dropped top part.

    Components that would land beyond m_max are compressed away; the second
    return value reports their norm so callers can monitor truncation loss.
    """
    basis = psi.basis
    out = FockVector(basis, basis.creator(x) @ psi.amp)
    top = psi.amp[basis.sector_slice(basis.m_max)]
    occ = basis.sector_states(basis.m_max)[:, x].astype(float)
    dropped = float(np.sqrt(np.sum((occ + 1.0) * np.abs(top) ** 2)))
    return out, dropped


def number_apply(psi: FockVector) -> FockVector:
    return FockVector(psi.basis, psi.basis.number_diagonal() * psi.amp)


def number_expectation(psi: FockVector) -> float:
    """<psi, N psi> / <psi, psi>."""
    nrm2 = float(np.vdot(psi.amp, psi.amp).real)
    if nrm2 == 0.0:
        raise NormalizationError("number expectation of the zero vector is undefined")
    return float(np.sum(psi.basis.number_diagonal() * np.abs(psi.amp) ** 2) / nrm2)


def number_moment(psi: FockVector, j: int) -> float:
    """<psi, N^j psi> computed exactly from sector weights."""
    w = psi.sector_weights()
    n = np.arange(len(w), dtype=float)
    return float(np.sum(n**j * w))
