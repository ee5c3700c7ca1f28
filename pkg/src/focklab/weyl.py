"""Weyl operators, coherent states and field operators on the truncated basis.

W(f) = exp(a*(f) - a(f)) is applied by exponentiating the compressed
skew-Hermitian generator, so the result is unitary to machine precision even
though the cutoff makes a*(f) itself lossy.  The direct normal-ordered
assembly of the coherent state W(f)|vac> is kept as an independent
construction for cross-checks.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.special import gammaln

from .basis import FockVector, OccupationBasis
from .errors import TruncationError
from .propagate import PropagationBudget, expm_apply


def annihilation_of(f: np.ndarray, basis: OccupationBasis) -> csr_matrix:
    """a(f) = sum_x conj(f_x) a_x (antilinear in f)."""
    f = np.asarray(f, dtype=complex)
    out = None
    for x in range(basis.d):
        if f[x] == 0:
            continue
        term = np.conj(f[x]) * basis.annihilator(x)
        out = term if out is None else out + term
    if out is None:
        return csr_matrix((basis.size, basis.size), dtype=complex)
    return out.tocsr()


def creation_of(f: np.ndarray, basis: OccupationBasis) -> csr_matrix:
    """a*(f) = sum_x f_x a*_x, compressed at the cutoff."""
    return annihilation_of(f, basis).conj().T.tocsr()


def weyl_generator(f: np.ndarray, basis: OccupationBasis) -> csr_matrix:
    """The skew-Hermitian a*(f) - a(f)."""
    a = annihilation_of(f, basis)
    return (a.conj().T - a).tocsr()


def phi_apply(f: np.ndarray, psi: FockVector, with_loss: bool = False):
    """Field operator phi(f) = a*(f) + a(f) applied to psi.

    Hermitian up to the top-sector compression; optionally reports the norm
    of the dropped creation part.
    """
    basis = psi.basis
    a = annihilation_of(f, basis)
    out = FockVector(basis, a @ psi.amp + a.conj().T @ psi.amp)
    if not with_loss:
        return out
    return out, creation_loss(f, psi)


def creation_loss(f: np.ndarray, psi: FockVector) -> float:
    """Norm of the part of a*(f) psi that falls beyond the cutoff."""
    basis = psi.basis
    f = np.asarray(f, dtype=complex)
    top = psi.amp[basis.sector_slice(basis.m_max)]
    tuples = basis.sector_states(basis.m_max)
    dropped: dict[tuple, complex] = {}
    for i, amp in enumerate(top):
        if amp == 0:
            continue
        n = tuples[i]
        for x in range(basis.d):
            if f[x] == 0:
                continue
            key = tuple(n + np.eye(basis.d, dtype=np.int64)[x])
            dropped[key] = dropped.get(key, 0.0) + f[x] * math.sqrt(n[x] + 1.0) * amp
    return float(math.sqrt(sum(abs(v) ** 2 for v in dropped.values())))


def weyl_apply(
    f: np.ndarray,
    psi: FockVector,
    budget: PropagationBudget | None = None,
) -> FockVector:
    """W(f) psi = exp(a*(f) - a(f)) psi; exactly norm-preserving."""
    budget = budget or PropagationBudget()
    f = np.asarray(f, dtype=complex)
    if not np.any(f):
        return psi.copy()
    s = weyl_generator(f, psi.basis)
    h = (1j * s).tocsr()  # Hermitian; exp(S) = exp(-i H) with H = iS
    return FockVector(psi.basis, expm_apply(h, psi.amp, 1.0, budget))


def poisson_tail(lam: float, m_max: int) -> float:
    """P(X > m_max) for X ~ Poisson(lam)."""
    if lam == 0.0:
        return 0.0
    logs = -lam + np.arange(m_max + 1) * math.log(lam) - gammaln(np.arange(m_max + 1) + 1.0)
    return float(max(0.0, 1.0 - np.exp(logs).sum()))


def minimal_cutoff(lam: float, eps: float, hard_cap: int = 400) -> int:
    """Smallest m_max whose Poisson(lam) tail mass is below eps."""
    for m in range(hard_cap + 1):
        if poisson_tail(lam, m) < eps:
            return m
    raise TruncationError(f"no cutoff below {hard_cap} reaches tail mass {eps} at lambda={lam}")


def coherent_state(
    f: np.ndarray,
    basis: OccupationBasis,
    eps_trunc: float = 1e-10,
) -> FockVector:
    """exp(-|f|^2/2) sum_n f^{(x) n_x} / sqrt(prod n_x!) over the basis.

    Raises TruncationError when the Poisson tail beyond the cutoff exceeds
    eps_trunc; agrees with weyl_apply(f, vacuum) within propagation tolerance.
    """
    f = np.asarray(f, dtype=complex)
    lam = float(np.vdot(f, f).real)
    tail = poisson_tail(lam, basis.m_max)
    if tail > eps_trunc:
        raise TruncationError(
            f"Poisson tail {tail:.3e} beyond m_max={basis.m_max} exceeds eps_trunc={eps_trunc:.1e}"
        )
    states = basis.states
    log_fact = gammaln(states + 1.0).sum(axis=1)
    powers = np.prod(f[None, :] ** states, axis=1)
    amp = math.exp(-lam / 2.0) * powers * np.exp(-0.5 * log_fact)
    return FockVector(basis, amp)
