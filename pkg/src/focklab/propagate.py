"""Unitary propagation engines.

Two entry points:

* ``evolve_static`` applies exp(-i H t) for a fixed sparse Hermitian H, via a
  cached dense eigendecomposition below ``dense_cutoff`` and a Lanczos/Krylov
  approximation with full reorthogonalization and adaptive substeps above it.
* ``evolve_timedep`` integrates a time-dependent generator family with the
  midpoint exponential rule (second-order Magnus): one Krylov exponential of
  gen(t + dt/2) per step.  Steps may run backward (t1 < t0).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil
from typing import Callable

import numpy as np
from scipy.linalg import eigh, eigh_tridiagonal

from .basis import FockVector
from .errors import ConvergenceError

_BREAKDOWN = 1e-13


@dataclass
class PropagationBudget:
    tol: float = 1e-10        # target error for a whole evolve call
    dt: float = 0.01          # step size for time-dependent generators
    krylov_dim: int = 40      # Krylov subspace cap per substep
    dense_cutoff: int = 600   # below this dimension, diagonalize instead

    def __post_init__(self):
        if self.tol <= 0 or self.dt <= 0:
            raise ValueError("tol and dt must be positive")


def _as_array(psi):
    if isinstance(psi, FockVector):
        return psi.amp, psi.basis
    return np.asarray(psi, dtype=complex), None


def _wrap(amp, basis):
    return FockVector(basis, amp) if basis is not None else amp


def _expm_tridiag(alpha, beta, t):
    """exp(-i t T) e1 for the real symmetric tridiagonal T = (alpha, beta)."""
    if len(alpha) == 1:
        return np.exp(-1j * t * alpha[:1])
    w, u = eigh_tridiagonal(alpha, beta)
    return u @ (np.exp(-1j * t * w) * u[0, :])


def _lanczos_step(matvec, v, t, tol, m_cap, depth=0):
    """One adaptive substep of exp(-i A t) v via Lanczos; splits t on failure."""
    if depth > 60:
        raise ConvergenceError("Krylov substep bisection failed to converge")
    beta0 = np.linalg.norm(v)
    if beta0 == 0.0 or t == 0.0:
        return v.copy()
    n = v.shape[0]
    m_cap = min(m_cap, n)
    vs = np.empty((m_cap, n), dtype=complex)
    vs[0] = v / beta0
    alpha = np.empty(m_cap)
    beta = np.empty(m_cap)
    y_prev = None
    scale = None
    for j in range(m_cap):
        w = matvec(vs[j])
        if j > 0:
            w -= beta[j - 1] * vs[j - 1]
        alpha[j] = np.vdot(vs[j], w).real
        w -= alpha[j] * vs[j]
        # full reorthogonalization keeps the basis orthonormal to machine
        # precision, which is what makes the step exactly norm-preserving
        w -= vs[: j + 1].T @ (vs[: j + 1].conj() @ w)
        b = np.linalg.norm(w)
        if scale is None:
            scale = max(abs(alpha[0]), b, 1.0)
        if b <= _BREAKDOWN * scale:
            y = _expm_tridiag(alpha[: j + 1], beta[:j], t)
            return (y * beta0) @ vs[: j + 1]
        beta[j] = b
        if j + 1 < m_cap:
            vs[j + 1] = w / b
        if j >= 3 and (j % 4 == 3 or j + 1 == m_cap):
            y = _expm_tridiag(alpha[: j + 1], beta[:j], t)
            if y_prev is not None:
                diff = y.copy()
                diff[: len(y_prev)] -= y_prev
                if np.linalg.norm(diff) * beta0 <= tol:
                    return (y * beta0) @ vs[: j + 1]
            y_prev = y
    half = _lanczos_step(matvec, v, t / 2, tol / 2, m_cap, depth + 1)
    return _lanczos_step(matvec, half, t / 2, tol / 2, m_cap, depth + 1)


def expm_apply(h_sparse, v: np.ndarray, t: float, budget: PropagationBudget) -> np.ndarray:
    """exp(-i h_sparse t) v for Hermitian h_sparse, Krylov route."""
    matvec = h_sparse.dot
    return _lanczos_step(matvec, np.asarray(v, dtype=complex), t, budget.tol, budget.krylov_dim)


class StaticPropagator:
    """Reusable exp(-i H t) for a fixed Hermitian H.

    Dense spectral factorization is computed once when the dimension permits;
    otherwise each apply falls back to the Krylov engine.
    """

    def __init__(self, h_sparse, budget: PropagationBudget | None = None):
        self.budget = budget or PropagationBudget()
        self.h = h_sparse
        self.dim = h_sparse.shape[0]
        self._dense = None
        if self.dim <= self.budget.dense_cutoff:
            w, u = eigh(np.asarray(h_sparse.todense()))
            self._dense = (w, u)

    def apply(self, psi, t: float):
        amp, basis = _as_array(psi)
        if t == 0.0:
            return _wrap(amp.copy(), basis)
        if self._dense is not None:
            w, u = self._dense
            out = u @ (np.exp(-1j * w * t) * (u.conj().T @ amp))
        else:
            out = expm_apply(self.h, amp, t, self.budget)
        return _wrap(out, basis)


def evolve_static(h_sparse, psi, t: float, budget: PropagationBudget | None = None):
    """exp(-i H t) psi for sparse Hermitian H; accepts FockVector or ndarray."""
    return StaticPropagator(h_sparse, budget).apply(psi, t)


def evolve_timedep(
    gen: Callable[[float], "object"],
    psi,
    t0: float,
    t1: float,
    budget: PropagationBudget | None = None,
):
    """Midpoint-exponential integration of i d/dt psi = gen(t) psi from t0 to t1."""
    budget = budget or PropagationBudget()
    amp, basis = _as_array(psi)
    if t1 == t0:
        return _wrap(amp.copy(), basis)
    span = t1 - t0
    n_steps = max(1, ceil(abs(span) / budget.dt))
    h = span / n_steps
    tol_local = budget.tol / n_steps
    for k in range(n_steps):
        tm = t0 + (k + 0.5) * h
        g = gen(tm)
        amp = _lanczos_step(g.dot, amp, h, tol_local, budget.krylov_dim)
    return _wrap(amp, basis)
