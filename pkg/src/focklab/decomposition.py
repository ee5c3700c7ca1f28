"""Decomposition of N-fold product states into a circle average of coherent
states, and the associated normalization constant and Fourier coefficients.

The identity behind the whole module: for a unit one-particle amplitude phi,

    phi^{x N} = d_N * (1/2pi) \\int dtheta e^{i theta N} W(e^{-i theta} sqrt(N) phi) |vac>

with d_N^2 = N! e^N / N^N.  Discretizing the circle with K >= m_max + 1
points makes the average an exact sector projection within the truncated
space (discrete Fourier orthogonality), so quadrature introduces no error of
its own.  The coefficient sequence R_m is computed in exact integer
arithmetic through two independent closed forms, and is tied to generalized
Laguerre polynomials evaluated in their oscillatory regime (the connection is
checked in absolute value; the sign conventions differ for odd m, and only
R_m^2 enters the identities used downstream).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, exp, factorial, lgamma, log, pi, sqrt

import mpmath
import numpy as np

from .basis import FockVector, OccupationBasis
from .errors import AliasingError
from .fluctuations import FluctuationOperators, generator_family
from .hartree import HartreeFlow
from .model import LatticeModel, embed_product_state
from .propagate import PropagationBudget, evolve_timedep
from .weyl import coherent_state, weyl_apply

MP_DPS = 60


@dataclass(frozen=True)
class NormConstant:
    """d_N = sqrt(N!) / (N^{N/2} e^{-N/2}), handled in log space."""

    n: int
    log_squared: float

    @property
    def squared(self) -> float:
        return exp(self.log_squared)

    @property
    def value(self) -> float:
        return exp(0.5 * self.log_squared)


def product_norm_constant(n: int) -> NormConstant:
    if n < 1:
        raise ValueError("N must be >= 1")
    return NormConstant(n, lgamma(n + 1) + n - n * log(n))


def coeff_binomial_form(n: int, m: int) -> int:
    """Finite-sum form, valid for m <= N-1:
    sum_k (-1)^{m-k} N^{m-k} (N-1)(N-2)...(N-k) C(m,k)."""
    if not 0 <= m <= n - 1:
        raise ValueError("the finite-sum form requires 0 <= m <= N-1")
    total = 0
    falling = 1  # (N-1)...(N-k), empty product at k=0
    for k in range(m + 1):
        total += (-1) ** (m - k) * n ** (m - k) * falling * comb(m, k)
        falling *= n - 1 - k
    return total


def coeff_leibniz_form(n: int, m: int) -> int:
    """(d/dz)^{N-1} [e^z (z-N)^m] at z=0, via the Leibniz rule; exact for
    every m since every term is an integer."""
    if n < 1 or m < 0:
        raise ValueError("need N >= 1 and m >= 0")
    total = 0
    for j in range(min(n - 1, m) + 1):
        total += comb(n - 1, j) * (factorial(m) // factorial(m - j)) * (-n) ** (m - j)
    return total


def expansion_coefficient(n: int, m: int) -> int:
    if m <= n - 1:
        return coeff_binomial_form(n, m)
    return coeff_leibniz_form(n, m)


def scaled_coefficient(n: int, m: int) -> float:
    """A_m = R_m / (sqrt(m!) N^{m/2}), evaluated through logs."""
    r = expansion_coefficient(n, m)
    if r == 0:
        return 0.0
    sign = 1.0 if r > 0 else -1.0
    with mpmath.workdps(MP_DPS):
        val = mpmath.mpf(abs(r)) / (mpmath.sqrt(mpmath.factorial(m)) * mpmath.mpf(n) ** (mpmath.mpf(m) / 2))
        return sign * float(val)


def laguerre_times_factorial(n: int, m: int) -> int:
    """m! L_m^{(N-m-1)}(N) from the standard finite-sum representation of the
    associated Laguerre polynomial; exact integer for m <= N-1."""
    if not 0 <= m <= n - 1:
        raise ValueError("requires 0 <= m <= N-1 so the index N-m-1 is >= 0")
    total = 0
    for k in range(m + 1):
        falling = 1
        for i in range(m - k):
            falling *= n - 1 - i
        total += (-1) ** k * comb(m, k) * falling * n**k
    return total


@dataclass
class LaguerreReport:
    n: int
    m: int
    r_value: int
    laguerre_value: int
    abs_match: bool


def laguerre_crosscheck(n: int, m: int) -> LaguerreReport:
    r = expansion_coefficient(n, m)
    lag = laguerre_times_factorial(n, m)
    return LaguerreReport(n, m, r, lag, abs(r) == abs(lag))


@dataclass
class ParsevalReport:
    n: int
    m_reached: int
    rel_error: float
    decay_constant: float
    converged: bool


def parseval_identity_check(n: int, tol: float = 1e-8, m_cap: int | None = None) -> ParsevalReport:
    """Partial sums of sum_m R_m^2/(N^m m!) against d_N^2, plus the empirical
    flat-bound constant max_{1<=m<=N} |A_m| m^{1/4}."""
    if m_cap is None:
        m_cap = 8 * n + 80
    kras = max(abs(scaled_coefficient(n, m)) * m**0.25 for m in range(1, n + 1))
    with mpmath.workdps(MP_DPS):
        target = mpmath.e**n * mpmath.factorial(n) / mpmath.mpf(n) ** n
        partial = mpmath.mpf(0)
        for m in range(m_cap + 1):
            r = expansion_coefficient(n, m)
            partial += mpmath.mpf(r * r) / (mpmath.mpf(n) ** m * mpmath.factorial(m))
            rel = float(abs(partial - target) / target)
            if rel < tol:
                return ParsevalReport(n, m, rel, kras, True)
        return ParsevalReport(n, m_cap, rel, kras, False)


def reconstruct_product(
    phi: np.ndarray,
    n: int,
    k_points: int,
    basis: OccupationBasis,
    eps_trunc: float = 1e-10,
    allow_aliasing: bool = False,
) -> tuple[FockVector, float]:
    """Trapezoidal phase average of coherent states against the embedded
    product state; K >= m_max + 1 prevents sector aliasing."""
    if k_points <= basis.m_max and not allow_aliasing:
        raise AliasingError(
            f"K={k_points} <= m_max={basis.m_max} aliases sectors congruent mod K"
        )
    dn = product_norm_constant(n)
    acc = np.zeros(basis.size, dtype=complex)
    for k in range(k_points):
        theta = 2.0 * pi * k / k_points
        cs = coherent_state(np.exp(-1j * theta) * sqrt(n) * np.asarray(phi, complex), basis, eps_trunc)
        acc += np.exp(1j * theta * n) * cs.amp
    rec = FockVector(basis, dn.value * acc / k_points)
    target = embed_product_state(phi, n, basis)
    return rec, float(np.linalg.norm(rec.amp - target.amp))


def displaced_product_profile(
    phi: np.ndarray,
    n: int,
    theta: float,
    basis: OccupationBasis,
    budget: PropagationBudget | None = None,
) -> FockVector:
    """psi(theta) = d_N e^{-i theta N} W*(e^{-i theta} sqrt(N) phi) phi^{x(N-1)};
    the integrand state of the product-state phase average, norm d_N."""
    dn = product_norm_constant(n)
    base = embed_product_state(phi, n - 1, basis)
    shifted = weyl_apply(-np.exp(-1j * theta) * sqrt(n) * np.asarray(phi, complex), base, budget)
    return FockVector(basis, dn.value * np.exp(-1j * theta * n) * shifted.amp)


def coefficient_expansion_profile(
    phi: np.ndarray,
    n: int,
    theta: float,
    basis: OccupationBasis,
) -> FockVector:
    """The same psi(theta) through the sector expansion
    sum_m A_m e^{-i theta (m+1)} phi^{x m}, truncated at the basis cutoff."""
    acc = np.zeros(basis.size, dtype=complex)
    for m in range(basis.m_max + 1):
        c = scaled_coefficient(n, m) * np.exp(-1j * theta * (m + 1))
        acc += c * embed_product_state(phi, m, basis).amp
    return FockVector(basis, acc)


@dataclass
class RemainderProbeReport:
    n: int
    t: float
    k_points: int
    site_abs: np.ndarray        # |f_N(x)| per site
    total_square: float      # sum_x |f_N(x)|^2


def remainder_probe(
    model: LatticeModel,
    n: int,
    phi0: np.ndarray,
    t: float,
    k_points: int,
    basis: OccupationBasis,
    budget: PropagationBudget | None = None,
    hartree_dt: float = 1e-3,
) -> RemainderProbeReport:
    """The one-particle remainder of the product-state phase average:

    f_N(x) = avg_theta < psi(theta), U^theta(0;t) a_x U^theta(t;0) vac >

    with U^theta the full fluctuation dynamics along the gauge-rotated
    Hartree orbital e^{-i theta} phi_t.  The theta average is a K-point
    trapezoid, exact for the finite Fourier content of the truncated space.
    """
    if k_points <= basis.m_max:
        raise AliasingError(f"K={k_points} must exceed m_max={basis.m_max}")
    if n > basis.m_max:
        raise ValueError("N exceeds the basis cutoff")
    budget = budget or PropagationBudget()
    flow = HartreeFlow(phi0, model, hartree_dt)
    ops = FluctuationOperators(model, basis)
    vac = FockVector.vacuum(basis)
    f_acc = np.zeros(model.d, dtype=complex)
    for k in range(k_points):
        theta = 2.0 * pi * k / k_points
        psi_theta = displaced_product_profile(phi0, n, theta, basis, budget)
        gen = generator_family(ops, "full", n, flow, phase=-theta)
        fwd_psi = evolve_timedep(gen, psi_theta, 0.0, t, budget)
        fwd_vac = evolve_timedep(gen, vac, 0.0, t, budget)
        for x in range(model.d):
            f_acc[x] += np.vdot(fwd_psi.amp, basis.annihilator(x) @ fwd_vac.amp)
    f = f_acc / k_points
    return RemainderProbeReport(n, t, k_points, np.abs(f), float(np.sum(np.abs(f) ** 2)))
