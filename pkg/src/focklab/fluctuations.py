"""Fluctuation dynamics around the Hartree flow.

Four time-dependent generators act on the truncated Fock space, all built
from the instantaneous Hartree orbital phi_t:

* ``full``      — quadratic lines (kinetic, mean field, exchange, pair
                  creation/annihilation) plus the N^{-1/2} cubic term and the
                  N^{-1} quartic term;
* ``reduced``   — full without the cubic term (parity conserving);
* ``truncated`` — full with a particle-number indicator chi(N <= M) inserted
                  in the cubic term; assembled as the Hermitian part of that
                  insertion;
* ``limiting``  — the quadratic lines only; independent of N.

The probes below certify algebraic identities (Weyl conjugation of the
Heisenberg-evolved ladder operator), growth of the number of particles,
and the gaps between the dynamics, all from the vacuum.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix, diags

from .basis import FockVector, OccupationBasis, annihilate, build_basis, number_moment
from .errors import TruncationError
from .hartree import HartreeFlow, phase_rotate
from .marginals import marginal_from_fock, rank_one, trace_distance
from .model import LatticeModel, build_fock_hamiltonian, interaction_diagonal
from .propagate import PropagationBudget, StaticPropagator, evolve_timedep
from .weyl import coherent_state, minimal_cutoff, weyl_apply

GENERATOR_KINDS = ("full", "reduced", "truncated", "limiting")
TOP_SECTOR_LIMIT = 1e-6


class FluctuationOperators:
    """Static operator blocks reused across generator evaluations.

    Assembly enumerates only site pairs coupled by the potential (and the
    kinetic matrix), so contact interactions stay cheap.
    """

    def __init__(self, model: LatticeModel, basis: OccupationBasis):
        if model.d != basis.d:
            raise ValueError("model and basis disagree on d")
        self.model = model
        self.basis = basis
        d = model.d
        a = [basis.annihilator(x) for x in range(d)]
        ad = [m.conj().T.tocsr() for m in a]
        self._a = a
        self._ad = ad
        t = model.kinetic
        kin = None
        for x in range(d):
            for y in range(d):
                if t[x, y] == 0.0:
                    continue
                term = t[x, y] * (ad[x] @ a[y])
                kin = term if kin is None else kin + term
        self.kinetic = kin.tocsr()
        self.quartic_diag = interaction_diagonal(basis.states, model)
        self.occupation = basis.states.astype(float)
        v = model.potential.values
        self.pairs = [
            (x, y, v[(x - y) % d]) for x in range(d) for y in range(d) if v[(x - y) % d] != 0.0
        ]
        self.exchange = {}      # (x, y) -> a*_y a_x
        self.pair_create = {}   # (x, y) -> a*_x a*_y
        self.cubic_create = {}  # (x, y) -> a*_x a*_y a_x
        for x, y, _ in self.pairs:
            lower = a[y] @ a[x]
            self.exchange[(x, y)] = (ad[y] @ a[x]).tocsr()
            self.pair_create[(x, y)] = lower.conj().T.tocsr()
            self.cubic_create[(x, y)] = (ad[x] @ self.exchange[(x, y)]).tocsr()

    def quadratic(self, phi: np.ndarray) -> csr_matrix:
        """Kinetic + mean field + exchange + pair creation/annihilation."""
        phi = np.asarray(phi, dtype=complex)
        mean_field = self.model.vmat @ (np.abs(phi) ** 2)
        out = self.kinetic + diags(self.occupation @ mean_field)
        pair_half = None
        for x, y, v in self.pairs:
            out = out + (v * np.conj(phi[x]) * phi[y]) * self.exchange[(x, y)]
            term = (0.5 * v * phi[x] * phi[y]) * self.pair_create[(x, y)]
            pair_half = term if pair_half is None else pair_half + term
        if pair_half is not None:
            out = out + pair_half + pair_half.conj().T
        return out.tocsr()

    def cubic(self, phi: np.ndarray, n: int, cutoff: int | None = None) -> csr_matrix:
        """N^{-1/2} sum v(x-y) a*_x (phi(y) a*_y + conj(phi(y)) a_y) a_x,
        optionally with the chi(N <= cutoff) indicator inserted; the cutoff
        variant is symmetrized to its Hermitian part (the indicator does not
        commute through the ladder operators, so symmetry is enforced rather
        than assumed)."""
        phi = np.asarray(phi, dtype=complex)
        scale = 1.0 / np.sqrt(n)
        if cutoff is None:
            half = None
            for x, y, v in self.pairs:
                term = (v * phi[y]) * self.cubic_create[(x, y)]
                half = term if half is None else half + term
            if half is None:
                return csr_matrix((self.basis.size, self.basis.size), dtype=complex)
            return (scale * (half + half.conj().T)).tocsr()
        chi = diags((self.basis.totals <= cutoff).astype(float)).tocsr()
        inserted = None
        for x, y, v in self.pairs:
            term = (v * np.conj(phi[y])) * (self._ad[x] @ (self._a[y] @ (chi @ self._a[x])))
            term = term + (v * phi[y]) * (self._ad[x] @ (chi @ (self._ad[y] @ self._a[x])))
            inserted = term if inserted is None else inserted + term
        if inserted is None:
            return csr_matrix((self.basis.size, self.basis.size), dtype=complex)
        return (0.5 * scale * (inserted + inserted.conj().T)).tocsr()

    def assemble(
        self, kind: str, n: int, phi: np.ndarray, cutoff: int | None = None
    ) -> csr_matrix:
        """The generator of the requested kind at Hartree orbital phi."""
        if kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {kind!r}")
        if kind != "limiting" and n < 1:
            raise ValueError("N must be >= 1")
        out = self.quadratic(phi)
        if kind == "limiting":
            return out
        out = out + diags(self.quartic_diag / n)
        if kind == "full":
            out = out + self.cubic(phi, n)
        elif kind == "truncated":
            if cutoff is None:
                raise ValueError("truncated kind requires a cutoff M")
            out = out + self.cubic(phi, n, cutoff=cutoff)
        return out.tocsr()


def assemble_generator(
    kind: str,
    model: LatticeModel,
    n: int,
    phi: np.ndarray,
    basis: OccupationBasis,
    cutoff: int | None = None,
) -> csr_matrix:
    return FluctuationOperators(model, basis).assemble(kind, n, phi, cutoff=cutoff)


def generator_family(
    ops: FluctuationOperators,
    kind: str,
    n: int,
    flow: HartreeFlow,
    cutoff: int | None = None,
    phase: float = 0.0,
):
    """t -> generator matrix, with phi_t optionally gauge-rotated by e^{i phase}."""

    def gen(t: float):
        phi = flow.at(t)
        if phase != 0.0:
            phi = phase_rotate(phi, phase)
        return ops.assemble(kind, n, phi, cutoff=cutoff)

    return gen


def check_truncation(psi: FockVector, limit: float = TOP_SECTOR_LIMIT):
    top = psi.top_sector_weight()
    total = float(np.vdot(psi.amp, psi.amp).real)
    if top > limit * total:
        raise TruncationError(
            f"top-sector occupancy {top:.3e} exceeds {limit:.0e} of the norm; raise m_max"
        )


def evolve_fluctuation(
    kind: str,
    model: LatticeModel,
    n: int,
    flow: HartreeFlow,
    psi: FockVector,
    s: float,
    t: float,
    budget: PropagationBudget | None = None,
    cutoff: int | None = None,
    phase: float = 0.0,
    ops: FluctuationOperators | None = None,
) -> FockVector:
    """U(t;s) psi for the requested generator kind (time-ordered midpoint rule)."""
    ops = ops or FluctuationOperators(model, psi.basis)
    gen = generator_family(ops, kind, n, flow, cutoff=cutoff, phase=phase)
    out = evolve_timedep(gen, psi, s, t, budget)
    check_truncation(out)
    return out


def conjugation_identity_residual(
    model: LatticeModel,
    n: int,
    phi0: np.ndarray,
    t: float,
    budget: PropagationBudget | None = None,
    m_max: int = 18,
    hartree_dt: float = 1e-3,
    basis: OccupationBasis | None = None,
) -> float:
    """Residual of the conjugation identity behind the fluctuation dynamics.

    Side one conjugates (a_x - sqrt(N) phi_t(x)) by the Heisenberg evolution
    between Weyl displacements of the vacuum; side two routes a_x through
    U(t;0) = W*(sqrt(N) phi_t) e^{-iHt} W(sqrt(N) phi_0) built factor by
    factor.  Returns the worst-site norm of the difference on the vacuum.
    """
    budget = budget or PropagationBudget()
    basis = basis or build_basis(model.d, m_max)
    flow = HartreeFlow(phi0, model, hartree_dt)
    phi_t = flow.at(t)
    f0 = np.sqrt(n) * np.asarray(phi0, dtype=complex)
    ft = np.sqrt(n) * phi_t
    prop = StaticPropagator(build_fock_hamiltonian(model, n, basis).matrix, budget)
    psi2 = prop.apply(weyl_apply(f0, FockVector.vacuum(basis), budget), t)
    # second side inner displacement, shared across sites
    chi_b = weyl_apply(-ft, psi2, budget)
    worst = 0.0
    for x in range(model.d):
        lhs = annihilate(x, psi2)
        lhs.amp -= ft[x] * psi2.amp
        lhs = weyl_apply(-f0, prop.apply(lhs, -t), budget)
        rhs = weyl_apply(ft, annihilate(x, chi_b), budget)
        rhs = weyl_apply(-f0, prop.apply(rhs, -t), budget)
        worst = max(worst, float(np.linalg.norm(lhs.amp - rhs.amp)))
    return worst


def number_growth_probe(
    kind: str,
    model: LatticeModel,
    n: int,
    phi0: np.ndarray,
    j: int,
    times,
    budget: PropagationBudget | None = None,
    m_max: int = 16,
    cutoff: int | None = None,
    hartree_dt: float = 1e-3,
    basis: OccupationBasis | None = None,
) -> list[tuple[str, int, int, float, float]]:
    """Rows (kind, N, j, t, <N^j>) along U(t;0) vacuum, moments from sector
    weights.  Raises TruncationError if the top sector fills beyond 1e-6."""
    if j < 1:
        raise ValueError("moment order j must be >= 1")
    basis = basis or build_basis(model.d, m_max)
    flow = HartreeFlow(phi0, model, hartree_dt)
    ops = FluctuationOperators(model, basis)
    gen = generator_family(ops, kind, n, flow, cutoff=cutoff)
    psi = FockVector.vacuum(basis)
    rows = []
    t_prev = 0.0
    for t in sorted(float(tt) for tt in times):
        if t != t_prev:
            psi = evolve_timedep(gen, psi, t_prev, t, budget)
            t_prev = t
        check_truncation(psi)
        rows.append((kind, n, j, t, number_moment(psi, j)))
    return rows


def dynamics_gap(
    model: LatticeModel,
    n: int,
    phi0: np.ndarray,
    t: float,
    budget: PropagationBudget | None = None,
    m_max: int = 16,
    hartree_dt: float = 1e-3,
    basis: OccupationBasis | None = None,
    against: str = "reduced",
) -> float:
    """|| (U_N(t;0) - U'(t;0)) vacuum || with U' the reduced (default) or
    limiting dynamics."""
    basis = basis or build_basis(model.d, m_max)
    flow = HartreeFlow(phi0, model, hartree_dt)
    ops = FluctuationOperators(model, basis)
    vac = FockVector.vacuum(basis)
    u_full = evolve_fluctuation("full", model, n, flow, vac, 0.0, t, budget, ops=ops)
    u_other = evolve_fluctuation(against, model, n, flow, vac, 0.0, t, budget, ops=ops)
    return float(np.linalg.norm(u_full.amp - u_other.amp))


def parity_defect(
    model: LatticeModel,
    n: int,
    phi0: np.ndarray,
    t: float,
    budget: PropagationBudget | None = None,
    m_max: int = 16,
    hartree_dt: float = 1e-3,
    kind: str = "reduced",
    basis: OccupationBasis | None = None,
) -> float:
    """max_x |<vac, U* a_x U vac>|; vanishes when U conserves parity."""
    basis = basis or build_basis(model.d, m_max)
    flow = HartreeFlow(phi0, model, hartree_dt)
    ops = FluctuationOperators(model, basis)
    u_vac = evolve_fluctuation(kind, model, n, flow, FockVector.vacuum(basis), 0.0, t, budget, ops=ops)
    return max(
        abs(complex(np.vdot(u_vac.amp, basis.annihilator(x) @ u_vac.amp)))
        for x in range(model.d)
    )


def coherent_marginal_error(
    model: LatticeModel,
    n: int,
    phi0: np.ndarray,
    t: float,
    budget: PropagationBudget | None = None,
    m_max: int | None = None,
    eps_trunc: float = 1e-10,
    hartree_dt: float = 1e-3,
    basis: OccupationBasis | None = None,
    propagator: StaticPropagator | None = None,
) -> float:
    """Trace distance between the one-particle marginal of the evolved
    coherent state psi(sqrt(N) phi0) and the Hartree projector at time t."""
    if basis is None:
        m = m_max if m_max is not None else minimal_cutoff(float(n), eps_trunc)
        basis = build_basis(model.d, m)
    psi = coherent_state(np.sqrt(n) * np.asarray(phi0, dtype=complex), basis, eps_trunc)
    prop = propagator or StaticPropagator(build_fock_hamiltonian(model, n, basis).matrix, budget)
    psi_t = prop.apply(psi, t)
    gamma = marginal_from_fock(psi_t)
    flow = HartreeFlow(phi0, model, hartree_dt)
    phi_t = flow.at(t)
    return trace_distance(gamma, rank_one(phi_t / np.linalg.norm(phi_t)))


def parity_commutator_norm(gen: csr_matrix, basis: OccupationBasis) -> float:
    """max |P G P - G| entry for the sector parity P = (-1)^N."""
    p = basis.parity_diagonal()
    conj = diags(p) @ gen @ diags(p)
    diff = (conj - gen).tocoo()
    return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0


def hermiticity_defect(gen) -> float:
    diff = (gen - gen.conj().T).tocoo()
    return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0
