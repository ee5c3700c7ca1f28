"""Experiment orchestration: rate scans, fluctuation and coefficient suites,
slope fitting, and deterministic CSV emission.

Work is split into independent cells (one per scanned N, or per probe) that
may run on a thread pool; results are merged in a fixed key order before
anything is written, so identical configurations produce bit-identical CSV
files regardless of the thread count.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import FockVector, build_basis
from .config import ExperimentConfig
from .decomposition import (
    scaled_coefficient,
    product_norm_constant,
    remainder_probe,
    parseval_identity_check,
    expansion_coefficient,
    reconstruct_product,
)
from .errors import FockLabError
from .fluctuations import (
    FluctuationOperators,
    evolve_fluctuation,
    conjugation_identity_residual,
    number_growth_probe,
    parity_defect,
)
from .hartree import HartreeFlow, trajectory_csv_rows
from .marginals import hs_distance, marginal_from_sector, rank_one, trace_distance
from .model import build_sector_hamiltonian, embed_product_state
from .propagate import PropagationBudget, StaticPropagator
from .weyl import coherent_state, minimal_cutoff, poisson_tail

SLOPE_FLOOR = 1e-13


def _unit(phi: np.ndarray) -> np.ndarray:
    """Strip the integrator's residual mass drift before building projectors."""
    return phi / np.linalg.norm(phi)


@dataclass
class SlopeFit:
    slope: float | None
    intercept: float | None
    residual: float | None
    exact: bool
    points_used: int


def fit_loglog_slope(points, floor: float = SLOPE_FLOOR) -> SlopeFit:
    """Least squares on (log N, log value); values at or below the floor are
    excluded, and an all-floor series is reported as exact rather than fit."""
    usable = [(n, v) for n, v in points if v > floor]
    if not usable:
        return SlopeFit(None, None, None, True, 0)
    if len(usable) < 3:
        raise FockLabError(f"slope fit needs >= 3 usable points, got {len(usable)}")
    x = np.log([float(n) for n, _ in usable])
    y = np.log([float(v) for _, v in usable])
    coeffs, res = np.polyfit(x, y, 1, full=True)[:2]
    rms = float(np.sqrt(res[0] / len(x))) if len(res) else 0.0
    return SlopeFit(float(coeffs[0]), float(coeffs[1]), rms, False, len(usable))


@dataclass
class RateScanRow:
    n: int
    t: float
    trace_distance: float
    hs_distance: float
    fitted_slope: float | None
    truncation_loss: float
    flagged: bool = False


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return f"{x:.17g}"
    if x is None:
        return ""
    return str(x)


def write_csv(path: str | Path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _check_remark3(trace: float, hs: float):
    # rank-one comparisons keep the trace norm within twice the HS norm
    if trace > 2.0 * hs + 1e-9:
        raise FockLabError(f"emitted distances violate trace <= 2*HS: {trace} vs {hs}")


def _run_cells(cells, threads: int):
    """Evaluate callables, possibly in parallel, preserving order."""
    if threads <= 1:
        return [cell() for cell in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(cell) for cell in cells]
        return [f.result() for f in futures]


def _attach_slopes(rows: list[RateScanRow], t_samples) -> list[RateScanRow]:
    for t in t_samples:
        at_t = [r for r in rows if r.t == t]
        if len(at_t) >= 3:
            fit = fit_loglog_slope([(r.n, r.trace_distance) for r in at_t])
            for r in at_t:
                r.fitted_slope = fit.slope
    return rows


def run_product_rate_scan(config: ExperimentConfig) -> list[RateScanRow]:
    """Evolve embedded product states sector by sector and compare their
    one-particle marginals with the Hartree projector."""
    model = config.model
    budget = PropagationBudget(tol=config.propagation_tol)
    flow = HartreeFlow(config.phi0, model, config.hartree_dt)
    targets = {t: rank_one(_unit(flow.at(t))) for t in config.t_samples}

    def cell(n):
        def run():
            basis = build_basis(model.d, n, capacity=config.capacity)
            psi = embed_product_state(config.phi0, n, basis)
            sector = build_sector_hamiltonian(model, n, capacity=config.capacity)
            prop = StaticPropagator(sector.matrix, budget)
            sl = basis.sector_slice(n)
            out = []
            for t in config.t_samples:
                amp = np.zeros(basis.size, dtype=complex)
                amp[sl] = prop.apply(psi.amp[sl], t)
                gamma = marginal_from_sector(FockVector(basis, amp))
                td = trace_distance(gamma, targets[t])
                hd = hs_distance(gamma, targets[t])
                _check_remark3(td, hd)
                out.append(RateScanRow(n, t, td, hd, None, 0.0))
            return out

        return run

    results = _run_cells([cell(n) for n in config.n_values], config.threads)
    rows = [r for chunk in results for r in chunk]
    return _attach_slopes(rows, config.t_samples)


def run_coherent_rate_scan(config: ExperimentConfig) -> list[RateScanRow]:
    """Evolve coherent states of amplitude sqrt(N) phi0 under the full
    Hamiltonian and compare marginals with the Hartree projector."""
    from .marginals import marginal_from_fock
    from .model import build_fock_hamiltonian

    model = config.model
    budget = PropagationBudget(tol=config.propagation_tol)
    m_max = config.m_max
    if isinstance(m_max, str):
        m_max = minimal_cutoff(float(max(config.n_values)), config.eps_trunc)
    basis = build_basis(model.d, m_max, capacity=config.capacity)
    for x in range(model.d):
        basis.annihilator(x)  # warm the shared ladder cache before the pool
    flow = HartreeFlow(config.phi0, model, config.hartree_dt)
    targets = {t: rank_one(_unit(flow.at(t))) for t in config.t_samples}

    def cell(n):
        def run():
            psi = coherent_state(np.sqrt(n) * config.phi0, basis, config.eps_trunc)
            prop = StaticPropagator(build_fock_hamiltonian(model, n, basis).matrix, budget)
            loss = poisson_tail(float(n), m_max)
            out = []
            for t in config.t_samples:
                gamma = marginal_from_fock(prop.apply(psi, t))
                td = trace_distance(gamma, targets[t])
                hd = hs_distance(gamma, targets[t])
                _check_remark3(td, hd)
                out.append(
                    RateScanRow(n, t, td, hd, None, loss, flagged=loss >= config.truncation_loss_tol)
                )
            return out

        return run

    results = _run_cells([cell(n) for n in config.n_values], config.threads)
    rows = [r for chunk in results for r in chunk]
    return _attach_slopes(rows, config.t_samples)


@dataclass
class SuiteResult:
    tables: dict
    failures: list[tuple[str, str, str]]  # (probe, cell, message)

    @property
    def ok(self) -> bool:
        return not self.failures


def _suite_m_max(config: ExperimentConfig) -> int:
    if isinstance(config.m_max, str):
        return minimal_cutoff(float(max(config.n_values)), config.eps_trunc)
    return config.m_max


def run_fluctuation_suite(config: ExperimentConfig) -> SuiteResult:
    """Number-growth moments, full-vs-reduced gaps, parity defects, the
    conjugation-identity residual, and the limiting-dynamics probe, across
    the configured N scan.  Individual cell failures are recorded and the
    suite continues."""
    model = config.model
    m_max = _suite_m_max(config)
    budget = PropagationBudget(tol=config.propagation_tol, dt=config.fluctuation_dt)
    basis = build_basis(model.d, m_max, capacity=config.capacity)
    ops = FluctuationOperators(model, basis)
    t_end = max(config.t_samples)
    failures: list[tuple[str, str, str]] = []
    tables = {"moments": [], "gaps": [], "parity": [], "conjugation": [], "limiting": []}

    def guarded(probe, label, fn):
        def run():
            try:
                return fn()
            except FockLabError as exc:
                return ("__failure__", probe, label, f"{type(exc).__name__}: {exc}")

        return run

    def moments_cell(n):
        return number_growth_probe(
            "full", model, n, config.phi0, 1, config.t_samples,
            budget, basis=basis, hartree_dt=config.hartree_dt,
        )

    def gaps_cell(n):
        flow = HartreeFlow(config.phi0, model, config.hartree_dt)
        vac = FockVector.vacuum(basis)
        out = []
        psi_f, psi_r, t_prev = vac, vac, 0.0
        for t in sorted(set(config.t_samples)):
            psi_f = evolve_fluctuation("full", model, n, flow, psi_f, t_prev, t, budget, ops=ops)
            psi_r = evolve_fluctuation("reduced", model, n, flow, psi_r, t_prev, t, budget, ops=ops)
            t_prev = t
            out.append(("full-vs-reduced", n, "", t, float(np.linalg.norm(psi_f.amp - psi_r.amp))))
        return out

    def parity_cell(n):
        val = parity_defect(
            model, n, config.phi0, t_end, budget, basis=basis, hartree_dt=config.hartree_dt
        )
        return [("reduced", n, "", t_end, val)]

    def conjugation_cell(n):
        # displaces to amplitude sqrt(N), so this cell sizes its own basis
        m_conj = minimal_cutoff(float(n), config.eps_trunc)
        res = conjugation_identity_residual(
            model, n, config.phi0, t_end,
            PropagationBudget(tol=config.propagation_tol),
            hartree_dt=config.hartree_dt,
            basis=build_basis(model.d, m_conj, capacity=config.capacity),
        )
        return [("conjugation", n, "", t_end, res)]

    def limiting_cells():
        flow = HartreeFlow(config.phi0, model, config.hartree_dt)
        vac = FockVector.vacuum(basis)
        u_lim = evolve_fluctuation("limiting", model, 1, flow, vac, 0.0, t_end, budget, ops=ops)
        out = []
        for n in config.n_values:
            u_n = evolve_fluctuation("full", model, n, flow, vac, 0.0, t_end, budget, ops=ops)
            out.append(("full-vs-limiting", n, "", t_end, float(np.linalg.norm(u_n.amp - u_lim.amp))))
        return out

    cells = []
    for n in config.n_values:
        cells.append(guarded("moments", f"N={n}", lambda n=n: moments_cell(n)))
        cells.append(guarded("gaps", f"N={n}", lambda n=n: gaps_cell(n)))
        cells.append(guarded("parity", f"N={n}", lambda n=n: parity_cell(n)))
        cells.append(guarded("conjugation", f"N={n}", lambda n=n: conjugation_cell(n)))
    cells.append(guarded("limiting", "scan", limiting_cells))

    for result in _run_cells(cells, config.threads):
        if isinstance(result, tuple) and result and result[0] == "__failure__":
            failures.append(result[1:])
            continue
        for row in result:
            probe = {
                "full-vs-reduced": "gaps",
                "reduced": "parity",
                "conjugation": "conjugation",
                "full-vs-limiting": "limiting",
            }.get(row[0], "moments")
            tables[probe].append(row)
    return SuiteResult(tables, failures)


def run_coefficient_suite(config: ExperimentConfig) -> SuiteResult:
    """Coefficient tables, the partial-sum identity, product-state
    reconstruction by phase quadrature, and the one-particle remainder."""
    model = config.model
    failures: list[tuple[str, str, str]] = []
    tables = {"coefficients": [], "parseval": [], "reconstruction": [], "remainder": []}

    for n in config.coeff_n_values:
        rep = parseval_identity_check(n)
        tables["parseval"].append((n, rep.m_reached, rep.rel_error, rep.decay_constant, rep.converged))
        dn2 = product_norm_constant(n).squared
        partial = 0.0
        for m in range(min(rep.m_reached, 40) + 1):
            am = scaled_coefficient(n, m)
            partial += am * am
            tables["coefficients"].append((n, m, str(expansion_coefficient(n, m)), am, abs(partial - dn2) / dn2))

    m_rec = _suite_m_max(config)
    basis = build_basis(model.d, m_rec, capacity=config.capacity)
    k_points = config.k_points if config.k_points is not None else basis.m_max + 1
    for n in [n for n in config.n_values if n <= basis.m_max]:
        try:
            _, err = reconstruct_product(config.phi0, n, k_points, basis, config.eps_trunc)
            tables["reconstruction"].append((n, k_points, err))
        except FockLabError as exc:
            failures.append(("reconstruction", f"N={n}", f"{type(exc).__name__}: {exc}"))

    budget = PropagationBudget(tol=config.propagation_tol, dt=config.fluctuation_dt)
    t_rem = max(config.t_samples)
    for n in config.remainder_n_values:
        try:
            m_fn = minimal_cutoff(float(n), config.eps_trunc)
            rem_basis = build_basis(model.d, m_fn, capacity=config.capacity)
            rep = remainder_probe(
                model, n, config.phi0, t_rem, rem_basis.m_max + 1, rem_basis, budget,
                hartree_dt=config.hartree_dt,
            )
            for x, val in enumerate(rep.site_abs):
                tables["remainder"].append((n, t_rem, x, float(val), rep.total_square))
        except FockLabError as exc:
            failures.append(("remainder", f"N={n}", f"{type(exc).__name__}: {exc}"))
    return SuiteResult(tables, failures)


def run_hartree_trajectory(config: ExperimentConfig):
    from .hartree import evolve_hartree

    t_end = max(config.t_samples)
    return evolve_hartree(
        config.phi0, config.model, t_end, config.hartree_dt, sample_times=config.t_samples
    )


RATE_HEADER = ["N", "t", "trace_distance", "hs_distance", "fitted_slope", "truncation_loss"]

FLUCTUATION_FILES = {
    "moments": ("moments.csv", ["kind", "N", "j", "t", "moment"]),
    "gaps": ("gaps.csv", ["kind", "N", "j", "t", "gap"]),
    "parity": ("parity.csv", ["kind", "N", "j", "t", "defect"]),
    "conjugation": ("conjugation.csv", ["kind", "N", "j", "t", "residual"]),
    "limiting": ("limiting.csv", ["kind", "N", "j", "t", "gap"]),
}

COEFFICIENT_FILES = {
    "coefficients": ("coefficients.csv", ["N", "m", "R_m", "A_m", "partial_sum_residual"]),
    "parseval": ("parseval.csv", ["N", "m_reached", "rel_error", "decay_constant", "converged"]),
    "reconstruction": ("reconstruction.csv", ["N", "K", "error"]),
    "remainder": ("remainder.csv", ["N", "t", "site", "abs_value", "total_square"]),
}


def emit_rate_csv(path, rows: list[RateScanRow]):
    write_csv(
        path,
        RATE_HEADER,
        [
            (r.n, r.t, r.trace_distance, r.hs_distance, r.fitted_slope, r.truncation_loss)
            for r in sorted(rows, key=lambda r: (r.t, r.n))
        ],
    )


def emit_suite_csvs(out_dir, result: SuiteResult, files: dict[str, tuple[str, list[str]]]):
    # cell results arrive in submission order, so rows are already deterministic
    out = Path(out_dir)
    for table, (filename, header) in files.items():
        write_csv(out / filename, header, result.tables[table])


def emit_trajectory_csv(path, samples):
    write_csv(path, ["t", "site", "re_phi", "im_phi", "mass", "energy"], trajectory_csv_rows(samples))
