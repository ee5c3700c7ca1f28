import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import focklab as fl
from focklab.config import ExperimentConfig, config_from_dict, load_config
from focklab.experiments import (
    RateScanRow,
    fit_loglog_slope,
    run_coefficient_suite,
    run_coherent_rate_scan,
    run_fluctuation_suite,
    run_product_rate_scan,
    write_csv,
)
from focklab.model import LatticeModel, Potential


def _config(**overrides):
    base = dict(
        model=LatticeModel(3, Potential.contact(3, 1.0)),
        phi0=np.array([1.0, 0.6, 0.36], complex) / np.linalg.norm([1.0, 0.6, 0.36]),
        t_samples=[0.0, 0.3],
        n_values=[2, 3, 4],
        m_max=12,
        fluctuation_dt=0.02,
        coeff_n_values=[1, 2, 4],
        remainder_n_values=[2],
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_slope_fit_exact_power_laws():
    ns = [2, 3, 4, 6, 8, 12]
    fit = fit_loglog_slope([(n, 3.7 / n) for n in ns])
    assert fit.slope == pytest.approx(-1.0, abs=1e-12)
    fit = fit_loglog_slope([(n, 0.5 / np.sqrt(n)) for n in ns])
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    fit = fit_loglog_slope([(n, 2.2) for n in ns])
    assert fit.slope == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    slope=st.floats(min_value=-2.0, max_value=0.5),
    scale=st.floats(min_value=1e-6, max_value=1e3),
)
def test_slope_fit_recovers_power_laws(slope, scale):
    pts = [(n, scale * n**slope) for n in (2, 3, 5, 8, 13)]
    fit = fit_loglog_slope(pts)
    assert fit.slope == pytest.approx(slope, abs=1e-9)
    assert fit.residual < 1e-9


def test_slope_fit_floor_and_errors():
    assert fit_loglog_slope([(2, 0.0), (4, 1e-15), (8, 0.0)]).exact
    with pytest.raises(fl.FockLabError):
        fit_loglog_slope([(2, 1.0), (4, 0.5)])
    fit = fit_loglog_slope([(2, 1.0), (4, 0.5), (8, 0.25), (16, 1e-15)])
    assert fit.points_used == 3
    assert fit.slope == pytest.approx(-1.0, abs=1e-12)


def test_product_scan_zero_cases():
    # free evolution keeps factorization exactly; what remains is integrator
    # noise, which sits at the slope floor and fits to a flat line
    cfg = _config(model=LatticeModel(3, Potential.zero(3)))
    rows = run_product_rate_scan(cfg)
    assert all(r.trace_distance < 1e-10 for r in rows)
    assert all(r.fitted_slope is None or abs(r.fitted_slope) < 0.1 for r in rows)
    assert all(r.truncation_loss == 0.0 for r in rows)


def test_product_scan_t0_is_zero_and_slopes_attach():
    cfg = _config(t_samples=[0.0, 0.4])
    rows = run_product_rate_scan(cfg)
    at0 = [r for r in rows if r.t == 0.0]
    assert all(r.trace_distance < 1e-12 for r in at0)
    at_t = [r for r in rows if r.t == 0.4]
    assert all(r.fitted_slope is not None for r in at_t)
    assert at_t[0].fitted_slope < -0.5


def test_coherent_scan_reports_truncation_loss():
    cfg = _config(n_values=[2, 3, 4], m_max="auto", t_samples=[0.0, 0.3])
    rows = run_coherent_rate_scan(cfg)
    at0 = [r for r in rows if r.t == 0.0]
    assert all(r.trace_distance < 1e-8 for r in at0)
    assert all(0.0 <= r.truncation_loss < 1e-10 for r in rows)
    assert not any(r.flagged for r in rows)


def test_fluctuation_suite_records_failures_and_continues():
    strong = LatticeModel(3, Potential.contact(3, 2.5))
    cfg = _config(model=strong, m_max=8, n_values=[2, 8], t_samples=[2.0], fluctuation_dt=0.05)
    result = run_fluctuation_suite(cfg)
    assert result.failures  # cutoff 8 cannot hold the growth at t=2
    assert not result.ok
    probes = {p for p, _, _ in result.failures}
    assert probes <= {"moments", "gaps", "parity", "conjugation", "limiting"}
    # surviving cells still produced rows
    assert any(result.tables.values())


def test_fluctuation_suite_clean_run():
    cfg = _config(n_values=[2, 3], t_samples=[0.25], m_max=14)
    result = run_fluctuation_suite(cfg)
    assert result.ok
    assert len(result.tables["moments"]) == 2
    assert len(result.tables["limiting"]) == 2
    gaps = {n: g for (_, n, _, _, g) in result.tables["limiting"]}
    assert gaps[3] < gaps[2]


def test_fluctuation_suite_free_model_all_probes_vanish():
    cfg = _config(
        model=LatticeModel(3, Potential.zero(3)),
        n_values=[2, 4],
        t_samples=[0.5],
        m_max=10,
    )
    result = run_fluctuation_suite(cfg)
    assert result.ok
    assert all(row[-1] < 1e-12 for row in result.tables["moments"])
    assert all(row[-1] < 1e-12 for row in result.tables["gaps"])
    assert all(row[-1] < 1e-12 for row in result.tables["parity"])
    assert all(row[-1] < 1e-12 for row in result.tables["limiting"])
    # the conjugation probe still displaces states, so it sits at the
    # truncation floor of its per-N cutoff rather than at zero
    assert all(row[-1] < 1e-4 for row in result.tables["conjugation"])


def test_coefficient_suite_tables():
    cfg = _config(
        coeff_n_values=[1, 2, 4], remainder_n_values=[2], t_samples=[0.2], n_values=[2, 3], m_max="auto"
    )
    result = run_coefficient_suite(cfg)
    assert result.ok
    parseval_rows = {n: rel for (n, _, rel, _, conv) in result.tables["parseval"]}
    assert parseval_rows[1] < 1e-8 and parseval_rows[2] < 1e-8
    recon = {n: err for (n, _, err) in result.tables["reconstruction"]}
    assert all(err < 1e-10 for err in recon.values())
    assert len(result.tables["remainder"]) == 3  # one row per site
    first = result.tables["coefficients"][0]
    assert first[0] == 1 and first[1] == 0 and first[2] == "1"


def test_threads_give_identical_results():
    cfg1 = _config(t_samples=[0.0, 0.3])
    cfg4 = _config(t_samples=[0.0, 0.3], threads=4)
    rows1 = run_product_rate_scan(cfg1)
    rows4 = run_product_rate_scan(cfg4)
    assert [(r.n, r.t, r.trace_distance) for r in rows1] == [
        (r.n, r.t, r.trace_distance) for r in rows4
    ]


def test_write_csv_formats_17_digits(tmp_path):
    path = tmp_path / "x.csv"
    write_csv(path, ["a", "b", "c", "d"], [(1, 1.0 / 3.0, None, True)])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "a,b,c,d"
    assert lines[1] == "1,0.33333333333333331,,true"


def test_config_unknown_keys_rejected():
    with pytest.raises(fl.ConfigError, match="unknown key"):
        config_from_dict({"modle": {}})
    with pytest.raises(fl.ConfigError, match="unknown key"):
        config_from_dict({"model": {"d": 3, "potentail": {}}})
    with pytest.raises(fl.ConfigError, match="unknown key"):
        config_from_dict({"time": {"dtt": 0.1}})


def test_config_validation_rules():
    with pytest.raises(fl.ConfigError):
        config_from_dict({"scan": {"n_values": [4]}, "fock": {"m_max": 2}})
    with pytest.raises(fl.ConfigError):
        config_from_dict({"time": {"t_max": 0.5, "samples": [1.0]}})
    with pytest.raises(fl.ConfigError):
        config_from_dict({"initial_phi": {"preset": "nope"}})
    cfg = config_from_dict({})
    assert abs(np.linalg.norm(cfg.phi0) - 1.0) < 1e-12


def test_config_phi_forms():
    cfg = config_from_dict({"model": {"d": 2}, "initial_phi": [[3.0, 0.0], [0.0, 4.0]]})
    assert np.allclose(cfg.phi0, [0.6, 0.8j])
    cfg = config_from_dict({"model": {"d": 4}, "initial_phi": {"preset": "delta"}})
    assert cfg.phi0[0] == 1.0 and np.all(cfg.phi0[1:] == 0.0)


def test_load_config_errors(tmp_path):
    with pytest.raises(fl.ConfigError, match="does not exist"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(fl.ConfigError, match="valid JSON"):
        load_config(bad)


def test_shipped_config_loads():
    cfg = load_config("configs/desk.json")
    assert cfg.model.d == 3
    assert cfg.m_max == "auto"
