import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import focklab as fl
from focklab.decomposition import (
    scaled_coefficient,
    coefficient_expansion_profile,
    product_norm_constant,
    displaced_product_profile,
    remainder_probe,
    laguerre_crosscheck,
    laguerre_times_factorial,
    parseval_identity_check,
    expansion_coefficient,
    coeff_leibniz_form,
    coeff_binomial_form,
    reconstruct_product,
)
from focklab.model import Potential
from focklab.propagate import PropagationBudget


def test_d_n_closed_forms():
    assert product_norm_constant(1).squared == pytest.approx(math.e, abs=1e-14)
    assert product_norm_constant(2).squared == pytest.approx(math.e**2 / 2, abs=1e-12)
    assert product_norm_constant(5).value > 0


def test_d_n_quarter_power_growth():
    # d_N / N^{1/4} settles at (2 pi)^{1/4}; within 1% by N = 50
    target = (2 * math.pi) ** 0.25
    assert product_norm_constant(50).value / 50**0.25 == pytest.approx(target, rel=0.01)
    assert product_norm_constant(400).value / 400**0.25 == pytest.approx(target, rel=0.002)


def test_r_m_small_values():
    for n in range(1, 12):
        assert expansion_coefficient(n, 0) == 1
    for n in range(2, 12):
        assert expansion_coefficient(n, 1) == -1
    assert coeff_leibniz_form(2, 2) == 0


def test_r_m_routes_agree_everywhere_they_overlap():
    for n in range(1, 41):
        for m in range(n):
            assert coeff_binomial_form(n, m) == coeff_leibniz_form(n, m)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 60), m=st.integers(0, 59))
def test_r_m_routes_agree_hypothesis(n, m):
    if m <= n - 1:
        assert coeff_binomial_form(n, m) == coeff_leibniz_form(n, m)


def test_laguerre_abs_crosscheck():
    assert laguerre_times_factorial(5, 0) == 1
    assert abs(laguerre_times_factorial(2, 1)) == 1
    for n in range(1, 41):
        for m in range(n):
            assert laguerre_crosscheck(n, m).abs_match


def test_laguerre_sign_convention_mismatch_documented():
    # the direct evaluation gives R_1 = -1 while (-1)^m m! L_m^{(N-m-1)}(N)
    # would give +1 at N=2, m=1; absolute values is what the identities use
    assert expansion_coefficient(2, 1) == -1
    assert (-1) ** 1 * laguerre_times_factorial(2, 1) == 1


def test_a_m_normalization():
    assert scaled_coefficient(3, 0) == 1.0
    assert scaled_coefficient(9, 1) == pytest.approx(-1.0 / 3.0)


def test_parseval_identity_small_n():
    rep1 = parseval_identity_check(1, tol=1e-8)
    assert rep1.converged and rep1.rel_error < 1e-8
    rep2 = parseval_identity_check(2, tol=1e-8)
    assert rep2.converged and rep2.rel_error < 1e-8
    # partial sums approach e and e^2/2
    total = sum(expansion_coefficient(1, m) ** 2 / math.factorial(m) for m in range(40))
    assert total == pytest.approx(math.e, rel=1e-10)


def test_parseval_decay_constant_bounded():
    consts = [parseval_identity_check(n).decay_constant for n in (4, 8, 16, 32)]
    assert all(np.isfinite(c) for c in consts)
    assert max(consts) < 1.5


def test_parseval_cap_flag():
    rep = parseval_identity_check(30, tol=1e-8, m_cap=5)
    assert not rep.converged


def test_reconstruct_product_exact_with_enough_points():
    basis = fl.build_basis(2, 24)
    phi = np.array([1.0, 0.0])
    _, err = reconstruct_product(phi, 1, basis.m_max + 1, basis)
    assert err < 1e-10
    _, err = reconstruct_product(phi, 4, basis.m_max + 1, basis)
    assert err < 1e-10


def test_reconstruct_product_aliasing():
    basis = fl.build_basis(2, 12)
    phi = np.array([0.8, 0.6])
    with pytest.raises(fl.AliasingError):
        reconstruct_product(phi, 3, 3, basis)
    _, err = reconstruct_product(phi, 3, 3, basis, eps_trunc=1e-4, allow_aliasing=True)
    assert err > 1e-3


def test_profile_routes_agree_within_coefficient_tail():
    # Weyl route vs coefficient expansion; the only gap is the exactly
    # computable weight of A_m beyond the cutoff
    basis = fl.build_basis(2, 30)
    rng = np.random.default_rng(0)
    phi = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    phi /= np.linalg.norm(phi)
    for n in (2, 4, 6):
        a = displaced_product_profile(phi, n, 0.9, basis, PropagationBudget(tol=1e-12))
        b = coefficient_expansion_profile(phi, n, 0.9, basis)
        assert a.norm() == pytest.approx(product_norm_constant(n).value, abs=1e-10)
        partial = sum(scaled_coefficient(n, m) ** 2 for m in range(basis.m_max + 1))
        tail = math.sqrt(max(product_norm_constant(n).squared - partial, 0.0))
        assert np.linalg.norm(a.amp - b.amp) <= tail + 1e-8


def test_remainder_probe_zero_cases():
    d = 3
    model = fl.LatticeModel(d, Potential.contact(d, 1.0))
    rng = np.random.default_rng(1)
    phi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    phi /= np.linalg.norm(phi)
    basis = fl.build_basis(d, 12)
    budget = PropagationBudget(tol=1e-9, dt=0.01)
    assert remainder_probe(model, 2, phi, 0.0, 13, basis, budget).total_square < 1e-10
    free = fl.LatticeModel(d, Potential.zero(d))
    assert remainder_probe(free, 2, phi, 0.4, 13, basis, budget).total_square < 1e-10


def test_remainder_probe_guards():
    model = fl.LatticeModel(3, Potential.contact(3, 1.0))
    basis = fl.build_basis(3, 8)
    phi = np.array([1.0, 0.0, 0.0], complex)
    with pytest.raises(fl.AliasingError):
        remainder_probe(model, 2, phi, 0.1, 5, basis)
    with pytest.raises(ValueError):
        remainder_probe(model, 20, phi, 0.1, 9, basis)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        product_norm_constant(0)
    with pytest.raises(ValueError):
        coeff_binomial_form(3, 3)
    with pytest.raises(ValueError):
        laguerre_times_factorial(3, 5)
