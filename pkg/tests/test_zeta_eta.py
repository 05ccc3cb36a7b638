import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import constant_config
from scipy import special

from zetasplit.fiber import BoundaryInvolution, haar_unitary, random_involution
from zetasplit.geometry import compute_counts
from zetasplit.sweep import limit_data
from zetasplit.zeta_eta import (
    build_trace,
    det_ratio,
    det_ratio_mellin,
    eta_cylinder,
    eta_decomposition_check,
    evalue_threshold,
    mod1_distance,
    random_tuple,
    relative_heat_trace,
    relative_zeta_prime0,
    split_report,
    zeta_b2_zero,
)


@pytest.mark.parametrize("a", [0.01, 0.3, 1.0, 4.0, 25.0])
def test_exponential_oracle(a):
    res = relative_zeta_prime0(build_trace(lambda t: math.exp(-a * t), 1e-5 / a, a))
    assert res.zeta0 == pytest.approx(1.0, abs=1e-8)
    assert res.zeta_prime0 == pytest.approx(-math.log(a), abs=1e-8)


def test_sum_of_exponentials():
    a = (0.5, 2.0, 3.0)
    res = relative_zeta_prime0(build_trace(lambda t: sum(math.exp(-x * t) for x in a), 1e-6, min(a)))
    assert res.zeta0 == pytest.approx(3.0, abs=1e-8)
    assert res.zeta_prime0 == pytest.approx(-sum(math.log(x) for x in a), abs=1e-7)


def test_threshold():
    assert evalue_threshold(1.0, 4.0) == pytest.approx(1 / 16)
    assert evalue_threshold(1.0, 32.0) == pytest.approx(math.exp(-16))


def test_zeta_b2_zero(generic, invertible):
    # zeta_{B^2}(0) = dim of the fiber minus h_Y
    assert zeta_b2_zero(invertible.fiber) == 4
    assert zeta_b2_zero(generic.fiber) == 2


def test_truncation_reported():
    spec = np.array([0.5, -0.5, 1.0, -1.0])
    with pytest.raises(ValueError, match="minimal usable t"):
        relative_heat_trace(spec, spec, spec, 0, 1e-6)
    value, bound = relative_heat_trace(spec, spec, spec, 0, 200.0)
    assert bound < 1e-9
    assert value == pytest.approx(-sum(math.exp(-200.0 * x**2) for x in spec))


def test_det_ratio_generic(generic):
    lim = limit_data(generic, with_families=False)
    r = det_ratio(generic, 16.0)
    assert r.ratio == pytest.approx(lim.rhs, rel=1e-8)


def test_domain_wall_exponent(domain_wall):
    # with L2 kernels the limit uses 2 dim(L1 cap L2), not 2 h_M
    lim = limit_data(domain_wall, with_families=False)
    cd = compute_counts(domain_wall)
    r = det_ratio(domain_wall, 8.0)
    assert r.ratio * 8.0 ** (-2 * cd.h) == pytest.approx(lim.rhs_intersection, rel=1e-6)
    assert lim.rhs / lim.rhs_intersection == pytest.approx(16.0)


def test_mellin_matches_contour():
    cfg = constant_config(0.5)
    z = det_ratio_mellin(cfg, 0.5, 80.0)
    assert z.det == pytest.approx(det_ratio(cfg, 0.5).ratio, rel=1e-4)


@settings(max_examples=60, deadline=None)
@given(h=st.integers(1, 3), seed=st.integers(0, 2**31))
def test_eta_splitting(h, seed):
    r = eta_decomposition_check(*random_tuple(h, np.random.default_rng(seed)))
    assert r.det_identity_error < 1e-10
    assert r.deviation < 1e-8


def test_eta_cylinder_same_involution():
    rng = np.random.default_rng(5)
    s = random_involution(2, rng)
    # U_+ = identity on (ker B)_+, so det(-U_+) = 1 and eta = 0
    assert mod1_distance(eta_cylinder(s, s).value, 0.0) < 1e-12


def test_split_report_exponential():
    a = 0.7
    tr = build_trace(lambda t: math.exp(-a * t), 1e-5 / a, a)
    rep = split_report(tr, 4.0, epsilon=0.5)
    assert rep.T == pytest.approx(8.0)
    assert rep.large_time == pytest.approx(special.exp1(a * rep.T), abs=1e-9)
    assert rep.small_time + rep.large_time == pytest.approx(-math.log(a), abs=1e-8)
    with pytest.raises(ValueError):
        split_report(tr, 4.0, epsilon=1.5)


def test_eta_cylinder_equal_involutions_scalar():
    # h_Y = 2: det(-U_+) = -1, eta = 1/2 = h_Y / 4 mod 1
    s = random_involution(1, np.random.default_rng(2))
    assert mod1_distance(eta_cylinder(s, s).value, 0.5) < 1e-12


def test_eta_invariant_under_graded_conjugation():
    rng = np.random.default_rng(11)
    h = 2
    C1, C2, s1, s2 = random_tuple(h, rng)
    U = np.zeros((2 * h, 2 * h), complex)
    U[:h, :h], U[h:, h:] = haar_unitary(h, rng), haar_unitary(h, rng)
    conj = lambda M: U @ M @ U.conj().T
    a = eta_decomposition_check(C1, C2, s1, s2)
    b = eta_decomposition_check(conj(C1), conj(C2), BoundaryInvolution(conj(s1.sigma)),
                                BoundaryInvolution(conj(s2.sigma)))
    assert mod1_distance(a.eta_models, b.eta_models) < 1e-10
    assert mod1_distance(a.eta_cyl, b.eta_cyl) < 1e-10
