import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zetasplit.circle import (
    CircleOperator,
    eta_circle,
    eta_from_spectrum,
    eta_series,
    lgamma,
    limit_rhs,
    model_spectrum,
    sin_det,
    sindet_audit,
    zeta_det_circle,
    zeta_det_circle_hurwitz,
)
from zetasplit.fiber import haar_unitary
from zetasplit.verify import _graded_c12


@pytest.mark.parametrize("x", [0.1, 0.5, 1.0, 2.5, 7.3, 30.0])
def test_lgamma(x):
    assert lgamma(x) == pytest.approx(math.lgamma(x), rel=1e-13, abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(d=st.integers(1, 6), seed=st.integers(0, 2**31))
def test_hurwitz_matches_closed_form(d, seed):
    op = CircleOperator(haar_unitary(d, np.random.default_rng(seed)))
    a, b = zeta_det_circle_hurwitz(op), zeta_det_circle(op)[0]
    assert abs(a - b) <= 1e-10 * abs(b)


@pytest.mark.parametrize("d", [1, 2])
def test_identity_holonomy(d):
    # phase-0 channels contribute 4 each to det_zeta D(Id)^2
    assert zeta_det_circle(CircleOperator(np.eye(d)))[0] == pytest.approx(4.0**d)


def test_model_spectrum_values():
    C = np.diag(np.exp(1j * np.array([0.6, 2.0])))
    ms = model_spectrum(CircleOperator(C), 7.0)
    expect = sorted(math.pi * k - a / 2 for a in (0.6, 2.0) for k in range(-5, 6)
                    if abs(math.pi * k - a / 2) <= 7.0)
    assert np.allclose(ms.eigenvalues, expect)


@settings(max_examples=30, deadline=None)
@given(d=st.integers(1, 4), seed=st.integers(0, 2**31))
def test_eta_closed_form_matches_series(d, seed):
    op = CircleOperator(haar_unitary(d, np.random.default_rng(seed)))
    a, b = eta_circle(op), eta_series(op)
    assert min(abs(a - b), 1 - abs(a - b)) < 1e-10


def test_eta_heat_oracle():
    op = CircleOperator(np.diag(np.exp(1j * np.array([0.9, 4.0]))))
    eigs = model_spectrum(op, 400.0).eigenvalues
    a, b = eta_circle(op), eta_from_spectrum(eigs)
    assert min(abs(a - b), 1 - abs(a - b)) < 1e-6


def test_sindet_audit_agrees_when_hm_is_kernel():
    rng = np.random.default_rng(3)
    for k0 in range(3):
        a = sindet_audit(_graded_c12(3, k0, rng), 6, k0)
        assert a.k0 == k0
        assert abs(a.exponent_discrepancy) < 1e-9


def test_sindet_audit_reports_offset():
    a = sindet_audit(np.zeros((0, 0)), 0, 2)
    assert a.exponent_discrepancy == pytest.approx(-4.0)


def test_sin_det_and_rhs():
    C = np.diag(np.exp(1j * np.array([0.0, math.pi])))
    val, k = sin_det(C)
    assert k == 1 and val == pytest.approx(1.0)
    empty = np.zeros((0, 0))
    assert limit_rhs(empty, empty, empty, 0, 0, 4) == pytest.approx(2.0**-4)
