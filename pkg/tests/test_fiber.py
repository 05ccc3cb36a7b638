import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zetasplit.fiber import (
    BoundaryInvolution,
    FiberError,
    FiberStructure,
    eigenphases,
    grading,
    haar_unitary,
    random_involution,
    reduced_det,
    validate_fiber,
)


def test_two_point_kernel_and_gap():
    F = FiberStructure.two_point(np.zeros((1, 1)))
    rep = validate_fiber(F)
    assert rep.ok and rep.h_Y == F.h_Y == 4
    G = FiberStructure.two_point(np.ones((1, 1)) * 0.7)
    assert G.h_Y == 0
    assert G.mu1 == pytest.approx(0.7)


def test_mixed_necks_kernel():
    F = FiberStructure.two_point(np.zeros((1, 1)), np.ones((1, 1)))
    assert F.h_Y == 2
    assert F.mu1 == pytest.approx(1.0)
    Kp, Km = F.kernel_basis()
    assert Kp.shape[1] == Km.shape[1] == 1
    assert np.allclose(F.B_Y @ F.K, 0)


def test_broken_anticommutation_is_named():
    G = np.diag([1j, -1j])
    bad = FiberStructure(m=1, G=(G, -G), B0=(np.eye(2), -np.eye(2)), points=("p", "q"))
    rep = validate_fiber(bad)
    assert not rep.ok
    assert any("G B0 = -B0 G" in v for v in rep.violations)


def test_dimension_mismatch_raises():
    G = np.diag([1j, -1j])
    with pytest.raises(FiberError):
        validate_fiber(FiberStructure(m=1, G=(G,), B0=(np.eye(3),), points=("p",)))


def test_involution_check_rejects_commuting_sigma():
    with pytest.raises(FiberError, match="G sigma = -sigma G"):
        BoundaryInvolution(np.diag([1.0, -1.0])).check()


@settings(max_examples=40, deadline=None)
@given(h=st.integers(1, 4), seed=st.integers(0, 2**31))
def test_random_involutions_are_admissible(h, seed):
    s = random_involution(h, np.random.default_rng(seed))
    assert max(s.residuals().values()) < 1e-12
    assert np.trace(s.pi).real == pytest.approx(h)
    Gk = grading(2 * h)
    assert np.allclose(Gk @ Gk, -np.eye(2 * h))


@settings(max_examples=40, deadline=None)
@given(d=st.integers(1, 6), seed=st.integers(0, 2**31))
def test_eigenphases_reconstruct(d, seed):
    U = haar_unitary(d, np.random.default_rng(seed))
    ep = eigenphases(U)
    assert np.all((ep.phases >= 0) & (ep.phases < 2 * np.pi))
    V = ep.vectors
    assert np.allclose(V @ np.diag(np.exp(1j * ep.phases)) @ V.conj().T, U, atol=1e-10)


def test_reduced_det_skips_kernel():
    val, k = reduced_det(np.diag([0.0, 2.0, 3.0]))
    assert k == 1
    assert val == pytest.approx(6.0)
