import numpy as np
import pytest

from zetasplit.fiber import grading
from zetasplit.geometry import build_closed_operator, build_half_operators
from zetasplit.ode import enumerate_eigenvalues
from zetasplit.scattering import (
    ScatteringError,
    compose_c12,
    family,
    intersection_dim,
    kernel_response,
    limiting_space,
    maass_selberg_check,
    match_svalues,
    omega_set,
    principal_angles,
    s_sigma,
    scattering_derivative,
    scattering_matrix,
)
from zetasplit.zeta_eta import evalue_threshold


@pytest.mark.parametrize("lam", [-0.4, -0.05, 0.0, 0.13, 0.5])
@pytest.mark.parametrize("side", [1, 2])
def test_unitary_and_graded(generic, side, lam):
    C = scattering_matrix(generic, side, lam)
    I = np.eye(C.shape[0])
    G = grading(C.shape[0])
    assert np.linalg.norm(C @ C.conj().T - I) < 1e-10
    assert np.linalg.norm(C @ scattering_matrix(generic, side, -lam) - I) < 1e-10
    assert np.linalg.norm(G @ C + C @ G) < 1e-12


def test_c0_is_involution(free_channel):
    for side in (1, 2):
        C0 = scattering_matrix(free_channel, side, 0.0)
        assert np.allclose(C0 @ C0, np.eye(4), atol=1e-10)
        assert np.allclose(C0, C0.conj().T, atol=1e-10)


def test_derivative_richardson(generic):
    dC, disc = scattering_derivative(generic, 1, 0.1)
    h = 1e-3
    fd = (scattering_matrix(generic, 1, 0.1 + h) - scattering_matrix(generic, 1, 0.1 - h)) / (2 * h)
    assert np.allclose(dC, fd, atol=1e-5)
    assert disc < 1e-6


def test_response_rejects_continuum(generic):
    with pytest.raises(ScatteringError):
        kernel_response(generic, 1, 1.0, "in")


def test_limiting_spaces(mirror, generic):
    L1 = limiting_space(scattering_matrix(mirror, 1, 0.0))
    L2 = limiting_space(scattering_matrix(mirror, 2, 0.0))
    assert intersection_dim(L1, L2) == 1
    assert principal_angles(L1, L2)[0] < 1e-8
    C12 = compose_c12(scattering_matrix(mirror, 1, 0.0), scattering_matrix(mirror, 2, 0.0))
    assert np.sum(np.abs(np.linalg.eigvals(C12) - 1) < 1e-6) == 1
    G1 = limiting_space(scattering_matrix(generic, 1, 0.0))
    G2 = limiting_space(scattering_matrix(generic, 2, 0.0))
    assert intersection_dim(G1, G2) == 0


def test_s_sigma_unitary(free_channel):
    C1 = scattering_matrix(free_channel, 1, 0.0)
    S = s_sigma(C1, free_channel.sigma1, 1)
    assert S.shape == (2, 2)
    assert np.allclose(S @ S.conj().T, np.eye(2), atol=1e-10)


@pytest.mark.parametrize("R", [8.0, 12.0])
def test_omega_predicts_svalues(generic, R):
    thr = evalue_threshold(generic.fiber.mu1, R)
    win = R ** (-generic.kappa)
    descs = (build_closed_operator(generic, R),) + build_half_operators(generic, R)
    for kind, d in zip(("C12", "S1", "S2"), descs):
        om = omega_set(family(generic, kind), R, generic.kappa, exclude=thr)
        sp = enumerate_eigenvalues(d, max(0.2, 1.05 * win), weyl_check=False).all()
        mr = match_svalues(sp, om, thr)
        assert mr.ok and mr.n_spectrum > 0
        assert mr.max_gap < 1e-8


def test_resonance_roots_found(mirror):
    # a narrow resonance makes the side-1 phase non-monotone; the extra root must be found
    R = 6.0
    thr = evalue_threshold(mirror.fiber.mu1, R)
    om = omega_set(family(mirror, "S1"), R, mirror.kappa, exclude=thr)
    sp = enumerate_eigenvalues(build_half_operators(mirror, R)[0], 0.3, weyl_check=False).all()
    mr = match_svalues(sp, om, thr)
    assert mr.ok and mr.n_spectrum == 2


def test_maass_selberg_polarized(generic):
    rng = np.random.default_rng(1)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    m = maass_selberg_check(generic, 2, a[0], a[1], 0.07, 12.0)
    assert m.diff < 1e-6 * abs(m.rhs)
