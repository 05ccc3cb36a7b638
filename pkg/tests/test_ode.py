import numpy as np
import pytest

from conftest import constant_config
from zetasplit.geometry import build_closed_operator, build_half_operators
from zetasplit.ode import (
    enumerate_eigenvalues,
    kernel_dim,
    log_secular,
    loop_transfer,
    small_eigenvalue_count,
    smallest_nonzero,
)


def test_constant_circle_spectrum():
    w = 0.5
    cfg = constant_config(w)
    R = 2.0
    L = cfg.total_length(R)
    ev = enumerate_eigenvalues(build_closed_operator(cfg, R), 3.0)
    k = np.arange(0, 8)
    exact = np.sqrt((2 * np.pi * k / L) ** 2 + w**2)
    exact = exact[exact <= 3.0]
    expect = np.sort(np.r_[-exact, exact, -exact[1:], exact[1:]])
    assert np.allclose(np.sort(ev.all()), expect, atol=1e-9)


def test_secular_identity_small_R():
    cfg = constant_config(0.3 + 0.2j, lengths=(0.7, 1.1))
    desc = build_closed_operator(cfg, 0.5)
    for lam in (0.17, 0.9, 1.7):
        T = loop_transfer(desc, lam)
        T = T[0] if T.ndim == 3 else T
        direct = np.linalg.det(T - np.eye(T.shape[0]))
        stable = np.exp(log_secular(desc, lam)[0])
        assert stable == pytest.approx(direct, rel=1e-9)


def test_symmetric_spectrum(generic):
    ev = enumerate_eigenvalues(build_closed_operator(generic, 4.0), 1.0).all()
    assert np.allclose(np.sort(ev), np.sort(-ev), atol=1e-9)


def test_hidden_kernel_domain_wall(domain_wall):
    for R in (4.0, 16.0):
        desc = build_closed_operator(domain_wall, R)
        assert kernel_dim(desc)[0] == 2
        n, _ = small_eigenvalue_count(desc, 1e-3)
        assert n == 2
    sides = build_half_operators(domain_wall, 16.0)
    assert [small_eigenvalue_count(d, 1e-3)[0] for d in sides] == [1, 1]


def test_smallest_nonzero_constant():
    cfg = constant_config(0.5)
    assert smallest_nonzero(build_closed_operator(cfg, 2.0)) == pytest.approx(0.5, abs=1e-9)


def test_window_certificate(mirror):
    ev = enumerate_eigenvalues(build_closed_operator(mirror, 8.0), 0.5)
    assert ev.kernel() == 1
    assert "kernel_svd" in ev.certification
