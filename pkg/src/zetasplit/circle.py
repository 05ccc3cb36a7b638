"""Model operators D(C) = -(i/2) d/du on the unit circle with holonomy conj(C).

The spectrum of D(C) is {pi k - alpha_j / 2 : k in Z} over the eigenphases
alpha_j of C.  Determinants and eta invariants are available both in closed
form and through Hurwitz-zeta values at s = 0, which gives two independent
code paths for cross-checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fiber import KERNEL_TOL, FiberError, eigenphases, is_unitary, reduced_det

EULER_GAMMA = 0.57721566490153286060651209008240243
LOG_2PI = math.log(2 * math.pi)

# Lanczos approximation, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def lgamma(x: float) -> float:
    """log Gamma(x) for real x > 0."""
    if x <= 0:
        raise ValueError("lgamma implemented for x > 0 only")
    if x < 0.5:
        # reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return math.log(math.pi / math.sin(math.pi * x)) - lgamma(1.0 - x)
    x -= 1.0
    a = _LANCZOS[0]
    t = x + _LANCZOS_G + 0.5
    for i in range(1, 9):
        a += _LANCZOS[i] / (x + i)
    return 0.5 * LOG_2PI + (x + 0.5) * math.log(t) - t + math.log(a)


def hurwitz_zeta0(a: float) -> float:
    """zeta_H(0, a) = 1/2 - a."""
    return 0.5 - a


def hurwitz_zeta_prime0(a: float) -> float:
    """d/ds zeta_H(s, a) at s = 0, equal to log Gamma(a) - log(2 pi)/2."""
    return lgamma(a) - 0.5 * LOG_2PI


RIEMANN_ZETA0 = -0.5
RIEMANN_ZETA_PRIME0 = -0.5 * LOG_2PI


@dataclass(frozen=True)
class CircleOperator:
    C: np.ndarray
    label: str = "generic"

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=complex)) if np.size(self.C) else np.zeros((0, 0), complex)
        if C.size and not is_unitary(C):
            raise FiberError("circle operator needs a unitary holonomy")
        object.__setattr__(self, "C", C)

    @property
    def d(self) -> int:
        return self.C.shape[0]

    def phases(self) -> np.ndarray:
        return eigenphases(self.C).phases


@dataclass(frozen=True)
class ModelSpectrum:
    window: float
    eigenvalues: np.ndarray
    provenance: tuple  # (j, k) per eigenvalue


def model_spectrum(op: CircleOperator, window: float) -> ModelSpectrum:
    """All pi k - alpha_j/2 with |value| <= window, sorted."""
    if window <= 0:
        raise ValueError("window must be positive")
    vals, prov = [], []
    for j, a in enumerate(op.phases()):
        kmax = int(math.floor((window + a / 2) / math.pi)) + 1
        kmin = int(math.ceil((-window + a / 2) / math.pi)) - 1
        for k in range(kmin, kmax + 1):
            v = math.pi * k - a / 2
            if abs(v) <= window:
                vals.append(v)
                prov.append((j, k))
    order = np.argsort(vals, kind="stable")
    return ModelSpectrum(window, np.asarray(vals)[order], tuple(prov[i] for i in order))


def zeta_det_circle(op: CircleOperator) -> tuple[float, int]:
    """det_zeta D(C)^2 over the nonzero spectrum, closed form.

    Each nonzero phase contributes 4 sin^2(alpha/2); each phase-0 channel
    (spectrum pi k) contributes 4.
    """
    ph = op.phases()
    k0 = int(np.sum(ph == 0.0))
    nz = ph[ph != 0.0]
    return float(np.prod(4 * np.sin(nz / 2) ** 2) * 4.0**k0), k0


def _channel_zeta(a: float) -> tuple[float, float]:
    """(zeta(0), zeta'(0)) of the squared lattice {pi^2 (k - a)^2, k - a != 0}."""
    if a == 0.0:
        z0 = 2 * RIEMANN_ZETA0
        z1 = 2 * (-2 * math.log(math.pi)) * RIEMANN_ZETA0 + 4 * RIEMANN_ZETA_PRIME0
        return z0, z1
    z0 = hurwitz_zeta0(a) + hurwitz_zeta0(1 - a)
    z1 = -2 * math.log(math.pi) * z0 + 2 * (hurwitz_zeta_prime0(a) + hurwitz_zeta_prime0(1 - a))
    return z0, z1


def circle_zeta0_prime0(op: CircleOperator, scale: float = 1.0) -> tuple[float, float]:
    """(zeta(0), zeta'(0)) of (scale * D(C))^2 from Hurwitz values."""
    z0 = z1 = 0.0
    for a in op.phases() / (2 * math.pi):
        c0, c1 = _channel_zeta(float(a))
        z0 += c0
        z1 += c1
    # zeta_{cA}(s) = c^{-s} zeta_A(s)
    z1 -= math.log(scale**2) * z0
    return z0, z1


def zeta_det_circle_hurwitz(op: CircleOperator, scale: float = 1.0) -> float:
    """det_zeta (scale * D(C))^2 via Hurwitz zeta derivatives at 0."""
    return math.exp(-circle_zeta0_prime0(op, scale)[1])


def sin_det(C) -> tuple[float, int]:
    """det*((2 Id - C - C^{-1}) / 4) and its kernel dimension."""
    C = np.atleast_2d(np.asarray(C, dtype=complex)) if np.size(C) else np.zeros((0, 0), complex)
    if C.shape[0] == 0:
        return 1.0, 0
    A = (2 * np.eye(C.shape[0]) - C - C.conj().T) / 4
    val, k = reduced_det((A + A.conj().T) / 2)
    return float(val.real), k


def limit_rhs(C12, S1, S2, h_Y: int, h_M: int, zeta_B2_0: int) -> float:
    """2^{-zeta_{B^2}(0) - h_Y + 2 h_M} det*(..C12..) / (det*(..S1..) det*(..S2..))."""
    d12, _ = sin_det(C12)
    d1, _ = sin_det(S1)
    d2, _ = sin_det(S2)
    return 2.0 ** (-zeta_B2_0 - h_Y + 2 * h_M) * d12 / (d1 * d2)


@dataclass(frozen=True)
class SindetAudit:
    hurwitz: float
    formula: float
    h_Y: int
    h_M: int
    k0: int
    exponent_discrepancy: float  # log2(hurwitz / formula)


def sindet_audit(C12, h_Y: int, h_M: int) -> SindetAudit:
    """Compare det_zeta (D(C12)/2)^2 (Hurwitz path) with 2^{h_Y + 2 h_M} det*((2-C-C^-1)/4)."""
    op = CircleOperator(C12, "C12")
    hz = zeta_det_circle_hurwitz(op, scale=0.5)
    sd, k0 = sin_det(op.C)
    formula = 2.0 ** (h_Y + 2 * h_M) * sd
    return SindetAudit(hz, formula, h_Y, h_M, k0, math.log2(hz / formula))


def _wrap_unit(x: float) -> float:
    x = x % 1.0
    return 0.0 if abs(x - 1.0) < 1e-14 else x


def eta_circle(op: CircleOperator) -> float:
    """eta(D(C)) mod 1 as -(1/2 pi i) log det(-conj C), principal branch."""
    if op.d == 0:
        return 0.0
    det = np.linalg.det(-op.C.conj())
    return _wrap_unit(-np.angle(det) / (2 * math.pi))


def eta_series(op: CircleOperator, window: float = 10 * math.pi) -> float:
    """eta(D(C)) mod 1 from the Hurwitz continuation of sum sign(l)|l|^{-s}.

    For the lattice pi(k - a) the continued series is zeta_H(0, 1-a) -
    zeta_H(0, a) at s = 0; the invariant is half of that plus half the
    kernel dimension.
    """
    if window < 10 * math.pi:
        raise ValueError("window must be at least 10 pi")
    total = 0.0
    for a in op.phases() / (2 * math.pi):
        if a == 0.0:
            total += 0.5  # symmetric lattice, one zero mode
        else:
            total += 0.5 * (hurwitz_zeta0(1 - a) - hurwitz_zeta0(a))
    return _wrap_unit(total)


def eta_from_spectrum(eigs, t: float = 1e-4, zero_tol: float = KERNEL_TOL) -> float:
    """(eta(0) + dim ker)/2 mod 1 from an explicit spectrum, via heat regularization.

    Uses sum sign(l) erfc(|l| sqrt t), whose small-t limit is eta(0) for
    one-dimensional operators; the spectrum must extend well beyond 1/sqrt(t).
    """
    from scipy.special import erfc

    eigs = np.asarray(eigs, dtype=float)
    zero = np.abs(eigs) <= zero_tol
    nz = eigs[~zero]
    eta0 = float(np.sum(np.sign(nz) * erfc(np.abs(nz) * math.sqrt(t))))
    return _wrap_unit(0.5 * (eta0 + zero.sum()))
