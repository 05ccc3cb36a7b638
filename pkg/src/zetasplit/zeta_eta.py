"""Regularized invariants: relative zeta function, determinant ratios and eta invariants.

Determinant ratios are computed from the secular functions: for a 1-D
operator with secular function F, det_zeta D^2 = |F_hat(0)|^2 e^{-c}, where
F_hat divides out the zero (and e-) values and c is the large-|Im lambda|
normalization of the boundary condition.  The relative Mellin route over
enumerated spectra is kept as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .circle import EULER_GAMMA, CircleOperator, eta_circle
from .fiber import BoundaryInvolution, FiberStructure, u_plus
from .geometry import ManifoldConfig, build_closed_operator, build_half_operators
from .ode import (
    EigenvalueList,
    enumerate_eigenvalues,
    log_secular,
    secular_normalization,
    smallest_nonzero,
)

CONTOUR_POINTS = 128
TRUNCATION_TOL = 1e-9


def zeta_b2_zero(F: FiberStructure) -> int:
    """zeta_{B^2}(0): number of nonzero eigenvalues of B over Y."""
    return int(F.dim - F.h_Y)


def evalue_threshold(mu1: float, R: float) -> float:
    return min(math.exp(-mu1 * R / 2), R ** -2.0)


# ---------------------------------------------------------------- contour determinants

@dataclass
class LogDet:
    """log det_zeta D^2 with zero and e-values removed."""

    value: float
    evalues: np.ndarray
    radius: float
    spread: float  # max |F_hat| deviation between the two halves of the contour nodes


def log_det_zeta(desc, threshold: float, window: float = 0.2,
                 n: int = CONTOUR_POINTS, spectrum: EigenvalueList | None = None) -> LogDet:
    """log det_zeta of the square of the operator in ``desc``, eigenvalues |lam| <= threshold excluded."""
    ev = spectrum if spectrum is not None else enumerate_eigenvalues(desc, window, weyl_check=False)
    allv = ev.all()
    small = allv[np.abs(allv) <= threshold]
    big = np.abs(allv[np.abs(allv) > threshold])
    rmin = big.min() if big.size else smallest_nonzero(desc, exclude=threshold)
    r = 0.5 * rmin
    th = 2 * math.pi * (np.arange(n) + 0.5) / n
    lam = r * np.exp(1j * th)
    lf = log_secular(desc, lam)
    for e in small:
        lf = lf - np.log(lam - e)
    sh = float(lf.real.max())
    w = np.exp(lf - sh)
    Fh = np.mean(w)
    spread = float(abs(np.mean(w[::2]) - np.mean(w[1::2])) / max(abs(Fh), 1e-300))
    val = 2 * (math.log(abs(Fh)) + sh) - secular_normalization(desc)
    return LogDet(val, small, r, spread)


@dataclass
class DetRatio:
    R: float
    ratio: float
    log_closed: LogDet
    log_side1: LogDet
    log_side2: LogDet
    threshold: float

    @property
    def n_evalues(self) -> tuple[int, int, int]:
        return (self.log_closed.evalues.size, self.log_side1.evalues.size, self.log_side2.evalues.size)


def det_ratio(cfg: ManifoldConfig, R: float, window: float = 0.2, spectra=None) -> DetRatio:
    """det_zeta D_R^2 / (det_zeta (D_{1,R})^2_{P_1} det_zeta (D_{2,R})^2_{P_2}).

    e-values (|lam| below the e-threshold) are treated as zero modes, which is
    the hypothesis under which the adiabatic limit formula holds.
    """
    thr = evalue_threshold(cfg.fiber.mu1, R)
    descs = (build_closed_operator(cfg, R),) + build_half_operators(cfg, R)
    spectra = spectra or (None, None, None)
    lds = [log_det_zeta(d, thr, window, spectrum=s) for d, s in zip(descs, spectra)]
    return DetRatio(float(R), math.exp(lds[0].value - lds[1].value - lds[2].value), *lds, thr)


# ---------------------------------------------------------------- relative heat trace and Mellin

@dataclass
class RelativeHeatTrace:
    """f(t) = Tr e^{-t D_R^2} - Tr e^{-t D_1^2} - Tr e^{-t D_2^2} - h, with a small-t expansion.

    Below ``t_safe`` the trace is replaced by its expansion f0 + sum c_k t^{k/2}
    fitted on nodes at and above ``t_safe``.  ``rate`` is the smallest nonzero lambda^2
    and sets the exponential tail used beyond ``t_max``.
    """

    func: object
    t_safe: float
    f0: float
    coeffs: tuple
    fit_residual: float
    rate: float
    t_max: float
    bound: object = None  # t -> truncation bound

    def __call__(self, t: float) -> float:
        if t < self.t_safe:
            return self.f0 + sum(c * t ** ((k + 1) / 2) for k, c in enumerate(self.coeffs))
        return float(self.func(t))


def _fit_small_t(func, t_safe: float, order: int = 4, nodes=(1, 2, 4, 8, 16, 32, 64)):
    """Least-squares fit of f(t) = sum_k c_k t^{k/2}, k <= order, on nodes above t_safe."""
    t = t_safe * np.asarray(nodes, dtype=float)
    y = np.array([func(x) for x in t])
    A = np.sqrt(t)[:, None] ** np.arange(order + 1)[None]
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.abs(A @ coef - y).max())
    return float(coef[0]), tuple(float(c) for c in coef[1:]), res


def heat_trace(eigs, t: float) -> float:
    eigs = np.asarray(eigs, dtype=float)
    return float(np.sum(np.exp(-t * eigs**2)))


def tail_bound(n: int, window: float, t: float, slack: float = 2.0) -> float:
    """Bound on the Gaussian tail of a 1-D spectrum with Weyl density n / (2 window) beyond window."""
    rho = slack * max(n, 1) / (2 * window)
    return float(2 * rho * 0.5 * math.sqrt(math.pi / t) * special.erfc(window * math.sqrt(t)) + slack * math.exp(-t * window**2))


def _spectrum(s):
    vals = s.all() if hasattr(s, "all") else np.asarray(s, dtype=float)
    win = s.window if hasattr(s, "window") else float(np.abs(vals).max())
    return vals, win


def total_bound(specs, t: float) -> float:
    return sum(tail_bound(v.size, w, t) for v, w in map(_spectrum, specs))


def min_usable_t(specs, tol: float = TRUNCATION_TOL) -> float:
    """Smallest t with the summed truncation bound below tol (1% margin)."""
    lo, hi = 1e-12, 1e6
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if total_bound(specs, mid) > 0.99 * tol:
            lo = mid
        else:
            hi = mid
    return hi


def relative_heat_trace(spec_closed, spec_1, spec_2, h: int, t: float) -> tuple[float, float]:
    """(f(t), truncation bound) from three eigenvalue lists with windows."""
    specs = (spec_closed, spec_1, spec_2)
    total = -float(h)
    for sign, s in zip((1, -1, -1), specs):
        total += sign * heat_trace(_spectrum(s)[0], t)
    bound = total_bound(specs, t)
    if bound > TRUNCATION_TOL:
        raise ValueError(f"window insufficient for t = {t:.3g}; minimal usable t is {min_usable_t(specs):.3g}")
    return total, bound


def build_trace(func, t_safe: float, rate: float, t_max: float | None = None) -> RelativeHeatTrace:
    f0, coeffs, res = _fit_small_t(func, t_safe)
    if t_max is None:
        t_max = max(1.0, 40.0 / rate) if rate > 0 else 1.0
    return RelativeHeatTrace(func, t_safe, f0, coeffs, res, rate, t_max)


def trace_from_spectra(spec_closed, spec_1, spec_2, h: int) -> RelativeHeatTrace:
    lists = [_spectrum(s)[0] for s in (spec_closed, spec_1, spec_2)]
    t_safe = min_usable_t((spec_closed, spec_1, spec_2))
    nz = np.concatenate([np.abs(v[np.abs(v) > 1e-9]) for v in lists])
    rate = float(nz.min() ** 2) if nz.size else 1.0
    func = lambda t: relative_heat_trace(spec_closed, spec_1, spec_2, h, t)[0]
    return build_trace(func, t_safe, rate)


@dataclass
class ZetaResult:
    zeta0: float
    zeta_prime0: float
    det: float
    path: str
    fit_residual: float = 0.0


def relative_zeta_prime0(trace: RelativeHeatTrace, f0_tol: float = 1e-7) -> ZetaResult:
    """zeta(0) = f0 and zeta'(0) = gamma f0 + int_0^1 (f - f0)/t dt + int_1^inf f/t dt."""
    if trace.fit_residual > f0_tol:
        raise ValueError(f"f0 extrapolation did not converge (residual {trace.fit_residual:.3e})")
    f0 = trace.f0
    ts = min(trace.t_safe, 1.0)
    # int_0^ts c_k t^{k/2 - 1} dt = (2/k) c_k ts^{k/2}
    small = sum(2 / (k + 1) * c * ts ** ((k + 1) / 2) for k, c in enumerate(trace.coeffs))
    g = lambda s: trace(math.exp(s)) - f0
    mid, err1 = integrate.quad(g, math.log(ts), 0.0, epsabs=1e-12, epsrel=1e-10, limit=200)
    T = max(trace.t_max, 1.0)
    hi, err2 = integrate.quad(lambda s: trace(math.exp(s)), 0.0, math.log(T), epsabs=1e-12, epsrel=1e-10, limit=200)
    fT = trace(T)
    tail = fT * math.exp(trace.rate * T) * special.exp1(trace.rate * T) if trace.rate > 0 else 0.0
    if not all(map(math.isfinite, (mid, hi, tail))):
        raise ArithmeticError("quadrature failure in the Mellin continuation")
    zp = EULER_GAMMA * f0 + small + mid + hi + tail
    return ZetaResult(f0, zp, math.exp(-zp), "relative-mellin", trace.fit_residual)


@dataclass
class SplitReport:
    T: float
    small_time: float  # zeta'(0) part from t <= T
    large_time: float  # int_T^inf f(t)/t dt
    total: float


def split_report(trace: RelativeHeatTrace, R: float, epsilon: float = 0.5) -> SplitReport:
    """Split zeta'(0) at T = R^{2 - epsilon} into small- and large-time contributions.

    Diagnostic only; the determinant ratio never depends on epsilon.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    T = max(R ** (2 - epsilon), 1.0)
    total = relative_zeta_prime0(trace, f0_tol=math.inf).zeta_prime0
    top = max(trace.t_max, T)
    body = 0.0
    if top > T:
        body, _ = integrate.quad(lambda s: trace(math.exp(s)), math.log(T), math.log(top),
                                 epsabs=1e-12, epsrel=1e-10, limit=200)
    f_top = trace(top)
    tail = f_top * math.exp(trace.rate * top) * special.exp1(trace.rate * top) if trace.rate > 0 else 0.0
    large = body + tail
    return SplitReport(T, total - large, large, total)


def det_ratio_mellin(cfg: ManifoldConfig, R: float, window: float, h: int = 0) -> ZetaResult:
    """Cross-check of det_ratio through the relative zeta function (small R, large window)."""
    descs = (build_closed_operator(cfg, R),) + build_half_operators(cfg, R)
    specs = [enumerate_eigenvalues(d, window) for d in descs]
    return relative_zeta_prime0(trace_from_spectra(*specs, h), f0_tol=math.inf)


# ---------------------------------------------------------------- eta invariants

@dataclass
class EtaResult:
    value: float  # mod 1 in [0, 1)
    path: str


def _wrap(x: float) -> float:
    x = x % 1.0
    return 0.0 if abs(x - 1.0) < 1e-14 else x


def mod1_distance(a: float, b: float) -> float:
    d = (a - b) % 1.0
    return min(d, 1.0 - d)


def eta_cylinder(sigma1: BoundaryInvolution, sigma2: BoundaryInvolution) -> EtaResult:
    """eta(D; sigma1, sigma2) mod 1 as -(1/2 pi i) log det(-U_+)."""
    U = u_plus(sigma1, sigma2)
    if U.shape[0] == 0:
        return EtaResult(0.0, "matrix-formula")
    return EtaResult(_wrap(-np.angle(np.linalg.det(-U)) / (2 * math.pi)), "matrix-formula")


@dataclass
class EtaDecomposition:
    C12: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    det_identity_error: float  # |det C12 / (det S1 det S2) - det(sigma(1)_+ sigma(2)_-)|
    eta_models: float  # eta(D(C12)) - eta(D(S1)) - eta(D(S2)) mod 1
    eta_cyl: float
    deviation: float  # mod 1 distance

    @property
    def ok(self) -> bool:
        return self.det_identity_error <= 1e-10 and self.deviation <= 1e-8


def eta_decomposition_check(C1, C2, sigma1: BoundaryInvolution, sigma2: BoundaryInvolution) -> EtaDecomposition:
    """Check the cylinder eta against the model eta invariants built from C1(0), C2(0)."""
    from .scattering import compose_c12, s_sigma

    C1 = np.asarray(C1, dtype=complex)
    C2 = np.asarray(C2, dtype=complex)
    h = C1.shape[0]
    if h % 2 or C2.shape != C1.shape or sigma1.d != h or sigma2.d != h:
        raise ValueError("C1, C2, sigma1, sigma2 must act on a common even-dimensional ker B")
    d = h // 2
    for name, C in (("C1", C1), ("C2", C2)):
        if np.abs(C[:d, :d]).max(initial=0) + np.abs(C[d:, d:]).max(initial=0) > 1e-8:
            raise ValueError(f"{name} does not anticommute with G")
        if np.abs(C @ C.conj().T - np.eye(h)).max(initial=0) > 1e-8:
            raise ValueError(f"{name} is not unitary")
    sigma1.check()
    sigma2.check()
    C12 = compose_c12(C1, C2)
    S1 = s_sigma(C1, sigma1, 1)
    S2 = s_sigma(C2, sigma2, 2)
    target = np.linalg.det(sigma1.sigma[d:, :d] @ sigma2.sigma[:d, d:]) if d else 1.0
    lhs = np.linalg.det(C12) / (np.linalg.det(S1) * np.linalg.det(S2)) if d else 1.0
    em = eta_circle(CircleOperator(C12)) - eta_circle(CircleOperator(S1)) - eta_circle(CircleOperator(S2))
    ec = eta_cylinder(sigma1, sigma2).value
    return EtaDecomposition(C12, S1, S2, float(abs(lhs - target)), _wrap(em), ec, mod1_distance(em, ec))


def random_tuple(h: int, rng: np.random.Generator):
    """Random admissible (C1, C2, sigma1, sigma2) on a kernel of dimension 2h."""
    from .fiber import random_involution

    return (random_involution(h, rng).sigma, random_involution(h, rng).sigma,
            random_involution(h, rng), random_involution(h, rng))
