"""Scattering data of the sides M_{i,infinity} (arc plus half-infinite necks).

Generalized eigensections on a side have, on each attached ray (v >= 0
measured from the arc end), the form

    E = e^{-i lam v} (incoming zero mode) + e^{i lam v} (outgoing zero mode) + theta

with theta decaying.  In circle components the incoming zero modes are the
b-part of ker B at the left end of the arc and the a-part at the right end;
in kernel coordinates this is (ker B)_+ for side 1 and (ker B)_- for side 2.
C_i(lam) sends incoming to outgoing data on its natural block; on the other
block C_i(lam) is read off from solutions at -lam with prescribed
(ker B)-outgoing data, which is how C(lam) C(-lam) = Id arises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .fiber import KERNEL_TOL, BoundaryInvolution, eigenphases, grading, orthonormal_columns
from .geometry import ManifoldConfig, _arc, neck_B
from .ode import _chunks, _constant_on, _steps_for, clifford, segment_transfer

MATCH_COND_MAX = 1e10


class ScatteringError(RuntimeError):
    pass


# ---------------------------------------------------------------- ends and modes

@dataclass(frozen=True)
class _Side:
    side: int
    m: int
    seg: object
    W_left: np.ndarray
    W_right: np.ndarray
    left: slice  # slice of the left end inside the (p, q) fiber vector
    right: slice
    K_in: np.ndarray  # kernel basis of the incoming half (4m x h/2)
    K_out: np.ndarray


def _side(cfg: ManifoldConfig, side: int) -> _Side:
    m = cfg.m
    p, q = slice(0, 2 * m), slice(2 * m, 4 * m)
    Kp, Km = cfg.fiber.kernel_basis()
    if side == 1:
        return _Side(1, m, _arc("arc1", cfg.arcs[0]), cfg.W0_q, cfg.W0, q, p, Kp, Km)
    if side == 2:
        return _Side(2, m, _arc("arc2", cfg.arcs[1]), cfg.W0, cfg.W0_q, p, q, Km, Kp)
    raise ValueError("side must be 1 or 2")


@dataclass(frozen=True)
class _Modes:
    """Eigen-decomposition of A = -(B + mu G) on a neck."""

    X: np.ndarray
    Xinv: np.ndarray
    s: np.ndarray
    zero: np.ndarray  # boolean mask of zero-mode channels
    grow_plus: np.ndarray  # Re s > 0: grows as x -> +infinity
    grow_minus: np.ndarray  # Re s < 0: grows as x -> -infinity
    ker_a: np.ndarray  # orthonormal basis of ker B in the a components
    ker_b: np.ndarray


def _modes(W: np.ndarray, mu: complex) -> _Modes:
    m = W.shape[0]
    B = neck_B(W)
    G = clifford(m)
    Pk = np.eye(2 * m) - np.linalg.pinv(B, rcond=KERNEL_TOL) @ B
    Pk = (Pk + Pk.conj().T) / 2
    Ea = np.zeros((2 * m, 2 * m)); Ea[:m, :m] = np.eye(m)
    Eb = np.zeros((2 * m, 2 * m)); Eb[m:, m:] = np.eye(m)
    ker_a = orthonormal_columns(Pk @ Ea)
    ker_b = orthonormal_columns(Pk @ Eb)
    # range(B) part: eigenvalues +-sqrt(mu_k^2 - mu^2)
    Vr = orthonormal_columns(np.eye(2 * m) - Pk)
    A = -(B + mu * G)
    if Vr.shape[1]:
        s_r, Y = np.linalg.eig(Vr.conj().T @ A @ Vr)
        Xr = Vr @ Y
    else:
        s_r, Xr = np.zeros(0, complex), np.zeros((2 * m, 0), complex)
    Xk = np.hstack([ker_a, ker_b])
    s_k = np.r_[np.full(ker_a.shape[1], -1j * mu), np.full(ker_b.shape[1], 1j * mu)]
    X = np.hstack([Xk, Xr])
    s = np.r_[s_k, s_r]
    zero = np.r_[np.ones(Xk.shape[1], bool), np.zeros(Xr.shape[1], bool)]
    gp = ~zero & (s.real > 0)
    gm = ~zero & (s.real < 0)
    if np.any(~zero & (np.abs(s.real) < 1e-10)):
        raise ScatteringError(f"spectral parameter {mu} is outside the gap of the neck operator")
    return _Modes(X, np.linalg.inv(X), s, zero, gp, gm, ker_a, ker_b)


def _kernel_rows(modes: _Modes, part: str) -> np.ndarray:
    K = modes.ker_a if part == "a" else modes.ker_b
    return K.conj().T


def _matching_matrix(sd: _Side, mu: complex, given: str):
    """Square system for bounded solutions: growing-mode rows plus prescribed kernel rows."""
    ml, mr = _modes(sd.W_left, mu), _modes(sd.W_right, mu)
    T = segment_transfer(sd.seg, mu)[0]
    # incoming: b at the left end, a at the right end
    lp, rp = ("b", "a") if given == "in" else ("a", "b")
    rows = [
        ml.Xinv[ml.grow_minus],
        mr.Xinv[mr.grow_plus] @ T,
        _kernel_rows(ml, lp),
        _kernel_rows(mr, rp) @ T,
    ]
    M = np.vstack(rows)
    if M.shape[0] != M.shape[1]:
        raise ScatteringError(f"matching system is {M.shape}, expected square")
    return M, T, ml, mr, lp, rp


def _solve_bounded(sd: _Side, mu: complex, given: str, data: np.ndarray):
    """psi(left end) for bounded solutions with prescribed incoming or outgoing kernel data.

    data: (4m, k) fiber vectors; only their left/right slices matter.
    Returns (psi0 (2m, k), T (2m, 2m), left modes, right modes).
    """
    M, T, ml, mr, lp, rp = _matching_matrix(sd, mu, given)
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > MATCH_COND_MAX:
        raise ScatteringError(f"matching system singular (condition number {cond:.3e})")
    nl = ml.grow_minus.sum() + mr.grow_plus.sum()
    rhs = np.zeros((M.shape[0], data.shape[1]), dtype=complex)
    kl = _kernel_rows(ml, lp).shape[0]
    rhs[nl:nl + kl] = _kernel_rows(ml, lp) @ data[sd.left]
    rhs[nl + kl:] = _kernel_rows(mr, rp) @ data[sd.right]
    psi0 = np.linalg.solve(M, rhs)
    return psi0, T, ml, mr


def _kernel_trace(sd: _Side, psi0, T, ml: _Modes, mr: _Modes, part: str) -> np.ndarray:
    """Fiber vectors (4m, k) of the incoming ("in") or outgoing ("out") kernel parts."""
    lp, rp = ("b", "a") if part == "in" else ("a", "b")
    Kl = ml.ker_b if lp == "b" else ml.ker_a
    Kr = mr.ker_a if rp == "a" else mr.ker_b
    out = np.zeros((4 * sd.m, psi0.shape[1]), dtype=complex)
    out[sd.left] = Kl @ (Kl.conj().T @ psi0)
    out[sd.right] = Kr @ (Kr.conj().T @ (T @ psi0))
    return out


def kernel_response(cfg: ManifoldConfig, side: int, mu: complex, given: str = "in") -> np.ndarray:
    """Map between the kernel halves for bounded solutions at eigenvalue mu.

    given="in":  incoming coefficients (K_in coordinates) -> outgoing (K_out)
    given="out": outgoing coefficients -> incoming.
    """
    sd = _side(cfg, side)
    Kg, Kr = (sd.K_in, sd.K_out) if given == "in" else (sd.K_out, sd.K_in)
    if Kg.shape[1] == 0:
        return np.zeros((0, 0), dtype=complex)
    psi0, T, ml, mr = _solve_bounded(sd, mu, given, Kg)
    res = _kernel_trace(sd, psi0, T, ml, mr, "out" if given == "in" else "in")
    return Kr.conj().T @ res


def scattering_matrix(cfg: ManifoldConfig, side: int, lam: float) -> np.ndarray:
    """C_i(lam) on ker B in the (K_plus, K_minus) coordinates."""
    mu1 = cfg.fiber.mu1
    if abs(lam) >= mu1:
        raise ScatteringError(f"|lambda| = {abs(lam):.4g} is not below mu1 = {mu1:.4g}")
    h = cfg.fiber.h_Y
    d = h // 2
    C = np.zeros((h, h), dtype=complex)
    nat = kernel_response(cfg, side, lam, "in")
    other = kernel_response(cfg, side, -lam, "out")
    if side == 1:  # natural block (ker B)_+ -> (ker B)_-
        C[d:, :d] = nat
        C[:d, d:] = other
    else:
        C[:d, d:] = nat
        C[d:, :d] = other
    return C


def natural_block(cfg: ManifoldConfig, side: int, lam: float) -> np.ndarray:
    return kernel_response(cfg, side, lam, "in")


def scattering_derivative(cfg: ManifoldConfig, side: int, lam: float, h: float | None = None):
    """Central-difference C'(lam) and the Richardson discrepancy between steps h and h/2."""
    mu1 = cfg.fiber.mu1
    if h is None:
        h = 1e-4 * min(mu1, 1.0)
    d1 = (scattering_matrix(cfg, side, lam + h) - scattering_matrix(cfg, side, lam - h)) / (2 * h)
    d2 = (scattering_matrix(cfg, side, lam + h / 2) - scattering_matrix(cfg, side, lam - h / 2)) / h
    return (4 * d2 - d1) / 3, float(np.abs(d1 - d2).max())


# ---------------------------------------------------------------- limiting spaces and composites

def limiting_space(C0: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of ker(C0 - 1) for an involution C0."""
    C0 = np.asarray(C0, dtype=complex)
    d = C0.shape[0]
    err = np.linalg.norm(C0 @ C0 - np.eye(d)) if d else 0.0
    if err > tol:
        raise ScatteringError(f"C(0) is not an involution (|C^2 - 1| = {err:.3e})")
    return orthonormal_columns((np.eye(d) + C0) / 2)


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if A.shape[1] == 0 or B.shape[1] == 0:
        return np.zeros(0)
    sv = np.clip(np.linalg.svd(A.conj().T @ B, compute_uv=False), -1, 1)
    return np.arccos(sv)


def intersection_dim(A: np.ndarray, B: np.ndarray, tol: float = 1e-6) -> int:
    """dim(span A cap span B) from principal angles (orthonormal bases)."""
    return int(np.sum(principal_angles(A, B) < tol))


def compose_c12(C1: np.ndarray, C2: np.ndarray) -> np.ndarray:
    """C12 = C1 C2 restricted to (ker B)_-: C2 sends it to (ker B)_+, C1 back."""
    d = C1.shape[0] // 2
    return C1[d:, :d] @ C2[:d, d:]


def s_sigma(C: np.ndarray, sigma: BoundaryInvolution, side: int) -> np.ndarray:
    """S_sigma on ker(sigma + 1) in an orthonormal basis Q of that space.

    side 1: -P_sigma C (1 - iG) ;  side 2: -P_sigma C (1 + iG)
    """
    h = sigma.d
    G = grading(h)
    Q = sigma_minus_basis(sigma)
    I = np.eye(h) - 1j * G if side == 1 else np.eye(h) + 1j * G
    return -Q.conj().T @ sigma.pi @ C @ I @ Q


def sigma_minus_basis(sigma: BoundaryInvolution) -> np.ndarray:
    return orthonormal_columns(sigma.pi)


# ---------------------------------------------------------------- families

@dataclass
class ScatteringFamily:
    kind: str  # C1 | C2 | C12 | S1 | S2
    lam: np.ndarray
    C: np.ndarray  # (n, d, d)
    dC: np.ndarray | None = None
    phases: np.ndarray | None = None  # (n, d) continuous branches
    vectors: np.ndarray | None = None  # (n, d, d) branch eigenvectors
    evaluator: object = None  # lam -> C(lam)

    def __post_init__(self):
        if self.phases is None:
            self.phases, self.vectors = track_branches(self.C)

    @property
    def d(self) -> int:
        return self.C.shape[1]

    def index_of(self, lam: float) -> int:
        return int(np.argmin(np.abs(self.lam - lam)))

    def branch_phase(self, j: int, lam: float) -> float:
        """alpha_j(lam) evaluated exactly, following branch j from the nearest grid point."""
        k = self.index_of(lam)
        guess = float(CubicSpline(self.lam, self.phases[:, j])(lam)) if self.lam.size > 3 else self.phases[k, j]
        if self.evaluator is None:
            return guess
        C = self.evaluator(lam)
        w, V = np.linalg.eig(C)
        ov = np.abs(V.conj().T @ self.vectors[k][:, j])
        i = int(np.argmax(ov))
        a = float(np.angle(w[i]))
        return a + 2 * math.pi * round((guess - a) / (2 * math.pi))


def track_branches(C: np.ndarray):
    """Continuous eigenphase branches along the grid by maximal eigenvector overlap."""
    n, d = C.shape[0], C.shape[1]
    phases = np.zeros((n, d))
    vecs = np.zeros((n, d, d), dtype=complex)
    if d == 0:
        return phases, vecs
    mid = n // 2
    ep = eigenphases(C[mid])
    ph = np.where(ep.phases > math.pi, ep.phases - 2 * math.pi, ep.phases)
    phases[mid], vecs[mid] = ph, ep.vectors

    def step(k_from, k_to):
        w, V = np.linalg.eig(C[k_to])
        V = V / np.linalg.norm(V, axis=0)
        ov = np.abs(vecs[k_from].conj().T @ V)
        order = np.full(d, -1)
        used = set()
        for j in np.argsort(-ov.max(axis=1)):
            cand = [i for i in np.argsort(-ov[j]) if i not in used]
            order[j] = cand[0]
            used.add(cand[0])
        for j in range(d):
            a = float(np.angle(w[order[j]]))
            phases[k_to, j] = a + 2 * math.pi * round((phases[k_from, j] - a) / (2 * math.pi))
            vecs[k_to][:, j] = V[:, order[j]]

    for k in range(mid + 1, n):
        step(k - 1, k)
    for k in range(mid - 1, -1, -1):
        step(k + 1, k)
    return phases, vecs


MAX_PHASE_STEP = 0.25
MAX_GRID = 400


def default_grid(cfg: ManifoldConfig, n: int = 41, delta: float | None = None) -> np.ndarray:
    mu1 = cfg.fiber.mu1
    if delta is None:
        delta = min(0.9 * mu1, 0.6)
    return np.linspace(-delta, delta, n)


def family(cfg: ManifoldConfig, kind: str, lam: np.ndarray | None = None, derivative: bool = False) -> ScatteringFamily:
    """Sampled C1, C2, C12, S1 or S2 on a symmetric lambda grid."""
    lam = default_grid(cfg) if lam is None else np.asarray(lam, dtype=float)
    ev = evaluator(cfg, kind)
    C = np.stack([ev(x) for x in lam])
    # refine where an eigenphase moves fast (narrow resonances)
    while C.shape[1] and lam.size < MAX_GRID:
        ph = track_branches(C)[0]
        fast = np.nonzero(np.abs(np.diff(ph, axis=0)).max(axis=1) > MAX_PHASE_STEP)[0]
        if fast.size == 0:
            break
        mids = 0.5 * (lam[fast] + lam[fast + 1])
        lam = np.concatenate([lam, mids])
        C = np.concatenate([C, np.stack([ev(x) for x in mids])])
        order = np.argsort(lam)
        lam, C = lam[order], C[order]
    dC = None
    if derivative:
        h = 1e-4 * min(cfg.fiber.mu1, 1.0)
        dC = np.stack([(ev(x + h) - ev(x - h)) / (2 * h) for x in lam])
    return ScatteringFamily(kind, lam, C, dC, evaluator=ev)


def evaluator(cfg: ManifoldConfig, kind: str):
    if kind == "C1":
        return lambda x: scattering_matrix(cfg, 1, x)
    if kind == "C2":
        return lambda x: scattering_matrix(cfg, 2, x)
    if kind == "C12":
        return lambda x: natural_block(cfg, 1, x) @ natural_block(cfg, 2, x)
    if kind == "S1":
        return lambda x: s_sigma(scattering_matrix(cfg, 1, x), cfg.sigma1, 1)
    if kind == "S2":
        return lambda x: s_sigma(scattering_matrix(cfg, 2, x), cfg.sigma2, 2)
    raise ValueError(f"unknown family {kind!r}")


# ---------------------------------------------------------------- secular sets

@dataclass
class SecularSet:
    kind: str
    R: float
    kappa: float
    roots: np.ndarray
    provenance: list  # (j, k)
    residuals: np.ndarray
    fallbacks: int = 0


def omega_set(fam: ScatteringFamily, R: float, kappa: float, exclude: float = 0.0) -> SecularSet:
    """Nonzero roots of det(e^{i c rho R} C(rho) - 1) in |rho| <= R^-kappa (c = 4 for C12, 2 for S).

    Per branch j: c rho R + alpha_j(rho) = 2 pi k; all sign changes of a dense
    scan are refined with Brent's method on the exactly evaluated phase.
    """
    c = 4.0 if fam.kind == "C12" else 2.0
    win = R ** (-kappa)
    if win > fam.lam.max() or -win < fam.lam.min():
        raise ScatteringError("scattering grid does not cover the s-value window")
    roots, prov, res = [], [], []
    fallbacks = 0
    # every crossing of c x R + alpha_j(x) with 2 pi Z, found on a scan that
    # resolves both the linear term and the fastest phase motion
    lo, hi = -min(1.1 * win, -fam.lam.min()), min(1.1 * win, fam.lam.max())
    step = min(np.diff(fam.lam).min(), 0.2 / (c * R))
    xs = np.linspace(lo, hi, int(math.ceil((hi - lo) / step)) + 1)
    xs = xs[np.abs(xs) > 1e-12]
    for j in range(fam.d):
        spl = CubicSpline(fam.lam, fam.phases[:, j])
        g = c * xs * R + spl(xs)
        f = lambda x, k: c * x * R + fam.branch_phase(j, x) - 2 * math.pi * k
        for k in range(int(math.floor(g.min() / (2 * math.pi))), int(math.ceil(g.max() / (2 * math.pi))) + 1):
            gk = g - 2 * math.pi * k
            for i in np.nonzero(np.sign(gk[:-1]) * np.sign(gk[1:]) < 0)[0]:
                a, b = xs[i], xs[i + 1]
                if a < 0 < b:
                    continue
                try:
                    x = brentq(f, a, b, args=(k,), xtol=1e-15)
                except ValueError:
                    # spline and exact phase disagree on the bracket; keep the spline root
                    fallbacks += 1
                    x = brentq(lambda t: c * t * R + spl(t) - 2 * math.pi * k, a, b, xtol=1e-15)
                if 0 < abs(x) <= win and abs(x) > exclude:
                    roots.append(x)
                    prov.append((j, k))
                    res.append(abs(f(x, k)))
    order = np.argsort(roots)
    return SecularSet(
        fam.kind, R, kappa, np.asarray(roots)[order], [prov[i] for i in order],
        np.asarray(res)[order], fallbacks,
    )


def omega_determinant(fam: ScatteringFamily, R: float, rho: float) -> float:
    c = 4.0 if fam.kind == "C12" else 2.0
    C = fam.evaluator(rho)
    return abs(np.linalg.det(np.exp(1j * c * rho * R) * C - np.eye(C.shape[0])))


# ---------------------------------------------------------------- matching

@dataclass
class MatchReport:
    ok: bool
    R: float
    n_spectrum: int
    n_predicted: int
    gaps: np.ndarray
    max_gap: float
    spectrum: np.ndarray
    predicted: np.ndarray


def match_svalues(spectrum, secular: SecularSet, threshold: float) -> MatchReport:
    """Pair enumerated s-values (0 < |lam| <= R^-kappa, e-values removed) with Omega roots."""
    win = secular.R ** (-secular.kappa)
    ev = np.asarray(spectrum, dtype=float)
    ev = np.sort(ev[(np.abs(ev) <= win) & (np.abs(ev) > threshold)])
    rho = np.sort(secular.roots[np.abs(secular.roots) > threshold])
    ok = ev.size == rho.size
    gaps = np.abs(ev - rho) if ok else np.zeros(0)
    return MatchReport(ok, secular.R, ev.size, rho.size, gaps, float(gaps.max()) if gaps.size else 0.0, ev, rho)


def match_model(spectrum, model_values, R: float, kappa: float, scale: float, threshold: float = 0.0):
    """Compare scale*R*lam_k(R) with the model spectrum in the window scale*R^{1-kappa}.

    scale = 2 for the closed operator, 1 for the sides.  Each eigenvalue in the
    window is paired with the nearest model value (taken from a 20% wider window
    so that nothing straddles the edge); the pairing must be one to one.
    Returns (ok, max gap * R^kappa, gaps).
    """
    ev = np.asarray(spectrum, dtype=float)
    ev = np.sort(ev[(np.abs(ev) <= R ** (-kappa)) & (np.abs(ev) > threshold)])
    scaled = scale * R * ev
    mv = np.sort(np.asarray(model_values, dtype=float))
    mv = mv[(np.abs(mv) <= 1.2 * scale * R ** (1 - kappa)) & (np.abs(mv) > scale * R * threshold)]
    if scaled.size == 0:
        return True, 0.0, np.zeros(0)
    if mv.size == 0:
        return False, math.inf, np.zeros(0)
    d = np.abs(scaled[:, None] - mv[None, :])
    near = d.argmin(axis=1)
    if np.unique(near).size != near.size:
        return False, math.inf, np.zeros(0)
    gaps = d[np.arange(near.size), near]
    return True, float(gaps.max() * R**kappa), gaps


# ---------------------------------------------------------------- eigensections and Maass-Selberg

@dataclass
class GeneralizedEigensection:
    lam: float
    x: np.ndarray  # sample positions on M_{i,R} (left neck from -R, arc, right neck)
    psi: np.ndarray  # (n, 2m) samples
    incoming: np.ndarray  # fiber vector (4m,)
    outgoing: np.ndarray
    theta_left: tuple  # (v, |theta(v)|)
    theta_right: tuple
    norm2: float  # integral of |E|^2 over M_{i,R}
    residual: float  # max |D psi - lam psi| on the neck samples


def _neck_norm2(c: np.ndarray, X: np.ndarray, s: np.ndarray, R: float) -> float:
    """integral_0^R |sum_k c_k x_k e^{s_k v}|^2 dv."""
    Gm = X.conj().T @ X
    e = np.conj(s)[:, None] + s[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        I = np.where(np.abs(e) > 1e-14, np.expm1(e * R) / np.where(np.abs(e) > 1e-14, e, 1), R)
    return float(np.real(np.conj(c) @ (Gm * I) @ c))


def _arc_samples(seg, lam: float, psi0: np.ndarray):
    """Solution samples on the arc at the RK4 nodes and the Simpson integral of |psi|^2."""
    m = psi0.shape[0] // 2
    G = clifford(m)
    xs, ps = [0.0], [psi0]
    total = 0.0
    if seg.constant:
        n = max(64, int(seg.length * 64))
        x = np.linspace(0, seg.length, 2 * n + 1)
        A = -(neck_B(seg.W) + lam * G)
        import scipy.linalg as sla

        Tx = sla.expm(x[:, None, None] * A[None])
        P = Tx @ psi0
        w = np.abs(P) ** 2
        total = float(np.sum((w[0:-1:2] + 4 * w[1::2] + w[2::2]).sum(axis=1)) * (x[1] - x[0]) / 3)
        return x, P, total
    psi = psi0.copy()
    for a, b in _chunks(seg):
        n = _steps_for(seg, a, b, np.array([lam], dtype=complex))
        h = (b - a) / n
        x = np.linspace(a, b, 2 * n + 1)
        Bn = neck_B(seg.W_at(x))
        vals = [psi]
        for k in range(n):
            A0, Am, A1 = (-(Bn[i] + lam * G) for i in (2 * k, 2 * k + 1, 2 * k + 2))
            k1 = A0 @ psi
            k2 = Am @ (psi + h / 2 * k1)
            k3 = Am @ (psi + h / 2 * k2)
            k4 = A1 @ (psi + h * k3)
            psi = psi + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            vals.append(psi)
        w = np.sum(np.abs(np.array(vals)) ** 2, axis=1)
        total += float((w[0] + w[-1] + 4 * w[1:-1:2].sum() + 2 * w[2:-1:2].sum()) * h / 3) if n % 2 == 0 else float(np.trapezoid(w, dx=h))
        xs += list(np.linspace(a, b, n + 1)[1:])
        ps += vals[1:]
    return np.array(xs), np.array(ps), total


def eigensection(cfg: ManifoldConfig, side: int, phi: np.ndarray, lam: float, R: float,
                 n_neck: int = 200) -> GeneralizedEigensection:
    """E(phi, lam) restricted to M_{i,R}; phi is a ker B vector in K coordinates."""
    sd = _side(cfg, side)
    h = cfg.fiber.h_Y
    d = h // 2
    K = np.hstack([sd.K_in, sd.K_out]) if side == 1 else np.hstack([sd.K_out, sd.K_in])
    Gk = grading(h)
    w = (np.eye(h) - 1j * Gk) @ phi if side == 1 else (np.eye(h) + 1j * Gk) @ phi
    data = K @ w  # incoming fiber vector (phi -+ iG phi)
    psi0, T, ml, mr = _solve_bounded(sd, lam, "in", data[:, None])
    psi0 = psi0[:, 0]
    psiL = T @ psi0
    inc = _kernel_trace(sd, psi0[:, None], T, ml, mr, "in")[:, 0]
    out = _kernel_trace(sd, psi0[:, None], T, ml, mr, "out")[:, 0]
    # necks: left neck is x in [-R, 0] (ray v = -x), right neck x in [l, l + R]
    cl = ml.Xinv @ psi0
    cr = mr.Xinv @ psiL
    norm_left = _neck_norm2(cl, ml.X, -ml.s, R)
    norm_right = _neck_norm2(cr, mr.X, mr.s, R)
    xa, pa, norm_arc = _arc_samples(sd.seg, lam, psi0)
    v = np.linspace(0, R, n_neck)
    th_l = np.linalg.norm((ml.X[:, ~ml.zero] * cl[~ml.zero]) @ np.exp(-np.outer(ml.s[~ml.zero], v)), axis=0)
    th_r = np.linalg.norm((mr.X[:, ~mr.zero] * cr[~mr.zero]) @ np.exp(np.outer(mr.s[~mr.zero], v)), axis=0)
    left = (ml.X * cl) @ np.exp(-np.outer(ml.s, v))  # psi(-v)
    right = (mr.X * cr) @ np.exp(np.outer(mr.s, v))
    # residual of psi' = -(B + lam G) psi on the neck samples via the mode decomposition
    G = clifford(cfg.m)
    A_r = -(neck_B(sd.W_right) + lam * G)
    dright = (mr.X * (cr * mr.s)) @ np.exp(np.outer(mr.s, v))
    resid = float(np.abs(dright - A_r @ right).max())
    x = np.r_[-v[::-1], xa, sd.seg.length + v]
    psi = np.vstack([left.T[::-1], pa, right.T])
    return GeneralizedEigensection(
        lam, x, psi, inc, out, (v, th_l), (v, th_r), norm_left + norm_arc + norm_right, resid
    )


def fit_rate(v: np.ndarray, y: np.ndarray, floor: float = 1e-13) -> float:
    """Exponential decay rate from a log-linear fit of y(v) where y is above floor."""
    v, y = np.asarray(v), np.asarray(y)
    keep = y > floor * max(1.0, y.max())
    if keep.sum() < 3:
        return math.inf
    slope = np.polyfit(v[keep], np.log(y[keep]), 1)[0]
    return float(-slope)


@dataclass
class MaassSelberg:
    lhs: complex
    rhs: complex
    diff: float
    rhs_alt: complex  # 4R <phi, psi> form


def maass_selberg_check(cfg: ManifoldConfig, side: int, phi: np.ndarray, psi: np.ndarray,
                        lam: float, R: float) -> MaassSelberg:
    """<E(phi), E(psi)> over M_{i,R} against 2R|phi -+ iG phi . psi -+ iG psi| - i<C(-l)C'(l) ..>."""
    h = cfg.fiber.h_Y
    Gk = grading(h)
    I = np.eye(h) - 1j * Gk if side == 1 else np.eye(h) + 1j * Gk
    Ep = eigensection(cfg, side, phi, lam, R)
    if np.allclose(phi, psi):
        lhs = Ep.norm2
    else:
        # polarization over |E(phi + t psi)|^2
        vals = []
        for t in (1, -1, 1j, -1j):
            vals.append(t * eigensection(cfg, side, phi + t * psi, lam, R).norm2)
        lhs = complex(sum(vals) / 4)
    Cm = scattering_matrix(cfg, side, -lam)
    dC, _ = scattering_derivative(cfg, side, lam)
    a, b = I @ phi, I @ psi
    rhs = 2 * R * np.vdot(b, a) - 1j * np.vdot(b, Cm @ dC @ a)
    rhs_alt = 4 * R * np.vdot(psi, phi) - 1j * np.vdot(b, Cm @ dC @ a)
    return MaassSelberg(complex(lhs), complex(rhs), float(abs(lhs - rhs)), complex(rhs_alt))
