"""Transfer matrices and spectra of the one-dimensional operators G(d/dx + B(x)).

Solutions of D psi = lambda psi satisfy psi' = -(B + lambda G) psi.  Writing
psi = (a, b) with a in the +i and b in the -i eigenspace of G, the transfer
matrix T preserves |a|^2 - |b|^2 for real lambda, so its scattering form

    S : (a_left, b_right) -> (a_right, b_left)

is unitary and stays bounded however long the necks are.  Segments are
composed with the Redheffer star product, and log det S22 is tracked on the
side so secular determinants can be reconstructed without overflow.

Eigenvalues are the points where a unitary monodromy U(lambda) has
eigenvalue 1 (U = S for the circle, U = S Theta for a boundary problem).
The eigenphases of U decrease monotonically in lambda, so roots are counted
from the winding of the phases and refined by bisection and Brent's method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .fiber import KERNEL_TOL, orthonormal_columns
from .geometry import ClosedDescriptor, HalfDescriptor, Segment, neck_B

ARC_TOL = 1e-10
ARC_CHUNK = 0.5
ZERO_WINDOW = 1e-9
ROOT_XTOL = 1e-13


class SpectralError(RuntimeError):
    pass


def clifford(m: int) -> np.ndarray:
    return np.diag(np.r_[np.full(m, 1j), np.full(m, -1j)])


def _lam_array(lam) -> np.ndarray:
    return np.atleast_1d(np.asarray(lam, dtype=complex))


# ---------------------------------------------------------------- scattering form

@dataclass
class SForm:
    """Batched scattering form of a transfer matrix plus log det of its S22 block."""

    S: np.ndarray  # (n, 2m, 2m)
    logdet22: np.ndarray  # (n,)

    @property
    def m(self) -> int:
        return self.S.shape[-1] // 2

    def blocks(self):
        m = self.m
        S = self.S
        return S[:, :m, :m], S[:, :m, m:], S[:, m:, :m], S[:, m:, m:]


def identity_sform(n: int, m: int) -> SForm:
    S = np.broadcast_to(np.eye(2 * m, dtype=complex), (n, 2 * m, 2 * m)).copy()
    return SForm(S, np.zeros(n, dtype=complex))


def _logdet(M) -> np.ndarray:
    sign, ld = np.linalg.slogdet(M)
    return ld + np.log(sign)


def t_to_s(T: np.ndarray) -> SForm:
    m = T.shape[-1] // 2
    A, B, C, D = T[:, :m, :m], T[:, :m, m:], T[:, m:, :m], T[:, m:, m:]
    Dinv = np.linalg.inv(D)
    S = np.empty_like(T)
    S[:, :m, :m] = A - B @ Dinv @ C
    S[:, :m, m:] = B @ Dinv
    S[:, m:, :m] = -Dinv @ C
    S[:, m:, m:] = Dinv
    return SForm(S, -_logdet(D))


def s_to_t(sf: SForm) -> np.ndarray:
    """Back to the transfer matrix (only safe when T is moderate)."""
    S11, S12, S21, S22 = sf.blocks()
    Dm = np.linalg.inv(S22)
    T = np.empty_like(sf.S)
    m = sf.m
    T[:, m:, m:] = Dm
    T[:, m:, :m] = -Dm @ S21
    T[:, :m, m:] = S12 @ Dm
    T[:, :m, :m] = S11 - S12 @ Dm @ S21
    return T


def star(P: SForm, Q: SForm) -> SForm:
    """Scattering form of segment P followed by segment Q."""
    P11, P12, P21, P22 = P.blocks()
    Q11, Q12, Q21, Q22 = Q.blocks()
    m = P.m
    I = np.eye(m)
    X = np.linalg.inv(I - P12 @ Q21)
    Y = np.linalg.inv(I - Q21 @ P12)
    S = np.empty_like(P.S)
    S[:, :m, :m] = Q11 @ X @ P11
    S[:, :m, m:] = Q12 + Q11 @ X @ P12 @ Q22
    S[:, m:, :m] = P21 + P22 @ Q21 @ X @ P11
    S[:, m:, m:] = P22 @ Y @ Q22
    return SForm(S, P.logdet22 + Q.logdet22 + _logdet(Y))


# ---------------------------------------------------------------- segments

def _generator(B: np.ndarray, lam: np.ndarray, m: int) -> np.ndarray:
    """-(B + lam G) for a stack of lambdas (B fixed) -> (n, 2m, 2m)."""
    G = clifford(m)
    return -(B[None] + lam[:, None, None] * G[None])


def constant_sform(W: np.ndarray, length: float, lam) -> SForm:
    lam = _lam_array(lam)
    W = np.atleast_2d(W)
    m = W.shape[0]
    n = lam.size
    if length == 0:
        return identity_sform(n, m)
    A = _generator(neck_B(W), lam, m)
    norm = np.linalg.norm(neck_B(W), 2) + np.abs(lam).max()
    k = max(0, math.ceil(math.log2(max(length * norm, 1e-300)))) if length * norm > 1 else 0
    h = length / 2**k
    sf = t_to_s(sla.expm(A * h))
    for _ in range(k):
        sf = star(sf, sf)
    return sf


_STEP_CACHE: dict = {}


def _rk4_transfer(Bnodes: np.ndarray, h: float, lam: np.ndarray, m: int) -> np.ndarray:
    """RK4 propagator with coefficient samples at half steps (Bnodes: (2n+1, 2m, 2m)).

    All step matrices are built at once and multiplied by a pairwise tree.
    """
    G = clifford(m)
    lamG = lam[None, :, None, None] * G
    A0 = -(Bnodes[0:-1:2][:, None] + lamG)
    Am = -(Bnodes[1::2][:, None] + lamG)
    A1 = -(Bnodes[2::2][:, None] + lamG)
    K1 = A0
    K2 = Am + (h / 2) * Am @ K1
    K3 = Am + (h / 2) * Am @ K2
    K4 = A1 + h * A1 @ K3
    M = np.eye(2 * m) + (h / 6) * (K1 + 2 * K2 + 2 * K3 + K4)
    while M.shape[0] > 1:
        if M.shape[0] % 2:
            last = M[-1:]
            M = np.concatenate([M[1:-1:2] @ M[0:-1:2], last], axis=0)
        else:
            M = M[1::2] @ M[0::2]
    return M[0]


RK4_BATCH = 200_000  # steps x lambdas per vectorized block


def _chunk_transfer(seg: Segment, a: float, b: float, lam: np.ndarray, nsteps: int) -> np.ndarray:
    x = np.linspace(a, b, 2 * nsteps + 1)
    Bn = neck_B(seg.W_at(x))
    m = seg.profile.W_left.shape[0]
    per = max(1, RK4_BATCH // nsteps)
    if lam.size <= per:
        return _rk4_transfer(Bn, (b - a) / nsteps, lam, m)
    return np.concatenate(
        [_rk4_transfer(Bn, (b - a) / nsteps, lam[i:i + per], m) for i in range(0, lam.size, per)]
    )


def _chunks(seg: Segment):
    bp = seg.profile.breakpoints()
    out = []
    for a, b in zip(bp[:-1], bp[1:]):
        k = max(1, math.ceil((b - a) / ARC_CHUNK))
        edges = np.linspace(a, b, k + 1)
        out += list(zip(edges[:-1], edges[1:]))
    return out


def _steps_for(seg: Segment, a: float, b: float, lam: np.ndarray) -> int:
    """Step count from step doubling at the largest |lambda| bucket in the batch."""
    lmax = float(np.abs(lam).max()) if lam.size else 0.0
    bucket = 2.0 ** math.ceil(math.log2(max(lmax, 1.0)))
    key = (id(seg.profile), round(a, 12), round(b, 12), bucket)
    hit = _STEP_CACHE.get(key)
    if hit is not None and hit[0] is seg.profile:
        return hit[1]
    probe = np.array([bucket, -bucket, 1j * bucket, 0.0], dtype=complex)
    Wmax = float(np.abs(seg.W_at(np.linspace(a, b, 33))).max())
    n = max(4, math.ceil(2 * (b - a) * (2 * Wmax + bucket)))
    T1 = _chunk_transfer(seg, a, b, probe, n)
    for _ in range(30):
        T2 = _chunk_transfer(seg, a, b, probe, 2 * n)
        err = np.abs(T2 - T1).max() / max(1.0, np.abs(T2).max())
        n *= 2
        if err < ARC_TOL:
            break
        T1 = T2
    else:
        raise SpectralError("step underflow in arc integration")
    _STEP_CACHE[key] = (seg.profile, n)
    return n


def arc_transfer(seg: Segment, lam) -> np.ndarray:
    """Transfer matrix across a non-constant arc (batched, moderate size)."""
    lam = _lam_array(lam)
    m = seg.profile.W_left.shape[0]
    T = np.broadcast_to(np.eye(2 * m), (lam.size, 2 * m, 2 * m)).astype(complex)
    for a, b in _chunks(seg):
        T = _chunk_transfer(seg, a, b, lam, _steps_for(seg, a, b, lam)) @ T
    return T


def segment_transfer(seg: Segment, lam) -> np.ndarray:
    lam = _lam_array(lam)
    if seg.constant:
        m = seg.W.shape[0]
        return sla.expm(_generator(neck_B(seg.W), lam, m) * seg.length)
    return arc_transfer(seg, lam)


def _constant_on(seg: Segment, a: float, b: float):
    W = seg.W_at(np.linspace(a, b, 9))
    return W[0] if np.array_equal(W, np.broadcast_to(W[0], W.shape)) else None


def segment_sform(seg: Segment, lam) -> SForm:
    lam = _lam_array(lam)
    if seg.constant:
        return constant_sform(seg.W, seg.length, lam)
    sf = None
    for a, b in _chunks(seg):
        Wc = _constant_on(seg, a, b)
        if Wc is not None:
            piece = constant_sform(Wc, b - a, lam)
        else:
            piece = t_to_s(_chunk_transfer(seg, a, b, lam, _steps_for(seg, a, b, lam)))
        sf = piece if sf is None else star(sf, piece)
    return sf


def chain_sform(segments, lam) -> SForm:
    lam = _lam_array(lam)
    sf = None
    for seg in segments:
        piece = segment_sform(seg, lam)
        sf = piece if sf is None else star(sf, piece)
    return sf


def transfer(seg: Segment, lam: float) -> np.ndarray:
    """T with psi(end) = T psi(start) for a single segment."""
    return segment_transfer(seg, lam)[0]


def loop_transfer(desc: ClosedDescriptor, lam) -> np.ndarray:
    """Direct product of segment transfer matrices (only for short necks / testing)."""
    lam = _lam_array(lam)
    T = None
    for seg in desc.segments:
        Ts = segment_transfer(seg, lam)
        T = Ts if T is None else Ts @ T
    return T


# ---------------------------------------------------------------- boundary data

@dataclass(frozen=True)
class BoundaryData:
    """Index bookkeeping for a boundary problem on an interval.

    The trace vector z = (psi_p, psi_q) has 4m entries; IN are the inputs of
    the scattering form (a at the left end, b at the right end).
    """

    in_idx: np.ndarray
    out_idx: np.ndarray
    left: int  # offset of the left end inside z
    right: int
    Theta: np.ndarray  # OUT -> IN, unitary
    V: np.ndarray  # orthonormal basis of range(P)


def boundary_data(desc: HalfDescriptor) -> BoundaryData:
    m = desc.m
    off = {"p": 0, "q": 2 * m}
    left = off[desc.left_point]
    right = off["q" if desc.left_point == "p" else "p"]
    a = lambda o: np.arange(o, o + m)
    b = lambda o: np.arange(o + m, o + 2 * m)
    in_idx = np.r_[a(left), b(right)]
    out_idx = np.r_[a(right), b(left)]
    P = desc.P
    I = np.eye(4 * m)
    Kb = orthonormal_columns(I - P)
    V = orthonormal_columns(P)
    if Kb.shape[1] != 2 * m or V.shape[1] != 2 * m:
        raise SpectralError(f"boundary projection must have rank {2 * m}, got {V.shape[1]}")
    Theta = Kb[in_idx] @ np.linalg.inv(Kb[out_idx])
    return BoundaryData(in_idx, out_idx, left, right, Theta, V)


def trace_map(sf: SForm, bd: BoundaryData) -> np.ndarray:
    """Z_x: (a_left, b_right) -> z = (psi_p, psi_q), batched (n, 4m, 2m)."""
    S11, S12, S21, S22 = sf.blocks()
    n, m = sf.S.shape[0], sf.m
    Z = np.zeros((n, 4 * m, 2 * m), dtype=complex)
    L, R = bd.left, bd.right
    I = np.eye(m)
    # right end: a = S11 a_l + S12 b_r, b = b_r
    Z[:, R:R + m, :m] = S11
    Z[:, R:R + m, m:] = S12
    Z[:, R + m:R + 2 * m, m:] = I
    # left end: a = a_l, b = S21 a_l + S22 b_r
    Z[:, L:L + m, :m] = I
    Z[:, L + m:L + 2 * m, :m] = S21
    Z[:, L + m:L + 2 * m, m:] = S22
    return Z


# ---------------------------------------------------------------- secular functions

def monodromy(desc, lam) -> np.ndarray:
    """Unitary U(lambda) whose eigenvalue 1 marks eigenvalues of the operator."""
    sf = chain_sform(desc.segments, lam)
    if isinstance(desc, ClosedDescriptor):
        return sf.S
    bd = boundary_data(desc)
    S = sf.S
    # U acts on OUT: OUT = S IN, IN = Theta OUT
    return S @ bd.Theta[None]


def log_secular(desc, lam) -> np.ndarray:
    """log of the secular function (complex, branch arbitrary), batched.

    closed: det(T_loop - I) = (-1)^m det(S - I) / det S22
    sides : det(V^* Z_psi) = det(V^* Z_x) / det S22, Z_psi parametrised by psi(left)
    """
    lam = _lam_array(lam)
    sf = chain_sform(desc.segments, lam)
    m = desc.m
    if isinstance(desc, ClosedDescriptor):
        I = np.eye(2 * m)
        return _logdet(sf.S - I[None]) + 1j * math.pi * m - sf.logdet22
    bd = boundary_data(desc)
    Z = trace_map(sf, bd)
    return _logdet(bd.V.conj().T[None] @ Z) - sf.logdet22


def secular_closed(desc: ClosedDescriptor, lam) -> complex:
    return complex(np.exp(log_secular(desc, lam))[0])


def secular_boundary(desc: HalfDescriptor, lam) -> complex:
    return complex(np.exp(log_secular(desc, lam))[0])


def secular_normalization(desc) -> float:
    """Constant term c of log|F(iy) F(-iy)| - 2 m L y as y -> infinity."""
    if isinstance(desc, ClosedDescriptor):
        return 0.0
    bd = boundary_data(desc)
    m = desc.m
    E = np.eye(4 * m)
    L, R = bd.left, bd.right
    a = lambda o: E[:, o:o + m]
    b = lambda o: E[:, o + m:o + 2 * m]
    d1 = np.linalg.det(bd.V.conj().T @ np.hstack([a(R), b(L)]))
    d2 = np.linalg.det(bd.V.conj().T @ np.hstack([b(R), a(L)]))
    if min(abs(d1), abs(d2)) < 1e-8:
        raise SpectralError("boundary condition degenerate at large imaginary spectral parameter")
    return float(math.log(abs(d1)) + math.log(abs(d2)))


# ---------------------------------------------------------------- enumeration

def _phase_data(desc, lam: np.ndarray):
    U = monodromy(desc, lam)
    ev = np.linalg.eigvals(U)
    th = np.mod(np.angle(ev), 2 * np.pi)
    return th.sum(axis=1), np.angle(np.linalg.det(U)), U


@dataclass
class EigenvalueList:
    window: float
    values: np.ndarray  # distinct roots, sorted
    mult: np.ndarray
    operator: str
    certification: dict = field(default_factory=dict)

    def all(self) -> np.ndarray:
        return np.repeat(self.values, self.mult)

    @property
    def count(self) -> int:
        return int(self.mult.sum())

    def nonzero(self) -> np.ndarray:
        v = self.all()
        return v[v != 0.0]

    def kernel(self) -> int:
        return int(self.mult[self.values == 0.0].sum())


def _crossings(sa, da, sb, db, ) -> tuple[int, float]:
    """Number of eigenphases passing 0 between two points, and the (principal) phase change."""
    delta = math.remainder(db - da, 2 * math.pi)
    n = (sb - sa - delta) / (2 * math.pi)
    return int(round(n)), delta


class _Enumerator:
    def __init__(self, desc, max_step_phase=math.pi / 2):
        self.desc = desc
        self.max_step_phase = max_step_phase
        self.evals = 0
        self.subdivisions = 0

    def data(self, lam):
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        self.evals += lam.size
        s, d, _ = _phase_data(self.desc, lam)
        return s, d

    def signed_phases(self, lam: float) -> np.ndarray:
        U = monodromy(self.desc, np.array([lam]))[0]
        self.evals += 1
        return np.angle(np.linalg.eigvals(U))

    def count_grid(self, grid):
        """Counts per interval [grid[i], grid[i+1]) with adaptive subdivision."""
        s, d = self.data(grid)
        pts = list(zip(grid, s, d))
        out = []
        for i in range(len(pts) - 1):
            out += self._count(pts[i], pts[i + 1], 0)
        return out

    def _count(self, A, B, depth):
        n, delta = _crossings(A[1], A[2], B[1], B[2])
        if (abs(delta) > self.max_step_phase or delta > 1e-9 or n < 0) and depth < 40:
            self.subdivisions += 1
            mid = 0.5 * (A[0] + B[0])
            s, d = self.data([mid])
            M = (mid, s[0], d[0])
            return self._count(A, M, depth + 1) + self._count(M, B, depth + 1)
        if n < 0 or delta > 1e-6:
            raise SpectralError(f"eigenphase winding not monotone near lambda={A[0]:.6g}")
        return [(A, B, n)]

    def isolate(self, A, B, n):
        """Roots (value, multiplicity) inside [A, B) carrying n crossings."""
        a, b = A[0], B[0]
        if n == 0:
            return []
        if n > 1 and (b - a) > 1e-10 * max(1.0, abs(a)):
            mid = 0.5 * (a + b)
            s, d = self.data([mid])
            M = (mid, s[0], d[0])
            n1, _ = _crossings(A[1], A[2], M[1], M[2])
            n1 = min(max(n1, 0), n)
            return self.isolate(A, M, n1) + self.isolate(M, B, n - n1)
        return [(self.solve(a, b, n), n)]

    def solve(self, a, b, n):
        def g(x):
            ph = self.signed_phases(x)
            return float(np.sort(ph[np.argsort(np.abs(ph))[:n]]).sum())

        ga, gb = g(a), g(b)
        if ga == 0:
            return a
        if ga > 0 > gb:
            return brentq(g, a, b, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=200)
        return 0.5 * (a + b)


def enumerate_eigenvalues(desc, window: float, density: float = 1.0, weyl_check: bool = True,
                          _rounds: int = 0, kernel_check: bool = True) -> EigenvalueList:
    """All eigenvalues in [-window, window] with multiplicities.

    Eigenvalues with |lambda| < 1e-9 are reported as 0 (kernel and
    exponentially small values); their number comes from the phase count and
    is cross-checked with the nullity of the shooting system at 0, which also
    catches kernel elements the monodromy cannot resolve.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    L = desc.total_length
    m = desc.m
    h = math.pi / (8 * m * max(L, 1e-3) * density)
    z = ZERO_WINDOW
    npos = max(2, math.ceil((window - z) / h) + 1)
    pos = np.linspace(z, window, npos)
    pos[-1] = np.nextafter(window, np.inf)
    grid = np.r_[-pos[::-1], pos]
    en = _Enumerator(desc)
    intervals = en.count_grid(grid)
    roots = []
    for A, B, n in intervals:
        if n == 0:
            continue
        if A[0] == -z and B[0] == z:
            roots.append((0.0, n))
        else:
            roots += en.isolate(A, B, n)
    vals = np.array([r for r, _ in roots], dtype=float)
    mult = np.array([k for _, k in roots], dtype=int)
    keep = np.abs(vals) <= window
    vals, mult = vals[keep], mult[keep]
    order = np.argsort(vals, kind="stable")
    vals, mult = vals[order], mult[order]
    # merge numerically coincident roots
    if vals.size:
        mv, mm = [vals[0]], [mult[0]]
        for v, k in zip(vals[1:], mult[1:]):
            if abs(v - mv[-1]) <= 1e-10 * max(1.0, abs(v)):
                mm[-1] += k
            else:
                mv.append(v)
                mm.append(k)
        vals, mult = np.array(mv), np.array(mm)
    count = int(mult.sum())
    expected = 2 * m * L * window / math.pi
    weyl_ok = abs(count - expected) <= 4 * m + 4 + 0.02 * expected
    cert = {
        "grid_spacing": h,
        "grid_points": int(grid.size),
        "subdivisions": en.subdivisions,
        "evaluations": en.evals,
        "weyl_expected": expected,
        "weyl_count": count,
        "weyl_ok": bool(weyl_ok),
        "rounds": _rounds,
    }
    if kernel_check:
        # modes localized far from the ends are invisible to the monodromy
        k_exact = kernel_dim(desc)[0]
        n0 = int(mult[vals == 0.0].sum()) if vals.size else 0
        cert["kernel_svd"] = k_exact
        cert["hidden_kernel"] = max(0, k_exact - n0)
        if k_exact > n0:
            if np.any(vals == 0.0):
                mult[vals == 0.0] = k_exact
            else:
                i = int(np.searchsorted(vals, 0.0))
                vals, mult = np.insert(vals, i, 0.0), np.insert(mult, i, k_exact)
    if weyl_check and not weyl_ok and window * L > 8 * math.pi:
        if _rounds >= 3:
            raise SpectralError(f"Weyl count violated: {count} eigenvalues, expected about {expected:.1f}")
        return enumerate_eigenvalues(desc, window, 2 * density, weyl_check, _rounds + 1, kernel_check)
    return EigenvalueList(window, vals, mult, desc.kind, cert)


def kernel_dim(desc, tol: float = KERNEL_TOL) -> tuple[int, bool]:
    """Nullity of the shooting system at 0; the flag marks singular values within a factor 10 of tol."""
    sv = np.linalg.svd(shooting_matrix(desc, 0.0), compute_uv=False)
    scale = max(1.0, sv.max())
    k = int(np.sum(sv <= tol * scale))
    borderline = bool(np.any((sv > tol * scale / 10) & (sv < tol * scale * 10)))
    return k, borderline


SHOOT_CHUNK = 0.5


def _shooting_transfers(desc, lam: float):
    """Transfer matrices over consecutive pieces of length <= SHOOT_CHUNK."""
    lam = _lam_array(lam)
    out = []
    for seg in desc.segments:
        if seg.length == 0:
            continue
        if seg.constant:
            k = max(1, math.ceil(seg.length / SHOOT_CHUNK))
            Tk = sla.expm(_generator(neck_B(seg.W), lam, desc.m)[0] * (seg.length / k))
            out += [Tk] * k
        else:
            for a, b in _chunks(seg):
                out.append(_chunk_transfer(seg, a, b, lam, _steps_for(seg, a, b, lam))[0])
    return out


def shooting_matrix(desc, lam: float = 0.0) -> np.ndarray:
    """Block system for psi at the piece junctions; its null space is ker(D - lam).

    Unlike the monodromy, every block is well conditioned, so modes localized
    deep inside the interval stay visible.
    """
    Ts = _shooting_transfers(desc, lam)
    n, N = 2 * desc.m, len(Ts)
    if isinstance(desc, ClosedDescriptor):
        M = np.zeros((N * n, N * n), dtype=complex)
        for k, T in enumerate(Ts):
            j = (k + 1) % N
            M[k * n:(k + 1) * n, j * n:(j + 1) * n] += np.eye(n)
            M[k * n:(k + 1) * n, k * n:(k + 1) * n] -= T
        return M
    bd = boundary_data(desc)
    M = np.zeros(((N + 1) * n, (N + 1) * n), dtype=complex)
    for k, T in enumerate(Ts):
        M[k * n:(k + 1) * n, (k + 1) * n:(k + 2) * n] = np.eye(n)
        M[k * n:(k + 1) * n, k * n:(k + 1) * n] = -T
    Vh = bd.V.conj().T
    M[N * n:, :n] = Vh[:, bd.left:bd.left + n]
    M[N * n:, N * n:] = Vh[:, bd.right:bd.right + n]
    return M


def small_eigenvalue_count(desc, threshold: float) -> tuple[int, np.ndarray]:
    """Number of eigenvalues with |lambda| below about threshold, from the shooting SVD at 0.

    An eigenfunction at lambda leaves a residual of size |lambda| * piece length,
    so singular values below threshold * SHOOT_CHUNK are counted.
    """
    sv = np.linalg.svd(shooting_matrix(desc, 0.0), compute_uv=False)
    return int(np.sum(sv <= threshold * SHOOT_CHUNK)), np.sort(sv)[:8]


def eigenvalues_below(desc, threshold: float) -> EigenvalueList:
    """Eigenvalues with |lambda| <= threshold (small windows, no Weyl check)."""
    return enumerate_eigenvalues(desc, threshold, weyl_check=False)


def smallest_nonzero(desc, start: float = 0.05, cap: float = 50.0, exclude: float = 0.0) -> float:
    """Smallest |lambda| > exclude in the spectrum (window grows until one is found)."""
    w = max(start, 2 * exclude)
    while w <= cap:
        ev = enumerate_eigenvalues(desc, w, weyl_check=False, kernel_check=False).all()
        ev = np.abs(ev[np.abs(ev) > exclude])
        if ev.size:
            return float(ev.min())
        w *= 2
    raise SpectralError("no nonzero eigenvalue found")


# ---------------------------------------------------------------- infinite sides

def _spectral_projector(B: np.ndarray, sign: int) -> np.ndarray:
    w, V = np.linalg.eigh(B)
    scale = max(1.0, np.abs(w).max())
    sel = w > KERNEL_TOL * scale if sign > 0 else w < -KERNEL_TOL * scale
    Vs = V[:, sel]
    return Vs @ Vs.conj().T


def arc_segment(cfg, side: int) -> Segment:
    from .geometry import _arc

    return _arc(f"arc{side}", cfg.arcs[side - 1])


def l2_kernel_dim_infinite(cfg, side: int, tol: float = KERNEL_TOL) -> tuple[int, bool]:
    """dim of L^2 solutions of D psi = 0 on the arc with half-infinite necks attached.

    At the left end the solution must lie in the B < 0 eigenspace (decay as
    x -> -infinity), at the right end in the B > 0 eigenspace.  Returns the
    dimension and an ill-conditioning flag.
    """
    seg = arc_segment(cfg, side)
    Wl, Wr = (cfg.W0_q, cfg.W0) if side == 1 else (cfg.W0, cfg.W0_q)
    T = segment_transfer(seg, 0.0)[0]
    n = 2 * cfg.m
    I = np.eye(n)
    Ql = I - _spectral_projector(neck_B(Wl), -1)
    Qr = I - _spectral_projector(neck_B(Wr), +1)
    M = np.vstack([Ql, Qr @ T])
    sv = np.linalg.svd(M / max(1.0, np.linalg.norm(T, 2)), compute_uv=False)
    k = int(np.sum(sv <= tol))
    flag = bool(np.any((sv > tol / 10) & (sv < tol * 10)))
    return k, flag
