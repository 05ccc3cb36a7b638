"""Finite-dimensional boundary algebra over the cut hypersurface Y.

Every point of Y carries a fiber C^{2m} with a Clifford element G and a
tangential operator B0.  In the canonical parametrization

    G  = diag(i I_m, -i I_m)
    B0 = [[0, W0^*], [W0, 0]]

so that G^* = -G, G^2 = -1 and G B0 = -B0 G hold by construction.

Vectors in ker B are handled in the ordered orthonormal basis
``(K_plus, K_minus)`` returned by :meth:`FiberStructure.kernel_basis`; all
involutions, scattering matrices and their composites are matrices in
that basis, so G restricted to ker B is ``diag(i I, -i I)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

KERNEL_TOL = 1e-8
"""Relative threshold for every rank / kernel decision in the package."""

INVARIANT_TOL = 1e-12


class FiberError(ValueError):
    """Raised for malformed or inconsistent boundary data."""


def _as_complex(a) -> np.ndarray:
    return np.array(a, dtype=complex)


def neck_operator(W0) -> np.ndarray:
    """Return B0 = [[0, W0^*], [W0, 0]]."""
    W0 = np.atleast_2d(_as_complex(W0))
    m = W0.shape[0]
    if W0.shape != (m, m):
        raise FiberError(f"W0 must be square, got shape {W0.shape}")
    B = np.zeros((2 * m, 2 * m), dtype=complex)
    B[:m, m:] = W0.conj().T
    B[m:, :m] = W0
    return B


def clifford_element(m: int) -> np.ndarray:
    return np.diag(np.r_[np.full(m, 1j), np.full(m, -1j)])


def orthonormal_columns(P: np.ndarray, tol: float = KERNEL_TOL) -> np.ndarray:
    """Gram-Schmidt over the columns of a projector, in column order.

    Deterministic, so a subspace spanned by standard basis vectors gets
    exactly those vectors back.
    """
    basis: list[np.ndarray] = []
    for j in range(P.shape[1]):
        v = P[:, j].copy()
        for _ in range(2):
            for b in basis:
                v -= b * np.vdot(b, v)
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            basis.append(v / nv)
    if not basis:
        return np.zeros((P.shape[0], 0), dtype=complex)
    return np.column_stack(basis)


def null_projector(A: np.ndarray, tol: float = KERNEL_TOL) -> np.ndarray:
    """Orthogonal projector onto ker A (Hermitian A), relative threshold."""
    w, V = np.linalg.eigh(A)
    scale = max(1.0, float(np.max(np.abs(w))) if w.size else 0.0)
    V0 = V[:, np.abs(w) <= tol * scale]
    return V0 @ V0.conj().T


@dataclass(frozen=True)
class FiberStructure:
    """Boundary data (G, B0) at each point of Y."""

    m: int
    G: tuple
    B0: tuple
    points: tuple = ("p", "q")

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return 2 * self.m * self.n_points

    @property
    def G_Y(self) -> np.ndarray:
        return sla.block_diag(*self.G)

    @property
    def B_Y(self) -> np.ndarray:
        return sla.block_diag(*self.B0)

    def kernel_basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal bases of (ker B)_+ and (ker B)_- (the +-i eigenspaces of G)."""
        Pk = null_projector(self.B_Y)
        G = self.G_Y
        I = np.eye(self.dim)
        Kp = orthonormal_columns(Pk @ (I - 1j * G) / 2)
        Km = orthonormal_columns(Pk @ (I + 1j * G) / 2)
        return Kp, Km

    @property
    def K(self) -> np.ndarray:
        Kp, Km = self.kernel_basis()
        return np.hstack([Kp, Km])

    @property
    def h_Y(self) -> int:
        return self.K.shape[1]

    @property
    def mu1(self) -> float:
        w = np.abs(np.linalg.eigvalsh(self.B_Y))
        scale = max(1.0, float(w.max()) if w.size else 0.0)
        pos = w[w > KERNEL_TOL * scale]
        return float(pos.min()) if pos.size else np.inf

    def point_slice(self, k: int) -> slice:
        n = 2 * self.m
        return slice(k * n, (k + 1) * n)

    @classmethod
    def single(cls, W0) -> "FiberStructure":
        B = neck_operator(W0)
        m = B.shape[0] // 2
        return cls(m=m, G=(clifford_element(m),), B0=(B,), points=("p",))

    @classmethod
    def two_point(cls, W0_p, W0_q=None) -> "FiberStructure":
        """Y = {p, q} cutting a circle.

        The q-point is written in its own normal frame (the one in which the
        M1 side lies at u <= 0), where the circle operator G(d/dx + B0)
        reads (-G)(d/du - B0).  Hence q carries (-G, -B0).
        """
        Bp = neck_operator(W0_p)
        Bq = neck_operator(W0_p if W0_q is None else W0_q)
        m = Bp.shape[0] // 2
        if Bq.shape != Bp.shape:
            raise FiberError("W0 at p and q must have the same size")
        G = clifford_element(m)
        return cls(m=m, G=(G, -G), B0=(Bp, -Bq), points=("p", "q"))


@dataclass
class ValidationReport:
    ok: bool
    h_Y: int
    mu1: float
    violations: list = field(default_factory=list)


def validate_fiber(F: FiberStructure, tol: float = INVARIANT_TOL) -> ValidationReport:
    """Check G^* = -G, G^2 = -1, B0 = B0^*, G B0 = -B0 G and the kernel grading.

    Dimension mismatches raise :class:`FiberError`; invariant violations are
    collected in the report together with the offending norm.
    """
    n = 2 * F.m
    if len(F.G) != len(F.B0) or len(F.G) != len(F.points):
        raise FiberError("G, B0 and points must have one entry per point")
    violations = []
    for name, G, B in zip(F.points, F.G, F.B0):
        G = np.asarray(G)
        B = np.asarray(B)
        if G.shape != (n, n) or B.shape != (n, n):
            raise FiberError(f"point {name}: expected {n}x{n} matrices, got {G.shape} and {B.shape}")
        checks = {
            "G^* = -G": np.linalg.norm(G.conj().T + G),
            "G^2 = -Id": np.linalg.norm(G @ G + np.eye(n)),
            "B0 = B0^*": np.linalg.norm(B - B.conj().T),
            "G B0 = -B0 G": np.linalg.norm(G @ B + B @ G),
        }
        for label, err in checks.items():
            if err > tol * max(1.0, np.linalg.norm(B)):
                violations.append(f"point {name}: {label} violated (norm {err:.3e})")
    h_Y, mu1 = 0, np.inf
    if not violations:
        Kp, Km = F.kernel_basis()
        h_Y = Kp.shape[1] + Km.shape[1]
        mu1 = F.mu1
        if Kp.shape[1] != Km.shape[1]:
            violations.append(
                f"(ker B)_+ and (ker B)_- differ in dimension ({Kp.shape[1]} vs {Km.shape[1]})"
            )
        w = np.linalg.eigvalsh(F.B_Y)
        for mu in np.unique(np.round(np.abs(w[np.abs(w) > KERNEL_TOL]), 9)):
            npos = int(np.sum(np.abs(w - mu) < 1e-8))
            nneg = int(np.sum(np.abs(w + mu) < 1e-8))
            if npos != nneg:
                violations.append(f"spectrum of B0 not symmetric at mu={mu:.6g}")
    return ValidationReport(ok=not violations, h_Y=h_Y, mu1=mu1, violations=violations)


def grading(d: int) -> np.ndarray:
    """G restricted to ker B in (K_plus, K_minus) coordinates; d = dim ker B."""
    h = d // 2
    return np.diag(np.r_[np.full(h, 1j), np.full(h, -1j)])


@dataclass(frozen=True)
class BoundaryInvolution:
    """Involution sigma on ker B, anticommuting with G (matrix in K coordinates)."""

    sigma: np.ndarray

    def __post_init__(self):
        s = np.atleast_2d(_as_complex(self.sigma)) if np.size(self.sigma) else np.zeros((0, 0), complex)
        object.__setattr__(self, "sigma", s)

    @property
    def d(self) -> int:
        return self.sigma.shape[0]

    def residuals(self) -> dict:
        s = self.sigma
        I = np.eye(self.d)
        Gk = grading(self.d)
        return {
            "sigma^2 = Id": float(np.linalg.norm(s @ s - I)),
            "sigma^* = sigma": float(np.linalg.norm(s - s.conj().T)),
            "G sigma = -sigma G": float(np.linalg.norm(Gk @ s + s @ Gk)),
        }

    def check(self, tol: float = 1e-10) -> "BoundaryInvolution":
        if self.sigma.shape != (self.d, self.d) or self.d % 2:
            raise FiberError(f"involution must be square of even size, got {self.sigma.shape}")
        bad = {k: v for k, v in self.residuals().items() if v > tol}
        if bad:
            raise FiberError("invalid involution: " + ", ".join(f"{k} (norm {v:.3e})" for k, v in bad.items()))
        return self

    @property
    def pi(self) -> np.ndarray:
        """Projection onto the -1 eigenspace, (1 - sigma)/2."""
        return (np.eye(self.d) - self.sigma) / 2

    @classmethod
    def from_unitary(cls, V) -> "BoundaryInvolution":
        """sigma = [[0, V^*], [V, 0]] for V unitary on (ker B)_+ -> (ker B)_-."""
        V = np.atleast_2d(_as_complex(V)) if np.size(V) else np.zeros((0, 0), complex)
        h = V.shape[0]
        s = np.zeros((2 * h, 2 * h), dtype=complex)
        s[:h, h:] = V.conj().T
        s[h:, :h] = V
        return cls(s)


@dataclass(frozen=True)
class SpectralProjectionSpec:
    P: np.ndarray
    parts: tuple  # (APS rank, involution rank)


def aps_projection(F: FiberStructure, sigma: BoundaryInvolution, side: int) -> SpectralProjectionSpec:
    """P1 = Pi_< + pi_1 (side 1) or P2 = Pi_> + pi_2 (side 2) on the full fiber over Y."""
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    K = F.K
    if sigma.d != K.shape[1]:
        raise FiberError(f"involution acts on dimension {sigma.d}, ker B has dimension {K.shape[1]}")
    sigma.check()
    w, V = np.linalg.eigh(F.B_Y)
    scale = max(1.0, float(np.max(np.abs(w))))
    sel = w < -KERNEL_TOL * scale if side == 1 else w > KERNEL_TOL * scale
    Vs = V[:, sel]
    P_aps = Vs @ Vs.conj().T
    P_inv = K @ sigma.pi @ K.conj().T
    P = P_aps + P_inv
    P = (P + P.conj().T) / 2
    return SpectralProjectionSpec(P=P, parts=(int(sel.sum()), int(round(np.trace(sigma.pi).real))))


@dataclass(frozen=True)
class UnitaryEigenphases:
    phases: np.ndarray
    vectors: np.ndarray
    kernel_mult: int

    def reconstruct(self) -> np.ndarray:
        V = self.vectors
        return V @ np.diag(np.exp(1j * self.phases)) @ V.conj().T


def is_unitary(C: np.ndarray, tol: float = 1e-8) -> bool:
    C = np.atleast_2d(C)
    return np.linalg.norm(C @ C.conj().T - np.eye(C.shape[0])) <= tol


def eigenphases(C, tol: float = KERNEL_TOL) -> UnitaryEigenphases:
    """Eigenphases in [0, 2pi) of a unitary matrix, sorted; phase 0 iff |e^{ia} - 1| <= tol."""
    C = np.atleast_2d(_as_complex(C)) if np.size(C) else np.zeros((0, 0), complex)
    d = C.shape[0]
    if d == 0:
        return UnitaryEigenphases(np.zeros(0), np.zeros((0, 0), complex), 0)
    if not is_unitary(C):
        raise FiberError(f"matrix is not unitary (|CC^*-I| = {np.linalg.norm(C @ C.conj().T - np.eye(d)):.3e})")
    T, Z = sla.schur(C, output="complex")
    ev = np.diag(T)
    ev = ev / np.abs(ev)
    zero = np.abs(ev - 1) <= tol
    ph = np.mod(np.angle(ev), 2 * np.pi)
    ph[zero] = 0.0
    ph[ph >= 2 * np.pi] = 0.0
    order = np.argsort(ph, kind="stable")
    return UnitaryEigenphases(ph[order], Z[:, order], int(zero.sum()))


def reduced_det(A, tol: float = KERNEL_TOL) -> tuple[complex, int]:
    """det* A: product of eigenvalues above tol * max(1, |A|); returns (value, kernel dim)."""
    A = np.atleast_2d(_as_complex(A)) if np.size(A) else np.zeros((0, 0), complex)
    if A.shape[0] == 0:
        return 1.0 + 0j, 0
    ev = np.linalg.eigvals(A)
    scale = max(1.0, np.linalg.norm(A, 2))
    keep = np.abs(ev) > tol * scale
    return complex(np.prod(ev[keep])), int((~keep).sum())


def graded_blocks(C, tol: float = 1e-8, involution: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Off-diagonal blocks of C in the (ker B)_+ + (ker B)_- splitting.

    Returns ``(C_plus, C_minus)`` with C_plus: (ker B)_+ -> (ker B)_- and
    C_minus: (ker B)_- -> (ker B)_+.
    """
    C = np.atleast_2d(_as_complex(C)) if np.size(C) else np.zeros((0, 0), complex)
    d = C.shape[0]
    if d % 2:
        raise FiberError("graded matrix must have even size")
    h = d // 2
    diag_err = np.linalg.norm(C[:h, :h]) + np.linalg.norm(C[h:, h:])
    if diag_err > tol:
        raise FiberError(f"C does not anticommute with G (diagonal blocks norm {diag_err:.3e})")
    Cp, Cm = C[h:, :h], C[:h, h:]
    if involution and h:
        err = np.linalg.norm(Cp @ Cm - np.eye(h))
        if err > tol:
            raise FiberError(f"C_+ C_- != Id (norm {err:.3e})")
    return Cp, Cm


def u_plus(sigma1: BoundaryInvolution, sigma2: BoundaryInvolution) -> np.ndarray:
    """U_+ = (sigma1 sigma2) restricted to (ker B)_+."""
    sigma1.check()
    sigma2.check()
    U = sigma1.sigma @ sigma2.sigma
    h = sigma1.d // 2
    return U[:h, :h]


def involution_inverse(phi: np.ndarray, sigma: BoundaryInvolution) -> np.ndarray:
    """psi = (1 + sigma) phi / 2, the unique element of Im(sigma + 1) with psi -+ iG psi = phi."""
    return (np.eye(sigma.d) + sigma.sigma) @ phi / 2


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    if d == 0:
        return np.zeros((0, 0), complex)
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_involution(h: int, rng: np.random.Generator) -> BoundaryInvolution:
    """Random admissible involution on a kernel of dimension 2h."""
    return BoundaryInvolution.from_unitary(haar_unitary(h, rng))
