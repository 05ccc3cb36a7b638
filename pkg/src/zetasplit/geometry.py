"""Circle geometry M_R: two arcs joined by two stretched necks over Y = {p, q}.

Circle coordinate x runs  arc1 (q -> p), neck at p (length 2R), arc2 (p -> q),
neck at q (length 2R).  Cutting both necks in the middle gives

    M_1 = half q-neck (R) + arc1 + half p-neck (R)
    M_2 = half p-neck (R) + arc2 + half q-neck (R)

The operator everywhere is G (d/dx + B(x)) with B(x) = [[0, W(x)^*], [W(x), 0]].
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .fiber import (
    BoundaryInvolution,
    FiberError,
    FiberStructure,
    aps_projection,
    validate_fiber,
)

COLLAR_FRACTION = 0.1
DEFAULT_R_LIST = (4, 6, 8, 12, 16, 24, 32)
DEFAULT_KAPPA = 0.75
DEFAULT_EPSILON = 0.5
BUMP_INTEGRAL = 0.44399381616807943  # integral of exp(-1/(1-s^2)) over [-1, 1]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def bump(s):
    """exp(-1/(1-s^2)) on (-1, 1), zero outside."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def smooth_step(s):
    """C-infinity step: 0 for s <= -1, 1 for s >= 1."""
    s = np.asarray(s, dtype=float)
    f = lambda x: np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    a, b = f(s + 1), f(1 - s)
    return a / (a + b)


# ---------------------------------------------------------------- parsing

def parse_complex_matrix(obj, path: str) -> np.ndarray:
    """Parse [[ [re, im], ... ], ...] (or plain real numbers) into a complex matrix."""

    def entry(e, p):
        if isinstance(e, (int, float)) and not isinstance(e, bool):
            return complex(e)
        if isinstance(e, (list, tuple)) and len(e) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in e
        ):
            return complex(e[0], e[1])
        raise ConfigError(f"{p}: expected a number or [re, im], got {e!r}")

    if isinstance(obj, list) and len(obj) == 0:
        return np.zeros((0, 0), dtype=complex)
    if not isinstance(obj, list) or not all(isinstance(r, list) for r in obj):
        raise ConfigError(f"{path}: expected a list of rows")
    rows = [[entry(e, f"{path}[{i}][{j}]") for j, e in enumerate(r)] for i, r in enumerate(obj)]
    n = len(rows[0])
    if any(len(r) != n for r in rows):
        raise ConfigError(f"{path}: rows have different lengths")
    return np.array(rows, dtype=complex)


def dump_complex_matrix(M) -> list:
    M = np.atleast_2d(np.asarray(M, dtype=complex)) if np.size(M) else np.zeros((0, 0))
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


# ---------------------------------------------------------------- profiles

@dataclass(frozen=True)
class ProfileTerm:
    kind: str  # constant | bump | samples | transition
    amplitude: np.ndarray | None = None
    samples: tuple | None = None
    support: tuple = (COLLAR_FRACTION, 1 - COLLAR_FRACTION)

    def to_json(self) -> dict:
        d = {"kind": self.kind}
        if self.amplitude is not None:
            d["amplitude"] = dump_complex_matrix(self.amplitude)
        if self.samples is not None:
            d["samples"] = [dump_complex_matrix(s) for s in self.samples]
        if tuple(self.support) != (COLLAR_FRACTION, 1 - COLLAR_FRACTION):
            d["support"] = list(self.support)
        return d


@dataclass(frozen=True)
class ArcProfile:
    """W on one arc of interior length `length`, arc-local u in [0, length]."""

    length: float
    terms: tuple
    W_left: np.ndarray
    W_right: np.ndarray

    def breakpoints(self) -> np.ndarray:
        pts = {0.0, self.length}
        for t in self.terms:
            if t.kind == "constant":
                continue
            s0, s1 = t.support
            pts.update((s0 * self.length, s1 * self.length))
            if t.kind == "samples":
                n = len(t.samples)
                for k in range(1, n + 1):
                    pts.add((s0 + (s1 - s0) * k / (n + 1)) * self.length)
        return np.array(sorted(pts))

    def __call__(self, u) -> np.ndarray:
        """W(u) as an array of shape (len(u), m, m)."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        m = self.W_left.shape[0]
        W = np.broadcast_to(self.W_left, (u.size, m, m)).astype(complex).copy()
        for t in self.terms:
            if t.kind == "constant":
                continue
            s0, s1 = (np.asarray(t.support) * self.length)
            s = 2 * (u - s0) / (s1 - s0) - 1
            if t.kind == "bump":
                W += bump(s)[:, None, None] * t.amplitude
            elif t.kind == "transition":
                W += smooth_step(s)[:, None, None] * (self.W_right - self.W_left)
            elif t.kind == "samples":
                n = len(t.samples)
                nodes = np.linspace(-1, 1, n + 2)
                vals = np.stack([np.zeros((m, m), complex), *t.samples, np.zeros((m, m), complex)])
                for a in range(m):
                    for b in range(m):
                        W[:, a, b] += np.interp(s, nodes, vals[:, a, b].real, left=0, right=0)
                        W[:, a, b] += 1j * np.interp(s, nodes, vals[:, a, b].imag, left=0, right=0)
        return W

    def is_constant(self) -> bool:
        return all(t.kind == "constant" for t in self.terms) and np.allclose(self.W_left, self.W_right)


def neck_B(W) -> np.ndarray:
    """B = [[0, W^*], [W, 0]], batched over leading axes."""
    W = np.asarray(W, dtype=complex)
    m = W.shape[-1]
    B = np.zeros(W.shape[:-2] + (2 * m, 2 * m), dtype=complex)
    B[..., :m, m:] = np.conj(np.swapaxes(W, -1, -2))
    B[..., m:, :m] = W
    return B


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class ManifoldConfig:
    m: int
    W0: np.ndarray
    W0_q: np.ndarray
    arcs: tuple  # two ArcProfile
    sigma1: BoundaryInvolution
    sigma2: BoundaryInvolution
    R_list: tuple = DEFAULT_R_LIST
    kappa: float = DEFAULT_KAPPA
    epsilon: float = DEFAULT_EPSILON
    seed: int = 0
    name: str = "config"

    @property
    def fiber(self) -> FiberStructure:
        return FiberStructure.two_point(self.W0, self.W0_q)

    @property
    def lengths(self) -> tuple:
        return tuple(a.length for a in self.arcs)

    def total_length(self, R: float) -> float:
        return sum(self.lengths) + 4 * R

    def to_json(self) -> dict:
        d = {
            "m": self.m,
            "W0": dump_complex_matrix(self.W0),
            "arcs": [
                {"length": a.length, "profile": [t.to_json() for t in a.terms]} for a in self.arcs
            ],
            "sigma1": dump_complex_matrix(self.sigma1.sigma),
            "sigma2": dump_complex_matrix(self.sigma2.sigma),
            "R_list": list(self.R_list),
            "kappa": self.kappa,
            "epsilon": self.epsilon,
            "seed": self.seed,
        }
        if not np.array_equal(self.W0_q, self.W0):
            d["W0_q"] = dump_complex_matrix(self.W0_q)
        if self.name != "config":
            d["name"] = self.name
        return d


REQUIRED_FIELDS = ("m", "W0", "arcs", "sigma1", "sigma2")


def _parse_term(obj, path, m) -> ProfileTerm:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError(f"{path}.kind: missing field")
    kind = obj["kind"]
    support = tuple(float(x) for x in obj.get("support", (COLLAR_FRACTION, 1 - COLLAR_FRACTION)))
    if len(support) != 2 or not support[0] < support[1]:
        raise ConfigError(f"{path}.support: expected [start, end] with start < end")
    if support[0] < COLLAR_FRACTION - 1e-12 or support[1] > 1 - COLLAR_FRACTION + 1e-12:
        raise ConfigError(
            f"{path}.support: collar invariant violated (profile must equal the neck value on "
            f"collars of width >= {COLLAR_FRACTION} x arc length)"
        )
    if kind == "constant":
        return ProfileTerm("constant")
    if kind == "transition":
        return ProfileTerm("transition", support=support)
    if kind == "bump":
        if "amplitude" not in obj:
            raise ConfigError(f"{path}.amplitude: missing field")
        A = parse_complex_matrix(obj["amplitude"], f"{path}.amplitude")
        if A.shape != (m, m):
            raise ConfigError(f"{path}.amplitude: expected {m}x{m}, got {A.shape}")
        return ProfileTerm("bump", amplitude=A, support=support)
    if kind == "samples":
        if "samples" not in obj or not obj["samples"]:
            raise ConfigError(f"{path}.samples: missing field")
        S = tuple(parse_complex_matrix(s, f"{path}.samples[{k}]") for k, s in enumerate(obj["samples"]))
        if any(s.shape != (m, m) for s in S):
            raise ConfigError(f"{path}.samples: every sample must be {m}x{m}")
        return ProfileTerm("samples", samples=S, support=support)
    raise ConfigError(f"{path}.kind: unknown profile kind {kind!r}")


def config_from_dict(d: dict) -> ManifoldConfig:
    if not isinstance(d, dict):
        raise ConfigError("config: expected a JSON object")
    for f in REQUIRED_FIELDS:
        if f not in d:
            raise ConfigError(f"{f}: missing field")
    m = d["m"]
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise ConfigError("m: expected a positive integer")
    W0 = parse_complex_matrix(d["W0"], "W0")
    if W0.shape != (m, m):
        raise ConfigError(f"W0: expected {m}x{m}, got {W0.shape}")
    W0_q = parse_complex_matrix(d["W0_q"], "W0_q") if "W0_q" in d else W0.copy()
    if W0_q.shape != (m, m):
        raise ConfigError(f"W0_q: expected {m}x{m}, got {W0_q.shape}")
    arcs = d["arcs"]
    if not isinstance(arcs, list) or len(arcs) != 2:
        raise ConfigError("arcs: expected a list of two arcs")
    ends = [(W0_q, W0), (W0, W0_q)]  # arc1 runs q -> p, arc2 runs p -> q
    profiles = []
    for i, a in enumerate(arcs):
        p = f"arcs[{i}]"
        if not isinstance(a, dict) or "length" not in a:
            raise ConfigError(f"{p}.length: missing field")
        length = a["length"]
        if not isinstance(length, (int, float)) or isinstance(length, bool) or length <= 0:
            raise ConfigError(f"{p}.length: expected a positive number")
        prof = a.get("profile", {"kind": "constant"})
        items = prof if isinstance(prof, list) else [prof]
        terms = tuple(_parse_term(t, f"{p}.profile[{k}]" if isinstance(prof, list) else f"{p}.profile", m)
                      for k, t in enumerate(items))
        left, right = ends[i]
        n_trans = sum(t.kind == "transition" for t in terms)
        if not np.allclose(left, right, atol=0, rtol=0) and n_trans != 1:
            raise ConfigError(f"{p}.profile: W0 differs at the two ends, exactly one 'transition' term is required")
        if np.array_equal(left, right) and n_trans:
            raise ConfigError(f"{p}.profile: 'transition' needs different neck values at the two ends")
        profiles.append(ArcProfile(float(length), terms, left, right))
    F = FiberStructure.two_point(W0, W0_q)
    rep = validate_fiber(F)
    if not rep.ok:
        raise ConfigError("fiber: " + "; ".join(rep.violations))
    h = rep.h_Y
    sig = []
    for key in ("sigma1", "sigma2"):
        s = parse_complex_matrix(d[key], key)
        if s.shape != (h, h):
            raise ConfigError(f"{key}: expected {h}x{h} (dim ker B0 = {h}), got {s.shape}")
        try:
            sig.append(BoundaryInvolution(s).check())
        except FiberError as e:
            raise ConfigError(f"{key}: {e}") from None
    R_list = d.get("R_list", list(DEFAULT_R_LIST))
    if not isinstance(R_list, list) or any(
        not isinstance(r, (int, float)) or isinstance(r, bool) or r < 0 for r in R_list
    ):
        raise ConfigError("R_list: expected a list of non-negative numbers")
    kappa = float(d.get("kappa", DEFAULT_KAPPA))
    eps = float(d.get("epsilon", DEFAULT_EPSILON))
    if not 0 < kappa < 1:
        raise ConfigError("kappa: expected a number in (0, 1)")
    if not 0 < eps < 1:
        raise ConfigError("epsilon: expected a number in (0, 1)")
    seed = d.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed: expected an integer")
    return ManifoldConfig(
        m=m, W0=W0, W0_q=W0_q, arcs=tuple(profiles), sigma1=sig[0], sigma2=sig[1],
        R_list=tuple(sorted(R_list)), kappa=kappa, epsilon=eps, seed=seed,
        name=str(d.get("name", "config")),
    )


def load_config(path) -> ManifoldConfig:
    text = Path(path).read_text()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: JSON parse error at line {e.lineno}, column {e.colno}: {e.msg}") from None
    return config_from_dict(d)


def save_config(cfg: ManifoldConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_json(), indent=2) + "\n")


# ---------------------------------------------------------------- descriptors

@dataclass(frozen=True)
class Segment:
    name: str
    length: float
    W: np.ndarray | None = None  # constant neck value
    profile: ArcProfile | None = None

    @property
    def constant(self) -> bool:
        return self.profile is None

    def W_at(self, u) -> np.ndarray:
        if self.profile is None:
            u = np.atleast_1d(u)
            return np.broadcast_to(self.W, (u.size,) + self.W.shape)
        return self.profile(u)


@dataclass(frozen=True)
class ClosedDescriptor:
    m: int
    segments: tuple
    R: float

    @property
    def total_length(self) -> float:
        return sum(s.length for s in self.segments)

    @property
    def kind(self) -> str:
        return "closed"


@dataclass(frozen=True)
class HalfDescriptor:
    """Interval problem on M_{i,R} with boundary projection P acting on the trace (psi_p, psi_q)."""

    m: int
    side: int
    segments: tuple
    R: float
    P: np.ndarray
    left_point: str  # "q" for side 1, "p" for side 2

    @property
    def total_length(self) -> float:
        return sum(s.length for s in self.segments)

    @property
    def kind(self) -> str:
        return f"side{self.side}"


def _neck(name, W, length):
    return Segment(name, float(length), W=np.asarray(W, dtype=complex))


def _arc(name, prof: ArcProfile):
    if prof.is_constant():
        return Segment(name, prof.length, W=prof.W_left)
    return Segment(name, prof.length, profile=prof)


def build_closed_operator(cfg: ManifoldConfig, R: float) -> ClosedDescriptor:
    if R < 0:
        raise ConfigError("R must be non-negative")
    a1, a2 = cfg.arcs
    segs = (_arc("arc1", a1), _neck("neck_p", cfg.W0, 2 * R), _arc("arc2", a2), _neck("neck_q", cfg.W0_q, 2 * R))
    return ClosedDescriptor(cfg.m, tuple(s for s in segs), float(R))


def build_half_operators(cfg: ManifoldConfig, R: float) -> tuple[HalfDescriptor, HalfDescriptor]:
    F = cfg.fiber
    P1 = aps_projection(F, cfg.sigma1, 1).P
    P2 = aps_projection(F, cfg.sigma2, 2).P
    a1, a2 = cfg.arcs
    s1 = (_neck("neck_q", cfg.W0_q, R), _arc("arc1", a1), _neck("neck_p", cfg.W0, R))
    s2 = (_neck("neck_p", cfg.W0, R), _arc("arc2", a2), _neck("neck_q", cfg.W0_q, R))
    return (
        HalfDescriptor(cfg.m, 1, s1, float(R), P1, "q"),
        HalfDescriptor(cfg.m, 2, s2, float(R), P2, "p"),
    )


def junction_jumps(desc) -> list[float]:
    """|W(end of segment k) - W(start of segment k+1)| around the descriptor."""
    segs = desc.segments
    closed = isinstance(desc, ClosedDescriptor)
    n = len(segs) if closed else len(segs) - 1
    out = []
    for k in range(n):
        a, b = segs[k], segs[(k + 1) % len(segs)]
        out.append(float(np.abs(a.W_at(a.length)[0] - b.W_at(0.0)[0]).max()))
    return out


def validate_config(cfg: ManifoldConfig) -> list[str]:
    """Fiber, involution and collar checks; returns a list of problems (empty when valid)."""
    problems = []
    rep = validate_fiber(cfg.fiber)
    problems += rep.violations
    for k, s in enumerate((cfg.sigma1, cfg.sigma2), 1):
        for name, err in s.residuals().items():
            if err > 1e-10:
                problems.append(f"sigma{k}: {name} violated (norm {err:.3e})")
    for i, a in enumerate(cfg.arcs):
        c = COLLAR_FRACTION * a.length
        u = np.r_[np.linspace(0, c, 5), np.linspace(a.length - c, a.length, 5)]
        W = a(u)
        ref = np.r_[[a.W_left] * 5, [a.W_right] * 5]
        err = float(np.abs(W - ref).max())
        if err > 1e-12:
            problems.append(f"arcs[{i}]: collar invariant violated (deviation {err:.3e})")
    jumps = junction_jumps(build_closed_operator(cfg, 1.0))
    if max(jumps) > 1e-12:
        problems.append(f"profile discontinuous at a junction (jump {max(jumps):.3e})")
    return problems


def with_arc_terms(cfg: ManifoldConfig, arc: int, terms) -> ManifoldConfig:
    """Copy of cfg with the terms of arc `arc` (0 or 1) replaced."""
    arcs = list(cfg.arcs)
    arcs[arc] = replace(arcs[arc], terms=tuple(terms))
    return replace(cfg, arcs=tuple(arcs))


# ---------------------------------------------------------------- kernel counts


@dataclass(frozen=True)
class CountData:
    h_Y: int
    h_M: int
    h1: int
    h2: int
    l2_1: int  # dim ker_{L^2} D_{1,infinity}
    l2_2: int
    l12: int  # dim(L_1 cap L_2)
    angles: tuple  # principal angles between L_1 and L_2

    @property
    def h(self) -> int:
        return self.h_M - self.h1 - self.h2


def compute_counts(cfg: ManifoldConfig, C1=None, C2=None) -> CountData:
    """h_M, h_1, h_2 from L^2 kernels of the infinite sides and the limiting spaces.

    h_M = dim ker_{L^2} D_{1,oo} + dim ker_{L^2} D_{2,oo} + dim(L_1 cap L_2)
    h_i = dim ker_{L^2} D_{i,oo} + dim(L_i cap ker(sigma_i - 1))
    C1, C2 are the scattering matrices at lambda = 0 (computed when omitted).
    """
    from .fiber import orthonormal_columns
    from .ode import l2_kernel_dim_infinite
    from .scattering import intersection_dim, limiting_space, principal_angles, scattering_matrix

    F = cfg.fiber
    l2 = [l2_kernel_dim_infinite(cfg, s)[0] for s in (1, 2)]
    if F.h_Y == 0:
        return CountData(0, l2[0] + l2[1], l2[0], l2[1], l2[0], l2[1], 0, ())
    C1 = scattering_matrix(cfg, 1, 0.0) if C1 is None else C1
    C2 = scattering_matrix(cfg, 2, 0.0) if C2 is None else C2
    L1, L2 = limiting_space(C1), limiting_space(C2)
    if L1.shape[1] != F.h_Y // 2 or L2.shape[1] != F.h_Y // 2:
        raise ValueError(f"limiting spaces have dimensions {L1.shape[1]}, {L2.shape[1]}; expected {F.h_Y // 2}")
    l12 = intersection_dim(L1, L2)
    hs = []
    for L, s, k in ((L1, cfg.sigma1, l2[0]), (L2, cfg.sigma2, l2[1])):
        E = orthonormal_columns((np.eye(F.h_Y) + s.sigma) / 2)
        hs.append(k + intersection_dim(L, E))
    return CountData(F.h_Y, l2[0] + l2[1] + l12, hs[0], hs[1], l2[0], l2[1], l12,
                     tuple(float(a) for a in principal_angles(L1, L2)))


@dataclass
class EvalueReport:
    ok: bool
    R: float
    threshold: float
    expected: int  # h_M
    found: np.ndarray  # eigenvalues with |lam| <= threshold
    margin: float  # smallest |lam| above threshold divided by threshold
    message: str = ""


def validate_evalue_assumption(cfg: ManifoldConfig, spectrum, R: float, h_M: int) -> EvalueReport:
    """Exactly h_M eigenvalues of D_R below the e-threshold, nothing else near zero."""
    thr = min(math.exp(-cfg.fiber.mu1 * R / 2), R ** -2.0)
    v = np.asarray(spectrum.all() if hasattr(spectrum, "all") else spectrum, dtype=float)
    small = v[np.abs(v) <= thr]
    rest = np.abs(v[np.abs(v) > thr])
    margin = float(rest.min() / thr) if rest.size else math.inf
    ok = small.size == h_M
    msg = "" if ok else f"{small.size} eigenvalues below {thr:.3e}, expected {h_M}"
    return EvalueReport(ok, float(R), thr, h_M, small, margin, msg)
