"""Verification suites: property checks with explicit tolerances and a JSON report."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np
from scipy.interpolate import CubicSpline

from . import __version__
from .circle import CircleOperator, model_spectrum, sindet_audit, zeta_det_circle, zeta_det_circle_hurwitz
from .fiber import FiberStructure, grading, haar_unitary, random_involution, validate_fiber
from .geometry import (
    ManifoldConfig,
    build_closed_operator,
    build_half_operators,
    compute_counts,
    load_config,
    validate_config,
)
from .ode import enumerate_eigenvalues, small_eigenvalue_count
from .scattering import (
    compose_c12,
    default_grid,
    family,
    intersection_dim,
    limiting_space,
    maass_selberg_check,
    match_model,
    match_svalues,
    omega_set,
    s_sigma,
    scattering_matrix,
)
from .sweep import fit_rate, run_sweep
from .zeta_eta import build_trace, eta_decomposition_check, evalue_threshold, random_tuple, relative_zeta_prime0

CONFIG_NAMES = ("invertible", "generic", "mirror", "free_channel", "domain_wall")
SUITES = ("fiber", "circle", "scattering", "svalues", "maass-selberg", "eta", "main")
GAP_FLOOR = 1e-13  # s-value gaps below this are at round-off level


def bundled_config(name: str) -> ManifoldConfig:
    with resources.as_file(resources.files("zetasplit") / "data" / f"{name}.json") as p:
        return load_config(p)


def bundled_configs(names=CONFIG_NAMES) -> list[ManifoldConfig]:
    return [bundled_config(n) for n in names]


@dataclass
class Check:
    name: str
    ok: bool
    value: float
    tol: float
    detail: str = ""


@dataclass
class SuiteReport:
    suite: str
    seed: int
    checks: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def to_dict(self) -> dict:
        def clean(v):
            return None if isinstance(v, float) and not math.isfinite(v) else v

        return {
            "suite": self.suite, "seed": self.seed, "package": __version__, "ok": self.ok,
            "seconds": round(self.seconds, 3),
            "checks": [{k: clean(v) for k, v in asdict(c).items()} for c in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def _le(name, value, tol, detail=""):
    value = float(value)
    return Check(name, bool(np.isfinite(value) and value <= tol), value, tol, detail)


# ---------------------------------------------------------------- shared spectra

_SPECTRA: dict = {}
_FAMILIES: dict = {}


def _families(cfg: ManifoldConfig) -> dict:
    if cfg.name not in _FAMILIES:
        _FAMILIES[cfg.name] = {k: family(cfg, k) for k in ("C12", "S1", "S2")}
    return _FAMILIES[cfg.name]


def _spectra(cfg: ManifoldConfig, R: float):
    """Enumerated spectra of the closed and both side operators on the s-value window."""
    key = (cfg.name, float(R))
    if key not in _SPECTRA:
        win = R ** (-cfg.kappa)
        descs = (build_closed_operator(cfg, R),) + build_half_operators(cfg, R)
        _SPECTRA[key] = [enumerate_eigenvalues(d, max(0.2, 1.05 * win), weyl_check=False).all() for d in descs]
    return _SPECTRA[key]


# ---------------------------------------------------------------- fiber

def fiber_checks(seed: int = 0, n: int = 50) -> list[Check]:
    out = []
    for cfg in bundled_configs():
        probs = validate_config(cfg)
        out.append(Check(f"config {cfg.name} valid", not probs, float(len(probs)), 0, "; ".join(probs)))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        s = random_involution(int(rng.integers(1, 4)), rng)
        worst = max(worst, max(s.residuals().values()))
    out.append(_le("random involutions satisfy sigma^2 = 1, sigma^* = sigma, G sigma = -sigma G", worst, 1e-12))
    # a fiber with B0 commuting with G must be rejected
    G = np.diag([1j, -1j])
    bad = FiberStructure(m=1, G=(G, -G), B0=(np.eye(2), -np.eye(2)), points=("p", "q"))
    rep = validate_fiber(bad)
    named = any("G B0 = -B0 G" in v for v in rep.violations)
    out.append(Check("broken anticommutation reported", (not rep.ok) and named, float(len(rep.violations)), 0,
                     "; ".join(rep.violations)))
    return out


# ---------------------------------------------------------------- circle models

def circle_oracle(seed: int = 0, n: int = 100) -> list[Check]:
    """Closed-form vs Hurwitz determinant of D(C)^2 for random unitaries."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        op = CircleOperator(haar_unitary(int(rng.integers(1, 7)), rng))
        a = zeta_det_circle_hurwitz(op)
        b = zeta_det_circle(op)[0]
        worst = max(worst, abs(a - b) / abs(b))
    return [_le(f"Hurwitz vs closed form, {n} unitaries (d <= 6), relative", worst, 1e-10)]


def _graded_c12(d: int, k0: int, rng) -> np.ndarray:
    """Random unitary on a d-dimensional space with eigenvalue 1 of multiplicity exactly k0."""
    U = haar_unitary(d, rng)
    ph = rng.uniform(0.3, 2 * math.pi - 0.3, d)
    ph[:k0] = 0.0
    return U @ np.diag(np.exp(1j * ph)) @ U.conj().T


def sindet_audits(seed: int = 0, n: int = 20, configs=None) -> tuple[list[Check], list]:
    """det_zeta (D(C12)/2)^2 against 2^{h_Y + 2 h_M} det*(..); a constant exponent offset is reported.

    Admissible C12 come from the bundled configs (true h_M, including L2 kernels)
    and from random unitaries with prescribed +1 multiplicity (h_M = that multiplicity).
    """
    rng = np.random.default_rng(seed)
    cases = []
    for cfg in configs if configs is not None else bundled_configs():
        if cfg.fiber.h_Y:
            C1, C2 = scattering_matrix(cfg, 1, 0.0), scattering_matrix(cfg, 2, 0.0)
            cd, C12 = compute_counts(cfg, C1, C2), compose_c12(C1, C2)
        else:
            cd, C12 = compute_counts(cfg), np.zeros((0, 0), complex)
        cases.append((cfg.name, C12, cd.h_Y, cd.h_M))
    while len(cases) < n:
        d = int(rng.integers(1, 5))
        k0 = int(rng.integers(0, d + 1))
        cases.append((f"random d={d} k0={k0}", _graded_c12(d, k0, rng), 2 * d, k0))
    audits = [(name, sindet_audit(C, hY, hM)) for name, C, hY, hM in cases[:n]]
    worst = 0.0
    offsets = set()
    for name, a in audits:
        # predicted offset: the closed form carries 2 k0 with k0 = dim ker(C12 - 1)
        worst = max(worst, abs(a.exponent_discrepancy - 2 * (a.k0 - a.h_M)))
        offsets.add(round(a.exponent_discrepancy, 9))
    detail = "exponent offsets log2(hurwitz/formula) = " + ", ".join(f"{o:g}" for o in sorted(offsets))
    return [_le("sindet exponent offset equals 2(dim ker(C12 - 1) - h_M)", worst, 1e-9, detail)], audits


# ---------------------------------------------------------------- scattering

def scattering_invariants(configs=None, n: int = 20) -> list[Check]:
    out = []
    configs = [c for c in (configs if configs is not None else bundled_configs()) if c.fiber.h_Y]
    for cfg in configs:
        h = cfg.fiber.h_Y
        Gk = grading(h)
        I = np.eye(h)
        lam = default_grid(cfg, n=n + 1)
        lam = lam[np.abs(lam) > 0]
        worst = {"C C^* - 1": 0.0, "C(l) C(-l) - 1": 0.0, "G C + C G": 0.0, "C(0)^2 - 1": 0.0}
        for side in (1, 2):
            for x in lam:
                C, Cm = scattering_matrix(cfg, side, x), scattering_matrix(cfg, side, -x)
                worst["C C^* - 1"] = max(worst["C C^* - 1"], np.linalg.norm(C @ C.conj().T - I))
                worst["C(l) C(-l) - 1"] = max(worst["C(l) C(-l) - 1"], np.linalg.norm(C @ Cm - I))
                worst["G C + C G"] = max(worst["G C + C G"], np.linalg.norm(Gk @ C + C @ Gk))
            C0 = scattering_matrix(cfg, side, 0.0)
            worst["C(0)^2 - 1"] = max(worst["C(0)^2 - 1"], np.linalg.norm(C0 @ C0 - I))
        out.append(_le(f"{cfg.name}: scattering invariants on {lam.size} lambda points",
                       max(worst.values()), 1e-8, ", ".join(f"{k} {v:.1e}" for k, v in worst.items())))
    return out


def limiting_counts(configs=None, R_list=(12.0, 16.0)) -> list[Check]:
    """+1 multiplicity of C12(0) vs dim(L1 cap L2), and e-value count of D_R vs h_M."""
    out = []
    for cfg in configs if configs is not None else bundled_configs():
        if cfg.fiber.h_Y:
            C1, C2 = scattering_matrix(cfg, 1, 0.0), scattering_matrix(cfg, 2, 0.0)
            mult = int(np.sum(np.abs(np.linalg.eigvals(compose_c12(C1, C2)) - 1) < 1e-6))
            l12 = intersection_dim(limiting_space(C1), limiting_space(C2))
            cd = compute_counts(cfg, C1, C2)
        else:
            mult = l12 = 0
            cd = compute_counts(cfg)
        out.append(Check(f"{cfg.name}: mult(+1, C12(0)) = dim(L1 cap L2)", mult == l12, float(mult), float(l12)))
        for R in R_list:
            desc = build_closed_operator(cfg, R)
            n, sv = small_eigenvalue_count(desc, evalue_threshold(cfg.fiber.mu1, R))
            out.append(Check(f"{cfg.name}: e-values of D_R at R={R:g} = h_M", n == cd.h_M, float(n), float(cd.h_M),
                             f"smallest singular values {np.array2string(sv[:4], precision=2)}"))
    return out


# ---------------------------------------------------------------- s-values and model operators

def _decreasing(g) -> bool:
    g = np.asarray(g, float)
    return bool(np.all((g[1:] <= g[:-1]) | (g[1:] <= GAP_FLOOR)))


def svalue_matching(configs=None, R_list=(6.0, 8.0, 12.0, 16.0)) -> list[Check]:
    out = []
    configs = [c for c in (configs if configs is not None else bundled_configs()) if c.fiber.h_Y]
    for cfg in configs:
        fams = _families(cfg)
        gaps, counts, bad = [], [], []
        for R in R_list:
            thr = evalue_threshold(cfg.fiber.mu1, R)
            g, c = 0.0, 0
            for kind, sp in zip(("C12", "S1", "S2"), _spectra(cfg, R)):
                mr = match_svalues(sp, omega_set(fams[kind], R, cfg.kappa, exclude=thr), thr)
                if not mr.ok:
                    bad.append(f"R={R:g} {kind}: p={mr.n_spectrum} m={mr.n_predicted}")
                    g = math.inf
                else:
                    g = max(g, mr.max_gap)
                c += mr.n_spectrum
            gaps.append(g)
            counts.append(c)
        out.append(Check(f"{cfg.name}: p(R) = m(R) for R in {list(R_list)}", not bad, float(len(bad)), 0,
                         "; ".join(bad) or f"s-value counts {counts}"))
        rate = fit_rate(R_list, gaps, floor=GAP_FLOOR)
        vacuous = max(counts) == 0 or max(gaps) <= GAP_FLOOR
        ok = not bad and _decreasing(gaps) and (vacuous or rate > 0)
        detail = "gaps " + ", ".join(f"{x:.1e}" for x in gaps)
        if vacuous:
            detail += " (no gaps above round-off)" if max(counts) else " (no s-values in the window)"
        out.append(Check(f"{cfg.name}: max s-value gap decreasing, exponential rate > 0", ok,
                         rate if np.isfinite(rate) else 0.0, 0.0, detail))
    return out


def _trend(R_list, v) -> float:
    """Log-log slope of v(R) over the positive entries (0 when fewer than two)."""
    R, v = np.asarray(R_list, float), np.asarray(v, float)
    keep = np.isfinite(v) & (v > 0)
    if keep.sum() < 2:
        return 0.0
    return float(np.polyfit(np.log(R[keep]), np.log(v[keep]), 1)[0])


def phase_slope_bound(fam, window: float, n: int = 2001) -> float:
    """sup |alpha_j'(rho)| / 2 over |rho| <= window: the constant in |scale R lam_k - lam_k| <= C R^-kappa."""
    xs = np.linspace(-window, window, n)
    best = 0.0
    for j in range(fam.d):
        d = CubicSpline(fam.lam, fam.phases[:, j]).derivative()(xs)
        best = max(best, float(np.abs(d).max()))
    return best / 2


def model_matching(configs=None, R_list=(8.0, 12.0, 16.0, 24.0, 32.0), slack: float = 1.1) -> list[Check]:
    """max_k |scale R lam_k(R) - lam_k| R^kappa stays below sup|alpha'|/2 (scale 2 closed, 1 sides).

    The maximum is a sawtooth in R (it jumps when a new level enters the window),
    so boundedness is tested against the constant from the secular equation; the
    log-log slope is reported for information.
    """
    out = []
    configs = [c for c in (configs if configs is not None else bundled_configs()) if c.fiber.h_Y]
    for cfg in configs:
        fams = _families(cfg)
        C1, C2 = scattering_matrix(cfg, 1, 0.0), scattering_matrix(cfg, 2, 0.0)
        models = {"closed": (compose_c12(C1, C2), 2.0, "C12"), "side 1": (s_sigma(C1, cfg.sigma1, 1), 1.0, "S1"),
                  "side 2": (s_sigma(C2, cfg.sigma2, 2), 1.0, "S2")}
        for idx, (label, (C0, scale, kind)) in enumerate(models.items()):
            bound = slack * phase_slope_bound(fams[kind], min(R_list) ** (-cfg.kappa))
            vals, bad = [], []
            for R in R_list:
                thr = evalue_threshold(cfg.fiber.mu1, R)
                mv = model_spectrum(CircleOperator(C0), 1.3 * scale * R ** (1 - cfg.kappa)).eigenvalues
                ok, v, _ = match_model(_spectra(cfg, R)[idx], mv, R, cfg.kappa, scale, thr)
                if not ok:
                    bad.append(R)
                vals.append(v)
            worst = max(vals)
            detail = ("values " + ", ".join(f"{x:.2e}" for x in vals) + f"; log-log slope {_trend(R_list, vals):.2f}"
                      + (f"; unmatched at R={bad}" if bad else ""))
            out.append(Check(f"{cfg.name} {label}: model gap * R^kappa bounded", not bad and worst <= bound,
                             worst, bound, detail))
    return out


# ---------------------------------------------------------------- Maass-Selberg

def maass_selberg(cfg: ManifoldConfig | None = None, R_list=(6.0, 8.0, 10.0, 12.0, 14.0, 16.0),
                  lam: float = 0.05, side: int = 1) -> list[Check]:
    cfg = cfg or bundled_config("free_channel")
    h = cfg.fiber.h_Y
    phi = np.ones(h, complex) / math.sqrt(h)  # equal weight on both kernel halves
    diffs = [maass_selberg_check(cfg, side, phi, phi, lam, R).diff for R in R_list]
    rate = fit_rate(R_list, diffs, floor=0.0)
    detail = "diffs " + ", ".join(f"{d:.1e}" for d in diffs)
    return [
        Check(f"{cfg.name}: |lhs - rhs| decays exponentially", bool(rate > 0), rate, 0.0, detail),
        _le(f"{cfg.name}: |lhs - rhs| at R={R_list[-1]:g}", diffs[-1], 1e-3),
    ]


# ---------------------------------------------------------------- eta

def eta_tuples(seed: int = 0, n: int = 200) -> list[Check]:
    rng = np.random.default_rng(seed)
    det_err = dev = 0.0
    for i in range(n):
        C1, C2, s1, s2 = random_tuple(1 + i % 3, rng)
        r = eta_decomposition_check(C1, C2, s1, s2)
        det_err, dev = max(det_err, r.det_identity_error), max(dev, r.deviation)
    return [
        _le(f"determinant identity det C12 / (det S1 det S2), {n} tuples", det_err, 1e-10),
        _le(f"eta(C12) - eta(S1) - eta(S2) vs cylinder eta mod 1, {n} tuples", dev, 1e-8),
    ]


# ---------------------------------------------------------------- relative zeta and main formula

def zeta_oracles(lam2=(0.01, 0.3, 1.0, 4.0, 25.0, 100.0)) -> list[Check]:
    """Synthetic traces e^{-a t}; the fit nodes start at 1e-5 / a so a t stays small on them."""
    out = []
    for a in lam2:
        res = relative_zeta_prime0(build_trace(lambda t, a=a: math.exp(-a * t), 1e-5 / a, a))
        err = max(abs(res.zeta0 - 1), abs(res.zeta_prime0 + math.log(a)))
        out.append(_le(f"e^(-{a:g} t): (zeta(0), zeta'(0)) = (1, -log {a:g})", err, 1e-8))
    return out


def main_theorem(R_list=(4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0), threads: int = 1) -> tuple[list[Check], dict]:
    out, sweeps = [], {}
    for name in ("invertible", "generic", "mirror"):
        res = run_sweep(bundled_config(name), R_list, threads=threads)
        sweeps[name] = res
    inv, gen, mir = sweeps["invertible"], sweeps["generic"], sweeps["mirror"]

    def last(res):
        return res.rows[-1] if res.rows and not res.rows[-1].error else None

    r = last(inv)
    zb = inv.lim.zeta_b2
    out.append(Check("invertible: rhs = 2^-zeta_B2(0)", abs(inv.lim.rhs - 2.0 ** (-zb)) < 1e-14, inv.lim.rhs,
                     2.0 ** (-zb)))
    out.append(_le(f"invertible: rel_error at R={R_list[-1]:g}", r.rel_error if r else math.inf, 0.05))
    out.append(_le("invertible: Richardson rel_error", inv.summary["richardson_rel_error"], 0.01))
    r = last(gen)
    cd = gen.lim.counts
    out.append(Check("generic: h_Y = 2, h_M = 0", cd.h_Y == 2 and cd.h_M == 0, float(cd.h_M), 0.0))
    out.append(_le(f"generic: rel_error at R={R_list[-1]:g}", r.rel_error if r else math.inf, 0.05))
    r = last(mir)
    cd = mir.lim.counts
    out.append(Check("mirror: dim(L1 cap L2) = 1 and h != 0", cd.l12 == 1 and cd.h != 0, float(cd.h), 0.0,
                     f"h_M={cd.h_M} h1={cd.h1} h2={cd.h2}"))
    out.append(_le(f"mirror: rel_error at R={R_list[-1]:g}", r.rel_error if r else math.inf, 0.10,
                   f"Richardson limit {mir.summary['richardson_limit']:.6g}"))
    return out, sweeps


# ---------------------------------------------------------------- suites

def run_suite(name: str, seed: int = 0) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    t0 = time.perf_counter()
    if name == "fiber":
        checks = fiber_checks(seed)
    elif name == "circle":
        checks = circle_oracle(seed) + sindet_audits(seed)[0]
    elif name == "scattering":
        checks = scattering_invariants() + limiting_counts()
    elif name == "svalues":
        checks = svalue_matching() + model_matching()
    elif name == "maass-selberg":
        checks = maass_selberg()
    elif name == "eta":
        checks = eta_tuples(seed)
    else:
        checks = zeta_oracles() + main_theorem()[0]
    return SuiteReport(name, seed, checks, time.perf_counter() - t0)
