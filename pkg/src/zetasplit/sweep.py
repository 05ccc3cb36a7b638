"""R-sweeps of the adiabatic determinant ratio against the limit formula."""

from __future__ import annotations

import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .circle import limit_rhs
from .geometry import (
    CountData,
    ManifoldConfig,
    build_closed_operator,
    build_half_operators,
    compute_counts,
    validate_evalue_assumption,
)
from .ode import enumerate_eigenvalues
from .scattering import (
    compose_c12,
    family,
    match_svalues,
    omega_set,
    s_sigma,
    scattering_matrix,
)
from .zeta_eta import det_ratio, evalue_threshold, zeta_b2_zero

CSV_VERSION = 1
COLUMNS = ("R", "det_ratio", "scaled", "rhs", "rel_error", "n_svalues", "max_sval_gap",
           "fitted_rate", "evalue_ok", "wall_ms")


@dataclass
class SweepRow:
    R: float
    det_ratio: float
    scaled: float
    rhs: float
    rel_error: float
    n_svalues: int
    max_sval_gap: float
    fitted_rate: float
    evalue_ok: bool
    wall_ms: int
    error: str = ""

    def values(self) -> tuple:
        return tuple(getattr(self, c) for c in COLUMNS)


@dataclass
class LimitData:
    """R-independent inputs: counts, C12(0), S1(0), S2(0) and the formula value."""

    counts: CountData
    zeta_b2: int
    C12: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    rhs: float
    rhs_intersection: float  # exponent with dim(L1 cap L2) in place of h_M
    families: dict = field(default_factory=dict)


def limit_data(cfg: ManifoldConfig, with_families: bool = True) -> LimitData:
    F = cfg.fiber
    zb = zeta_b2_zero(F)
    if F.h_Y:
        C1 = scattering_matrix(cfg, 1, 0.0)
        C2 = scattering_matrix(cfg, 2, 0.0)
        counts = compute_counts(cfg, C1, C2)
        mats = (compose_c12(C1, C2), s_sigma(C1, cfg.sigma1, 1), s_sigma(C2, cfg.sigma2, 2))
        fams = {k: family(cfg, k) for k in ("C12", "S1", "S2")} if with_families else {}
    else:
        counts = compute_counts(cfg)
        mats = (np.zeros((0, 0), complex),) * 3
        fams = {}
    rhs = limit_rhs(*mats, counts.h_Y, counts.h_M, zb)
    rhs_l = limit_rhs(*mats, counts.h_Y, counts.l12, zb)
    return LimitData(counts, zb, *mats, rhs, rhs_l, fams)


def sweep_row(cfg: ManifoldConfig, R: float, lim: LimitData, timing: bool = True) -> SweepRow:
    t0 = time.perf_counter()
    kappa = cfg.kappa
    win = R ** (-kappa)
    thr = evalue_threshold(cfg.fiber.mu1, R)
    descs = (build_closed_operator(cfg, R),) + build_half_operators(cfg, R)
    spectra = [enumerate_eigenvalues(d, max(0.2, 1.05 * win), weyl_check=False) for d in descs]
    n_s, gap = 0, 0.0
    if lim.families:
        for kind, sp in zip(("C12", "S1", "S2"), spectra):
            om = omega_set(lim.families[kind], R, kappa, exclude=thr)
            mr = match_svalues(sp.all(), om, thr)
            n_s += mr.n_spectrum
            # a count mismatch means R is still below the adiabatic regime
            gap = max(gap, mr.max_gap) if mr.ok else math.nan
    ev = validate_evalue_assumption(cfg, spectra[0], R, lim.counts.h_M)
    ev_sides = [validate_evalue_assumption(cfg, s, R, h) for s, h in zip(spectra[1:], (lim.counts.h1, lim.counts.h2))]
    dr = det_ratio(cfg, R, spectra=spectra)
    scaled = dr.ratio * R ** (-2 * lim.counts.h)
    wall = int(round(1000 * (time.perf_counter() - t0))) if timing else 0
    return SweepRow(float(R), dr.ratio, scaled, lim.rhs, abs(scaled - lim.rhs) / lim.rhs, n_s, gap,
                    math.nan, bool(ev.ok and all(e.ok for e in ev_sides)), wall)


def _failed(R: float, err: Exception, rhs: float) -> SweepRow:
    nan = math.nan
    return SweepRow(float(R), nan, nan, rhs, nan, 0, nan, nan, False, 0, f"{type(err).__name__}: {err}")


def fit_rate(R, y, floor: float = 1e-14) -> float:
    """Exponential decay rate of y(R) from a log-linear fit (nan if not enough data)."""
    R, y = np.asarray(R, float), np.asarray(y, float)
    keep = np.isfinite(y) & (y > floor)
    if keep.sum() < 2:
        return math.nan
    return float(-np.polyfit(R[keep], np.log(y[keep]), 1)[0])


def richardson(R, s, p: float = 1.0) -> float:
    """Limit of s(R) = s_inf + c R^-p from the last two points."""
    if len(R) < 2:
        return float(s[-1]) if len(s) else math.nan
    (R1, R2), (s1, s2) = R[-2:], s[-2:]
    return float((R2**p * s2 - R1**p * s1) / (R2**p - R1**p))


def power_fit(R, err) -> float:
    """Exponent p of err ~ R^-p (nan when not enough positive data)."""
    R, err = np.asarray(R, float), np.asarray(err, float)
    keep = np.isfinite(err) & (err > 1e-14)
    if keep.sum() < 2:
        return math.nan
    return float(-np.polyfit(np.log(R[keep]), np.log(err[keep]), 1)[0])


@dataclass
class SweepResult:
    config: str
    rows: list
    lim: LimitData
    summary: dict


def run_sweep(cfg: ManifoldConfig, R_list=None, threads: int = 1, timing: bool = True) -> SweepResult:
    R_list = sorted(float(r) for r in (cfg.R_list if R_list is None else R_list))
    lim = limit_data(cfg)

    def one(R):
        try:
            return sweep_row(cfg, R, lim, timing)
        except Exception as err:  # isolate per-R failures
            return _failed(R, err, lim.rhs)

    if threads > 1 and len(R_list) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(one, R_list))
    else:
        rows = [one(R) for R in R_list]
    good = [r for r in rows if not r.error]
    rate = fit_rate([r.R for r in good], [r.max_sval_gap for r in good])
    for r in rows:
        r.fitted_rate = rate
    Rs = [r.R for r in good]
    sc = [r.scaled for r in good]
    lim_val = richardson(Rs, sc)
    summary = {
        "h_Y": lim.counts.h_Y, "h_M": lim.counts.h_M, "h1": lim.counts.h1, "h2": lim.counts.h2,
        "h": lim.counts.h, "dim_L1_cap_L2": lim.counts.l12, "zeta_B2_0": lim.zeta_b2,
        "rhs": lim.rhs, "rhs_intersection": lim.rhs_intersection,
        "richardson_limit": lim_val,
        "richardson_rel_error": abs(lim_val - lim.rhs) / lim.rhs if good else math.nan,
        "power_fit": power_fit(Rs, [r.rel_error for r in good]),
        "failed_rows": [r.R for r in rows if r.error],
    }
    return SweepResult(cfg.name, rows, lim, summary)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def to_csv(res: SweepResult) -> str:
    out = io.StringIO()
    out.write(f"# zetasplit sweep csv v{CSV_VERSION} package {__version__} config {res.config}\n")
    out.write(",".join(COLUMNS) + "\n")
    for r in res.rows:
        out.write(",".join(_fmt(v) for v in r.values()) + "\n")
    for r in res.rows:
        if r.error:
            out.write(f"# failed R={_fmt(r.R)}: {r.error}\n")
    summary = {k: _json_safe(v) for k, v in res.summary.items()}
    out.write("# summary " + json.dumps(summary, sort_keys=True) + "\n")
    return out.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def to_json(res: SweepResult) -> str:
    rows = [{c: _json_safe(v) for c, v in zip(COLUMNS, r.values())} | ({"error": r.error} if r.error else {})
            for r in res.rows]
    doc = {
        "format": f"zetasplit sweep json v{CSV_VERSION}",
        "package": __version__,
        "config": res.config,
        "columns": list(COLUMNS),
        "rows": rows,
        "summary": {k: _json_safe(v) for k, v in res.summary.items()},
    }
    return json.dumps(doc, indent=1, sort_keys=False) + "\n"
