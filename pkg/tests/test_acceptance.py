"""Acceptance criteria 1-10.  Each test prints one PASS/FAIL line with its runtime."""

import sys
import time

import pytest

from zetasplit import verify as V

LIMITS = {1: 1.0, 2: 5.0, 3: 30.0, 4: 60.0, 5: 180.0, 6: 180.0, 7: 600.0, 8: 30.0, 9: 10.0, 10: 1.0}
TITLES = {
    1: "circle determinant oracle",
    2: "sindet audit",
    3: "scattering invariants",
    4: "Maass-Selberg",
    5: "s-value matching",
    6: "model-operator matching",
    7: "main formula",
    8: "limiting spaces and e-value count",
    9: "eta splitting",
    10: "relative zeta oracles",
}


def _run(n, fn, capsys=None):
    t0 = time.perf_counter()
    checks = fn()
    dt = time.perf_counter() - t0
    ok = all(c.ok for c in checks) and dt <= LIMITS[n]
    lines = [f"{'PASS' if ok else 'FAIL'} criterion {n} ({TITLES[n]}): {len(checks)} checks, "
             f"{dt:.1f} s (limit {LIMITS[n]:g} s)"]
    lines += [f"    {'ok ' if c.ok else 'BAD'} {c.name}: {c.value:.3g} vs {c.tol:g} {c.detail}".rstrip()
              for c in checks]
    text = "\n".join(lines)
    if capsys is not None:
        with capsys.disabled():
            print("\n" + text)
    else:
        print(text)
    return ok, checks, dt


def _assert(n, ok, checks, dt):
    bad = [c.name for c in checks if not c.ok]
    assert not bad, f"criterion {n} failed: {bad}"
    assert dt <= LIMITS[n], f"criterion {n} took {dt:.1f} s > {LIMITS[n]} s"


CRITERIA = {
    1: lambda: V.circle_oracle(seed=0, n=100),
    2: lambda: V.sindet_audits(seed=0, n=20)[0],
    3: lambda: V.scattering_invariants(n=20),
    4: lambda: V.maass_selberg(R_list=(6.0, 8.0, 10.0, 12.0, 14.0, 16.0), lam=0.05),
    5: lambda: V.svalue_matching(R_list=(6.0, 8.0, 12.0, 16.0)),
    6: lambda: V.model_matching(),
    7: lambda: V.main_theorem()[0],
    8: lambda: V.limiting_counts(),
    9: lambda: V.eta_tuples(seed=0, n=200),
    10: lambda: V.zeta_oracles(),
}


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, capsys):
    _assert(n, *_run(n, CRITERIA[n], capsys))


if __name__ == "__main__":
    results = [_run(n, CRITERIA[n])[0] for n in sorted(CRITERIA)]
    sys.exit(0 if all(results) else 1)
