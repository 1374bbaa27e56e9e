"""Acceptance criteria, one test each, at the stated scale.

Each test logs a single PASS/FAIL line (shown in the pytest terminal summary,
or printed directly when this file is run as a script) and then asserts.
"""
import json
import sys
import time

import numpy as np
import pytest

from conewalk import estimators as est
from conewalk.kernel import PdeMesh

SEED = 20240607


def _line(n, title, ok, detail):
    return f"[{n:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"


def _timed(fn, *args, **kw):
    t = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t


def criterion_1():
    r, dt = _timed(est.check_lorentz_invariance, M=100, N=1024, gamma=np.log(2.0), sigma=1.0, T=1.0, seed=SEED)
    ok = r.passed and dt < 30
    return ok, f"max deviation {r.estimate:.2e} (< 1e-10), {r.n_samples} paths, {r.n_rejected} rejected, {dt:.1f} s"


def criterion_2():
    r, dt = _timed(est.check_rotation_invariance, M=100, N=1024, gamma=1.0, seed=SEED)
    return r.passed, f"max deviation {r.estimate:.2e} (< 1e-10) incl. alpha shift mod 2pi, {dt:.1f} s"


def criterion_3():
    r, dt = _timed(est.appendix_b_study, N_list=(256, 512, 1024, 2048), n_paths=20, seed=SEED)
    m = r.metadata
    ok = r.passed and dt < 120
    return ok, (f"common slope {m['common_slope']:.3f} (>= 0.9), min path slope {m['min_path_slope']:.3f}, "
                f"max rel err at N=2048 {m['max_final_rel_err']:.2e} (< 1e-2), {dt:.1f} s")


def criterion_4():
    r, dt = _timed(est.check_metric_forms, n=10_000, seed=SEED)
    ok = r.passed and dt < 5
    return ok, f"max relative spread {r.estimate:.2e} (< 1e-12), {dt:.2f} s"


def criterion_5():
    r, dt = _timed(est.check_quasi_invariance, family="exponential", params={"a": 1.0}, M=100_000, N=256, seed=SEED,
                   N_list=(256, 512, 1024, 2048, 4096))
    m = r.metadata
    rel = m["rn_convergence"]["rows"][-1]["rel_err"]
    z = m["difference"] / m["combined_se"]
    ok = r.passed and dt < 120
    return ok, (f"Phat vs P rel err at N=4096 {rel:.2e} (< 2e-2), MC identity gap {z:+.2f} SE (|.| <= 3), "
                f"{dt:.1f} s")


def criterion_6():
    r, dt = _timed(est.check_split_roundtrip, M=100, N=256, t_star=0.375, seed=SEED)
    d = r.metadata["deviations"]
    return r.passed, (f"roundtrip r1d {d['r1d']:.1e}, r2 {d['r2']:.1e}, cone {d['cone']:.1e}, "
                      f"rho relation {d['rho_relation']:.1e} (all < 1e-12), {dt:.1f} s")


def criterion_7():
    r, dt = _timed(est.check_markov_split, name="cos_endpoint", t_star=0.5, M=100_000, N=64, seed=SEED)
    m = r.metadata
    gap = m["difference"] / m["combined_se"]
    return r.passed, (f"split vs direct {gap:+.2f} SE, oracle z direct {m['direct_z']:+.2f} / split "
                      f"{m['split_z']:+.2f} (|.| <= 3), {dt:.1f} s")


def criterion_8():
    r, dt = _timed(est.check_geodesics, n=20, seed=SEED)
    jump = est.continuity_at_pi()
    ok = r.passed and dt < 60 and jump < 1e-12
    return ok, (f"max abs err {r.estimate:.2e} (< 5e-3) over cases {r.metadata['cases']}, "
                f"jump at |dtheta|=pi {jump:.1e}, {dt:.1f} s")


def criterion_9():
    r, dt = _timed(est.check_kernel, M=1_000_000, N=4096, mesh=PdeMesh(dr=0.02, dtheta=0.02), seed=SEED)
    m = r.metadata
    ok = r.passed and dt < 600
    return ok, (f"MC {m['mc']:.5f} +- {m['mc_se']:.5f} vs PDE {m['pde']:.5f} (gap {100 * m['relative_gap']:+.2f}%, "
                f"allowed {m['allowed']:.5f}), probability sum {m['probability_sum']:.15f}, "
                f"Bessel reference {m['bessel_reference']:.5f}, {dt:.0f} s")


# reduced-scale configurations for the replication check: same code paths, smaller ensembles
REPLICAS = {
    "lorentz": lambda th: est.check_lorentz_invariance(M=10, N=256, seed=SEED, threads=th),
    "rotation": lambda th: est.check_rotation_invariance(M=10, N=256, seed=SEED, threads=th),
    "appendix-b": lambda th: est.appendix_b_study(N_list=(128, 256), n_paths=4, seed=SEED, threads=th),
    "metric-forms": lambda th: est.check_metric_forms(n=1000, seed=SEED),
    "quasi-invariance": lambda th: est.check_quasi_invariance(M=20_000, N=64, N_list=(256, 512), seed=SEED,
                                                              threads=th),
    "splitting-roundtrip": lambda th: est.check_split_roundtrip(M=10, N=64, seed=SEED, threads=th),
    "markov": lambda th: est.check_markov_split(M=20_000, N=32, seed=SEED, threads=th),
    "geodesics": lambda th: est.check_geodesics(n=6, resolution=60, stencil=10, seed=SEED),
    "kernel": lambda th: est.check_kernel(M=2000, N=256, mesh=PdeMesh(dr=0.05, dtheta=0.05), seed=SEED, threads=th),
}


def criterion_10():
    bad = []
    for name, run in REPLICAS.items():
        docs = [json.dumps(run(th).to_json(), sort_keys=True) for th in (1, 1, 8)]
        if not docs[0] == docs[1] == docs[2]:
            bad.append(name)
    detail = f"{len(REPLICAS)} suites, runs (1 thread, 1 thread, 8 threads) bitwise equal"
    return not bad, detail if not bad else f"differs: {', '.join(bad)}"


CRITERIA = [
    (1, "Lorentz invariance of decomposition", criterion_1),
    (2, "rotation analogue", criterion_2),
    (3, "action identity under refinement", criterion_3),
    (4, "metric form equivalence", criterion_4),
    (5, "quasi-invariance density", criterion_5),
    (6, "split/join roundtrip", criterion_6),
    (7, "Markov split estimator", criterion_7),
    (8, "geodesics vs mesh oracle", criterion_8),
    (9, "kernel MC vs PDE", criterion_9),
    (10, "reproducibility", criterion_10),
]


@pytest.mark.parametrize("n,title,fn", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_criterion(n, title, fn, acceptance_log):
    ok, detail = fn()
    line = _line(n, title, ok, detail)
    acceptance_log.append(line)
    print(line)
    assert ok, line


if __name__ == "__main__":
    failures = 0
    for n, title, fn in CRITERIA:
        ok, detail = fn()
        failures += not ok
        print(_line(n, title, ok, detail), flush=True)
    sys.exit(1 if failures else 0)
