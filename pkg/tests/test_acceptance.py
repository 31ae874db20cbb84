"""Acceptance battery: one test per criterion, each logging a PASS/FAIL line.

The lines are printed immediately and repeated in the pytest terminal summary.
"""

import math
import subprocess
import sys
import time

import numpy as np

from bkm_manifold import (
    HermitianOperator,
    bkm,
    bkm_gram,
    bkm_quadrature,
    build_model,
    center,
    entropy,
    gibbs_state,
)
from bkm_manifold.geometry import massieu_second_derivative
from bkm_manifold.sampling import case_rng, random_hermitian, random_perturbation
from bkm_manifold.suites import run_suite

SEED = 2026


def _log(log, number, ok, text):
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {text}"
    print(line)
    log.append(line)


def _split(suite, models, total, seed=SEED):
    """Run ``total`` cases spread over ``models`` with disjoint case ids."""
    per = total // len(models)
    reports = []
    for i, m in enumerate(models):
        n = per if i < len(models) - 1 else total - per * (len(models) - 1)
        reports.append(run_suite(suite, m, seed=seed, cases=n, case_offset=i * per))
    return reports


def _failures(reports):
    return [f for r in reports for f in r.failures]


def _max(reports, key):
    return max(r.summary[key] for r in reports)


def test_criterion_01_regularized_mean(acceptance_log):
    models = [build_model("harmonic_oscillator", d) for d in (2, 4, 8, 16)]
    t0 = time.perf_counter()
    reports = _split("lemma5", models, 200)
    elapsed = time.perf_counter() - t0
    gap = _max(reports, "max_lambda_gap")
    ok = not _failures(reports) and gap < 1e-12 and elapsed < 10
    _log(acceptance_log, 1, ok, f"lambda-independence, 200 cases dims 2-16: max gap {gap:.2e}, {elapsed:.2f}s")
    assert ok, _failures(reports)[:5]


def test_criterion_02_duhamel(acceptance_log):
    models = [build_model("harmonic_oscillator", d) for d in (2, 4, 8, 16)] + [build_model("dirichlet_box", 6)]
    t0 = time.perf_counter()
    reports = _split("thm8-duhamel", models, 100)
    elapsed = time.perf_counter() - t0
    rel = _max(reports, "max_relative_residual")
    ok = not _failures(reports) and rel < 1e-9 and elapsed < 30
    _log(acceptance_log, 2, ok, f"Duhamel identity, 100 cases: max relative residual {rel:.2e}, {elapsed:.2f}s")
    assert ok, _failures(reports)[:5]


def test_criterion_03_sandwich(acceptance_log):
    models = [
        build_model("harmonic_oscillator", 4),
        build_model("harmonic_oscillator", 8),
        build_model("harmonic_oscillator", 16),
        build_model("dirichlet_box", 6),
    ]
    reports = _split("lemma4", models, 500)
    ok = not _failures(reports)
    _log(acceptance_log, 3, ok, f"eigenvalue and trace sandwich, 500 cases: {len(_failures(reports))} failures")
    assert ok, _failures(reports)[:5]


def test_criterion_04_norm_equivalence(acceptance_log):
    models = [build_model("harmonic_oscillator", d) for d in (2, 4, 8, 16)] + [build_model("dirichlet_box", 5)]
    equiv = _split("lemma11", models, 500)
    resolvent = _split("lemma7", models, 500)
    ratio = _max(resolvent, "max_resolvent_ratio")
    ok = not _failures(equiv) and not _failures(resolvent) and ratio <= 1 + 1e-10
    _log(
        acceptance_log,
        4,
        ok,
        f"norm equivalence 500 pairs (max ratios {_max(equiv, 'max_upper_ratio'):.4f}, "
        f"{_max(equiv, 'max_lower_ratio'):.4f}); resolvent bound ratio {ratio:.12f}",
    )
    assert ok, (_failures(equiv) + _failures(resolvent))[:5]


def test_criterion_05_bkm_metric(acceptance_log):
    worst_quad = worst_hess = worst_hess_double = 0.0
    min_gram = math.inf
    for case in range(100):
        rng = case_rng(SEED + 5, case)
        d = (2, 4, 8, 16)[case % 4]
        m = build_model("harmonic_oscillator", d)
        st = gibbs_state(m.h0 + random_perturbation(rng, m.h0, rng.uniform(0.0, 0.95)))
        y, x = center(st, random_hermitian(rng, d)), center(st, random_hermitian(rng, d))
        closed = bkm(st, y, x)
        worst_quad = max(worst_quad, abs(closed - bkm_quadrature(st, y, x)) / abs(closed))
        k = min(4, d * d - 1)
        basis = [center(st, random_hermitian(rng, d)) for _ in range(k)]
        min_gram = min(min_gram, float(np.linalg.eigvalsh(bkm_gram(st, basis))[0]))
        g = bkm(st, x, x)
        # double precision is roundoff-bound at the fine step; the check
        # itself carries the log-traces at 30 digits
        est = massieu_second_derivative(st.hamiltonian, x.centered, dps=30).value
        worst_hess = max(worst_hess, abs(est - g) / g)
        plain = massieu_second_derivative(st.hamiltonian, x.centered).value
        worst_hess_double = max(worst_hess_double, abs(plain - g) / g)
    ok = worst_quad < 1e-9 and min_gram > 0 and worst_hess < 1e-6
    _log(
        acceptance_log,
        5,
        ok,
        f"BKM closed form vs quadrature {worst_quad:.2e}; min Gram eigenvalue {min_gram:.2e}; "
        f"Hessian {worst_hess:.2e} (double precision alone {worst_hess_double:.2e})",
    )
    assert ok


def test_criterion_06_entropy(acceptance_log):
    models = [build_model("harmonic_oscillator", d) for d in (2, 4, 8, 16, 32)] + [build_model("dirichlet_box", 4)]
    reports = _split("entropy-identity", models, 120)
    ident = _max(reports, "max_identity_error")
    mixed = max(abs(entropy(gibbs_state(HermitianOperator.zeros(d))) - math.log(d)) for d in range(1, 33))
    ok = not _failures(reports) and ident <= 1e-10 and mixed <= 1e-12
    _log(acceptance_log, 6, ok, f"entropy identity max error {ident:.2e}; log d error {mixed:.2e}")
    assert ok, _failures(reports)[:5]


def test_criterion_07_affine_structure(acceptance_log):
    models = [build_model("harmonic_oscillator", d) for d in (2, 4, 8, 16)] + [build_model("dirichlet_box", 5, 0.4)]
    reports = _split("transport-affine", models, 100)
    gauge = _max(reports, "max_gauge_distance")
    ok = not _failures(reports) and gauge <= 1e-12
    _log(acceptance_log, 7, ok, f"transport affinity/flatness/invertibility, gauge distance {gauge:.2e}")
    assert ok, _failures(reports)[:5]


def test_criterion_08_plus_convexity(acceptance_log):
    bad, routes = [], {}
    for beta0 in (0.0, 0.3, 0.6):
        rep = run_suite("thm14-convex", build_model("harmonic_oscillator", 4, beta0), seed=SEED, cases=100)
        bad += rep.failures
        for k, v in rep.summary.items():
            if k.startswith("count_route_"):
                routes[k[12:]] = routes.get(k[12:], 0) + int(v)
    ok = not bad
    _log(acceptance_log, 8, ok, f"(+1)-convexity, 3 x 100 chain pairs: {len(bad)} failures, routes {routes}")
    assert ok, bad[:5]


def test_criterion_09_luxemburg(acceptance_log):
    models = [build_model("harmonic_oscillator", d) for d in (2, 4, 8)] + [build_model("dirichlet_box", 4)]
    reports = _split("luxemburg", models, 100)
    ok = not _failures(reports)
    _log(acceptance_log, 9, ok, f"Luxemburg closed form, homogeneity, triangle on 100 pairs: {len(_failures(reports))} failures")
    assert ok, _failures(reports)[:5]


def test_criterion_10_determinism(acceptance_log, tmp_path):
    spec = tmp_path / "ho8.json"
    cli = [sys.executable, "-m", "bkm_manifold"]
    subprocess.run(cli + ["model", "--kind", "harmonic", "--dim", "8", "--out", str(spec)], check=True)
    outputs, codes = [], []
    t0 = time.perf_counter()
    for run in range(2):
        out = tmp_path / f"all{run}.json"
        proc = subprocess.run(cli + ["verify", "all", "--model", str(spec), "--seed", "7", "--out", str(out)])
        codes.append(proc.returncode)
        outputs.append(out.read_bytes())
    elapsed = (time.perf_counter() - t0) / 2
    ok = outputs[0] == outputs[1] and codes == [0, 0] and elapsed < 180
    _log(acceptance_log, 10, ok, f"full battery byte-identical across runs, {elapsed:.1f}s per run, exit codes {codes}")
    assert ok
