"""Named verification suites and their JSON reports.

Each suite draws ``cases`` independent random instances from
``case_rng(seed, case_id)``, evaluates a list of checks per instance, and
collects the failing ones.  Reports are deterministic given
``(suite, model, seed, cases, tolerances, nodes)``.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import atlas
from .geometry import TransportMap, duhamel_check, transport
from .gibbs import center, entropy, gibbs_state, regularized_mean
from .operators import HermitianOperator, ModelHamiltonian, log_trace_exp
from .perturbation import (
    Perturbation,
    eigenvalue_sandwich,
    klmn,
    maximizing_direction,
    relative_norm,
    trace_bound_check,
)
from .quadrature import DEFAULT_NODES
from .sampling import SAMPLING_NOTE, case_rng, random_hermitian, random_perturbation, random_vector

THREADS_ENV = "BKM_SUITE_THREADS"
RNG_NOTE = "PCG64(SeedSequence(seed, spawn_key=(case_id,)))"


@dataclass(frozen=True)
class Check:
    quantity: str
    expected: float
    observed: float
    tolerance: float
    ok: bool


@dataclass
class CaseResult:
    checks: list[Check] = field(default_factory=list)
    metrics: dict[str, float] = field(default_factory=dict)

    def check(self, quantity: str, expected: float, observed: float, tolerance: float, ok: bool) -> None:
        self.checks.append(Check(quantity, float(expected), float(observed), float(tolerance), bool(ok)))

    def close(self, quantity: str, expected: float, observed: float, tolerance: float) -> float:
        err = abs(observed - expected)
        self.check(quantity, expected, observed, tolerance, err <= tolerance)
        return err

    def at_most(self, quantity: str, bound: float, observed: float, tolerance: float) -> None:
        self.check(quantity, bound, observed, tolerance, observed <= bound + tolerance)

    def metric(self, name: str, value: float) -> None:
        # "count_*" metrics are summed over cases, all others maximized
        prev = self.metrics.get(name)
        if prev is None:
            self.metrics[name] = float(value)
        elif name.startswith("count_"):
            self.metrics[name] = prev + float(value)
        else:
            self.metrics[name] = max(prev, float(value))


@dataclass
class SuiteReport:
    suite: str
    seed: int
    cases: int
    failures: list[dict]
    runtime_ms: int | None
    summary: dict[str, float]
    metadata: dict

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "seed": self.seed,
            "cases": self.cases,
            "failures": self.failures,
            "runtime_ms": self.runtime_ms,
            "summary": self.summary,
            "metadata": self.metadata,
        }


CaseFn = Callable[[ModelHamiltonian, np.random.Generator, dict, int], CaseResult]


@dataclass(frozen=True)
class Suite:
    name: str
    run_case: CaseFn
    default_cases: int
    tolerances: dict[str, float]
    description: str


def _radius(model: ModelHamiltonian) -> float:
    return 1.0 - model.beta0


# -- cases -------------------------------------------------------------------


def _case_relative_bound(model, rng, tol, nodes):
    r = CaseResult()
    h0 = model.h0
    x = random_perturbation(rng, h0, rng.uniform(0.05, 2.0))
    n = relative_norm(x, h0)
    worst = -math.inf
    for _ in range(8):
        psi = random_vector(rng, model.dim)
        lhs = abs(np.vdot(psi, x.entries @ psi).real)
        rhs = n * np.vdot(psi, h0.entries @ psi).real
        worst = max(worst, (lhs - rhs) / rhs)
        r.at_most("form_bound", rhs, lhs, tol["slack"] * rhs)
    psi = maximizing_direction(x, h0)
    lhs = abs(np.vdot(psi, x.entries @ psi).real)
    rhs = n * np.vdot(psi, h0.entries @ psi).real
    r.close("form_bound_attained", rhs, lhs, tol["attain"] * rhs)
    y = random_perturbation(rng, h0, rng.uniform(0.05, 2.0))
    c = rng.uniform(-3, 3)
    r.close("homogeneity", abs(c) * n, relative_norm(x * c, h0), tol["norm"] * max(1.0, abs(c) * n))
    ny, nxy = relative_norm(y, h0), relative_norm(x + y, h0)
    r.at_most("triangle", n + ny, nxy, tol["norm"] * (n + ny))
    r.metric("max_form_bound_ratio_excess", worst)
    return r


def _case_sandwich(model, rng, tol, nodes):
    r = CaseResult()
    x = Perturbation(random_perturbation(rng, model.h0, rng.uniform(0.05, 0.95)), model)
    rep = eigenvalue_sandwich(x, slack=tol["slack"])
    margin_lo = float(np.min(rep.observed - rep.lower))
    margin_hi = float(np.min(rep.upper - rep.observed))
    scale = float(np.max(np.abs(rep.upper)))
    r.check("eigenvalue_lower", 0.0, margin_lo, tol["slack"] * scale, bool(np.all(rep.lower_ok)))
    r.check("eigenvalue_upper", 0.0, margin_hi, tol["slack"] * scale, bool(np.all(rep.upper_ok)))
    for beta in (0.5, 1.0, 2.0):
        tb = trace_bound_check(x, beta, slack=tol["slack"])
        r.check(f"trace_upper_beta={beta}", tb.upper, tb.middle, tol["slack"] * tb.upper, tb.upper_holds)
        r.check(f"trace_lower_beta={beta}", tb.lower, tb.middle, tol["slack"] * tb.lower, tb.lower_holds)
    emin = float(np.linalg.eigvalsh(klmn(x).entries)[0])
    r.check("positivity", 0.0, emin, 0.0, emin > 0)
    r.metric("min_eigenvalue_margin", -min(margin_lo, margin_hi))
    return r


def _case_regularized_mean(model, rng, tol, nodes):
    r = CaseResult()
    x = random_perturbation(rng, model.h0, rng.uniform(0.0, 0.95) * _radius(model))
    st = gibbs_state(model.h0 + x)
    y = random_hermitian(rng, model.dim)
    l1, l2 = rng.uniform(0.01, 0.99, size=2)
    m1, m2 = regularized_mean(st, y, l1), regularized_mean(st, y, l2)
    oracle = float(np.trace(st.rho.entries @ y.entries).real)
    e = r.close("lambda_independence", m1, m2, tol["mean"])
    r.close("mean_vs_trace_lambda1", oracle, m1, tol["mean"])
    r.close("mean_vs_trace_lambda2", oracle, m2, tol["mean"])
    # |rho.Y| <= ||Y||_H Tr(rho H) for positive H
    bound = relative_norm(y, st.hamiltonian) * regularized_mean(st, st.hamiltonian)
    r.at_most("continuity_bound", bound, abs(m1), tol["mean"])
    r.metric("max_lambda_gap", e)
    return r


def _case_resolvent(model, rng, tol, nodes):
    r = CaseResult()
    x = random_perturbation(rng, model.h0, rng.uniform(0.05, 0.95))
    y = random_perturbation(rng, model.h0, rng.uniform(0.05, 2.0))
    rep = atlas.norm_equivalence_report(model, x, y, slack=tol["slack"])
    r.check("resolvent_bound", rep.resolvent_bound, rep.resolvent_norm, tol["slack"], rep.resolvent_holds)
    lo, hi = rep.cstar_c_spectrum
    r.check("cstar_c_lower", 1 - rep.a, lo, tol["slack"], lo >= 1 - rep.a - tol["slack"])
    r.check("cstar_c_upper", 1 + rep.a, hi, tol["slack"], hi <= 1 + rep.a + tol["slack"])
    r.metric("max_resolvent_ratio", rep.resolvent_norm / rep.resolvent_bound)
    return r


def _case_norm_equivalence(model, rng, tol, nodes):
    r = CaseResult()
    x = random_perturbation(rng, model.h0, rng.uniform(0.05, 0.8))
    y = random_perturbation(rng, model.h0, rng.uniform(0.05, 2.0))
    rep = atlas.norm_equivalence_report(model, x, y, slack=tol["slack"])
    r.check("upper", rep.upper_const * rep.n0, rep.nx, tol["slack"], rep.upper_holds)
    r.check("lower", (1 + rep.a) * rep.nx, rep.n0, tol["slack"], rep.lower_holds)
    hx = model.h0 + x
    ys = random_perturbation(rng, hx, rng.uniform(0.001, 0.1))
    lip = atlas.lipschitz_check(model, x, ys, nodes)
    r.check("lipschitz", lip.constant * lip.norm, abs(lip.dz), 1e-9, lip.holds)
    r.metric("max_upper_ratio", rep.nx / (rep.upper_const * rep.n0))
    r.metric("max_lower_ratio", rep.n0 / ((1 + rep.a) * rep.nx))
    return r


def _case_duhamel(model, rng, tol, nodes):
    r = CaseResult()
    x = random_perturbation(rng, model.h0, rng.uniform(0.0, 0.9))
    rep = duhamel_check(model, x, nodes)
    allowed = max(tol["relative"] * abs(rep.lhs), tol["floor"])
    r.check("residual", rep.lhs, rep.rhs, allowed, rep.residual <= allowed)
    r.metric("max_residual", rep.residual)
    r.metric("max_relative_residual", rep.residual / max(abs(rep.lhs), tol["floor"]))
    return r


def _case_entropy(model, rng, tol, nodes):
    r = CaseResult()
    x = random_perturbation(rng, model.h0, rng.uniform(0.0, 0.95) * _radius(model))
    st = gibbs_state(model.h0 + x)
    s = entropy(st)
    rhs = regularized_mean(st, st.hamiltonian) + st.psi
    e = r.close("entropy_identity", rhs, s, tol["identity"] * max(1.0, abs(s)))
    mixed = gibbs_state(HermitianOperator.zeros(model.dim))
    r.close("maximally_mixed", math.log(model.dim), entropy(mixed), tol["mixed"])
    r.check("nonnegative", 0.0, s, 0.0, s >= 0)
    r.metric("max_identity_error", e)
    return r


def _case_transport(model, rng, tol, nodes):
    r = CaseResult()
    a = _radius(model)
    rho0 = gibbs_state(model.h0)
    xs = random_perturbation(rng, model.h0, rng.uniform(0.05, 0.95) * a)
    ys = random_perturbation(rng, model.h0, rng.uniform(0.05, 0.95) * a)
    rx, ry = gibbs_state(model.h0 + xs), gibbs_state(model.h0 + ys)
    v1 = center(rho0, random_hermitian(rng, model.dim))
    v2 = center(rho0, random_hermitian(rng, model.dim))
    lam = rng.uniform()
    u = TransportMap(rho0, rx)
    lhs = transport(u, lam * v1 + (1 - lam) * v2).centered.entries
    rhs = (lam * transport(u, v1).centered + (1 - lam) * transport(u, v2).centered).entries
    scale = max(1.0, float(np.max(np.abs(rhs))))
    r.at_most("affinity", 0.0, float(np.max(np.abs(lhs - rhs))), tol["affine"] * scale)
    two = transport(TransportMap(rx, ry), transport(u, v1)).centered.entries
    direct = transport(TransportMap(rho0, ry), v1).centered.entries
    r.at_most("flatness", 0.0, float(np.max(np.abs(two - direct))), tol["affine"] * scale)
    back = transport(TransportMap(rx, rho0), transport(u, v1)).centered.entries
    r.at_most("invertibility", 0.0, float(np.max(np.abs(back - v1.centered.entries))), tol["affine"] * scale)
    zero = transport(u, center(rho0, HermitianOperator.zeros(model.dim))).centered
    r.at_most("linear_connection", 0.0, zero.frobenius(), 0.0)
    worst = 0.0
    for alpha in (-5.0, 3.7):
        shifted = gibbs_state(model.h0 + xs + alpha * HermitianOperator.identity(model.dim))
        d = float(np.linalg.norm(shifted.rho.entries - rx.rho.entries))
        worst = max(worst, d)
        r.at_most(f"gauge_alpha={alpha}", 0.0, d, tol["gauge"])
    r.metric("max_gauge_distance", worst)
    return r


def random_chain(model: ModelHamiltonian, rng: np.random.Generator, length: int) -> atlas.ManifoldPoint:
    """Chain whose k-th step has relative norm ``u * radius`` at its patch."""
    p = atlas.origin(model)
    for _ in range(length):
        pt = atlas.patch(p)
        p = atlas.extend(p, random_perturbation(rng, pt.h_at_base, rng.uniform(0.05, 0.95) * pt.radius))
    return p


def _case_convexity(model, rng, tol, nodes):
    r = CaseResult()
    p = random_chain(model, rng, int(rng.integers(1, 4)))
    q = random_chain(model, rng, int(rng.integers(1, 4)))
    rep = atlas.plus_convexity_check(p, q)
    for lam, mix in rep.results.items():
        for lv in mix.levels:
            r.check(f"witness_lambda={lam}_level={lv.level}", lv.witness_a, lv.witness_norm, tol["slack"], lv.witness_holds)
            r.check(f"convexity_lambda={lam}_level={lv.level}", 0.0, lv.convexity_gap, tol["slack"], lv.convexity_gap >= 0)
            r.check(f"admitted_lambda={lam}_level={lv.level}", 1.0, float(lv.route is not None), 0.0, lv.route is not None)
        if mix.point is not None:
            r.check(f"replay_lambda={lam}", 1.0, float(atlas.replay(mix.point).ok), 0.0, atlas.replay(mix.point).ok)
    r.at_most("endpoints", 0.0, rep.endpoint_distance, atlas.PATH_STATE_TOL)
    grid = sorted(rep.results)
    if all(rep.results[lam].point is not None for lam in grid) and np.allclose(np.diff(grid), grid[1] - grid[0]):
        psi = np.array([log_trace_exp(rep.results[lam].point.hamiltonian) for lam in grid])
        second = psi[:-2] - 2 * psi[1:-1] + psi[2:]
        worst = float(np.min(second)) if second.size else 0.0
        r.check("psi_convex_along_mix", 0.0, worst, tol["psi"], worst >= -tol["psi"])
    for name, pt in (("p", p), ("q", q)):
        r.check(f"replay_{name}", 1.0, float(atlas.replay(pt).ok), 0.0, atlas.replay(pt).ok)
    for route, n in rep.routes.items():
        r.metric(f"count_route_{route}", n)
    return r


def _case_luxemburg(model, rng, tol, nodes):
    r = CaseResult()
    t = tol["bisection"]
    alpha = rng.uniform(0.1, 3.0) * (1 if rng.uniform() < 0.5 else -1)
    val = atlas.luxemburg(model, alpha * HermitianOperator.identity(model.dim), t)
    r.close("scalar_closed_form", abs(alpha) / math.acosh(2.0), val, t)
    x = random_perturbation(rng, model.h0, rng.uniform(0.1, 2.0))
    y = random_perturbation(rng, model.h0, rng.uniform(0.1, 2.0))
    lx, ly = atlas.luxemburg(model, x, t), atlas.luxemburg(model, y, t)
    for c in (0.5, 2.0, -1.0):
        r.close(f"homogeneity_c={c}", abs(c) * lx, atlas.luxemburg(model, x * c, t), 2 * t)
    r.at_most("triangle", lx + ly, atlas.luxemburg(model, x + y, t), 4 * t)
    grid = lx * np.logspace(-1, 1, 25)
    f = np.array([atlas.luxemburg_predicate(model, x, g) for g in grid])
    finite = f[np.isfinite(f)]
    rise = float(np.max(np.diff(finite) / np.maximum(1.0, np.abs(finite[:-1])), initial=-math.inf))
    r.at_most("predicate_monotone", 0.0, rise, 1e-12)
    r.metric("max_predicate_rise", rise)
    return r


SUITES: dict[str, Suite] = {
    s.name: s
    for s in (
        Suite("lemma2", _case_relative_bound, 100, {"slack": 1e-10, "attain": 1e-8, "norm": 1e-12},
              "relative norm is a b=0 form bound, attained, and a norm"),
        Suite("lemma4", _case_sandwich, 500, {"slack": 1e-10},
              "eigenvalue and trace sandwich for the canonical witness"),
        Suite("lemma5", _case_regularized_mean, 200, {"mean": 1e-12},
              "regularized mean independent of lambda and equal to Tr(rho X)"),
        Suite("lemma7", _case_resolvent, 200, {"slack": 1e-10},
              "||H0^1/2 H_X^-1/2|| <= (1-||X||_0)^-1/2 and C*C bounds"),
        Suite("thm8-duhamel", _case_duhamel, 100, {"relative": 1e-9, "floor": 1e-12},
              "trace-level Duhamel identity by Gauss-Legendre quadrature"),
        Suite("lemma11", _case_norm_equivalence, 500, {"slack": 1e-10},
              "equivalence of ||.||_X and ||.||_0, Lipschitz partition function"),
        Suite("entropy-identity", _case_entropy, 100, {"identity": 1e-10, "mixed": 1e-12},
              "S = rho.H + Psi"),
        Suite("transport-affine", _case_transport, 100, {"affine": 1e-12, "gauge": 1e-12},
              "(+1)-transport affinity, flatness, invertibility; gauge invariance"),
        Suite("thm14-convex", _case_convexity, 100, {"slack": 1e-10, "psi": 1e-12},
              "(+1)-convexity of the chained manifold"),
        Suite("luxemburg", _case_luxemburg, 100, {"bisection": 1e-8},
              "Luxemburg gauge: closed form, homogeneity, triangle, monotone predicate"),
    )
}

SUITE_NAMES = tuple(SUITES)


def _threads(requested: int | None) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = requested or os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, n)


def run_suite(
    name: str,
    model: ModelHamiltonian,
    seed: int = 0,
    cases: int | None = None,
    tolerances: dict[str, float] | None = None,
    nodes: int = DEFAULT_NODES,
    threads: int | None = None,
    timing: bool = False,
    case_offset: int = 0,
) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; valid suites: {', '.join(SUITE_NAMES)}")
    suite = SUITES[name]
    tol = dict(suite.tolerances)
    for k, v in (tolerances or {}).items():
        if k not in tol:
            raise KeyError(f"suite {name!r} has no tolerance {k!r}; known: {', '.join(tol)}")
        tol[k] = float(v)
    n = suite.default_cases if cases is None else int(cases)
    ids = range(case_offset, case_offset + n)
    t0 = time.perf_counter()

    def one(case_id: int) -> tuple[int, CaseResult]:
        return case_id, suite.run_case(model, case_rng(seed, case_id), tol, nodes)

    workers = min(_threads(threads), max(1, n))
    if workers == 1:
        results = [one(i) for i in ids]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, ids))
    results.sort(key=lambda t: t[0])
    failures = []
    summary: dict[str, float] = {}
    for case_id, res in results:
        for c in res.checks:
            if not c.ok:
                failures.append(
                    {
                        "case_id": case_id,
                        "quantity": c.quantity,
                        "expected": c.expected,
                        "observed": c.observed,
                        "tolerance": c.tolerance,
                    }
                )
        for k, v in res.metrics.items():
            if k not in summary:
                summary[k] = v
            elif k.startswith("count_"):
                summary[k] += v
            else:
                summary[k] = max(summary[k], v)
    summary["checks"] = float(sum(len(res.checks) for _, res in results))
    runtime = int(round((time.perf_counter() - t0) * 1000)) if timing else None
    metadata = {
        "description": suite.description,
        "model": {"kind": model.kind, "dim": model.dim, "beta0": model.beta0},
        "nodes": nodes,
        "tolerances": tol,
        "rng": RNG_NOTE,
        "sampling": SAMPLING_NOTE,
        "case_offset": case_offset,
    }
    return SuiteReport(
        suite=name,
        seed=seed,
        cases=n,
        failures=failures,
        runtime_ms=runtime,
        summary=dict(sorted(summary.items())),
        metadata=metadata,
    )
