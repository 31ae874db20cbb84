"""Patch chains, cross-patch norm equivalence, the Luxemburg gauge and
(+1)-convexity of the chained manifold.

A :class:`ManifoldPoint` is a chain of perturbation steps over a model.  Each
step is admitted at the patch opened at the previous point: the previous
Hamiltonian is shifted up by a multiple of ``I`` until it is ``>= I`` and the
step must have relative norm below the patch radius ``1 - beta``, where
``beta`` follows ``beta -> beta / (1 - a)`` along the chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .geometry import duhamel_samples
from .gibbs import GibbsState, gibbs_state
from .operators import (
    HermitianOperator,
    ModelHamiltonian,
    as_operator,
    log_trace_exp,
    schatten_norm,
    apply_function,
)
from .perturbation import relative_norm
from .quadrature import DEFAULT_NODES

ROUTE_PATCH = "patch"
ROUTE_MIXED_SHIFT = "mixed-shift"
ROUTE_FIRST_METHOD = "first-method"

PATH_STATE_TOL = 1e-11
PATH_TOTAL_TOL = 1e-12
EQUIVALENCE_SLACK = 1e-10
CONVEXITY_SLACK = 1e-10
LUXEMBURG_MAX_ITER = 200


class AdmissionError(ValueError):
    """Step lies outside the patch; not a bug, just a rejected extension."""

    def __init__(self, norm: float, threshold: float):
        super().__init__(f"step has relative norm {norm:.17g} >= patch radius {threshold:.17g}")
        self.norm = norm
        self.threshold = threshold


class ConvexityFalsified(RuntimeError):
    """A (+1)-mixture of manifold points failed re-admission."""

    def __init__(self, message: str, levels: list):
        super().__init__(message)
        self.levels = levels


class LuxemburgError(RuntimeError):
    def __init__(self, message: str, samples: list[tuple[float, float]]):
        super().__init__(message)
        self.samples = samples


@dataclass(frozen=True)
class Admission:
    norm: float
    radius: float
    shift: float
    beta: float  # threshold after the step
    route: str = ROUTE_PATCH


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    base: ModelHamiltonian
    steps: tuple[HermitianOperator, ...] = ()
    total: HermitianOperator | None = None
    trail: tuple[Admission, ...] = ()
    parent: "ManifoldPoint | None" = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.total is None:
            object.__setattr__(self, "total", HermitianOperator.zeros(self.base.dim))

    @property
    def beta(self) -> float:
        return self.trail[-1].beta if self.trail else self.base.beta0

    @property
    def hamiltonian(self) -> HermitianOperator:
        return self.base.h0 + self.total

    @cached_property
    def state(self) -> GibbsState:
        return gibbs_state(self.hamiltonian)

    def prefix(self, n: int) -> "ManifoldPoint":
        p = self
        while len(p.steps) > n:
            p = p.parent
        return p

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True, eq=False)
class Patch:
    base_point: ManifoldPoint
    h_at_base: HermitianOperator
    shift: float
    radius: float

    @property
    def beta(self) -> float:
        return 1.0 - self.radius


def origin(base: ModelHamiltonian) -> ManifoldPoint:
    return ManifoldPoint(base=base)


def minimal_shift(h) -> float:
    emin = float(as_operator(h).spectrum.eigenvalues[0])
    return max(0.0, 1.0 - emin)


def patch(p: ManifoldPoint, shift: float | None = None) -> Patch:
    """Chart data at ``p``; by default the smallest shift making ``H >= I``."""
    h = p.hamiltonian
    smin = minimal_shift(h)
    if shift is None:
        shift = smin
    elif shift < smin - 1e-12:
        raise ValueError(f"shift {shift} leaves the patch Hamiltonian below I (needs {smin})")
    h_at = h + shift * HermitianOperator.identity(h.dim) if shift else h
    return Patch(base_point=p, h_at_base=h_at, shift=shift, radius=1.0 - p.beta)


def _append(p: ManifoldPoint, y: HermitianOperator, record: Admission) -> ManifoldPoint:
    return ManifoldPoint(
        base=p.base,
        steps=p.steps + (y,),
        total=p.total + y,
        trail=p.trail + (record,),
        parent=p,
    )


def extend(p: ManifoldPoint, y, shift: float | None = None) -> ManifoldPoint:
    """Admit ``y`` at the patch opened at ``p``, or raise :class:`AdmissionError`."""
    y = as_operator(y)
    if y.dim != p.base.dim:
        raise ValueError(f"step dim {y.dim} != model dim {p.base.dim}")
    pt = patch(p, shift)
    a = relative_norm(y, pt.h_at_base)
    if not a < pt.radius:
        raise AdmissionError(a, pt.radius)
    route = ROUTE_PATCH if shift is None else ROUTE_MIXED_SHIFT
    return _append(p, y, Admission(norm=a, radius=pt.radius, shift=pt.shift, beta=p.beta / (1.0 - a), route=route))


def build_chain(base: ModelHamiltonian, steps: Sequence) -> ManifoldPoint:
    p = origin(base)
    for y in steps:
        p = extend(p, y)
    return p


def _first_method_ok(p: ManifoldPoint, y: HermitianOperator, shift: float) -> tuple[bool, float]:
    # q-small at the shifted patch and exp(-(H +/- Y)) of finite trace
    a = relative_norm(y, p.hamiltonian + shift * HermitianOperator.identity(p.base.dim))
    finite = all(np.isfinite(log_trace_exp(p.hamiltonian + sgn * y)) for sgn in (1.0, -1.0))
    return bool(a < 1.0 and finite), a


@dataclass(frozen=True)
class ReplayReport:
    ok: bool
    mismatches: tuple[int, ...]


def replay(p: ManifoldPoint) -> ReplayReport:
    """Re-run every admission from the origin and compare with the trail."""
    q = origin(p.base)
    bad = []
    for k, (y, rec) in enumerate(zip(p.steps, p.trail)):
        try:
            if rec.route == ROUTE_PATCH:
                q = extend(q, y)
            elif rec.route == ROUTE_MIXED_SHIFT:
                q = extend(q, y, shift=rec.shift)
            else:
                ok, a = _first_method_ok(q, y, rec.shift)
                if not ok or not 0.0 <= rec.beta < 1.0:
                    raise AdmissionError(a, 1.0)
                q = _append(q, y, Admission(a, 1.0, rec.shift, rec.beta, ROUTE_FIRST_METHOD))
        except AdmissionError:
            bad.append(k)
            break
        if q.trail[-1] != rec:
            bad.append(k)
    if len(q.steps) != len(p.steps) and not bad:
        bad.append(len(q.steps))
    return ReplayReport(ok=not bad, mismatches=tuple(bad))


@dataclass(frozen=True)
class PathReport:
    equal: bool
    distance: float


def path_independence_check(p: ManifoldPoint, q: ManifoldPoint, tol: float = PATH_STATE_TOL) -> PathReport:
    """Two chains with the same total perturbation reach the same state."""
    if p.base is not q.base and not np.array_equal(p.base.h0.entries, q.base.h0.entries):
        raise ValueError("points belong to different models")
    gap = float(np.max(np.abs(p.total.entries - q.total.entries)))
    if gap > PATH_TOTAL_TOL * max(1.0, p.total.frobenius()):
        raise ValueError(f"total perturbations differ by {gap:.3e}; path comparison undefined")
    rp = gibbs_state(p.base.h0 + p.total).rho.entries
    rq = gibbs_state(q.base.h0 + q.total).rho.entries
    d = float(np.linalg.norm(rp - rq))
    return PathReport(equal=d <= tol, distance=d)


@dataclass(frozen=True)
class NormEquivalence:
    """``||Y||_X`` versus ``||Y||_0`` with the constants implied by ``a = ||X||_0``."""

    nx: float
    n0: float
    a: float
    lower_const: float
    upper_const: float
    upper_holds: bool
    lower_holds: bool
    resolvent_norm: float  # ||H0^1/2 H_X^-1/2||
    resolvent_bound: float  # (1 - a)^-1/2
    resolvent_holds: bool
    cstar_c_spectrum: tuple[float, float]
    cstar_c_holds: bool

    @property
    def holds(self) -> bool:
        return self.upper_holds and self.lower_holds and self.resolvent_holds and self.cstar_c_holds


def norm_equivalence_report(base: ModelHamiltonian, x, y, slack: float = EQUIVALENCE_SLACK) -> NormEquivalence:
    x, y = as_operator(x), as_operator(y)
    a = relative_norm(x, base.h0)
    if not a < 1.0:
        raise ValueError(f"need ||X||_0 < 1, got {a}")
    hx = base.h0 + x
    n0 = relative_norm(y, base.h0)
    nx = relative_norm(y, hx)
    upper_const = 1.0 / (1.0 - a)
    lower_const = 1.0 / (1.0 + a)
    tol = slack * max(1.0, n0)
    # C = H_X^1/2 R0^1/2, C*C = I + R0^1/2 X R0^1/2
    r0h = apply_function(base.h0, lambda e: e**-0.5)
    cc = np.linalg.eigvalsh(r0h.entries @ hx.entries @ r0h.entries)
    inv_c = apply_function(base.h0, np.sqrt).entries @ apply_function(hx, lambda e: e**-0.5).entries
    res = schatten_norm(inv_c, math.inf)
    res_bound = (1.0 - a) ** -0.5
    return NormEquivalence(
        nx=nx,
        n0=n0,
        a=a,
        lower_const=lower_const,
        upper_const=upper_const,
        upper_holds=nx <= upper_const * n0 + tol,
        lower_holds=n0 <= (1.0 + a) * nx + tol,
        resolvent_norm=res,
        resolvent_bound=res_bound,
        resolvent_holds=res <= res_bound * (1 + slack),
        cstar_c_spectrum=(float(cc[0]), float(cc[-1])),
        cstar_c_holds=bool(cc[0] >= 1 - a - slack and cc[-1] <= 1 + a + slack),
    )


@dataclass(frozen=True)
class LipschitzReport:
    dz: float
    norm: float
    constant: float
    holds: bool


def lipschitz_check(base: ModelHamiltonian, x, y, nodes: int = DEFAULT_NODES) -> LipschitzReport:
    """``|Z_X - Z_{X+Y}| <= C ||Y||_X`` with C the sampled sup of the Duhamel
    integrand divided by ``||Y||_X``."""
    hx = base.h0 + as_operator(x)
    y = as_operator(y)
    nrm = relative_norm(y, hx)
    dz, vals = duhamel_samples(hx, y, nodes)
    if nrm == 0.0:
        return LipschitzReport(dz=dz, norm=0.0, constant=0.0, holds=abs(dz) == 0.0)
    c = float(np.max(np.abs(vals))) / nrm
    return LipschitzReport(dz=dz, norm=nrm, constant=c, holds=abs(dz) <= c * nrm * (1 + 1e-9))


# -- Luxemburg gauge ----------------------------------------------------------


def luxemburg_predicate(base: ModelHamiltonian, x, r: float) -> float:
    """``Tr[(exp-(H0 + X/r) + exp-(H0 - X/r)) / (2 Z0)]``; the gauge condition is ``< 2``."""
    x = as_operator(x)
    terms = []
    for sgn in (1.0, -1.0):
        d = log_trace_exp(base.h0 + (sgn / r) * x) - base.psi0
        terms.append(math.exp(d) if d < 700 else math.inf)
    return (terms[0] + terms[1]) / 2


@dataclass(frozen=True)
class LuxemburgResult:
    value: float
    lower: float
    upper: float
    iterations: int
    samples: tuple[tuple[float, float], ...]


def luxemburg_search(
    base: ModelHamiltonian, x, tol: float = 1e-8, max_iter: int = LUXEMBURG_MAX_ITER
) -> LuxemburgResult:
    """Bisection for ``inf{r > 0 : f(r) < 2}``.

    The bracket starts at ``2 ||X||_0`` and doubles until the predicate holds,
    then the lower end halves until it fails.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    x = as_operator(x)
    n0 = relative_norm(x, base.h0)
    if n0 == 0.0:
        return LuxemburgResult(0.0, 0.0, 0.0, 0, ())
    samples: list[tuple[float, float]] = []
    it = 0

    def ok(r: float) -> bool:
        f = luxemburg_predicate(base, x, r)
        samples.append((r, f))
        return f < 2.0

    def fail(msg: str):
        raise LuxemburgError(f"{msg} after {it} iterations", samples[-20:])

    hi = 2.0 * n0
    while not ok(hi):
        it += 1
        if it >= max_iter:
            fail("no upper bracket found")
        hi *= 2.0
    lo = hi / 2.0
    while ok(lo):
        it += 1
        if it >= max_iter:
            fail("no lower bracket found")
        hi, lo = lo, lo / 2.0
    while hi - lo >= tol:
        it += 1
        if it >= max_iter:
            fail("bisection did not reach tolerance")
        mid = (lo + hi) / 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return LuxemburgResult((lo + hi) / 2, lo, hi, it, tuple(samples[-8:]))


def luxemburg(base: ModelHamiltonian, x, tol: float = 1e-8) -> float:
    return luxemburg_search(base, x, tol).value


# -- (+1)-convexity -----------------------------------------------------------


@dataclass(frozen=True)
class LevelCheck:
    """Admission evidence for one level of a mixed chain."""

    lam: float
    level: int
    a1: float
    a2: float
    witness_a: float
    mixed_shift: float
    witness_norm: float  # relative norm of the mixed step at the mixed shift
    witness_holds: bool
    canonical_norm: float  # relative norm at the minimal shift
    radius: float
    convexity_gap: float  # min over signs of (mix of log-traces) - (log-trace of mix)
    route: str | None

    @property
    def ok(self) -> bool:
        return self.witness_holds and self.witness_a < 1.0 and self.convexity_gap >= 0 and self.route is not None


@dataclass
class MixResult:
    point: ManifoldPoint | None
    levels: list[LevelCheck]

    @property
    def ok(self) -> bool:
        return self.point is not None and all(lv.ok for lv in self.levels)


def _pad(p: ManifoldPoint, n: int) -> ManifoldPoint:
    zero = HermitianOperator.zeros(p.base.dim)
    while len(p) < n:
        p = extend(p, zero)
    return p


def _same_model(p: ManifoldPoint, q: ManifoldPoint) -> None:
    if p.base is q.base:
        return
    if p.base.beta0 != q.base.beta0 or not np.array_equal(p.base.h0.entries, q.base.h0.entries):
        raise ValueError("points belong to different models")


def _mix(p: ManifoldPoint, q: ManifoldPoint, lam: float, slack: float = CONVEXITY_SLACK) -> MixResult:
    _same_model(p, q)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"mixing weight must lie in [0, 1], got {lam}")
    n = max(len(p), len(q))
    p, q = _pad(p, n), _pad(q, n)
    lp = 1.0 - lam
    eye = HermitianOperator.identity(p.base.dim)
    m = origin(p.base)
    levels: list[LevelCheck] = []
    for k in range(n):
        p_prev, q_prev = p.prefix(k), q.prefix(k)
        x1, x2 = p.steps[k], q.steps[k]
        r1, r2 = p.trail[k], q.trail[k]
        step = lam * x1 + lp * x2
        a = max(r1.norm, r2.norm)
        smin = minimal_shift(m.hamiltonian)
        sigma = max(lam * r1.shift + lp * r2.shift, smin)
        wnorm = relative_norm(step, m.hamiltonian + sigma * eye)
        cnorm = relative_norm(step, m.hamiltonian + smin * eye)
        gap = math.inf
        for sgn in (1.0, -1.0):
            mixed = log_trace_exp(m.hamiltonian + sgn * step)
            bound = lam * log_trace_exp(p_prev.hamiltonian + sgn * x1) + lp * log_trace_exp(
                q_prev.hamiltonian + sgn * x2
            )
            gap = min(gap, bound - mixed + slack * max(1.0, abs(bound)))
        radius = 1.0 - m.beta
        route = None
        nxt = None
        if cnorm < radius:
            nxt, route = extend(m, step), ROUTE_PATCH
        elif wnorm < radius:
            nxt, route = extend(m, step, shift=sigma), ROUTE_MIXED_SHIFT
        else:
            fm_ok, fm_a = _first_method_ok(m, step, sigma)
            if fm_ok and gap >= 0:
                beta = max(p.trail[k].beta, q.trail[k].beta)
                rec = Admission(norm=fm_a, radius=1.0, shift=sigma, beta=beta, route=ROUTE_FIRST_METHOD)
                nxt, route = _append(m, step, rec), ROUTE_FIRST_METHOD
        levels.append(
            LevelCheck(
                lam=lam,
                level=k + 1,
                a1=r1.norm,
                a2=r2.norm,
                witness_a=a,
                mixed_shift=sigma,
                witness_norm=wnorm,
                witness_holds=wnorm <= a * (1 + slack) + slack,
                canonical_norm=cnorm,
                radius=radius,
                convexity_gap=gap,
                route=route,
            )
        )
        if nxt is None:
            return MixResult(point=None, levels=levels)
        m = nxt
    return MixResult(point=m, levels=levels)


def mix_chains(p: ManifoldPoint, q: ManifoldPoint, lam: float) -> MixResult:
    """Mix two chains level by level and re-admit every mixed step.

    Raises :class:`ConvexityFalsified` if any level cannot be admitted or its
    max-witness evidence fails.
    """
    res = _mix(p, q, lam)
    if not res.ok:
        bad = next(lv for lv in res.levels if not lv.ok)
        raise ConvexityFalsified(f"mixture at lambda={lam} failed at level {bad.level}", res.levels)
    return res


@dataclass
class ConvexityReport:
    results: dict[float, MixResult]
    endpoint_distance: float
    routes: dict[str, int]

    @property
    def falsifications(self) -> list[LevelCheck]:
        out = []
        for r in self.results.values():
            out.extend(lv for lv in r.levels if not lv.ok)
            if r.point is None and all(lv.ok for lv in r.levels):
                out.append(r.levels[-1])
        return out

    @property
    def holds(self) -> bool:
        return all(r.ok for r in self.results.values()) and self.endpoint_distance <= PATH_STATE_TOL


def plus_convexity_check(
    p: ManifoldPoint, q: ManifoldPoint, lambdas: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0)
) -> ConvexityReport:
    """Verify that every (+1)-mixture of two chains stays in the manifold.

    For each level the mixed step is tested against the max-witness
    ``a = max(a1, a2)`` at the mixed shift ``lam s1 + (1-lam) s2``, the
    convexity of ``log Tr exp`` is checked for both signs, and the step is
    admitted by the first route that accepts it: the minimal-shift patch, the
    mixed-shift patch, or (when the temperature threshold is too tight) the
    trace-class criterion.
    """
    results = {}
    routes = {ROUTE_PATCH: 0, ROUTE_MIXED_SHIFT: 0, ROUTE_FIRST_METHOD: 0}
    endpoint = 0.0
    for lam in lambdas:
        r = _mix(p, q, float(lam))
        results[float(lam)] = r
        for lv in r.levels:
            if lv.route:
                routes[lv.route] += 1
        if r.point is not None and lam in (0.0, 1.0):
            ref = p if lam == 1.0 else q
            d = float(np.linalg.norm(r.point.state.rho.entries - ref.state.rho.entries))
            endpoint = max(endpoint, d)
    return ConvexityReport(results=results, endpoint_distance=endpoint, routes=routes)
