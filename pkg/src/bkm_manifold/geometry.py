"""BKM metric, the trace-level Duhamel identity, (+1)-mixtures and transport."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .gibbs import GibbsState, NotCenteredError, TangentVector, center, is_centered
from .operators import HermitianOperator, ModelHamiltonian, as_operator, log_trace_exp
from .quadrature import DEFAULT_NODES, gauss_legendre_unit, integrate_unit

SWITCH_EPS = 1e-7
GRAM_RANK_RTOL = 1e-12

Direction = Union[TangentVector, HermitianOperator]


class RankDeficientError(np.linalg.LinAlgError):
    def __init__(self, message: str, null_combination: np.ndarray, gram: np.ndarray):
        super().__init__(message)
        self.null_combination = null_combination
        self.gram = gram


def _phi_series(d: np.ndarray) -> np.ndarray:
    """(e^d - 1)/d near d = 0; truncation error below d^4/120."""
    return 1 + d / 2 + d**2 / 6 + d**3 / 24


@dataclass(frozen=True, eq=False)
class BkmKernel:
    """Divided differences of ``exp(-e)`` over the spectrum of ``H + Psi``.

    ``kernel[i, j] = integral_0^1 p_i^s p_j^(1-s) ds`` with ``p = exp(-e)``.
    """

    eigenvalues: np.ndarray
    kernel: np.ndarray
    switch_eps: float


def bkm_kernel(state: GibbsState, switch_eps: float = SWITCH_EPS) -> BkmKernel:
    e = -np.asarray(state.log_weights)
    ei, ej = e[:, None], e[None, :]
    gap = np.abs(ei - ej)
    lo = np.minimum(ei, ej)
    pmax = np.exp(-lo)
    near = gap <= switch_eps * np.maximum(1.0, np.abs(ei))
    with np.errstate(divide="ignore", invalid="ignore"):
        # (e^{-e_j} - e^{-e_i})/(e_i - e_j) written as e^{-min} (1 - e^{-gap})/gap
        exact = pmax * (-np.expm1(-gap)) / gap
    series = pmax * _phi_series(-gap)
    k = np.where(near, series, exact)
    k = (k + k.T) / 2
    return BkmKernel(eigenvalues=e, kernel=k, switch_eps=switch_eps)


def _eigenbasis(state: GibbsState, v: Direction) -> np.ndarray:
    """Matrix of a tangent direction in the eigenbasis of the state."""
    if isinstance(v, TangentVector):
        m = v.centered
        if m.dim != state.dim:
            raise ValueError(f"dimension mismatch: {m.dim} vs {state.dim}")
        if not is_centered(state, m):
            raise NotCenteredError("tangent vector is not centered at this state")
    else:
        m = as_operator(v)
        if m.dim != state.dim:
            raise ValueError(f"dimension mismatch: {m.dim} vs {state.dim}")
        # multiples of I are allowed: g(Y, I) is the regularized mean of Y
        if not m.is_scalar() and not is_centered(state, m):
            raise NotCenteredError("operator is neither centered nor a multiple of I")
    u = state.hamiltonian.spectrum.eigenvectors
    return u.conj().T @ m.entries @ u


def bkm(state: GibbsState, y: Direction, x: Direction, kernel: BkmKernel | None = None) -> float:
    """BKM inner product ``Tr int_0^1 rho^s Y rho^(1-s) X ds`` via the kernel."""
    k = (kernel or bkm_kernel(state)).kernel
    ye, xe = _eigenbasis(state, y), _eigenbasis(state, x)
    return float(np.sum(k * ye * xe.T).real)


def bkm_quadrature(state: GibbsState, y: Direction, x: Direction, nodes: int = DEFAULT_NODES) -> float:
    """Same inner product by Gauss-Legendre quadrature over powers of rho.

    Powers are taken from a fresh eigendecomposition of ``rho`` itself, so
    this path shares nothing with the kernel formula beyond the state.
    """
    yv = y.centered if isinstance(y, TangentVector) else as_operator(y)
    xv = x.centered if isinstance(x, TangentVector) else as_operator(x)
    w, u = np.linalg.eigh(state.rho.entries)
    w = np.clip(w, 0.0, None)
    ye = u.conj().T @ yv.entries @ u
    xe = u.conj().T @ xv.entries @ u
    s, _ = gauss_legendre_unit(nodes)
    vals = []
    for t in s:
        a = w**t
        b = w ** (1.0 - t)
        # Tr(rho^t Y rho^(1-t) X) in rho's eigenbasis
        vals.append(np.sum(a[:, None] * ye * b[None, :] * xe.T).real)
    return integrate_unit(np.array(vals), nodes)


def bkm_gram(state: GibbsState, basis: Sequence[Direction], check_rank: bool = True) -> np.ndarray:
    """Gram matrix of the BKM metric on ``basis``.

    With ``check_rank`` a (numerically) singular Gram matrix raises
    :class:`RankDeficientError` carrying the null combination.
    """
    n = len(basis)
    if n == 0:
        return np.zeros((0, 0))
    k = bkm_kernel(state).kernel
    mats = [_eigenbasis(state, v) for v in basis]
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = g[j, i] = np.sum(k * mats[i] * mats[j].T).real
    if check_rank:
        w, v = np.linalg.eigh(g)
        if w[0] <= GRAM_RANK_RTOL * max(1.0, abs(w[-1])):
            raise RankDeficientError(
                f"BKM Gram matrix is singular (min eigenvalue {w[0]:.3e})", v[:, 0], g
            )
    return g


@dataclass(frozen=True)
class DuhamelReport:
    lhs: float
    rhs: float
    residual: float
    nodes: int

    @property
    def relative_residual(self) -> float:
        return self.residual / max(abs(self.lhs), 1e-300)


def duhamel_samples(h, x, nodes: int = DEFAULT_NODES) -> tuple[float, np.ndarray]:
    """Trace difference ``Tr e^{-H} - Tr e^{-(H+X)}`` and the Duhamel integrand
    ``Tr(e^{-s H} X e^{-(1-s)(H+X)})`` at the Gauss-Legendre nodes."""
    h, x = as_operator(h), as_operator(x)
    hx = h + x
    e0, u0 = h.spectrum.eigenvalues, h.spectrum.eigenvectors
    ex, ux = hx.spectrum.eigenvalues, hx.spectrum.eigenvectors
    diff = float(np.sum(np.exp(-e0)) - np.sum(np.exp(-ex)))
    ab = (u0.conj().T @ x.entries @ ux) * (ux.conj().T @ u0).T
    s, _ = gauss_legendre_unit(nodes)
    vals = np.array(
        [np.sum(np.exp(-t * e0)[:, None] * ab * np.exp(-(1 - t) * ex)[None, :]).real for t in s]
    )
    return diff, vals


def duhamel_check(base: ModelHamiltonian, x, nodes: int = DEFAULT_NODES) -> DuhamelReport:
    """``Tr e^{-H0} - Tr e^{-H_X}`` against ``int_0^1 Tr(e^{-s H0} X e^{-(1-s) H_X}) ds``."""
    if nodes < 2:
        raise ValueError(f"need at least 2 quadrature nodes, got {nodes}")
    lhs, vals = duhamel_samples(base.h0, x, nodes)
    rhs = integrate_unit(vals, nodes)
    return DuhamelReport(lhs=lhs, rhs=rhs, residual=abs(lhs - rhs), nodes=nodes)


@dataclass(frozen=True)
class HessianEstimate:
    value: float
    coarse: float
    fine: float
    steps: tuple[float, float]


def _second_differences_extended(h: np.ndarray, x: np.ndarray, steps: Sequence[float], dps: int) -> list[float]:
    import mpmath

    with mpmath.workdps(dps):
        hm, xm = mpmath.matrix(h.tolist()), mpmath.matrix(x.tolist())

        def lte(t):
            e = mpmath.eigh(hm + mpmath.mpf(t) * xm, eigvals_only=True)
            e = [e[i] for i in range(h.shape[0])]
            lo = min(e)
            return -lo + mpmath.log(mpmath.fsum(mpmath.exp(lo - v) for v in e))

        psi0 = lte(0.0)
        return [float((lte(t) - 2 * psi0 + lte(-t)) / mpmath.mpf(t) ** 2) for t in steps]


def massieu_second_derivative(
    h, direction, steps: tuple[float, float] = (1e-3, 1e-4), dps: int | None = None
) -> HessianEstimate:
    """d^2/dt^2 log Tr exp(-(H + tX)) at t = 0, Richardson-extrapolated.

    In double precision the fine step is limited by eigensolver roundoff,
    about ``eps ||H|| / step**2`` in absolute terms.  With ``dps`` the
    log-traces and their differences are carried with that many decimal
    digits (via mpmath), starting from the same double-precision matrices.
    """
    h, direction = as_operator(h), as_operator(direction)
    h1, h2 = steps
    if dps is None:
        psi0 = log_trace_exp(h)

        def second_difference(step: float) -> float:
            up = log_trace_exp(h + step * direction)
            down = log_trace_exp(h - step * direction)
            return (up - 2 * psi0 + down) / step**2

        d1, d2 = second_difference(h1), second_difference(h2)
    else:
        d1, d2 = _second_differences_extended(h.entries, direction.entries, (h1, h2), dps)
    value = (h1**2 * d2 - h2**2 * d1) / (h1**2 - h2**2)
    return HessianEstimate(value=value, coarse=d1, fine=d2, steps=(h1, h2))


def plus_mix(p, q, lam: float):
    """(+1)-mixture of two manifold points: the state of ``lam X_p + (1-lam) X_q``."""
    from .atlas import mix_chains

    return mix_chains(p, q, lam).point


@dataclass(frozen=True, eq=False)
class TransportMap:
    source: GibbsState
    target: GibbsState

    def __post_init__(self) -> None:
        if self.source.dim != self.target.dim:
            raise ValueError("transport endpoints have different dimensions")

    def __call__(self, v: TangentVector) -> TangentVector:
        return transport(self, v)


def transport(tmap: TransportMap, v: TangentVector) -> TangentVector:
    """(+1)-parallel transport: re-center the same raw operator at the target."""
    if not is_centered(tmap.source, v.centered):
        raise NotCenteredError("vector is not centered at the transport source")
    return center(tmap.target, v.raw)
