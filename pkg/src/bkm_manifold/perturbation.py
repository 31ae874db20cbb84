"""Relative form bounds, the form sum, and the eigenvalue/trace sandwich.

A perturbation ``X`` of ``H`` is measured by ``||H^-1/2 X H^-1/2||``.  In
finite dimension this one number is a complete form bound with ``b = 0``:
``|<psi, X psi>| <= ||X||_H <psi, H psi>`` for every vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import HermitianOperator, ModelHamiltonian, as_operator

SANDWICH_SLACK = 1e-10
WITNESS_SLACK = 1e-10


class NotPositiveError(ValueError):
    """Reference operator is not positive definite."""


class InvalidWitnessError(ValueError):
    """A proposed (a, b) pair is not a form bound for the perturbation."""

    def __init__(self, message: str, margin: float):
        super().__init__(message)
        self.margin = margin


@dataclass(frozen=True, eq=False)
class Perturbation:
    x: HermitianOperator
    base: ModelHamiltonian

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", as_operator(self.x))
        if self.x.dim != self.base.dim:
            raise ValueError(f"perturbation dim {self.x.dim} != model dim {self.base.dim}")


@dataclass(frozen=True)
class RelativeBound:
    a: float
    b: float = 0.0

    def __post_init__(self) -> None:
        if self.a < 0 or self.b < 0:
            raise ValueError(f"form bound needs a, b >= 0, got ({self.a}, {self.b})")


def _sandwiched(x: HermitianOperator, h: HermitianOperator) -> np.ndarray:
    """Matrix of H^-1/2 X H^-1/2 expressed in the eigenbasis of H."""
    sd = h.spectrum
    if sd.eigenvalues[0] <= 0:
        raise NotPositiveError(f"reference operator has eigenvalue {sd.eigenvalues[0]!r} <= 0")
    u = sd.eigenvectors
    s = 1.0 / np.sqrt(sd.eigenvalues)
    xe = u.conj().T @ x.entries @ u
    m = s[:, None] * xe * s[None, :]
    return (m + m.conj().T) / 2


def relative_norm(x, h) -> float:
    """``||H^-1/2 X H^-1/2||`` (operator norm) for positive definite ``h``."""
    x, h = as_operator(x), as_operator(h)
    if x.dim != h.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {h.dim}")
    return float(np.max(np.abs(np.linalg.eigvalsh(_sandwiched(x, h)))))


def maximizing_direction(x, h) -> np.ndarray:
    """Unit vector psi attaining ``|<psi,X psi>| = ||X||_H <psi,H psi>``."""
    x, h = as_operator(x), as_operator(h)
    w, v = np.linalg.eigh(_sandwiched(x, h))
    top = v[:, int(np.argmax(np.abs(w)))]
    sd = h.spectrum
    psi = sd.eigenvectors @ (top / np.sqrt(sd.eigenvalues))
    return psi / np.linalg.norm(psi)


def canonical_bound(x: Perturbation) -> RelativeBound:
    return RelativeBound(relative_norm(x.x, x.base.h0), 0.0)


def is_small(x: Perturbation, threshold: float | None = None) -> bool:
    """Strict test ``||X||_0 < threshold`` (default ``1 - beta0``)."""
    if threshold is None:
        threshold = 1.0 - x.base.beta0
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")
    return relative_norm(x.x, x.base.h0) < threshold


def klmn(x: Perturbation) -> HermitianOperator:
    """The operator of the form sum ``q0 + X``; here simply ``H0 + X``."""
    return x.base.h0 + x.x


def witness_margin(x: Perturbation, bound: RelativeBound) -> float:
    """Smallest eigenvalue of ``a H0 + b I -/+ X``, scaled by ``a||H0|| + b``.

    Non-negative exactly when ``(a, b)`` is a form bound for ``X``.  Checking
    the two semidefinite conditions is exhaustive in finite dimension.
    """
    h0 = x.base.h0.entries
    ab = bound.a * h0 + bound.b * np.eye(x.base.dim)
    lo = min(
        float(np.linalg.eigvalsh(ab - x.x.entries)[0]),
        float(np.linalg.eigvalsh(ab + x.x.entries)[0]),
    )
    scale = bound.a * float(x.base.h0.spectrum.eigenvalues[-1]) + bound.b
    return lo / max(scale, 1.0)


def validate_witness(x: Perturbation, bound: RelativeBound, slack: float = WITNESS_SLACK) -> None:
    margin = witness_margin(x, bound)
    if margin < -slack:
        raise InvalidWitnessError(
            f"(a, b) = ({bound.a}, {bound.b}) is not a form bound for X (margin {margin:.3e})",
            margin,
        )


@dataclass(frozen=True)
class SandwichReport:
    lower: np.ndarray
    observed: np.ndarray
    upper: np.ndarray
    bound: RelativeBound
    slack: float

    @property
    def lower_ok(self) -> np.ndarray:
        return self.observed >= self.lower - self.slack * np.maximum(1.0, np.abs(self.lower))

    @property
    def upper_ok(self) -> np.ndarray:
        return self.observed <= self.upper + self.slack * np.maximum(1.0, np.abs(self.upper))

    @property
    def holds(self) -> bool:
        return bool(np.all(self.lower_ok) and np.all(self.upper_ok))


def eigenvalue_sandwich(
    x: Perturbation, bound: RelativeBound | None = None, slack: float = SANDWICH_SLACK
) -> SandwichReport:
    """Compare ordered eigenvalues of ``H_X`` with ``-b + (1-a)l_n``, ``b + (1+a)l_n``."""
    if bound is None:
        bound = canonical_bound(x)
    else:
        validate_witness(x, bound)
    lam0 = np.asarray(x.base.h0.spectrum.eigenvalues)
    observed = np.linalg.eigvalsh(klmn(x).entries)
    return SandwichReport(
        lower=-bound.b + (1 - bound.a) * lam0,
        observed=observed,
        upper=bound.b + (1 + bound.a) * lam0,
        bound=bound,
        slack=slack,
    )


@dataclass(frozen=True)
class TraceBoundReport:
    beta: float
    upper: float
    middle: float
    lower: float
    upper_holds: bool
    lower_holds: bool

    @property
    def holds(self) -> bool:
        return self.upper_holds and self.lower_holds


def trace_bound_check(
    x: Perturbation, beta: float, bound: RelativeBound | None = None, slack: float = SANDWICH_SLACK
) -> TraceBoundReport:
    """``e^{b beta} Tr e^{-(1-a) beta H0} >= Tr e^{-beta H_X} >= e^{-b beta} Tr e^{-(1+a) beta H0}``."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if bound is None:
        bound = canonical_bound(x)
    else:
        validate_witness(x, bound)
    a, b = bound.a, bound.b
    lam0 = np.asarray(x.base.h0.spectrum.eigenvalues)
    lamx = np.linalg.eigvalsh(klmn(x).entries)
    upper = float(np.exp(b * beta) * np.sum(np.exp(-(1 - a) * beta * lam0)))
    middle = float(np.sum(np.exp(-beta * lamx)))
    lower = float(np.exp(-b * beta) * np.sum(np.exp(-(1 + a) * beta * lam0)))
    return TraceBoundReport(
        beta=beta,
        upper=upper,
        middle=middle,
        lower=lower,
        upper_holds=middle <= upper * (1 + slack),
        lower_holds=middle >= lower * (1 - slack),
    )
