"""Gibbs states, regularized means, centering and entropy."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .operators import HermitianOperator, as_operator

UNDERFLOW_FLOOR = 1e-300
IMAG_RESIDUE_TOL = 1e-12
CENTERED_TOL = 1e-10


class NotCenteredError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GibbsState:
    """``rho = exp(-H) / Z`` together with its spectral data.

    ``log_weights`` are ``log p_i`` for the eigenvalues of ``hamiltonian`` in
    ascending order; they are kept so that powers ``rho**s`` never pass
    through underflowed probabilities.
    """

    hamiltonian: HermitianOperator
    rho: HermitianOperator
    z: float
    psi: float
    log_weights: np.ndarray

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def underflow(self) -> bool:
        """Some eigenvalue of rho fell below the representable floor."""
        return bool(np.min(self.weights) < UNDERFLOW_FLOOR)

    def power(self, s: float) -> HermitianOperator:
        sd = self.hamiltonian.spectrum
        u = sd.eigenvectors
        return HermitianOperator._trusted((u * np.exp(s * self.log_weights)) @ u.conj().T)


def gibbs_state(h) -> GibbsState:
    """Normalized Gibbs state of ``h``; exponentials are shifted by the ground level."""
    h = as_operator(h)
    sd = h.spectrum
    e = np.asarray(sd.eigenvalues)
    psi = float(logsumexp(-e))
    logp = -e - psi
    try:
        z = math.exp(psi)
    except OverflowError:
        z = math.inf
    u = sd.eigenvectors
    rho = HermitianOperator._trusted((u * np.exp(logp)) @ u.conj().T)
    logp.flags.writeable = False
    return GibbsState(hamiltonian=h, rho=rho, z=z, psi=psi, log_weights=logp)


def regularized_mean(state: GibbsState, x, lam: float = 0.5) -> float:
    """``Tr(rho^lam X rho^(1-lam))``, formed literally as a matrix product."""
    x = as_operator(x)
    if x.dim != state.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {state.dim}")
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    t = np.trace(state.power(lam).entries @ x.entries @ state.power(1.0 - lam).entries)
    if abs(t.imag) > IMAG_RESIDUE_TOL * max(1.0, x.frobenius()):
        raise ArithmeticError(f"regularized mean has imaginary part {t.imag:.3e}; input not Hermitian?")
    return float(t.real)


@dataclass(frozen=True, eq=False)
class TangentVector:
    raw: HermitianOperator
    mean: float
    centered: HermitianOperator

    def __add__(self, other: "TangentVector") -> "TangentVector":
        return TangentVector(self.raw + other.raw, self.mean + other.mean, self.centered + other.centered)

    def __mul__(self, c: float) -> "TangentVector":
        return TangentVector(self.raw * c, self.mean * c, self.centered * c)

    __rmul__ = __mul__


def center(state: GibbsState, y) -> TangentVector:
    y = as_operator(y)
    m = regularized_mean(state, y)
    return TangentVector(raw=y, mean=m, centered=y - m * HermitianOperator.identity(y.dim))


def is_centered(state: GibbsState, y, tol: float = CENTERED_TOL) -> bool:
    y = as_operator(y)
    return abs(regularized_mean(state, y)) <= tol * max(1.0, y.frobenius())


def entropy(state: GibbsState) -> float:
    """Von Neumann entropy from the spectrum, with ``0 log 0 = 0``."""
    p = state.weights
    return float(-np.sum(np.where(p > 0, p * state.log_weights, 0.0)))
