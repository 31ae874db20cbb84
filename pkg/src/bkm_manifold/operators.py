"""Dense Hermitian linear algebra and model Hamiltonians.

Every form, perturbation and Hamiltonian in this package is a finite
Hermitian matrix wrapped in :class:`HermitianOperator`.  Spectral calculus
(:func:`apply_function`) is the single route to exponentials, powers and
logarithms, so that all quantities share one eigendecomposition convention:
eigenvalues ascending, eigenvectors as unitary columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

HERMITIAN_ATOL = 1e-12
RECONSTRUCTION_RTOL = 1e-10
MODEL_CONSISTENCY_RTOL = 1e-10

MODEL_KINDS = ("harmonic_oscillator", "dirichlet_box", "custom")
KIND_ALIASES = {
    "harmonic": "harmonic_oscillator",
    "ho": "harmonic_oscillator",
    "dirichlet": "dirichlet_box",
    "box": "dirichlet_box",
}


class SpectralError(np.linalg.LinAlgError):
    """Eigendecomposition failed; message carries matrix diagnostics."""


class DomainError(ValueError):
    """A scalar function is not finite on part of an operator's spectrum."""

    def __init__(self, message: str, eigenvalue: float):
        super().__init__(message)
        self.eigenvalue = eigenvalue


def _hermitize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Immutable dense Hermitian matrix.

    The constructor rejects input whose conjugate-symmetry defect exceeds
    ``HERMITIAN_ATOL`` and stores the exactly symmetrized matrix.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix has non-finite entries")
        defect = float(np.max(np.abs(a - a.conj().T)))
        if defect > HERMITIAN_ATOL:
            raise ValueError(f"matrix is not Hermitian (max |A - A*| = {defect:.3e})")
        a = _hermitize(a)
        a.flags.writeable = False
        object.__setattr__(self, "entries", a)

    @classmethod
    def _trusted(cls, a: np.ndarray) -> "HermitianOperator":
        # For results of our own spectral calculus: symmetrize, skip the check.
        obj = object.__new__(cls)
        a = _hermitize(np.asarray(a, dtype=complex))
        a.flags.writeable = False
        object.__setattr__(obj, "entries", a)
        return obj

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls._trusted(np.eye(dim))

    @classmethod
    def zeros(cls, dim: int) -> "HermitianOperator":
        return cls._trusted(np.zeros((dim, dim)))

    @classmethod
    def diag(cls, values: Sequence[float]) -> "HermitianOperator":
        return cls._trusted(np.diag(np.asarray(values, dtype=float)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def spectrum(self) -> "SpectralDecomposition":
        return spectral(self)

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.entries))

    def is_scalar(self, atol: float = 1e-12) -> bool:
        """True when the operator is a real multiple of the identity."""
        c = self.trace() / self.dim
        return float(np.max(np.abs(self.entries - c * np.eye(self.dim)))) <= atol * max(1.0, abs(c))

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)

    def __add__(self, other):
        if isinstance(other, HermitianOperator):
            return HermitianOperator._trusted(self.entries + other.entries)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, HermitianOperator):
            return HermitianOperator._trusted(self.entries - other.entries)
        return NotImplemented

    def __neg__(self):
        return HermitianOperator._trusted(-self.entries)

    def __mul__(self, c):
        if isinstance(c, (int, float, np.floating, np.integer)):
            return HermitianOperator._trusted(float(c) * self.entries)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, c):
        if isinstance(c, (int, float, np.floating, np.integer)):
            return HermitianOperator._trusted(self.entries / float(c))
        return NotImplemented

    def __matmul__(self, other) -> np.ndarray:
        # Products of Hermitian matrices are not Hermitian in general.
        return self.entries @ np.asarray(other)

    def __repr__(self) -> str:
        return f"HermitianOperator(dim={self.dim})"


def as_operator(a) -> HermitianOperator:
    if isinstance(a, HermitianOperator):
        return a
    x = getattr(a, "x", None)  # Perturbation
    if isinstance(x, HermitianOperator):
        return x
    return HermitianOperator(np.asarray(a))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        u = self.eigenvectors
        return (u * self.eigenvalues) @ u.conj().T


def spectral(a) -> SpectralDecomposition:
    """Eigendecomposition with ascending eigenvalues."""
    m = as_operator(a).entries
    try:
        e, u = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        fro = float(np.linalg.norm(m))
        try:
            cond = float(np.linalg.cond(m))
        except np.linalg.LinAlgError:
            cond = math.inf
        raise SpectralError(
            f"eigendecomposition did not converge (dim={m.shape[0]}, "
            f"frobenius={fro:.6e}, cond={cond:.6e}): {exc}"
        ) from exc
    order = np.argsort(e, kind="stable")
    e = e[order]
    u = u[:, order]
    e.flags.writeable = False
    u.flags.writeable = False
    return SpectralDecomposition(e, u)


def apply_function(a, f: Callable[[np.ndarray], np.ndarray]) -> HermitianOperator:
    """Return ``f(A) = U diag(f(e)) U*`` for a real scalar function ``f``.

    ``f`` is called once on the vector of eigenvalues.  If it produces a
    non-finite value anywhere, :class:`DomainError` names the first offending
    eigenvalue.
    """
    sd = as_operator(a).spectrum
    with np.errstate(all="ignore"):
        fe = np.asarray(f(sd.eigenvalues))
    if np.iscomplexobj(fe):
        if np.max(np.abs(fe.imag), initial=0.0) > 0:
            bad = int(np.argmax(np.abs(fe.imag) > 0))
            raise DomainError(
                f"function is complex at eigenvalue {sd.eigenvalues[bad]!r}",
                float(sd.eigenvalues[bad]),
            )
        fe = fe.real
    fe = fe.astype(float)
    finite = np.isfinite(fe)
    if not np.all(finite):
        bad = int(np.argmin(finite))
        raise DomainError(
            f"function is not finite at eigenvalue {sd.eigenvalues[bad]!r} "
            f"(index {bad} of {fe.size})",
            float(sd.eigenvalues[bad]),
        )
    u = sd.eigenvectors
    return HermitianOperator._trusted((u * fe) @ u.conj().T)


def schatten_norm(a, p: float = 1.0) -> float:
    """Schatten p-norm; ``p = math.inf`` gives the operator norm.

    Hermitian operators use |eigenvalues|; general square arrays (products
    like ``A @ B``) use singular values.
    """
    if isinstance(p, str):
        p = math.inf if p.lower() in ("inf", "infinity") else float(p)
    if not p >= 1:
        raise ValueError(f"Schatten norm needs p >= 1, got {p}")
    if isinstance(a, HermitianOperator):
        s = np.abs(a.spectrum.eigenvalues)
    else:
        s = np.linalg.svd(np.asarray(a, dtype=complex), compute_uv=False)
    if s.size == 0:
        return 0.0
    if math.isinf(p):
        return float(np.max(s))
    smax = float(np.max(s))
    if smax == 0.0:
        return 0.0
    # scaled to avoid overflow in s**p
    return smax * float(np.sum((s / smax) ** p)) ** (1.0 / p)


def log_trace_exp(a, beta: float = 1.0) -> float:
    """log Tr exp(-beta*A), overflow-safe."""
    e = as_operator(a).spectrum.eigenvalues
    return float(logsumexp(-beta * e))


@dataclass(frozen=True, eq=False)
class ModelHamiltonian:
    """Free Hamiltonian ``h0 >= I`` with its stability threshold ``beta0``."""

    h0: HermitianOperator
    beta0: float
    z0: float
    psi0: float
    kind: str = "custom"

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta0 < 1.0:
            raise ValueError(f"beta0 must lie in [0, 1), got {self.beta0}")
        emin = float(self.h0.spectrum.eigenvalues[0])
        if emin < 1.0 - 1e-12:
            raise ValueError(f"h0 must satisfy h0 >= I, smallest eigenvalue is {emin}")
        psi = log_trace_exp(self.h0)
        if abs(psi - self.psi0) > MODEL_CONSISTENCY_RTOL * max(1.0, abs(psi)):
            raise ValueError(f"psi0={self.psi0} inconsistent with log Tr exp(-h0)={psi}")
        if abs(math.exp(self.psi0) - self.z0) > MODEL_CONSISTENCY_RTOL * self.z0:
            raise ValueError(f"z0={self.z0} inconsistent with exp(psi0)")

    @classmethod
    def from_operator(cls, h0, beta0: float = 0.0, kind: str = "custom") -> "ModelHamiltonian":
        h0 = as_operator(h0)
        psi0 = log_trace_exp(h0)
        return cls(h0=h0, beta0=float(beta0), z0=math.exp(psi0), psi0=psi0, kind=kind)

    @property
    def dim(self) -> int:
        return self.h0.dim


def build_model(
    kind: str,
    dim: int,
    beta0: float = 0.0,
    *,
    length: float = math.pi,
    matrix=None,
    auto_shift: bool = False,
) -> ModelHamiltonian:
    """Build a truncated model Hamiltonian normalized so that ``h0 >= I``.

    ``harmonic_oscillator`` gives ``diag(1, ..., dim)`` (levels n + 1/2 moved
    up by 1/2).  ``dirichlet_box`` gives the box levels k^2 pi^2 / L^2 rescaled
    so the ground level is 1, i.e. ``diag(k^2)`` for any ``length``.
    ``custom`` takes ``matrix``; with ``auto_shift`` it is moved up by a
    multiple of the identity until its smallest eigenvalue is 1.
    """
    kind = KIND_ALIASES.get(kind, kind)
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise ValueError(f"dim must be a positive integer, got {dim!r}")
    k = np.arange(1, dim + 1, dtype=float)
    if kind == "harmonic_oscillator":
        h0 = HermitianOperator.diag(k)
    elif kind == "dirichlet_box":
        if not length > 0:
            raise ValueError("box length must be positive")
        levels = k**2 * math.pi**2 / length**2
        h0 = HermitianOperator.diag(levels / levels[0])
    else:
        if matrix is None:
            raise ValueError("custom model needs a matrix")
        h0 = as_operator(matrix)
        if h0.dim != dim:
            raise ValueError(f"matrix has dim {h0.dim}, expected {dim}")
        emin = float(h0.spectrum.eigenvalues[0])
        if emin < 1.0 - 1e-12:
            if not auto_shift:
                raise ValueError(
                    f"custom h0 has smallest eigenvalue {emin} < 1; pass auto_shift=True to renormalize"
                )
            h0 = h0 + (1.0 - emin) * HermitianOperator.identity(dim)
    return ModelHamiltonian.from_operator(h0, beta0=beta0, kind=kind)
