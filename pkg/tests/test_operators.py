import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bkm_manifold import HermitianOperator, apply_function, build_model, schatten_norm, spectral
from bkm_manifold.operators import DomainError, ModelHamiltonian, log_trace_exp
from bkm_manifold.sampling import case_rng, random_hermitian


def test_rejects_non_hermitian():
    with pytest.raises(ValueError):
        HermitianOperator(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        HermitianOperator(np.ones((2, 3)))


def test_entries_are_read_only():
    a = HermitianOperator.diag([1.0, 2.0])
    with pytest.raises(ValueError):
        a.entries[0, 0] = 5.0


def test_identity_spectrum():
    sd = spectral(HermitianOperator.identity(3))
    assert np.allclose(sd.eigenvalues, 1.0)
    assert np.allclose(sd.eigenvectors, np.eye(3))


def test_diag_eigenvalues_ascending():
    sd = spectral(HermitianOperator.diag([2.0, 1.0]))
    assert list(sd.eigenvalues) == [1.0, 2.0]


def test_reconstruction_random_8(rng):
    a = random_hermitian(rng, 8)
    assert np.max(np.abs(spectral(a).reconstruct() - a.entries)) < 1e-10


def test_exp_of_zero_scalar():
    assert apply_function(HermitianOperator.diag([0.0]), np.exp).entries[0, 0] == 1.0


def test_sqrt_square_round_trip(rng):
    b = random_hermitian(rng, 6)
    pd = HermitianOperator(b.entries @ b.entries + np.eye(6))
    root = apply_function(pd, np.sqrt)
    assert np.max(np.abs(root.entries @ root.entries - pd.entries)) < 1e-10


def test_log_exp_round_trip(rng):
    a = random_hermitian(rng, 6)
    back = apply_function(apply_function(a, np.exp), np.log)
    assert np.max(np.abs(back.entries - a.entries)) < 1e-10


def test_domain_error_reports_eigenvalue():
    with pytest.raises(DomainError) as info:
        apply_function(HermitianOperator.diag([-2.0, 1.0]), np.sqrt)
    assert info.value.eigenvalue == -2.0


def test_schatten_norms():
    a = HermitianOperator.diag([3.0, -4.0])
    assert schatten_norm(a, 1) == 7.0
    assert schatten_norm(a, math.inf) == 4.0
    assert schatten_norm(a, 2) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        schatten_norm(a, 0.5)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 6), p=st.sampled_from([1.0, 1.5, 2.0, 3.0, math.inf]))
def test_schatten_norm_is_monotone_in_p_and_unitarily_invariant(seed, dim, p):
    rng = case_rng(seed, 0)
    a = random_hermitian(rng, dim)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    rotated = HermitianOperator(q @ a.entries @ q.conj().T)
    assert schatten_norm(rotated, p) == pytest.approx(schatten_norm(a, p), rel=1e-10)
    assert schatten_norm(a, p) <= schatten_norm(a, 1.0) * (1 + 1e-12)


def test_harmonic_oscillator_dim3():
    m = build_model("harmonic_oscillator", 3)
    assert np.allclose(m.h0.entries, np.diag([1.0, 2.0, 3.0]))
    z = math.exp(-1) + math.exp(-2) + math.exp(-3)
    assert m.z0 == pytest.approx(z, rel=1e-14)
    assert m.psi0 == pytest.approx(math.log(z), rel=1e-14)


@pytest.mark.parametrize("kind", ["harmonic_oscillator", "dirichlet_box"])
def test_single_level(kind):
    m = build_model(kind, 1)
    assert m.h0.entries[0, 0] == 1.0
    assert m.psi0 == pytest.approx(-1.0, abs=1e-15)


def test_dirichlet_box_dim4():
    m = build_model("dirichlet_box", 4, length=math.pi)
    assert np.allclose(m.h0.entries, np.diag([1.0, 4.0, 9.0, 16.0]))


def test_kind_aliases():
    assert build_model("harmonic", 2).kind == "harmonic_oscillator"
    assert build_model("box", 2).kind == "dirichlet_box"


@pytest.mark.parametrize("dim", [0, -3])
def test_invalid_dim(dim):
    with pytest.raises(ValueError):
        build_model("harmonic_oscillator", dim)


def test_beta0_range():
    build_model("harmonic_oscillator", 2, 0.99)
    for bad in (1.0, -0.1):
        with pytest.raises(ValueError):
            build_model("harmonic_oscillator", 2, bad)


def test_custom_needs_positive_matrix():
    m = HermitianOperator(np.array([[0.5, 0.1], [0.1, 3.0]]))
    with pytest.raises(ValueError):
        build_model("custom", 2, matrix=m)
    shifted = build_model("custom", 2, matrix=m, auto_shift=True)
    assert np.linalg.eigvalsh(shifted.h0.entries)[0] == pytest.approx(1.0, abs=1e-12)


def test_model_consistency_enforced():
    h0 = HermitianOperator.diag([1.0, 2.0])
    with pytest.raises(ValueError):
        ModelHamiltonian(h0=h0, beta0=0.0, z0=1.0, psi0=0.0)


def test_log_trace_exp_is_stable_for_large_spectra():
    a = HermitianOperator.diag([1000.0, 1001.0])
    assert log_trace_exp(a) == pytest.approx(-1000.0 + math.log(1 + math.exp(-1)), rel=1e-15)
    assert log_trace_exp(a, beta=2.0) == pytest.approx(-2000.0 + math.log(1 + math.exp(-2)), rel=1e-15)


def test_schatten_two_is_frobenius(rng):
    a = random_hermitian(rng, 7)
    assert schatten_norm(a, 2) ** 2 == pytest.approx(np.trace(a.entries.conj().T @ a.entries).real, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), pq=st.sampled_from([(1.0, math.inf), (2.0, 2.0), (3.0, 1.5)]))
def test_holder_inequality(seed, pq):
    rng = case_rng(seed, 6)
    a, b = random_hermitian(rng, 5), random_hermitian(rng, 5)
    p, q = pq
    assert schatten_norm(a @ b, 1) <= schatten_norm(a, p) * schatten_norm(b, q) * (1 + 1e-12)


@pytest.mark.parametrize("kind", ["harmonic_oscillator", "dirichlet_box"])
@pytest.mark.parametrize("dim", [1, 3, 9])
def test_built_models_satisfy_invariants(kind, dim):
    m = build_model(kind, dim, 0.4)
    assert np.linalg.eigvalsh(m.h0.entries)[0] >= 1 - 1e-12
    assert m.psi0 == pytest.approx(math.log(m.z0), rel=1e-14)
    assert 0 <= m.beta0 < 1
