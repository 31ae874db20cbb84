import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bkm_manifold import HermitianOperator, build_model, center, entropy, gibbs_state, regularized_mean
from bkm_manifold.gibbs import is_centered
from bkm_manifold.perturbation import relative_norm
from bkm_manifold.sampling import case_rng, random_hermitian, random_perturbation
from scipy.linalg import expm


def test_flat_hamiltonian():
    st_ = gibbs_state(HermitianOperator.diag([0.0, 0.0]))
    assert np.allclose(st_.rho.entries, np.eye(2) / 2)
    assert st_.z == pytest.approx(2.0)
    assert st_.psi == pytest.approx(math.log(2))


def test_diagonal_state():
    st_ = gibbs_state(HermitianOperator.diag([1.0, 2.0, 3.0]))
    z = sum(math.exp(-n) for n in (1, 2, 3))
    assert st_.z == pytest.approx(z, rel=1e-14)
    assert np.allclose(np.diag(st_.rho.entries).real, [math.exp(-n) / z for n in (1, 2, 3)], rtol=1e-14)


def test_state_matches_matrix_exponential(rng):
    h = build_model("harmonic_oscillator", 6).h0 + random_perturbation(rng, build_model("harmonic_oscillator", 6).h0, 0.6)
    st_ = gibbs_state(h)
    direct = expm(-h.entries)
    direct /= np.trace(direct).real
    assert np.linalg.norm(st_.rho.entries - direct) <= 1e-10 * np.linalg.norm(direct)
    assert np.trace(st_.rho.entries).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(st_.rho.entries)[0] > 0


@pytest.mark.parametrize("alpha", [-5.0, 3.7])
def test_gauge_shift(rng, alpha):
    h = random_hermitian(rng, 5)
    a = gibbs_state(h).rho.entries
    b = gibbs_state(h + alpha * HermitianOperator.identity(5)).rho.entries
    assert np.linalg.norm(a - b) <= 1e-12


def test_injective_up_to_gauge(rng):
    for _ in range(20):
        x, y = random_hermitian(rng, 4), random_hermitian(rng, 4)
        d = np.linalg.norm(gibbs_state(x).rho.entries - gibbs_state(y).rho.entries)
        assert d > 1e-12


def test_huge_spectrum_does_not_overflow():
    st_ = gibbs_state(HermitianOperator.diag([-800.0, -799.0]))
    assert math.isinf(st_.z)
    assert st_.psi == pytest.approx(800 + math.log(1 + math.exp(-1)), rel=1e-15)
    assert np.trace(st_.rho.entries).real == pytest.approx(1.0)


def test_mean_of_identity(rng):
    st_ = gibbs_state(random_hermitian(rng, 4))
    for lam in (0.1, 0.5, 0.9):
        assert regularized_mean(st_, HermitianOperator.identity(4), lam) == pytest.approx(1.0, abs=1e-13)


def test_commuting_mean():
    p = 0.3
    st_ = gibbs_state(HermitianOperator.diag([-math.log(p), -math.log(1 - p)]))
    assert regularized_mean(st_, HermitianOperator.diag([2.0, -1.0]), 0.3) == pytest.approx(p * 2 - (1 - p), abs=1e-14)


def test_mean_lambda_independent_random_6(rng):
    st_ = gibbs_state(random_hermitian(rng, 6))
    x = random_hermitian(rng, 6)
    oracle = np.trace(st_.rho.entries @ x.entries).real
    for lam in (0.1, 0.5, 0.9):
        assert abs(regularized_mean(st_, x, lam) - oracle) < 1e-12


def test_mean_rejects_bad_lambda(rng):
    st_ = gibbs_state(random_hermitian(rng, 2))
    for lam in (0.0, 1.0, 1.5):
        with pytest.raises(ValueError):
            regularized_mean(st_, HermitianOperator.identity(2), lam)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([2, 3, 6]), l1=st.floats(0.01, 0.99), l2=st.floats(0.01, 0.99))
def test_mean_continuity_bound(seed, dim, l1, l2):
    rng = case_rng(seed, 3)
    m = build_model("harmonic_oscillator", dim)
    st_ = gibbs_state(m.h0 + random_perturbation(rng, m.h0, 0.5))
    x = random_hermitian(rng, dim)
    m1, m2 = regularized_mean(st_, x, l1), regularized_mean(st_, x, l2)
    assert abs(m1 - m2) < 1e-12
    c = regularized_mean(st_, st_.hamiltonian)
    assert abs(m1) <= relative_norm(x, st_.hamiltonian) * c * (1 + 1e-12)


def test_center_scalar():
    st_ = gibbs_state(HermitianOperator.diag([1.0, 2.0]))
    v = center(st_, 3.0 * HermitianOperator.identity(2))
    assert np.allclose(v.centered.entries, 0, atol=1e-15)
    assert v.mean == pytest.approx(3.0)


def test_center_idempotent(rng):
    st_ = gibbs_state(random_hermitian(rng, 4))
    v = center(st_, random_hermitian(rng, 4))
    w = center(st_, v.centered)
    assert abs(w.mean) < 1e-14
    assert np.max(np.abs(w.centered.entries - v.centered.entries)) < 1e-14


def test_centered_has_zero_mean(rng):
    st_ = gibbs_state(random_hermitian(rng, 5))
    v = center(st_, random_hermitian(rng, 5))
    assert abs(regularized_mean(st_, v.centered, 0.5)) < 1e-11
    assert is_centered(st_, v.centered)


def test_base_state_centered_mean_is_zero():
    m = build_model("dirichlet_box", 5)
    st_ = gibbs_state(m.h0)
    v = center(st_, m.h0 * 2.5)
    assert abs(regularized_mean(st_, v.centered)) < 1e-11


@pytest.mark.parametrize("d", [1, 2, 7, 32])
def test_maximally_mixed_entropy(d):
    assert abs(entropy(gibbs_state(HermitianOperator.zeros(d))) - math.log(d)) <= 1e-12


def test_rank_deficient_limit():
    st_ = gibbs_state(HermitianOperator.diag([0.0, 1000.0]))
    assert st_.underflow
    assert entropy(st_) == 0.0


def test_entropy_identity_diag123():
    st_ = gibbs_state(HermitianOperator.diag([1.0, 2.0, 3.0]))
    p = np.exp(-np.arange(1, 4)) / np.sum(np.exp(-np.arange(1, 4)))
    s_direct = float(-np.sum(p * np.log(p)))
    assert entropy(st_) == pytest.approx(s_direct, abs=1e-12)
    assert abs(entropy(st_) - (regularized_mean(st_, st_.hamiltonian) + st_.psi)) < 1e-12
