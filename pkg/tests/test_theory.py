import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prunebench import theory
from prunebench.errors import DomainError, EmptyNetworkError
from prunebench.numerics import Rng
from prunebench.theory import ModelConfig, RandomFeatureModel


def ball_model(**kw):
    cfg = dict(n_terms=20, dim=5, alpha=1.0, beta=2.0, delta=1.0, spread=0.2, seed=0)
    cfg.update(kw)
    return theory.build_model(ModelConfig(**cfg))


def sphere_model(**kw):
    cfg = dict(n_terms=20, dim=64, alpha=0.5, beta=1.5, delta=1.0, mode="uniform_sphere", seed=0)
    cfg.update(kw)
    return theory.build_model(ModelConfig(**cfg))


def hand_model(a, phi, delta=1.0, mode="orthonormal"):
    a = np.asarray(a, dtype=float)
    return RandomFeatureModel(a, np.asarray(phi, dtype=float), a.min(), a.max(), delta,
                              np.zeros(len(phi[0])), mode)


# -- build_model ------------------------------------------------------------------

def test_fully_concentrated_model():
    m = ball_model(alpha=1.3, beta=1.3, spread=0.0)
    assert np.all(m.a == 1.3)
    assert np.all(m.phi == m.phi[0])
    assert np.array_equal(m.mu_phi, m.phi[0])


def test_sphere_model_norms():
    m = sphere_model(delta=2.5, n_terms=50)
    assert np.all(np.abs(np.linalg.norm(m.phi, axis=1) - 2.5) <= 1e-12 * 2.5)
    assert np.array_equal(m.mu_phi, np.zeros(64))


def test_ball_model_spread_bound():
    m = ball_model(spread=0.15, n_terms=200)
    stats = theory.concentration_stats(m)
    # true mean is the center: the sampled max deviation cannot exceed the spread
    assert stats.delta_phi <= 0.15
    assert np.all(np.linalg.norm(m.phi, axis=1) <= 1.0 * (1 + 1e-12))
    assert np.all((m.a >= 1.0) & (m.a <= 2.0))
    assert stats.delta_phi_empirical <= 0.15 + np.linalg.norm(m.phi.mean(axis=0) - m.mu_phi)


def test_build_model_preconditions():
    with pytest.raises(DomainError):
        ball_model(alpha=0.0)
    with pytest.raises(DomainError):
        ball_model(alpha=2.0, beta=1.0)
    with pytest.raises(DomainError):
        ball_model(spread=1.5)
    with pytest.raises(DomainError):
        ball_model(center=np.array([0.95, 0, 0, 0, 0]), spread=0.1)


# -- combined / pruning_errors ------------------------------------------------------

def test_combined_hand_example():
    m = hand_model([1.0, 2.0], [[1.0, 0.0], [0.0, 1.0]])
    assert np.array_equal(theory.combined(m, [0, 1], 3.0), [3.0, 6.0])
    assert np.array_equal(theory.combined(m, []), [0.0, 0.0])
    with pytest.raises(DomainError):
        theory.combined(m, [2])


def test_combined_all_is_phi():
    m = ball_model()
    np.testing.assert_allclose(theory.combined(m, range(m.n_terms)),
                               sum(a * p for a, p in zip(m.a, m.phi)), rtol=1e-14)


def test_no_pruning_no_error():
    assert theory.pruning_errors(ball_model(), []) == (0.0, 0.0)


def test_full_concentration_renormalization_is_exact():
    m = ball_model(alpha=1.7, beta=1.7, spread=0.0, n_terms=30)
    for P in ([0], [1, 5, 7], list(range(20))):
        err_std, err_ren = theory.pruning_errors(m, P)
        assert err_ren <= 1e-12 * np.linalg.norm(theory.combined(m, range(30)))
        assert err_std == pytest.approx(len(P) * 1.7 * np.linalg.norm(m.phi[0]), rel=1e-12)
        assert err_std > 0


def test_orthonormal_standard_error_hand_value():
    m = theory.orthonormal_model([1.0, 1.0, 1.0, 1.0], 1.0)
    err_std, _ = theory.pruning_errors(m, [0, 1])
    assert err_std ** 2 == pytest.approx(2.0, rel=1e-15)


def test_prune_everything_is_empty_network():
    m = ball_model(n_terms=3)
    with pytest.raises(EmptyNetworkError):
        theory.pruning_errors(m, [0, 1, 2])


# -- upper bound --------------------------------------------------------------------

def test_thm1_bound_hand_value():
    assert theory.thm1_bound_value(1.0, 2.0, 1.0, 0.1, 3) == pytest.approx(10.2, rel=1e-15)
    assert theory.thm1_intermediate_value(1.0, 2.0, 1.0, 0.1, 3) == pytest.approx(10.2, rel=1e-15)


def test_thm1_bound_vanishes():
    m = ball_model()
    assert theory.thm1_bound(m, 0) == (0.0, 0.0)
    conc = ball_model(alpha=1.2, beta=1.2, spread=0.0)
    assert theory.thm1_bound(conc, 5) == (0.0, 0.0)


def test_thm1_bound_rejects_m_equal_n():
    with pytest.raises(DomainError):
        theory.thm1_bound(ball_model(n_terms=4), 4)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 40), st.integers(1, 12),
       st.floats(0.05, 3.0), st.floats(0.0, 3.0), st.floats(0.1, 3.0), st.floats(0.0, 1.0))
def test_thm1_dominance_property(seed, n, d, alpha, xi, delta, spread_frac):
    m = theory.build_model(ModelConfig(n, d, alpha, alpha + xi, delta, spread=spread_frac * delta,
                                       seed=seed))
    P = theory.choose_pruned(m, int(Rng(seed).integers(1, n)), "random", Rng(seed))
    rep = theory.bound_report(m, P)
    assert rep.thm1_holds and rep.thm1_intermediate_holds


# -- lower bound ---------------------------------------------------------------------

def test_thm2_orthonormal_equality():
    m = theory.orthonormal_model(np.ones(6), 1.0)
    P = [0, 2, 5]
    lower, eps = theory.thm2_lower_bound(m, P)
    assert eps == 0.0 and lower == 3.0
    assert theory.pruning_errors(m, P)[0] ** 2 == pytest.approx(3.0, rel=1e-15)


def test_thm2_unit_coefficients_substitution():
    m = sphere_model(alpha=1.0, beta=1.0, n_terms=10)
    P = [1, 3, 4, 8]
    lower, eps = theory.thm2_lower_bound(m, P)
    assert lower == pytest.approx(4 - eps * 16, rel=1e-12)


def test_thm2_single_term():
    m = sphere_model(delta=1.7)
    lower, eps = theory.thm2_lower_bound(m, [4])
    assert eps == 0.0
    assert lower == pytest.approx(1.7 ** 2 * m.a[4] ** 2, rel=1e-15)


def test_thm2_rejects_empty_set_and_ball_mode():
    with pytest.raises(DomainError):
        theory.thm2_lower_bound(sphere_model(), [])
    with pytest.raises(DomainError):
        theory.thm2_lower_bound(ball_model(), [0, 1])


def test_coherence_measured_inside_pruned_set():
    phi = np.array([[1.0, 0.0], [0.6, 0.8], [0.0, 1.0]])
    m = hand_model([1.0, 1.0, 1.0], phi, mode="uniform_sphere")
    stats = theory.concentration_stats(m, [0, 2])
    assert stats.coherence_eps == 0.0
    assert stats.coherence_eps_global == pytest.approx(0.8)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(2, 40), st.sampled_from([8, 64, 256]),
       st.floats(0.1, 3.0))
def test_thm2_dominance_property(seed, n, d, delta):
    m = sphere_model(n_terms=n, dim=d, delta=delta, seed=seed)
    P = theory.choose_pruned(m, int(Rng(seed).integers(1, n)), "random", Rng(seed))
    assert theory.bound_report(m, P).thm2_holds


def test_scale_invariance():
    m = ball_model(n_terms=25, dim=7, seed=4)
    c = 3.7
    scaled = RandomFeatureModel(c * m.a, m.phi / c, c * m.alpha, c * m.beta, m.delta / c,
                                m.mu_phi / c, m.mode)
    P = [0, 3, 9, 11]
    for x, y in zip(theory.pruning_errors(m, P), theory.pruning_errors(scaled, P)):
        assert y == pytest.approx(x, rel=1e-12)


# -- coherence report ------------------------------------------------------------------

def test_coherence_report_orthonormal():
    m = theory.orthonormal_model(np.ones(8), 1.0, Rng(0))
    rep = theory.coherence_report(m, 1e-6)
    assert rep.violating_pairs == 0 and rep.n_pairs == 28 and rep.empirical_prob == 1.0


def test_coherence_low_dimension_does_not_concentrate():
    rep = theory.coherence_report(sphere_model(n_terms=100, dim=2, seed=1), 0.1)
    # in 2D |cos| of a uniform angle is < 0.1 with probability ~0.064
    assert rep.violating_pairs / rep.n_pairs > 0.8
    assert rep.empirical_prob == 1 - rep.violating_pairs / rep.n_pairs


def test_coherence_high_dimension_concentrates():
    rep = theory.coherence_report(sphere_model(n_terms=64, dim=2048, seed=1), 0.2)
    assert rep.violating_pairs == 0 and rep.n_pairs == 64 * 63 // 2


# -- pruning strategies / harness ---------------------------------------------------------

def test_choose_smallest_a():
    m = hand_model([0.5, 0.2, 0.9, 0.2], np.eye(4))
    assert list(theory.choose_pruned(m, 2, "smallest_a")) == [1, 3]


def test_choose_random_is_seeded():
    m = ball_model()
    a = theory.choose_pruned(m, 5, "random", Rng(1))
    b = theory.choose_pruned(m, 5, "random", Rng(1))
    assert np.array_equal(a, b) and len(set(a)) == 5


def test_monte_carlo_small_suite_has_no_violations():
    for mode, extra in (("concentrated_ball", {}), ("uniform_sphere", {"dims": (256,), "n_max": 40})):
        cfg = theory.VerifyConfig(mode=mode, seed=3, **extra)
        for strategy in theory.STRATEGIES:
            res = theory.monte_carlo_verify(cfg, 200, strategy)
            assert res.thm1_violations == 0 and res.thm2_violations == 0


def test_monte_carlo_detects_a_misscaled_bound():
    res = theory.monte_carlo_verify(theory.VerifyConfig(seed=1), 50, "random", bound_scale=1e-3)
    assert res.thm1_violations > 0


def test_single_trial_reproducible():
    cfg = theory.VerifyConfig(seed=7)
    a = theory.monte_carlo_verify(cfg, 1, "random").rows[0]
    b = theory.monte_carlo_verify(cfg, 1, "random").rows[0]
    assert theory.trial_csv_row(a) == theory.trial_csv_row(b)
    assert np.array_equal(a.report.P, b.report.P)


# -- convergence sweep ----------------------------------------------------------------------

BASE = ModelConfig(n_terms=32, dim=16, alpha=1.0, beta=2.0, delta=1.0, spread=0.2, seed=11)


def test_convergence_zero_scale_row():
    rows = theory.convergence_sweep(BASE, [1.0, 0.0], M=8, trials=5)
    assert rows[1].mean_err_renormalized <= 1e-12
    assert rows[1].mean_thm1_bound == 0.0
    assert rows[1].mean_err_standard > 0


def test_convergence_bound_envelope():
    ts = [2.0 ** -k for k in range(7)]
    rows = theory.convergence_sweep(BASE, ts, M=8, trials=20)
    b1 = rows[0].mean_thm1_bound
    xi0 = BASE.beta - BASE.alpha
    for r in rows:
        assert r.mean_thm1_bound <= b1 * r.t * (1 + xi0 / (2 * BASE.alpha)) * (1 + 1e-12)


def test_convergence_slope_near_linear():
    ts = [2.0 ** -k for k in range(7)]
    rows = theory.convergence_sweep(BASE, ts, M=8, trials=40, strategy="random")
    slope = theory.loglog_slope(ts, [r.mean_err_renormalized for r in rows])
    assert slope >= 0.9


def test_loglog_slope_oracle():
    xs = [1, 2, 4, 8]
    assert theory.loglog_slope(xs, [3 * x ** 1.5 for x in xs]) == pytest.approx(1.5, rel=1e-12)
