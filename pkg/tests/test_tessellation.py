import logging
import math

import numpy as np
import pytest

from app.onebit.errors import DimensionMismatchError, InvalidParameterError
from app.onebit.quantize import one_bit_measure, sign_pattern_distance
from app.onebit.sampling import sample_matrix, sample_signals
from app.onebit.tessellation import (
    bernoulli_hyperplanes,
    chain_gamma,
    chain_is_valid,
    dither_interval_probability,
    dither_small_ball,
    estimate_dither_amplitude,
    margin_separation_set,
    metric_chain,
    naive_separation_probability,
    noisy_margin_separation_set,
    separation_count,
    separation_indices,
    separation_probability,
    stability_predicate,
    tessellation_audit,
)
from app.onebit.types import MeasurementEnsemble, RowLaw, SeedPlan, SignalSetDescriptor

E1 = np.array([1.0, 0.0])
NEG_E1 = np.array([-1.0, 0.0])
ROW = np.array([[1.0, 0.0]])
FIG_PAIR = (np.array([1.0, 0.0]), np.array([1.0, -0.5]) / math.sqrt(1.25))


# ------------------------------------------------------------
# Separación y conjuntos con margen
# ------------------------------------------------------------
def test_separation_count_examples(rng):
    assert separation_count(ROW, np.zeros(1), E1, E1) == 0
    assert separation_count(ROW, np.zeros(1), E1, NEG_E1) == 1


def test_separation_count_matches_quantized_patterns(rng):
    A = rng.standard_normal((50, 5))
    tau = rng.uniform(-1, 1, 50)
    x, y = rng.standard_normal(5), rng.standard_normal(5)
    qx = one_bit_measure(A, x, tau).q
    qy = one_bit_measure(A, y, tau).q
    assert separation_count(A, tau, x, y) == sign_pattern_distance(qx, qy)[0]


def test_separation_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        separation_count(ROW, np.zeros(2), E1, E1)


@pytest.mark.parametrize("theta,expected", [(0.4, (0,)), (0.6, ())])
def test_margin_set_examples(theta, expected):
    assert margin_separation_set(ROW, np.zeros(1), E1, NEG_E1, theta).indices == expected


def test_zero_margin_equals_plain_separation(rng):
    A = rng.standard_normal((40, 4))
    tau = rng.uniform(-1, 1, 40)
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    assert margin_separation_set(A, tau, x, y, 0.0).indices == tuple(separation_indices(A, tau, x, y))


def test_noisy_margin_set_examples():
    x, y = np.array([0.2, 0.0]), NEG_E1
    assert noisy_margin_separation_set(ROW, np.zeros(1), np.array([0.5]), x, y, 0.3).indices == (0,)
    assert noisy_margin_separation_set(ROW, np.zeros(1), np.array([0.5]), x, y, 1e6).indices == ()
    zero = noisy_margin_separation_set(ROW, np.zeros(1), np.zeros(1), E1, NEG_E1, 0.4)
    assert zero == margin_separation_set(ROW, np.zeros(1), E1, NEG_E1, 0.4)


def test_negative_theta_rejected():
    with pytest.raises(InvalidParameterError):
        margin_separation_set(ROW, np.zeros(1), E1, NEG_E1, -0.1)


def test_margin_monotonicity_random_instances():
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        A = rng.standard_normal((12, 3))
        tau = rng.uniform(-1, 1, 12)
        noise = 0.1 * rng.standard_normal(12)
        x, y = rng.standard_normal(3), rng.standard_normal(3)
        t1, t2 = np.sort(rng.uniform(0, 0.5, 2))
        plain = set(separation_indices(A, tau, x, y))
        small = set(margin_separation_set(A, tau, x, y, t1).indices)
        large = set(margin_separation_set(A, tau, x, y, t2).indices)
        assert large <= small <= plain
        noisy_small = set(noisy_margin_separation_set(A, tau, noise, x, y, t1).indices)
        noisy_large = set(noisy_margin_separation_set(A, tau, noise, x, y, t2).indices)
        assert noisy_large <= noisy_small


# ------------------------------------------------------------
# Núcleo del dither y probabilidad de separación
# ------------------------------------------------------------
def test_dither_interval_probability_examples():
    assert float(dither_interval_probability(-0.5, 0.5, 1.0)) == pytest.approx(0.5)
    assert float(dither_interval_probability(0.3, 0.3, 1.0)) == 0.0
    assert float(dither_interval_probability(-5.0, 5.0, 1.0)) == pytest.approx(1.0)
    assert float(dither_interval_probability(0.5, 3.0, 1.0)) == pytest.approx(0.25)


def test_dither_small_ball_bound():
    z = np.linspace(-3, 3, 61)
    for eps in (0.01, 0.1, 0.5):
        assert np.all(dither_small_ball(z, 2.0, eps) <= eps / 2.0 + 1e-15)
    assert float(dither_small_ball(0.0, 2.0, 0.1)) == pytest.approx(0.05)


def test_separation_probability_vanishes_for_equal_points(plan):
    ensemble = MeasurementEnsemble(RowLaw.GAUSSIAN, n=2, m=1, lam=1.0)
    estimate, se = separation_probability(ensemble, E1, E1, 100, plan)
    assert estimate == 0.0 and se == 0.0


def test_separation_probability_is_symmetric(plan):
    ensemble = MeasurementEnsemble(RowLaw.GAUSSIAN, n=3, m=1, lam=1.5)
    x, y = np.array([0.3, -0.1, 0.2]), np.array([-0.2, 0.4, 0.0])
    assert separation_probability(ensemble, x, y, 500, plan) == separation_probability(ensemble, y, x, 500, plan)


def test_separation_probability_agrees_with_naive_estimate(plan):
    ensemble = MeasurementEnsemble(RowLaw.GAUSSIAN, n=2, m=1, lam=2.0)
    x, y = np.array([0.3, 0.0]), np.array([-0.3, 0.0])
    rb, rb_se = separation_probability(ensemble, x, y, 20_000, plan)
    naive, naive_se = naive_separation_probability(ensemble, x, y, 20_000, plan)
    assert abs(rb - naive) <= 3 * math.hypot(rb_se, naive_se)
    assert rb_se < naive_se


# ------------------------------------------------------------
# Cadenas métricas
# ------------------------------------------------------------
def test_short_segment_gives_empty_chain():
    assert metric_chain(np.zeros(2), np.array([0.2, 0.0]), 0.3) == []


def test_uniform_subdivision():
    chain = metric_chain(np.zeros(2), E1, 0.3)
    assert len(chain) == 3
    assert np.allclose([z[0] for z in chain], [0.25, 0.5, 0.75])
    assert chain_gamma(np.zeros(2), E1, chain, 0.3) == pytest.approx(0.25 / 0.3)
    assert chain_is_valid(np.zeros(2), E1, chain, 0.3, chain_gamma(np.zeros(2), E1, chain, 0.3))


def test_chain_rejects_nonpositive_radius():
    with pytest.raises(InvalidParameterError):
        metric_chain(np.zeros(2), E1, 0.0)


def test_sparse_chain_stays_in_doubled_sparse_ball(rng):
    descriptor = SignalSetDescriptor.sparse_ball(2, 8, 1.0)
    xs = sample_signals(descriptor, 20, rng)
    ys = sample_signals(descriptor, 20, rng)
    for x, y in zip(xs, ys):
        for z in metric_chain(x, y, 0.1, descriptor):
            assert np.count_nonzero(z) <= 4
            assert np.linalg.norm(z) <= max(np.linalg.norm(x), np.linalg.norm(y)) + 1e-12


def test_chain_inequalities_random_instances():
    rng = np.random.default_rng(12)
    for _ in range(10_000):
        x, y = rng.standard_normal(4), rng.standard_normal(4)
        r = rng.uniform(0.05, 2.0)
        chain = metric_chain(x, y, r)
        gamma = chain_gamma(x, y, chain, r)
        assert gamma >= 0.5 - 1e-12
        assert chain_is_valid(x, y, chain, r, gamma)


def test_invalid_chain_is_detected():
    x, y = np.zeros(2), E1
    assert not chain_is_valid(x, y, [np.array([0.9, 0.0])], 0.5, 0.5)


# ------------------------------------------------------------
# Estabilidad de la separación
# ------------------------------------------------------------
def test_stability_with_zero_perturbation():
    X = np.array([1.0, 0.0])
    assert stability_predicate(X, 0.0, E1, NEG_E1, E1, NEG_E1, 0.4, 1.0)


def test_stability_hypothesis_fails_for_large_perturbation():
    X = np.array([1.0, 0.0])
    x = E1 + np.array([-0.5, 0.0])
    assert not stability_predicate(X, 0.0, E1, NEG_E1, x, NEG_E1, 0.4, 1.0)


def test_stability_precondition():
    with pytest.raises(InvalidParameterError):
        stability_predicate(E1, 0.0, E1, E1, E1, E1, 0.1, 0.5)


def test_stability_random_instances():
    rng = np.random.default_rng(13)
    confirmed = 0
    for _ in range(10_000):
        X = rng.standard_normal(3)
        v, w = rng.standard_normal(3), rng.standard_normal(3)
        tau = -float(X @ (v + w)) / 2.0
        dist = float(np.linalg.norm(w - v))
        theta = rng.uniform(0.01, 1.0) * abs(float(X @ (w - v))) / 2.0 / dist
        r_prime = rng.uniform(0.1, 1.0) * dist
        slack = theta * r_prime / 3.0
        dx, dy = rng.standard_normal(3), rng.standard_normal(3)
        dx *= rng.uniform(0, 1) * slack / max(abs(float(X @ dx)), 1e-300)
        dy *= rng.uniform(0, 1) * slack / max(abs(float(X @ dy)), 1e-300)
        if theta <= 0:
            continue
        confirmed += stability_predicate(X, tau, v, w, v + dx, w + dy, theta, r_prime)
    assert confirmed > 9_000


# ------------------------------------------------------------
# Auditoría
# ------------------------------------------------------------
def test_audit_of_identical_points(rng):
    A = rng.standard_normal((30, 2))
    tau = rng.uniform(-1, 1, 30)
    report = tessellation_audit(A, tau, [(E1, E1)] * 3, 0.2)
    assert all(p.hamming_fraction == 0 for p in report.pairs)
    assert report.ratio_min is None and report.ratio_max is None and report.rank_correlation is None


def test_bernoulli_pair_is_never_separated_without_dither():
    A = bernoulli_hyperplanes(2)
    assert A.shape == (4, 2)
    report = tessellation_audit(A, np.zeros(4), [FIG_PAIR], 0.2)
    assert report.pairs[0].hamming_fraction == 0.0
    assert report.pairs[0].distance == pytest.approx(0.4595, abs=1e-4)
    assert report.ratio_min is None


def test_bernoulli_pair_is_separated_with_dither(plan):
    from app.onebit.sampling import sample_dither

    ensemble = MeasurementEnsemble(RowLaw.RADEMACHER, n=2, m=2000, lam=2.0)
    A = sample_matrix(ensemble, plan)
    tau = sample_dither(2000, 2.0, plan)
    report = tessellation_audit(A, tau, [FIG_PAIR], 0.2, lam=2.0)
    assert report.pairs[0].hamming_fraction > 0.01


def test_audit_csv_layout(rng):
    A = rng.standard_normal((100, 3))
    tau = rng.uniform(-2, 2, 100)
    pairs = [(rng.standard_normal(3) / 3, rng.standard_normal(3) / 3) for _ in range(5)]
    report = tessellation_audit(A, tau, pairs, 0.0, (0.05, 0.1), lam=2.0)
    lines = report.to_csv().strip().split("\n")
    assert lines[0] == "pair_id,distance,hamming_fraction,margin_count_theta_0.05,margin_count_theta_0.1"
    assert len(lines) == 1 + 5 + 1
    assert lines[-1].startswith("summary,ratio_min=")
    assert report.ratio_min <= report.ratio_max


def test_audit_excludes_close_pairs_from_ratios(rng):
    A = rng.standard_normal((200, 2))
    tau = rng.uniform(-1, 1, 200)
    close = (np.array([0.1, 0.0]), np.array([0.12, 0.0]))
    far = (np.array([0.5, 0.0]), np.array([-0.5, 0.0]))
    report = tessellation_audit(A, tau, [close, far], 0.5, lam=1.0)
    expected = report.pairs[1].hamming_fraction * 1.0 / 1.0
    assert report.ratio_min == pytest.approx(expected) and report.ratio_max == pytest.approx(expected)


def test_estimated_dither_amplitude_is_corrected_for_sample_size():
    tau = np.array([-0.5, 0.25, 0.75])
    assert estimate_dither_amplitude(tau) == pytest.approx(0.75 * 4 / 3)
    assert estimate_dither_amplitude(np.zeros(0)) == 0.0


def test_audit_with_estimated_lambda_matches_explicit_lambda(rng, caplog):
    m = 200
    A = rng.standard_normal((m, 2))
    tau = rng.uniform(-1, 1, m)
    tau = tau / np.max(np.abs(tau)) * m / (m + 1)
    pairs = [(rng.standard_normal(2) / 2, rng.standard_normal(2) / 2) for _ in range(6)]

    with caplog.at_level(logging.WARNING, logger="app.onebit.tessellation"):
        explicit = tessellation_audit(A, tau, pairs, 0.1, lam=1.0)
    assert not [r for r in caplog.records if r.levelno == logging.WARNING]

    with caplog.at_level(logging.WARNING, logger="app.onebit.tessellation"):
        estimated = tessellation_audit(A, tau, pairs, 0.1)
    assert any("λ" in r.getMessage() for r in caplog.records if r.levelno == logging.WARNING)

    assert estimated.lam == pytest.approx(1.0)
    assert estimated.ratio_min == pytest.approx(explicit.ratio_min)
    assert estimated.ratio_max == pytest.approx(explicit.ratio_max)
    assert estimated.rank_correlation == pytest.approx(explicit.rank_correlation)


@pytest.mark.slow
def test_distance_encoding_on_sparse_pairs():
    plan = SeedPlan(2)
    descriptor = SignalSetDescriptor.sparse_ball(2, 64, 1.0)
    ensemble = MeasurementEnsemble(RowLaw.GAUSSIAN, n=64, m=5000, lam=3.0)
    from app.onebit.sampling import sample_dither

    A = sample_matrix(ensemble, plan)
    tau = sample_dither(5000, 3.0, plan)
    rng = np.random.default_rng(21)
    pairs = []
    while len(pairs) < 200:
        x, y = sample_signals(descriptor, 2, rng)
        if np.linalg.norm(x - y) >= 0.2:
            pairs.append((x, y))
    report = tessellation_audit(A, tau, pairs, 0.2, lam=3.0)
    assert report.rank_correlation >= 0.95
    assert 0.05 <= report.ratio_min and report.ratio_max <= 5
