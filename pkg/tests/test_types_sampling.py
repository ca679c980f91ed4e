import numpy as np
import pytest

from app.onebit.errors import DimensionMismatchError, InvalidEnsembleError, InvalidParameterError
import app.onebit.sampling as sampling
from app.onebit.sampling import (
    default_dither_amplitude,
    membership,
    membership_rows,
    sample_dither,
    sample_matrix,
    sample_noise,
    sample_signal,
    sample_signals,
)
from app.onebit.types import (
    MeasurementEnsemble,
    NoiseLaw,
    NoiseModel,
    RowLaw,
    SeedPlan,
    SignalSetDescriptor,
    Stream,
)


# ------------------------------------------------------------
# Descriptores
# ------------------------------------------------------------
@pytest.mark.parametrize("s,n", [(0, 4), (5, 4)])
def test_descriptor_rejects_sparsity_out_of_range(s, n):
    with pytest.raises(InvalidParameterError):
        SignalSetDescriptor.sparse_ball(s, n)


def test_descriptor_rejects_far_points():
    with pytest.raises(InvalidParameterError):
        SignalSetDescriptor.finite_set([[2.0, 0.0]], radius=1.0)


def test_convex_hull_of_sparse_ball_is_l1l2_ball():
    hull = SignalSetDescriptor.sparse_ball(2, 8, 1.5).convex_hull()
    assert hull.is_convex
    assert hull.s == 2 and hull.n == 8 and hull.radius == 1.5
    assert hull.l1_radius == pytest.approx(1.5 * np.sqrt(2))


# ------------------------------------------------------------
# Matrices y dither
# ------------------------------------------------------------
def test_rademacher_entries_are_signs(plan):
    A = sample_matrix(MeasurementEnsemble(RowLaw.RADEMACHER, n=3, m=2, lam=1.0), plan)
    assert A.shape == (2, 3)
    assert set(np.unique(A)) <= {-1.0, 1.0}


def test_gaussian_entries_moments(plan):
    A = sample_matrix(MeasurementEnsemble(RowLaw.GAUSSIAN, n=1, m=100_000, lam=1.0), plan)
    assert -0.02 < A.mean() < 0.02
    assert 0.98 < A.var() < 1.02


def test_student_t_variance_is_unit(plan):
    A = sample_matrix(MeasurementEnsemble(RowLaw.STUDENT_T, n=1, m=1_000_000, lam=1.0, df=3), plan)
    assert 0.9 < A.var() < 1.1


@pytest.mark.parametrize("df", [1.5, 2.0, None])
def test_student_t_requires_finite_variance(df):
    with pytest.raises(InvalidEnsembleError):
        MeasurementEnsemble(RowLaw.STUDENT_T, n=2, m=2, lam=1.0, df=df)


@pytest.mark.parametrize("law,kwargs,band", [
    (RowLaw.GAUSSIAN, {}, (0.9, 1.1)),
    (RowLaw.RADEMACHER, {}, (0.9, 1.1)),
    (RowLaw.STUDENT_T, {"df": 4}, (0.8, 1.25)),
    (RowLaw.COORD_HEAVY, {"alpha": 0.5}, (0.9, 1.1)),
])
def test_rows_are_isotropic(plan, law, kwargs, band):
    A = sample_matrix(MeasurementEnsemble(law, n=4, m=100_000, lam=1.0, **kwargs), plan)
    cov = A.T @ A / A.shape[0]
    off = cov - np.diag(np.diag(cov))
    assert np.all(np.abs(off) < 0.05)
    assert np.all((band[0] < np.diag(cov)) & (np.diag(cov) < band[1]))
    if law is not RowLaw.STUDENT_T:
        assert np.all(np.abs(A.mean(axis=0)) < 0.02)


def test_dither_support_and_moments(plan):
    tau = sample_dither(10, 1.0, plan)
    assert np.all(np.abs(tau) <= 1.0)
    big = sample_dither(1_000_000, 2.0, plan)
    assert -0.01 < big.mean() < 0.01
    assert 1.32 < big.var() < 1.35


@pytest.mark.parametrize("lam", [0.0, -1.0])
def test_dither_rejects_nonpositive_amplitude(plan, lam):
    with pytest.raises(InvalidParameterError):
        sample_dither(5, lam, plan)


def test_sampling_is_deterministic_and_streams_differ():
    ensemble = MeasurementEnsemble(RowLaw.GAUSSIAN, n=5, m=7, lam=1.0)
    a = sample_matrix(ensemble, SeedPlan(11), trial=3)
    b = sample_matrix(ensemble, SeedPlan(11), trial=3)
    c = sample_matrix(ensemble, SeedPlan(11), trial=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    g1 = SeedPlan(11).generator(3, Stream.MATRIX).random()
    g2 = SeedPlan(11).generator(3, Stream.DITHER).random()
    assert g1 != g2


def test_seed_plan_rejects_out_of_range_seed():
    with pytest.raises(InvalidParameterError):
        SeedPlan(-1)


def test_noise_models(plan):
    assert np.array_equal(sample_noise(NoiseModel(), 4, plan), np.zeros(4))
    bias = sample_noise(NoiseModel(NoiseLaw.CONSTANT_BIAS, mu=0.3), 4, plan)
    assert np.allclose(bias, 0.3)
    gauss = sample_noise(NoiseModel(NoiseLaw.GAUSSIAN, sigma=0.5), 200_000, plan)
    assert gauss.std() == pytest.approx(0.5, rel=0.02)
    heavy = sample_noise(NoiseModel(NoiseLaw.STUDENT_T, sigma=0.5, df=5), 200_000, plan)
    assert heavy.std() == pytest.approx(0.5, rel=0.05)


def test_noise_norms():
    model = NoiseModel(NoiseLaw.CONSTANT_BIAS, mu=-0.4)
    assert model.bias == 0.4 and model.std == 0.0 and model.l2_norm == pytest.approx(0.4)
    assert NoiseModel(NoiseLaw.GAUSSIAN, sigma=0.3).l2_norm == pytest.approx(0.3)


def test_default_dither_amplitude():
    assert default_dither_amplitude(1.0, 0.5, 0.2) == pytest.approx(3.2)


# ------------------------------------------------------------
# Señales y pertenencia
# ------------------------------------------------------------
def test_sparse_signal_membership(plan):
    descriptor = SignalSetDescriptor.sparse_ball(2, 8, 1.0)
    for trial in range(50):
        x = sample_signal(descriptor, plan, trial)
        assert np.count_nonzero(x) <= 2
        assert np.linalg.norm(x) <= 1.0 + 1e-12


def test_singleton_finite_set(plan):
    descriptor = SignalSetDescriptor.finite_set([[1.0, 0.0, 0.0]])
    assert np.array_equal(sample_signal(descriptor, plan), np.array([1.0, 0.0, 0.0]))


def test_l1l2_signal_membership(plan, rng):
    descriptor = SignalSetDescriptor.l1l2_ball(1, 4, 1.0)
    for x in sample_signals(descriptor, 100, rng):
        assert np.abs(x).sum() <= 1.0 + 1e-9
        assert np.linalg.norm(x) <= 1.0 + 1e-9


@pytest.mark.parametrize("descriptor,x,expected", [
    (SignalSetDescriptor.sparse_ball(2, 8, 1.0), np.zeros(8), True),
    (SignalSetDescriptor.sparse_ball(1, 4, 1.0), np.array([0.8, 0.8, 0.0, 0.0]), False),
    (SignalSetDescriptor.l1l2_ball(4, 4, 1.0), np.full(4, 0.5), True),
    (SignalSetDescriptor.l1l2_ball(1, 4, 1.0), np.array([0.6, 0.6, 0.0, 0.0]), False),
    (SignalSetDescriptor.finite_set([[1.0, 0.0], [0.0, 1.0]]), np.array([0.0, 1.0]), True),
])
def test_membership_examples(descriptor, x, expected):
    assert membership(descriptor, x, tol=1e-9) is expected


def test_membership_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        membership(SignalSetDescriptor.sparse_ball(1, 4), np.zeros(3))


def test_membership_rows_agrees_with_membership(rng):
    descriptor = SignalSetDescriptor.sparse_ball(2, 6, 1.0)
    X = np.vstack([sample_signals(descriptor, 20, rng), rng.standard_normal((20, 6))])
    expected = [membership(descriptor, x) for x in X]
    assert membership_rows(descriptor, X).tolist() == expected
    with pytest.raises(DimensionMismatchError):
        membership_rows(descriptor, np.zeros(6))


def test_sample_signals_rejects_points_outside_the_set(rng, monkeypatch):
    descriptor = SignalSetDescriptor.sparse_ball(1, 4, 1.0)
    monkeypatch.setattr(sampling, "_draw_signal", lambda d, g: np.array([0.8, 0.8, 0.0, 0.0]))
    with pytest.raises(AssertionError):
        sample_signals(descriptor, 3, rng)
