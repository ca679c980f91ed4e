import numpy as np
import pytest

from app.onebit.errors import BudgetExceededError, InvalidParameterError, UnsupportedDescriptorError
from app.onebit.quantize import CorruptionStrategy, corrupt_bits, one_bit_measure
from app.onebit.recovery.hamming import (
    Net,
    build_net,
    covering_radius,
    hamming_objective,
    hamming_recover_local,
    hamming_recover_net,
)
from app.onebit.sampling import (
    default_dither_amplitude,
    membership,
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
from app.utils.file_utils import load_net, save_net


def _instance(descriptor, m, seed, lam=2.0, law=RowLaw.GAUSSIAN, df=None):
    plan = SeedPlan(seed)
    ensemble = MeasurementEnsemble(law, n=descriptor.n, m=m, lam=lam, df=df)
    x = sample_signal(descriptor, plan)
    A = sample_matrix(ensemble, plan)
    tau = sample_dither(m, lam, plan)
    return plan, A, tau, x, one_bit_measure(A, x, tau)


# ============================================================
# Redes
# ============================================================
def test_finite_set_is_its_own_net():
    points = [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]
    net = build_net(SignalSetDescriptor.finite_set(points), r=0.1)
    assert np.array_equal(net.points, np.asarray(points))
    assert net.radius_empirical == 0.0


def test_radius_at_least_R_gives_origin():
    net = build_net(SignalSetDescriptor.sparse_ball(2, 10, 1.0), r=1.0)
    assert len(net) == 1
    assert np.array_equal(net.points, np.zeros((1, 10)))


def test_sparse_net_covers_fresh_samples():
    descriptor = SignalSetDescriptor.sparse_ball(1, 2, 1.0)
    net = build_net(descriptor, r=0.5, seed=SeedPlan(11))
    assert all(membership(descriptor, p) for p in net.points)
    assert net.radius_empirical <= 0.5
    fresh = sample_signals(descriptor, 5000, SeedPlan(99).generator(0, Stream.PROBE))
    assert covering_radius(net.points, fresh) <= 0.55


def test_covering_radius_example():
    points = np.array([[0.0, 0.0]])
    samples = np.array([[3.0, 4.0], [1.0, 0.0]])
    assert covering_radius(points, samples) == pytest.approx(5.0)


def test_net_budget():
    with pytest.raises(BudgetExceededError):
        build_net(SignalSetDescriptor.l1l2_ball(2, 20, 1.0), r=0.1, seed=SeedPlan(1), budget=10)
    with pytest.raises(InvalidParameterError):
        build_net(SignalSetDescriptor.sparse_ball(1, 2), r=0.0)


def test_net_roundtrip_file(tmp_path):
    net = Net(np.array([[0.0, 0.1], [-0.25, 1.0 / 3.0]]), 0.5, 0.4375)
    loaded = load_net(str(save_net(str(tmp_path / "nets" / "net.csv"), net)))
    assert np.array_equal(loaded.points, net.points)
    assert (loaded.radius_target, loaded.radius_empirical) == (0.5, 0.4375)


def test_net_file_without_header(tmp_path):
    path = tmp_path / "net.csv"
    path.write_text("0.0,1.0\n")
    with pytest.raises(InvalidParameterError):
        load_net(str(path))


# ============================================================
# Objetivo y solver sobre la red
# ============================================================
def test_hamming_objective_batch_matches_single():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((40, 3))
    tau = rng.uniform(-1, 1, 40)
    q = np.where(rng.standard_normal(40) >= 0, 1, -1)
    Z = rng.standard_normal((2500, 3))
    batch = hamming_objective(A, tau, q, Z)
    assert batch.tolist() == [hamming_objective(A, tau, q, z) for z in Z]


@pytest.mark.parametrize("seed", range(10))
def test_net_scan_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((30, 4))
    tau = rng.uniform(-2, 2, 30)
    q = np.where(rng.standard_normal(30) >= 0, 1, -1)
    points = rng.uniform(-1, 1, size=(200, 4))
    result = hamming_recover_net(A, tau, q, Net(points, 0.1, 0.1))
    brute = min(hamming_objective(A, tau, q, p) for p in points)
    assert result.objective == brute
    assert hamming_objective(A, tau, q, result.x_hat) == brute


def test_net_ties_prefer_smallest_norm():
    points = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, -1.0]])
    A = np.zeros((5, 2))
    tau = np.full(5, 0.5)
    result = hamming_recover_net(A, tau, np.ones(5), Net(points, 1.0, 1.0))
    assert np.array_equal(result.x_hat, [0.0, 0.0])
    assert result.objective == 0.0


def test_single_point_net():
    A = np.ones((4, 2))
    result = hamming_recover_net(A, np.zeros(4), -np.ones(4), Net(np.array([[0.3, 0.3]]), 1.0, 1.0))
    assert np.array_equal(result.x_hat, [0.3, 0.3])
    assert result.objective == 4.0


def test_consistent_point_in_net_has_zero_objective():
    descriptor = SignalSetDescriptor.finite_set(np.random.default_rng(8).uniform(-0.5, 0.5, size=(50, 3)))
    plan, A, tau, x, obs = _instance(descriptor, m=200, seed=8)
    result = hamming_recover_net(A, tau, obs.q, build_net(descriptor, 0.1))
    assert result.objective == 0.0
    assert result.solver == "hamming_net"


# ============================================================
# Búsqueda local
# ============================================================
def test_local_without_iterations_returns_warm_start():
    descriptor = SignalSetDescriptor.sparse_ball(2, 5, 1.0)
    plan, A, tau, x, obs = _instance(descriptor, m=50, seed=3)
    z0 = np.array([0.2, 0.0, 0.0, -0.3, 0.0])
    result = hamming_recover_local(A, tau, obs.q, descriptor, restarts=0, iters=0, warm_start=z0)
    assert np.array_equal(result.x_hat, z0)
    assert result.iterations == 0
    assert result.converged


@pytest.mark.parametrize("seed", range(5))
def test_local_search_is_feasible_and_descends(seed):
    descriptor = SignalSetDescriptor.sparse_ball(2, 8, 1.0)
    plan, A, tau, x, obs = _instance(descriptor, m=120, seed=seed)
    corrupted = corrupt_bits(obs, 0.05)
    start = hamming_recover_local(A, tau, corrupted.q, descriptor, restarts=0, iters=0, lam=2.0)
    result = hamming_recover_local(A, tau, corrupted.q, descriptor, restarts=2, iters=30, seed=plan, lam=2.0)
    assert membership(descriptor, result.x_hat, tol=1e-9)
    assert np.linalg.norm(result.x_hat) <= 1.0 + 1e-12
    assert result.objective <= start.objective
    assert result.objective == hamming_objective(A, tau, corrupted.q, result.x_hat)


@pytest.mark.parametrize("seed", range(5))
def test_local_search_finds_consistent_one_sparse_signal(seed):
    descriptor = SignalSetDescriptor.sparse_ball(1, 6, 1.0)
    plan, A, tau, x, obs = _instance(descriptor, m=200, seed=seed)
    result = hamming_recover_local(A, tau, obs.q, descriptor, restarts=0, iters=10, lam=2.0)
    assert result.objective == 0.0


def test_local_search_is_deterministic():
    descriptor = SignalSetDescriptor.sparse_ball(2, 8, 1.0)
    plan, A, tau, x, obs = _instance(descriptor, m=80, seed=21)
    first = hamming_recover_local(A, tau, obs.q, descriptor, restarts=3, seed=plan, trial=4)
    second = hamming_recover_local(A, tau, obs.q, descriptor, restarts=3, seed=plan, trial=4)
    assert np.array_equal(first.x_hat, second.x_hat)


def test_local_search_requires_sparse_ball():
    descriptor = SignalSetDescriptor.l1l2_ball(2, 4, 1.0)
    with pytest.raises(UnsupportedDescriptorError):
        hamming_recover_local(np.ones((3, 4)), np.zeros(3), np.ones(3), descriptor)
    with pytest.raises(InvalidParameterError):
        hamming_recover_local(np.ones((3, 4)), np.zeros(3), np.ones(3),
                              SignalSetDescriptor.sparse_ball(1, 4), restarts=-1)


@pytest.mark.parametrize("seed", range(5))
def test_tiny_instance_net_optimum_bounds_local_search(seed):
    descriptor = SignalSetDescriptor.sparse_ball(1, 6, 1.0)
    net = build_net(descriptor, r=0.02, seed=SeedPlan(5))
    plan = SeedPlan(seed)
    ensemble = MeasurementEnsemble(RowLaw.GAUSSIAN, n=6, m=60, lam=2.0)
    A = sample_matrix(ensemble, plan)
    tau = sample_dither(60, 2.0, plan)
    x = net.points[plan.generator(0, Stream.SIGNAL).integers(len(net))]
    obs = one_bit_measure(A, x, tau)

    oracle = hamming_recover_net(A, tau, obs.q, net)
    warm = hamming_recover_local(A, tau, obs.q, descriptor, restarts=0, iters=0, lam=2.0)
    local = hamming_recover_local(A, tau, obs.q, descriptor, restarts=2, iters=30, seed=plan, lam=2.0)
    assert oracle.objective == 0.0
    assert oracle.objective <= local.objective <= warm.objective

    corrupted = corrupt_bits(obs, 0.1)
    oracle = hamming_recover_net(A, tau, corrupted.q, net)
    warm = hamming_recover_local(A, tau, corrupted.q, descriptor, restarts=0, iters=0, lam=2.0)
    local = hamming_recover_local(A, tau, corrupted.q, descriptor, restarts=2, iters=30, seed=plan, lam=2.0)
    assert oracle.objective <= int(corrupted.corruption_mask.sum())
    assert local.objective <= warm.objective


# ============================================================
# Comportamiento de la recuperación con m, β y colas pesadas
# ------------------------------------------------------------
# Mediana del error de hamming_recover_local (2 reinicios, 30 barridos)
# sobre 50 ensayos con semillas comunes a todos los m: x ∈ Σ_{2,32}.
# ============================================================
RECOVERY_TRIALS = 50
SLACK = 1.10


def _median_error(m, lam, beta=0.0, sigma=0.0, law=RowLaw.GAUSSIAN, df=None, trials=RECOVERY_TRIALS):
    descriptor = SignalSetDescriptor.sparse_ball(2, 32, 1.0)
    ensemble = MeasurementEnsemble(law, n=32, m=m, lam=lam, df=df)
    noise_model = NoiseModel(NoiseLaw.GAUSSIAN, sigma=sigma) if sigma else NoiseModel()
    errors = []
    for trial in range(trials):
        plan = SeedPlan(1000 + trial)
        x = sample_signal(descriptor, plan)
        A = sample_matrix(ensemble, plan)
        tau = sample_dither(m, lam, plan)
        obs = one_bit_measure(A, x, tau, sample_noise(noise_model, m, plan))
        q = corrupt_bits(obs, beta, CorruptionStrategy.ADVERSARIAL_LARGEST_MARGIN).q
        result = hamming_recover_local(A, tau, q, descriptor, restarts=2, iters=30, seed=plan, lam=lam)
        errors.append(np.linalg.norm(result.x_hat - x))
    return float(np.median(errors))


def _assert_nonincreasing(medians):
    for previous, current in zip(medians, medians[1:]):
        assert current <= SLACK * previous, medians


@pytest.mark.slow
def test_median_error_decreases_with_m():
    lam = default_dither_amplitude(1.0)
    medians = [_median_error(m, lam) for m in (100, 200, 400, 800, 1600)]
    _assert_nonincreasing(medians)
    assert medians[-1] <= 0.2


@pytest.mark.slow
def test_median_error_stays_bounded_under_corruption_and_noise():
    lam = default_dither_amplitude(1.0, 0.05)
    clean = _median_error(1600, lam)
    corrupted = _median_error(1600, lam, beta=0.05, sigma=0.05)
    assert corrupted <= 2 * clean + 0.1


@pytest.mark.slow
def test_heavy_tailed_rows_recover():
    lam = default_dither_amplitude(1.0)
    medians = [_median_error(m, lam, law=RowLaw.STUDENT_T, df=3.0) for m in (800, 1600, 3200)]
    _assert_nonincreasing(medians)
    assert medians[-1] <= 0.3
