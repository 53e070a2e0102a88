import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensemble_rc import dynamics, ensemble
from ensemble_rc.ensemble import EnsembleConfig, FeatureSpec, ObservationFn
from ensemble_rc.errors import (
    DivergenceError,
    InvalidArgumentError,
    PoisonedFeatureError,
    UndefinedMetricError,
)

ESN = dynamics.EsnSpec.random(12, 0.9, alpha=0.1, sigma=0.05, seed=0)


def _u(n, seed=1, lo=0.0, hi=1.0):
    return np.random.Generator(np.random.Philox(seed)).uniform(lo, hi, n)


def test_single_trial_is_a_plain_trajectory():
    cfg = EnsembleConfig(L=1, master_seed=7)
    u = _u(300)
    feats = [FeatureSpec(c, ObservationFn("identity")) for c in range(ESN.dim)]
    res = ensemble.ensemble_features(ESN, cfg, u, washout=50, features=feats)
    bundle = ensemble.build_ensemble(ESN, cfg, u, washout=50)
    r = ensemble.trial_rng(7, 0)
    x0 = ESN.sample_initial(r, 1)[0]
    single = dynamics.simulate_trajectory(ESN, dynamics.DriveSequence(u, bundle.noises[0]), x0, 50)
    np.testing.assert_array_equal(bundle.states, single.states)
    np.testing.assert_array_equal(res.features.values, single.retained[0])


@pytest.mark.parametrize("phi", ["x", "x^3", "cos", "sin2x", "adc4", "logsq", "abs", "relu", "exp(-x^2)"])
def test_streaming_matches_materialised(phi, kern):
    fn = ObservationFn.parse(phi)
    cfg = EnsembleConfig(L=37, master_seed=3)
    u = _u(400)
    res = ensemble.ensemble_features(ESN, cfg, u, washout=100, features=[FeatureSpec(2, fn)], kern=kern)
    bundle = ensemble.build_ensemble(ESN, cfg, u, washout=100, kern=kern)
    obs, _ = ensemble.apply_observation(fn, bundle, 2)
    ref = ensemble.ensemble_average(obs)
    np.testing.assert_allclose(res.features.values[:, 0], ref, rtol=1e-10, atol=1e-12)


def test_explicit_weights():
    L = 9
    u = _u(200)
    feats = [FeatureSpec(0, ObservationFn("power", 2))]
    uni = ensemble.ensemble_features(ESN, EnsembleConfig(L=L), u, 50, feats).features.values
    flat = ensemble.ensemble_features(ESN, EnsembleConfig(L=L, weights=[1 / L] * L), u, 50, feats).features.values
    np.testing.assert_allclose(uni, flat, rtol=1e-13)
    onehot = np.zeros(L)
    onehot[4] = 1.0
    pick = ensemble.ensemble_features(ESN, EnsembleConfig(L=L, weights=onehot), u, 50, feats).features.values
    bundle = ensemble.build_ensemble(ESN, EnsembleConfig(L=L), u, washout=50)
    np.testing.assert_allclose(pick[:, 0], bundle.retained[4, :, 0] ** 2, rtol=1e-13)


@settings(max_examples=20, deadline=None)
@given(L=st.integers(2, 30), seed=st.integers(0, 1000))
def test_uniform_average_is_permutation_invariant(L, seed):
    x = np.random.Generator(np.random.Philox(seed)).normal(size=(L, 25))
    perm = np.random.Generator(np.random.Philox(seed + 1)).permutation(L)
    np.testing.assert_allclose(ensemble.ensemble_average(x), ensemble.ensemble_average(x[perm]), rtol=1e-12)
    np.testing.assert_allclose(ensemble.ensemble_average(x), x.mean(axis=0), rtol=1e-12, atol=1e-15)


def test_thread_count_does_not_change_bits():
    cfg = EnsembleConfig(L=ensemble.CHUNK * 2 + 100, master_seed=11)
    u = _u(120)
    spec = dynamics.EsnSpec.random(6, 0.9, sigma=0.05, seed=0)
    feats = [FeatureSpec(0, ObservationFn("identity")), FeatureSpec(1, ObservationFn("cos"))]
    a = ensemble.ensemble_features(spec, cfg, u, 20, feats, sync_components=[0], threads=1)
    b = ensemble.ensemble_features(spec, cfg, u, 20, feats, sync_components=[0], threads=4)
    assert a.features.values.tobytes() == b.features.values.tobytes()
    assert a.sync_index == b.sync_index


def test_noise_free_ensemble_synchronises():
    spec = dynamics.EsnSpec.random(10, 0.8, sigma=0.0, seed=0)
    cfg = EnsembleConfig(L=20)
    u = _u(1500)
    res = ensemble.ensemble_features(spec, cfg, u, 1000, [FeatureSpec(0, ObservationFn("identity"))],
                                     raw_features=[FeatureSpec(0, ObservationFn("identity"))],
                                     sync_components=[0])
    np.testing.assert_allclose(res.features.values, res.raw.values, atol=1e-10)
    assert res.sync_index[0] == pytest.approx(1.0, abs=1e-6)


def test_synchronization_index_bounds():
    same = np.tile(np.sin(np.arange(100.0)), (5, 1))
    assert ensemble.synchronization_index(same) == pytest.approx(1.0)
    indep = np.random.Generator(np.random.Philox(0)).normal(size=(500, 200))
    assert ensemble.synchronization_index(indep) < 0.05
    with pytest.raises(InvalidArgumentError):
        ensemble.synchronization_index(indep[:1])
    with pytest.raises(UndefinedMetricError):
        ensemble.synchronization_index(np.ones((3, 10)))


def test_streaming_sync_matches_materialised():
    spec = dynamics.EsnSpec.random(8, 0.9, sigma=0.3, seed=2)
    cfg = EnsembleConfig(L=50)
    u = _u(300)
    res = ensemble.ensemble_features(spec, cfg, u, 100, [FeatureSpec(0, ObservationFn("identity"))],
                                     sync_components=[0])
    bundle = ensemble.build_ensemble(spec, cfg, u, washout=100)
    assert res.sync_index[0] == pytest.approx(ensemble.synchronization_index(bundle, 0), rel=1e-9)


def test_observation_parse_and_names():
    cases = {"x": "x", "x^3": "x^3", "cos": "cos(x)", "cos2x": "cos(2x)", "adc4": "adc4",
             "log(x^2)": "logsq", "|x|": "abs", "exp(-x^2)": "expnegsq"}
    for text, name in cases.items():
        assert ObservationFn.parse(text).name == name
    assert ObservationFn.parse("x^2").is_raw_power
    assert not ObservationFn.parse("cos").is_raw_power
    assert ObservationFn("power", 3, normalization="stddev").name == "x^3[stddev]"
    for bad in ("foo", "x^0"):
        with pytest.raises(InvalidArgumentError):
            ObservationFn.parse(bad)
    with pytest.raises(InvalidArgumentError):
        ObservationFn("adc", 4, normalization=None)
    with pytest.raises(InvalidArgumentError):
        ObservationFn("adc", 20)


def test_adc_levels_and_log_clamp():
    x = np.linspace(-2, 3, 101)[:, None]
    stats = ensemble.trial_stats(x)
    y, _ = ObservationFn("adc", 3).apply(x, stats)
    assert set(np.unique(y * 8)) <= set(range(9))
    assert y.min() == 0.0 and y.max() == 1.0
    z = np.array([[0.0], [1.0], [1e-200]])
    y, clamps = ObservationFn("logsq").apply(z)
    assert clamps == 2 and np.all(np.isfinite(y))


def test_stddev_normalisation_divides_without_centering():
    x = np.array([[1.0], [3.0]])
    y, _ = ObservationFn("identity", normalization="stddev").apply(x, ensemble.trial_stats(x))
    np.testing.assert_allclose(y[:, 0], [1.0, 3.0])


def test_feature_matrix_guards():
    with pytest.raises(InvalidArgumentError):
        ensemble.FeatureMatrix(np.zeros((3, 2)), ["a", "a"])
    with pytest.raises(PoisonedFeatureError):
        ensemble.FeatureMatrix(np.array([[1.0, np.nan]]), ["a", "b"])
    fm = ensemble.assemble_features([("a", np.arange(3.0))], [("b", np.ones(3))])
    assert fm.select(["b"]).values[:, 0].tolist() == [1, 1, 1]
    with pytest.raises(InvalidArgumentError):
        ensemble.assemble_features([("a", np.arange(3.0)), ("b", np.arange(4.0))])


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        EnsembleConfig(L=0)
    with pytest.raises(InvalidArgumentError):
        EnsembleConfig(L=3, weights=[1, 2])
    with pytest.raises(InvalidArgumentError):
        EnsembleConfig(L=3, weights="softmax")
    with pytest.raises(InvalidArgumentError):
        EnsembleConfig(L=3, divergence="ignore")


def test_thread_budget_env(monkeypatch):
    monkeypatch.setenv("ENSEMBLE_RC_THREADS", "3")
    assert ensemble.thread_budget() == 3
    monkeypatch.setenv("ENSEMBLE_RC_THREADS", "zero")
    with pytest.raises(InvalidArgumentError):
        ensemble.thread_budget()
    monkeypatch.delenv("ENSEMBLE_RC_THREADS")
    assert ensemble.thread_budget(2) == 2


def test_divergence_policies():
    # dt = 0.12 makes Lorenz RK4 blow up for a few initial conditions only
    spec = dynamics.OdeSpec("lorenz", dt=0.12)
    u = _u(400, lo=-1, hi=1)
    feats = [FeatureSpec(0, ObservationFn("identity"))]
    with pytest.raises(DivergenceError) as exc:
        ensemble.ensemble_features(spec, EnsembleConfig(L=40, per_trial_noise=False), u, 100, feats)
    assert 0 <= exc.value.trial < 40
    cfg = EnsembleConfig(L=40, per_trial_noise=False, divergence="drop")
    res = ensemble.ensemble_features(spec, cfg, u, 100, feats)
    assert exc.value.trial in res.dropped
    keep = [l for l in range(40) if l not in res.dropped]
    assert keep
    # the survivors' average equals an explicit one-hot weighting of them
    w = np.zeros(40)
    w[keep] = 1.0 / len(keep)
    ref = ensemble.ensemble_features(spec, EnsembleConfig(L=40, weights=w, per_trial_noise=False,
                                                          divergence="drop"), u, 100, feats)
    np.testing.assert_allclose(res.features.values, ref.features.values, rtol=1e-12)
    # when every trial diverges the error surfaces
    with pytest.raises(DivergenceError):
        ensemble.ensemble_features(dynamics.OdeSpec("lorenz", dt=0.3),
                                   EnsembleConfig(L=5, per_trial_noise=False, divergence="drop"), u, 100, feats)


def test_time_invariance_check():
    spec = dynamics.EsnSpec.random(10, 0.8, sigma=0.05, seed=0)
    block = _u(300)
    u = np.concatenate([block, block])
    dev = ensemble.time_invariance_check(spec, EnsembleConfig(L=400), ObservationFn("identity"), u,
                                         (200, 300), (500, 600))
    assert dev < 5e-3
    with pytest.raises(InvalidArgumentError):
        ensemble.time_invariance_check(spec, EnsembleConfig(L=4), ObservationFn("identity"), u,
                                       (0, 10), (5, 15))
