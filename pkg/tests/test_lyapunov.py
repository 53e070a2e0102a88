import numpy as np
import pytest

from ensemble_rc import dynamics, lyapunov
from ensemble_rc.errors import DegeneratePerturbationError, InvalidArgumentError
from ensemble_rc.lyapunov import LyapunovConfig


def _u(n, lo=0.0, hi=1.0, seed=3):
    return np.random.Generator(np.random.Philox(seed)).uniform(lo, hi, n)


def test_linear_contraction_rate():
    spec = dynamics.OdeSpec("linear", {"k": 1.0, "iota": 0.5})
    cfg = LyapunovConfig(total_steps=5000, transient_discard=100)
    lam = lyapunov.max_lyapunov(spec, _u(5100), cfg)
    # RK4 growth factor per step, converted to a rate
    h = spec.dt
    exact = np.log(1 - h + h**2 / 2 - h**3 / 6 + h**4 / 24) / h
    assert lam == pytest.approx(exact, rel=1e-6)
    assert lam == pytest.approx(-1.0, abs=1e-4)


def test_renorm_interval_invariance_for_linear_flow():
    spec = dynamics.OdeSpec("linear", {"k": 2.0, "iota": 0.0})
    u = _u(3000)
    a = lyapunov.max_lyapunov(spec, u, LyapunovConfig(2000, renorm_interval=1, transient_discard=10))
    b = lyapunov.max_lyapunov(spec, u, LyapunovConfig(2000, renorm_interval=10, transient_discard=10))
    assert a == pytest.approx(b, rel=1e-7)


def test_eps_invariance_esn():
    spec = dynamics.EsnSpec.random(30, 0.94, seed=0)
    u = _u(12_000)
    vals = [lyapunov.max_lyapunov(spec, u, LyapunovConfig(10_000, eps0=e)) for e in (1e-9, 1e-8, 1e-6)]
    assert max(vals) - min(vals) < 0.01
    assert all(v < 0 for v in vals)


def test_esn_sign_pattern():
    u = _u(6000)
    cfg = LyapunovConfig(5000)
    low = lyapunov.max_lyapunov(dynamics.EsnSpec.random(30, 0.5, seed=0), u, cfg)
    high = lyapunov.max_lyapunov(dynamics.EsnSpec.random(30, 2.5, seed=0), u, cfg)
    assert low < 0 < high


def test_copy_map_theta_wrap():
    spec = dynamics.CopyMapSpec()
    d = lyapunov._separation(spec, np.array([0.0, 0.01]), np.array([0.0, 2 * np.pi - 0.01]))
    assert d[1] == pytest.approx(-0.02)


def test_degenerate_perturbation():
    spec = dynamics.EsnSpec(np.zeros((3, 3)), np.ones(3), alpha=0.5)
    with pytest.raises(DegeneratePerturbationError):
        lyapunov.max_lyapunov(spec, _u(200), LyapunovConfig(100, transient_discard=0))


def test_config_validation():
    with pytest.raises(InvalidArgumentError):
        LyapunovConfig(eps0=0.0)
    with pytest.raises(InvalidArgumentError):
        LyapunovConfig(renorm_interval=0)
    with pytest.raises(InvalidArgumentError):
        lyapunov.max_lyapunov(dynamics.EsnSpec.random(5, 0.5), _u(100), LyapunovConfig(1000))
    assert LyapunovConfig().interval_for(dynamics.OdeSpec("lorenz")) == 10
    assert LyapunovConfig().interval_for(dynamics.CopyMapSpec()) == 1


def test_bifurcation_scan(tmp_path):
    family = lambda rho: dynamics.EsnSpec.random(30, rho, seed=0)
    u = _u(3000)
    scan = lyapunov.bifurcation_scan(family, [0.5, 1.0, 3.0], u, washout=500, n_samples=20,
                                     cfg=LyapunovConfig(2000))
    assert scan.samples.shape == (3, 20)
    assert scan.lambdas[0] < 0 < scan.lambdas[2]
    scan.to_csv(tmp_path / "scan.csv", "rho")
    assert (tmp_path / "scan.csv").read_text().startswith("rho,lambda,x0,")
    with pytest.raises(InvalidArgumentError):
        lyapunov.bifurcation_scan(family, [1.0, 0.5], u)


def test_scan_records_divergent_points():
    family = lambda dt: dynamics.OdeSpec("lorenz", dt=dt)
    scan = lyapunov.bifurcation_scan(family, [0.01, 0.5], _u(3000, -1, 1), washout=100, n_samples=10,
                                     cfg=LyapunovConfig(1000, transient_discard=100))
    assert np.isfinite(scan.lambdas[0])
    assert 0.5 in scan.errors and np.isnan(scan.lambdas[1])
