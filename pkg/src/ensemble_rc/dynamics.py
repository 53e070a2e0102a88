"""Input-driven dynamical systems used as reservoirs.

Three families are supported: echo state networks (:class:`EsnSpec`),
low-dimensional ODEs integrated with fixed-step RK4 (:class:`OdeSpec`) and the
COPY map (:class:`CopyMapSpec`). All of them are advanced through the block
kernels of :mod:`ensemble_rc._backend`, so a single trajectory and an ensemble
of ``L`` trials run through the same code path.

Time convention: ``states[t]`` is the state *after* consuming ``inputs[t]``.
A readout on row ``t`` therefore sees input delay 1 as ``inputs[t]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import _backend
from . import _kernels_py as _codes
from .errors import (
    DegenerateMatrixError,
    DivergenceError,
    InvalidArgumentError,
    SingularityError,
)

GUARD = 1e12
GOLDEN_OMEGA = (math.sqrt(5.0) - 1.0) / 2.0

# parameter order matches the kernel parameter arrays
_PARAM_NAMES = {
    "lorenz": ("sigma", "rho", "beta", "iota"),
    "rossler": ("a", "b", "c", "iota"),
    "chua": ("a", "b", "m0", "m1", "iota"),
    "stuart-landau-radial": ("alpha", "beta", "sigma"),
    "stuart-landau-x": ("alpha", "beta", "sigma1", "sigma2"),
    "linear": ("k", "iota"),
}

PAPER_PARAMS = {
    "lorenz": ({"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0, "iota": 30.0}, 0.01),
    "rossler": ({"a": 0.2, "b": 0.2, "c": 5.7, "iota": 0.2}, 0.2),
    "chua": ({"a": 15.6, "b": 28.0, "m0": -1.143, "m1": -0.714, "iota": 2.0}, 0.05),
    "stuart-landau-radial": ({"alpha": 1.0, "beta": 1.0, "sigma": 0.5}, 0.01),
    "stuart-landau-x": ({"alpha": 1.0, "beta": 1.0, "sigma1": 0.8, "sigma2": 0.1}, 0.01),
    "linear": ({"k": 1.0, "iota": 0.0}, 0.01),
}

_DIMS = {
    "lorenz": 3,
    "rossler": 3,
    "chua": 3,
    "stuart-landau-radial": 2,
    "stuart-landau-x": 2,
    "linear": 1,
}

_KIND_CODES = {
    ("lorenz", "conventional"): _codes.LORENZ,
    ("lorenz", "printed"): _codes.LORENZ_PRINTED,
    ("rossler", "conventional"): _codes.ROSSLER,
    ("chua", "conventional"): _codes.CHUA,
    ("chua", "printed"): _codes.CHUA_PRINTED,
    ("stuart-landau-radial", "conventional"): _codes.SL_RADIAL,
    ("stuart-landau-x", "conventional"): _codes.SL_XINPUT,
    ("linear", "conventional"): _codes.LINEAR,
}

# escape radius: a component beyond it counts as divergence. The driven Chua
# attractor stays within |x| < 3 and escapes beyond it never return, so a
# tight radius catches them long before they overflow.
_ESCAPE = {"chua": 20.0}

# initial-condition boxes around each attractor: (low, high) per component
_INIT_BOX = {
    "lorenz": ((-15.0, 15.0), (-15.0, 15.0), (5.0, 40.0)),
    "rossler": ((-5.0, 5.0), (-5.0, 5.0), (0.0, 1.0)),
    "chua": ((-0.5, 0.5), (-0.1, 0.1), (-0.5, 0.5)),
    "linear": ((-1.0, 1.0),),
}


# ---------------------------------------------------------------------------
# state containers


@dataclass
class StateVector:
    """A single state with its step counter."""

    components: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=float).reshape(-1)

    def __len__(self):
        return self.components.shape[0]


@dataclass
class DriveSequence:
    """Shared input ``u_t`` and (optionally) one trial's noise ``v_t``."""

    inputs: np.ndarray
    noises: Optional[np.ndarray] = None

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=float).reshape(-1)
        if self.noises is not None:
            self.noises = np.ascontiguousarray(self.noises, dtype=float).reshape(-1)
            if self.noises.shape != self.inputs.shape:
                raise InvalidArgumentError(
                    f"noise length {self.noises.shape[0]} != input length {self.inputs.shape[0]}"
                )

    @property
    def length(self):
        return self.inputs.shape[0]


@dataclass
class TrajectoryBundle:
    """State time series of ``L`` trials driven by one shared input.

    ``states`` has shape ``(L, T, dim)``. The first ``washout`` steps are kept
    for inspection; :attr:`retained` drops them.
    """

    states: np.ndarray
    inputs: np.ndarray
    noises: Optional[np.ndarray]
    washout: int

    @property
    def n_trials(self):
        return self.states.shape[0]

    @property
    def length(self):
        return self.states.shape[1]

    @property
    def dim(self):
        return self.states.shape[2]

    @property
    def retained(self):
        return self.states[:, self.washout:]

    @property
    def retained_inputs(self):
        return self.inputs[self.washout:]


# ---------------------------------------------------------------------------
# system specifications


def spectral_radius(W):
    W = np.asarray(W, dtype=float)
    if W.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(W))))


def rescale_spectral_radius(W_raw, rho):
    """Return ``W_raw`` scaled so that its spectral radius equals ``rho``."""
    W_raw = np.asarray(W_raw, dtype=float)
    if W_raw.ndim != 2 or W_raw.shape[0] != W_raw.shape[1]:
        raise InvalidArgumentError(f"W_raw must be square, got shape {W_raw.shape}")
    if rho < 0:
        raise InvalidArgumentError(f"rho must be >= 0, got {rho}")
    if rho == 0:
        return np.zeros_like(W_raw)
    sr = spectral_radius(W_raw)
    if sr <= 1e-8 * np.linalg.norm(W_raw):
        raise DegenerateMatrixError("spectral radius of W_raw is zero; cannot rescale")
    return W_raw * (rho / sr)


@dataclass
class EsnSpec:
    """Echo state network ``r' = tanh(W r + alpha W_in u + sigma W_in v)``."""

    W: np.ndarray
    w_in: np.ndarray
    alpha: float = 0.01
    sigma: float = 0.0
    rho: Optional[float] = None

    noise_distribution = "uniform"

    def __post_init__(self):
        self.W = np.ascontiguousarray(self.W, dtype=float)
        self.w_in = np.ascontiguousarray(self.w_in, dtype=float).reshape(-1)
        d = self.w_in.shape[0]
        if self.W.shape != (d, d):
            raise InvalidArgumentError(f"W must be {d}x{d}, got {self.W.shape}")
        if self.rho is None:
            self.rho = spectral_radius(self.W)

    @classmethod
    def random(cls, d=30, rho=0.94, alpha=0.01, sigma=0.0, seed=0):
        """Draw ``W`` and ``W_in`` uniformly on [-1, 1] and rescale ``W`` to ``rho``.

        The raw draw depends only on ``(d, seed)``, so a sweep over ``rho``
        with a fixed seed rescales one and the same matrix.
        """
        rng = np.random.Generator(np.random.Philox(seed))
        W_raw = rng.uniform(-1.0, 1.0, (d, d))
        w_in = rng.uniform(-1.0, 1.0, d)
        return cls(rescale_spectral_radius(W_raw, rho), w_in, alpha, sigma, rho)

    @property
    def d(self):
        return self.w_in.shape[0]

    @property
    def dim(self):
        return self.d

    def with_params(self, **changes):
        kw = dict(W=self.W, w_in=self.w_in, alpha=self.alpha, sigma=self.sigma, rho=self.rho)
        kw.update(changes)
        return EsnSpec(**kw)

    def sample_initial(self, rng, n):
        return rng.uniform(-1.0, 1.0, (n, self.d))

    def sample_noise(self, rng, size):
        return rng.uniform(-1.0, 1.0, size)


@dataclass
class OdeSpec:
    """A continuous-time system integrated by classical RK4 with step ``dt``.

    ``convention`` selects between the conventional right-hand side and the
    sign pattern printed for Lorenz/Chua. ``noise_scaling="white"`` divides the
    per-step noise by ``sqrt(dt)`` so that it acts as white noise of unit
    intensity; ``"hold"`` injects it as a step-held signal like the input.
    """

    kind: str
    params: dict = field(default_factory=dict)
    dt: Optional[float] = None
    convention: str = "conventional"
    noise_scaling: str = "hold"
    escape_radius: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _PARAM_NAMES:
            raise InvalidArgumentError(f"unknown ODE kind {self.kind!r}")
        if (self.kind, self.convention) not in _KIND_CODES:
            raise InvalidArgumentError(f"kind {self.kind!r} has no {self.convention!r} convention")
        if self.noise_scaling not in ("hold", "white"):
            raise InvalidArgumentError(f"noise_scaling must be 'hold' or 'white'")
        defaults, dt = PAPER_PARAMS[self.kind]
        merged = dict(defaults)
        unknown = set(self.params) - set(merged)
        if unknown:
            raise InvalidArgumentError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        merged.update({k: float(v) for k, v in self.params.items()})
        self.params = merged
        if self.dt is None:
            self.dt = dt
        if not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if self.escape_radius is None:
            self.escape_radius = _ESCAPE.get(self.kind, GUARD)
        if not self.escape_radius > 0:
            raise InvalidArgumentError(f"escape_radius must be positive, got {self.escape_radius}")
        if self.kind.startswith("stuart-landau") and not self.params["alpha"] > 0:
            raise InvalidArgumentError("Stuart-Landau alpha must be positive")

    @property
    def dim(self):
        return _DIMS[self.kind]

    @property
    def code(self):
        return _KIND_CODES[(self.kind, self.convention)]

    @property
    def param_array(self):
        p = np.zeros(8)
        for i, name in enumerate(_PARAM_NAMES[self.kind]):
            p[i] = self.params[name]
        return p

    @property
    def noise_distribution(self):
        return "normal" if self.kind == "stuart-landau-x" else None

    def sample_initial(self, rng, n):
        if self.kind.startswith("stuart-landau"):
            # uniform phase is what the ensemble average integrates over
            a = math.sqrt(self.params["alpha"])
            radius = rng.uniform(0.5 * a, 1.5 * a, n)
            phase = rng.uniform(-np.pi, np.pi, n)
            return np.column_stack([radius * np.cos(phase), radius * np.sin(phase)])
        box = _INIT_BOX[self.kind]
        lo = np.array([b[0] for b in box])
        hi = np.array([b[1] for b in box])
        return lo + (hi - lo) * rng.random((n, len(box)))

    def sample_noise(self, rng, size):
        if self.noise_distribution is None:
            return np.zeros(size)
        return rng.standard_normal(size)


@dataclass
class CopyMapSpec:
    """COPY map ``x' = 2 lam tanh(x) cos(theta)``, ``theta' = (theta + 2 pi omega) mod 2 pi + iota u``."""

    lam: float = 1.5
    omega: float = GOLDEN_OMEGA
    iota: float = 1.0

    noise_distribution = None
    dim = 2

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidArgumentError(f"lambda must be positive, got {self.lam}")

    def sample_initial(self, rng, n):
        return np.column_stack([rng.uniform(-1.0, 1.0, n), rng.uniform(0.0, 2 * np.pi, n)])

    def sample_noise(self, rng, size):
        return np.zeros(size)


SystemSpec = Union[EsnSpec, OdeSpec, CopyMapSpec]


def is_discrete(spec):
    return not isinstance(spec, OdeSpec)


def time_unit(spec):
    """Model time per input step (1 for maps)."""
    return spec.dt if isinstance(spec, OdeSpec) else 1.0


# ---------------------------------------------------------------------------
# single-step operations


def _as_state(x, dim):
    sv = x if isinstance(x, StateVector) else StateVector(np.asarray(x, dtype=float))
    if len(sv) != dim:
        raise InvalidArgumentError(f"state has dimension {len(sv)}, expected {dim}")
    return sv


def esn_step(spec, r, u, v=0.0):
    r = _as_state(r, spec.d)
    pre = spec.W @ r.components + (spec.alpha * u + spec.sigma * v) * spec.w_in
    return StateVector(np.tanh(pre), r.time_index + 1)


def ode_derivative(spec, x, u, v=0.0):
    """Right-hand side of ``spec`` at state ``x`` with input ``u`` and noise ``v``."""
    x = _as_state(x, spec.dim)
    if spec.kind == "stuart-landau-radial" and not np.any(x.components):
        raise SingularityError("radial input direction undefined at x = y = 0")
    s = x.components[None, :]
    return _codes._rhs(spec.code, spec.param_array, s, float(u), np.array([float(v)]))[0]


def rk4_step(spec, x, u, v=0.0):
    x = _as_state(x, spec.dim)
    state = x.components[None, :].copy()
    out = np.empty((1, 1, spec.dim))
    vv = np.array([[_scaled_noise(spec, v)]]) if v else None
    _raise_status(advance_raw(spec, state, np.array([float(u)]), vv, out), 0, 0)
    return StateVector(state[0], x.time_index + 1)


def copy_map_step(spec, x, theta, u):
    x_new = 2.0 * spec.lam * math.tanh(x) * math.cos(theta)
    theta_new = math.fmod(theta + 2.0 * math.pi * spec.omega, 2.0 * math.pi)
    if theta_new < 0:
        theta_new += 2.0 * math.pi
    return x_new, theta_new + spec.iota * u


# ---------------------------------------------------------------------------
# block advancement


def _scaled_noise(spec, v):
    if isinstance(spec, OdeSpec) and spec.noise_scaling == "white":
        return v / math.sqrt(spec.dt)
    return v


def advance_raw(spec, state, u, v, out, kern=None):
    """Advance ``state`` (n, dim) in place through inputs ``u``; return kernel status."""
    kern = kern or _backend.kernels
    u = np.ascontiguousarray(u, dtype=float)
    if v is not None:
        v = np.ascontiguousarray(v, dtype=float)
    if isinstance(spec, EsnSpec):
        work = np.empty_like(state)
        return kern.esn_run(spec.W, spec.w_in, spec.alpha, spec.sigma, state, u, v, out, work)
    if isinstance(spec, OdeSpec):
        if v is not None:
            v = _scaled_noise(spec, v)
            if spec.noise_distribution is None:
                v = None
        return kern.ode_run(spec.code, spec.param_array, spec.dt, state, u, v, out, spec.escape_radius)
    if isinstance(spec, CopyMapSpec):
        return kern.copy_run(spec.lam, spec.omega, spec.iota, state, u, out)
    raise InvalidArgumentError(f"unsupported system spec {type(spec).__name__}")


def _raise_status(status, step_offset, trial_offset):
    code, step, trial = status
    if code == 0:
        return
    step = int(step) + step_offset
    trial = int(trial) + trial_offset
    if code == 2:
        raise SingularityError(
            f"radial input undefined at x = y = 0 (step {step}, trial {trial})", step, trial
        )
    raise DivergenceError(f"state diverged at step {step} (trial {trial})", step, trial)


def advance(spec, state, u, v, out, step_offset=0, trial_offset=0, kern=None):
    """Like :func:`advance_raw` but raises on divergence or singularity."""
    _raise_status(advance_raw(spec, state, u, v, out, kern), step_offset, trial_offset)


def simulate_trajectory(spec, drive, init, washout=1000, kern=None):
    """Iterate ``spec`` through ``drive`` from ``init``; returns a one-trial bundle."""
    if not isinstance(drive, DriveSequence):
        drive = DriveSequence(drive)
    if drive.length <= washout:
        raise InvalidArgumentError(f"drive length {drive.length} must exceed washout {washout}")
    x0 = init.components if isinstance(init, StateVector) else np.asarray(init, dtype=float)
    if x0.reshape(-1).shape[0] != spec.dim:
        raise InvalidArgumentError(f"initial state has dimension {x0.size}, expected {spec.dim}")
    state = np.ascontiguousarray(x0, dtype=float).reshape(1, spec.dim).copy()
    out = np.empty((drive.length, 1, spec.dim))
    noise = None if drive.noises is None else drive.noises[None, :]
    advance(spec, state, drive.inputs, noise, out, kern=kern)
    return TrajectoryBundle(
        states=np.ascontiguousarray(out.transpose(1, 0, 2)),
        inputs=drive.inputs,
        noises=noise,
        washout=washout,
    )
