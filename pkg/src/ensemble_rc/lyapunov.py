"""Maximum (conditional) Lyapunov exponents and bifurcation scans.

The exponent follows the two-trajectory renormalisation recipe: a reference
and a perturbed copy receive the same input and noise, their separation is
measured every ``renorm_interval`` steps and rescaled back to ``eps0``, and
the mean log growth per unit time is returned (time unit ``dt`` for ODEs,
one step for maps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .dynamics import CopyMapSpec, DriveSequence, advance, is_discrete, time_unit
from .errors import DegeneratePerturbationError, DivergenceError, InvalidArgumentError, SingularityError
from .io import write_csv


@dataclass
class LyapunovConfig:
    total_steps: int = 100_000
    renorm_interval: Optional[int] = None
    eps0: float = 1e-8
    transient_discard: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not self.eps0 > 0:
            raise InvalidArgumentError(f"eps0 must be positive, got {self.eps0}")
        if self.renorm_interval is not None and self.renorm_interval < 1:
            raise InvalidArgumentError("renorm_interval must be >= 1")
        if self.total_steps < 1 or self.transient_discard < 0:
            raise InvalidArgumentError("total_steps must be >= 1 and transient_discard >= 0")

    def interval_for(self, spec):
        if self.renorm_interval is not None:
            return self.renorm_interval
        return 1 if is_discrete(spec) else 10


def _separation(spec, ref, pert):
    d = pert - ref
    if isinstance(spec, CopyMapSpec):
        # theta lives on a circle; the map only sees it through cos
        d[1] = (d[1] + math.pi) % (2 * math.pi) - math.pi
    return d


def max_lyapunov(spec, drive, cfg=None, init=None, kern=None):
    """Largest conditional Lyapunov exponent of ``spec`` under ``drive``.

    ``drive`` needs ``cfg.transient_discard + cfg.total_steps`` steps. Its
    noise (if any) is applied identically to both trajectories.
    """
    cfg = cfg or LyapunovConfig()
    if not isinstance(drive, DriveSequence):
        drive = DriveSequence(drive)
    need = cfg.transient_discard + cfg.total_steps
    if drive.length < need:
        raise InvalidArgumentError(f"drive has {drive.length} steps, need {need}")
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    x0 = spec.sample_initial(rng, 1)[0] if init is None else np.asarray(init, dtype=float)
    u = drive.inputs
    v = drive.noises
    state = np.ascontiguousarray(x0, dtype=float).reshape(1, -1).copy()
    D = cfg.transient_discard
    if D:
        out = np.empty((D, 1, spec.dim))
        advance(spec, state, u[:D], None if v is None else v[None, :D], out, kern=kern)
    direction = rng.standard_normal(spec.dim)
    direction /= np.linalg.norm(direction)
    pair = np.vstack([state, state + cfg.eps0 * direction])
    k = cfg.interval_for(spec)
    total = 0.0
    count = 0
    out = np.empty((k, 2, spec.dim))
    for s in range(D, D + cfg.total_steps - k + 1, k):
        vv = None if v is None else np.ascontiguousarray(np.vstack([v[s:s + k]] * 2))
        advance(spec, pair, u[s:s + k], vv, out, step_offset=s, kern=kern)
        d = _separation(spec, pair[0], pair[1])
        dist = float(np.linalg.norm(d))
        if not dist > 0:
            raise DegeneratePerturbationError(f"trajectories merged at step {s + k}")
        total += math.log(dist / cfg.eps0)
        count += 1
        pair[1] = pair[0] + d * (cfg.eps0 / dist)
    if count == 0:
        raise InvalidArgumentError("total_steps shorter than one renormalisation interval")
    return total / (count * k * time_unit(spec))


@dataclass
class BifurcationScan:
    grid: np.ndarray
    samples: np.ndarray
    lambdas: np.ndarray
    errors: dict = field(default_factory=dict)

    def to_csv(self, path, name="param"):
        header = [name, "lambda"] + [f"x{i}" for i in range(self.samples.shape[1])]
        rows = [[g, lam] + list(row) for g, lam, row in zip(self.grid, self.lambdas, self.samples)]
        return write_csv(path, header, rows)


def bifurcation_scan(spec_family: Callable, grid, drive, washout=1000, n_samples=100, stride=1,
                     cfg=None, component=0, kern=None):
    """Sampled first-component values and ``lambda_top`` over a parameter grid.

    ``spec_family(p)`` builds the system for grid value ``p``. Points that
    diverge get NaN entries and their message in ``errors``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise InvalidArgumentError("grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise InvalidArgumentError("grid must be strictly increasing")
    cfg = cfg or LyapunovConfig()
    if not isinstance(drive, DriveSequence):
        drive = DriveSequence(drive)
    need = washout + n_samples * stride
    if drive.length < need:
        raise InvalidArgumentError(f"drive has {drive.length} steps, need {need}")
    samples = np.full((grid.size, n_samples), np.nan)
    lambdas = np.full(grid.size, np.nan)
    errors = {}
    for i, p in enumerate(grid):
        spec = spec_family(float(p))
        rng = np.random.Generator(np.random.Philox(cfg.seed))
        state = np.ascontiguousarray(spec.sample_initial(rng, 1))
        try:
            out = np.empty((need, 1, spec.dim))
            noise = None if drive.noises is None else drive.noises[None, :need]
            advance(spec, state, drive.inputs[:need], noise, out, kern=kern)
            samples[i] = out[washout:need:stride, 0, component][:n_samples]
            lambdas[i] = max_lyapunov(spec, drive, cfg, kern=kern)
        except (DivergenceError, SingularityError, DegeneratePerturbationError) as exc:
            errors[float(p)] = str(exc)
    return BifurcationScan(grid, samples, lambdas, errors)
