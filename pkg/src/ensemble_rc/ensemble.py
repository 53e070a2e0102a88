"""Spatially multiplexed ensembles and the weighted ensemble average.

``L`` identical systems share one input sequence and differ only in their
initial state and (optionally) their private noise. Trial ``l`` draws both from
its own counter-based stream derived from ``(master_seed, l)``, so any trial can
be regenerated in isolation.

Two entry points exist. :func:`build_ensemble` materialises every trajectory
and is meant for small ``L``. :func:`ensemble_features` streams trials through
the kernels chunk by chunk and never holds more than one chunk of states, which
is what the desk-scale experiments (``L`` up to 1e5) use. Both reduce over
trials in a fixed chunk order, so results do not depend on the thread count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _backend
from .dynamics import TrajectoryBundle, _raise_status, advance, advance_raw
from .errors import DivergenceError, InvalidArgumentError, PoisonedFeatureError, UndefinedMetricError

CHUNK = 4096
NOISE_BLOCK = 1024
STEP_BLOCK = 64
LOG_CLAMP = 1e-300


def thread_budget(default=1):
    """Thread budget from ``ENSEMBLE_RC_THREADS`` (falls back to ``default``)."""
    raw = os.environ.get("ENSEMBLE_RC_THREADS")
    if raw is None or raw == "":
        return default
    try:
        n = int(raw)
    except ValueError:
        raise InvalidArgumentError(f"ENSEMBLE_RC_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise InvalidArgumentError(f"ENSEMBLE_RC_THREADS must be >= 1, got {n}")
    return n


# ---------------------------------------------------------------------------
# configuration


@dataclass
class EnsembleConfig:
    """Trial count, averaging weights and seeding policy.

    ``weights`` is ``"uniform"`` (each trial weighted 1/L; the sum is formed
    first and divided by ``L`` once) or an explicit length-``L`` sequence.
    With ``per_trial_noise=False`` the systems run noise-free.
    ``divergence="drop"`` removes trials whose state blows up and averages
    over the survivors instead of raising.
    """

    L: int = 1
    weights: Union[str, Sequence[float]] = "uniform"
    master_seed: int = 0
    per_trial_noise: bool = True
    divergence: str = "raise"

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise InvalidArgumentError(f"L must be an integer >= 1, got {self.L}")
        self.L = int(self.L)
        if not (0 <= int(self.master_seed) < 2**64):
            raise InvalidArgumentError("master_seed must be a 64-bit unsigned integer")
        if isinstance(self.weights, str):
            if self.weights != "uniform":
                raise InvalidArgumentError(f"unknown weight scheme {self.weights!r}")
        else:
            w = np.asarray(self.weights, dtype=float).reshape(-1)
            if w.shape[0] != self.L:
                raise InvalidArgumentError(f"explicit weights have length {w.shape[0]}, L={self.L}")
            self.weights = w
        if self.divergence not in ("raise", "drop"):
            raise InvalidArgumentError(f"divergence must be 'raise' or 'drop', got {self.divergence!r}")

    @property
    def uniform(self):
        return isinstance(self.weights, str)

    def weight_vector(self):
        if self.uniform:
            return np.full(self.L, 1.0 / self.L)
        return np.array(self.weights)


def trial_rng(master_seed, trial):
    """Independent generator for one trial, reproducible in isolation."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial),))
    return np.random.Generator(np.random.Philox(ss))


def _noisy(spec, cfg):
    if not cfg.per_trial_noise or spec.noise_distribution is None:
        return False
    sigma = getattr(spec, "sigma", None)
    if sigma is not None and sigma == 0:
        return False
    if getattr(spec, "kind", None) == "stuart-landau-x" and spec.params["sigma2"] == 0:
        return False
    return True


# ---------------------------------------------------------------------------
# observation functions

_KINDS = (
    "identity", "power", "cos", "sin", "tan", "exp", "expnegsq", "expsq",
    "logsq", "abs", "relu", "adc",
)
_NORMS = (None, "stddev", "minmax")
_STD_DEFAULT = ("cos", "sin", "tan", "relu")


@dataclass(frozen=True)
class ObservationFn:
    """Pointwise observation ``phi`` applied to one state component.

    ``param`` is the exponent for ``power``, the frequency ``k`` for the
    trigonometric kinds and the bit count for ``adc``. Normalisation
    statistics are per trial over the retained window: ``stddev`` divides by
    the temporal standard deviation, ``minmax`` maps to [0, 1].
    """

    kind: str = "identity"
    param: float = 1
    normalization: Optional[str] = "default"

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in _KINDS:
            raise InvalidArgumentError(f"unknown observation kind {self.kind!r}")
        norm = self.normalization
        if norm == "default":
            norm = "stddev" if kind in _STD_DEFAULT else ("minmax" if kind == "adc" else None)
        if isinstance(norm, str):
            norm = norm.lower()
            norm = None if norm == "none" else norm
        if norm not in _NORMS:
            raise InvalidArgumentError(f"unknown normalization {self.normalization!r}")
        object.__setattr__(self, "normalization", norm)
        if kind == "power" and (int(self.param) != self.param or self.param < 1):
            raise InvalidArgumentError(f"power exponent must be an integer >= 1, got {self.param}")
        if kind == "adc":
            if int(self.param) != self.param or not 1 <= self.param <= 16:
                raise InvalidArgumentError(f"adc bits must be in [1, 16], got {self.param}")
            if norm != "minmax":
                raise InvalidArgumentError("adc requires minmax normalization")

    @classmethod
    def parse(cls, text):
        """Build from a short name: ``x``, ``x^3``, ``cos``, ``cos2x``, ``adc4``, ``logsq``..."""
        t = text.strip().lower().replace(" ", "")
        if t in ("x", "identity"):
            return cls("identity")
        if t.startswith("x^"):
            return cls("power", int(t[2:]))
        if t.startswith("adc"):
            return cls("adc", int(t[3:] or 4))
        for trig in ("cos", "sin", "tan"):
            if t.startswith(trig):
                rest = t[len(trig):].strip("()").rstrip("x")
                return cls(trig, float(rest) if rest else 1.0)
        aliases = {"exp(x^2)": "expsq", "exp(-x^2)": "expnegsq", "log(x^2)": "logsq",
                   "|x|": "abs", "relu(x)": "relu", "exp(x)": "exp"}
        return cls(aliases.get(t, t))

    @property
    def name(self):
        k, p = self.kind, self.param
        if k == "identity":
            base = "x"
        elif k == "power":
            base = "x" if p == 1 else f"x^{int(p)}"
        elif k in ("cos", "sin", "tan"):
            base = f"{k}(x)" if p == 1 else f"{k}({p:g}x)"
        elif k == "adc":
            base = f"adc{int(p)}"
        else:
            base = k
        default = "stddev" if k in _STD_DEFAULT else ("minmax" if k == "adc" else None)
        if self.normalization != default:
            base += f"[{self.normalization or 'raw'}]"
        return base

    @property
    def is_raw_power(self):
        return self.normalization is None and self.kind in ("identity", "power")

    @property
    def degree(self):
        return 1 if self.kind == "identity" else int(self.param)

    def apply(self, x, stats=None):
        """Apply to ``x`` (..., n) with per-trial ``stats`` broadcast on the last axis.

        Returns ``(values, clamp_count)``.
        """
        x = np.asarray(x, dtype=float)
        if self.normalization == "stddev":
            x = x / stats["std"]
        elif self.normalization == "minmax":
            span = stats["max"] - stats["min"]
            span = np.where(span > 0, span, 1.0)
            x = np.clip((x - stats["min"]) / span, 0.0, 1.0)
        k, p = self.kind, self.param
        clamps = 0
        if k == "identity":
            y = x
        elif k == "power":
            y = x ** int(p)
        elif k == "cos":
            y = np.cos(p * x)
        elif k == "sin":
            y = np.sin(p * x)
        elif k == "tan":
            y = np.tan(p * x)
        elif k == "exp":
            y = np.exp(x)
        elif k == "expnegsq":
            y = np.exp(-x * x)
        elif k == "expsq":
            y = np.exp(x * x)
        elif k == "logsq":
            sq = x * x
            small = sq < LOG_CLAMP
            clamps = int(np.count_nonzero(small))
            y = np.log(np.where(small, LOG_CLAMP, sq))
        elif k == "abs":
            y = np.abs(x)
        elif k == "relu":
            y = np.maximum(x, 0.0)
        else:
            levels = 2 ** int(p)
            y = np.floor(levels * x) / levels
        return y, clamps


def trial_stats(series):
    """Per-trial normalisation statistics of ``series`` with trials on the last axis."""
    series = np.asarray(series, dtype=float)
    std = series.std(axis=0)
    return {
        "std": np.where(std > 0, std, 1.0),
        "min": series.min(axis=0),
        "max": series.max(axis=0),
    }


# ---------------------------------------------------------------------------
# materialised ensembles


def build_ensemble(spec, cfg, drive_inputs, length=None, washout=1000, kern=None):
    """Simulate all ``cfg.L`` trials and keep every state.

    Memory is ``L * length * dim`` doubles; use :func:`ensemble_features`
    for large ensembles.
    """
    u = np.ascontiguousarray(drive_inputs, dtype=float).reshape(-1)
    if length is None:
        length = u.shape[0]
    if u.shape[0] < length:
        raise InvalidArgumentError(f"drive has {u.shape[0]} steps, need {length}")
    u = u[:length]
    if length <= washout:
        raise InvalidArgumentError(f"length {length} must exceed washout {washout}")
    noisy = _noisy(spec, cfg)
    rngs = [trial_rng(cfg.master_seed, l) for l in range(cfg.L)]
    state = np.vstack([spec.sample_initial(r, 1) for r in rngs])
    out = np.empty((length, cfg.L, spec.dim))
    noise = np.zeros((cfg.L, length)) if noisy else None
    for s in range(0, length, NOISE_BLOCK):
        e = min(s + NOISE_BLOCK, length)
        if noisy:
            for i, r in enumerate(rngs):
                noise[i, s:e] = spec.sample_noise(r, e - s)
        advance(spec, state, u[s:e], None if noise is None else noise[:, s:e],
                out[s:e], step_offset=s, kern=kern)
    return TrajectoryBundle(
        states=np.ascontiguousarray(out.transpose(1, 0, 2)),
        inputs=u,
        noises=noise,
        washout=washout,
    )


def apply_observation(phi, bundle, component=0):
    """Observed retained series ``phi(x_component)``, shape ``(L, T_retained)``.

    Returns ``(values, clamp_count)``.
    """
    if not 0 <= component < bundle.dim:
        raise InvalidArgumentError(f"component {component} out of range for dimension {bundle.dim}")
    x = bundle.retained[:, :, component].T
    stats = trial_stats(x) if phi.normalization else None
    y, clamps = phi.apply(x, stats)
    return np.ascontiguousarray(y.T), clamps


def ensemble_average(observed, weights=None):
    """Weighted average over trials of ``observed`` (L, T).

    ``weights=None`` means uniform. Trials are folded in chunks of 4096 in
    index order.
    """
    observed = np.asarray(observed, dtype=float)
    if observed.ndim == 1:
        observed = observed[None, :]
    L = observed.shape[0]
    if weights is not None:
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.shape[0] != L:
            raise InvalidArgumentError(f"weights have length {w.shape[0]}, L={L}")
    total = np.zeros(observed.shape[1])
    for c in range(0, L, CHUNK):
        block = observed[c:c + CHUNK]
        if weights is not None:
            block = block * w[c:c + CHUNK, None]
        total = total + block.sum(axis=0)
    return total / L if weights is None else total


def synchronization_index(bundle, component=0):
    """1 minus the mean cross-trial spread relative to the pooled temporal spread.

    Cross-trial spread at time ``t`` is the standard deviation over trials;
    the pooled temporal spread is ``sqrt(mean_l var_t x_l)``. Clipped to [0, 1].
    """
    x = bundle.retained[:, :, component] if isinstance(bundle, TrajectoryBundle) else np.asarray(bundle)
    if x.shape[0] < 2:
        raise InvalidArgumentError("synchronization index needs L >= 2")
    cross = x.std(axis=0).mean()
    pooled = math.sqrt(x.var(axis=1).mean())
    return _sync_from(cross, pooled)


def _sync_from(cross, pooled):
    if not pooled > 0:
        raise UndefinedMetricError("trajectories are constant; synchronization index undefined")
    return float(min(1.0, max(0.0, 1.0 - cross / pooled)))


# ---------------------------------------------------------------------------
# feature matrices


@dataclass
class FeatureMatrix:
    """Time x feature matrix fed to readouts; column names carry provenance."""

    values: np.ndarray
    columns: list

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        self.columns = list(self.columns)
        if len(self.columns) != self.values.shape[1]:
            raise InvalidArgumentError(
                f"{len(self.columns)} names for {self.values.shape[1]} columns"
            )
        if len(set(self.columns)) != len(self.columns):
            dup = sorted({c for c in self.columns if self.columns.count(c) > 1})
            raise InvalidArgumentError(f"duplicate column names: {dup}")
        bad = ~np.all(np.isfinite(self.values), axis=0)
        if bad.any():
            raise PoisonedFeatureError(f"non-finite values in column {self.columns[int(np.flatnonzero(bad)[0])]!r}")

    @property
    def n_rows(self):
        return self.values.shape[0]

    @property
    def n_cols(self):
        return self.values.shape[1]

    def select(self, names):
        idx = [self.columns.index(n) for n in names]
        return FeatureMatrix(self.values[:, idx], [self.columns[i] for i in idx])

    def rows(self, sl):
        return FeatureMatrix(self.values[sl], self.columns)

    def hstack(self, other):
        return FeatureMatrix(np.hstack([self.values, other.values]), self.columns + other.columns)


def feature_name(system, component, phi, averaged=True):
    return f"{system}:x{component}:{phi.name}:{'avg' if averaged else 'raw'}"


def assemble_features(averaged, include_raw=None):
    """Stack named series into a :class:`FeatureMatrix`.

    ``averaged`` and ``include_raw`` are sequences of ``(name, series)``.
    """
    items = list(averaged) + list(include_raw or [])
    if not items:
        raise InvalidArgumentError("no feature series given")
    lengths = {np.asarray(s).shape[0] for _, s in items}
    if len(lengths) != 1:
        raise InvalidArgumentError(f"feature series have unequal lengths {sorted(lengths)}")
    names = [n for n, _ in items]
    return FeatureMatrix(np.column_stack([np.asarray(s, dtype=float) for _, s in items]), names)


# ---------------------------------------------------------------------------
# streaming engine


@dataclass(frozen=True)
class FeatureSpec:
    """One ensemble-averaged feature column: ``phi`` of state ``component``."""

    component: int
    phi: ObservationFn


@dataclass
class EnsembleResult:
    """Output of :func:`ensemble_features`."""

    features: FeatureMatrix
    raw: Optional[FeatureMatrix]
    inputs: np.ndarray
    clamp_count: int = 0
    sync_index: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    dropped: list = field(default_factory=list)


class _Plan:
    def __init__(self, spec, cfg, features, sync_components, raw_features):
        self.spec = spec
        self.cfg = cfg
        self.features = list(features)
        self.raw_features = list(raw_features)
        for f in self.features + self.raw_features:
            if not 0 <= f.component < spec.dim:
                raise InvalidArgumentError(f"component {f.component} out of range for dimension {spec.dim}")
        self.sync = sorted(set(sync_components))
        fast = [f for f in self.features if f.phi.is_raw_power]
        self.slow = [i for i, f in enumerate(self.features) if not f.phi.is_raw_power]
        self.fast = [i for i, f in enumerate(self.features) if f.phi.is_raw_power]
        comps = sorted({f.component for f in fast} | set(self.sync))
        self.ps_comps = np.array(comps, dtype=np.int_)
        self.kmax = max([f.phi.degree for f in fast] + ([2] if self.sync else [0]))
        self.norm_comps = sorted({f.component for f in self.features + self.raw_features
                                  if f.phi.normalization})
        self.stat_comps = sorted(set(self.norm_comps) | set(self.sync))
        self.noisy = _noisy(spec, cfg)


def _chunk_worker(plan, u, washout, kern, stats, c0, c1):
    """Simulate trials [c0, c1) and reduce them; returns per-chunk partial sums.

    Under the ``drop`` policy a diverging trial is removed and the chunk is
    replayed from its seeds without it, so the outcome does not depend on
    where the divergence was detected.
    """
    ids = np.arange(c0, c1)
    dropped = []
    while True:
        try:
            part = _chunk_pass(plan, u, washout, kern, stats, c0, c1, ids)
        except DivergenceError as exc:
            if plan.cfg.divergence != "drop" or ids.size == 1:
                raise
            ids = ids[ids != exc.trial]
            dropped.append(int(exc.trial))
            continue
        part["dropped"] = sorted(dropped)
        part["alive"] = int(ids.size)
        return part


def _chunk_pass(plan, u, washout, kern, stats, c0, c1, ids):
    spec, cfg = plan.spec, plan.cfg
    n = ids.size
    loc = ids - c0
    T = u.shape[0]
    R = T - washout
    rngs = [trial_rng(cfg.master_seed, l) for l in ids]
    state = np.vstack([spec.sample_initial(r, 1) for r in rngs])
    w = np.ones(n) if cfg.uniform else np.ascontiguousarray(cfg.weights[ids])
    nf = len(plan.features)
    acc = np.zeros((R, nf))
    ps = np.zeros((R, len(plan.ps_comps), plan.kmax)) if plan.kmax else None
    raw = np.zeros((R, len(plan.raw_features))) if (c0 == 0 and plan.raw_features) else None
    nsc = len(plan.stat_comps)
    shift = np.zeros((n, nsc))
    tsum = np.zeros((n, nsc))
    tsq = np.zeros((n, nsc))
    tmin = np.full((n, nsc), np.inf)
    tmax = np.full((n, nsc), -np.inf)
    clamps = 0
    cstats = None
    if stats is not None:
        cstats = {c: {k: v[ids] for k, v in s.items()} for c, s in stats.items()}
    noise = None
    for s in range(0, T, NOISE_BLOCK):
        e = min(s + NOISE_BLOCK, T)
        if plan.noisy:
            noise = np.empty((n, e - s))
            for i, r in enumerate(rngs):
                noise[i] = spec.sample_noise(r, e - s)
        for b in range(s, e, STEP_BLOCK):
            be = min(b + STEP_BLOCK, e)
            out = np.empty((be - b, n, spec.dim))
            v = None if noise is None else noise[:, b - s:be - s]
            code, step, pos = advance_raw(spec, state, u[b:be], v, out, kern)
            if code:
                _raise_status((code, step, ids[pos]), b, 0)
            if be <= washout:
                continue
            lo = max(b, washout)
            blk = out[lo - b:]
            rows = slice(lo - washout, be - washout)
            if stats is None and nsc:
                x = blk[:, :, plan.stat_comps]
                if lo == washout:
                    shift[:] = x[0]
                xs = x - shift
                tsum += xs.sum(axis=0)
                tsq += (xs * xs).sum(axis=0)
                np.minimum(tmin, x.min(axis=0), out=tmin)
                np.maximum(tmax, x.max(axis=0), out=tmax)
            if stats is None and plan.norm_comps:
                continue  # first pass only gathers normalisation statistics
            if ps is not None:
                kern.power_sums(np.ascontiguousarray(blk), plan.ps_comps, plan.kmax, w, ps[rows])
            for j in plan.slow:
                f = plan.features[j]
                y, nc = f.phi.apply(blk[:, :, f.component], cstats.get(f.component) if cstats else None)
                clamps += nc
                acc[rows, j] = (y * w).sum(axis=1)
            if raw is not None:
                for j, f in enumerate(plan.raw_features):
                    st = None
                    if f.phi.normalization:
                        st = {k: v[:1] for k, v in cstats[f.component].items()}
                    y, nc = f.phi.apply(blk[:, :1, f.component], st)
                    raw[rows, j] = y[:, 0]
    # per-trial statistics are laid out over the whole chunk; dropped rows stay neutral
    full = {"shift": np.zeros((c1 - c0, nsc)), "sum": np.zeros((c1 - c0, nsc)),
            "sq": np.zeros((c1 - c0, nsc)), "min": np.full((c1 - c0, nsc), np.inf),
            "max": np.full((c1 - c0, nsc), -np.inf)}
    for k, a in (("shift", shift), ("sum", tsum), ("sq", tsq), ("min", tmin), ("max", tmax)):
        full[k][loc] = a
    return {"acc": acc, "ps": ps, "raw": raw, "clamps": clamps, "tstats": full}


def _chunks(L):
    return [(c, min(c + CHUNK, L)) for c in range(0, L, CHUNK)]


def _run_pass(plan, u, washout, kern, stats, threads):
    jobs = _chunks(plan.cfg.L)
    work = lambda job: _chunk_worker(plan, u, washout, kern, stats, *job)
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            yield from pool.map(work, jobs)
    else:
        for job in jobs:
            yield work(job)


def _stats_from(parts, plan, R):
    stats = {}
    for j, c in enumerate(plan.stat_comps):
        shift = np.concatenate([p["tstats"]["shift"][:, j] for p in parts])
        s = np.concatenate([p["tstats"]["sum"][:, j] for p in parts])
        q = np.concatenate([p["tstats"]["sq"][:, j] for p in parts])
        mean_s = s / R
        var = np.maximum(q / R - mean_s * mean_s, 0.0)
        std = np.sqrt(var)
        stats[c] = {
            "std": np.where(std > 0, std, 1.0),
            "var": var,
            "mean": shift + mean_s,
            "min": np.concatenate([p["tstats"]["min"][:, j] for p in parts]),
            "max": np.concatenate([p["tstats"]["max"][:, j] for p in parts]),
        }
    return stats


def ensemble_features(spec, cfg, inputs, washout=1000, features=(), raw_features=(),
                      sync_components=(), system="sys", threads=None, kern=None):
    """Stream ``cfg.L`` trials and return ensemble-averaged feature columns.

    ``features`` are averaged over trials with the configured weights;
    ``raw_features`` are taken from trial 0 alone (the non-averaged baseline).
    When any feature needs per-trial normalisation the ensemble is simulated
    twice from the same seeds: once for statistics, once for features.
    ``sync_components`` adds :func:`synchronization_index` values computed on
    the fly.
    """
    import time

    kern = kern or _backend.kernels
    threads = threads or thread_budget()
    u = np.ascontiguousarray(inputs, dtype=float).reshape(-1)
    T = u.shape[0]
    if T <= washout:
        raise InvalidArgumentError(f"input length {T} must exceed washout {washout}")
    R = T - washout
    plan = _Plan(spec, cfg, features, sync_components, raw_features)
    timings = {}
    stats = None
    t0 = time.perf_counter()
    if plan.norm_comps:
        parts = [dict(tstats=p["tstats"]) for p in _run_pass(plan, u, washout, kern, None, threads)]
        stats = _stats_from(parts, plan, R)
        timings["stats_pass"] = time.perf_counter() - t0
        t0 = time.perf_counter()
    acc = np.zeros((R, len(plan.features)))
    ps = np.zeros((R, len(plan.ps_comps), plan.kmax)) if plan.kmax else None
    raw = None
    clamps = 0
    alive = 0
    dropped = []
    tparts = []
    for part in _run_pass(plan, u, washout, kern, stats, threads):
        alive += part["alive"]
        dropped += part["dropped"]
        acc += part["acc"]
        if ps is not None:
            ps += part["ps"]
        if part["raw"] is not None:
            raw = part["raw"]
        clamps += part["clamps"]
        tparts.append(dict(tstats=part["tstats"]))
    timings["feature_pass"] = time.perf_counter() - t0
    if stats is None:
        stats = _stats_from(tparts, plan, R)
    if cfg.uniform:
        acc /= alive
        if ps is not None:
            ps /= alive
    comp_pos = {c: i for i, c in enumerate(plan.ps_comps.tolist())}
    for j in plan.fast:
        f = plan.features[j]
        acc[:, j] = ps[:, comp_pos[f.component], f.phi.degree - 1]
    names = [feature_name(system, f.component, f.phi) for f in plan.features]
    fm = FeatureMatrix(acc, names) if names else None
    raw_fm = None
    if raw is not None:
        raw_fm = FeatureMatrix(raw, [feature_name(system, f.component, f.phi, False)
                                     for f in plan.raw_features])
    sync = {}
    for c in plan.sync:
        if cfg.L < 2:
            raise InvalidArgumentError("synchronization index needs L >= 2")
        m1 = ps[:, comp_pos[c], 0]
        m2 = ps[:, comp_pos[c], 1]
        if cfg.uniform:
            cross = np.sqrt(np.maximum(m2 - m1 * m1, 0.0)).mean()
            st = stats[c]
            pooled = math.sqrt(st["var"][st["max"] >= st["min"]].mean())
        else:
            raise InvalidArgumentError("synchronization index requires uniform weights")
        sync[c] = _sync_from(cross, pooled)
    return EnsembleResult(fm, raw_fm, u[washout:], clamps, sync, timings, dropped)


def time_invariance_check(spec, cfg, phi, drive_inputs, window_a, window_b,
                          component=0, threads=None, kern=None):
    """Max deviation between E[phi(x)] on two windows fed identical input.

    Two independent ensembles (``master_seed`` and ``master_seed + 1``) are
    averaged; ensemble A is read on ``window_a`` and ensemble B on
    ``window_b``, each a ``(start, stop)`` step range of ``drive_inputs``.
    """
    u = np.asarray(drive_inputs, dtype=float).reshape(-1)
    (a0, a1), (b0, b1) = window_a, window_b
    if a1 - a0 != b1 - b0 or a1 - a0 <= 0:
        raise InvalidArgumentError("windows must be non-empty and of equal length")
    if not np.array_equal(u[a0:a1], u[b0:b1]):
        raise InvalidArgumentError("windows do not receive identical input")
    feat = [FeatureSpec(component, phi)]
    series = []
    for seed in (cfg.master_seed, cfg.master_seed + 1):
        c = EnsembleConfig(cfg.L, cfg.weights, seed, cfg.per_trial_noise)
        res = ensemble_features(spec, c, u, washout=0, features=feat, threads=threads, kern=kern)
        series.append(res.features.values[:, 0])
    return float(np.max(np.abs(series[0][a0:a1] - series[1][b0:b1])))
