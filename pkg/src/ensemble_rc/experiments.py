"""Experiment pipelines behind ``ensemble-rc run``.

Each pipeline takes a resolved config tree, writes its CSV files into the
output directory and returns a flat summary dict. Stage timings are collected
in ``timings`` for the run manifest; they never enter a CSV, so reruns stay
byte-identical.
"""

from __future__ import annotations

import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import capacity, dynamics, ensemble, lyapunov, readout, tasks
from .ensemble import EnsembleConfig, FeatureSpec, ObservationFn
from .errors import InvalidArgumentError
from .io import write_csv


class Context:
    def __init__(self, cfg, out_dir, threads):
        self.cfg = cfg
        self.out = Path(out_dir)
        self.threads = threads
        self.timings = {}
        self.files = []

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        yield
        self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0

    def csv(self, name, header, rows):
        self.files.append(name)
        return write_csv(self.out / name, header, rows)


# ---------------------------------------------------------------------------
# building blocks


def build_system(sys_cfg, **override):
    c = dict(sys_cfg)
    c.update(override)
    t = c["type"]
    if t == "esn":
        return dynamics.EsnSpec.random(c["d"], c["rho"], c["alpha"], c["sigma"], c["matrix_seed"])
    if t == "ode":
        return dynamics.OdeSpec(c["kind"], dict(c["params"] or {}), c["dt"], c["convention"],
                                c["noise_scaling"], c["escape_radius"])
    omega = dynamics.GOLDEN_OMEGA if c["omega"] is None else c["omega"]
    return dynamics.CopyMapSpec(c["lam"], omega, c["iota"])


def system_name(sys_cfg):
    t = sys_cfg["type"]
    return {"esn": "esn", "copy": "copy"}.get(t) or sys_cfg["kind"]


def make_input(in_cfg, n):
    """Input sequence of length ``n``; binary inputs also return their bits."""
    rng = np.random.Generator(np.random.Philox(in_cfg["seed"]))
    dist = in_cfg["distribution"]
    if dist == "uniform":
        return rng.uniform(in_cfg["low"], in_cfg["high"], n), None
    if dist == "normal":
        return rng.standard_normal(n), None
    bits = rng.integers(0, 2, n)
    levels = np.asarray(in_cfg["levels"], dtype=float)
    return levels[bits], bits


def observations(cfg, names=None):
    return [ObservationFn.parse(n) for n in (names or cfg["observations"])]


def components(cfg, spec):
    comps = cfg["components"]
    return list(range(spec.dim)) if comps == "all" else list(comps)


def feature_specs(phis, comps):
    return [FeatureSpec(c, p) for p in phis for c in comps]


def ensemble_cfg(cfg, **override):
    e = dict(cfg["ensemble"])
    e.update(override)
    return EnsembleConfig(int(e["L"]), e["weights"], cfg["seed"], e["per_trial_noise"], e["divergence"])


def protocol(cfg):
    p = cfg["protocol"]
    return p["washout"], p["train"], p["test"]


def split_fraction(cfg):
    _, tr, te = protocol(cfg)
    return tr / (tr + te)


def _curve_rows(curves):
    taus = next(iter(curves.values())).taus
    rows = []
    for i, tau in enumerate(taus):
        row = [int(tau)]
        for c in curves.values():
            row += [c.values[i], c.raw_values[i]]
        rows.append(row)
    total = ["total"]
    for c in curves.values():
        total += [c.mc, float(np.sum(c.raw_values))]
    rows.append(total)
    header = ["tau"]
    for k in curves:
        header += [k, f"{k}_raw"]
    return header, rows


def _mc(ctx, feats, inputs, tau_max=None):
    cap = ctx.cfg["capacity"]
    return capacity.memory_capacity(
        feats, inputs, tau_max or cap["tau_max"], cap["surrogates"], split_fraction(ctx.cfg),
        cap["ridge"], ctx.cfg["seed"])


def _summary(ctx, summary):
    ctx.csv("summary.csv", ["key", "value"], sorted(summary.items()))
    return summary


# ---------------------------------------------------------------------------
# experiments


def run_memory(ctx):
    """mc-esn / mc-chaotic: MC of the ensemble average and of a single trial."""
    cfg = ctx.cfg
    spec = build_system(cfg["system"])
    washout, tr, te = protocol(cfg)
    u, _ = make_input(cfg["input"], washout + tr + te)
    feats = feature_specs(observations(cfg), components(cfg, spec))
    with ctx.stage("simulate"):
        res = ensemble.ensemble_features(
            spec, ensemble_cfg(cfg), u, washout, feats,
            raw_features=feats if cfg["baseline"] else (), system=system_name(cfg["system"]),
            threads=ctx.threads)
    ctx.timings.update({f"simulate.{k}": v for k, v in res.timings.items()})
    with ctx.stage("capacity"):
        curves = {"erc": _mc(ctx, res.features, res.inputs)}
        if res.raw is not None:
            curves["single"] = _mc(ctx, res.raw, res.inputs)
    ctx.csv("memory_curve.csv", *_curve_rows(curves))
    summary = {"L": cfg["ensemble"]["L"], "mc_erc": curves["erc"].mc,
               "bias_floor_erc": curves["erc"].bias_floor, "clamp_count": res.clamp_count,
               "dropped_trials": len(res.dropped)}
    if "single" in curves:
        summary["mc_single"] = curves["single"].mc
        summary["bias_floor_single"] = curves["single"].bias_floor
    return _summary(ctx, summary)


def run_finite_size(ctx):
    """MC of the ensemble average as a function of L."""
    cfg = ctx.cfg
    spec = build_system(cfg["system"])
    washout, tr, te = protocol(cfg)
    u, _ = make_input(cfg["input"], washout + tr + te)
    feats = feature_specs(observations(cfg), components(cfg, spec))
    name = system_name(cfg["system"])
    with ctx.stage("reference"):
        clean = build_system(cfg["system"], sigma=0.0) if cfg["system"]["type"] == "esn" else spec
        ref = ensemble.ensemble_features(clean, ensemble_cfg(cfg, L=1), u, washout, feats,
                                         system=name, threads=ctx.threads)
        mc_ref = _mc(ctx, ref.features, ref.inputs).mc
    rows = []
    for L in cfg["finite_size"]["L_values"]:
        with ctx.stage(f"L={L}"):
            res = ensemble.ensemble_features(spec, ensemble_cfg(cfg, L=L), u, washout, feats,
                                             system=name, threads=ctx.threads)
            rows.append((int(L), _mc(ctx, res.features, res.inputs).mc, mc_ref))
    ctx.csv("mc_vs_L.csv", ["L", "mc", "mc_noise_free_single"], rows)
    summary = {f"mc_L{L}": mc for L, mc, _ in rows}
    summary["mc_noise_free_single"] = mc_ref
    return _summary(ctx, summary)


def narma_point(ctx, rho, obs_names=None):
    """Test NMSE of noise-free, noisy and ensemble-averaged ESN readouts at one ``rho``."""
    cfg = ctx.cfg
    washout, tr, te = protocol(cfg)
    T = washout + tr + te
    u, _ = make_input(cfg["input"], T + 1)
    t = cfg["task"]
    y = tasks.narma10_target(u, t["delta"], t["mu"])
    target = y[washout + 1: T + 1]  # row r predicts y[t + 1]
    u = u[:T]
    noisy = build_system(cfg["system"], rho=rho)
    clean = build_system(cfg["system"], rho=rho, sigma=0.0)
    comps = components(cfg, noisy)
    base = feature_specs([ObservationFn("identity")], comps)
    erc = feature_specs(observations(cfg, obs_names), comps)
    ridge = cfg["capacity"]["ridge"]

    def score(fm):
        model, rep = readout.fit_and_score(fm.values[:tr], target[:tr], fm.values[tr:], target[tr:], ridge)
        return rep.test_nmse

    name = system_name(cfg["system"])
    with ctx.stage(f"rho={rho}:clean"):
        r0 = ensemble.ensemble_features(clean, ensemble_cfg(cfg, L=1), u, washout, base,
                                        system=name, threads=ctx.threads)
    with ctx.stage(f"rho={rho}:ensemble"):
        r1 = ensemble.ensemble_features(noisy, ensemble_cfg(cfg), u, washout, erc,
                                        raw_features=base, system=name, threads=ctx.threads)
    return score(r0.features), score(r1.raw), score(r1.features)


def run_narma(ctx):
    rows = []
    for rho in ctx.cfg["sweep"]["values"]:
        rows.append((rho,) + narma_point(ctx, rho))
    ctx.csv("narma.csv", ["rho", "nmse_noise_free", "nmse_noisy", "nmse_erc"], rows)
    summary = {}
    for rho, a, b, c in rows:
        summary.update({f"nmse_noise_free_rho{rho:g}": a, f"nmse_noisy_rho{rho:g}": b,
                        f"nmse_erc_rho{rho:g}": c})
    return _summary(ctx, summary)


def _sweep_system(cfg, value):
    sysc = dict(cfg["system"])
    par = cfg["sweep"]["parameter"]
    if sysc["type"] == "ode" and par not in sysc:
        sysc["params"] = dict(sysc["params"] or {}, **{par: value})
    else:
        sysc[par] = value
    return build_system(sysc)


def run_ipc(ctx):
    cfg = ctx.cfg
    washout, tr, te = protocol(cfg)
    u, _ = make_input(cfg["input"], washout + tr + te)
    cap = cfg["capacity"]
    rows, summary = [], {}
    rng_in = (cfg["input"]["low"], cfg["input"]["high"])
    for v in cfg["sweep"]["values"]:
        spec = _sweep_system(cfg, v)
        feats = feature_specs(observations(cfg), components(cfg, spec))
        with ctx.stage(f"{v}:simulate"):
            res = ensemble.ensemble_features(spec, ensemble_cfg(cfg), u, washout, feats,
                                             system=system_name(cfg["system"]), threads=ctx.threads)
        with ctx.stage(f"{v}:capacity"):
            if cap["max_harmonic"] and cap["time_period"]:
                times = capacity.time_coordinate(res.features.n_rows, dynamics.time_unit(spec),
                                                 cap["time_period"], washout)
                rep = capacity.tipc(res.features, res.inputs, times, cap["max_degree"], cap["max_delay"],
                                    cap["max_harmonic"], cap["window_budget"], rng_in,
                                    cap["surrogates"], cfg["seed"])
            else:
                rep = capacity.ipc(res.features, res.inputs, cap["max_degree"], cap["max_delay"],
                                   cap["window_budget"], rng_in, cap["surrogates"], cfg["seed"])
        rep.to_csv(ctx.out / f"capacity_terms_{cfg['sweep']['parameter']}{v:g}.csv")
        ctx.files.append(f"capacity_terms_{cfg['sweep']['parameter']}{v:g}.csv")
        for d, a, b in rep.degree_table():
            rows.append((v, d, a, b, rep.rank))
        summary[f"total_{v:g}"] = rep.total
        summary[f"rank_{v:g}"] = rep.rank
        summary[f"rank_bound_ok_{v:g}"] = rep.within_rank_bound()
    ctx.csv("capacity_report.csv", [cfg["sweep"]["parameter"], "degree", "ipc", "tipc", "rank"], rows)
    return _summary(ctx, summary)


def run_task(ctx):
    """Binary tasks (CRC, Hamming) or NARMA10 via ERC and a single-trial baseline."""
    cfg = ctx.cfg
    spec = build_system(cfg["system"])
    washout, tr, te = protocol(cfg)
    T = washout + tr + te
    kind = cfg["task"]["kind"]
    task = tasks.TaskSpec(kind, cfg["task"]["delta"], cfg["task"]["mu"])
    u, bits = make_input(cfg["input"], T + 1)
    if task.input_kind == "binary":
        if bits is None:
            raise InvalidArgumentError(f"task {kind} needs input.distribution: binary")
        target = task.target(bits)[washout:T]
    else:
        y = task.target(u)
        target = y[washout + 1:T + 1]
    u = u[:T]
    feats = feature_specs(observations(cfg), components(cfg, spec))
    with ctx.stage("simulate"):
        res = ensemble.ensemble_features(spec, ensemble_cfg(cfg), u, washout, feats, raw_features=feats,
                                         system=system_name(cfg["system"]), threads=ctx.threads)
    rows, summary = [], {}
    ridge = cfg["capacity"]["ridge"]
    for method, fm in (("erc", res.features), ("single", res.raw)):
        model, rep = readout.fit_and_score(fm.values[:tr], target[:tr], fm.values[tr:], target[tr:], ridge)
        if task.input_kind == "binary":
            acc = tasks.score_bits(model.predict(fm.values[tr:]), target[tr:])
            rows.append([method, acc.overall] + list(acc.per_bit))
            summary[f"accuracy_{method}"] = acc.overall
        else:
            rows.append([method, rep.test_nmse])
            summary[f"nmse_{method}"] = rep.test_nmse
    nbits = len(rows[0]) - 2
    header = ["method", "accuracy" if task.input_kind == "binary" else "nmse"]
    header += [f"bit{i}" for i in range(nbits)]
    ctx.csv("task_scores.csv", header, rows)
    return _summary(ctx, summary)


def run_lyapunov(ctx):
    cfg = ctx.cfg
    ly = cfg["lyapunov"]
    lcfg = lyapunov.LyapunovConfig(ly["total_steps"], ly["renorm_interval"], ly["eps0"],
                                   ly["transient_discard"], cfg["seed"])
    n = ly["transient_discard"] + ly["total_steps"]
    washout = cfg["protocol"]["washout"]
    n = max(n, washout + ly["samples"])
    u, _ = make_input(cfg["input"], n)
    probe = _sweep_system(cfg, cfg["sweep"]["values"][0])
    noise = None
    if probe.noise_distribution is not None:
        rng = np.random.Generator(np.random.Philox([cfg["seed"], 7]))
        noise = probe.sample_noise(rng, n)
    variants = {"input": dynamics.DriveSequence(u, noise), "free": dynamics.DriveSequence(np.zeros(n))}
    if not ly["with_input"]:
        variants.pop("input")
    summary = {}
    par = cfg["sweep"]["parameter"]
    for label, drive in variants.items():
        with ctx.stage(label):
            scan = lyapunov.bifurcation_scan(lambda p: _sweep_system(cfg, p), cfg["sweep"]["values"],
                                             drive, washout, ly["samples"], 1, lcfg)
        name = f"lyapunov_scan_{label}.csv"
        scan.to_csv(ctx.out / name, par)
        ctx.files.append(name)
        for g, lam in zip(scan.grid, scan.lambdas):
            summary[f"lambda_{label}_{par}{g:g}"] = lam
        for g, msg in scan.errors.items():
            summary[f"error_{label}_{par}{g:g}"] = msg
    return _summary(ctx, summary)


def run_desync(ctx):
    """Noisy vs noise-free (synchronised) ensembles of the x-input oscillator."""
    cfg = ctx.cfg
    spec = build_system(cfg["system"])
    washout, tr, te = protocol(cfg)
    ds = cfg["desync"]
    comps = components(cfg, spec)
    feats = feature_specs(observations(cfg), comps)
    name = system_name(cfg["system"])
    cases = [
        ("noisy", ensemble_cfg(cfg), washout),
        ("noise_free", ensemble_cfg(cfg, L=ds["reference_L"], per_trial_noise=False), ds["reference_washout"]),
    ]
    rows, summary = [], {}
    for label, ecfg, wo in cases:
        u, _ = make_input(cfg["input"], wo + tr + te)
        with ctx.stage(label):
            res = ensemble.ensemble_features(spec, ecfg, u, wo, feats, system=name,
                                             sync_components=list(range(spec.dim)) if ecfg.L > 1 else [],
                                             threads=ctx.threads)
            curve = _mc(ctx, res.features, res.inputs, ds["mf_tau"])
        sync = [res.sync_index.get(c, 1.0) for c in range(spec.dim)]
        rows.append([label, ecfg.L, wo] + sync + [curve.bias_floor] + list(curve.raw_values))
        summary[f"sync_{label}"] = sync[0]
        summary[f"mf1_{label}"] = float(curve.raw_values[0])
    summary["mf1_ratio"] = summary["mf1_noisy"] / summary["mf1_noise_free"]
    header = ["case", "L", "washout"] + [f"sync_x{c}" for c in range(spec.dim)] + ["bias_floor"]
    header += [f"mf_{t}" for t in range(1, ds["mf_tau"] + 1)]
    ctx.csv("desync.csv", header, rows)
    return _summary(ctx, summary)


def steady_radius(alpha, sigma, u):
    """Positive root of ``alpha r - r^3 + sigma u = 0`` (radial-input oscillator)."""
    roots = np.roots([-1.0, 0.0, alpha, sigma * u])
    real = roots[np.abs(roots.imag) < 1e-9].real
    return float(real.max())


def moment_closed_form(n, r):
    """E[x^n] of a uniform-phase circle of radius ``r``."""
    if n % 2:
        return 0.0
    return math.comb(n, n // 2) * (r / 2.0) ** n


def run_time_invariance(ctx):
    """Moments of the radial-input oscillator under constant input against the closed form."""
    cfg = ctx.cfg
    spec = build_system(cfg["system"])
    ti = cfg["time_invariance"]
    washout, tr, te = protocol(cfg)
    T = washout + tr + te
    ns = sorted(set(ti["moments"]))
    top = 2 * max(ns)
    feats = [FeatureSpec(0, ObservationFn("power", k)) for k in range(1, top + 1)]
    feats.append(FeatureSpec(1, ObservationFn("power", 2)))
    u = np.full(T, float(ti["constant_input"]))
    ecfg = ensemble_cfg(cfg)
    with ctx.stage("moments"):
        res = ensemble.ensemble_features(spec, ecfg, u, washout, feats, system=system_name(cfg["system"]),
                                         threads=ctx.threads)
    m = res.features.values[-1]
    r = math.sqrt(m[1] + m[-1])
    L = ecfg.L
    rows, summary = [], {"radius_measured": r}
    if spec.kind == "stuart-landau-radial":
        summary["radius_steady"] = steady_radius(spec.params["alpha"], spec.params["sigma"],
                                                 ti["constant_input"])
    for n in ns:
        meas = m[n - 1]
        sd = math.sqrt(max(m[2 * n - 1] - meas * meas, 0.0))
        ref = moment_closed_form(n, r)
        rel = abs(meas - ref) / ref if ref else float("nan")
        bound = 3.0 * sd / math.sqrt(L)
        ok = rel <= 0.02 if ref else abs(meas) < bound
        rows.append((n, meas, ref, sd, rel, bound, ok))
        summary[f"moment_{n}"] = meas
    ctx.csv("moments.csv", ["n", "measured", "closed_form", "sd", "rel_err", "mc_bound", "pass"], rows)
    return _summary(ctx, summary)


RUNNERS = {
    "mc-esn": run_memory,
    "mc-chaotic": run_memory,
    "finite-size": run_finite_size,
    "narma-sweep": run_narma,
    "ipc-sweep": run_ipc,
    "task-run": run_task,
    "lyapunov-scan": run_lyapunov,
    "desync": run_desync,
    "time-invariance": run_time_invariance,
}
