"""Brute-force reference computations behind the derived test values.

Each oracle returns a dict with at least ``name``, ``ok`` and the values it
compared. They are exposed through ``ensemble-rc oracle <name>``.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from . import dynamics, tasks


def crc_exhaustive():
    """CRC target against GF(2) long division for all 32 five-bit windows."""
    mismatches = []
    for window in itertools.product((0, 1), repeat=5):
        # window is (u_t, u_{t-1}, ..., u_{t-4}); the series runs oldest first
        series = np.array(window[::-1])
        got = tuple(int(b) for b in tasks.crc_target(series)[-1])
        want = tasks.gf2_remainder(window)
        if got != want:
            mismatches.append((window, got, want))
    return {"name": "crc", "ok": not mismatches, "cases": 32, "mismatches": mismatches}


def hamming_exhaustive(convention="corrected"):
    """Round trip of all 16 words with no error and with each single bit flipped."""
    words = list(itertools.product((0, 1), repeat=4))
    codes = [tasks.hamming_encode_word(np.array(w)) for w in words]
    min_dist = min(int(np.sum(a != b)) for a, b in itertools.combinations(codes, 2))
    clean_fail, flip_fail = 0, 0
    for w, c in zip(words, codes):
        if tuple(tasks.hamming_decode_word(c, convention)) != w:
            clean_fail += 1
        for i in range(7):
            v = c.copy()
            v[i] ^= 1
            if tuple(tasks.hamming_decode_word(v, convention)) != w:
                flip_fail += 1
    return {
        "name": "hamming",
        "ok": clean_fail == 0 and flip_fail == 0 and min_dist >= 3,
        "min_distance": min_dist,
        "clean_failures": clean_fail,
        "single_flip_failures": flip_fail,
        "single_flip_cases": 112,
    }


def narma_fixed_point(steps=3000):
    """NARMA10 with zero drive converges to the root of y = 0.3y + 0.5y^2 + 0.1."""
    y = tasks.narma10_target(np.zeros(steps), delta=1.0, mu=0.0)
    exact = (0.7 - math.sqrt(0.49 - 0.2)) / 1.0
    return {"name": "narma-fixed-point", "ok": abs(y[-1] - exact) < 1e-6,
            "iterate": float(y[-1]), "exact": exact}


def rk4_linear(dt=0.01):
    """One RK4 step of dx/dt = -x against exp(-dt)."""
    spec = dynamics.OdeSpec("linear", {"k": 1.0, "iota": 0.0}, dt)
    x = dynamics.rk4_step(spec, [1.0], 0.0).components[0]
    return {"name": "rk4-linear", "ok": abs(x - math.exp(-dt)) < 1e-10,
            "rk4": float(x), "exact": math.exp(-dt)}


def tipc_example(n=200_000, seed=0):
    """Capacities of the synthetic state with known temporal and input terms."""
    from .capacity import tipc

    rng = np.random.Generator(np.random.Philox(seed))
    u = rng.uniform(-1.0, 1.0, n)
    t = rng.uniform(0.0, 2 * np.pi, n)
    u1 = u
    u2 = np.concatenate([[0.0], u[:-1]])
    x = u1 * np.cos(t) + u2 ** 2 * np.sin(2 * t) + u1 * u2 + u1
    rep = tipc(x[:, None], u, t, max_degree=2, max_delay=2, max_harmonic=2, input_range=(-1, 1),
               surrogate_count=20)
    expect = {"tipc1": 15 / 64, "tipc2": 1 / 16, "ipc1": 15 / 32, "ipc2": 5 / 32, "tipc0": 5 / 64}
    got = {
        "tipc1": rep.tipc_by_degree.get(1, 0.0),
        "tipc2": rep.tipc_by_degree.get(2, 0.0),
        "ipc1": rep.ipc_by_degree.get(1, 0.0),
        "ipc2": rep.ipc_by_degree.get(2, 0.0),
        "tipc0": rep.tipc_by_degree.get(0, 0.0),
    }
    ok = all(abs(got[k] - expect[k]) <= 0.005 for k in expect)
    return {"name": "tipc-example", "ok": ok, "measured": got, "expected": expect}


def sl_moments(r=1.0, L=100_000, seed=0):
    """E[x^n] over a uniform phase grid of radius r against the binomial closed form."""
    from .experiments import moment_closed_form

    phase = -np.pi + 2 * np.pi * np.arange(L) / L
    x = r * np.cos(phase + 0.1234)
    out = {}
    ok = True
    for n in range(1, 7):
        m = float(np.mean(x ** n))
        ref = moment_closed_form(n, r)
        out[n] = (m, ref)
        ok &= abs(m - ref) < 1e-9
    return {"name": "sl-moments", "ok": bool(ok), "moments": out}


ORACLES = {
    "crc": crc_exhaustive,
    "hamming": hamming_exhaustive,
    "narma-fixed-point": narma_fixed_point,
    "rk4-linear": rk4_linear,
    "tipc-example": tipc_example,
    "sl-moments": sl_moments,
}
