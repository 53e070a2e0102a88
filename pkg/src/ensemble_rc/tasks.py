"""Benchmark targets (NARMA10, delay memory, CRC, Hamming) and bit scoring.

Sliding-window targets are returned with one row per input step. Inputs
before the start of the series count as zeros, so the first ``window - 1``
rows of a binary target see a zero-padded history; experiments drop them as
warmup.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InstabilityError, InvalidArgumentError
from .io import write_csv

# rows of the generator and parity-check matrices
G = np.array([
    [1, 0, 0, 0, 1, 1, 0],
    [0, 1, 0, 0, 1, 0, 1],
    [0, 0, 1, 0, 0, 1, 1],
    [0, 0, 0, 1, 1, 1, 1],
], dtype=np.int64)

H = np.array([
    [1, 1, 0, 1, 1, 0, 0],
    [1, 0, 1, 1, 0, 1, 0],
    [0, 1, 1, 1, 0, 0, 1],
], dtype=np.int64)

CRC_DIVISOR = (1, 0, 1, 1)  # x^3 + x + 1, highest power first


@dataclass(frozen=True)
class TaskSpec:
    """Task kind with its parameters.

    ``kind`` is one of ``narma10``, ``delay``, ``crc``, ``hamming-encode``,
    ``hamming-decode``.
    """

    kind: str
    delta: float = 0.2
    mu: float = 0.0
    tau: int = 1

    def __post_init__(self):
        if self.kind not in ("narma10", "delay", "crc", "hamming-encode", "hamming-decode"):
            raise InvalidArgumentError(f"unknown task {self.kind!r}")

    @property
    def input_kind(self):
        return "real" if self.kind in ("narma10", "delay") else "binary"

    def target(self, u):
        if self.kind == "narma10":
            return narma10_target(u, self.delta, self.mu)
        if self.kind == "delay":
            u = np.asarray(u, dtype=float)
            return np.concatenate([np.zeros(self.tau - 1), u[: u.shape[0] - self.tau + 1]])
        if self.kind == "crc":
            return crc_target(u)
        if self.kind == "hamming-encode":
            return hamming_encode_target(u)
        return hamming_decode_target(u)


def narma10_target(u, delta=0.2, mu=0.0, bound=10.0):
    """NARMA10 output driven by ``zeta_t = delta (u_t + mu)``.

    ``y[t+1] = 0.3 y[t] + 0.05 y[t] sum_{i=0..9} y[t-i] + 1.5 zeta[t-9] zeta[t] + 0.1``
    with ``y = 0`` for the first ten steps.
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    n = u.shape[0]
    if n < 11:
        raise InvalidArgumentError(f"NARMA10 needs at least 11 steps, got {n}")
    zeta = delta * (u + mu)
    y = np.zeros(n)
    for t in range(9, n - 1):
        yt = y[t]
        nxt = 0.3 * yt + 0.05 * yt * y[t - 9: t + 1].sum() + 1.5 * zeta[t - 9] * zeta[t] + 0.1
        if not abs(nxt) <= bound:
            raise InstabilityError(
                f"NARMA10 diverged at step {t + 1} (delta={delta}, mu={mu})"
            )
        y[t + 1] = nxt
    return y


def _check_binary(u, name="input"):
    a = np.asarray(u)
    if a.size and not np.all((a == 0) | (a == 1)):
        raise InvalidArgumentError(f"{name} must be binary (0/1)")
    return a.astype(np.int64)


def _lags(u, k):
    """Matrix with columns ``u[t], u[t-1], ..., u[t-k+1]`` (zero before the start)."""
    n = u.shape[0]
    out = np.zeros((n, k), dtype=np.int64)
    for i in range(k):
        out[i:, i] = u[: n - i]
    return out


def crc_target(u):
    """Remainder of ``U(x) mod x^3 + x + 1`` over each 5-bit window (highest power first)."""
    u = _check_binary(u)
    if u.shape[0] < 5:
        raise InvalidArgumentError("CRC needs at least 5 steps")
    w = _lags(u, 5)
    return np.column_stack([
        w[:, 0] ^ w[:, 2],
        w[:, 0] ^ w[:, 1] ^ w[:, 3],
        w[:, 1] ^ w[:, 4],
    ])


def gf2_remainder(dividend, divisor=CRC_DIVISOR):
    """Long division over GF(2); bits are highest power first."""
    rem = [int(b) for b in dividend]
    div = list(divisor)
    for i in range(len(rem) - len(div) + 1):
        if rem[i]:
            for j, b in enumerate(div):
                rem[i + j] ^= b
    return tuple(rem[len(rem) - len(div) + 1:])


def hamming_encode_word(data):
    d = _check_binary(data)
    if d.shape != (4,):
        raise InvalidArgumentError("encoder expects 4 data bits")
    return (G.T @ d) % 2


def hamming_encode_target(u):
    """Codeword ``G^T (u_t, u_{t-1}, u_{t-2}, u_{t-3})`` per step."""
    u = _check_binary(u)
    if u.shape[0] < 4:
        raise InvalidArgumentError("encoder needs at least 4 steps")
    return (_lags(u, 4) @ G) % 2


def syndrome(v7):
    return (H @ _check_binary(v7)) % 2


def hamming_decode_word(v7, convention="corrected"):
    """Decode one received word ``(v_t, ..., v_{t-6})`` to 4 data bits.

    ``"corrected"`` flips the bit whose parity-check column equals the
    syndrome and returns the first four bits. ``"printed"`` evaluates the
    AND/complement formula literally, which returns complemented bits and
    pairs the syndromes of bits 2 and 3 the other way round.
    """
    v = _check_binary(v7)
    if v.shape != (7,):
        raise InvalidArgumentError("decoder expects 7 received bits")
    p1, p2, p3 = (H @ v) % 2
    if convention == "printed":
        n1, n2, n3 = 1 - p1, 1 - p2, 1 - p3
        return np.array([
            (p1 & p2 & n3) ^ (1 - v[0]),
            (n1 & p2 & p3) ^ (1 - v[1]),
            (p1 & n2 & p3) ^ (1 - v[2]),
            (p1 & p2 & p3) ^ (1 - v[3]),
        ], dtype=np.int64)
    if convention != "corrected":
        raise InvalidArgumentError(f"unknown decoder convention {convention!r}")
    s = np.array([p1, p2, p3])
    out = v.copy()
    if s.any():
        col = int(np.flatnonzero(np.all(H.T == s, axis=1))[0])
        out[col] ^= 1
    return out[:4]


def hamming_decode_target(v, convention="corrected"):
    """Sliding 7-bit window decode; ``v`` is a binary series."""
    v = _check_binary(v)
    if v.shape[0] < 7:
        raise InvalidArgumentError("decoder needs at least 7 steps")
    w = _lags(v, 7)
    return np.array([hamming_decode_word(row, convention) for row in w], dtype=np.int64)


@dataclass
class BitAccuracy:
    per_bit: np.ndarray
    overall: float
    threshold: float


def score_bits(predictions, targets, threshold=0.5):
    """Fraction of bits where ``predictions > threshold`` equals the target."""
    p = np.asarray(predictions, dtype=float)
    t = _check_binary(targets, "targets")
    if p.shape != t.shape:
        raise InvalidArgumentError(f"shape mismatch {p.shape} vs {t.shape}")
    if p.ndim == 1:
        p, t = p[:, None], t[:, None]
    hit = (p > threshold).astype(np.int64) == t
    per_bit = hit.mean(axis=0)
    return BitAccuracy(per_bit, float(hit.mean()), threshold)


def export_targets(path, targets, prefix="y", inputs: Optional[np.ndarray] = None):
    targets = np.asarray(targets)
    if targets.ndim == 1:
        targets = targets[:, None]
    header = ["t"] + (["u"] if inputs is not None else []) + [f"{prefix}{i}" for i in range(targets.shape[1])]
    rows = []
    for i, row in enumerate(targets):
        lead = [i] + ([inputs[i]] if inputs is not None else [])
        rows.append(lead + list(row))
    return write_csv(path, header, rows)
