"""Memory function, memory capacity, IPC and TIPC.

Alignment convention: feature row ``t`` is the state after consuming
``u[t]``, so delay ``tau`` refers to ``u[t + 1 - tau]`` and ``tau = 1`` is the
input that was just injected.

IPC terms are products of normalised Legendre polynomials of delayed inputs
(inputs are mapped affinely to [-1, 1] first). TIPC terms additionally carry
a temporal harmonic ``cos(k t)`` or ``sin(k t)``. Each capacity is
``D = |Q^T z|^2 / |z|^2`` with ``Q`` an orthonormal basis of the centred
states and ``z`` the centred target, i.e. ``1 - NMSE`` of the in-sample
least-squares readout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import legendre
from scipy import stats as sps

from .errors import InvalidArgumentError, UnsupportedDistributionError
from .io import write_csv
from .readout import _matrix, fit, squared_correlation_cols

SURROGATES = 100
PERCENTILE = 99.0
RANK_RTOL = 1e-10


def delay_target(u, tau, start):
    """``u[t + 1 - tau]`` for rows ``t >= start``."""
    if tau < 1:
        raise InvalidArgumentError(f"tau must be >= 1, got {tau}")
    if start < tau - 1:
        raise InvalidArgumentError(f"start row {start} too early for delay {tau}")
    u = np.asarray(u, dtype=float)
    return u[start + 1 - tau: u.shape[0] + 1 - tau]


def _surrogate_shifts(n, count, seed):
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.integers(n // 4, max(n // 4 + 1, 3 * n // 4), size=count)


# ---------------------------------------------------------------------------
# memory


@dataclass
class MemoryCurve:
    taus: np.ndarray
    values: np.ndarray
    raw_values: np.ndarray
    mc: float
    tau_max: int
    bias_floor: float

    def to_csv(self, path, label="mc"):
        rows = [(int(t), v, r) for t, v, r in zip(self.taus, self.values, self.raw_values)]
        rows.append(("total", self.mc, float(np.sum(self.raw_values))))
        return write_csv(path, ["tau", label, f"{label}_raw"], rows)


def _split_rows(n, split):
    if not 0 < split < 1:
        raise InvalidArgumentError(f"split must be in (0, 1), got {split}")
    k = int(round(n * split))
    if k < 2 or n - k < 2:
        raise InvalidArgumentError(f"not enough rows ({n}) for a train/test split")
    return k


def _memory_values(X, targets, split, ridge):
    k = _split_rows(X.shape[0], split)
    model = fit(X[:k], targets[:k], ridge)
    pred = model.predict(X[k:])
    return squared_correlation_cols(targets[k:], pred)


def memory_function(features, inputs, tau, split=0.5, ridge=1e-9, method="holdout", start=None):
    """``M_tau``: squared correlation of the readout with ``u`` delayed by ``tau``.

    ``method="holdout"`` fits on the first ``split`` fraction of rows and
    scores on the rest; ``"insample"`` scores on the fitted rows, which is the
    same quantity as the degree-1 IPC term for that delay.
    """
    X, _ = _matrix(features)
    u = np.asarray(inputs, dtype=float)
    if u.shape[0] != X.shape[0]:
        raise InvalidArgumentError(f"inputs have {u.shape[0]} rows, features {X.shape[0]}")
    start = tau - 1 if start is None else start
    y = delay_target(u, tau, start)[:, None]
    Xs = X[start:]
    if method == "insample":
        model = fit(Xs, y, ridge)
        return float(squared_correlation_cols(y, model.predict(Xs))[0])
    if method != "holdout":
        raise InvalidArgumentError(f"unknown method {method!r}")
    return float(_memory_values(Xs, y, split, ridge)[0])


def memory_capacity(features, inputs, tau_max=40, surrogate_count=SURROGATES, split=0.5,
                    ridge=1e-9, seed=0):
    """Sum of ``M_tau`` for ``tau = 1..tau_max`` above a surrogate bias floor.

    The floor is the 99th percentile of held-out ``M`` values obtained for
    delay-1 targets built from circularly shifted copies of the input (shift
    drawn in [n/4, 3n/4)), which carry no information about the features.
    """
    if tau_max < 1:
        raise InvalidArgumentError(f"tau_max must be >= 1, got {tau_max}")
    X, _ = _matrix(features)
    u = np.asarray(inputs, dtype=float)
    if u.shape[0] != X.shape[0]:
        raise InvalidArgumentError(f"inputs have {u.shape[0]} rows, features {X.shape[0]}")
    start = tau_max - 1
    Xs = X[start:]
    targets = np.column_stack([delay_target(u, t, start) for t in range(1, tau_max + 1)])
    floor = 0.0
    if surrogate_count:
        shifts = _surrogate_shifts(u.shape[0], surrogate_count, seed)
        sur = np.column_stack([delay_target(np.roll(u, s), 1, start) for s in shifts])
        targets = np.hstack([targets, sur])
    vals = _memory_values(Xs, targets, split, ridge)
    raw = vals[:tau_max]
    if surrogate_count:
        floor = float(np.percentile(vals[tau_max:], PERCENTILE))
    kept = np.where(raw > floor, raw, 0.0)
    return MemoryCurve(
        taus=np.arange(1, tau_max + 1),
        values=kept,
        raw_values=raw,
        mc=float(kept.sum()),
        tau_max=tau_max,
        bias_floor=floor,
    )


# ---------------------------------------------------------------------------
# orthonormalisation and bases


def orthonormalize_states(features, rtol=RANK_RTOL):
    """Orthonormal basis of the centred feature columns and its rank.

    Rank counts singular values above ``rtol`` times the largest one.
    """
    X, _ = _matrix(features)
    if X.shape[0] < 2:
        raise InvalidArgumentError("need at least 2 rows")
    Xc = X - X.mean(axis=0)
    U, s, _ = np.linalg.svd(Xc, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return U[:, :0], 0
    r = int(np.count_nonzero(s > rtol * s[0]))
    return np.ascontiguousarray(U[:, :r]), r


@dataclass(frozen=True)
class PolynomialBasisTerm:
    """Product of normalised Legendre polynomials of delayed inputs.

    ``factors`` holds ``(delay, degree)`` pairs with distinct delays.
    ``harmonic`` is ``None`` for IPC terms or ``("cos"|"sin", k)`` for TIPC.
    """

    factors: tuple = ()
    harmonic: Optional[tuple] = None

    def __post_init__(self):
        taus = [t for t, _ in self.factors]
        if len(set(taus)) != len(taus):
            raise InvalidArgumentError(f"delays must be distinct: {self.factors}")
        if any(d < 1 for _, d in self.factors) or any(t < 1 for t in taus):
            raise InvalidArgumentError(f"delays and degrees must be >= 1: {self.factors}")
        if not self.factors and self.harmonic is None:
            raise InvalidArgumentError("empty term")
        object.__setattr__(self, "factors", tuple(sorted(self.factors)))

    @property
    def degree(self):
        return sum(d for _, d in self.factors)

    @property
    def max_delay(self):
        return max((t for t, _ in self.factors), default=0)

    @property
    def is_temporal(self):
        return self.harmonic is not None

    @property
    def label(self):
        parts = [f"P{d}(u[t-{t}])" for t, d in self.factors]
        if self.harmonic:
            kind, k = self.harmonic
            parts.append(f"{kind}({k}t)")
        return "*".join(parts)

    def evaluate(self, u_scaled, start, times=None):
        """Unit-variance target for rows ``t >= start`` (population normalisation)."""
        n = u_scaled.shape[0] - start
        z = np.ones(n)
        for tau, d in self.factors:
            c = np.zeros(d + 1)
            c[d] = np.sqrt(2 * d + 1)
            z = z * legendre.legval(delay_target(u_scaled, tau, start), c)
        if self.harmonic:
            kind, k = self.harmonic
            t = np.asarray(times, dtype=float)[start:]
            z = z * np.sqrt(2.0) * (np.cos(k * t) if kind == "cos" else np.sin(k * t))
        return z


def _combos(degree, max_tau):
    """Multisets of (delay, degree) with distinct delays <= max_tau, ordered by max delay."""
    if degree == 0:
        yield ()
        return
    for m in range(1, max_tau + 1):
        for dm in range(degree, 0, -1):
            for rest in _combos(degree - dm, m - 1):
                yield rest + ((m, dm),)


def enumerate_terms(max_degree, max_delay, budget=None, harmonics=None):
    """Basis terms ordered by (degree, max delay); at most ``budget`` per degree and harmonic."""
    terms = []
    for h in harmonics or [None]:
        start = 0 if h is not None else 1
        for deg in range(start, max_degree + 1):
            gen = _combos(deg, max_delay)
            if budget is not None:
                gen = itertools.islice(gen, budget)
            for f in gen:
                terms.append(PolynomialBasisTerm(f, h))
    return terms


# ---------------------------------------------------------------------------
# capacity reports


@dataclass
class CapacityReport:
    terms: list
    capacities: np.ndarray
    raw_capacities: np.ndarray
    thresholds: np.ndarray
    rank: int
    n_rows: int
    ipc_by_degree: dict = field(default_factory=dict)
    tipc_by_degree: dict = field(default_factory=dict)

    @property
    def ipc_total(self):
        return float(sum(self.ipc_by_degree.values()))

    @property
    def tipc_total(self):
        return float(sum(self.tipc_by_degree.values()))

    @property
    def total(self):
        return self.ipc_total + self.tipc_total

    def within_rank_bound(self, tol=1e-6):
        return self.total <= self.rank + tol

    def capacity_of(self, term):
        return float(self.capacities[self.terms.index(term)])

    def to_csv(self, path):
        rows = []
        for t, c, raw, th in zip(self.terms, self.capacities, self.raw_capacities, self.thresholds):
            rows.append((
                "tipc" if t.is_temporal else "ipc",
                t.degree,
                " ".join(str(d) for _, d in t.factors),
                " ".join(str(tau) for tau, _ in t.factors),
                f"{t.harmonic[0]}{t.harmonic[1]}" if t.harmonic else "",
                c, raw, th,
            ))
        rows.append(("rank", "", "", "", "", self.rank, "", ""))
        return write_csv(path, ["term", "degree", "degrees", "delays", "harmonic",
                                "capacity", "raw_capacity", "threshold"], rows)

    def degree_table(self):
        degs = sorted(set(self.ipc_by_degree) | set(self.tipc_by_degree))
        return [(d, self.ipc_by_degree.get(d, 0.0), self.tipc_by_degree.get(d, 0.0)) for d in degs]


def scale_input(u, input_range=None):
    u = np.asarray(u, dtype=float)
    lo, hi = input_range if input_range is not None else (u.min(), u.max())
    if not hi > lo:
        raise InvalidArgumentError(f"degenerate input range ({lo}, {hi})")
    return 2.0 * (u - lo) / (hi - lo) - 1.0


def check_uniform(u_scaled, alpha=1e-3):
    """Raise unless ``u_scaled`` is plausibly i.i.d. uniform on [-1, 1]."""
    if np.unique(u_scaled[: min(u_scaled.size, 4096)]).size < 16:
        raise UnsupportedDistributionError("input is discrete; the Legendre basis needs uniform input")
    res = sps.kstest(u_scaled, "uniform", args=(-1.0, 2.0))
    if res.pvalue < alpha:
        raise UnsupportedDistributionError(
            f"input is not uniform (KS p={res.pvalue:.2g}); only the Legendre basis is supported"
        )


def _capacities(Q, Z, surrogate_count, seed, orthogonalize):
    """Capacity and surrogate threshold for each (unit-scale) column of Z."""
    n = Z.shape[0]
    Z = Z - Z.mean(axis=0)
    if orthogonalize and Z.shape[1] > 1:
        # sample Gram-Schmidt in term order keeps the sum of capacities below the rank
        Zq, R = np.linalg.qr(Z)
        diag = np.abs(np.diag(R))
        good = diag > 1e-8 * np.sqrt(n)
        Z = Zq * np.where(good, 1.0, 0.0)
    norms = (Z * Z).sum(axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    raw = np.where(norms > 0, ((Q.T @ Z) ** 2).sum(axis=0) / safe, 0.0)
    thr = np.zeros_like(raw)
    if surrogate_count:
        shifts = _surrogate_shifts(n, surrogate_count, seed)
        for j in range(Z.shape[1]):
            if norms[j] == 0:
                continue
            S = np.column_stack([np.roll(Z[:, j], s) for s in shifts])
            d = ((Q.T @ S) ** 2).sum(axis=0) / norms[j]
            thr[j] = np.percentile(d, PERCENTILE)
    kept = np.where(raw > thr, np.clip(raw, 0.0, 1.0), 0.0)
    return kept, raw, thr


def _report(terms, kept, raw, thr, rank, n):
    ipc, tipc = {}, {}
    for t, c in zip(terms, kept):
        book = tipc if t.is_temporal else ipc
        book[t.degree] = book.get(t.degree, 0.0) + float(c)
    return CapacityReport(terms, kept, raw, thr, rank, n, ipc, tipc)


def _prepare(features, inputs, max_delay, input_range, check):
    X, _ = _matrix(features)
    u = np.asarray(inputs, dtype=float)
    if u.shape[0] != X.shape[0]:
        raise InvalidArgumentError(f"inputs have {u.shape[0]} rows, features {X.shape[0]}")
    us = scale_input(u, input_range)
    if check:
        check_uniform(us)
    start = max_delay - 1
    Q, rank = orthonormalize_states(X[start:])
    return us, start, Q, rank


def ipc(features, inputs, max_degree=3, max_delay=40, window_budget=None, input_range=None,
        surrogate_count=SURROGATES, seed=0, orthogonalize=True, check_distribution=True):
    """Degree-resolved information processing capacity."""
    us, start, Q, rank = _prepare(features, inputs, max_delay, input_range, check_distribution)
    terms = enumerate_terms(max_degree, max_delay, window_budget)
    Z = np.column_stack([t.evaluate(us, start) for t in terms])
    kept, raw, thr = _capacities(Q, Z, surrogate_count, seed, orthogonalize)
    return _report(terms, kept, raw, thr, rank, Q.shape[0])


def time_coordinate(n_rows, dt=1.0, time_period=2 * np.pi, offset=0):
    """``t = (k dt) mod period`` rescaled so that one period spans [0, 2 pi)."""
    k = np.arange(offset, offset + n_rows, dtype=float)
    return np.mod(k * dt, time_period) * (2 * np.pi / time_period)


def tipc(features, inputs, times, max_degree=2, max_delay=2, max_harmonic=2, window_budget=None,
         input_range=None, surrogate_count=SURROGATES, seed=0, orthogonalize=True,
         check_distribution=True):
    """IPC plus temporal capacities; ``times`` gives each row's phase in [0, 2 pi)."""
    us, start, Q, rank = _prepare(features, inputs, max_delay, input_range, check_distribution)
    times = np.asarray(times, dtype=float)
    if times.shape[0] != us.shape[0]:
        raise InvalidArgumentError(f"times have {times.shape[0]} rows, inputs {us.shape[0]}")
    harmonics = [(kind, k) for k in range(1, max_harmonic + 1) for kind in ("cos", "sin")]
    terms = enumerate_terms(max_degree, max_delay, window_budget)
    terms += enumerate_terms(max_degree, max_delay, window_budget, harmonics)
    Z = np.column_stack([t.evaluate(us, start, times) for t in terms])
    kept, raw, thr = _capacities(Q, Z, surrogate_count, seed, orthogonalize)
    return _report(terms, kept, raw, thr, rank, Q.shape[0])
