"""Backward construction of the extremal stationary workload bounds.

The two monotone envelopes admit stationary states that sandwich every
stationary workload of the exact system. Because they are monotone, the
classic backward scheme applies: iterate the envelope from the empty state
over drivers read backwards from the target index. Iterates only grow with
the depth, so agreement between successive doublings is a sound stopping
rule.

The module also computes the one-dimensional running-supremum bounds (the
ascending vector whose j-th entry is the backward supremum started at lag
S+1-j), Monte-Carlo estimates of the stability conditions, and forward
state rolls along a driver path used throughout the higher-level modules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel import _merge_shift
from .sequences import StationaryPath

DEFAULT_MAX_DEPTH = 1 << 20
DEFAULT_Z_WINDOW = 1000


@dataclass(frozen=True)
class SupremumBound:
    """Truncated backward supremum vector with a convergence diagnostic.

    ``values[j-1]`` is the supremum over lags ``S+1-j .. horizon`` (so the
    vector is ascending and the top coordinate uses every lag >= 1).
    ``stabilized`` means no coordinate's running maximum moved during the
    trailing ``window`` lags; a truncated value can only under-estimate.
    """

    values: tuple[float, ...]
    horizon: int
    stabilized: bool


@dataclass(frozen=True)
class LoynesEstimate:
    """Backward-iterate approximation of an extremal stationary state."""

    vector: tuple[float, ...]
    depth: int
    stabilized: bool
    window: int = 1


def _effective_work(tau: np.ndarray, sigma: np.ndarray, patience: np.ndarray, kind: str) -> np.ndarray:
    if kind == "upper":
        return sigma + patience
    if kind == "lower":
        return np.minimum(sigma, patience)
    raise ValueError(f"kind must be 'upper' or 'lower', got {kind!r}")


def supremum_bound(path: StationaryPath, at: int, kind: str, depth: int,
                   servers: int, window: int = DEFAULT_Z_WINDOW) -> SupremumBound:
    """Truncated supremum vector at index ``at``.

    Coordinate ``j`` is ``[max over k in [S+1-j, depth] of
    (work shifted back k) - (sum of the k previous gaps)]+`` with work
    equal to sigma+patience (upper) or min(sigma, patience) (lower).
    """
    if servers < 1:
        raise ValueError("servers must be >= 1")
    if depth < servers:
        raise ValueError(f"depth must be at least the server count, got {depth} < {servers}")
    blk = path.block(at - depth, depth)
    work_arr = _effective_work(blk.tau, blk.sigma, blk.patience, kind)

    # Each coordinate is a running supremum of partial sums; evaluate it by
    # the equivalent one-dimensional clipped recursion (numerically stable,
    # and float-identical to the autonomous top coordinate of the envelope
    # iterate). Lags >= S are common to every coordinate; the final S-1
    # steps stop injecting new work terms one coordinate at a time.
    work = work_arr.tolist()
    tau = blk.tau.tolist()
    v = 0.0
    for i in range(depth - servers + 1):
        hi = v if v > work[i] else work[i]
        v = max(hi - tau[i], 0.0)
    per_lag = [v] * (servers + 1)  # per_lag[ell] tracks the lag-ell coordinate
    for k in range(servers - 1, 0, -1):
        i = depth - k
        w, t = work[i], tau[i]
        for ell in range(1, servers + 1):
            u = per_lag[ell]
            if ell <= k:
                u = u if u > w else w
            per_lag[ell] = max(u - t, 0.0)
    values = tuple(per_lag[servers + 1 - j] for j in range(1, servers + 1))

    # Stabilization: where each truncated supremum is attained. Positions
    # use lag units (position p holds lag k = p+1).
    terms = work_arr[::-1] - np.cumsum(blk.tau[::-1])
    stab = True
    for j in range(1, servers + 1):
        lag0 = servers + 1 - j
        sl = terms[lag0 - 1 :]
        if float(sl.max()) <= 0.0:
            last_change = lag0 - 1
        else:
            last_change = lag0 + int(np.argmax(sl))
        if depth - last_change < window:
            stab = False
    return SupremumBound(values, depth, stab)


def backward_iterate(path: StationaryPath, at: int, kind: str, depth: int,
                     servers: int) -> tuple[float, ...]:
    """Envelope iterate of depth ``n`` from the empty state.

    Applies the envelope driven by the samples at ``at-n, ..., at-1`` in
    that order, starting from the zero vector.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    blk = path.block(at - depth, depth)
    work = _effective_work(blk.tau, blk.sigma, blk.patience, kind).tolist()
    tau = blk.tau.tolist()
    u = (0.0,) * servers
    for w, t in zip(work, tau):
        u = _merge_shift(u, w, t)
    return u


def stationary_estimate(path: StationaryPath, at: int, kind: str, servers: int,
                        tol: float = 1e-12, max_depth: int = DEFAULT_MAX_DEPTH,
                        window: int = 1) -> LoynesEstimate:
    """Doubling-depth backward scheme for the extremal stationary state.

    Depths S, 2S, 4S, ... are tried until ``window`` consecutive doublings
    agree coordinate-wise within ``tol`` or ``max_depth`` is hit; the flag
    records which. An unstabilized vector is a lower estimate.
    """
    depth = servers
    prev = backward_iterate(path, at, kind, depth, servers)
    agreements = 0
    while depth < max_depth:
        if math.isinf(prev[-1]):
            # infinite effective work (e.g. unbounded patience): the iterate
            # is permanently infinite, no finite stationary state to find
            return LoynesEstimate(prev, depth, False, window)
        depth *= 2
        cur = backward_iterate(path, at, kind, depth, servers)
        if all(abs(a - b) <= tol for a, b in zip(prev, cur)):
            agreements += 1
            if agreements >= window:
                return LoynesEstimate(cur, depth, True, window)
        else:
            agreements = 0
        prev = cur
    return LoynesEstimate(prev, depth, False, window)


# ---------------------------------------------------------------------------
# Forward rolls along the path
# ---------------------------------------------------------------------------


def envelope_states(path: StationaryPath, at: int, steps: int, u0: tuple[float, ...],
                    kind: str) -> np.ndarray:
    """States of the envelope recursion at indices ``at .. at+steps``.

    Row ``i`` is the state at index ``at+i``; row 0 is ``u0``. Rolling a
    backward iterate forward deepens it by one lag per step, so a
    stabilized estimate stays a pathwise fixed point of the envelope.
    """
    blk = path.block(at, steps)
    work = _effective_work(blk.tau, blk.sigma, blk.patience, kind).tolist()
    tau = blk.tau.tolist()
    out = np.empty((steps + 1, len(u0)))
    out[0] = u0
    u = tuple(u0)
    for i in range(steps):
        u = _merge_shift(u, work[i], tau[i])
        out[i + 1] = u
    return out


def exact_states(path: StationaryPath, at: int, steps: int,
                 u0: tuple[float, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Exact workload recursion along the path.

    Returns ``(states, accepted)`` where ``states[i]`` is the workload at
    index ``at+i`` (row 0 is ``u0``) and ``accepted[i]`` says whether the
    customer at index ``at+i`` enters service before her deadline.
    """
    blk = path.block(at, steps)
    tau = blk.tau.tolist()
    sigma = blk.sigma.tolist()
    patience = blk.patience.tolist()
    s = len(u0)
    states = np.empty((steps + 1, s))
    accepted = np.empty(steps, dtype=bool)
    states[0] = u0
    u = tuple(u0)
    for i in range(steps):
        ok = u[0] <= patience[i]
        accepted[i] = ok
        x = u[0] + sigma[i] if ok else u[0]
        u = _merge_shift(u, x, tau[i])
        states[i + 1] = u
    return states, accepted


# ---------------------------------------------------------------------------
# Stability-condition estimation
# ---------------------------------------------------------------------------


class FrequencyEstimate:
    __slots__ = ("frequency", "half_width")

    def __init__(self, hits: int, n: int):
        p = hits / n
        self.frequency = p
        self.half_width = 1.96 * math.sqrt(p * (1.0 - p) / n)

    def __repr__(self):
        return f"FrequencyEstimate({self.frequency:.6g} ± {self.half_width:.2g})"


@dataclass(frozen=True)
class ConditionReport:
    """Empirical frequencies of the sufficient stability conditions."""

    n_samples: int
    z1_zero: FrequencyEstimate
    work_le_tau: FrequencyEstimate        # sigma + patience <= tau
    sigma_lt_tau: FrequencyEstimate       # sigma < tau
    renovation: FrequencyEstimate         # the coalescence-forcing event
    z_depth: int
    z_stabilized: bool
    upper_estimate: LoynesEstimate


def estimate_conditions(path: StationaryPath, servers: int, n_samples: int,
                        at: int = 0, z_depth: int = 4096,
                        window: int = DEFAULT_Z_WINDOW) -> ConditionReport:
    """Monte-Carlo frequencies of the stability conditions over
    ``n_samples`` consecutive indices starting at ``at``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    z_depth = max(z_depth, servers, window + 1)
    blk = path.block(at, n_samples + servers)
    tau = blk.tau[:n_samples]
    sigma = blk.sigma[:n_samples]
    patience = blk.patience[:n_samples]

    work_le_tau = int(np.count_nonzero(sigma + patience <= tau))
    sigma_lt_tau = int(np.count_nonzero(sigma < tau))

    # Truncated top supremum rolled forward: each step both shifts the
    # index and deepens the truncation, so it is the 1-D envelope map.
    zb = supremum_bound(path, at, "upper", z_depth, 1, window)
    z_states = envelope_states(path, at, n_samples - 1, zb.values, "upper")
    z_hits = int(np.count_nonzero(z_states[:, 0] == 0.0))

    est = stationary_estimate(path, at, "upper", servers)
    y_states = envelope_states(path, at, n_samples - 1, est.vector, "upper")
    reno_hits = int(np.count_nonzero(_renovation_mask(y_states, blk.tau, servers)))

    return ConditionReport(
        n_samples=n_samples,
        z1_zero=FrequencyEstimate(z_hits, n_samples),
        work_le_tau=FrequencyEstimate(work_le_tau, n_samples),
        sigma_lt_tau=FrequencyEstimate(sigma_lt_tau, n_samples),
        renovation=FrequencyEstimate(reno_hits, n_samples),
        z_depth=z_depth,
        z_stabilized=zb.stabilized,
        upper_estimate=est,
    )


def _renovation_mask(y_states: np.ndarray, tau: np.ndarray, servers: int,
                     return_sums: bool = False):
    """Rows of ``y_states`` where the renovation event holds.

    At index t the event requires the first coordinate to vanish and, for
    each remaining coordinate l, that it not exceed the sum of the l-1
    gaps starting at t. ``tau`` must cover ``len(y_states) + servers - 2``
    entries starting at the same base index. Sums accumulate left to right
    per row, so witnesses reproduce a plain sequential sum exactly.
    """
    n = y_states.shape[0]
    mask = y_states[:, 0] == 0.0
    sums_by_ell = []
    sums = np.zeros(n)
    for ell in range(2, servers + 1):
        sums = sums + tau[ell - 2 : ell - 2 + n]
        sums_by_ell.append(sums)
        mask &= y_states[:, ell - 1] <= sums
    if return_sums:
        return mask, sums_by_ell
    return mask
