"""Renovation events, coalescence, coupling from the past, lattice sets.

A renovation index is one where the upper stationary estimate has an empty
first coordinate and each higher coordinate fits under the accumulated
forward gaps; from such an index, every trajectory started at or below the
upper estimate reaches the same state S-1 steps later, erasing its initial
condition. That mechanism justifies the coupling-from-the-past sampler:
run the exact recursion from an increasingly remote past on a spread of
initial states inside the sandwich until they all merge at the target
index.

For lattice-valued service and gaps the whole ordered box below the upper
estimate is finite; propagating it forward with exact integer arithmetic
yields a shrinking nested family of reachable sets whose collapse to a
single point certifies a unique stationary state on the lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, ContractError, ResourceCapError
from .kernel import advance_batch, advance_lattice_batch, is_ordered
from .loynes import LoynesEstimate, envelope_states, stationary_estimate, _renovation_mask
from .sequences import StationaryPath, stream_uniforms
from .sequences import _mix64_int as _mix

_STREAM_CFTP = 0xC7


@dataclass(frozen=True)
class RenovationEvent:
    """One index where the coalescence-forcing event holds, with witnesses."""

    index: int
    checked_length: int
    y_estimate: tuple[float, ...]
    tau_sums: tuple[float, ...]


@dataclass(frozen=True)
class RenovationScan:
    events: tuple[RenovationEvent, ...]
    window: tuple[int, int]
    frequency: float
    estimate: LoynesEstimate


def detect_renovation(path: StationaryPath, servers: int,
                      window: tuple[int, int],
                      max_depth: int = 1 << 20) -> RenovationScan:
    """All renovation indices in the inclusive window ``[a, b]``.

    The upper estimate is computed once at ``a`` and rolled forward (each
    roll deepens the backward scheme by one step, so the estimate stays
    consistent across the window). Detection refuses to run from an
    unstabilized estimate: an under-estimate could flag spurious events.
    """
    a, b = window
    if b < a:
        raise ValueError(f"empty window [{a}, {b}]")
    est = stationary_estimate(path, a, "upper", servers, max_depth=max_depth)
    if not est.stabilized:
        raise ContractError(
            "upper estimate did not stabilize; renovation detection disabled "
            "(a truncated estimate can produce false positives)")
    n = b - a + 1
    states = envelope_states(path, a, n - 1, est.vector, "upper")
    tau = path.block(a, n + servers).tau
    mask, sums_by_ell = _renovation_mask(states, tau, servers, return_sums=True)
    events = []
    for row in np.flatnonzero(mask):
        sums = tuple(float(col[row]) for col in sums_by_ell)
        events.append(RenovationEvent(a + int(row), servers - 1,
                                      tuple(map(float, states[row])), sums))
    return RenovationScan(tuple(events), (a, b), len(events) / n, est)


# ---------------------------------------------------------------------------
# Coalescence
# ---------------------------------------------------------------------------


def _run_set_forward(path: StationaryPath, start: int, steps: int,
                     points: np.ndarray) -> np.ndarray:
    """Exact map applied to every row of ``points`` over ``steps`` indices."""
    if path.spec.is_lattice:
        blk = path.lattice_block(start, steps)
        alpha = path.spec.alpha
        for i in range(steps):
            points = advance_lattice_batch(points, blk.tau[i], blk.sigma[i],
                                           blk.patience[i], alpha)
        return points
    blk = path.block(start, steps)
    for i in range(steps):
        points, _ = advance_batch(points, blk.tau[i], blk.sigma[i], blk.patience[i])
    return points


def coalescence_check(path: StationaryPath, at: int,
                      initials: Sequence[Sequence[float]],
                      y_estimate: Optional[Sequence[float]] = None,
                      tol: float = 1e-9) -> bool:
    """Do all initial states merge within S-1 steps from index ``at``?

    Every initial state must sit at or below the upper estimate at ``at``
    (that is what the renovation argument covers); a violating state is a
    reported precondition error, not silently dropped.
    """
    initials = [tuple(map(float, u)) for u in initials]
    if not initials:
        raise ValueError("need at least one initial state")
    servers = len(initials[0])
    if y_estimate is None:
        y_estimate = stationary_estimate(path, at, "upper", servers).vector
    slack = 0.0 if path.spec.is_lattice else 1e-12
    for u in initials:
        if not is_ordered(u):
            raise ContractError(f"initial state must be ordered, got {u!r}")
        if any(x > y + slack for x, y in zip(u, y_estimate)):
            raise ContractError(
                f"initial state {u!r} is not dominated by the upper estimate {tuple(y_estimate)!r}")
    if path.spec.is_lattice:
        pts = _to_lattice(initials, path.spec.alpha)
        out = _run_set_forward(path, at, servers - 1, pts) if servers > 1 else pts
        return bool((out == out[0]).all())
    pts = np.asarray(initials, dtype=np.float64)
    out = _run_set_forward(path, at, servers - 1, pts) if servers > 1 else pts
    return float(np.abs(out - out[0]).max()) <= tol


def _to_lattice(points: Sequence[Sequence[float]], alpha: float) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64) / alpha
    mult = np.rint(arr).astype(np.int64)
    if np.abs(arr - mult).max() > 1e-9:
        raise ContractError("initial states must lie on the lattice in lattice mode")
    return mult


# ---------------------------------------------------------------------------
# Coupling from the past
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CftpResult:
    value: Optional[tuple[float, ...]]
    coalesced: bool
    horizon_used: int
    initial_set_size: int

    def __post_init__(self):
        if self.coalesced and self.value is None:
            raise ValueError("coalesced result must carry a value")


def cftp(path: StationaryPath, servers: int, at: int = 0,
         initial_horizon: int = 0, max_horizon: int = 1 << 20,
         interior_points: int = 8, tol: float = 1e-9) -> CftpResult:
    """Sample the stationary workload at ``at`` by coupling from the past.

    At horizon n the exact recursion runs from index ``at-n`` to ``at`` on
    the empty state, the upper estimate at ``at-n``, and ``interior_points``
    random states inside the sandwich between them. The horizon doubles
    until every trajectory agrees at ``at`` (exactly on the lattice, within
    ``tol`` otherwise); drivers are tied to indices, so deeper horizons
    replay the same randomness over the shared suffix.
    """
    if servers < 1:
        raise ValueError("servers must be >= 1")
    horizon = initial_horizon if initial_horizon >= 1 else max(2 * servers, 16)
    lattice = path.spec.is_lattice
    while True:
        start = at - horizon
        est = stationary_estimate(path, start, "upper", servers)
        top = est.vector
        if any(not math.isfinite(v) for v in top):
            raise ConfigurationError("upper estimate is not finite; cannot build the sandwich")
        pts = [(0.0,) * servers, top]
        pts.extend(_sandwich_points(path.spec.seed, at, horizon, interior_points, top))
        if lattice:
            alpha = path.spec.alpha
            arr = np.asarray(pts, dtype=np.float64) / alpha
            arr = np.floor(arr + 1e-9).astype(np.int64)
            arr.sort(axis=1)
            out = _run_set_forward(path, start, horizon, arr)
            if (out == out[0]).all():
                value = tuple(float(v) * alpha for v in out[0])
                return CftpResult(value, True, horizon, len(pts))
        else:
            arr = np.asarray(pts, dtype=np.float64)
            out = _run_set_forward(path, start, horizon, arr)
            if float(np.abs(out - out[0]).max()) <= tol:
                return CftpResult(tuple(map(float, out[0])), True, horizon, len(pts))
        if horizon >= max_horizon:
            return CftpResult(None, False, horizon, len(pts))
        horizon = min(2 * horizon, max_horizon)


def _sandwich_points(seed: int, at: int, horizon: int, count: int,
                     top: tuple[float, ...]) -> list[tuple[float, ...]]:
    if count <= 0:
        return []
    servers = len(top)
    key = seed ^ _mix((at & ((1 << 64) - 1)) * 0x632BE59BD9B4E019 ^ horizon)
    u = stream_uniforms(key, _STREAM_CFTP, 0, count * servers).reshape(count, servers)
    pts = np.sort(u * np.asarray(top), axis=1)
    return [tuple(row) for row in pts]


# ---------------------------------------------------------------------------
# Lattice reachable sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReachableSet:
    """Image at the target index of the depth-n lattice sandwich box."""

    depth: int
    points: frozenset[tuple[int, ...]]
    alpha: float
    box_size: int
    nested_in_previous: bool
    estimate_stabilized: bool

    def __len__(self):
        return len(self.points)

    def workloads(self) -> set[tuple[float, ...]]:
        return {tuple(k * self.alpha for k in p) for p in self.points}


def reachable_set(path: StationaryPath, servers: int, depth: int, at: int = 0,
                  cap: int = 1_000_000) -> ReachableSet:
    """Forward image of the ordered lattice box from depth ``n``.

    The box at index ``at-n`` collects every ordered lattice state at or
    below the upper estimate there; its exact-integer image at ``at`` is
    the reachable set. The set at depth ``n-1`` is computed from the same
    rolled estimate and checked to contain it.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    sets = reachable_profile(path, servers, (depth - 1, depth), at, cap)
    return sets[-1]


def reachable_profile(path: StationaryPath, servers: int, depths: Sequence[int],
                      at: int = 0, cap: int = 1_000_000) -> list[ReachableSet]:
    """Reachable sets for several depths off one anchored estimate.

    All boxes derive from a single backward estimate at the deepest index
    rolled forward, which makes the nested-family property exact; nesting
    is verified between consecutive requested depths.
    """
    if not path.spec.is_lattice:
        raise ConfigurationError("reachable sets require a lattice-model spec")
    depths = sorted(set(int(d) for d in depths))
    if not depths or depths[0] < 0:
        raise ValueError("depths must be non-negative")
    deepest = depths[-1]
    alpha = path.spec.alpha
    est = stationary_estimate(path, at - deepest, "upper", servers)
    if any(not math.isfinite(v) for v in est.vector):
        raise ConfigurationError("upper estimate is not finite; lattice box is unbounded")
    # Estimates at every shallower index, consistent by construction.
    rolled = envelope_states(path, at - deepest, deepest, est.vector, "upper")

    results: list[ReachableSet] = []
    prev_points: Optional[frozenset] = None
    for depth in depths:
        caps = [int(math.floor(v / alpha + 1e-9)) for v in rolled[deepest - depth]]
        box = _ordered_box(caps, cap)
        pts = np.asarray(box, dtype=np.int64)
        if depth > 0:
            blk = path.lattice_block(at - depth, depth)
            for i in range(depth):
                pts = advance_lattice_batch(pts, blk.tau[i], blk.sigma[i],
                                            blk.patience[i], alpha)
                pts = np.unique(pts, axis=0)
        else:
            pts = np.unique(pts, axis=0)
        points = frozenset(map(tuple, pts.tolist()))
        nested = prev_points is None or points <= prev_points
        results.append(ReachableSet(depth, points, alpha, len(box), nested, est.stabilized))
        prev_points = points
    return results


def _ordered_box(caps: Sequence[int], cap: int) -> list[tuple[int, ...]]:
    """Ordered integer vectors with coordinate j at most caps[j]."""
    out: list[tuple[int, ...]] = []
    total_box = 1
    for c in caps:
        total_box *= c + 1

    def rec(prefix: tuple[int, ...], j: int, low: int):
        if j == len(caps):
            out.append(prefix)
            if len(out) > cap:
                raise ResourceCapError("lattice box enumeration exceeds cap",
                                       cap, total_box)
            return
        for v in range(low, caps[j] + 1):
            rec(prefix + (v,), j + 1, v)

    rec((), 0, 0)
    return out
