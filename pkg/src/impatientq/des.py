"""Event-driven simulation of the physical queue, used as an oracle.

The simulator keeps the physical state (per-server residual work, the FCFS
line with per-customer remaining patience) and advances it arrival by
arrival, serving customers at actual completion instants and dropping the
ones whose deadline passes first. At each arrival it also evaluates the
inductive virtual-workload construction: starting from the ordered residual
services, fold in every waiting customer's requirement whenever the least
virtual workload fits inside her remaining patience. The folded vector is
the workload the arriving customer sees, and must reproduce the one-step
recursion exactly; ``cross_validate`` certifies that.

Timekeeping is relative to the current arrival (everything is decremented
by each gap), so values stay small and float error does not grow with the
horizon. For lattice-model inputs an exact integer engine is used instead
and the comparison against the recursion is exact.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from typing import IO, NamedTuple, Optional

from .kernel import _merge_shift, advance_lattice
from .sequences import StationaryPath

_CHUNK = 1 << 15


class ArrivalRecord(NamedTuple):
    index: int
    workload_seen: tuple[float, ...]
    served: bool
    loss: bool


def run(path: StationaryPath, servers: int, n_arrivals: int) -> list[ArrivalRecord]:
    """Simulate ``n_arrivals`` customers from an initially empty system."""
    if servers < 1:
        raise ValueError("servers must be >= 1")
    if n_arrivals < 1:
        raise ValueError("n_arrivals must be >= 1")
    if path.spec.is_lattice:
        return _run_lattice(path, servers, n_arrivals)
    return _run_float(path, servers, n_arrivals)


def _run_float(path: StationaryPath, servers: int, n_arrivals: int) -> list[ArrivalRecord]:
    residuals = [0.0] * servers
    line: deque[list] = deque()  # [remaining_patience, sigma, index]
    seen: list[tuple[float, ...]] = []
    served: list[Optional[bool]] = [None] * n_arrivals

    pos = 0
    while pos < n_arrivals:
        count = min(_CHUNK, n_arrivals - pos)
        blk = path.block(pos, count)
        taus = blk.tau.tolist()
        sigmas = blk.sigma.tolist()
        patiences = blk.patience.tolist()
        for j in range(count):
            n = pos + j
            # Customers whose deadline passed during earlier gaps are gone.
            if line and any(entry[0] < 0.0 for entry in line):
                kept = deque()
                for entry in line:
                    if entry[0] < 0.0:
                        served[entry[2]] = False
                    else:
                        kept.append(entry)
                line = kept

            # Virtual workloads just before this arrival.
            fold = sorted(residuals)
            for rem, sig, _ in line:
                if fold[0] <= rem:
                    fold = _merge_shift(fold, fold[0] + sig, 0.0)
            w = tuple(fold)
            seen.append(w)

            sigma_n = sigmas[j]
            if line or min(residuals) > 0.0:
                line.append([patiences[j], sigma_n, n])
            else:
                served[n] = True
                k = residuals.index(min(residuals))
                residuals[k] = sigma_n

            # Gap until the next arrival: completions trigger FCFS starts.
            tau_n = taus[j]
            if n < n_arrivals - 1:
                while line:
                    f = min(residuals)
                    if f > tau_n:
                        break
                    rem, sig, i = line.popleft()
                    if rem >= f:
                        served[i] = True
                        residuals[residuals.index(f)] = f + sig
                    else:
                        served[i] = False
                residuals = [r - tau_n if r > tau_n else 0.0 for r in residuals]
                for entry in line:
                    entry[0] -= tau_n
        pos += count

    # Drain: no further arrivals, so every waiting customer resolves.
    while line:
        f = min(residuals)
        rem, sig, i = line.popleft()
        if rem >= f:
            served[i] = True
            residuals[residuals.index(f)] = f + sig
        else:
            served[i] = False

    return [
        ArrivalRecord(n, seen[n], bool(served[n]), not served[n])
        for n in range(n_arrivals)
    ]


def _run_lattice(path: StationaryPath, servers: int, n_arrivals: int) -> list[ArrivalRecord]:
    """Integer engine: service and gap quantities counted in lattice steps.

    A waiting customer is tracked by her total elapsed wait (in steps), so
    every deadline comparison is a single ``int * alpha <= float`` test and
    the state never accumulates rounding.
    """
    alpha = path.spec.alpha
    residuals = [0] * servers
    line: deque[list] = deque()  # [waited_steps, sigma_steps, patience, index]
    seen: list[tuple[float, ...]] = []
    served: list[Optional[bool]] = [None] * n_arrivals

    pos = 0
    while pos < n_arrivals:
        count = min(_CHUNK, n_arrivals - pos)
        blk = path.lattice_block(pos, count)
        taus = blk.tau.tolist()
        sigmas = blk.sigma.tolist()
        patiences = blk.patience.tolist()
        for j in range(count):
            n = pos + j
            if line and any(entry[2] < entry[0] * alpha for entry in line):
                kept = deque()
                for entry in line:
                    if entry[2] < entry[0] * alpha:
                        served[entry[3]] = False
                    else:
                        kept.append(entry)
                line = kept

            fold = sorted(residuals)
            for waited, sig, pat, _ in line:
                if (fold[0] + waited) * alpha <= pat:
                    fold = _merge_int(fold, fold[0] + sig)
            seen.append(tuple(v * alpha for v in fold))

            sigma_n = sigmas[j]
            if line or min(residuals) > 0:
                line.append([0, sigma_n, patiences[j], n])
            else:
                served[n] = True
                k = residuals.index(min(residuals))
                residuals[k] = sigma_n

            tau_n = taus[j]
            if n < n_arrivals - 1:
                while line:
                    f = min(residuals)
                    if f > tau_n:
                        break
                    waited, sig, pat, i = line.popleft()
                    if (waited + f) * alpha <= pat:
                        served[i] = True
                        residuals[residuals.index(f)] = f + sig
                    else:
                        served[i] = False
                residuals = [r - tau_n if r > tau_n else 0 for r in residuals]
                for entry in line:
                    entry[0] += tau_n
        pos += count

    while line:
        f = min(residuals)
        waited, sig, pat, i = line.popleft()
        if (waited + f) * alpha <= pat:
            served[i] = True
            residuals[residuals.index(f)] = f + sig
        else:
            served[i] = False

    return [
        ArrivalRecord(n, seen[n], bool(served[n]), not served[n])
        for n in range(n_arrivals)
    ]


def _merge_int(fold: list, x: int) -> list:
    out = fold[1:]
    out.append(x)
    out.sort()
    return out


# ---------------------------------------------------------------------------
# Cross-validation against the one-step recursion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossValidation:
    n_arrivals: int
    max_discrepancy: float
    decisions_agree: bool
    first_divergence: Optional[tuple[int, tuple[float, ...], tuple[float, ...]]]
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_discrepancy <= self.tol and self.decisions_agree


def cross_validate(path: StationaryPath, servers: int, n_arrivals: int,
                   tol: float = 1e-9) -> CrossValidation:
    """Drive the simulator and the recursion with one path and compare.

    The workload vector seen by each arrival must match the recursion state
    within ``tol`` in every coordinate, and the served/lost flag must equal
    the recursion's acceptance indicator exactly.
    """
    records = run(path, servers, n_arrivals)
    max_disc = 0.0
    first_div = None
    decisions_ok = True

    if path.spec.is_lattice:
        alpha = path.spec.alpha
        u = (0,) * servers
        pos = 0
        while pos < n_arrivals:
            count = min(_CHUNK, n_arrivals - pos)
            blk = path.lattice_block(pos, count)
            taus = blk.tau.tolist()
            sigmas = blk.sigma.tolist()
            patiences = blk.patience.tolist()
            for j in range(count):
                rec = records[pos + j]
                state = tuple(v * alpha for v in u)
                disc = max(abs(a - b) for a, b in zip(rec.workload_seen, state))
                if disc > max_disc:
                    max_disc = disc
                    if disc > tol and first_div is None:
                        first_div = (rec.index, rec.workload_seen, state)
                u, accepted = advance_lattice(u, taus[j], sigmas[j], patiences[j], alpha)
                if rec.served != accepted:
                    decisions_ok = False
                    if first_div is None:
                        first_div = (rec.index, rec.workload_seen, state)
            pos += count
    else:
        u = (0.0,) * servers
        pos = 0
        while pos < n_arrivals:
            count = min(_CHUNK, n_arrivals - pos)
            blk = path.block(pos, count)
            taus = blk.tau.tolist()
            sigmas = blk.sigma.tolist()
            patiences = blk.patience.tolist()
            for j in range(count):
                rec = records[pos + j]
                disc = max(abs(a - b) for a, b in zip(rec.workload_seen, u))
                if disc > max_disc:
                    max_disc = disc
                    if disc > tol and first_div is None:
                        first_div = (rec.index, rec.workload_seen, u)
                accepted = u[0] <= patiences[j]
                if rec.served != accepted:
                    decisions_ok = False
                    if first_div is None:
                        first_div = (rec.index, rec.workload_seen, u)
                x = u[0] + sigmas[j] if accepted else u[0]
                u = _merge_shift(u, x, taus[j])
            pos += count

    return CrossValidation(n_arrivals, max_disc, decisions_ok, first_div, tol)


def write_trace(records: list[ArrivalRecord], out: IO[str]):
    """CSV dump: index, W(1..S), served, loss."""
    servers = len(records[0].workload_seen) if records else 0
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["index"] + [f"W{i + 1}" for i in range(servers)] + ["served", "loss"])
    for rec in records:
        writer.writerow([rec.index] + [repr(v) for v in rec.workload_seen]
                        + [int(rec.served), int(rec.loss)])
