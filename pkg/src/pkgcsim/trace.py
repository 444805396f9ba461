"""C-state trace parsing and all-idle interval analytics.

A trace is a CSV of per-core C-state *entries*: a row says the core entered
that state at that timestamp and held it until the core's next row.  The
analytics find the maximal windows during which every core sits at the
gate state or deeper (the package-level idle opportunity), bin their
durations, apply the sampling floor a software power monitor would impose,
and turn transition counts into an average-latency impact estimate.
"""

from __future__ import annotations

import csv
import io
from bisect import bisect_right
from dataclasses import dataclass, replace
from typing import Any, Iterable, Mapping, Sequence

from pkgcsim.domain import CoreCState, PkgcsimError

TRACE_HEADER = ("timestamp_ns", "core_id", "cstate")
DEFAULT_SAMPLING_FLOOR_NS = 10_000
# Half-open duration bins: implicit [0, 1us) underflow, then the listed
# edges, then [1ms, inf).
DEFAULT_HISTOGRAM_EDGES_NS = (1_000, 10_000, 20_000, 100_000, 200_000, 1_000_000)


class MalformedRow(PkgcsimError):
    """CSV row that cannot be parsed; message carries the line number."""


class NonMonotonicTimestamp(PkgcsimError):
    """A core's timestamps must strictly increase."""


class UnknownState(PkgcsimError):
    """C-state token not in the core C-state enumeration."""


class MissingInitialState(PkgcsimError):
    """A core has no defined state at the window start."""


class DegenerateWorkload(PkgcsimError):
    """Latency impact is undefined without requests."""


@dataclass(frozen=True)
class TraceEvent:
    timestamp_ns: int
    core_id: int
    state: CoreCState


@dataclass(frozen=True)
class CStateTrace:
    """A validated trace over a half-open window [t_start, t_end).

    ``initial_states[i]`` is core i's state at t_start; ``events`` hold the
    state changes within the window, sorted by time then core.  An event
    exactly at t_start restates the initial state it defined.
    """

    n_cores: int
    t_start: int
    t_end: int
    initial_states: tuple[CoreCState, ...]
    events: tuple[TraceEvent, ...]

    @property
    def window_ns(self) -> int:
        return self.t_end - self.t_start


def parse_trace(text: str, n_cores: int | None = None,
                window: tuple[int, int] | None = None) -> CStateTrace:
    """Parse and validate trace CSV.

    The header row is mandatory.  Without an explicit window the trace
    spans [min timestamp, max timestamp + 1) so the last row stays inside.
    Rows at or before the window start define each core's initial state;
    every core must have one.  Rows at or beyond the window end are
    dropped.
    """
    reader = csv.reader(io.StringIO(text))
    rows: list[tuple[int, int, int, CoreCState]] = []  # (line, t, core, state)
    header_seen = False
    for line_no, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if not header_seen:
            if tuple(cell.strip() for cell in row) != TRACE_HEADER:
                raise MalformedRow(
                    f"line {line_no}: expected header "
                    f"{','.join(TRACE_HEADER)!r}, got {','.join(row)!r}"
                )
            header_seen = True
            continue
        if len(row) != 3:
            raise MalformedRow(f"line {line_no}: expected 3 fields, got {len(row)}")
        t_text, core_text, state_text = (cell.strip() for cell in row)
        try:
            t = int(t_text)
            core = int(core_text)
        except ValueError:
            raise MalformedRow(
                f"line {line_no}: non-integer timestamp or core id"
            ) from None
        if t < 0 or core < 0:
            raise MalformedRow(f"line {line_no}: negative timestamp or core id")
        try:
            state = CoreCState(state_text)
        except ValueError:
            raise UnknownState(
                f"line {line_no}: unknown C-state {state_text!r}"
            ) from None
        rows.append((line_no, t, core, state))
    if not header_seen:
        raise MalformedRow("line 1: missing header row")

    inferred_cores = max((core for _, _, core, _ in rows), default=-1) + 1
    cores = inferred_cores if n_cores is None else n_cores
    if n_cores is not None:
        for line_no, _, core, _ in rows:
            if core >= n_cores:
                raise MalformedRow(
                    f"line {line_no}: core id {core} outside 0..{n_cores - 1}"
                )

    per_core_last_t: dict[int, int] = {}
    for line_no, t, core, _ in rows:
        last = per_core_last_t.get(core)
        if last is not None and t <= last:
            raise NonMonotonicTimestamp(
                f"line {line_no}: core {core} timestamp {t} not after {last}"
            )
        per_core_last_t[core] = t

    if window is None:
        # half-open default window that still contains the last row
        if rows:
            t_start = min(t for _, t, _, _ in rows)
            t_end = max(t for _, t, _, _ in rows) + 1
        else:
            t_start = t_end = 0
    else:
        t_start, t_end = window
        if t_end < t_start:
            raise MalformedRow(f"window end {t_end} before start {t_start}")

    initial: dict[int, tuple[int, CoreCState, int]] = {}  # core -> (t, state, line)
    inside: list[TraceEvent] = []
    last_state: dict[int, CoreCState] = {}
    for line_no, t, core, state in rows:  # rows are per-core ascending
        prev = last_state.get(core)
        if prev is state:
            raise MalformedRow(
                f"line {line_no}: core {core} repeats state {state.value}"
            )
        last_state[core] = state
        if t <= t_start:
            # latest row at or before the window start pins the initial state
            best = initial.get(core)
            if best is None or t > best[0]:
                initial[core] = (t, state, line_no)
        if t_start <= t < t_end:
            inside.append(TraceEvent(t, core, state))

    initial_states: list[CoreCState] = []
    for core in range(cores):
        if core not in initial:
            raise MissingInitialState(
                f"core {core} has no state at window start {t_start}"
            )
        initial_states.append(initial[core][1])

    inside.sort(key=lambda e: (e.timestamp_ns, e.core_id))
    return CStateTrace(
        n_cores=cores, t_start=t_start, t_end=t_end,
        initial_states=tuple(initial_states), events=tuple(inside),
    )


def trace_to_csv(trace: CStateTrace) -> str:
    """Serialize a trace back to the CSV wire format.

    Cores whose first event sits exactly at the window start already carry
    their initial state in that event, so no extra header row is written
    for them.
    """
    at_start = {ev.core_id for ev in trace.events
                if ev.timestamp_ns == trace.t_start}
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for core, state in enumerate(trace.initial_states):
        if core not in at_start:
            writer.writerow([trace.t_start, core, state.value])
    for ev in trace.events:
        writer.writerow([ev.timestamp_ns, ev.core_id, ev.state.value])
    return out.getvalue()


@dataclass(frozen=True)
class Histogram:
    """Duration histogram over half-open bins.

    ``edges_ns`` are the finite ascending edges; counts[0] covers
    [0, edges[0]), counts[i] covers [edges[i-1], edges[i]), and the last
    bin covers [edges[-1], inf), so the counts always sum to the number of
    durations binned.
    """

    edges_ns: tuple[int, ...]
    counts: tuple[int, ...]

    def to_json_dict(self) -> dict[str, Any]:
        return {"edges_ns": list(self.edges_ns), "counts": list(self.counts)}


def idle_histogram(intervals: Sequence[tuple[int, int]],
                   edges_ns: Sequence[int] = DEFAULT_HISTOGRAM_EDGES_NS) -> Histogram:
    edges = tuple(edges_ns)
    if list(edges) != sorted(set(edges)):
        raise PkgcsimError("histogram edges must be strictly ascending")
    counts = [0] * (len(edges) + 1)
    for start, end in intervals:
        counts[bisect_right(edges, end - start)] += 1
    return Histogram(edges_ns=edges, counts=tuple(counts))


@dataclass(frozen=True)
class IdleIntervalReport:
    """All-idle intervals of a trace plus the derived package opportunity."""

    window_ns: int
    gate: CoreCState
    intervals: tuple[tuple[int, int], ...]
    total_idle_ns: int
    pc1a_residency_fraction: float
    n_transitions: int
    histogram: Histogram
    floor_ns: int = 0

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "window_ns": self.window_ns,
            "gate": self.gate.value,
            "intervals": [[s, e] for s, e in self.intervals],
            "total_idle_ns": self.total_idle_ns,
            "pc1a_residency_fraction": self.pc1a_residency_fraction,
            "n_transitions": self.n_transitions,
            "histogram": self.histogram.to_json_dict(),
            "floor_ns": self.floor_ns,
        }


def _build_report(trace: CStateTrace, gate: CoreCState,
                  intervals: Sequence[tuple[int, int]],
                  floor_ns: int) -> IdleIntervalReport:
    total = sum(e - s for s, e in intervals)
    window = trace.window_ns
    residency = total / window if window > 0 else 0.0
    return IdleIntervalReport(
        window_ns=window, gate=gate, intervals=tuple(intervals),
        total_idle_ns=total, pc1a_residency_fraction=residency,
        n_transitions=len(intervals), histogram=idle_histogram(intervals),
        floor_ns=floor_ns,
    )


def all_idle_intervals(trace: CStateTrace,
                       gate: CoreCState = CoreCState.CC1) -> IdleIntervalReport:
    """Maximal intervals where every core is at ``gate`` depth or deeper.

    Sweep over the merged event timeline keeping a count of idle cores;
    intervals clip to the trace window and zero-length ones are dropped.
    """
    idle = [s.is_idle_at_least(gate) for s in trace.initial_states]
    n_idle = sum(idle)
    intervals: list[tuple[int, int]] = []
    open_since = trace.t_start if n_idle == trace.n_cores else None

    i = 0
    events = trace.events
    while i < len(events):
        t = events[i].timestamp_ns
        while i < len(events) and events[i].timestamp_ns == t:
            ev = events[i]
            now_idle = ev.state.is_idle_at_least(gate)
            if now_idle != idle[ev.core_id]:
                idle[ev.core_id] = now_idle
                n_idle += 1 if now_idle else -1
            i += 1
        if open_since is not None and n_idle < trace.n_cores:
            if t > open_since:
                intervals.append((open_since, t))
            open_since = None
        elif open_since is None and n_idle == trace.n_cores:
            open_since = t
    if open_since is not None and trace.t_end > open_since:
        intervals.append((open_since, trace.t_end))

    return _build_report(trace, gate, intervals, floor_ns=0)


def apply_sampling_floor(report: IdleIntervalReport,
                         floor_ns: int = DEFAULT_SAMPLING_FLOOR_NS) -> IdleIntervalReport:
    """Drop intervals shorter than ``floor_ns`` and recompute the rollups.

    Models a sampling power monitor that cannot see idle periods shorter
    than its sampling interval.  A floor of zero is the identity.
    """
    if floor_ns < 0:
        raise PkgcsimError(f"negative sampling floor: {floor_ns}")
    kept = [iv for iv in report.intervals if iv[1] - iv[0] >= floor_ns]
    total = sum(e - s for s, e in kept)
    residency = total / report.window_ns if report.window_ns > 0 else 0.0
    return replace(
        report, intervals=tuple(kept), total_idle_ns=total,
        pc1a_residency_fraction=residency, n_transitions=len(kept),
        histogram=idle_histogram(kept, report.histogram.edges_ns),
        floor_ns=floor_ns,
    )


def residency_by_state(trace: CStateTrace) -> dict[str, Any]:
    """Per-core and aggregate time fraction in each C-state."""
    window = trace.window_ns
    per_core_ns = [dict.fromkeys(CoreCState, 0) for _ in range(trace.n_cores)]
    cur = list(trace.initial_states)
    since = [trace.t_start] * trace.n_cores
    for ev in trace.events:
        core = ev.core_id
        per_core_ns[core][cur[core]] += ev.timestamp_ns - since[core]
        cur[core] = ev.state
        since[core] = ev.timestamp_ns
    for core in range(trace.n_cores):
        per_core_ns[core][cur[core]] += trace.t_end - since[core]

    def fractions(ns_map: Mapping[CoreCState, int], denom: int) -> dict[str, float]:
        if denom <= 0:
            return {s.value: 0.0 for s in CoreCState}
        return {s.value: ns_map[s] / denom for s in CoreCState}

    aggregate_ns = dict.fromkeys(CoreCState, 0)
    for ns_map in per_core_ns:
        for state, ns in ns_map.items():
            aggregate_ns[state] += ns
    return {
        "per_core": [fractions(m, window) for m in per_core_ns],
        "aggregate": fractions(aggregate_ns, window * trace.n_cores),
    }


@dataclass(frozen=True)
class LatencyImpact:
    added_avg_ns: float
    relative_fraction: float

    def to_json_dict(self) -> dict[str, float]:
        return {"added_avg_ns": self.added_avg_ns,
                "relative_fraction": self.relative_fraction}


def latency_impact(
    n_transitions: int,
    transition_cost_ns: float,
    n_requests: int,
    baseline_latency_ns: float,
    wake_width_dist: Mapping[int, float] | None = None,
) -> LatencyImpact:
    """Average added latency per request from package wake transitions.

    added = n_transitions * transition_cost * E[cores woken per exit] /
    n_requests; the relative figure divides by the baseline end-to-end
    latency.  The wake-width distribution defaults to a single core per
    exit.
    """
    if n_requests <= 0:
        raise DegenerateWorkload(f"n_requests={n_requests}, expected > 0")
    if baseline_latency_ns <= 0:
        raise DegenerateWorkload(
            f"baseline_latency_ns={baseline_latency_ns}, expected > 0"
        )
    if n_transitions < 0 or transition_cost_ns < 0:
        raise DegenerateWorkload("negative transition inputs")
    if wake_width_dist is None:
        mean_width = 1.0
    else:
        total_p = sum(wake_width_dist.values())
        if abs(total_p - 1.0) > 1e-9 or any(p < 0 for p in wake_width_dist.values()):
            raise DegenerateWorkload("wake width distribution must sum to 1")
        mean_width = sum(w * p for w, p in wake_width_dist.items())
    added = n_transitions * transition_cost_ns * mean_width / n_requests
    return LatencyImpact(
        added_avg_ns=added,
        relative_fraction=added / baseline_latency_ns,
    )


def intervals_to_csv(intervals: Iterable[tuple[int, int]]) -> str:
    """Serialize intervals as start_ns,end_ns,duration_ns CSV."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["start_ns", "end_ns", "duration_ns"])
    for start, end in intervals:
        writer.writerow([start, end, end - start])
    return out.getvalue()
