"""Discrete-event workload simulator for package C-state policies.

The model is a closed box: requests arrive on the NIC-facing IO link, wait
in one FIFO queue, and are served by the lowest-numbered idle core.  Cores
occupy CC0 while serving (including their own wake transition) and drop to
CC1 when idle.  Three package policies are compared:

- ``shallow``: cores idle in CC1, the package never leaves PC0/PC0_idle
  (today's latency-safe production setting),
- ``deep``: a governor promotes idle cores to CC1E and then CC6, and once
  every core reaches CC6 the package walks the deep flow into PC6 with its
  tens-of-microseconds round trip,
- ``pc1a``: cores idle in CC1 and the agile package FSM is driven with
  events generated from core and IO status edges, entering the agile
  package state within tens of nanoseconds of the system going idle.

Package wake transitions charge their exit latency to the requests that
trigger them.  Energy is exact segment arithmetic over the post-warmup
window: each wall-clock segment is priced at its package tier, so average
power, residencies, and the closed-form savings stay mutually consistent
to float precision.  All randomness comes from one seeded generator used
only by the arrival/service stream, which makes runs with equal seeds
byte-identical and lets different policies see the same workload.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, fields, replace
from enum import Enum
from random import Random
from typing import Any

from pkgcsim.domain import (
    CoreCState,
    DramPowerMode,
    IoLState,
    LatencyProfile,
    PackageState,
    PkgcsimError,
    PowerProfile,
    validate_profile,
)
from pkgcsim.fsm import (
    FsmEvent,
    FsmEventKind,
    Pc6Timing,
    PendingPhase,
    SignalSet,
    apmu_step,
    initial_state,
    pc6_step,
    pwr_ok_ready_t_ns,
    signal_violations,
)
from pkgcsim.trace import CStateTrace, TraceEvent, residency_by_state, trace_to_csv


class InvalidConfig(PkgcsimError):
    """Simulation configuration rejected before the run starts."""


class OverloadDetected(PkgcsimError):
    """The FIFO queue exceeded its bound; the offered load is unserveable."""


class Policy(Enum):
    SHALLOW = "shallow"
    DEEP = "deep"
    PC1A = "pc1a"


@dataclass(frozen=True)
class ArrivalSpec:
    """Request arrival process.

    ``poisson`` draws exponential inter-arrivals at ``rate_per_s``;
    ``deterministic`` spaces arrivals evenly; ``onoff`` alternates
    exponential off gaps (no arrivals) with exponential on bursts whose
    instantaneous rate is scaled so the long-run average stays
    ``rate_per_s``.  A rate of zero produces no arrivals.
    """

    kind: str = "poisson"
    rate_per_s: float = 0.0
    on_mean_ns: int = 200_000
    off_mean_ns: int = 800_000

    def to_json_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "rate_per_s": self.rate_per_s,
                "on_mean_ns": self.on_mean_ns, "off_mean_ns": self.off_mean_ns}


@dataclass(frozen=True)
class ServiceSpec:
    """Per-request service time: constant or exponential with mean_ns."""

    kind: str = "exponential"
    mean_ns: int = 20_000

    def to_json_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "mean_ns": self.mean_ns}


@dataclass(frozen=True)
class GovernorSpec:
    """Idle-time thresholds and core wake costs.

    The deep policy promotes an idle core to CC1E after 20 us and to CC6
    after 50 us.  Core wake costs are charged identically under every
    policy so that policy deltas isolate package-level transitions.
    """

    cc1e_promote_ns: int = 20_000
    cc6_promote_ns: int = 50_000
    cc1_exit_ns: int = 2_000
    cc6_exit_ns: int = 133_000

    def to_json_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class SimConfig:
    n_cores: int = 10
    policy: Policy = Policy.SHALLOW
    arrival: ArrivalSpec = ArrivalSpec()
    service: ServiceSpec = ServiceSpec()
    governor: GovernorSpec = GovernorSpec()
    power: PowerProfile = PowerProfile()
    latency: LatencyProfile = LatencyProfile()
    pc6_timing: Pc6Timing = Pc6Timing()
    duration_ns: int = 1_000_000_000
    warmup_ns: int | None = None  # None -> 5% of duration
    seed: int = 1
    network_latency_ns: int = 117_000
    p_pc0_active_w: float | None = None  # None -> power.p_pc0_max
    max_queue: int = 100_000

    @property
    def effective_warmup_ns(self) -> int:
        return self.duration_ns // 20 if self.warmup_ns is None else self.warmup_ns

    @property
    def effective_p_active_w(self) -> float:
        return self.power.p_pc0_max if self.p_pc0_active_w is None else self.p_pc0_active_w

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "n_cores": self.n_cores,
            "policy": self.policy.value,
            "arrival": self.arrival.to_json_dict(),
            "service": self.service.to_json_dict(),
            "governor": self.governor.to_json_dict(),
            "power_profile": self.power.to_json_dict(),
            "latency_profile": self.latency.to_json_dict(),
            "pc6_timing": {f.name: getattr(self.pc6_timing, f.name)
                           for f in fields(self.pc6_timing)},
            "duration_ns": self.duration_ns,
            "warmup_ns": self.warmup_ns,
            "seed": self.seed,
            "network_latency_ns": self.network_latency_ns,
            "p_pc0_active_w": self.p_pc0_active_w,
            "max_queue": self.max_queue,
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "SimConfig":
        known = {
            "n_cores", "policy", "arrival", "service", "governor",
            "power_profile", "latency_profile", "pc6_timing", "duration_ns",
            "warmup_ns", "seed", "network_latency_ns", "p_pc0_active_w",
            "max_queue",
        }
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidConfig(f"unknown config field(s): {', '.join(unknown)}")
        try:
            policy = Policy(data.get("policy", "shallow"))
        except ValueError:
            raise InvalidConfig(f"unknown policy {data.get('policy')!r}") from None

        def sub(cls_, key, mapper=None):
            payload = data.get(key, {})
            if not isinstance(payload, dict):
                raise InvalidConfig(f"{key} must be an object")
            names = {f.name for f in fields(cls_)}
            bad = sorted(set(payload) - names)
            if bad:
                raise InvalidConfig(f"unknown {key} field(s): {', '.join(bad)}")
            return cls_(**payload)

        from pkgcsim.domain import MalformedProfile
        try:
            power = PowerProfile.from_json_dict(data.get("power_profile", {}))
            latency = LatencyProfile.from_json_dict(data.get("latency_profile", {}))
        except MalformedProfile as exc:
            raise InvalidConfig(str(exc)) from None
        return cls(
            n_cores=data.get("n_cores", 10),
            policy=policy,
            arrival=sub(ArrivalSpec, "arrival"),
            service=sub(ServiceSpec, "service"),
            governor=sub(GovernorSpec, "governor"),
            power=power,
            latency=latency,
            pc6_timing=sub(Pc6Timing, "pc6_timing"),
            duration_ns=data.get("duration_ns", 1_000_000_000),
            warmup_ns=data.get("warmup_ns"),
            seed=data.get("seed", 1),
            network_latency_ns=data.get("network_latency_ns", 117_000),
            p_pc0_active_w=data.get("p_pc0_active_w"),
            max_queue=data.get("max_queue", 100_000),
        )


def validate_config(cfg: SimConfig) -> None:
    problems = []
    if cfg.n_cores < 1:
        problems.append(f"n_cores must be >= 1, got {cfg.n_cores}")
    if cfg.duration_ns <= 0:
        problems.append(f"duration_ns must be > 0, got {cfg.duration_ns}")
    warmup = cfg.effective_warmup_ns
    if warmup < 0 or warmup >= cfg.duration_ns:
        problems.append(
            f"warmup_ns must satisfy 0 <= warmup < duration, got {warmup}"
        )
    if cfg.arrival.kind not in ("poisson", "deterministic", "onoff"):
        problems.append(f"unknown arrival kind {cfg.arrival.kind!r}")
    if cfg.arrival.rate_per_s < 0:
        problems.append(f"arrival rate must be >= 0, got {cfg.arrival.rate_per_s}")
    if cfg.arrival.kind == "onoff" and (
            cfg.arrival.on_mean_ns <= 0 or cfg.arrival.off_mean_ns <= 0):
        problems.append("onoff arrival needs positive on/off phase means")
    if cfg.service.kind not in ("constant", "exponential"):
        problems.append(f"unknown service kind {cfg.service.kind!r}")
    if cfg.service.mean_ns <= 0:
        problems.append(f"service mean_ns must be > 0, got {cfg.service.mean_ns}")
    if cfg.max_queue < 1:
        problems.append(f"max_queue must be >= 1, got {cfg.max_queue}")
    if cfg.network_latency_ns < 0:
        problems.append("network_latency_ns must be >= 0")
    if cfg.p_pc0_active_w is not None and cfg.p_pc0_active_w < 0:
        problems.append("p_pc0_active_w must be >= 0")
    power_check = validate_profile(cfg.power)
    if not power_check.ok:
        problems.append(f"power profile: {', '.join(power_check.violations)}")
    latency_check = validate_profile(cfg.latency)
    if not latency_check.ok:
        problems.append(f"latency profile: {', '.join(latency_check.violations)}")
    if problems:
        raise InvalidConfig("; ".join(problems))


@dataclass(frozen=True)
class SimResult:
    """Everything measured over the post-warmup window [warmup, duration)."""

    package_residency: dict[str, float]
    core_residency: list[dict[str, float]]
    core_residency_aggregate: dict[str, float]
    utilization: float
    pc1a_transitions: int
    pc6_entries: int
    energy_joules: float
    avg_power_w: float
    baseline_equiv_power_w: float
    savings_vs_baseline: float
    avg_latency_ns: float
    p99_latency_ns: float
    requests_arrived: int
    requests_served: int
    window_ns: int
    duration_ns: int
    warmup_ns: int
    n_cores: int
    core_events: tuple[TraceEvent, ...]
    latency_samples: tuple[int, ...]
    package_segments: tuple[tuple[int, int, str], ...]

    def to_report(self) -> dict[str, Any]:
        return {
            "package_residency": dict(self.package_residency),
            "core_residency": [dict(d) for d in self.core_residency],
            "core_residency_aggregate": dict(self.core_residency_aggregate),
            "utilization": self.utilization,
            "pc1a_transitions": self.pc1a_transitions,
            "pc6_entries": self.pc6_entries,
            "energy_joules": self.energy_joules,
            "avg_power_w": self.avg_power_w,
            "baseline_equiv_power_w": self.baseline_equiv_power_w,
            "savings_vs_baseline": self.savings_vs_baseline,
            "avg_latency_ns": self.avg_latency_ns,
            "p99_latency_ns": self.p99_latency_ns,
            "requests_arrived": self.requests_arrived,
            "requests_served": self.requests_served,
            "window_ns": self.window_ns,
            "duration_ns": self.duration_ns,
            "warmup_ns": self.warmup_ns,
            "n_cores": self.n_cores,
        }


@dataclass
class _Request:
    rid: int
    arrival_ns: int
    service_ns: int


class _ArrivalStream:
    """Deterministic (seeded) arrival/service stream, policy-independent.

    Service times are drawn together with their arrival so every policy
    sees the identical workload for the same seed and config.
    """

    def __init__(self, cfg: SimConfig):
        self._rng = Random(cfg.seed)
        self._arrival = cfg.arrival
        self._service = cfg.service
        self._cursor = 0.0
        self._in_on = False
        self._on_until = 0.0
        rate = cfg.arrival.rate_per_s
        self._rate_per_ns = rate * 1e-9
        if cfg.arrival.kind == "onoff" and rate > 0:
            on, off = cfg.arrival.on_mean_ns, cfg.arrival.off_mean_ns
            self._on_rate_per_ns = self._rate_per_ns * (on + off) / on
        else:
            self._on_rate_per_ns = self._rate_per_ns

    def next(self) -> tuple[int, int] | None:
        """(arrival_ns, service_ns) of the next request, or None if starved."""
        if self._rate_per_ns <= 0:
            return None
        kind = self._arrival.kind
        if kind == "deterministic":
            self._cursor += 1.0 / self._rate_per_ns
        elif kind == "poisson":
            self._cursor += self._rng.expovariate(self._rate_per_ns)
        else:  # onoff
            while True:
                if not self._in_on:
                    self._cursor += self._rng.expovariate(1.0 / self._arrival.off_mean_ns)
                    self._in_on = True
                    self._on_until = self._cursor + self._rng.expovariate(
                        1.0 / self._arrival.on_mean_ns)
                gap = self._rng.expovariate(self._on_rate_per_ns)
                if self._cursor + gap <= self._on_until:
                    self._cursor += gap
                    break
                self._cursor = self._on_until
                self._in_on = False
        t = int(self._cursor) + 1  # next whole nanosecond
        if self._service.kind == "constant":
            service = self._service.mean_ns
        else:
            service = max(1, round(self._rng.expovariate(1.0 / self._service.mean_ns)))
        return t, service


def _canonical_events(n_cores: int,
                      events: list[TraceEvent]) -> tuple[TraceEvent, ...]:
    """Collapse same-timestamp flaps and no-ops into a parseable stream.

    The engine may log a core leaving and re-entering CC0 at one timestamp
    (finish then immediate redispatch); at nanosecond resolution only the
    net state holds.  The result is sorted by (time, core) with per-core
    strictly increasing timestamps and no repeated states, which is what
    the trace CSV format requires.
    """
    state = [CoreCState.CC1] * n_cores
    out: list[TraceEvent] = []
    i = 0
    while i < len(events):
        t = events[i].timestamp_ns
        last: dict[int, CoreCState] = {}
        while i < len(events) and events[i].timestamp_ns == t:
            last[events[i].core_id] = events[i].state
            i += 1
        for core in sorted(last):
            if last[core] is not state[core]:
                state[core] = last[core]
                out.append(TraceEvent(t, core, last[core]))
    return tuple(out)


# internal event kinds, ordered only by (t, seq)
_ARRIVAL = "arrival"
_DONE = "done"
_PROMOTE = "promote"
_L0S_ENTER = "l0s_enter"
_PC1A_SETTLE = "pc1a_settle"
_PWR_OK = "pwr_ok"
_PC6_TICK = "pc6_tick"
_PC6_SETTLE = "pc6_settle"


class _Engine:
    def __init__(self, cfg: SimConfig):
        validate_config(cfg)
        self.cfg = cfg
        self.warmup = cfg.effective_warmup_ns
        self.duration = cfg.duration_ns
        self.stream = _ArrivalStream(cfg)
        self.heap: list[tuple[int, int, str, tuple]] = []
        self.seq = 0

        n = cfg.n_cores
        self.core_state = [CoreCState.CC1] * n
        self.core_gen = [0] * n
        self.core_req: list[_Request | None] = [None] * n
        self.n_busy = 0
        self.n_cc6 = 0
        self.queue: deque[_Request] = deque()
        self.in_flight = 0

        self.link_state = IoLState.L0
        self.link_idle_since = 0
        self.link_gen = 0

        self.fsm_state = initial_state(cfg.latency)
        self.fsm_signals = SignalSet()
        self.pkg_gen = 0
        self.package_ready_at = 0
        self.link_ready_at = 0

        # deep-flow wall-clock phase: the FSM's PC2->PC6 tick fires early in
        # the entry window, so residency and wakes key off this instead
        self.pc6_phase = "none"  # none | entering | resident
        self.pc6_entry_done_at = 0
        self.pc6_pending_wake = False
        self.dram_mode = DramPowerMode.ACTIVE

        self.core_events: list[TraceEvent] = []
        self.pkg_state = PackageState.PC0_IDLE
        self.pkg_since = 0
        self.pkg_segments: list[tuple[int, int, str]] = []

        self.arrived = 0
        self.served = 0
        self.latencies: list[int] = []
        self.pc1a_transitions = 0
        self.pc6_entries = 0
        self.next_rid = 0

    # -- plumbing ---------------------------------------------------------

    def push(self, t: int, kind: str, data: tuple = ()) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (t, self.seq, kind, data))

    def set_core(self, core: int, state: CoreCState, t: int) -> None:
        if self.core_state[core] is state:
            return
        if self.core_state[core] is CoreCState.CC6:
            self.n_cc6 -= 1
        if state is CoreCState.CC6:
            self.n_cc6 += 1
        self.core_state[core] = state
        self.core_events.append(TraceEvent(t, core, state))

    def report_package(self) -> PackageState:
        if self.n_busy > 0:
            return PackageState.PC0
        if self.cfg.policy is Policy.PC1A:
            pkg = self.fsm_state.package
            if pkg is PackageState.PC1A:
                return PackageState.PC1A
            if pkg is PackageState.ACC1:
                return PackageState.ACC1
            return PackageState.PC0_IDLE
        if self.cfg.policy is Policy.DEEP:
            if self.pc6_phase == "resident":
                return PackageState.PC6
            if self.pc6_phase == "entering":
                return PackageState.PC2
            return PackageState.PC0_IDLE
        return PackageState.PC0 if self.n_busy else PackageState.PC0_IDLE

    def recompute_pkg(self, t: int, forced: PackageState | None = None) -> None:
        new = forced if forced is not None else self.report_package()
        if new is self.pkg_state:
            return
        if t > self.pkg_since:
            self.pkg_segments.append((self.pkg_since, t, self.pkg_state.value))
        self.pkg_state = new
        self.pkg_since = t

    def fsm_deliver(self, kind: FsmEventKind, t: int):
        result = apmu_step(self.fsm_state, self.fsm_signals,
                           FsmEvent(kind, t), self.cfg.latency)
        violations = signal_violations(result.signals)
        if violations:
            raise PkgcsimError(f"signal invariant broken: {violations}")
        self.fsm_state, self.fsm_signals = result.state, result.signals
        self.dram_mode = (DramPowerMode.CKE_OFF if result.signals.allow_cke_off
                          else DramPowerMode.ACTIVE)
        return result

    def pc6_deliver(self, kind: FsmEventKind, t: int):
        result = pc6_step(self.fsm_state, self.fsm_signals,
                          FsmEvent(kind, t), self.cfg.pc6_timing)
        self.fsm_state, self.fsm_signals = result.state, result.signals
        self.dram_mode = (DramPowerMode.SELF_REFRESH
                          if result.state.package is PackageState.PC6
                          else DramPowerMode.ACTIVE)
        return result

    # -- request path ------------------------------------------------------

    def run(self) -> SimResult:
        cfg = self.cfg
        if cfg.policy is Policy.PC1A:
            self.fsm_deliver(FsmEventKind.ALL_CORES_ENTERED_CC1, 0)
            self.recompute_pkg(0)
            self.schedule_l0s_entry(0)
        elif cfg.policy is Policy.DEEP:
            self.schedule_promotes(0)

        nxt = self.stream.next()
        if nxt is not None and nxt[0] < self.duration:
            self.push(nxt[0], _ARRIVAL, (nxt[1],))

        while self.heap:
            t, _, kind, data = heapq.heappop(self.heap)
            if t >= self.duration:
                break
            getattr(self, "on_" + kind)(t, *data)

        self.finish(self.duration)
        return self.collect()

    def on_arrival(self, t: int, service_ns: int) -> None:
        req = _Request(self.next_rid, t, service_ns)
        self.next_rid += 1
        self.arrived += 1
        self.in_flight += 1
        if self.in_flight == 1:
            self.link_gen += 1  # cancel any pending electrical-idle entry
        self.wake_package(t)
        core = self.pick_idle_core()
        if core is None:
            self.queue.append(req)
            if len(self.queue) > self.cfg.max_queue:
                raise OverloadDetected(
                    f"queue exceeded {self.cfg.max_queue} at t={t}"
                )
        else:
            self.dispatch(core, req, t)
        nxt = self.stream.next()
        if nxt is not None and nxt[0] < self.duration:
            self.push(nxt[0], _ARRIVAL, (nxt[1],))

    def pick_idle_core(self) -> int | None:
        for core in range(self.cfg.n_cores):
            if self.core_state[core] is not CoreCState.CC0:
                return core
        return None

    def dispatch(self, core: int, req: _Request, t: int) -> None:
        prev = self.core_state[core]
        wake = 0
        if prev is not CoreCState.CC0:
            wake = (self.cfg.governor.cc6_exit_ns if prev is CoreCState.CC6
                    else self.cfg.governor.cc1_exit_ns)
        self.core_gen[core] += 1
        self.set_core(core, CoreCState.CC0, t)
        self.core_req[core] = req
        self.n_busy += 1
        self.recompute_pkg(t)
        start = max(t + wake, self.package_ready_at, self.link_ready_at)
        self.push(start + req.service_ns, _DONE, (core,))

    def on_done(self, t: int, core: int) -> None:
        req = self.core_req[core]
        assert req is not None
        self.in_flight -= 1
        self.served += 1
        if req.arrival_ns >= self.warmup:
            self.latencies.append(t - req.arrival_ns + self.cfg.network_latency_ns)
        self.core_req[core] = None
        if self.queue:
            nxt = self.queue.popleft()
            # core stays in CC0; package is PC0 while anything is being served
            self.core_req[core] = nxt
            self.push(t + nxt.service_ns, _DONE, (core,))
            return
        self.set_core(core, CoreCState.CC1, t)
        self.n_busy -= 1
        self.core_gen[core] += 1
        if self.cfg.policy is Policy.DEEP:
            self.schedule_promote(core, t)
        self.recompute_pkg(t)
        if self.n_busy == 0:
            # nothing anywhere in flight: queue is empty and all cores idle
            self.link_idle_since = t
            if self.cfg.policy is Policy.PC1A:
                if (self.fsm_state.package is PackageState.PC0
                        and self.fsm_state.pending is PendingPhase.NONE):
                    self.fsm_deliver(FsmEventKind.ALL_CORES_ENTERED_CC1, t)
                    self.recompute_pkg(t)
                if self.fsm_state.package is PackageState.ACC1:
                    self.schedule_l0s_entry(t)

    # -- agile package machinery -------------------------------------------

    def schedule_l0s_entry(self, t: int) -> None:
        threshold = self.cfg.latency.l0s_entry_threshold_ns
        when = max(self.link_idle_since + threshold, t)
        self.push(when, _L0S_ENTER, (self.link_gen,))

    def on_l0s_enter(self, t: int, gen: int) -> None:
        if gen != self.link_gen or self.in_flight > 0:
            return
        if self.link_state is not IoLState.L0:
            return
        if not (self.fsm_state.package is PackageState.ACC1
                and self.fsm_signals.allow_l0s):
            return
        self.link_state = IoLState.L0S
        result = self.fsm_deliver(FsmEventKind.ALL_IOS_ENTERED_L0S, t)
        self.pkg_gen += 1
        self.push(t + result.latency_ns, _PC1A_SETTLE, (self.pkg_gen,))

    def on_pc1a_settle(self, t: int, gen: int) -> None:
        if gen != self.pkg_gen:
            return
        if self.fsm_state.package is PackageState.PC1A:
            if t >= self.warmup:
                self.pc1a_transitions += 1
            self.recompute_pkg(t)

    def wake_package(self, t: int) -> None:
        """IO-driven package wake on a request arrival, if one is needed."""
        if self.cfg.policy is Policy.PC1A:
            if self.link_state is IoLState.L0S:
                self.link_state = IoLState.L0
                self.link_ready_at = t + self.cfg.latency.l0s_exit_ns
            if self.fsm_state.package is PackageState.PC1A:
                self.pkg_gen += 1  # cancel a pending entry settle
                self.fsm_deliver(FsmEventKind.IO_WAKEUP, t)
                ready = pwr_ok_ready_t_ns(self.fsm_state, self.fsm_signals,
                                          self.cfg.latency)
                prof = self.cfg.latency
                self.package_ready_at = max(
                    ready + prof.clock_gate_ns,
                    t + prof.signal_assert_ns + prof.cke_exit_ns,
                )
                self.push(ready, _PWR_OK, ())
            elif (self.fsm_state.package is PackageState.ACC1
                    and self.fsm_state.pending is PendingPhase.NONE):
                self.pkg_gen += 1
                self.fsm_deliver(FsmEventKind.CORE_INTERRUPT, t)
        elif self.cfg.policy is Policy.DEEP:
            if self.pc6_phase == "resident":
                self.pc6_deliver(FsmEventKind.IO_WAKEUP, t)
                self.pc6_phase = "none"
                self.package_ready_at = t + self.cfg.pc6_timing.exit_ns
            elif self.pc6_phase == "entering":
                # entry in flight: it completes, then the wake unwinds it
                self.pc6_pending_wake = True
                self.package_ready_at = (self.pc6_entry_done_at
                                         + self.cfg.pc6_timing.exit_ns)

    def on_pwr_ok(self, t: int) -> None:
        if self.fsm_state.pending is not PendingPhase.EXIT_BRANCHES:
            return
        self.fsm_deliver(FsmEventKind.PWR_OK_ASSERTED, t)
        if self.n_busy > 0:
            self.fsm_deliver(FsmEventKind.CORE_INTERRUPT, t)
        else:
            # the wake's request already finished; fall back to idle descent
            self.recompute_pkg(t)
            if self.in_flight == 0:
                self.schedule_l0s_entry(t)
        self.recompute_pkg(t)

    # -- deep package machinery ---------------------------------------------

    def schedule_promotes(self, t: int) -> None:
        for core in range(self.cfg.n_cores):
            if self.core_state[core] is not CoreCState.CC0:
                self.schedule_promote(core, t)

    def schedule_promote(self, core: int, idle_since: int) -> None:
        gov = self.cfg.governor
        gen = self.core_gen[core]
        self.push(idle_since + gov.cc1e_promote_ns, _PROMOTE,
                  (core, CoreCState.CC1E.value, gen))
        self.push(idle_since + gov.cc6_promote_ns, _PROMOTE,
                  (core, CoreCState.CC6.value, gen))

    def on_promote(self, t: int, core: int, target: str, gen: int) -> None:
        if gen != self.core_gen[core] or self.core_state[core] is CoreCState.CC0:
            return
        self.set_core(core, CoreCState(target), t)
        if (CoreCState(target) is CoreCState.CC6
                and self.n_cc6 == self.cfg.n_cores
                and self.pc6_phase == "none"
                and self.fsm_state.package is PackageState.PC0
                and self.fsm_state.pending is PendingPhase.NONE):
            self.pc6_deliver(FsmEventKind.ALL_CORES_ENTERED_CC6, t)
            self.pc6_phase = "entering"
            self.pc6_entry_done_at = t + self.cfg.pc6_timing.entry_ns
            self.pc6_pending_wake = False
            self.recompute_pkg(t)
            self.push(t + self.cfg.pc6_timing.pc2_transit_ns, _PC6_TICK, ())
            self.push(self.pc6_entry_done_at, _PC6_SETTLE, ())

    def on_pc6_tick(self, t: int) -> None:
        if (self.fsm_state.package is PackageState.PC2
                and self.fsm_state.pending is PendingPhase.ENTRY_BRANCHES):
            self.pc6_deliver(FsmEventKind.TIMER_TICK, t)

    def on_pc6_settle(self, t: int) -> None:
        if self.pc6_phase != "entering":
            return
        self.pc6_phase = "resident"
        if t >= self.warmup:
            self.pc6_entries += 1
        if self.pc6_pending_wake:
            self.pc6_deliver(FsmEventKind.IO_WAKEUP, t)
            self.pc6_phase = "none"
            self.pc6_pending_wake = False
        self.recompute_pkg(t)

    # -- wrap-up -------------------------------------------------------------

    def finish(self, t: int) -> None:
        if t > self.pkg_since:
            self.pkg_segments.append((self.pkg_since, t, self.pkg_state.value))
            self.pkg_since = t

    def collect(self) -> SimResult:
        cfg = self.cfg
        assert self.arrived == self.served + len(self.queue) + self.n_busy

        window = self.duration - self.warmup
        canonical = _canonical_events(cfg.n_cores, self.core_events)
        clipped = self.clip_core_trace(canonical)
        res = residency_by_state(clipped)

        p_idle = cfg.power.p_pc0_idle_soc + cfg.power.p_pc0_idle_dram
        levels = {
            PackageState.PC0.value: cfg.effective_p_active_w,
            PackageState.PC0_IDLE.value: p_idle,
            PackageState.ACC1.value: p_idle,
            PackageState.PC2.value: p_idle,
            PackageState.PC1A.value: cfg.power.p_pc1a_soc + cfg.power.p_pc1a_dram,
            PackageState.PC6.value: cfg.power.p_pc6_soc + cfg.power.p_pc6_dram,
        }
        base_levels = dict(levels)
        base_levels[PackageState.PC1A.value] = p_idle
        base_levels[PackageState.PC6.value] = p_idle

        pkg_ns = {state.value: 0 for state in PackageState}
        energy_wns = 0.0
        base_wns = 0.0
        for start, end, state in self.pkg_segments:
            lo = max(start, self.warmup)
            hi = min(end, self.duration)
            if hi <= lo:
                continue
            span = hi - lo
            pkg_ns[state] += span
            energy_wns += levels[state] * span
            base_wns += base_levels[state] * span

        pkg_res = {state: ns / window for state, ns in pkg_ns.items()}
        avg_power = energy_wns / window
        base_power = base_wns / window
        savings = 1.0 - avg_power / base_power if base_power > 0 else 0.0

        if self.latencies:
            avg_latency = sum(self.latencies) / len(self.latencies)
            ordered = sorted(self.latencies)
            rank = max(0, -(-99 * len(ordered) // 100) - 1)
            p99 = float(ordered[rank])
        else:
            avg_latency = 0.0
            p99 = 0.0

        return SimResult(
            package_residency=pkg_res,
            core_residency=res["per_core"],
            core_residency_aggregate=res["aggregate"],
            utilization=res["aggregate"][CoreCState.CC0.value],
            pc1a_transitions=self.pc1a_transitions,
            pc6_entries=self.pc6_entries,
            energy_joules=energy_wns * 1e-9,
            avg_power_w=avg_power,
            baseline_equiv_power_w=base_power,
            savings_vs_baseline=savings,
            avg_latency_ns=avg_latency,
            p99_latency_ns=p99,
            requests_arrived=self.arrived,
            requests_served=self.served,
            window_ns=window,
            duration_ns=self.duration,
            warmup_ns=self.warmup,
            n_cores=cfg.n_cores,
            core_events=canonical,
            latency_samples=tuple(self.latencies),
            package_segments=tuple(self.pkg_segments),
        )

    def clip_core_trace(self, events: tuple[TraceEvent, ...]) -> CStateTrace:
        """Core-state trace over [warmup, duration) for residency math."""
        state_at = [CoreCState.CC1] * self.cfg.n_cores
        inside: list[TraceEvent] = []
        for ev in events:
            if ev.timestamp_ns <= self.warmup:
                state_at[ev.core_id] = ev.state
            elif ev.timestamp_ns < self.duration:
                inside.append(ev)
        return CStateTrace(
            n_cores=self.cfg.n_cores, t_start=self.warmup,
            t_end=self.duration, initial_states=tuple(state_at),
            events=tuple(inside),
        )


def run_sim(cfg: SimConfig) -> SimResult:
    """Run one simulation; deterministic for a given config and seed."""
    return _Engine(cfg).run()


def sweep_load(cfg: SimConfig, rates: list[float]) -> list[tuple[float, SimResult]]:
    """Run independent simulations at each arrival rate, same seed each."""
    out = []
    for rate in rates:
        point_cfg = replace(cfg, arrival=replace(cfg.arrival, rate_per_s=rate))
        out.append((rate, run_sim(point_cfg)))
    return out


def export_trace(result: SimResult) -> str:
    """Serialize the run's core C-state trace to the CSV wire format.

    Replaying the CSV through the trace module over the post-warmup window
    reproduces the result's core residencies exactly.
    """
    trace = CStateTrace(
        n_cores=result.n_cores, t_start=0, t_end=result.duration_ns,
        initial_states=tuple([CoreCState.CC1] * result.n_cores),
        events=result.core_events,
    )
    return trace_to_csv(trace)
