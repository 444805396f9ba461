"""Package power-management FSM: the agile flow and the deep reference flow.

Agile (PC1A) flow
-----------------
The package PMU sits in PC0 until every core has reached CC1 or deeper,
then moves to ACC1 and allows the IO links to arm electrical idle.  Once
every link reports L0s or deeper, entry forks: one branch clock-gates the
mesh/LLC clock and commands the core supplies to retention (the voltage
ramp itself is non-blocking and continues in the background), the other
branch allows DRAM CKE-off.  Both branches complete autonomously, so the
step that consumes the all-IOs-idle edge performs the fork and the join
and asserts the in-PC1A signal; the join latency is the command sequencing
plus the CKE-off entry.

Exit is event-driven.  An IO or PMU wakeup unsets retention and CKE-off in
one step; the DRAM side completes within that step, but the clock branch
must wait for the power-ok input that arrives only after the rail slews
back to nominal.  If the wakeup lands while the entry ramp is still in
flight, the ramp reverses from the instantaneous voltage, so the exit cost
is proportional to the voltage actually dropped.  After power-ok the clock
ungates and the FSM is back in ACC1; a core interrupt then returns it to
PC0 and disallows electrical idle.

Deep (PC6) reference flow
-------------------------
Once all cores reach CC6 the package passes through PC2, takes the IO
links to L1, puts DRAM into self-refresh, stops the PLLs, and drops the
uncore to retention.  Every leg is microsecond-scale and the wake must
undo all of it, which is why the round trip costs tens of microseconds and
the agile flow exists.

``apmu_step``/``pc6_step`` are pure: they return new state, new signals,
the ordered actions taken, and the nanoseconds charged to that step.
Undefined (state, event) pairs raise ``IllegalEvent`` rather than no-op so
harness bugs surface immediately.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, NamedTuple

from pkgcsim.domain import LatencyProfile, PackageState, PkgcsimError


class IllegalEvent(PkgcsimError):
    """Event not defined for the FSM's current state."""


class FsmEventKind(Enum):
    ALL_CORES_ENTERED_CC1 = "AllCoresEnteredCC1"
    ALL_CORES_ENTERED_CC6 = "AllCoresEnteredCC6"
    CORE_INTERRUPT = "CoreInterrupt"
    ALL_IOS_ENTERED_L0S = "AllIosEnteredL0s"
    IO_WAKEUP = "IoWakeup"
    GPMU_WAKEUP = "GpmuWakeup"
    PWR_OK_ASSERTED = "PwrOkAsserted"
    TIMER_TICK = "TimerTick"


@dataclass(frozen=True)
class FsmEvent:
    kind: FsmEventKind
    t_ns: int = 0


class Action(Enum):
    # agile flow
    SET_ALLOW_L0S = "SetAllowL0s"
    UNSET_ALLOW_L0S = "UnsetAllowL0s"
    CLK_GATE_CLM = "ClkGateClm"
    CLK_UNGATE_CLM = "ClkUngateClm"
    SET_RET = "SetRet"
    UNSET_RET = "UnsetRet"
    SET_ALLOW_CKE_OFF = "SetAllowCkeOff"
    UNSET_ALLOW_CKE_OFF = "UnsetAllowCkeOff"
    ASSERT_IN_PC1A = "AssertInPC1A"
    DEASSERT_IN_PC1A = "DeassertInPC1A"
    # deep flow
    ENTER_PC2 = "EnterPc2"
    EXIT_PC2 = "ExitPc2"
    IOS_TO_L1 = "IosToL1"
    IOS_TO_L0 = "IosToL0"
    DRAM_TO_SELF_REFRESH = "DramToSelfRefresh"
    DRAM_EXIT_SELF_REFRESH = "DramExitSelfRefresh"
    CLK_GATE_UNCORE = "ClkGateUncore"
    CLK_UNGATE_UNCORE = "ClkUngateUncore"
    PLLS_OFF = "PllsOff"
    PLLS_RELOCK = "PllsRelock"


@dataclass(frozen=True)
class SignalSet:
    """PMU-visible status and control signals.

    Baseline (active package): clock running, rail at nominal, everything
    else deasserted.
    """

    in_cc1: bool = False
    allow_l0s: bool = False
    in_l0s: bool = False
    allow_cke_off: bool = False
    ret: bool = False
    pwr_ok: bool = True
    clk_gated: bool = False
    in_pc1a: bool = False
    gpmu_wakeup: bool = False

    def to_json_dict(self) -> dict[str, bool]:
        return {
            "in_cc1": self.in_cc1,
            "allow_l0s": self.allow_l0s,
            "in_l0s": self.in_l0s,
            "allow_cke_off": self.allow_cke_off,
            "ret": self.ret,
            "pwr_ok": self.pwr_ok,
            "clk_gated": self.clk_gated,
            "in_pc1a": self.in_pc1a,
            "gpmu_wakeup": self.gpmu_wakeup,
        }


BASELINE_SIGNALS = SignalSet()


def signal_violations(s: SignalSet) -> tuple[str, ...]:
    """Names of violated signal invariants; empty when consistent.

    in_pc1a requires cores idle, IOs idle, CKE-off allowed, and the clock
    gated.  An ungated clock requires retention deasserted and power-ok
    (the logic may never run on a drooping rail).
    """
    out = []
    if s.in_pc1a and not (s.in_cc1 and s.in_l0s and s.allow_cke_off and s.clk_gated):
        out.append("in_pc1a_implication")
    if not s.clk_gated and (s.ret or not s.pwr_ok):
        out.append("ungated_rail")
    return tuple(out)


class PendingPhase(Enum):
    NONE = "None"
    ENTRY_BRANCHES = "EntryBranches"
    EXIT_BRANCHES = "ExitBranches"


@dataclass(frozen=True)
class ApmuState:
    """FSM bookkeeping: stable package state or an in-flight transition.

    ``pending`` is NONE exactly in the stable states (PC0, ACC1, PC1A for
    the agile flow; PC0, PC6 for the deep flow).  While a transition is in
    flight the package field holds the transient marker (PC0_idle for the
    agile flow, PC2 for the deep flow) and the branch-done flags say which
    concurrent legs have finished.  The ramp anchor pins the instant and
    millivolts from which the retention rail integrates, so a wakeup that
    lands mid-ramp reverses from the true instantaneous voltage.
    """

    package: PackageState = PackageState.PC0
    pending: PendingPhase = PendingPhase.NONE
    clm_done: bool = False
    dram_done: bool = False
    elapsed_ns: int = 0
    last_t_ns: int = 0
    ramp_anchor_t_ns: int = 0
    clm_mv_at_anchor: float = 800.0


def initial_state(profile: LatencyProfile | None = None) -> ApmuState:
    prof = profile or LatencyProfile()
    return ApmuState(clm_mv_at_anchor=float(prof.v_nominal_mv))


class StepResult(NamedTuple):
    state: ApmuState
    signals: SignalSet
    actions: tuple[Action, ...]
    latency_ns: int


def clm_mv_at(state: ApmuState, signals: SignalSet, profile: LatencyProfile,
              t_ns: int) -> float:
    """Instantaneous retention-rail millivolts at ``t_ns``.

    The rail drains toward retention while ret is asserted, climbs back
    toward nominal between ret deassertion and power-ok, and otherwise
    holds.
    """
    dt = max(0, t_ns - state.ramp_anchor_t_ns)
    v = state.clm_mv_at_anchor
    slew = profile.fivr_slew_mv_per_ns
    if signals.ret:
        return max(float(profile.v_retention_mv), v - slew * dt)
    if not signals.pwr_ok:
        return min(float(profile.v_nominal_mv), v + slew * dt)
    return v


def pwr_ok_ready_t_ns(state: ApmuState, signals: SignalSet,
                      profile: LatencyProfile) -> int:
    """Earliest timestamp at which PwrOkAsserted is legal (exit in flight)."""
    if not (state.pending is PendingPhase.EXIT_BRANCHES and not signals.pwr_ok):
        raise IllegalEvent("no rail ramp in flight")
    deficit = profile.v_nominal_mv - state.clm_mv_at_anchor
    return state.ramp_anchor_t_ns + profile.ramp_ns(deficit)


def apmu_step(state: ApmuState, signals: SignalSet, event: FsmEvent,
              profile: LatencyProfile | None = None) -> StepResult:
    """Advance the agile-flow FSM by one event.

    Pure and deterministic; raises IllegalEvent for undefined pairs or for
    an event timestamp that runs backwards.
    """
    prof = profile or LatencyProfile()
    if event.t_ns < state.last_t_ns:
        raise IllegalEvent(
            f"timestamp {event.t_ns} precedes last event at {state.last_t_ns}"
        )
    key = (state.package, state.pending)
    kind = event.kind

    if kind is FsmEventKind.TIMER_TICK:
        dt = event.t_ns - state.last_t_ns
        elapsed = state.elapsed_ns + dt if state.pending is not PendingPhase.NONE else 0
        return StepResult(
            replace(state, last_t_ns=event.t_ns, elapsed_ns=elapsed),
            signals, (), 0,
        )

    if key == (PackageState.PC0, PendingPhase.NONE):
        if kind is FsmEventKind.ALL_CORES_ENTERED_CC1:
            new_sig = replace(signals, in_cc1=True, allow_l0s=True)
            new_state = replace(state, package=PackageState.ACC1,
                                elapsed_ns=0, last_t_ns=event.t_ns)
            return StepResult(new_state, new_sig, (Action.SET_ALLOW_L0S,),
                              prof.signal_assert_ns)
        raise _illegal(state, event)

    if key == (PackageState.ACC1, PendingPhase.NONE):
        if kind is FsmEventKind.ALL_IOS_ENTERED_L0S:
            if not signals.allow_l0s:
                raise _illegal(state, event)
            # Fork: gate the clock and command retention (ramp continues in
            # the background), allow CKE-off.  Join when the DRAM leg lands.
            new_sig = replace(
                signals, in_l0s=True, clk_gated=True, ret=True, pwr_ok=False,
                allow_cke_off=True, in_pc1a=True,
            )
            anchor = event.t_ns + prof.clock_gate_ns + prof.signal_assert_ns
            new_state = replace(
                state, package=PackageState.PC1A, pending=PendingPhase.NONE,
                clm_done=False, dram_done=False, elapsed_ns=0,
                last_t_ns=event.t_ns, ramp_anchor_t_ns=anchor,
                clm_mv_at_anchor=clm_mv_at(state, signals, prof, event.t_ns),
            )
            actions = (Action.CLK_GATE_CLM, Action.SET_RET,
                       Action.SET_ALLOW_CKE_OFF, Action.ASSERT_IN_PC1A)
            latency = prof.clock_gate_ns + prof.signal_assert_ns + prof.cke_entry_ns
            return StepResult(new_state, new_sig, actions, latency)
        if kind is FsmEventKind.CORE_INTERRUPT:
            new_sig = replace(signals, in_cc1=False, allow_l0s=False,
                              in_l0s=False, gpmu_wakeup=False)
            new_state = replace(state, package=PackageState.PC0,
                                elapsed_ns=0, last_t_ns=event.t_ns)
            return StepResult(new_state, new_sig, (Action.UNSET_ALLOW_L0S,),
                              prof.signal_assert_ns)
        if kind is FsmEventKind.IO_WAKEUP and signals.in_l0s:
            # Links left over in electrical idle after a PMU-side exit.
            new_sig = replace(signals, in_l0s=False)
            return StepResult(replace(state, last_t_ns=event.t_ns), new_sig, (), 0)
        raise _illegal(state, event)

    if key == (PackageState.PC1A, PendingPhase.NONE):
        if kind in (FsmEventKind.IO_WAKEUP, FsmEventKind.GPMU_WAKEUP):
            mv_now = clm_mv_at(state, signals, prof, event.t_ns)
            new_sig = replace(
                signals, ret=False, allow_cke_off=False, in_pc1a=False,
                in_l0s=signals.in_l0s and kind is not FsmEventKind.IO_WAKEUP,
                gpmu_wakeup=kind is FsmEventKind.GPMU_WAKEUP,
            )
            # DRAM leg (CKE-off exit) lands within this step; the clock leg
            # waits for power-ok while the rail climbs back from mv_now.
            anchor = event.t_ns + prof.signal_assert_ns
            new_state = replace(
                state, package=PackageState.PC0_IDLE,
                pending=PendingPhase.EXIT_BRANCHES, clm_done=False,
                dram_done=True, elapsed_ns=0, last_t_ns=event.t_ns,
                ramp_anchor_t_ns=anchor, clm_mv_at_anchor=mv_now,
            )
            actions = (Action.UNSET_RET, Action.UNSET_ALLOW_CKE_OFF,
                       Action.DEASSERT_IN_PC1A)
            latency = prof.signal_assert_ns + prof.cke_exit_ns
            return StepResult(new_state, new_sig, actions, latency)
        raise _illegal(state, event)

    if key == (PackageState.PC0_IDLE, PendingPhase.EXIT_BRANCHES):
        if kind is FsmEventKind.PWR_OK_ASSERTED:
            mv_now = clm_mv_at(state, signals, prof, event.t_ns)
            if mv_now < prof.v_nominal_mv:
                raise IllegalEvent(
                    f"PwrOkAsserted at t={event.t_ns} but rail is at "
                    f"{mv_now:.1f} mV of {prof.v_nominal_mv} mV"
                )
            new_sig = replace(signals, pwr_ok=True, clk_gated=False,
                              gpmu_wakeup=False)
            new_state = replace(
                state, package=PackageState.ACC1, pending=PendingPhase.NONE,
                clm_done=True, dram_done=True, elapsed_ns=0,
                last_t_ns=event.t_ns, ramp_anchor_t_ns=event.t_ns,
                clm_mv_at_anchor=float(prof.v_nominal_mv),
            )
            return StepResult(new_state, new_sig, (Action.CLK_UNGATE_CLM,),
                              prof.clock_gate_ns)
        if kind is FsmEventKind.IO_WAKEUP and signals.in_l0s:
            new_sig = replace(signals, in_l0s=False)
            return StepResult(replace(state, last_t_ns=event.t_ns), new_sig, (), 0)
        raise _illegal(state, event)

    raise _illegal(state, event)


def _illegal(state: ApmuState, event: FsmEvent) -> IllegalEvent:
    return IllegalEvent(
        f"event {event.kind.value} undefined in "
        f"({state.package.value}, {state.pending.value})"
    )


@dataclass(frozen=True)
class TransitionBudget:
    entry_ns: int
    exit_ns: int
    total_ns: int

    def to_json_dict(self) -> dict[str, int]:
        return {"entry_ns": self.entry_ns, "exit_ns": self.exit_ns,
                "total_ns": self.total_ns}


def transition_budget(profile: LatencyProfile | None = None) -> TransitionBudget:
    """Worst-case agile entry/exit budget for a latency profile.

    Entry is the command sequencing plus CKE-off entry; the retention ramp
    is non-blocking and excluded.  Exit is the slowest of the concurrent
    legs: the full rail ramp (clock ungate overlaps its settle tail), the
    CKE-off exit behind its deassert command, and the IO electrical-idle
    exit.
    """
    prof = profile or LatencyProfile()
    entry = prof.clock_gate_ns + prof.signal_assert_ns + prof.cke_entry_ns
    exit_ns = max(
        max(prof.full_ramp_ns, prof.clock_gate_ns),
        prof.signal_assert_ns + prof.cke_exit_ns,
        prof.l0s_exit_ns,
    )
    return TransitionBudget(entry, exit_ns, entry + exit_ns)


@dataclass(frozen=True)
class Pc6Timing:
    """Microsecond-scale legs of the deep flow (round trip must exceed 50 us)."""

    pc2_transit_ns: int = 2_000
    io_l1_entry_ns: int = 4_000
    dram_sr_entry_ns: int = 5_000
    pll_off_ns: int = 1_000
    clm_retention_ramp_ns: int = 10_000
    clm_nominal_ramp_ns: int = 10_000
    pll_relock_ns: int = 5_000
    dram_sr_exit_ns: int = 8_000
    io_l1_exit_ns: int = 10_000

    @property
    def entry_ns(self) -> int:
        return (self.pc2_transit_ns + self.io_l1_entry_ns + self.dram_sr_entry_ns
                + self.pll_off_ns + self.clm_retention_ramp_ns)

    @property
    def entry_rest_ns(self) -> int:
        return self.entry_ns - self.pc2_transit_ns

    @property
    def exit_ns(self) -> int:
        return (self.clm_nominal_ramp_ns + self.pll_relock_ns
                + self.dram_sr_exit_ns + self.io_l1_exit_ns
                + self.pc2_transit_ns)


DEFAULT_PC6_TIMING = Pc6Timing()


def pc6_transition_budget(timing: Pc6Timing | None = None) -> TransitionBudget:
    t = timing or DEFAULT_PC6_TIMING
    return TransitionBudget(t.entry_ns, t.exit_ns, t.entry_ns + t.exit_ns)


def pc6_step(state: ApmuState, signals: SignalSet, event: FsmEvent,
             timing: Pc6Timing | None = None) -> StepResult:
    """Advance the deep-flow FSM by one event.

    Entry has two steps: the all-cores-CC6 edge reaches the PC2 transient,
    and a timer tick completes the remaining legs into PC6.  A wakeup from
    PC6 performs the whole reverse sequence back to PC0 in one step.
    """
    t = timing or DEFAULT_PC6_TIMING
    if event.t_ns < state.last_t_ns:
        raise IllegalEvent(
            f"timestamp {event.t_ns} precedes last event at {state.last_t_ns}"
        )
    key = (state.package, state.pending)
    kind = event.kind

    if key == (PackageState.PC0, PendingPhase.NONE):
        if kind is FsmEventKind.ALL_CORES_ENTERED_CC6:
            new_sig = replace(signals, in_cc1=True)
            new_state = replace(state, package=PackageState.PC2,
                                pending=PendingPhase.ENTRY_BRANCHES,
                                clm_done=False, dram_done=False,
                                elapsed_ns=0, last_t_ns=event.t_ns)
            return StepResult(new_state, new_sig, (Action.ENTER_PC2,),
                              t.pc2_transit_ns)
        if kind is FsmEventKind.TIMER_TICK:
            return StepResult(replace(state, last_t_ns=event.t_ns), signals, (), 0)
        raise _illegal(state, event)

    if key == (PackageState.PC2, PendingPhase.ENTRY_BRANCHES):
        if kind is FsmEventKind.TIMER_TICK:
            new_sig = replace(signals, in_l0s=True, clk_gated=True, ret=True,
                              pwr_ok=False)
            new_state = replace(
                state, package=PackageState.PC6, pending=PendingPhase.NONE,
                clm_done=True, dram_done=True,
                elapsed_ns=0, last_t_ns=event.t_ns,
            )
            actions = (Action.IOS_TO_L1, Action.DRAM_TO_SELF_REFRESH,
                       Action.CLK_GATE_UNCORE, Action.PLLS_OFF, Action.SET_RET)
            return StepResult(new_state, new_sig, actions, t.entry_rest_ns)
        raise _illegal(state, event)

    if key == (PackageState.PC6, PendingPhase.NONE):
        if kind in (FsmEventKind.GPMU_WAKEUP, FsmEventKind.IO_WAKEUP):
            new_sig = replace(signals, in_cc1=False, in_l0s=False, ret=False,
                              pwr_ok=True, clk_gated=False, gpmu_wakeup=False)
            new_state = replace(state, package=PackageState.PC0,
                                pending=PendingPhase.NONE, clm_done=False,
                                dram_done=False, elapsed_ns=0,
                                last_t_ns=event.t_ns)
            actions = (Action.UNSET_RET, Action.PLLS_RELOCK,
                       Action.CLK_UNGATE_UNCORE, Action.DRAM_EXIT_SELF_REFRESH,
                       Action.IOS_TO_L0, Action.EXIT_PC2)
            return StepResult(new_state, new_sig, actions, t.exit_ns)
        if kind is FsmEventKind.TIMER_TICK:
            return StepResult(replace(state, last_t_ns=event.t_ns), signals, (), 0)
        raise _illegal(state, event)

    raise _illegal(state, event)


def run_flow_scenario(scenario: str,
                      profile: LatencyProfile | None = None) -> dict[str, Any]:
    """Drive a canned event sequence and record a JSON-able flow log.

    Scenarios: ``pc1a-entry-exit`` walks the agile flow through a full
    entry, a PMU wakeup after the ramp has settled, and the return to PC0;
    ``pc6-entry-exit`` walks the deep flow round trip.
    """
    prof = profile or LatencyProfile()
    steps: list[dict[str, Any]] = []

    def record(before: tuple[ApmuState, SignalSet], event: FsmEvent,
               result: StepResult) -> tuple[ApmuState, SignalSet]:
        state0, _ = before
        steps.append({
            "t_ns": event.t_ns,
            "event": event.kind.value,
            "package_before": state0.package.value,
            "pending_before": state0.pending.value,
            "package_after": result.state.package.value,
            "pending_after": result.state.pending.value,
            "actions": [a.value for a in result.actions],
            "latency_ns": result.latency_ns,
            "signals_after": result.signals.to_json_dict(),
        })
        return result.state, result.signals

    if scenario == "pc1a-entry-exit":
        budget = transition_budget(prof)
        cur = (initial_state(prof), BASELINE_SIGNALS)
        seq = [FsmEvent(FsmEventKind.ALL_CORES_ENTERED_CC1, 0)]
        cur = record(cur, seq[0], apmu_step(*cur, seq[0], prof))
        ev = FsmEvent(FsmEventKind.ALL_IOS_ENTERED_L0S,
                      prof.signal_assert_ns + prof.l0s_entry_threshold_ns)
        cur = record(cur, ev, apmu_step(*cur, ev, prof))
        # wake long after the ramp settled at retention: worst-case reversal
        ev = FsmEvent(FsmEventKind.GPMU_WAKEUP, 10_000)
        cur = record(cur, ev, apmu_step(*cur, ev, prof))
        ev = FsmEvent(FsmEventKind.PWR_OK_ASSERTED,
                      pwr_ok_ready_t_ns(cur[0], cur[1], prof))
        cur = record(cur, ev, apmu_step(*cur, ev, prof))
        ev = FsmEvent(FsmEventKind.CORE_INTERRUPT, 20_000)
        cur = record(cur, ev, apmu_step(*cur, ev, prof))
        budget_dict = budget.to_json_dict()
    elif scenario == "pc6-entry-exit":
        timing = DEFAULT_PC6_TIMING
        budget_dict = pc6_transition_budget(timing).to_json_dict()
        cur = (initial_state(prof), BASELINE_SIGNALS)
        ev = FsmEvent(FsmEventKind.ALL_CORES_ENTERED_CC6, 0)
        cur = record(cur, ev, pc6_step(*cur, ev, timing))
        ev = FsmEvent(FsmEventKind.TIMER_TICK, timing.pc2_transit_ns)
        cur = record(cur, ev, pc6_step(*cur, ev, timing))
        ev = FsmEvent(FsmEventKind.GPMU_WAKEUP, 100_000)
        cur = record(cur, ev, pc6_step(*cur, ev, timing))
    else:
        raise PkgcsimError(f"unknown flow scenario: {scenario!r}")

    total = sum(s["latency_ns"] for s in steps)
    return {
        "scenario": scenario,
        "budget": budget_dict,
        "steps": steps,
        "cumulative_latency_ns": total,
        "final_package": steps[-1]["package_after"],
        "signal_violations": list(signal_violations(cur[1])),
    }
