"""APMU FSM checks: step semantics, budgets, rail arithmetic, reachability."""

import time

import pytest

from pkgcsim.domain import LatencyProfile, PackageState
from pkgcsim.fsm import (
    BASELINE_SIGNALS,
    Action,
    FsmEvent,
    FsmEventKind,
    IllegalEvent,
    PendingPhase,
    SignalSet,
    apmu_step,
    clm_mv_at,
    initial_state,
    pc6_step,
    pc6_transition_budget,
    pwr_ok_ready_t_ns,
    run_flow_scenario,
    signal_violations,
    transition_budget,
)

PROF = LatencyProfile()


def step(state, signals, kind, t):
    return apmu_step(state, signals, FsmEvent(kind, t), PROF)


def enter_acc1(t=0):
    r = step(initial_state(PROF), SignalSet(), FsmEventKind.ALL_CORES_ENTERED_CC1, t)
    return r.state, r.signals


def enter_pc1a(t_idle=0, t_l0s=20):
    st, sg = enter_acc1(t_idle)
    r = step(st, sg, FsmEventKind.ALL_IOS_ENTERED_L0S, t_l0s)
    return r


class TestEntry:
    def test_idle_edge_reaches_acc1(self):
        r = step(initial_state(PROF), SignalSet(),
                 FsmEventKind.ALL_CORES_ENTERED_CC1, 0)
        assert r.state.package is PackageState.ACC1
        assert r.signals.in_cc1 and r.signals.allow_l0s
        assert r.actions == (Action.SET_ALLOW_L0S,)
        assert r.latency_ns == 4  # one 2-cycle command at 500 MHz

    def test_l0s_edge_enters_agile_state_atomically(self):
        r = enter_pc1a()
        assert r.state.package is PackageState.PC1A
        assert r.state.pending is PendingPhase.NONE
        # fork: clock gate + retention + CKE-off + status assert
        assert set(r.actions) == {Action.CLK_GATE_CLM, Action.SET_RET,
                                  Action.SET_ALLOW_CKE_OFF, Action.ASSERT_IN_PC1A}
        # 4 (gate) + 4 (assert) + 10 (CKE entry); retention ramp non-blocking
        assert r.latency_ns == 18
        assert r.signals.in_pc1a and r.signals.clk_gated
        assert r.signals.ret and not r.signals.pwr_ok
        assert signal_violations(r.signals) == ()

    def test_l0s_edge_requires_permission(self):
        st = initial_state(PROF)
        with pytest.raises(IllegalEvent):
            step(st, SignalSet(), FsmEventKind.ALL_IOS_ENTERED_L0S, 0)


class TestExit:
    def test_io_wake_starts_exit_branches(self):
        r = enter_pc1a()
        r = step(r.state, r.signals, FsmEventKind.IO_WAKEUP, 1_000)
        assert r.state.package is PackageState.PC0_IDLE
        assert r.state.pending is PendingPhase.EXIT_BRANCHES
        assert set(r.actions) == {Action.UNSET_RET, Action.UNSET_ALLOW_CKE_OFF,
                                  Action.DEASSERT_IN_PC1A}
        assert r.latency_ns == 4 + 24  # deassert command + CKE-off exit
        assert not r.signals.allow_cke_off and not r.signals.ret
        assert not r.signals.in_l0s  # IO wake pulls the link out

    def test_gpmu_wake_keeps_link_idle(self):
        r = enter_pc1a()
        r = step(r.state, r.signals, FsmEventKind.GPMU_WAKEUP, 1_000)
        assert r.signals.in_l0s and r.signals.gpmu_wakeup

    def test_full_cycle_restores_baseline(self):
        r = enter_pc1a()
        r = step(r.state, r.signals, FsmEventKind.IO_WAKEUP, 1_000)
        ready = pwr_ok_ready_t_ns(r.state, r.signals, PROF)
        r = step(r.state, r.signals, FsmEventKind.PWR_OK_ASSERTED, ready)
        assert r.state.package is PackageState.ACC1
        assert r.actions == (Action.CLK_UNGATE_CLM,)
        r = step(r.state, r.signals, FsmEventKind.CORE_INTERRUPT, 2_000)
        assert r.state.package is PackageState.PC0
        assert r.signals == BASELINE_SIGNALS

    def test_power_ok_early_is_rejected(self):
        r = enter_pc1a()
        r = step(r.state, r.signals, FsmEventKind.IO_WAKEUP, 1_000)
        ready = pwr_ok_ready_t_ns(r.state, r.signals, PROF)
        with pytest.raises(IllegalEvent):
            step(r.state, r.signals, FsmEventKind.PWR_OK_ASSERTED, ready - 1)


class TestRailArithmetic:
    def test_settled_rail_full_ramp(self):
        # wake long after entry: rail fully at retention, 300 mV at 2 mV/ns
        r = enter_pc1a(0, 0)
        r = step(r.state, r.signals, FsmEventKind.IO_WAKEUP, 500)
        assert pwr_ok_ready_t_ns(r.state, r.signals, PROF) == 500 + 4 + 150

    def test_mid_ramp_reversal(self):
        # entry at 0 anchors the drain at t=8 from 800 mV; wake at 58 finds
        # the rail at 800 - 2*(58-8) = 700 mV, so the climb needs 50 ns
        # behind a 4 ns deassert
        r = enter_pc1a(0, 0)
        assert r.state.ramp_anchor_t_ns == 8
        r = step(r.state, r.signals, FsmEventKind.IO_WAKEUP, 58)
        assert r.state.clm_mv_at_anchor == pytest.approx(700.0)
        ready = pwr_ok_ready_t_ns(r.state, r.signals, PROF)
        assert ready == 58 + 4 + 50
        ok = step(r.state, r.signals, FsmEventKind.PWR_OK_ASSERTED, ready)
        assert ok.signals.pwr_ok and not ok.signals.clk_gated

    def test_drain_clamps_at_retention(self):
        r = enter_pc1a(0, 0)
        mv = clm_mv_at(r.state, r.signals, PROF, 10_000)
        assert mv == pytest.approx(500.0)


class TestEventDiscipline:
    def test_time_must_not_run_backwards(self):
        r = enter_pc1a(0, 20)
        with pytest.raises(IllegalEvent):
            step(r.state, r.signals, FsmEventKind.IO_WAKEUP, 19)

    def test_timer_tick_is_global_noop(self):
        st, sg = enter_acc1()
        r = step(st, sg, FsmEventKind.TIMER_TICK, 5_000)
        assert r.state.package is PackageState.ACC1
        assert r.actions == () and r.latency_ns == 0

    def test_undefined_pairs_raise(self):
        st = initial_state(PROF)
        for kind in (FsmEventKind.IO_WAKEUP, FsmEventKind.PWR_OK_ASSERTED,
                     FsmEventKind.CORE_INTERRUPT):
            with pytest.raises(IllegalEvent):
                step(st, SignalSet(), kind, 0)

    def test_core_wake_illegal_while_cke_off(self):
        # DRAM must come back before any core may run
        r = enter_pc1a()
        assert r.signals.allow_cke_off
        with pytest.raises(IllegalEvent):
            step(r.state, r.signals, FsmEventKind.CORE_INTERRUPT, 1_000)


class TestBudgets:
    def test_agile_budget_defaults(self):
        b = transition_budget(PROF)
        assert b.entry_ns == 18
        assert b.exit_ns == 150  # rail ramp dominates the concurrent legs
        assert b.total_ns == 168

    def test_agile_budget_bounds(self):
        b = transition_budget(PROF)
        assert abs(b.entry_ns - 18) <= 2
        assert b.exit_ns <= 150
        assert b.total_ns <= 200

    def test_degenerate_rail_budget(self):
        # retention == nominal: no ramp; the IO exit leg dominates
        flat = LatencyProfile(v_retention_mv=800)
        b = transition_budget(flat)
        assert b.entry_ns == 18
        assert b.exit_ns == 64
        assert b.total_ns == 82

    def test_deep_budget_defaults(self):
        b = pc6_transition_budget()
        assert b.entry_ns == 22_000
        assert b.exit_ns == 35_000
        assert b.total_ns == 57_000

    def test_deep_flow_is_orders_slower(self):
        agile = transition_budget(PROF)
        deep = pc6_transition_budget()
        assert deep.total_ns >= 50_000
        assert deep.total_ns / agile.total_ns >= 250


class TestDeepFlow:
    def test_entry_exit_walk(self):
        st, sg = initial_state(PROF), SignalSet()
        r = pc6_step(st, sg, FsmEvent(FsmEventKind.ALL_CORES_ENTERED_CC6, 0))
        assert r.state.package is PackageState.PC2
        assert r.latency_ns == 2_000
        r = pc6_step(r.state, r.signals, FsmEvent(FsmEventKind.TIMER_TICK, 2_000))
        assert r.state.package is PackageState.PC6
        assert r.latency_ns == 20_000
        assert Action.DRAM_TO_SELF_REFRESH in r.actions
        assert Action.PLLS_OFF in r.actions
        r = pc6_step(r.state, r.signals, FsmEvent(FsmEventKind.IO_WAKEUP, 100_000))
        assert r.state.package is PackageState.PC0
        assert r.latency_ns == 35_000

    def test_wake_only_legal_from_deep_residence(self):
        st, sg = initial_state(PROF), SignalSet()
        r = pc6_step(st, sg, FsmEvent(FsmEventKind.ALL_CORES_ENTERED_CC6, 0))
        with pytest.raises(IllegalEvent):
            pc6_step(r.state, r.signals, FsmEvent(FsmEventKind.IO_WAKEUP, 1_000))


class TestFlowScenarios:
    def test_agile_scenario(self):
        flow = run_flow_scenario("pc1a-entry-exit", PROF)
        assert flow["final_package"] == "PC0"
        assert flow["signal_violations"] == []
        assert flow["cumulative_latency_ns"] == 58
        assert [s["event"] for s in flow["steps"]] == [
            "AllCoresEnteredCC1", "AllIosEnteredL0s", "GpmuWakeup",
            "PwrOkAsserted", "CoreInterrupt",
        ]

    def test_deep_scenario(self):
        flow = run_flow_scenario("pc6-entry-exit", PROF)
        assert flow["final_package"] == "PC0"
        assert flow["cumulative_latency_ns"] == 57_000

    def test_unknown_scenario(self):
        from pkgcsim.domain import PkgcsimError
        with pytest.raises(PkgcsimError):
            run_flow_scenario("warp-drive")


class TestReachability:
    """Exhaustive breadth-first search over the reachable FSM graph.

    Continuous rail state is abstracted by delivering every event after a
    settle delay long enough for the rail to sit at one of its two levels,
    and PwrOkAsserted exactly at its earliest legal time; the projected
    state space (package, pending, signals) is then finite and small.
    """

    SETTLE_NS = 10_000

    def explore(self):
        start = (initial_state(PROF), SignalSet())
        key = lambda st, sg: (st.package, st.pending, sg)
        seen = {key(*start)}
        frontier = [start]
        edges = 0
        while frontier:
            st, sg = frontier.pop()
            for kind in FsmEventKind:
                t = st.last_t_ns + self.SETTLE_NS
                if kind is FsmEventKind.PWR_OK_ASSERTED:
                    try:
                        t = max(pwr_ok_ready_t_ns(st, sg, PROF), st.last_t_ns)
                    except IllegalEvent:
                        pass
                try:
                    r = apmu_step(st, sg, FsmEvent(kind, t), PROF)
                except IllegalEvent:
                    continue
                edges += 1
                yield st, sg, kind, r
                k = key(r.state, r.signals)
                if k not in seen:
                    seen.add(k)
                    frontier.append((r.state, r.signals))
        assert edges > 0
        assert len(seen) <= 500

    def test_safety_properties_hold_everywhere(self):
        t0 = time.monotonic()
        for st, sg, kind, r in self.explore():
            s = r.signals
            assert signal_violations(s) == ()
            # DRAM power-down only with every core idle
            assert not s.allow_cke_off or s.in_cc1
            # clock only runs on a rail that reported nominal
            assert not (not s.clk_gated and not s.pwr_ok)
            # agile-state status implies the whole gate predicate
            if s.in_pc1a:
                assert s.in_cc1 and s.in_l0s and s.allow_cke_off and s.clk_gated
        assert time.monotonic() - t0 < 1.0

    def test_core_wake_unreachable_while_cke_off(self):
        for st, sg, kind, r in self.explore():
            if r.signals.allow_cke_off:
                with pytest.raises(IllegalEvent):
                    apmu_step(r.state, r.signals,
                              FsmEvent(FsmEventKind.CORE_INTERRUPT,
                                       r.state.last_t_ns + 1), PROF)
