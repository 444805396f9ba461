"""Pure request-to-report functions shared by the HTTP app and the CLI.

Each handler takes plain JSON-safe inputs and returns a JSON-safe report
dict.  Domain errors propagate as PkgcsimError subclasses; the front ends
translate them (HTTP 422, CLI exit 1).
"""

from __future__ import annotations

import json
from importlib import resources
from typing import Any, Optional

from pkgcsim.domain import (
    CoreCState,
    LatencyProfile,
    MalformedProfile,
    PowerProfile,
    validate_profile,
)
from pkgcsim.fsm import run_flow_scenario
from pkgcsim.reports import (
    collate_report,
    estimate_power_report,
    transition_budget_report,
)
from pkgcsim.sim import SimConfig, run_sim, sweep_load, export_trace
from pkgcsim.trace import (
    UnknownState,
    all_idle_intervals,
    apply_sampling_floor,
    parse_trace,
)


def default_profile_doc() -> dict[str, Any]:
    text = (resources.files("pkgcsim") / "data" / "default-skx.json").read_text()
    return json.loads(text)


def _power_profile(overrides: dict[str, Any]) -> PowerProfile:
    profile = PowerProfile.from_json_dict(overrides or {})
    check = validate_profile(profile)
    if not check.ok:
        raise MalformedProfile("; ".join(check.violations))
    return profile


def _latency_profile(overrides: dict[str, Any]) -> LatencyProfile:
    profile = LatencyProfile.from_json_dict(overrides or {})
    check = validate_profile(profile)
    if not check.ok:
        raise MalformedProfile("; ".join(check.violations))
    return profile


def handle_simulate(config: dict[str, Any], seed_override: Optional[int] = None,
                    include_trace_csv: bool = False) -> dict[str, Any]:
    cfg = SimConfig.from_json_dict(config or {})
    if seed_override is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=seed_override)
    result = run_sim(cfg)
    report: dict[str, Any] = {
        "config": cfg.to_json_dict(),
        "result": result.to_report(),
    }
    if include_trace_csv:
        report["trace_csv"] = export_trace(result)
    return report


def handle_sweep(config: dict[str, Any], rates: list[float],
                 seed_override: Optional[int] = None) -> dict[str, Any]:
    cfg = SimConfig.from_json_dict(config or {})
    if seed_override is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=seed_override)
    points = sweep_load(cfg, list(rates))
    return {
        "config": cfg.to_json_dict(),
        "points": [
            {"rate_per_s": rate, "result": result.to_report()}
            for rate, result in points
        ],
    }


def handle_analyze_trace(trace_csv: str, gate: str = "CC1", floor_ns: int = 0,
                         n_cores: Optional[int] = None) -> dict[str, Any]:
    try:
        gate_state = CoreCState(gate)
    except ValueError:
        raise UnknownState(f"unknown gate state {gate!r}") from None
    trace = parse_trace(trace_csv, n_cores=n_cores)
    report = all_idle_intervals(trace, gate=gate_state)
    if floor_ns:
        report = apply_sampling_floor(report, floor_ns)
    return report.to_json_dict()


def handle_estimate_power(power_profile: dict[str, Any], r_pc1a: float,
                          r_pc0: float = 0.0,
                          p_pc0_w: Optional[float] = None) -> dict[str, Any]:
    power = _power_profile(power_profile)
    return estimate_power_report(power, r_pc1a, p_pc0_w, r_pc0)


def handle_transition_budget(latency_profile: dict[str, Any]) -> dict[str, Any]:
    latency = _latency_profile(latency_profile)
    return transition_budget_report(latency)


def handle_explain_flow(scenario: str,
                        latency_profile: dict[str, Any]) -> dict[str, Any]:
    latency = _latency_profile(latency_profile)
    return run_flow_scenario(scenario, latency)


def handle_report(documents: list[dict[str, Any]],
                  power_profile: dict[str, Any],
                  latency_profile: dict[str, Any]) -> dict[str, Any]:
    power = _power_profile(power_profile)
    latency = _latency_profile(latency_profile)
    return {"files": collate_report(documents, power, latency)}
