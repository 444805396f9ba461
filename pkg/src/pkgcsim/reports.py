"""Canonical JSON and CSV report builders shared by the service and CLI.

Every report is a plain dict of JSON-safe values serialized with
``canonical_dumps`` so that identical inputs produce byte-identical output
no matter which front end (library call, HTTP endpoint, CLI) asked.
"""

from __future__ import annotations

import csv
import io
import json
from typing import Any

from pkgcsim.domain import LatencyProfile, PowerProfile
from pkgcsim.fsm import pc6_transition_budget, transition_budget
from pkgcsim.power_model import (
    ResidencyVector,
    baseline_power,
    compose_pc1a_power,
    pc1a_savings,
)


def canonical_dumps(obj: Any) -> str:
    """Stable, diff-friendly JSON: sorted keys, two-space indent, one \\n."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def estimate_power_report(power: PowerProfile, r_pc1a: float,
                          p_pc0_at_load: float | None = None,
                          r_pc0: float = 0.0) -> dict[str, Any]:
    """Closed-form power and savings at the given residency mix.

    ``r_pc1a`` is the agile-state residency; the remaining idle time sits
    in PC0_idle.  With the defaults (r_pc0 = 0, r_pc1a = 1) this is the
    full-idle savings bound.
    """
    res = ResidencyVector(r_pc0=r_pc0, r_pc0_idle=1.0 - r_pc0, r_pc1a=r_pc1a)
    base = baseline_power(res, power, p_pc0_at_load)
    savings = pc1a_savings(res, power, p_pc0_at_load)
    soc, dram = compose_pc1a_power(power)
    return {
        "residency": {"r_pc0": res.r_pc0, "r_pc0_idle": res.r_pc0_idle,
                      "r_pc1a": res.r_pc1a},
        "baseline_power_w": base,
        "average_power_w": base * (1.0 - savings),
        "pc1a_state_power_w": {
            "soc_composed_w": soc,
            "dram_composed_w": dram,
            "soc_table_w": power.p_pc1a_soc,
            "dram_table_w": power.p_pc1a_dram,
            "total_table_w": power.p_pc1a_soc + power.p_pc1a_dram,
        },
        "savings_fraction": savings,
        "savings_percent": round(savings * 100.0, 1),
    }


def transition_budget_report(latency: LatencyProfile) -> dict[str, Any]:
    agile = transition_budget(latency)
    deep = pc6_transition_budget()
    return {
        "agile": agile.to_json_dict(),
        "deep": deep.to_json_dict(),
        "deep_to_agile_ratio": deep.total_ns / agile.total_ns,
    }


def table1_csv(power: PowerProfile, latency: LatencyProfile) -> str:
    """Package-state power/exit-latency summary (plot-ready).

    Columns: state, soc_power_w, dram_power_w, total_power_w, exit_ns.
    """
    agile = transition_budget(latency)
    deep = pc6_transition_budget()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["state", "soc_power_w", "dram_power_w",
                     "total_power_w", "exit_ns"])
    writer.writerow(["PC0", "", "", power.p_pc0_max, 0])
    writer.writerow(["PC0_idle", power.p_pc0_idle_soc, power.p_pc0_idle_dram,
                     power.p_pc0_idle_soc + power.p_pc0_idle_dram, 0])
    writer.writerow(["PC6", power.p_pc6_soc, power.p_pc6_dram,
                     round(power.p_pc6_soc + power.p_pc6_dram, 6),
                     deep.exit_ns])
    writer.writerow(["PC1A", power.p_pc1a_soc, power.p_pc1a_dram,
                     round(power.p_pc1a_soc + power.p_pc1a_dram, 6),
                     agile.exit_ns])
    return buf.getvalue()


def load_curve_csv(sweep_report: dict[str, Any]) -> str:
    """Power/latency vs load curve from a sweep report (plot-ready).

    Columns: rate_per_s, utilization, avg_power_w, baseline_power_w,
    savings_fraction, pc1a_residency, avg_latency_ns, p99_latency_ns.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rate_per_s", "utilization", "avg_power_w",
                     "baseline_power_w", "savings_fraction", "pc1a_residency",
                     "avg_latency_ns", "p99_latency_ns"])
    for point in sweep_report["points"]:
        r = point["result"]
        writer.writerow([
            point["rate_per_s"], r["utilization"], r["avg_power_w"],
            r["baseline_equiv_power_w"], r["savings_vs_baseline"],
            r["package_residency"].get("PC1A", 0.0),
            r["avg_latency_ns"], r["p99_latency_ns"],
        ])
    return buf.getvalue()


def collate_report(documents: list[dict[str, Any]],
                   power: PowerProfile,
                   latency: LatencyProfile) -> dict[str, str]:
    """Collate prior run artifacts into named CSV bodies.

    Always emits ``table1.csv`` from the profiles; emits one
    ``load-curve-N.csv`` per sweep report found among the documents.
    """
    out = {"table1.csv": table1_csv(power, latency)}
    n = 0
    for doc in documents:
        if isinstance(doc, dict) and "points" in doc:
            out[f"load-curve-{n}.csv"] = load_curve_csv(doc)
            n += 1
    return out
