"""Command-line front end.

Each subcommand is a thin adapter over ``pkgcsim.service.handlers`` so the
CLI, the HTTP service, and the library produce byte-identical canonical
JSON for identical inputs.  With ``--server URL`` the request is sent to a
running service instead of being handled in-process.

Exit codes: 0 success, 1 validation/domain error (single-line
``error: <Kind>: <message>`` on stderr), 2 IO or transport failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any

from pkgcsim.domain import PkgcsimError
from pkgcsim.reports import canonical_dumps
from pkgcsim.service import handlers
from pkgcsim.sim import InvalidConfig

SEED_ENV = "PKGC_SIM_SEED"

_FLOW_SCENARIOS = ("pc1a-entry-exit", "pc6-entry-exit")


def _formatter(prog: str) -> argparse.HelpFormatter:
    # fixed width keeps --help output byte-stable across terminals
    return argparse.HelpFormatter(prog, width=78)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pkgcsim",
        description="Agile package C-state simulator and trace analyzer.",
        formatter_class=_formatter,
    )
    parser.add_argument("--server", metavar="URL", default=None,
                        help="send the request to a running pkgcsim service "
                             "instead of handling it in-process")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="SUBCOMMAND")

    p = sub.add_parser("simulate", formatter_class=_formatter,
                       help="run one workload simulation from a JSON config")
    p.add_argument("--config", required=True, metavar="FILE",
                   help="simulation config JSON")
    p.add_argument("--out", metavar="DIR", default=None,
                   help="directory to write report.json (and trace.csv)")
    p.add_argument("--trace-csv", action="store_true",
                   help="include the per-core C-state trace in the report")

    p = sub.add_parser("sweep", formatter_class=_formatter,
                       help="run simulations across arrival rates")
    p.add_argument("--config", required=True, metavar="FILE")
    p.add_argument("--rates", required=True, metavar="LIST",
                   help="comma-separated arrival rates per second")
    p.add_argument("--out", metavar="DIR", default=None,
                   help="directory to write sweep.json and load-curve.csv")

    p = sub.add_parser("analyze-trace", formatter_class=_formatter,
                       help="derive all-idle intervals from a C-state trace")
    p.add_argument("--trace", required=True, metavar="FILE",
                   help="trace CSV (timestamp_ns,core_id,cstate)")
    p.add_argument("--floor-ns", type=int, default=0, metavar="N",
                   help="drop idle intervals shorter than N ns (default: 0)")
    p.add_argument("--gate", default="CC1", metavar="STATE",
                   help="minimum core idle depth that counts (default: CC1)")
    p.add_argument("--n-cores", type=int, default=None, metavar="N",
                   help="core count override (default: inferred)")
    p.add_argument("--out", metavar="DIR", default=None,
                   help="directory to write analysis.json and intervals.csv")

    p = sub.add_parser("estimate-power", formatter_class=_formatter,
                       help="closed-form package power at a residency mix")
    p.add_argument("--profile", metavar="FILE", default=None,
                   help="profile JSON (default: built-in defaults)")
    p.add_argument("--r-pc1a", type=float, required=True, metavar="X",
                   help="agile-state residency fraction")
    p.add_argument("--r-pc0", type=float, default=0.0, metavar="X",
                   help="active residency fraction (default: 0)")
    p.add_argument("--p-pc0", type=float, default=None, metavar="W",
                   help="active power in watts (default: profile max)")
    p.add_argument("--out", metavar="DIR", default=None)

    p = sub.add_parser("transition-budget", formatter_class=_formatter,
                       help="entry/exit latency budgets for both flows")
    p.add_argument("--profile", metavar="FILE", default=None)
    p.add_argument("--out", metavar="DIR", default=None)

    p = sub.add_parser("explain-flow", formatter_class=_formatter,
                       help="step-by-step walk of a package flow scenario")
    p.add_argument("--scenario", required=True, choices=_FLOW_SCENARIOS)
    p.add_argument("--profile", metavar="FILE", default=None)
    p.add_argument("--out", metavar="DIR", default=None)

    p = sub.add_parser("report", formatter_class=_formatter,
                       help="collate run artifacts into plot-ready CSVs")
    p.add_argument("--in", dest="in_dir", required=True, metavar="DIR",
                   help="directory holding simulate/sweep JSON reports")
    p.add_argument("--profile", metavar="FILE", default=None)
    p.add_argument("--out", metavar="DIR", default=None,
                   help="directory for the CSVs (default: --in)")

    return parser


def _read_json(path: str) -> Any:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path} is not valid JSON: {exc}") from None


def _profile_doc(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    doc = _read_json(path)
    if not isinstance(doc, dict):
        raise InvalidConfig(f"{path} must hold a JSON object")
    return doc


def _seed_override() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise InvalidConfig(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _parse_rates(raw: str) -> list[float]:
    try:
        rates = [float(tok) for tok in raw.split(",") if tok.strip() != ""]
    except ValueError:
        raise InvalidConfig(f"--rates must be comma-separated numbers, got {raw!r}") from None
    if not rates:
        raise InvalidConfig("--rates must name at least one rate")
    return rates


def _build_request(args: argparse.Namespace) -> tuple[str, dict[str, Any]]:
    """(endpoint path, request payload) for the chosen subcommand."""
    cmd = args.command
    if cmd == "simulate":
        return "/simulate", {
            "config": _read_json(args.config),
            "seed_override": _seed_override(),
            "include_trace_csv": bool(args.trace_csv),
        }
    if cmd == "sweep":
        return "/sweep", {
            "config": _read_json(args.config),
            "rates": _parse_rates(args.rates),
            "seed_override": _seed_override(),
        }
    if cmd == "analyze-trace":
        return "/analyze-trace", {
            "trace_csv": Path(args.trace).read_text(),
            "gate": args.gate,
            "floor_ns": args.floor_ns,
            "n_cores": args.n_cores,
        }
    if cmd == "estimate-power":
        doc = _profile_doc(args.profile)
        return "/estimate-power", {
            "power_profile": doc.get("power_profile", {}),
            "r_pc1a": args.r_pc1a,
            "r_pc0": args.r_pc0,
            "p_pc0_w": args.p_pc0,
        }
    if cmd == "transition-budget":
        doc = _profile_doc(args.profile)
        return "/transition-budget", {
            "latency_profile": doc.get("latency_profile", {}),
        }
    if cmd == "explain-flow":
        doc = _profile_doc(args.profile)
        return "/explain-flow", {
            "scenario": args.scenario,
            "latency_profile": doc.get("latency_profile", {}),
        }
    if cmd == "report":
        doc = _profile_doc(args.profile)
        documents = []
        for path in sorted(Path(args.in_dir).glob("*.json")):
            loaded = _read_json(str(path))
            if isinstance(loaded, dict):
                documents.append(loaded)
        return "/report", {
            "documents": documents,
            "power_profile": doc.get("power_profile", {}),
            "latency_profile": doc.get("latency_profile", {}),
        }
    raise InvalidConfig(f"unknown subcommand {cmd!r}")


_LOCAL = {
    "/simulate": lambda q: handlers.handle_simulate(
        q["config"], q["seed_override"], q["include_trace_csv"]),
    "/sweep": lambda q: handlers.handle_sweep(
        q["config"], q["rates"], q["seed_override"]),
    "/analyze-trace": lambda q: handlers.handle_analyze_trace(
        q["trace_csv"], q["gate"], q["floor_ns"], q["n_cores"]),
    "/estimate-power": lambda q: handlers.handle_estimate_power(
        q["power_profile"], q["r_pc1a"], q["r_pc0"], q["p_pc0_w"]),
    "/transition-budget": lambda q: handlers.handle_transition_budget(
        q["latency_profile"]),
    "/explain-flow": lambda q: handlers.handle_explain_flow(
        q["scenario"], q["latency_profile"]),
    "/report": lambda q: handlers.handle_report(
        q["documents"], q["power_profile"], q["latency_profile"]),
}


def _dispatch(server: str | None, path: str,
              payload: dict[str, Any]) -> dict[str, Any]:
    if server is None:
        return _LOCAL[path](payload)
    import httpx
    response = httpx.post(server.rstrip("/") + path, json=payload,
                          timeout=300.0)
    if response.status_code == 422:
        body = response.json()
        raise PkgcsimError(
            f"{body.get('error', 'ValidationError')}: {body.get('detail', body)}"
        )
    response.raise_for_status()
    return response.json()


def _write_artifacts(args: argparse.Namespace, report: dict[str, Any]) -> None:
    cmd = args.command
    if cmd == "report":
        out_dir = Path(args.out if args.out else args.in_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, body in report["files"].items():
            (out_dir / name).write_text(body)
        return
    if getattr(args, "out", None) is None:
        return
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    main_name = {
        "simulate": "report.json",
        "sweep": "sweep.json",
        "analyze-trace": "analysis.json",
        "estimate-power": "estimate.json",
        "transition-budget": "budget.json",
        "explain-flow": "flow.json",
    }[cmd]
    (out_dir / main_name).write_text(canonical_dumps(report))
    if cmd == "simulate" and "trace_csv" in report:
        (out_dir / "trace.csv").write_text(report["trace_csv"])
    if cmd == "sweep":
        from pkgcsim.reports import load_curve_csv
        (out_dir / "load-curve.csv").write_text(load_curve_csv(report))
    if cmd == "analyze-trace":
        from pkgcsim.trace import intervals_to_csv
        pairs = [(int(a), int(b)) for a, b in report["intervals"]]
        (out_dir / "intervals.csv").write_text(intervals_to_csv(pairs))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        path, payload = _build_request(args)
        report = _dispatch(args.server, path, payload)
        sys.stdout.write(canonical_dumps(report))
        _write_artifacts(args, report)
        return 0
    except PkgcsimError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: IOError: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # httpx transport failures and friends
        if type(exc).__module__.startswith("httpx"):
            print(f"error: TransportError: {exc}", file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
