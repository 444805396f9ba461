"""FastAPI application exposing the simulator and analyzers over HTTP.

Every endpoint is a thin adapter over ``pkgcsim.service.handlers``.
Domain errors map to 422 with the same single-line message the CLI
prints; malformed request bodies get FastAPI's native 422 handling.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from pkgcsim import __version__
from pkgcsim.domain import PkgcsimError
from pkgcsim.service import handlers
from pkgcsim.service.schemas import (
    AnalyzeTraceRequest,
    EstimatePowerRequest,
    ExplainFlowRequest,
    ReportRequest,
    SimulateRequest,
    SweepRequest,
    TransitionBudgetRequest,
)


def create_app() -> FastAPI:
    app = FastAPI(
        title="pkgcsim",
        version=__version__,
        description="Agile package C-state simulator and trace analyzer.",
    )

    @app.exception_handler(PkgcsimError)
    async def domain_error(_: Request, exc: PkgcsimError) -> JSONResponse:
        return JSONResponse(
            status_code=422,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/profiles/default")
    def default_profile() -> dict:
        return handlers.default_profile_doc()

    @app.post("/simulate")
    def simulate(req: SimulateRequest) -> dict:
        return handlers.handle_simulate(req.config, req.seed_override,
                                        req.include_trace_csv)

    @app.post("/sweep")
    def sweep(req: SweepRequest) -> dict:
        return handlers.handle_sweep(req.config, req.rates, req.seed_override)

    @app.post("/analyze-trace")
    def analyze_trace(req: AnalyzeTraceRequest) -> dict:
        return handlers.handle_analyze_trace(req.trace_csv, req.gate,
                                             req.floor_ns, req.n_cores)

    @app.post("/estimate-power")
    def estimate_power(req: EstimatePowerRequest) -> dict:
        return handlers.handle_estimate_power(req.power_profile, req.r_pc1a,
                                              req.r_pc0, req.p_pc0_w)

    @app.post("/transition-budget")
    def budget(req: TransitionBudgetRequest) -> dict:
        return handlers.handle_transition_budget(req.latency_profile)

    @app.post("/explain-flow")
    def explain_flow(req: ExplainFlowRequest) -> dict:
        return handlers.handle_explain_flow(req.scenario, req.latency_profile)

    @app.post("/report")
    def report(req: ReportRequest) -> dict:
        return handlers.handle_report(req.documents, req.power_profile,
                                      req.latency_profile)

    return app


app = create_app()
