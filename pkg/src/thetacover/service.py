"""HTTP service wrapping the per-instance operations.

The handler functions are plain request-model -> response-model calls; the
FastAPI app routes to them, and the CLI uses the same handlers in process
(or POSTs the same payloads to a running server).  Batch experiment sweeps
are not service operations; they run through the CLI's experiment command.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from . import __version__
from .baselines import run_baseline, sweep_lambda
from .certificate import deterministic_recovery
from .graphs import generate_planted, recovery_threshold, scc_parameter
from .oracle import clique_cover_number, stability_number
from .schemas import (
    BaselineRequest,
    BaselineResponse,
    CertifyRequest,
    CertifyResponse,
    CoverRequest,
    CoverResponse,
    GenerateRequest,
    GenerateResponse,
    GraphPayload,
    HealthResponse,
    LambdaOutcome,
    StabilityResponse,
    ThetaRequest,
    ThetaResponse,
)
from .theta import classify_recovery, solve_theta

__all__ = [
    "create_app",
    "handle_generate",
    "handle_theta",
    "handle_certify",
    "handle_cover",
    "handle_stability",
    "handle_baseline",
]


def handle_generate(req: GenerateRequest) -> GenerateResponse:
    inst = generate_planted(req.sizes, req.p, req.seed)
    within = sum(s * (s - 1) // 2 for s in inst.partition.sizes)
    return GenerateResponse(
        graph=GraphPayload.from_graph(inst.graph, inst.partition, inst.p, inst.seed),
        edge_count=len(inst.graph.edges),
        cross_edge_count=len(inst.graph.edges) - within,
        scc_parameter=float(scc_parameter(inst.graph, inst.partition)),
        recovery_threshold=recovery_threshold(inst.partition),
    )


def handle_theta(req: ThetaRequest) -> ThetaResponse:
    g, part = req.graph.to_graph()
    sol = solve_theta(g, eps=req.eps, max_iter=req.max_iter)
    classification = None
    if req.classify:
        if part is None:
            raise ValueError("classification needs blocks in the graph payload")
        if sol.converged:
            classification = classify_recovery(sol, part).value
        else:
            classification = "unconverged"
    return ThetaResponse(
        theta=sol.theta,
        t=sol.t,
        value_lb=sol.value_lb,
        value_ub=sol.value_ub,
        iterations=sol.iterations,
        converged=sol.converged,
        primal_residual=sol.primal_residual,
        dual_residual=sol.dual_residual,
        gap=sol.gap,
        lambda_min_x=sol.lambda_min_x,
        lambda_min_z=sol.lambda_min_z,
        classification=classification,
    )


def handle_certify(req: CertifyRequest) -> CertifyResponse:
    g, part = req.graph.to_graph()
    if part is None:
        raise ValueError("certification needs blocks in the graph payload")
    report = deterministic_recovery(g, part, tol=req.tol)
    d = report.to_dict()
    return CertifyResponse(
        certified=report.certified,
        verdict=d["verdict"],
        reason=d["reason"],
        psd_ok=d["psd_ok"],
        support_ok=d["support_ok"],
        complementarity_ok=d["complementarity_ok"],
        rank_ok=d["rank_ok"],
        extreme_point_ok=d["extreme_point_ok"],
        residuals=d["residuals"],
    )


def handle_cover(req: CoverRequest) -> CoverResponse:
    g, _ = req.graph.to_graph()
    sol = clique_cover_number(g, req.max_nodes, req.max_time)
    return CoverResponse(
        value=sol.value,
        cover=[list(b) for b in sol.cover],
        nodes_explored=sol.nodes_explored,
        time=sol.time,
        exact=sol.exact,
    )


def handle_stability(req: CoverRequest) -> StabilityResponse:
    g, _ = req.graph.to_graph()
    sol = stability_number(g, req.max_nodes, req.max_time)
    return StabilityResponse(
        value=sol.value,
        witness=list(sol.witness),
        nodes_explored=sol.nodes_explored,
        time=sol.time,
        exact=sol.exact,
    )


def handle_baseline(req: BaselineRequest) -> BaselineResponse:
    g, part = req.graph.to_graph()
    if part is None:
        raise ValueError("baselines need blocks in the graph payload")
    if req.method == "deconvolution" and (req.sweep or req.lam is None):
        grid = req.lambda_grid or [round(0.1 * i, 1) for i in range(11)]
        sweep = sweep_lambda(g, part, grid, eps=req.eps, max_iter=req.max_iter)
        outcomes = [
            LambdaOutcome(
                lam=r.params["lambda"],
                success=r.success,
                iterations=r.iterations,
                converged=r.converged,
                target_distance=r.residuals["target_distance"],
            )
            for r in sweep.results
        ]
        best = sweep.best
        return BaselineResponse(
            method="deconvolution",
            params={"lambda_grid": list(grid)},
            success=sweep.success,
            iterations=sum(r.iterations for r in sweep.results),
            converged=all(r.converged for r in sweep.results),
            runtime=sum(r.runtime for r in sweep.results),
            residuals=(
                {k: float(v) for k, v in best.residuals.items()} if best is not None else {}
            ),
            sweep=outcomes,
        )
    res = run_baseline(
        g, part, req.method, eps=req.eps, max_iter=req.max_iter, lam=req.lam
    )
    res.matrices.pop("state", None)
    return BaselineResponse(
        method=res.method,
        params=res.params,
        success=res.success,
        iterations=res.iterations,
        converged=res.converged,
        runtime=res.runtime,
        residuals={k: float(v) for k, v in res.residuals.items()},
    )


def create_app() -> FastAPI:
    app = FastAPI(title="thetacover", version=__version__)

    def run(handler, req):
        try:
            return handler(req)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/generate", response_model=GenerateResponse)
    def generate(req: GenerateRequest):
        return run(handle_generate, req)

    @app.post("/theta", response_model=ThetaResponse)
    def theta(req: ThetaRequest):
        return run(handle_theta, req)

    @app.post("/certify", response_model=CertifyResponse)
    def certify(req: CertifyRequest):
        return run(handle_certify, req)

    @app.post("/cover", response_model=CoverResponse)
    def cover(req: CoverRequest):
        return run(handle_cover, req)

    @app.post("/stability", response_model=StabilityResponse)
    def stability(req: CoverRequest):
        return run(handle_stability, req)

    @app.post("/baseline", response_model=BaselineResponse)
    def baseline(req: BaselineRequest):
        return run(handle_baseline, req)

    return app
