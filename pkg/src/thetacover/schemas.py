"""Request/response models shared by the HTTP service and the CLI client."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from .graphs import CliquePartition, Graph


class GraphPayload(BaseModel):
    """Wire form of a graph, mirroring the graph file format."""

    n: int
    edges: list[tuple[int, int]]
    blocks: Optional[list[list[int]]] = None
    p: Optional[float] = None
    seed: Optional[int] = None

    @classmethod
    def from_graph(
        cls,
        g: Graph,
        part: Optional[CliquePartition] = None,
        p: Optional[float] = None,
        seed: Optional[int] = None,
    ) -> "GraphPayload":
        return cls(
            n=g.n,
            edges=[tuple(e) for e in g.sorted_edges()],
            blocks=[list(b) for b in part.blocks] if part is not None else None,
            p=p,
            seed=seed,
        )

    def to_graph(self) -> tuple[Graph, Optional[CliquePartition]]:
        g = Graph.from_edges(self.n, self.edges)
        part = None
        if self.blocks is not None:
            part = CliquePartition(self.n, tuple(tuple(v) for v in self.blocks))
        return g, part


class HealthResponse(BaseModel):
    status: str
    version: str


class GenerateRequest(BaseModel):
    sizes: list[int] = Field(min_length=1)
    p: float
    seed: int = 0


class GenerateResponse(BaseModel):
    graph: GraphPayload
    edge_count: int
    cross_edge_count: int
    scc_parameter: float
    recovery_threshold: float


class ThetaRequest(BaseModel):
    graph: GraphPayload
    eps: float = 1e-7
    max_iter: int = 200_000
    classify: bool = False  # needs blocks in the payload


class ThetaResponse(BaseModel):
    theta: float
    t: float
    value_lb: float
    value_ub: float
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float
    gap: float
    lambda_min_x: float
    lambda_min_z: float
    classification: Optional[str] = None


class CertifyRequest(BaseModel):
    graph: GraphPayload  # blocks required
    tol: float = 1e-8


class CertifyResponse(BaseModel):
    certified: bool
    verdict: str
    reason: Optional[str]
    psd_ok: bool
    support_ok: bool
    complementarity_ok: bool
    rank_ok: bool
    extreme_point_ok: bool
    residuals: dict


class CoverRequest(BaseModel):
    graph: GraphPayload
    max_nodes: Optional[int] = 5_000_000
    max_time: Optional[float] = None


class CoverResponse(BaseModel):
    value: int
    cover: list[list[int]]
    nodes_explored: int
    time: float
    exact: bool


class StabilityResponse(BaseModel):
    value: int
    witness: list[int]
    nodes_explored: int
    time: float
    exact: bool


class BaselineRequest(BaseModel):
    graph: GraphPayload  # blocks required
    method: str  # deconvolution | kdc | schurhorn
    lam: Optional[float] = None  # single-lambda deconvolution
    sweep: bool = False  # lambda sweep (deconvolution only)
    lambda_grid: Optional[list[float]] = None
    eps: float = 1e-5
    max_iter: int = 100_000


class LambdaOutcome(BaseModel):
    lam: float
    success: bool
    iterations: int
    converged: bool
    target_distance: float


class BaselineResponse(BaseModel):
    method: str
    params: dict
    success: bool
    iterations: int
    converged: bool
    runtime: float
    residuals: dict
    sweep: Optional[list[LambdaOutcome]] = None
