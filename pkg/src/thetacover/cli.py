"""Command-line front end.

Per-instance subcommands (generate / theta / certify / cover / baseline) are
thin clients of the service layer: they build the same request models and
either call the handlers in process (default) or POST them to a running
server (--server URL).  The experiment subcommand runs batch sweeps locally
and writes trials.csv / summary.csv / run.json.  Exit codes: 0 success,
2 usage or config error, 3 I/O error, 4 non-convergence under --strict.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from .bench import ConfigError, ExperimentConfig, load_config, run_experiment
from .graphs import GraphFileError, read_graph, write_graph
from .schemas import (
    BaselineRequest,
    CertifyRequest,
    CoverRequest,
    GenerateRequest,
    GraphPayload,
    ThetaRequest,
)
from . import service

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_UNCONVERGED = 4

_ENDPOINTS = {
    "generate": (service.handle_generate, "/generate"),
    "theta": (service.handle_theta, "/theta"),
    "certify": (service.handle_certify, "/certify"),
    "cover": (service.handle_cover, "/cover"),
    "baseline": (service.handle_baseline, "/baseline"),
}


def _dispatch(name: str, req, server: Optional[str]) -> dict:
    """Run a request against the in-process handler or a remote server."""
    handler, path = _ENDPOINTS[name]
    if server is None:
        return handler(req).model_dump()
    import httpx

    try:
        resp = httpx.post(
            server.rstrip("/") + path, json=req.model_dump(mode="json"), timeout=None
        )
        if resp.status_code == 400:
            raise ValueError(resp.json().get("detail", "bad request"))
        resp.raise_for_status()
    except httpx.HTTPError as exc:
        raise OSError(f"server request failed: {exc}") from exc
    return resp.json()


def _load_payload(path: str) -> GraphPayload:
    g, part = read_graph(path)
    return GraphPayload.from_graph(g, part)


def _int_list(text: str) -> list:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list:
    return [float(x) for x in text.split(",") if x.strip()]


def _print(doc: dict, as_json: bool, lines) -> None:
    if as_json:
        print(json.dumps(doc, indent=2, sort_keys=True, default=str))
    else:
        for line in lines:
            print(line)


def _cmd_generate(args) -> int:
    req = GenerateRequest(sizes=_int_list(args.sizes), p=args.p, seed=args.seed)
    doc = _dispatch("generate", req, args.server)
    payload = GraphPayload.model_validate(doc["graph"])
    g, part = payload.to_graph()
    if args.out:
        write_graph(args.out, g, part, payload.p, payload.seed)
        target = args.out
    else:
        print(json.dumps(doc["graph"], sort_keys=True))
        target = "stdout"
    print(
        f"generated n={g.n} edges={doc['edge_count']} cross={doc['cross_edge_count']} "
        f"c_min={doc['scc_parameter']:.6g} threshold={doc['recovery_threshold']:.6g} -> {target}",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_theta(args) -> int:
    req = ThetaRequest(
        graph=_load_payload(args.graph),
        eps=args.eps,
        max_iter=args.max_iter,
        classify=args.classify,
    )
    doc = _dispatch("theta", req, args.server)
    lines = [
        f"theta = {doc['theta']:.8f}  (enclosure [{doc['value_lb']:.8f}, {doc['value_ub']:.8f}])",
        f"converged = {doc['converged']}  iterations = {doc['iterations']}",
    ]
    if doc.get("classification"):
        lines.append(f"classification = {doc['classification']}")
    _print(doc, args.json, lines)
    if args.strict and not doc["converged"]:
        print("error: solver did not converge (--strict)", file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def _cmd_certify(args) -> int:
    req = CertifyRequest(graph=_load_payload(args.graph), tol=args.tol)
    doc = _dispatch("certify", req, args.server)
    res = doc["residuals"]
    _print(
        doc,
        args.json,
        [
            f"verdict = {doc['verdict']}",
            f"c_min = {res.get('c_min', float('nan')):.6g}  threshold = {res.get('threshold', float('nan')):.6g}",
            f"projection_distance = {res.get('projection_distance', float('nan')):.6g}",
        ],
    )
    return EXIT_OK


def _cmd_cover(args) -> int:
    req = CoverRequest(
        graph=_load_payload(args.graph), max_nodes=args.max_nodes, max_time=args.max_time
    )
    doc = _dispatch("cover", req, args.server)
    _print(
        doc,
        args.json,
        [
            f"cover_number = {doc['value']}  exact = {doc['exact']}  nodes = {doc['nodes_explored']}",
            f"cover = {doc['cover']}",
        ],
    )
    if args.strict and not doc["exact"]:
        print("error: oracle budget exhausted (--strict)", file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def _cmd_baseline(args) -> int:
    req = BaselineRequest(
        graph=_load_payload(args.graph),
        method=args.method,
        lam=args.lam,
        sweep=args.sweep,
        lambda_grid=_float_list(args.lambda_grid) if args.lambda_grid else None,
        eps=args.eps,
    )
    doc = _dispatch("baseline", req, args.server)
    lines = [
        f"method = {doc['method']}  success = {doc['success']}  converged = {doc['converged']}",
    ]
    if doc.get("sweep"):
        succ = [o["lam"] for o in doc["sweep"] if o["success"]]
        lines.append(f"successful lambdas = {succ}")
    _print(doc, args.json, lines)
    if args.strict and not doc["converged"]:
        print("error: solver did not converge (--strict)", file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def _cmd_experiment(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        if cfg.kind != args.kind:
            raise ConfigError(
                f"config kind {cfg.kind!r} does not match requested {args.kind!r}"
            )
    else:
        cfg = ExperimentConfig(kind=args.kind)
    for flag, attr in [
        ("seed", "seed"),
        ("eps", "eps"),
        ("out", "out_dir"),
        ("jobs", "jobs"),
        ("trials", "trials"),
    ]:
        value = getattr(args, flag)
        if value is not None:
            setattr(cfg, attr, value)
    if args.sizes is not None:
        cfg.sizes = _int_list(args.sizes)
    if args.p_grid is not None:
        cfg.p_values = _float_list(args.p_grid)
    if args.nk_values is not None:
        cfg.nk_values = _int_list(args.nk_values)
    result = run_experiment(cfg)
    print(f"wrote {result.out_dir}/trials.csv ({len(result.records)} records)")
    print(f"wrote {result.out_dir}/summary.csv ({len(result.summary)} rows)")
    print(f"wrote {result.out_dir}/run.json")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thetacover",
        description="planted clique-cover recovery via the theta function",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, graph_arg=True):
        if graph_arg:
            p.add_argument("graph", help="graph file (JSON)")
        p.add_argument("--server", default=None, help="base URL of a running service")
        p.add_argument("--json", action="store_true", help="print the full JSON response")
        p.add_argument("--strict", action="store_true", help="nonzero exit on non-convergence")

    p = sub.add_parser("generate", help="generate a planted instance")
    p.add_argument("--sizes", required=True, help="comma-separated block sizes")
    p.add_argument("--p", type=float, required=True, help="cross-block edge probability")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output graph file (default: stdout)")
    p.add_argument("--server", default=None)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("theta", help="solve the theta program")
    add_common(p)
    p.add_argument("--eps", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=200_000)
    p.add_argument("--classify", action="store_true", help="classify against stored blocks")
    p.set_defaults(func=_cmd_theta)

    p = sub.add_parser("certify", help="run the deterministic recovery pipeline")
    add_common(p)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("cover", help="exact clique cover number")
    add_common(p)
    p.add_argument("--max-nodes", type=int, default=5_000_000)
    p.add_argument("--max-time", type=float, default=None)
    p.set_defaults(func=_cmd_cover)

    p = sub.add_parser("baseline", help="run a comparison baseline")
    add_common(p)
    p.add_argument("--method", required=True, choices=["deconvolution", "kdc", "schurhorn"])
    p.add_argument("--lam", type=float, default=None, help="single deconvolution lambda")
    p.add_argument("--sweep", action="store_true", help="sweep the lambda grid")
    p.add_argument("--lambda-grid", default=None, help="comma-separated lambdas")
    p.add_argument("--eps", type=float, default=1e-5)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("experiment", help="run a batch experiment sweep")
    p.add_argument("kind", choices=["comparison", "ilp_gap", "phase_transition", "certify"])
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--out", default=None, help="output directory (overrides config)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--sizes", default=None, help="comma-separated block sizes")
    p.add_argument("--p-grid", default=None, help="comma-separated p values")
    p.add_argument("--nk-values", default=None, help="comma-separated n=k values")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GraphFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
