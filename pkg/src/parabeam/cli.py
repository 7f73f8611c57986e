"""Batch command-line front end: a thin client of the propagation service.

Subcommands parse and validate the TOML run configuration locally, post it
to the service (an in-process instance by default, or a remote one via
--server), and materialize the returned payload as files:

    trajectory.csv   fixed schema u,r2,w2,Q,K,V,U,H0,MI4,invR
    report.json      summary, invariant checks, diagnostics, comparison/tof
    field_XXXX.bin   optional snapshots (little-endian header {n, L, u},
                     then row-major complex128 pairs)

Exit codes: 0 success, 2 config error, 3 numerical failure,
4 invariant violation beyond tolerance.
"""

from __future__ import annotations

import argparse
import asyncio
import os
import sys

import httpx

from . import __version__
from .config import parse_config
from .errors import ConfigError
from .outputs import report_json_text, snapshot_from_b64, field_to_bytes, trajectory_csv_text, write_atomic

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INVARIANT = 4

_ENDPOINTS = {
    "propagate": "/run/propagate",
    "predict": "/run/predict",
    "compare": "/run/compare",
    "analyze-tof": "/run/tof",
    "sweep": "/run/sweep",
}


class ServiceClient:
    """POSTs to a remote service, or to an in-process app via ASGI."""

    def __init__(self, server: str | None):
        self._server = server

    def post(self, path: str, payload: dict) -> tuple[int, dict]:
        if self._server is not None:
            with httpx.Client(base_url=self._server, timeout=None) as client:
                resp = client.post(path, json=payload)
                return resp.status_code, resp.json()

        from .service.app import create_app

        async def _call():
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(
                transport=transport, base_url="http://parabeam.local", timeout=None
            ) as client:
                resp = await client.post(path, json=payload)
                return resp.status_code, resp.json()

        return asyncio.run(_call())


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _classify_error(status: int, body: dict) -> int:
    detail = body.get("detail", {})
    kind = detail.get("kind") if isinstance(detail, dict) else None
    message = detail.get("message") if isinstance(detail, dict) else str(detail)
    if status == 422 or kind == "config-error":
        return _fail(f"config rejected: {message}", EXIT_CONFIG)
    if kind == "numerical-failure":
        return _fail(f"numerical failure: {message}", EXIT_NUMERICAL)
    return _fail(f"service error (HTTP {status}): {message}", EXIT_NUMERICAL)


def _report_payload(payload: dict) -> dict:
    """Everything except the bulky trajectory columns and snapshot blobs."""
    drop = {"trajectory", "snapshots", "points"}
    report = {k: v for k, v in payload.items() if k not in drop}
    if "points" in payload:
        report["points"] = [
            {k: v for k, v in point.items() if k != "trajectory"}
            for point in payload["points"]
        ]
    return report


def _write_run_outputs(payload: dict, out_dir: str, outputs: tuple[str, ...]) -> None:
    if "trajectory" in outputs and payload.get("trajectory"):
        write_atomic(
            os.path.join(out_dir, "trajectory.csv"),
            trajectory_csv_text(payload["trajectory"]),
        )
    if "report" in outputs:
        write_atomic(
            os.path.join(out_dir, "report.json"), report_json_text(_report_payload(payload))
        )
    if payload.get("snapshots") and ("fields" in outputs or "trajectory" in outputs):
        for snap in payload["snapshots"]:
            values, extent, u = snapshot_from_b64(snap["data_b64"])
            write_atomic(
                os.path.join(out_dir, f"field_{snap['index']:04d}.bin"),
                field_to_bytes(values, extent, u),
            )


def _write_sweep_outputs(payload: dict, out_dir: str) -> None:
    index = {
        "workflow": "sweep",
        "version": payload.get("version"),
        "parameter": payload.get("parameter"),
        "values": payload.get("values"),
        "point_workflow": payload.get("point_workflow"),
        "config_toml": payload.get("config_toml"),
        "seed": payload.get("seed"),
        "points": [],
    }
    for point in payload.get("points", []):
        name = f"trajectory_{point['index']:03d}.csv"
        if point.get("trajectory"):
            write_atomic(os.path.join(out_dir, name), trajectory_csv_text(point["trajectory"]))
        index["points"].append(
            {
                "index": point["index"],
                "value": point["value"],
                "workflow": point["workflow"],
                "trajectory_csv": name,
                "summary": point.get("summary", {}),
                "checks": point.get("checks", []),
            }
        )
    write_atomic(os.path.join(out_dir, "index.json"), report_json_text(index))


def _run_workflow(args: argparse.Namespace, workflow: str) -> int:
    try:
        cfg = parse_config(args.config, workflow_hint=workflow)
    except ConfigError as exc:
        return _fail(str(exc), EXIT_CONFIG)

    request = {"config": cfg.as_dict(), "threads": args.threads, "seed": args.seed}
    client = ServiceClient(args.server)
    try:
        status, body = client.post(_ENDPOINTS[workflow], request)
    except httpx.HTTPError as exc:
        return _fail(f"cannot reach service: {exc}", 1)

    if status != 200:
        return _classify_error(status, body)

    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    if workflow == "sweep":
        _write_sweep_outputs(body, out_dir)
    else:
        _write_run_outputs(body, out_dir, cfg.run.outputs)

    failed = [c["name"] for c in body.get("checks", []) if not c.get("passed", True)]
    if failed:
        print(
            f"{workflow}: completed with invariant violations: {', '.join(failed)} "
            f"(see {os.path.join(out_dir, 'report.json' if workflow != 'sweep' else 'index.json')})",
            file=sys.stderr,
        )
        return EXIT_INVARIANT
    print(f"{workflow}: ok, outputs in {out_dir}")
    return EXIT_OK


def _serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("parabeam.service.app:app", host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parabeam",
        description="Nonlinear paraxial beam propagation: solver, analytics, comparisons.",
    )
    parser.add_argument("--version", action="version", version=f"parabeam {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_command(name: str, help_text: str):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", default=".", help="output directory (default: cwd)")
        p.add_argument("--seed", type=int, default=None, help="reserved; echoed in reports")
        p.add_argument("--threads", type=int, default=None, help="parallel runs for sweep")
        p.add_argument("--server", default=None, help="service URL (default: in-process)")
        return p

    add_run_command("propagate", "direct split-step numerical propagation")
    add_run_command("predict", "analytic moment-ODE prediction (no PDE)")
    add_run_command("compare", "numeric vs ABCD/q-law width comparison")
    add_run_command("sweep", "fan runs over a parameter grid")
    add_run_command("analyze-tof", "time-of-flight width analysis")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        return _serve(args)
    return _run_workflow(args, args.command)


if __name__ == "__main__":
    sys.exit(main())
