"""Command-line client for the simulation service.

The CLI is a thin client: every command validates its config file locally,
sends it to the HTTP service and writes the returned artifacts to disk.
Without ``--server`` the requests are dispatched against an in-process
instance of the service, so no running server is needed; with ``--server``
the same requests go to a remote instance.

Commands::

    hpflow run CONFIG        integrate, monitor, analyze; write trajectory,
                             report and plot data
    hpflow sweep DIRECTORY   run every config in a directory concurrently
    hpflow verify CONFIG     sample structural and dissipation identities
    hpflow serve             launch the HTTP service with uvicorn

Exit status: 0 on success, 1 when a requested invariant monitor,
certificate or verification fails (or integration fails), 2 on bad
configuration or transport errors.  The environment variable
``HPFLOW_OUTPUT_DIR`` overrides the configured output directory.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import httpx

from . import __version__
from .schemas import (
    ConfigError,
    RunConfig,
    SimulationResult,
    VerifyRequest,
    VerifyResult,
    load_config,
)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2

REQUEST_TIMEOUT = 600.0


class TransportError(RuntimeError):
    pass


def _post(server: str | None, path: str, payload: dict) -> dict:
    """POST to a remote server, or to the in-process service when none is
    configured."""
    if server is not None:
        try:
            with httpx.Client(base_url=server, timeout=REQUEST_TIMEOUT) as client:
                response = client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise TransportError(f"request to {server}{path} failed: {exc}") from exc
    else:
        from .service import app  # imported lazily to keep --help fast

        async def dispatch():
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(
                transport=transport,
                base_url="http://hpflow.internal",
                timeout=REQUEST_TIMEOUT,
            ) as client:
                return await client.post(path, json=payload)

        response = asyncio.run(dispatch())
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except (ValueError, AttributeError):
            detail = response.text
        raise TransportError(f"{path} rejected ({response.status_code}): {detail}")
    return response.json()


def _output_dir(config: RunConfig, override: str | None) -> Path:
    if override:
        return Path(override)
    env = os.environ.get("HPFLOW_OUTPUT_DIR")
    if env:
        return Path(env)
    return Path(config.output.directory)


def _write_outputs(result: SimulationResult, out_dir: Path) -> list[Path]:
    from .runner import write_plot_data, write_report_json, write_trajectory_csv

    out_dir.mkdir(parents=True, exist_ok=True)
    written = [
        write_trajectory_csv(result, out_dir / result.config.output.trajectory),
        write_report_json(result, out_dir / result.config.output.report),
    ]
    if result.config.output.plot_data:
        written.extend(write_plot_data(result, out_dir / "plot"))
    return written


def _summarize(result: SimulationResult) -> list[str]:
    inv = result.invariants
    lines = [
        f"integration: {result.integration.accepted} steps accepted, "
        f"{result.integration.rejected} rejected"
        + (f", FAILED: {result.integration.failure}" if result.integration.failure else ""),
        f"energy drift: {inv.max_h_drift:.3e} "
        f"(threshold {inv.h_threshold:.3e}) -> {'ok' if inv.h_passed else 'FAIL'}",
        f"casimir monotone: {inv.c_increase_count} violations "
        f"-> {'ok' if inv.c_passed else 'FAIL'}",
    ]
    if result.limits is not None:
        lim = result.limits
        if lim.converged:
            lines.append(f"detected limit: {lim.detected}")
        else:
            lines.append("no convergence detected in the trailing window")
        if lim.predicted is not None:
            lines.append(f"predicted limit: {lim.predicted}")
        if lim.distance is not None:
            lines.append(f"detected-predicted distance: {lim.distance:.3e}")
    if result.certificate is not None:
        cert = result.certificate
        lines.append(
            f"certificate: {cert.verdict} (smallest eigenvalue "
            f"{cert.smallest_eigenvalue:.6g}, dpsi/dC {cert.casimir_sensitivity:.6g})"
        )
    lines.append(f"overall: {'ok' if result.success else 'FAIL'}")
    return lines


def _run_one(config_path: Path, server: str | None, out_dir_override: str | None,
             nested_output: bool = False) -> tuple[bool, list[str]]:
    config = load_config(config_path)
    payload = config.model_dump(mode="json")
    result = SimulationResult.model_validate(_post(server, "/simulate", payload))
    out_dir = _output_dir(config, out_dir_override)
    if nested_output:
        out_dir = out_dir / config_path.stem
    written = _write_outputs(result, out_dir)
    lines = [f"== {config_path} =="]
    lines.extend(_summarize(result))
    lines.extend(f"wrote {p}" for p in written)
    return result.success, lines


def cmd_run(args) -> int:
    try:
        success, lines = _run_one(Path(args.config), args.server, args.output_dir)
    except (ConfigError, TransportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    print("\n".join(lines))
    return EXIT_OK if success else EXIT_CHECK_FAILED


def cmd_sweep(args) -> int:
    directory = Path(args.directory)
    configs = sorted(
        p for p in directory.iterdir() if p.suffix in (".yaml", ".yml")
    ) if directory.is_dir() else []
    if not configs:
        print(f"error: no .yaml configs found in {directory}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    def work(path: Path):
        try:
            return path, *_run_one(path, args.server, args.output_dir,
                                   nested_output=True)
        except (ConfigError, TransportError) as exc:
            return path, None, [f"== {path} ==", f"error: {exc}"]

    results = []
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        for item in pool.map(work, configs):
            results.append(item)

    status = EXIT_OK
    for path, success, lines in results:
        print("\n".join(lines))
        print()
        if success is None:
            status = max(status, EXIT_CONFIG_ERROR)
        elif not success:
            status = max(status, EXIT_CHECK_FAILED)
    print(f"sweep: {sum(1 for _, s, _ in results if s)} of {len(results)} runs ok")
    return status


def cmd_verify(args) -> int:
    try:
        config = load_config(Path(args.config))
        request = VerifyRequest(
            system=config.system,
            samples=args.samples,
            seed=args.seed,
            box=args.box,
        )
        payload = request.model_dump(mode="json")
        result = VerifyResult.model_validate(_post(args.server, "/verify", payload))
    except (ConfigError, TransportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    print(json.dumps(result.model_dump(mode="json"), indent=2))
    print(f"verification: {'ok' if result.passed else 'FAIL'}")
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("hpflow.service:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hpflow",
        description="Hamilton-Poisson simulation with Casimir dissipation",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one configured run")
    run.add_argument("config")
    run.add_argument("--server", help="base URL of a running service")
    run.add_argument("--output-dir", help="override the output directory")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="run every config in a directory")
    sweep.add_argument("directory")
    sweep.add_argument("--server", help="base URL of a running service")
    sweep.add_argument("--output-dir", help="override the output directory")
    sweep.add_argument("--jobs", type=int, default=4)
    sweep.set_defaults(func=cmd_sweep)

    verify = sub.add_parser(
        "verify", help="sample structure and dissipation identities"
    )
    verify.add_argument("config")
    verify.add_argument("--server", help="base URL of a running service")
    verify.add_argument("--samples", type=int, default=1000)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--box", type=float, default=1.0)
    verify.set_defaults(func=cmd_verify)

    serve = sub.add_parser("serve", help="launch the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
