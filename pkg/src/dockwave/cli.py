"""Thin command-line client for the service.

Subcommands build a request, send it to the service (in process by
default, or to a running server with --server), and format the response.
Exit codes: 0 ok, 2 config error, 3 solver abort, 4 invariant failure.
"""

import json
import sys

import click


def _client(server):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _post(server, path, payload):
    with _client(server) as client:
        resp = client.post(path, json=payload)
    try:
        body = resp.json()
    except Exception:
        click.echo(f"bad response ({resp.status_code}): {resp.text}", err=True)
        sys.exit(4)
    return body


def _finish(body):
    code = int(body.get("exit_code", 4))
    if "detail" in body and body.get("status") not in (None, "ok"):
        for line in body.get("detail", []):
            click.echo(f"error: {line}", err=True)
    sys.exit(code)


def _config_payload(config, overrides):
    ov = {}
    for item in overrides:
        if "=" not in item:
            click.echo(f"--set expects key=value, got {item!r}", err=True)
            sys.exit(2)
        key, _, val = item.partition("=")
        ov[key.strip()] = val.strip()
    return {"config_path": config, "overrides": ov}


server_option = click.option("--server", default=None,
                             help="URL of a running service; default runs in process")
set_option = click.option("--set", "overrides", multiple=True,
                          help="override a config key, e.g. --set n_r=64")


@click.group()
def main():
    """Shallow water around a partially immersed obstacle."""


@main.command()
@click.argument("config", type=click.Path())
@click.option("--outdir", default=None, help="override the output directory")
@set_option
@server_option
def run(config, outdir, overrides, server):
    """Run a scenario and write snapshots, diagnostics, and a manifest."""
    payload = _config_payload(config, overrides)
    payload["outdir"] = outdir
    body = _post(server, "/run", payload)
    if "manifest" in body:
        click.echo(f"status: {body['status']}   outdir: {body['outdir']}")
        for key in ("steps", "t_final", "energy_initial", "energy_final",
                    "final_max_zeta", "abort", "abort_step", "abort_cell",
                    "wall_time_s"):
            if key in body["manifest"] and body["manifest"][key] != "None":
                click.echo(f"  {key} = {body['manifest'][key]}")
    _finish(body)


@main.command("check-compat")
@click.argument("config", type=click.Path())
@click.option("--max-order", default=2, show_default=True)
@set_option
@server_option
def check_compat(config, max_order, overrides, server):
    """Print the compatibility residual table with pass/fail per order."""
    payload = _config_payload(config, overrides)
    payload["max_order"] = max_order
    body = _post(server, "/check-compat", payload)
    if "rows" in body:
        click.echo(f"compat_tol = {body['tol']:.3e}")
        click.echo("order      L2 residual    H^-1/2 residual   verdict")
        for row in body["rows"]:
            verdict = "pass" if row["passed"] else "FAIL"
            click.echo(f"{row['order']:5d}   {row['l2']:13.6e}  {row['h_m_half']:15.6e}"
                       f"   {verdict}")
    _finish(body)


@main.command("dtn-selftest")
@click.option("--n-s", default=256, show_default=True)
@click.option("--n-rho", default=64, show_default=True)
@click.option("--backend", "backends", multiple=True, default=("spectral", "fd"),
              show_default=True)
@click.option("--dump", default=None, type=click.Path(),
              help="write the first backend's operator as a DTN1 binary")
@server_option
def dtn_selftest(n_s, n_rho, backends, dump, server):
    """Disk oracle battery: mode errors and operator property defects."""
    payload = {"n_s": n_s, "n_rho": n_rho, "backends": list(backends),
               "dump_path": dump}
    body = _post(server, "/dtn-selftest", payload)
    if "rows" in body:
        click.echo("backend    mode   relative L2 error")
        for row in body["rows"]:
            click.echo(f"{row['backend']:>8}   {row['mode']:4d}   {row['rel_l2_error']:.3e}")
        for backend, props in body.get("properties", {}).items():
            click.echo(f"[{backend}]")
            for key, val in props.items():
                click.echo(f"  {key} = {val:.3e}")
        if body.get("dump"):
            click.echo(f"operator written to {body['dump']}")
    _finish(body)


@main.command()
@click.argument("run_dir", type=click.Path())
@server_option
def probe(run_dir, server):
    """Replay snapshots and print the weak-dissipativity report."""
    body = _post(server, "/probe", {"run_dir": run_dir})
    if "boundary_form_integral" in body:
        for key, val in body.items():
            if key == "exit_code":
                continue
            click.echo(f"{key} = {val}")
    _finish(body)


@main.command()
@click.argument("config", type=click.Path())
@click.option("--levels", default=3, show_default=True)
@set_option
@server_option
def converge(config, levels, overrides, server):
    """Run a refinement study and print fitted orders."""
    payload = _config_payload(config, overrides)
    payload["levels"] = levels
    body = _post(server, "/converge", payload)
    if "levels" in body and isinstance(body["levels"], list):
        click.echo("level    n_r    n_s    energy drift    max vorticity    compat0")
        for row in body["levels"]:
            click.echo(f"{row['level']:5d}  {row['n_r']:5d}  {row['n_s']:5d}  "
                       f"{row['drift']:12.4e}  {row['max_vort']:13.4e}  {row['compat0']:9.2e}")
        click.echo(f"solution L1 diffs: "
                   + ", ".join(f"{d:.4e}" for d in body["solution_diffs_l1"]))
        for key in ("solution_order", "drift_order", "vorticity_order", "compat_order"):
            click.echo(f"{key} = {body[key]}")
    _finish(body)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Start the HTTP service (requires uvicorn)."""
    try:
        import uvicorn
    except ImportError:
        click.echo("uvicorn is not installed; pip install uvicorn", err=True)
        sys.exit(2)
    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
