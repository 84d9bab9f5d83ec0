"""Command line: serve the API, inspect topology, drive slices over HTTP,
run what-if path computations, and reproduce the timing suites.

Slice subcommands talk to a running server (``QSLICE_API_URL`` or --api);
``topo``, ``pce`` and ``timing`` work in-process so they need no server.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Any, Optional

from .config import RuntimeConfig
from .errors import PathComputationError, QsliceError
from .orchestrator import timing_report
from .pce import ConnectionRequest, SecurityLevel, compute_path
from .runtime import Runtime, run_timing_suite
from .topology import load_topology_file

DEFAULT_API = "http://127.0.0.1:8000"


def _api_url(args: argparse.Namespace) -> str:
    return args.api or os.environ.get("QSLICE_API_URL", DEFAULT_API)


def _client(args: argparse.Namespace):
    import httpx
    return httpx.Client(base_url=_api_url(args), timeout=600.0)


def _print(doc: Any) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def cmd_serve(args: argparse.Namespace) -> int:
    from .api import serve
    serve(config_path=args.config, host=args.host, port=args.port)
    return 0


def cmd_topo_load(args: argparse.Namespace) -> int:
    try:
        topo = load_topology_file(args.file)
    except QsliceError as exc:
        return _fail(str(exc))
    free_ports = sum(len(c.free_port_indices()) for c in topo.channels.values())
    print(f"ok: {len(topo.sites)} sites, {len(topo.devices)} devices, "
          f"{len(topo.channels)} channels, {len(topo.access_links)} access links, "
          f"{free_ports} free client ports")
    return 0


def cmd_topo_show(args: argparse.Namespace) -> int:
    runtime = Runtime.from_config(RuntimeConfig.load(args.config))
    _print(runtime.topology.serialize())
    return 0


def cmd_slice_submit(args: argparse.Namespace) -> int:
    with open(args.file, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    with _client(args) as client:
        params = {"use_case": args.use_case} if args.use_case else None
        resp = client.post("/slices", json=doc, params=params)
        if resp.status_code != 201:
            return _fail(f"{resp.status_code} {resp.text}")
        record = resp.json()
        slice_id = record["descriptor"]["slice_id"]
        print(f"slice {slice_id}: {record['state']}")
        if args.provision:
            resp = client.post(f"/slices/{slice_id}/provision")
            if resp.status_code != 200:
                return _fail(f"{resp.status_code} {resp.text}")
            record = resp.json()
            duration = record["timings"]["provision_duration_s"]
            print(f"slice {slice_id}: {record['state']}"
                  + (f" in {duration:.1f} simulated s" if duration else ""))
    return 0


def _slice_op(args: argparse.Namespace, method: str, path: str,
              ok_status: int = 200) -> int:
    with _client(args) as client:
        resp = client.request(method, path)
        if resp.status_code != ok_status:
            return _fail(f"{resp.status_code} {resp.text}")
        _print(resp.json())
    return 0


def cmd_slice_provision(args: argparse.Namespace) -> int:
    return _slice_op(args, "POST", f"/slices/{args.slice_id}/provision")


def cmd_slice_deprovision(args: argparse.Namespace) -> int:
    return _slice_op(args, "DELETE", f"/slices/{args.slice_id}")


def cmd_slice_status(args: argparse.Namespace) -> int:
    return _slice_op(args, "GET", f"/slices/{args.slice_id}")


def cmd_slice_audit(args: argparse.Namespace) -> int:
    return _slice_op(args, "GET", f"/slices/{args.slice_id}/audit")


def cmd_slice_list(args: argparse.Namespace) -> int:
    return _slice_op(args, "GET", "/slices")


def cmd_pce_whatif(args: argparse.Namespace) -> int:
    if args.topo:
        topology = load_topology_file(args.topo)
    else:
        runtime = Runtime.from_config(RuntimeConfig.load(args.config))
        topology = runtime.topology
    request = ConnectionRequest(
        src_site=args.src, dst_site=args.dst,
        bandwidth_gbps=args.bandwidth,
        required_security=SecurityLevel.from_name(args.security),
        role="access",
        max_latency_us=args.max_latency_us)
    try:
        solution = compute_path(topology, request, args.policy)
    except PathComputationError as exc:
        return _fail(f"{exc} (reason: {exc.reason})")
    _print({
        "hops": list(solution.hops),
        "reserved_ports": [list(p) for p in solution.reserved_ports],
        "total_latency_us": solution.total_latency_us,
        "min_security_on_path": solution.min_security_on_path.wire_name,
        "policy_used": solution.policy_used,
    })
    return 0


def cmd_timing_run(args: argparse.Namespace) -> int:
    config = RuntimeConfig.load(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.time_scale is not None:
        config.time_scale = args.time_scale
    records = run_timing_suite(args.use_case, args.runs, config=config)
    bad = [r for r in records if r.state != "deleted"]
    if bad:
        return _fail(f"{len(bad)} of {len(records)} runs did not complete")
    table = timing_report(records)
    for label, stats in table.summary().items():
        print(f"{label}: n={stats['count']} mean={stats['mean_s']:.2f}s "
              f"min={stats['min_s']:.2f}s max={stats['max_s']:.2f}s")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(table.to_csv())
        print(f"wrote {len(table.rows)} rows to {args.out}")
    return 0


def cmd_kms_status(args: argparse.Namespace) -> int:
    runtime = Runtime.from_config(RuntimeConfig.load(args.config))
    channels = ([args.channel] if args.channel
                else sorted(runtime.topology.channels))
    out = {}
    for channel_id in channels:
        try:
            out[channel_id] = runtime.kms.channel_status(channel_id)
        except QsliceError as exc:
            return _fail(str(exc))
    _print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qslice",
        description="Quantum-secured network slicing testbed (simulated)")
    parser.add_argument("--config", default=None,
                        help="runtime config JSON (default: $QSLICE_CONFIG)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    topo = sub.add_parser("topo", help="topology tools").add_subparsers(
        dest="topo_command", required=True)
    p = topo.add_parser("load", help="validate a topology file")
    p.add_argument("file")
    p.set_defaults(func=cmd_topo_load)
    p = topo.add_parser("show", help="print the loaded topology")
    p.set_defaults(func=cmd_topo_show)

    sl = sub.add_parser("slice", help="slice operations against a server")
    sl.add_argument("--api", default=None,
                    help=f"server URL (default: $QSLICE_API_URL or {DEFAULT_API})")
    slsub = sl.add_subparsers(dest="slice_command", required=True)
    p = slsub.add_parser("submit", help="submit a descriptor file")
    p.add_argument("file")
    p.add_argument("--provision", action="store_true",
                   help="provision immediately after validation")
    p.add_argument("--use-case", type=int, choices=(1, 2), default=None)
    p.set_defaults(func=cmd_slice_submit)
    for name, func in (("provision", cmd_slice_provision),
                       ("deprovision", cmd_slice_deprovision),
                       ("status", cmd_slice_status),
                       ("audit", cmd_slice_audit)):
        p = slsub.add_parser(name)
        p.add_argument("slice_id")
        p.set_defaults(func=func)
    p = slsub.add_parser("list")
    p.set_defaults(func=cmd_slice_list)

    pce = sub.add_parser("pce", help="path computation tools").add_subparsers(
        dest="pce_command", required=True)
    p = pce.add_parser("whatif", help="compute a path without provisioning")
    p.add_argument("--src", required=True)
    p.add_argument("--dst", required=True)
    p.add_argument("--security", default="none",
                   choices=("none", "dh_aes", "qra_aes", "qkd_aes"))
    p.add_argument("--policy", default="upgrade_allowed",
                   choices=("exact", "upgrade_allowed"))
    p.add_argument("--bandwidth", type=float, default=1.0)
    p.add_argument("--max-latency-us", type=float, default=None)
    p.add_argument("--topo", default=None, help="topology file (default: testbed)")
    p.set_defaults(func=cmd_pce_whatif)

    timing = sub.add_parser("timing", help="timing suites").add_subparsers(
        dest="timing_command", required=True)
    p = timing.add_parser("run", help="run provision/deprovision cycles")
    p.add_argument("--use-case", type=int, choices=(1, 2), required=True)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--time-scale", type=float, default=None)
    p.add_argument("--out", default=None, help="write the timing CSV here")
    p.set_defaults(func=cmd_timing_run)

    kms = sub.add_parser("kms", help="key management tools").add_subparsers(
        dest="kms_command", required=True)
    p = kms.add_parser("status", help="per-channel key schedule status")
    p.add_argument("--channel", default=None)
    p.set_defaults(func=cmd_kms_status)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
