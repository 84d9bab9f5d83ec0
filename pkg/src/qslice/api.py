"""HTTP service surface.

JSON in, JSON out, no ORM and no background workers: provisioning runs
synchronously inside the request (the global configuration lock serializes
concurrent submissions server-side).  Validation errors return 400 with the
offending field path, infeasible requests 422 with the structured reason,
lifecycle violations 409.  Fault injection is a test endpoint and can be
disabled in config; the timing CSV and the shipped descriptor presets exist
for the operations portal.
"""

from __future__ import annotations

import json
import logging
from typing import Any, Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import __version__
from .errors import DeviceError, KmsError, QsliceError, SliceError, TopologyError
from .frames import FrameError
from .orchestrator import descriptor_from_dict, timing_report
from .runtime import Runtime, usecase_descriptor_doc

log = logging.getLogger(__name__)


def _error(status: int, message: str, **extra: Any) -> JSONResponse:
    return JSONResponse({"detail": message, **extra}, status_code=status)


def create_app(runtime: Optional[Runtime] = None) -> FastAPI:
    rt = runtime or Runtime.from_config()
    app = FastAPI(title="qslice", version=__version__, docs_url=None,
                  redoc_url=None)
    app.state.runtime = rt
    orch = rt.orchestrator
    cfg = rt.config

    if cfg.cors_origin:
        from fastapi.middleware.cors import CORSMiddleware
        app.add_middleware(
            CORSMiddleware, allow_origins=[cfg.cors_origin],
            allow_methods=["*"], allow_headers=["*"])

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        if cfg.api_token:
            supplied = request.headers.get("authorization", "")
            if supplied != f"Bearer {cfg.api_token}":
                return _error(401, "missing or invalid bearer token")
        return await call_next(request)

    async def _body(request: Request) -> Any:
        raw = await request.body()
        try:
            return json.loads(raw) if raw else {}
        except json.JSONDecodeError as exc:
            raise FrameworkBadJson(str(exc)) from exc

    class FrameworkBadJson(Exception):
        pass

    @app.exception_handler(FrameworkBadJson)
    async def bad_json(_request: Request, exc: FrameworkBadJson):
        return _error(400, f"request body is not valid JSON: {exc}")

    # -- slices ---------------------------------------------------------------

    @app.post("/slices", status_code=201)
    async def submit_slice(request: Request, use_case: Optional[int] = None):
        doc = await _body(request)
        try:
            descriptor = descriptor_from_dict(doc)
        except SliceError as exc:
            return _error(400, str(exc), **exc.details)
        try:
            record = orch.request_slice(descriptor, use_case=use_case)
        except SliceError as exc:
            if "duplicate slice_id" in str(exc):
                return _error(409, str(exc), **exc.details)
            return _error(422, str(exc), **exc.details)
        return record.to_dict()

    @app.post("/slices/{slice_id}/provision")
    def provision(slice_id: str):
        try:
            record = orch.provision_slice(slice_id)
        except SliceError as exc:
            status = 404 if "unknown slice" in str(exc) else 409
            return _error(status, str(exc), **exc.details)
        return record.to_dict()

    @app.delete("/slices/{slice_id}")
    def deprovision(slice_id: str):
        try:
            record = orch.get_slice(slice_id)
        except SliceError as exc:
            return _error(404, str(exc))
        if record.state == "deleted":
            return record.to_dict()            # idempotent teardown
        try:
            record = orch.deprovision_slice(slice_id)
        except SliceError as exc:
            return _error(409, str(exc), **exc.details)
        return record.to_dict()

    @app.get("/slices")
    def list_slices():
        return {
            "slices": [
                {"slice_id": sid, "name": rec.descriptor.name,
                 "state": rec.state, "use_case": rec.use_case}
                for sid, rec in sorted(orch.slices.items())
            ]
        }

    @app.get("/slices/{slice_id}")
    def get_slice(slice_id: str):
        try:
            return orch.get_slice(slice_id).to_dict()
        except SliceError as exc:
            return _error(404, str(exc))

    @app.get("/slices/{slice_id}/audit")
    def audit(slice_id: str):
        try:
            return orch.audit_slice(slice_id)
        except SliceError as exc:
            status = 404 if "unknown slice" in str(exc) else 409
            return _error(status, str(exc))

    # -- topology, keys, metrics ------------------------------------------------

    @app.get("/topology")
    def topology():
        return rt.topology.serialize()

    @app.get("/keys/channel/{channel_id}/status")
    def key_status(channel_id: str):
        try:
            return rt.kms.channel_status(channel_id)
        except KmsError as exc:
            return _error(404, str(exc))

    @app.get("/metrics/timings.csv")
    def timings_csv():
        done = [r for r in orch.slices.values()
                if r.provision_duration_s is not None]
        if not done:
            csv_text = "slice_id,use_case,operation,start_s,end_s,duration_s\r\n"
        else:
            csv_text = timing_report(done).to_csv()
        return Response(csv_text, media_type="text/csv")

    @app.get("/presets")
    def presets():
        return {"presets": [
            {"use_case": n, "descriptor": usecase_descriptor_doc(n)}
            for n in (1, 2)
        ]}

    # -- data plane and faults ----------------------------------------------------

    @app.post("/channels/{channel_id}/frames")
    async def send_frames(channel_id: str, request: Request):
        doc = await _body(request)
        try:
            report = rt.dataplane.send_frames(
                channel_id,
                port=int(doc.get("port", 0)),
                count=int(doc.get("count", 1)),
                payload=b"\x00" * int(doc.get("payload_size", 64)),
                pace_s=float(doc.get("pace_s", 0.0)),
            )
        except (FrameError, KmsError) as exc:
            return _error(404 if "unknown channel" in str(exc) else 422, str(exc))
        return {
            "frames_sent": report.frames_sent,
            "frames_delivered": report.frames_delivered,
            "decrypt_failures": report.decrypt_failures,
            "bytes_delivered": report.bytes_delivered,
            "distinct_key_ids": report.distinct_key_ids,
            "key_ids": report.key_ids,
        }

    @app.post("/test/faults")
    async def inject_fault(request: Request):
        if not cfg.enable_test_endpoints:
            return _error(403, "test endpoints disabled")
        doc = await _body(request)
        device_id = doc.get("device_id")
        mode = doc.get("mode")
        if not device_id or not mode:
            return _error(400, "device_id and mode required")
        try:
            rt.fabric.inject_fault(device_id, mode, doc.get("n"))
        except DeviceError as exc:
            return _error(404 if "unknown device" in str(exc) else 400, str(exc))
        return {"device_id": device_id, "mode": mode, "n": doc.get("n")}

    @app.get("/health")
    def health():
        return {"status": "up", "version": __version__,
                "simulated_time_s": rt.clock.now()}

    @app.exception_handler(TopologyError)
    @app.exception_handler(QsliceError)
    async def unhandled_domain_error(_request: Request, exc: Exception):
        log.exception("unhandled domain error")
        return _error(500, str(exc))

    return app


def serve(config_path: Optional[str] = None, host: str = "127.0.0.1",
          port: int = 8000) -> None:
    import uvicorn
    from .config import RuntimeConfig
    runtime = Runtime.from_config(RuntimeConfig.load(config_path))
    uvicorn.run(create_app(runtime), host=host, port=port, log_level="warning")
