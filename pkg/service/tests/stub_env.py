"""Shared bits for service tests (unique module name: the repo root runs
this suite alongside another tests/ tree, so plain `conftest` imports
would be ambiguous)."""

import time

from fastapi.testclient import TestClient

STUB_MODEL = "stub:nli-deberta-v3-base"


def wait_ready(client: TestClient, timeout: float = 5.0) -> None:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if client.get("/healthz").status_code == 200:
            return
        time.sleep(0.01)
    raise TimeoutError("service did not become ready")
