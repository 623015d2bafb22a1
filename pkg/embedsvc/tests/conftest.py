import time

import pytest
from fastapi.testclient import TestClient

from embedsvc.app import create_app
from embedsvc.config import ServiceConfig

_SMALL = ServiceConfig(dim=64, max_batch=8, max_chars=120, max_tokens=6)


def _wait_ready(client: TestClient, deadline: float = 10.0) -> None:
    start = time.monotonic()
    while time.monotonic() - start < deadline:
        if client.get("/info").status_code == 200:
            return
        time.sleep(0.01)
    raise AssertionError("service did not become ready in time")


@pytest.fixture
def small_config():
    return _SMALL


@pytest.fixture
def wait_ready():
    return _wait_ready


@pytest.fixture
def client():
    with TestClient(create_app(_SMALL)) as c:
        _wait_ready(c)
        yield c
