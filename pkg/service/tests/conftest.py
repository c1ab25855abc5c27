import pytest
from fastapi.testclient import TestClient

from nli_service.app import create_app
from nli_service.config import ServiceConfig
from stub_env import STUB_MODEL, wait_ready


@pytest.fixture
def config() -> ServiceConfig:
    return ServiceConfig(model=STUB_MODEL, max_batch=8)


@pytest.fixture
def client(config):
    with TestClient(create_app(config)) as c:
        wait_ready(c)
        yield c
