import shutil
import socket
from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
FIXTURE_IDS = ["p05", "p07", "p11", "p24", "p25"]

requires_cc = pytest.mark.skipif(shutil.which("gcc") is None, reason="needs a C compiler")


@pytest.fixture
def fixture_dir(tmp_path):
    """Copy a bundled fixture problem into a scratch directory."""

    def copy(pid):
        target = tmp_path / pid
        shutil.copytree(FIXTURES / pid, target)
        return target

    return copy


@pytest.fixture
def no_network(monkeypatch):
    """Fail loudly on any socket connection from this process."""

    def refuse(*args, **kwargs):
        raise AssertionError("network access attempted")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket.socket, "connect_ex", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)
    monkeypatch.setattr(socket, "getaddrinfo", refuse)
