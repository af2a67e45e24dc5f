from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
LISTINGS = FIXTURES / "listings"
PROGRAMS = FIXTURES / "programs"
TRACES = FIXTURES / "traces"
GOLDEN = FIXTURES / "golden"
E2E = FIXTURES / "e2e"


def read(path: Path) -> str:
    return path.read_bytes().decode("utf-8")


@pytest.fixture
def no_api_key(monkeypatch):
    monkeypatch.delenv("SPECFORGE_API_KEY", raising=False)
    monkeypatch.delenv("SPECFORGE_CACHE_DIR", raising=False)
