import pytest

from sparselearn import ingest_dense
from sparselearn.instrumentation import reset

from helpers import TOY_TABLE


@pytest.fixture(autouse=True)
def _fresh_counters():
    reset()
    yield


@pytest.fixture
def toy():
    return ingest_dense(TOY_TABLE, names=["A", "B", "C"])
