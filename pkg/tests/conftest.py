import os

import pytest


@pytest.fixture(scope="session", autouse=True)
def _isolated_cache(tmp_path_factory):
    os.environ["KRQ_CACHE_DIR"] = str(tmp_path_factory.mktemp("oracle_cache"))
    yield
