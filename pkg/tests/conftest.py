import pytest

from kbqa.fixtures import toy_store


@pytest.fixture(scope="session")
def toy():
    return toy_store()
