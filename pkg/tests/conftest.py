"""Shared fixtures: the bundled synthetic sample set, matching mock rules,
an offline client, and installed search fixtures."""

import pytest

from scopecoe import synthetic
from scopecoe.gateway import Client, MockBackend, ResponseCache


@pytest.fixture(scope="session")
def samples():
    return synthetic.build_samples(20)


@pytest.fixture(scope="session")
def rules(samples):
    return synthetic.rules_from_samples(samples)


@pytest.fixture()
def mock_client(rules):
    return Client(backend=MockBackend(rules))


@pytest.fixture()
def cached_client(rules, tmp_path):
    return Client(
        backend=MockBackend(rules), cache=ResponseCache(tmp_path / "cache")
    )


@pytest.fixture(scope="session")
def fixtures_dir(samples, tmp_path_factory):
    directory = tmp_path_factory.mktemp("search-fixtures")
    synthetic.install_search_fixtures(samples, directory)
    return directory


@pytest.fixture(scope="session")
def search_client(fixtures_dir):
    from scopecoe.noise import FixtureSearchClient

    return FixtureSearchClient(fixtures_dir)
