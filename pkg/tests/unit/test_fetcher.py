"""Tests for downloading input tables."""

from pathlib import Path

import httpx
import pytest

from deployers.services.fetcher import TableFetcher, is_url, resolve_input


def flaky(failures: int, calls: list[str]):
    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(str(request.url))
        if len(calls) <= failures:
            return httpx.Response(503)
        return httpx.Response(200, content=b"P01_A01\n")

    return httpx.MockTransport(handler)


class TestTableFetcher:
    def test_retries_with_backoff(self):
        calls, sleeps = [], []
        with TableFetcher(transport=flaky(2, calls), sleep=sleeps.append) as fetcher:
            assert fetcher.fetch("https://example.org/icio.csv") == b"P01_A01\n"
        assert len(calls) == 3
        assert sleeps == [1, 2]

    def test_gives_up_after_the_last_attempt(self):
        calls, sleeps = [], []
        with TableFetcher(transport=flaky(5, calls), sleep=sleeps.append) as fetcher:
            with pytest.raises(OSError, match="Cannot fetch"):
                fetcher.fetch("https://example.org/icio.csv")
        assert len(calls) == 3
        assert sleeps == [1, 2]

    def test_sends_the_user_agent(self):
        seen = []

        def handler(request: httpx.Request) -> httpx.Response:
            seen.append(request.headers["User-Agent"])
            return httpx.Response(200, content=b"")

        with TableFetcher(transport=httpx.MockTransport(handler)) as fetcher:
            fetcher.fetch("https://example.org/a.sam")
        assert seen[0].startswith("Deployers/")

    def test_cache_is_reused(self, tmp_path):
        calls = []
        with TableFetcher(transport=flaky(0, calls), sleep=lambda s: None) as fetcher:
            first = fetcher.fetch_to_cache("https://example.org/data/icio.csv", tmp_path)
            second = fetcher.fetch_to_cache("https://example.org/data/icio.csv", tmp_path)
        assert first == second
        assert first.name.endswith("_icio.csv")
        assert first.read_bytes() == b"P01_A01\n"
        assert len(calls) == 1


def test_is_url():
    assert is_url("https://example.org/x.csv")
    assert not is_url("data/x.csv")
    assert not is_url("abfss://fs@acct.dfs.core.windows.net/x")


def test_local_inputs_pass_through(tmp_path):
    assert resolve_input("data/mcaesp08.sam", tmp_path) == Path("data/mcaesp08.sam")
