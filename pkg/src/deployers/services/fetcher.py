"""Download input tables (FIGARO releases, published SAMs) into a local cache."""

import hashlib
import logging
import time
from collections.abc import Callable
from pathlib import Path
from urllib.parse import urlparse

import httpx

from deployers import __version__

DEFAULT_USER_AGENT = f"Deployers/{__version__}"


def is_url(location: str) -> bool:
    return urlparse(location).scheme in ("http", "https")


class TableFetcher:
    """Fetches table files over HTTP with retries."""

    def __init__(
        self,
        user_agent: str = DEFAULT_USER_AGENT,
        timeout: int = 300,
        max_retries: int = 3,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
        logger: logging.Logger | None = None,
    ) -> None:
        """Initialize fetcher.

        Args:
            user_agent: User-Agent header for requests
            timeout: HTTP request timeout in seconds (tables are large)
            max_retries: Attempts per file
            transport: Custom httpx transport (tests)
            sleep: Backoff sleep function
            logger: Logger instance (optional)
        """
        self.max_retries = max_retries
        self.sleep = sleep
        self.logger = logger or logging.getLogger("deployers")
        self.client = httpx.Client(
            headers={"User-Agent": user_agent},
            timeout=httpx.Timeout(timeout),
            follow_redirects=True,
            transport=transport,
        )

    def __enter__(self) -> "TableFetcher":
        return self

    def __exit__(self, exc_type: type, exc_val: Exception, exc_tb: object) -> None:
        self.close()

    def close(self) -> None:
        self.client.close()

    def fetch(self, url: str) -> bytes:
        """Body of `url`, retrying with exponential backoff.

        Raises:
            OSError: If every attempt fails
        """
        last_error = ""
        for attempt in range(self.max_retries):
            try:
                response = self.client.get(url)
                response.raise_for_status()
                return response.content
            except httpx.HTTPError as e:
                last_error = str(e)
                self.logger.warning(f"Fetching {url} failed (attempt {attempt + 1}/{self.max_retries}): {e}")
                if attempt < self.max_retries - 1:
                    self.sleep(2**attempt)
        raise OSError(f"Cannot fetch {url}: {last_error}")

    def fetch_to_cache(self, url: str, cache_dir: str | Path) -> Path:
        """Download `url` once; later calls return the cached file."""
        cache = Path(cache_dir)
        name = Path(urlparse(url).path).name or "table"
        digest = hashlib.sha256(url.encode("utf-8")).hexdigest()[:12]
        target = cache / f"{digest}_{name}"
        if target.exists():
            self.logger.debug(f"Using cached {target}")
            return target
        content = self.fetch(url)
        cache.mkdir(parents=True, exist_ok=True)
        partial = target.with_suffix(target.suffix + ".part")
        partial.write_bytes(content)
        partial.replace(target)
        self.logger.info(f"Downloaded {url} ({len(content)} bytes) to {target}")
        return target


def resolve_input(location: str, cache_dir: str | Path, fetcher: TableFetcher | None = None) -> Path:
    """Local path of an input given as a path or an http(s) URL."""
    if not is_url(location):
        return Path(location)
    if fetcher is not None:
        return fetcher.fetch_to_cache(location, cache_dir)
    with TableFetcher() as owned:
        return owned.fetch_to_cache(location, cache_dir)
