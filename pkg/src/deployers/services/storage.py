"""Output folders for run artifacts: local directories or ADLS Gen2 paths."""

import os
import re
import tempfile
from abc import ABC, abstractmethod
from pathlib import Path

ABFSS_PATTERN = re.compile(r"^abfss://(?P<filesystem>[^@]+)@(?P<account>[^.]+)\.dfs\.core\.windows\.net/?(?P<path>.*)$")


class StorageBackend(ABC):
    """Where snapshots, CSV series and journals are written."""

    @abstractmethod
    def write_file(self, content: bytes, destination_path: str) -> None:
        """Store bytes under a path relative to the output folder.

        Raises:
            OSError: If the write fails
        """

    @abstractmethod
    def read_file(self, file_path: str) -> bytes:
        """Bytes of a stored artifact.

        Raises:
            FileNotFoundError: If the artifact does not exist
        """

    @abstractmethod
    def exists(self, file_path: str) -> bool: ...

    @abstractmethod
    def get_full_path(self, relative_path: str) -> str:
        """Location of an artifact as shown to the user."""

    def write_text(self, text: str, destination_path: str) -> None:
        self.write_file(text.encode("utf-8"), destination_path)


class LocalStorageBackend(StorageBackend):
    """Directory on the local filesystem; every write replaces the target atomically."""

    def __init__(self, base_path: str | Path) -> None:
        self.base_path = Path(base_path).resolve()
        self.base_path.mkdir(parents=True, exist_ok=True)

    def write_file(self, content: bytes, destination_path: str) -> None:
        target = self.base_path / destination_path
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, temp_path = tempfile.mkstemp(dir=target.parent, prefix=".tmp_")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(content)
            os.replace(temp_path, target)
        except Exception:
            Path(temp_path).unlink(missing_ok=True)
            raise

    def read_file(self, file_path: str) -> bytes:
        return (self.base_path / file_path).read_bytes()

    def exists(self, file_path: str) -> bool:
        return (self.base_path / file_path).exists()

    def get_full_path(self, relative_path: str) -> str:
        return str(self.base_path / relative_path)


class ADLSStorageBackend(StorageBackend):
    """Azure Data Lake Storage Gen2 folder.

    Args:
        account_name: Storage account
        account_key: Account key
        filesystem_name: Filesystem (container)
        base_path: Folder inside the filesystem

    Raises:
        ImportError: If azure-storage-file-datalake is not installed
    """

    def __init__(self, account_name: str, account_key: str, filesystem_name: str, base_path: str = "") -> None:
        try:
            from azure.storage.filedatalake import DataLakeServiceClient
        except ImportError as e:
            raise ImportError(
                "azure-storage-file-datalake is required for abfss:// outputs. "
                "Install with: pip install azure-storage-file-datalake"
            ) from e

        self.account_name = account_name
        self.filesystem_name = filesystem_name
        self.base_path = base_path.strip("/")
        service = DataLakeServiceClient(
            account_url=f"https://{account_name}.dfs.core.windows.net", credential=account_key
        )
        self.filesystem_client = service.get_file_system_client(filesystem_name)

    def _path(self, relative_path: str) -> str:
        return f"{self.base_path}/{relative_path}".strip("/")

    def write_file(self, content: bytes, destination_path: str) -> None:
        client = self.filesystem_client.get_file_client(self._path(destination_path))
        try:
            client.upload_data(content, overwrite=True)
        except Exception as e:
            raise OSError(f"Failed to write {destination_path} to ADLS Gen2: {e}") from e

    def read_file(self, file_path: str) -> bytes:
        client = self.filesystem_client.get_file_client(self._path(file_path))
        try:
            return client.download_file().readall()  # type: ignore[no-any-return]
        except Exception as e:
            if "PathNotFound" in str(e):
                raise FileNotFoundError(f"File not found: {file_path}") from e
            raise OSError(f"Failed to read {file_path} from ADLS Gen2: {e}") from e

    def exists(self, file_path: str) -> bool:
        client = self.filesystem_client.get_file_client(self._path(file_path))
        try:
            client.get_file_properties()
            return True
        except Exception:
            return False

    def get_full_path(self, relative_path: str) -> str:
        return f"abfss://{self.filesystem_name}@{self.account_name}.dfs.core.windows.net/{self._path(relative_path)}"


def open_storage(location: str, account_key: str | None = None) -> StorageBackend:
    """Backend for a local directory or an ``abfss://`` URI.

    Args:
        location: Output folder
        account_key: ADLS key; defaults to the AZURE_STORAGE_ACCOUNT_KEY variable

    Raises:
        ValueError: Malformed abfss URI or missing account key
    """
    if not location.startswith("abfss://"):
        return LocalStorageBackend(location)
    match = ABFSS_PATTERN.match(location)
    if match is None:
        raise ValueError(f"Invalid abfss URI: {location}")
    key = account_key or os.environ.get("AZURE_STORAGE_ACCOUNT_KEY")
    if not key:
        raise ValueError("AZURE_STORAGE_ACCOUNT_KEY must be set for abfss:// outputs")
    return ADLSStorageBackend(match["account"], key, match["filesystem"], match["path"])
