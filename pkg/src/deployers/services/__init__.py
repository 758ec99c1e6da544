"""Service layer exports."""

from deployers.services.storage import ADLSStorageBackend, LocalStorageBackend, StorageBackend

__all__ = [
    "StorageBackend",
    "LocalStorageBackend",
    "ADLSStorageBackend",
]
