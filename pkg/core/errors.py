"""Structured error hierarchy shared by every engine component."""

from __future__ import annotations

from typing import Any, Dict, Optional


class DGDNError(Exception):
    """Base error carrying a machine-readable ``details`` payload."""

    kind = "dgdn_error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "message": self.message, "details": self.details}


class ShapeError(DGDNError):
    kind = "shape_error"


class TapeError(DGDNError):
    kind = "tape_error"


class ConfigurationError(DGDNError):
    kind = "configuration_error"


class DataFormatError(DGDNError):
    kind = "data_format_error"


class CheckpointIntegrityError(DGDNError):
    kind = "checkpoint_integrity_error"


class CheckpointVersionError(DGDNError):
    kind = "checkpoint_version_error"


class MissingCheckpointError(DGDNError):
    kind = "missing_checkpoint"


class EmptyDatasetError(DGDNError):
    kind = "empty_dataset"
