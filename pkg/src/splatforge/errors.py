"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for all splatforge errors."""


class BehindCameraError(EngineError):
    """Point has non-positive depth after the world-to-camera transform."""


class InvalidDepthError(EngineError):
    """A depth value that must be positive was zero or negative."""


class SizeMismatchError(EngineError):
    """Raster dimensions disagree with what an operation requires."""


class CodecError(EngineError):
    """A file could not be parsed. Carries the byte offset of the failure."""

    def __init__(self, message, offset=0):
        super().__init__(f"{message} (byte {offset})")
        self.offset = offset


class MemoryOrderError(EngineError):
    """Feature-memory insertion with a non-increasing step index."""


class IncompleteGuideError(EngineError):
    """Guide depth for candidate generation contains sentinel (unknown) pixels."""


class EmptyNeighborsError(EngineError):
    """Cost volume construction was asked to run with zero neighbor views."""


class IncompleteDepthError(EngineError):
    """Gaussian decoding requires a fully valid depth map."""


class PlySchemaError(EngineError):
    """A PLY file is missing a required vertex property."""


class SessionSchemaError(EngineError):
    """A persisted session directory is missing or has a corrupt component."""


class StageError(EngineError):
    """A pipeline step failed; names the stage that raised."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
