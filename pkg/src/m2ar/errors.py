"""Exception hierarchy shared by every layer of the toolkit."""

from __future__ import annotations


class M2arError(Exception):
    """Base class for all errors raised by m2ar."""


# -- metamodel construction -------------------------------------------------


class MetamodelError(M2arError):
    """A language definition is internally inconsistent."""


class DuplicateName(MetamodelError):
    pass


class UnresolvedEndpointType(MetamodelError):
    pass


class InvalidDefinition(MetamodelError):
    """A definition breaks a structural rule other than naming."""


# -- instance lookup --------------------------------------------------------


class DanglingReference(M2arError):
    def __init__(self, ref, message: str | None = None):
        self.ref = ref
        super().__init__(message or f"reference does not resolve: {ref}")


# -- interchange ------------------------------------------------------------


class BundleFormatError(M2arError):
    """Raised by the parser; the document is not an acceptable bundle."""


class MalformedDocument(BundleFormatError):
    pass


class UnsupportedVersion(BundleFormatError):
    pass


class UnknownValueKind(BundleFormatError):
    pass


class DuplicateId(BundleFormatError):
    pass


class IoFailure(M2arError):
    def __init__(self, message: str, reason: str = "io"):
        self.reason = reason
        super().__init__(message)


class NameCollision(M2arError):
    pass


# -- scene ------------------------------------------------------------------


class SceneError(M2arError):
    pass


class OriginUnknown(SceneError):
    pass


class AnchorNotDetected(SceneError):
    pass


class CycleDetected(SceneError):
    pass


class UnknownAugmentation(SceneError):
    pass


class UnknownTarget(SceneError):
    pass


# -- engine -----------------------------------------------------------------


class EngineError(M2arError):
    pass


class ValidationFailed(EngineError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        codes = sorted({d.code for d in self.diagnostics})
        super().__init__(f"bundle failed validation: {', '.join(codes)}")


class NoFlowScene(EngineError):
    pass


class AmbiguousFlowScene(EngineError):
    pass


class TimeRegression(EngineError):
    pass


class ScenarioError(M2arError):
    """A scenario document cannot be used."""
