"""Headless kernel and execution engine for the AR workflow modeling language ARWFML."""

from .arwfml import arwfml_metamodel, validate
from .bundle_io import (
    Workspace,
    list_bundles,
    load_bundle,
    load_workspace,
    parse_bundle,
    save_bundle,
    serialize_bundle,
)
from .engine import Advance, Click, Detect, EngineState, Observe, Phase, fire_ready, inject, load, run, snapshot
from .geometry import ChangeList, Pose, compose
from .meta2 import (
    Bundle,
    ClassInstance,
    Diagnostic,
    InstanceRef,
    Metamodel,
    Model,
    PortInstance,
    RelationclassInstance,
    build_metamodel,
    conforms,
    resolve,
)
from .scene import SceneState, apply_statechange, world_pose

__version__ = "0.1.0"

__all__ = [
    "Advance",
    "apply_statechange",
    "arwfml_metamodel",
    "build_metamodel",
    "Bundle",
    "ChangeList",
    "ClassInstance",
    "Click",
    "compose",
    "conforms",
    "Detect",
    "Diagnostic",
    "EngineState",
    "fire_ready",
    "inject",
    "InstanceRef",
    "list_bundles",
    "load",
    "load_bundle",
    "load_workspace",
    "Metamodel",
    "Model",
    "Observe",
    "parse_bundle",
    "Phase",
    "PortInstance",
    "Pose",
    "RelationclassInstance",
    "resolve",
    "run",
    "save_bundle",
    "SceneState",
    "serialize_bundle",
    "snapshot",
    "validate",
    "Workspace",
    "world_pose",
]
