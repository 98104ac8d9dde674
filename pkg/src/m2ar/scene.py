"""Runtime scene state of one ObjectSpace: visibility, local poses, detections.

World poses are expressed in the session frame in which detections are
reported. An augmentation without an anchored ancestor hangs off the origin
frame. Otherwise it hangs off the detected pose of the nearest anchored
ancestor's Detectable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping, Optional

from .arwfml import attr
from .errors import AnchorNotDetected, CycleDetected, OriginUnknown, UnknownAugmentation, UnknownTarget
from .geometry import IDENTITY, ChangeList, Pose, compose_chain
from .meta2 import Model


@dataclass(frozen=True)
class AugmentationState:
    visible: bool
    local_pose: Pose


@dataclass(frozen=True)
class DetectableState:
    detected: bool = False
    world_pose: Optional[Pose] = None


@dataclass(frozen=True)
class SceneState:
    augmentations: Mapping[str, AugmentationState] = field(default_factory=dict)
    detectables: Mapping[str, DetectableState] = field(default_factory=dict)
    origin_frame: Optional[Pose] = None

    def __post_init__(self):
        object.__setattr__(self, "augmentations", MappingProxyType(dict(self.augmentations)))
        object.__setattr__(self, "detectables", MappingProxyType(dict(self.detectables)))

    def __eq__(self, other):
        if not isinstance(other, SceneState):
            return NotImplemented
        return (
            dict(self.augmentations) == dict(other.augmentations)
            and dict(self.detectables) == dict(other.detectables)
            and self.origin_frame == other.origin_frame
        )

    def detect(self, detectable_id: str, pose: Pose) -> "SceneState":
        dets = dict(self.detectables)
        dets[detectable_id] = DetectableState(True, pose)
        return replace(self, detectables=dets)

    def with_origin(self, pose: Pose) -> "SceneState":
        return replace(self, origin_frame=pose)


def initial_scene(objectspace: Model) -> SceneState:
    """Augmentations at their placement, visible only if ``initially_visible``."""
    augs = {
        a.id: AugmentationState(bool(attr(objectspace, a, "initially_visible")), a.placement or IDENTITY)
        for a in objectspace.instances_of("Augmentation")
    }
    dets = {d.id: DetectableState() for d in objectspace.instances_of("Detectable")}
    return SceneState(augs, dets, None)


def _parent_links(objectspace: Model) -> tuple[dict[str, str], dict[str, str]]:
    parent = {r.to_instance: r.from_instance for r in objectspace.relations_of("child")}
    anchor = {r.from_instance: r.to_instance for r in objectspace.relations_of("anchored")}
    return parent, anchor


def world_pose(state: SceneState, objectspace: Model, augmentation_id: str) -> Pose:
    if augmentation_id not in state.augmentations:
        raise UnknownAugmentation(augmentation_id)
    parent, anchor = _parent_links(objectspace)

    chain = []
    node: Optional[str] = augmentation_id
    seen = set()
    base: Optional[Pose] = None
    while node is not None:
        if node in seen:
            raise CycleDetected(f"child relations loop through {node!r}")
        seen.add(node)
        if node not in state.augmentations:
            raise UnknownAugmentation(node)
        chain.append(state.augmentations[node].local_pose)
        if node in anchor:
            det = state.detectables.get(anchor[node], DetectableState())
            if not det.detected or det.world_pose is None:
                raise AnchorNotDetected(f"{node!r} is anchored to undetected {anchor[node]!r}")
            base = det.world_pose
            break
        node = parent.get(node)
    if base is None:
        if state.origin_frame is None:
            raise OriginUnknown("origin has not been detected")
        base = state.origin_frame
    return compose_chain(base, *reversed(chain))


def apply_changes(aug: AugmentationState, changes: ChangeList) -> AugmentationState:
    visible = aug.visible if changes.visible is None else changes.visible
    pose = aug.local_pose.with_changes(changes.position, changes.rotation, changes.scale)
    return AugmentationState(visible, pose)


def apply_statechange(state: SceneState, statechange_model: Model) -> SceneState:
    """Apply every Reference of a Statechange model, in instance-id order.

    Present channels overwrite, absent ones are left untouched, so for two
    References on the same augmentation the later id wins channel by channel.
    """
    augs = dict(state.augmentations)
    for reference in statechange_model.instances_of("Reference"):
        target = attr(statechange_model, reference, "target")
        changes = attr(statechange_model, reference, "changes")
        if target is None or target.instance_id not in augs:
            raise UnknownTarget(f"{reference.id!r} targets unknown augmentation {target}")
        if changes is not None:
            augs[target.instance_id] = apply_changes(augs[target.instance_id], changes)
    return replace(state, augmentations=augs)


def snapshot(state: SceneState, objectspace: Model) -> dict[str, dict]:
    """Per augmentation: visibility and world pose (``None`` while it cannot be placed)."""
    out = {}
    for aug_id in sorted(state.augmentations):
        try:
            pose: Optional[Pose] = world_pose(state, objectspace, aug_id)
        except (OriginUnknown, AnchorNotDetected):
            pose = None
        out[aug_id] = {"visible": state.augmentations[aug_id].visible, "world_pose": pose}
    return out

