"""Ready-made bundles: the color-brick assembly use case and a small builder.

The color-brick bundle has one image-marker Detectable used as origin and
three brick Augmentations anchored to it. It has three Statechange models,
each revealing one brick. Its FlowScene is the linear workflow
``Start -> C1 -> SC1 -> C2 -> SC2 -> C3 -> SC3 -> C4 -> End``, where every
Condition is a 2 s timer.

Ids are fixed readable tokens and nothing depends on the clock or a random
source, so the emitted files are byte-stable.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .engine import Advance, Detect
from .geometry import ChangeList, Pose
from .meta2 import (
    AssetEntry,
    AssetKind,
    AssetRef,
    Bundle,
    ClassInstance,
    InstanceRef,
    Model,
    PortInstance,
    RelationclassInstance,
)
from .scenario import Scenario

BRICK_HEIGHT = 0.05
TIMER_DURATION_S = 2.0
ORIGIN_DETECT_T = 1.0
STOP_T = 10.0


class BundleBuilder:
    """Assemble a single-FlowScene ARWFML bundle with as little ceremony as possible.

    >>> b = BundleBuilder(augmentations=["aug-a"])
    >>> b.condition("c1", "click", observes="aug-a")
    >>> b.statechange("s1", reveal="aug-a")
    >>> b.flow("start", "c1", "s1", "end")
    >>> bundle = b.build()
    """

    def __init__(
        self,
        augmentations: Iterable[str] = (),
        detectables: Iterable[str] = (),
        objectspace_id: str = "os-main",
        flowscene_id: str = "fs-main",
        origin_id: str = "det-origin",
    ):
        self.objectspace_id = objectspace_id
        self.flowscene_id = flowscene_id
        self.origin_id = origin_id
        self.assets: dict[str, AssetEntry] = {
            f"asset-{origin_id}": AssetEntry(AssetKind.IMAGE, f"markers/{origin_id}.png"),
        }
        self.os_classes: list[ClassInstance] = [
            ClassInstance(origin_id, "Detectable", origin_id,
                          {"is_origin": True, "image": AssetRef(f"asset-{origin_id}")}),
        ]
        self.os_relations: list[RelationclassInstance] = []
        self.fs_classes: list[ClassInstance] = [
            ClassInstance("start", "Start", "Start"),
            ClassInstance("end", "End", "End"),
            ClassInstance("osr", "ObjectSpaceRef", "ObjectSpace",
                          {"objectspace": InstanceRef.to_model(objectspace_id)}),
        ]
        self.fs_relations: list[RelationclassInstance] = []
        self.fs_ports = [PortInstance("osr-origin", "Origin", "osr", InstanceRef.to_class(objectspace_id, origin_id))]
        self.statechange_models: list[Model] = []
        for aug in augmentations:
            self.augmentation(aug)
        for det in detectables:
            self.detectable(det)

    def augmentation(self, aug_id: str, placement: Optional[Pose] = None, visible: bool = False) -> None:
        asset = f"asset-{aug_id}"
        self.assets[asset] = AssetEntry(AssetKind.GLTF, f"models/{aug_id}.gltf")
        attrs = {"object3d": AssetRef(asset)}
        if visible:
            attrs["initially_visible"] = True
        self.os_classes.append(ClassInstance(aug_id, "Augmentation", aug_id, attrs, placement))

    def detectable(self, det_id: str) -> None:
        asset = f"asset-{det_id}"
        self.assets[asset] = AssetEntry(AssetKind.IMAGE, f"markers/{det_id}.png")
        self.os_classes.append(ClassInstance(det_id, "Detectable", det_id, {"image": AssetRef(asset)}))

    def anchor(self, aug_id: str, det_id: str) -> None:
        self.os_relations.append(RelationclassInstance(f"anchor-{aug_id}", "anchored", aug_id, det_id))

    def child(self, parent_id: str, child_id: str) -> None:
        self.os_relations.append(RelationclassInstance(f"child-{child_id}", "child", parent_id, child_id))

    def condition(self, cond_id: str, kind: str, duration_s: Optional[float] = None,
                  observes: Optional[str] = None, key: Optional[str] = None,
                  value: Optional[str] = None) -> None:
        attrs: dict = {"kind": kind}
        if duration_s is not None:
            attrs["duration_s"] = float(duration_s)
        if observes is not None:
            attrs["observes"] = InstanceRef.to_class(self.objectspace_id, observes)
        if key is not None:
            attrs["observer_key"] = key
        if value is not None:
            attrs["observer_value"] = value
        self.fs_classes.append(ClassInstance(cond_id, "Condition", cond_id, attrs))

    def statechange(self, ref_id: str, reveal: str, position=None, model_id: Optional[str] = None) -> None:
        """A StatechangeRef whose Statechange model makes ``reveal`` visible."""
        model_id = model_id or f"sc-{ref_id}"
        changes = ChangeList(visible=True, position=position)
        reference = ClassInstance(
            f"{model_id}-ref", "Reference", f"show {reveal}",
            {"target": InstanceRef.to_class(self.objectspace_id, reveal), "changes": changes},
        )
        self.statechange_models.append(Model(model_id, model_id, "Statechange", (reference,)))
        self.fs_classes.append(ClassInstance(ref_id, "StatechangeRef", ref_id,
                                             {"statechange_model": InstanceRef.to_model(model_id)}))

    def resolve(self, res_id: str, target: Optional[str]) -> None:
        attrs = {} if target is None else {"resolves": InstanceRef.to_class(self.flowscene_id, target)}
        self.fs_classes.append(ClassInstance(res_id, "Resolve", res_id, attrs))

    def observer(self, obs_id: str, key: str, conditions: Iterable[str]) -> None:
        self.fs_classes.append(ClassInstance(obs_id, "Observer", obs_id, {"key": key}))
        for cond in conditions:
            self.fs_relations.append(RelationclassInstance(f"link-{obs_id}-{cond}", "observes_link", obs_id, cond))

    def flow(self, *chain: str) -> None:
        for src, dst in zip(chain, chain[1:]):
            n = len([r for r in self.fs_relations if r.relationclass == "flow"]) + 1
            self.fs_relations.append(RelationclassInstance(f"flow-{n:02d}", "flow", src, dst))

    def build(self) -> Bundle:
        objectspace = Model(self.objectspace_id, "ObjectSpace", "ObjectSpace",
                            tuple(self.os_classes), tuple(self.os_relations))
        flowscene = Model(self.flowscene_id, "FlowScene", "FlowScene",
                          tuple(self.fs_classes), tuple(self.fs_relations), tuple(self.fs_ports))
        return Bundle("1.0", "ARWFML", (objectspace, flowscene, *self.statechange_models), dict(self.assets))


# ---------------------------------------------------------------------------
# color brick
# ---------------------------------------------------------------------------

BRICKS = ("green", "blue", "red")
OBJECTSPACE_ID = "os-color-brick"
FLOWSCENE_ID = "fs-color-brick"
ORIGIN_ID = "det-origin-marker"


def brick_id(color: str) -> str:
    return f"aug-{color}-brick"


def color_brick_bundle() -> Bundle:
    assets = {"asset-origin-marker": AssetEntry(AssetKind.IMAGE, "markers/origin_marker.png")}
    os_classes = [
        ClassInstance(ORIGIN_ID, "Detectable", "Origin marker",
                      {"image": AssetRef("asset-origin-marker"), "is_origin": True}),
    ]
    os_relations = []
    statechanges = []
    for i, color in enumerate(BRICKS):
        aug = brick_id(color)
        assets[f"asset-{color}-brick"] = AssetEntry(AssetKind.GLTF, f"bricks/{color}_brick.gltf")
        os_classes.append(ClassInstance(aug, "Augmentation", f"{color.capitalize()} brick",
                                        {"object3d": AssetRef(f"asset-{color}-brick")}))
        os_relations.append(RelationclassInstance(f"rel-anchor-{color}", "anchored", aug, ORIGIN_ID))
        changes = ChangeList(visible=True, position=(0.0, BRICK_HEIGHT * i, 0.0), rotation=(0.0, 0.0, 0.0, 1.0))
        reference = ClassInstance(f"ref-{color}-brick", "Reference", f"Place {color} brick",
                                  {"target": InstanceRef.to_class(OBJECTSPACE_ID, aug), "changes": changes})
        statechanges.append(Model(f"sc-{i + 1}-{color}", f"Place {color} brick", "Statechange", (reference,)))
    objectspace = Model(OBJECTSPACE_ID, "Color bricks", "ObjectSpace", tuple(os_classes), tuple(os_relations))

    fs_classes = [
        ClassInstance("node-start", "Start", "Start"),
        ClassInstance("node-end", "End", "End"),
        ClassInstance("osr-color-brick", "ObjectSpaceRef", "Color bricks",
                      {"objectspace": InstanceRef.to_model(OBJECTSPACE_ID)}),
    ]
    chain = ["node-start"]
    for i in range(1, 5):
        fs_classes.append(ClassInstance(f"cond-{i}", "Condition", f"Wait {i}",
                                        {"kind": "timer", "duration_s": TIMER_DURATION_S}))
        chain.append(f"cond-{i}")
        if i <= len(statechanges):
            sc = statechanges[i - 1]
            fs_classes.append(ClassInstance(f"scref-{i}", "StatechangeRef", sc.name,
                                            {"statechange_model": InstanceRef.to_model(sc.id)}))
            chain.append(f"scref-{i}")
    chain.append("node-end")
    flows = [RelationclassInstance(f"flow-{n:02d}", "flow", a, b)
             for n, (a, b) in enumerate(zip(chain, chain[1:]), start=1)]
    ports = [PortInstance("port-origin", "Origin", "osr-color-brick", InstanceRef.to_class(OBJECTSPACE_ID, ORIGIN_ID))]
    flowscene = Model(FLOWSCENE_ID, "Color brick assembly", "FlowScene", tuple(fs_classes), tuple(flows), tuple(ports))

    return Bundle("1.0", "ARWFML", (objectspace, flowscene, *statechanges), assets)


def color_brick_scenario() -> Scenario:
    """Origin seen at t=1, then clock ticks at every timer expiry up to t=10."""
    ticks = [ORIGIN_DETECT_T + TIMER_DURATION_S * k for k in range(1, 5)]
    events = [Detect(ORIGIN_DETECT_T, ORIGIN_ID, Pose(), 0)]
    events += [Advance(t, seq) for seq, t in enumerate(ticks, start=1)]
    return Scenario(STOP_T, tuple(events))


FIXTURES = {"color-brick": (color_brick_bundle, color_brick_scenario)}
