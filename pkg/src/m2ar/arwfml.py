"""The ARWFML language: its metamodel and well-formedness rules.

Three scene types make up the language. An ObjectSpace holds Augmentations
and Detectables. A Statechange holds References, each listing the changes
applied to one Augmentation. A FlowScene holds the workflow graph.

:func:`validate` runs generic conformance first and then the ARWFML rule
catalog. Codes ``V001`` to ``V012`` are stable identifiers.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterable, Optional

from .meta2 import (
    Bundle,
    ClassInstance,
    Diagnostic,
    InstanceRef,
    Metamodel,
    Model,
    RefKind,
    Severity,
    attribute_value,
    build_metamodel,
    conforms,
    has_errors,
    resolve,
    sort_diagnostics,
)
from .errors import DanglingReference

NAME = "ARWFML"
VERSION = "1.0"

OBJECT_SPACE = "ObjectSpace"
STATECHANGE = "Statechange"
FLOW_SCENE = "FlowScene"

CONDITION_KINDS = ("timer", "click", "detection", "observer")
FLOW_SOURCES = ("Start", "Condition", "StatechangeRef", "Resolve")
FLOW_TARGETS = ("Condition", "StatechangeRef", "Resolve", "End")
FLOW_NODES = ("Start", "Condition", "StatechangeRef", "Resolve", "End")


def _ref(kind, *types):
    return {"kind": kind, "types": list(types)}


_SPEC = {
    "name": NAME,
    "version": VERSION,
    "scene_types": [
        {
            "name": OBJECT_SPACE,
            "metaclasses": [
                {"name": "Augmentation", "attributes": [
                    {"name": "object3d", "value_kind": "asset_ref", "required": True},
                    {"name": "initially_visible", "value_kind": "boolean", "default": False},
                ]},
                {"name": "Detectable", "attributes": [
                    {"name": "image", "value_kind": "asset_ref"},
                    {"name": "is_origin", "value_kind": "boolean", "default": False},
                ]},
            ],
            "relationclasses": [
                # from = parent, to = child; a child has at most one parent
                {"name": "child",
                 "from_role": {"name": "fr", "types": ["Augmentation"]},
                 "to_role": {"name": "tr", "types": ["Augmentation"], "max": 1}},
                {"name": "anchored",
                 "from_role": {"name": "fr", "types": ["Augmentation"], "max": 1},
                 "to_role": {"name": "tr", "types": ["Detectable"]}},
            ],
        },
        {
            "name": STATECHANGE,
            "metaclasses": [
                {"name": "Reference", "attributes": [
                    {"name": "target", "value_kind": "instance_ref", "required": True,
                     "ref_target": _ref("metaclass_instance", "Augmentation")},
                    {"name": "changes", "value_kind": "change_list", "required": True},
                ]},
            ],
        },
        {
            "name": FLOW_SCENE,
            "metaclasses": [
                {"name": "Start"},
                {"name": "End"},
                {"name": "ObjectSpaceRef",
                 "attributes": [
                     {"name": "objectspace", "value_kind": "instance_ref", "required": True,
                      "ref_target": _ref("scene_type_instance", OBJECT_SPACE)},
                 ],
                 "ports": [
                     {"name": "Origin", "ref_target": _ref("metaclass_instance", "Detectable")},
                 ]},
                {"name": "Condition", "attributes": [
                    {"name": "kind", "value_kind": "text", "required": True},
                    {"name": "duration_s", "value_kind": "number"},
                    {"name": "observes", "value_kind": "instance_ref",
                     "ref_target": _ref("metaclass_instance", "Augmentation", "Detectable")},
                    {"name": "observer_key", "value_kind": "text"},
                    {"name": "observer_value", "value_kind": "text"},
                ]},
                {"name": "StatechangeRef", "attributes": [
                    {"name": "statechange_model", "value_kind": "instance_ref", "required": True,
                     "ref_target": _ref("scene_type_instance", STATECHANGE)},
                ]},
                {"name": "Resolve", "attributes": [
                    {"name": "resolves", "value_kind": "instance_ref",
                     "ref_target": _ref("metaclass_instance", "Condition")},
                ]},
                {"name": "Observer", "attributes": [
                    {"name": "key", "value_kind": "text", "required": True},
                ]},
            ],
            "relationclasses": [
                {"name": "flow",
                 "from_role": {"name": "fr", "types": list(FLOW_SOURCES)},
                 "to_role": {"name": "tr", "types": list(FLOW_TARGETS)}},
                {"name": "observes_link",
                 "from_role": {"name": "fr", "types": ["Observer"]},
                 "to_role": {"name": "tr", "types": ["Condition"]}},
            ],
        },
    ],
}


@lru_cache(maxsize=None)
def arwfml_metamodel() -> Metamodel:
    return build_metamodel(_SPEC)


def attr(model: Model, instance: ClassInstance, name: str):
    """Attribute of an ARWFML class instance with metamodel defaults applied."""
    mc = arwfml_metamodel().scene_type(model.scene_type).metaclass(instance.metaclass)
    return attribute_value(instance, mc.attribute(name))


def _try_resolve(bundle: Bundle, ref) -> Optional[object]:
    if not isinstance(ref, InstanceRef):
        return None
    try:
        return resolve(bundle, ref)
    except DanglingReference:
        return None


def _resolves_to_model(bundle, ref, scene_type) -> Optional[Model]:
    target = _try_resolve(bundle, ref)
    if isinstance(target, Model) and target.scene_type == scene_type:
        return target
    return None


def _resolves_to_class(bundle, ref, metaclasses: Iterable[str]) -> Optional[ClassInstance]:
    target = _try_resolve(bundle, ref)
    if isinstance(target, ClassInstance) and target.metaclass in tuple(metaclasses):
        return target
    return None


class _Rules:
    def __init__(self, bundle: Bundle):
        self.bundle = bundle
        self.items: list[Diagnostic] = []
        # FlowScene id -> ObjectSpace model it works against (only if V002 holds)
        self.objectspace_of: dict[str, Model] = {}

    def emit(self, code, model_id, instance_id, message, severity=Severity.ERROR):
        self.items.append(Diagnostic(severity, code, model_id, instance_id, message))

    def run(self) -> list[Diagnostic]:
        flowscenes = self.bundle.models_of(FLOW_SCENE)
        if not flowscenes:
            self.emit("V011", "", "", "bundle has no FlowScene; nothing can be executed", Severity.WARNING)
        for fs in flowscenes:
            self.flowscene_nodes(fs)
            self.objectspace_refs(fs)
            self.statechange_refs(fs)
            self.conditions(fs)
            self.flow_graph(fs)
            self.resolves(fs)
        for os_model in self.bundle.models_of(OBJECT_SPACE):
            self.objectspace(os_model)
        for sc in self.bundle.models_of(STATECHANGE):
            self.statechange(sc)
        return self.items

    # V001
    def flowscene_nodes(self, fs: Model):
        starts, ends = len(fs.instances_of("Start")), len(fs.instances_of("End"))
        if starts != 1:
            self.emit("V001", fs.id, "", f"FlowScene needs exactly one Start, found {starts}")
        if ends < 1:
            self.emit("V001", fs.id, "", "FlowScene needs at least one End")

    # V002, V003, V012
    def objectspace_refs(self, fs: Model):
        refs = fs.instances_of("ObjectSpaceRef")
        if len(refs) != 1:
            self.emit("V012", fs.id, "", f"FlowScene needs exactly one ObjectSpaceRef, found {len(refs)}")
        origin_targets: dict[InstanceRef, str] = {}
        for osr in refs:
            os_model = _resolves_to_model(self.bundle, attr(fs, osr, "objectspace"), OBJECT_SPACE)
            if os_model is None:
                self.emit("V002", fs.id, osr.id, "objectspace does not reference an ObjectSpace model")
                continue
            self.objectspace_of.setdefault(fs.id, os_model)
            origin_ports = [p for p in fs.ports_of(osr.id) if p.port == "Origin"]
            if len(origin_ports) != 1 or origin_ports[0].target is None:
                self.emit("V003", fs.id, osr.id, "ObjectSpaceRef needs one Origin port with a target")
                continue
            port = origin_ports[0]
            det = _resolves_to_class(self.bundle, port.target, ["Detectable"])
            if det is None or port.target.model_id != os_model.id:
                self.emit("V003", fs.id, port.id, f"Origin must reference a Detectable in {os_model.id!r}")
                continue
            if not attr(os_model, det, "is_origin"):
                self.emit("V003", fs.id, port.id, f"Origin target {det.id!r} is not marked is_origin")
            if port.target in origin_targets:
                self.emit("V012", fs.id, osr.id,
                          f"Origin target {det.id!r} already used by {origin_targets[port.target]!r}")
            else:
                origin_targets[port.target] = osr.id

    # V004
    def statechange_refs(self, fs: Model):
        for scr in fs.instances_of("StatechangeRef"):
            if _resolves_to_model(self.bundle, attr(fs, scr, "statechange_model"), STATECHANGE) is None:
                self.emit("V004", fs.id, scr.id, "statechange_model does not reference a Statechange model")

    # V006
    def conditions(self, fs: Model):
        observed = {r.to_instance for r in fs.relations_of("observes_link")}
        for cond in fs.instances_of("Condition"):
            kind = attr(fs, cond, "kind")
            if kind not in CONDITION_KINDS:
                self.emit("V006", fs.id, cond.id, f"unknown condition kind {kind!r}")
            elif kind == "timer":
                duration = attr(fs, cond, "duration_s")
                if duration is None or not duration > 0:
                    self.emit("V006", fs.id, cond.id, "timer condition needs duration_s > 0")
            elif kind in ("click", "detection"):
                wanted = "Augmentation" if kind == "click" else "Detectable"
                if _resolves_to_class(self.bundle, attr(fs, cond, "observes"), [wanted]) is None:
                    self.emit("V006", fs.id, cond.id, f"{kind} condition must observe a {wanted}")
            elif kind == "observer":
                if cond.id not in observed and attr(fs, cond, "observer_key") is None:
                    self.emit("V006", fs.id, cond.id, "observer condition needs an Observer link or observer_key")

    # V007
    def flow_graph(self, fs: Model):
        succ: dict[str, list[str]] = {}
        for rel in fs.relations_of("flow"):
            succ.setdefault(rel.from_instance, []).append(rel.to_instance)
        nodes = [c for c in fs.class_instances if c.metaclass in FLOW_NODES]
        ids = {c.id for c in nodes}
        for rel in fs.relations_of("flow"):
            if rel.from_instance not in ids or rel.to_instance not in ids:
                self.emit("V007", fs.id, rel.id, "flow edge does not connect two flow nodes")
        reached = set()
        stack = [s.id for s in fs.instances_of("Start")]
        while stack:
            node = stack.pop()
            if node in reached:
                continue
            reached.add(node)
            stack.extend(succ.get(node, ()))
        for node in nodes:
            if node.metaclass != "Start" and node.id not in reached:
                self.emit("V007", fs.id, node.id, f"{node.metaclass} is not reachable from Start")
            if node.metaclass == "End" and succ.get(node.id):
                self.emit("V007", fs.id, node.id, "End has outgoing flow")
            if node.metaclass in ("Condition", "StatechangeRef", "Resolve") and not succ.get(node.id):
                self.emit("V007", fs.id, node.id, f"{node.metaclass} has no outgoing flow")

    # V010
    def resolves(self, fs: Model):
        for res in fs.instances_of("Resolve"):
            ref = attr(fs, res, "resolves")
            if ref is None:
                continue
            target = _resolves_to_class(self.bundle, ref, ["Condition"])
            if target is None or ref.model_id != fs.id:
                self.emit("V010", fs.id, res.id, "resolves must target a Condition in the same FlowScene")

    # V003 (warning), V008, V009
    def objectspace(self, os_model: Model):
        origins = [d for d in os_model.instances_of("Detectable") if attr(os_model, d, "is_origin")]
        if len(origins) > 1:
            self.emit("V003", os_model.id, "",
                      f"{len(origins)} Detectables are marked is_origin", Severity.WARNING)

        parent_of = {r.to_instance: r.from_instance for r in os_model.relations_of("child")}
        cyclic = set()
        for start in sorted(parent_of):
            seen, node = [], start
            while node in parent_of and node not in seen:
                seen.append(node)
                node = parent_of[node]
            if node in seen:
                cyclic.update(seen[seen.index(node):])
        for aug_id in sorted(cyclic):
            self.emit("V008", os_model.id, aug_id, "child relations form a cycle")
        for rel in os_model.relations_of("anchored"):
            target = os_model.get(rel.to_instance)
            if not (isinstance(target, ClassInstance) and target.metaclass == "Detectable"):
                self.emit("V008", os_model.id, rel.id, "anchored target is not a Detectable in this ObjectSpace")

        for aug in os_model.instances_of("Augmentation"):
            asset = self._asset(attr(os_model, aug, "object3d"))
            if asset is None or not asset.uri.strip() or asset.kind.value != "gltf":
                self.emit("V009", os_model.id, aug.id, "Augmentation needs a non-empty gltf object3d asset")
        for det in os_model.instances_of("Detectable"):
            asset = self._asset(attr(os_model, det, "image"))
            if asset is None or not asset.uri.strip():
                self.emit("V009", os_model.id, det.id, "Detectable has no image representation",
                          Severity.WARNING)

    def _asset(self, ref):
        if ref is None:
            return None
        return self.bundle.assets.get(ref.asset_id)

    # V005
    def statechange(self, sc: Model):
        users = []
        for fs in self.bundle.models_of(FLOW_SCENE):
            for scr in fs.instances_of("StatechangeRef"):
                ref = attr(fs, scr, "statechange_model")
                if isinstance(ref, InstanceRef) and ref.kind is RefKind.MODEL and ref.model_id == sc.id:
                    users.append(fs)
                    break
        for reference in sc.instances_of("Reference"):
            target_ref = attr(sc, reference, "target")
            aug = _resolves_to_class(self.bundle, target_ref, ["Augmentation"])
            if aug is None:
                self.emit("V005", sc.id, reference.id, "target is not an Augmentation")
                continue
            target_model = self.bundle.model(target_ref.model_id)
            if target_model.scene_type != OBJECT_SPACE:
                self.emit("V005", sc.id, reference.id, "target is not inside an ObjectSpace")
                continue
            for fs in users:
                os_model = self.objectspace_of.get(fs.id)
                if os_model is not None and os_model.id != target_model.id:
                    self.emit("V005", sc.id, reference.id,
                              f"target lies outside ObjectSpace {os_model.id!r} used by FlowScene {fs.id!r}")
                    break
            changes = attr(sc, reference, "changes")
            if changes is not None and changes.is_empty():
                self.emit("V005", sc.id, reference.id, "change list is empty", Severity.WARNING)


def validate(bundle: Bundle) -> list[Diagnostic]:
    """Generic conformance followed by the ARWFML rule catalog.

    When conformance reports errors the language rules are skipped, since
    they assume well-typed attributes; only the conformance findings and the
    bundle-level V011 check are returned.
    """
    generic = conforms(bundle, arwfml_metamodel())
    if has_errors(generic):
        extra = []
        if not bundle.models_of(FLOW_SCENE):
            extra.append(Diagnostic(Severity.WARNING, "V011", "", "",
                                    "bundle has no FlowScene; nothing can be executed"))
        return sort_diagnostics(generic + extra)
    return sort_diagnostics(generic + _Rules(bundle).run())
