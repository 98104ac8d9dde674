"""Generic metamodeling kernel.

A :class:`Metamodel` is a set of scene types; each scene type declares
metaclasses (with attributes and ports) and relationclasses whose endpoints
attach through a from-role and a to-role. A :class:`Bundle` holds models,
each an instance graph of one scene type, plus an asset registry.

All types are frozen. Instance collections are kept sorted by id so two
structurally equal bundles compare equal regardless of construction order.
"""

from __future__ import annotations

import math
import uuid
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Iterable, Mapping, Optional, Union

from .errors import DanglingReference, DuplicateName, InvalidDefinition, UnresolvedEndpointType
from .geometry import ChangeList, Pose, is_quat, is_unit, is_vec3


def new_id() -> str:
    return str(uuid.uuid4())


class ValueKind(str, Enum):
    TEXT = "text"
    NUMBER = "number"
    BOOLEAN = "boolean"
    VECTOR3 = "vector3"
    QUATERNION = "quaternion"
    ASSET_REF = "asset_ref"
    INSTANCE_REF = "instance_ref"
    CHANGE_LIST = "change_list"


class RefTargetKind(str, Enum):
    METACLASS_INSTANCE = "metaclass_instance"
    PORT_INSTANCE = "port_instance"
    SCENE_TYPE_INSTANCE = "scene_type_instance"


class RefKind(str, Enum):
    CLASS_INSTANCE = "class_instance"
    PORT_INSTANCE = "port_instance"
    MODEL = "model"


_REF_KIND_FOR_TARGET = {
    RefTargetKind.METACLASS_INSTANCE: RefKind.CLASS_INSTANCE,
    RefTargetKind.PORT_INSTANCE: RefKind.PORT_INSTANCE,
    RefTargetKind.SCENE_TYPE_INSTANCE: RefKind.MODEL,
}

UNBOUNDED = None


# ---------------------------------------------------------------------------
# attribute payloads
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssetRef:
    asset_id: str


@dataclass(frozen=True)
class InstanceRef:
    """Typed pointer at a class instance, a port instance, or a whole model."""

    kind: RefKind
    model_id: str
    instance_id: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", RefKind(self.kind))
        if (self.kind is RefKind.MODEL) != (self.instance_id is None):
            raise ValueError("model refs carry no instance id; instance refs require one")

    @classmethod
    def to_class(cls, model_id: str, instance_id: str) -> "InstanceRef":
        return cls(RefKind.CLASS_INSTANCE, model_id, instance_id)

    @classmethod
    def to_port(cls, model_id: str, instance_id: str) -> "InstanceRef":
        return cls(RefKind.PORT_INSTANCE, model_id, instance_id)

    @classmethod
    def to_model(cls, model_id: str) -> "InstanceRef":
        return cls(RefKind.MODEL, model_id)

    def __str__(self):
        if self.kind is RefKind.MODEL:
            return f"model:{self.model_id}"
        return f"{self.kind.value}:{self.model_id}/{self.instance_id}"


AttributeValue = Union[str, float, bool, tuple, AssetRef, InstanceRef, ChangeList]


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def value_matches_kind(kind: ValueKind, value: Any) -> bool:
    """Shape check only; quaternion norm and ref resolution are checked elsewhere."""
    if kind is ValueKind.TEXT:
        return isinstance(value, str)
    if kind is ValueKind.NUMBER:
        return _is_number(value)
    if kind is ValueKind.BOOLEAN:
        return isinstance(value, bool)
    if kind is ValueKind.VECTOR3:
        return is_vec3(value)
    if kind is ValueKind.QUATERNION:
        return is_quat(value)
    if kind is ValueKind.ASSET_REF:
        return isinstance(value, AssetRef)
    if kind is ValueKind.INSTANCE_REF:
        return isinstance(value, InstanceRef)
    if kind is ValueKind.CHANGE_LIST:
        return isinstance(value, ChangeList)
    return False


# ---------------------------------------------------------------------------
# language definitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RefTarget:
    kind: RefTargetKind
    allowed_types: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", RefTargetKind(self.kind))
        object.__setattr__(self, "allowed_types", tuple(self.allowed_types))

    @property
    def ref_kind(self) -> RefKind:
        return _REF_KIND_FOR_TARGET[self.kind]


@dataclass(frozen=True)
class AttributeDefinition:
    name: str
    value_kind: ValueKind
    required: bool = False
    default: Optional[AttributeValue] = None
    ref_target: Optional[RefTarget] = None

    def __post_init__(self):
        object.__setattr__(self, "value_kind", ValueKind(self.value_kind))
        if (self.ref_target is not None) != (self.value_kind is ValueKind.INSTANCE_REF):
            raise InvalidDefinition(f"attribute {self.name!r}: ref_target is required exactly for instance_ref")
        if self.default is not None and not value_matches_kind(self.value_kind, self.default):
            raise InvalidDefinition(f"attribute {self.name!r}: default does not match {self.value_kind.value}")


@dataclass(frozen=True)
class PortDefinition:
    name: str
    ref_target: RefTarget


@dataclass(frozen=True)
class RoleDefinition:
    name: str
    allowed_endpoint_types: frozenset[str]
    min: int = 0
    max: Optional[int] = UNBOUNDED

    def __post_init__(self):
        object.__setattr__(self, "allowed_endpoint_types", frozenset(self.allowed_endpoint_types))
        if not self.allowed_endpoint_types:
            raise InvalidDefinition(f"role {self.name!r} allows no endpoint types")
        if self.min < 0 or (self.max is not None and self.max < self.min):
            raise InvalidDefinition(f"role {self.name!r}: bad cardinality ({self.min}, {self.max})")


@dataclass(frozen=True)
class MetaClass:
    name: str
    attributes: tuple[AttributeDefinition, ...] = ()
    ports: tuple[PortDefinition, ...] = ()

    def attribute(self, name: str) -> Optional[AttributeDefinition]:
        return next((a for a in self.attributes if a.name == name), None)

    def port(self, name: str) -> Optional[PortDefinition]:
        return next((p for p in self.ports if p.name == name), None)


@dataclass(frozen=True)
class RelationclassDefinition:
    name: str
    from_role: RoleDefinition
    to_role: RoleDefinition
    attributes: tuple[AttributeDefinition, ...] = ()

    def attribute(self, name: str) -> Optional[AttributeDefinition]:
        return next((a for a in self.attributes if a.name == name), None)


@dataclass(frozen=True)
class SceneTypeDefinition:
    name: str
    metaclasses: tuple[MetaClass, ...] = ()
    relationclasses: tuple[RelationclassDefinition, ...] = ()

    def metaclass(self, name: str) -> Optional[MetaClass]:
        return next((m for m in self.metaclasses if m.name == name), None)

    def relationclass(self, name: str) -> Optional[RelationclassDefinition]:
        return next((r for r in self.relationclasses if r.name == name), None)

    def port_names(self) -> set[str]:
        return {p.name for m in self.metaclasses for p in m.ports}


@dataclass(frozen=True)
class Metamodel:
    name: str = ""
    version: str = ""
    scene_types: tuple[SceneTypeDefinition, ...] = ()

    def scene_type(self, name: str) -> Optional[SceneTypeDefinition]:
        return next((s for s in self.scene_types if s.name == name), None)


def _check_unique(names: Iterable[str], where: str) -> None:
    seen = set()
    for n in names:
        if n in seen:
            raise DuplicateName(f"duplicate name {n!r} in {where}")
        seen.add(n)


def _ref_target(spec: Optional[Mapping]) -> Optional[RefTarget]:
    if spec is None:
        return None
    return RefTarget(spec["kind"], tuple(spec.get("types", ())))


def _attribute(spec: Mapping) -> AttributeDefinition:
    return AttributeDefinition(
        name=spec["name"],
        value_kind=ValueKind(spec["value_kind"]),
        required=bool(spec.get("required", False)),
        default=spec.get("default"),
        ref_target=_ref_target(spec.get("ref_target")),
    )


def _role(spec: Mapping) -> RoleDefinition:
    return RoleDefinition(
        name=spec["name"],
        allowed_endpoint_types=frozenset(spec["types"]),
        min=spec.get("min", 0),
        max=spec.get("max", UNBOUNDED),
    )


def build_metamodel(spec: Mapping) -> Metamodel:
    """Build and check a :class:`Metamodel` from a plain declarative mapping.

    Expected shape::

        {"name": ..., "version": ...,
         "scene_types": [{"name": ...,
                          "metaclasses": [{"name": ..., "attributes": [...], "ports": [...]}],
                          "relationclasses": [{"name": ..., "from_role": {...}, "to_role": {...}}]}]}

    Attributes are ``{"name", "value_kind", "required"?, "default"?, "ref_target"?}``
    with ``ref_target = {"kind", "types"?}``; roles are ``{"name", "types", "min"?, "max"?}``.

    Raises :class:`DuplicateName` or :class:`UnresolvedEndpointType`.
    """
    scene_types = []
    _check_unique((s["name"] for s in spec.get("scene_types", ())), "metamodel")
    for st in spec.get("scene_types", ()):
        metaclasses = []
        for mc in st.get("metaclasses", ()):
            attrs = tuple(_attribute(a) for a in mc.get("attributes", ()))
            ports = tuple(PortDefinition(p["name"], _ref_target(p["ref_target"])) for p in mc.get("ports", ()))
            _check_unique([a.name for a in attrs] + [p.name for p in ports], f"metaclass {mc['name']!r}")
            metaclasses.append(MetaClass(mc["name"], attrs, ports))
        relationclasses = []
        for rc in st.get("relationclasses", ()):
            attrs = tuple(_attribute(a) for a in rc.get("attributes", ()))
            _check_unique([a.name for a in attrs], f"relationclass {rc['name']!r}")
            from_role, to_role = _role(rc["from_role"]), _role(rc["to_role"])
            if from_role.name == to_role.name:
                raise InvalidDefinition(f"relationclass {rc['name']!r}: role names must differ")
            relationclasses.append(RelationclassDefinition(rc["name"], from_role, to_role, attrs))

        scene = SceneTypeDefinition(st["name"], tuple(metaclasses), tuple(relationclasses))
        _check_unique(
            [m.name for m in scene.metaclasses] + [r.name for r in scene.relationclasses],
            f"scene type {scene.name!r}",
        )
        endpoint_names = {m.name for m in scene.metaclasses} | scene.port_names()
        for rc in scene.relationclasses:
            for role in (rc.from_role, rc.to_role):
                unknown = sorted(role.allowed_endpoint_types - endpoint_names)
                if unknown:
                    raise UnresolvedEndpointType(
                        f"{scene.name}.{rc.name}.{role.name} names unknown endpoint types {unknown}"
                    )
        scene_types.append(scene)
    return Metamodel(spec.get("name", ""), spec.get("version", ""), tuple(scene_types))


# ---------------------------------------------------------------------------
# instances
# ---------------------------------------------------------------------------


def _by_id(items) -> tuple:
    return tuple(sorted(items, key=lambda i: i.id))


@dataclass(frozen=True)
class ClassInstance:
    id: str
    metaclass: str
    display_name: str = ""
    attributes: Mapping[str, AttributeValue] = field(default_factory=dict)
    placement: Optional[Pose] = None


@dataclass(frozen=True)
class RelationclassInstance:
    id: str
    relationclass: str
    from_instance: str
    to_instance: str
    attributes: Mapping[str, AttributeValue] = field(default_factory=dict)


@dataclass(frozen=True)
class PortInstance:
    id: str
    port: str
    owner: str
    target: Optional[InstanceRef] = None


@dataclass(frozen=True)
class Model:
    id: str
    name: str
    scene_type: str
    class_instances: tuple[ClassInstance, ...] = ()
    relationclass_instances: tuple[RelationclassInstance, ...] = ()
    port_instances: tuple[PortInstance, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "class_instances", _by_id(self.class_instances))
        object.__setattr__(self, "relationclass_instances", _by_id(self.relationclass_instances))
        object.__setattr__(self, "port_instances", _by_id(self.port_instances))

    @cached_property
    def _index(self) -> dict[str, Any]:
        index: dict[str, Any] = {}
        for inst in (*self.class_instances, *self.relationclass_instances, *self.port_instances):
            index.setdefault(inst.id, inst)
        return index

    def get(self, instance_id: str):
        return self._index.get(instance_id)

    def instances_of(self, metaclass: str) -> list[ClassInstance]:
        return [c for c in self.class_instances if c.metaclass == metaclass]

    def relations_of(self, relationclass: str) -> list[RelationclassInstance]:
        return [r for r in self.relationclass_instances if r.relationclass == relationclass]

    def ports_of(self, owner_id: str) -> list[PortInstance]:
        return [p for p in self.port_instances if p.owner == owner_id]


class AssetKind(str, Enum):
    GLTF = "gltf"
    IMAGE = "image"


@dataclass(frozen=True)
class AssetEntry:
    kind: AssetKind
    uri: str

    def __post_init__(self):
        object.__setattr__(self, "kind", AssetKind(self.kind))


FORMAT_VERSION = "1.0"


@dataclass(frozen=True)
class Bundle:
    format_version: str = FORMAT_VERSION
    metamodel_name: str = ""
    models: tuple[Model, ...] = ()
    assets: Mapping[str, AssetEntry] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "models", _by_id(self.models))

    @cached_property
    def _models(self) -> dict[str, Model]:
        out: dict[str, Model] = {}
        for m in self.models:
            out.setdefault(m.id, m)
        return out

    def model(self, model_id: str) -> Optional[Model]:
        return self._models.get(model_id)

    def models_of(self, scene_type: str) -> list[Model]:
        return [m for m in self.models if m.scene_type == scene_type]

    def replace_model(self, model: Model) -> "Bundle":
        others = [m for m in self.models if m.id != model.id]
        return Bundle(self.format_version, self.metamodel_name, (*others, model), dict(self.assets))


def resolve(bundle: Bundle, ref: InstanceRef):
    """Return the Model, ClassInstance or PortInstance that ``ref`` points at."""
    model = bundle.model(ref.model_id)
    if model is None:
        raise DanglingReference(ref)
    if ref.kind is RefKind.MODEL:
        return model
    inst = model.get(ref.instance_id)
    wanted = ClassInstance if ref.kind is RefKind.CLASS_INSTANCE else PortInstance
    if not isinstance(inst, wanted):
        raise DanglingReference(ref)
    return inst


# ---------------------------------------------------------------------------
# conformance
# ---------------------------------------------------------------------------


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    model_id: str
    instance_id: str
    message: str

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def sort_key(self):
        return (self.model_id, self.instance_id, self.code, self.message)

    def format(self) -> str:
        where = f"{self.model_id or '-'}/{self.instance_id or '-'}"
        return f"{self.severity.value}\t{self.code}\t{where}\t{self.message}"


def sort_diagnostics(diags: Iterable[Diagnostic]) -> list[Diagnostic]:
    return sorted(diags, key=Diagnostic.sort_key)


def has_errors(diags: Iterable[Diagnostic]) -> bool:
    return any(d.is_error for d in diags)


class _Collector:
    def __init__(self):
        self.items: list[Diagnostic] = []

    def error(self, code, model_id, instance_id, message):
        self.items.append(Diagnostic(Severity.ERROR, code, model_id, instance_id, message))


def _check_ref(out, bundle, model_id, inst_id, label, ref, target: RefTarget):
    if ref.kind is not target.ref_kind:
        out.error("RefTargetMismatch", model_id, inst_id,
                  f"{label}: expected a {target.ref_kind.value} reference, got {ref.kind.value}")
        return
    try:
        resolve(bundle, ref)
    except DanglingReference:
        out.error("DanglingReference", model_id, inst_id, f"{label}: {ref} does not resolve")


def _check_value(out, bundle, model_id, inst_id, adef: AttributeDefinition, value):
    label = f"attribute {adef.name!r}"
    if not value_matches_kind(adef.value_kind, value):
        out.error("AttributeKindMismatch", model_id, inst_id,
                  f"{label}: expected {adef.value_kind.value}, got {type(value).__name__}")
        return
    kind = adef.value_kind
    if kind is ValueKind.QUATERNION and not is_unit(value):
        out.error("InvalidValue", model_id, inst_id, f"{label}: quaternion is not unit length")
    elif kind is ValueKind.ASSET_REF and value.asset_id not in bundle.assets:
        out.error("UnknownAsset", model_id, inst_id, f"{label}: asset {value.asset_id!r} not registered")
    elif kind is ValueKind.INSTANCE_REF:
        _check_ref(out, bundle, model_id, inst_id, label, value, adef.ref_target)
    elif kind is ValueKind.CHANGE_LIST:
        for problem in value.problems():
            out.error("InvalidValue", model_id, inst_id, f"{label}: {problem}")


def _check_attributes(out, bundle, model_id, inst_id, defs, values: Mapping):
    by_name = {d.name: d for d in defs}
    for name in sorted(values):
        adef = by_name.get(name)
        if adef is None:
            out.error("UnknownAttribute", model_id, inst_id, f"attribute {name!r} is not declared")
        else:
            _check_value(out, bundle, model_id, inst_id, adef, values[name])
    for adef in defs:
        if adef.required and adef.name not in values:
            out.error("MissingAttribute", model_id, inst_id, f"required attribute {adef.name!r} is missing")


def _endpoint_type(model: Model, inst_id: str) -> Optional[str]:
    inst = model.get(inst_id)
    if isinstance(inst, ClassInstance):
        return inst.metaclass
    if isinstance(inst, PortInstance):
        return inst.port
    return None


def _check_cardinality(out, model: Model, rc: RelationclassDefinition):
    relations = model.relations_of(rc.name)
    for role, attr in ((rc.from_role, "from_instance"), (rc.to_role, "to_instance")):
        if role.min == 0 and role.max is None:
            continue
        candidates = [c.id for c in model.class_instances if c.metaclass in role.allowed_endpoint_types]
        candidates += [p.id for p in model.port_instances if p.port in role.allowed_endpoint_types]
        for cand in sorted(candidates):
            n = sum(1 for r in relations if getattr(r, attr) == cand)
            if n < role.min or (role.max is not None and n > role.max):
                bound = "unbounded" if role.max is None else role.max
                out.error("CardinalityViolation", model.id, cand,
                          f"{rc.name}.{role.name}: {n} relations, allowed [{role.min}, {bound}]")


def conforms(bundle: Bundle, mm: Metamodel) -> list[Diagnostic]:
    """Check ``bundle`` against ``mm``; an empty list means full conformance.

    Reference attributes and ports are checked for resolution and reference
    kind only. Which metaclass or scene type a reference may name is a
    language-level rule.
    """
    out = _Collector()
    if bundle.metamodel_name != mm.name:
        out.error("MetamodelMismatch", "", "",
                  f"bundle targets {bundle.metamodel_name!r}, checked against {mm.name!r}")

    seen_models: set[str] = set()
    seen_instances: dict[str, str] = {}
    for model in bundle.models:
        if model.id in seen_models:
            out.error("DuplicateId", model.id, "", f"model id {model.id!r} is used twice")
        seen_models.add(model.id)
        for inst in (*model.class_instances, *model.relationclass_instances, *model.port_instances):
            if inst.id in seen_instances:
                out.error("DuplicateId", model.id, inst.id,
                          f"instance id also used in model {seen_instances[inst.id]!r}")
            else:
                seen_instances[inst.id] = model.id

    for model in bundle.models:
        st = mm.scene_type(model.scene_type)
        if st is None:
            out.error("UnknownSceneType", model.id, "", f"scene type {model.scene_type!r} is not defined")
            continue

        for ci in model.class_instances:
            mc = st.metaclass(ci.metaclass)
            if mc is None:
                out.error("UnknownMetaclass", model.id, ci.id,
                          f"metaclass {ci.metaclass!r} is not defined in {st.name}")
                continue
            _check_attributes(out, bundle, model.id, ci.id, mc.attributes, ci.attributes)

        for pi in model.port_instances:
            owner = model.get(pi.owner)
            if not isinstance(owner, ClassInstance):
                out.error("DanglingOwner", model.id, pi.id, f"port owner {pi.owner!r} is not a class instance")
                continue
            mc = st.metaclass(owner.metaclass)
            pdef = mc.port(pi.port) if mc is not None else None
            if pdef is None:
                out.error("UnknownPort", model.id, pi.id, f"{owner.metaclass} declares no port {pi.port!r}")
                continue
            if pi.target is not None:
                _check_ref(out, bundle, model.id, pi.id, f"port {pi.port!r}", pi.target, pdef.ref_target)

        for ri in model.relationclass_instances:
            rc = st.relationclass(ri.relationclass)
            if rc is None:
                out.error("UnknownRelationclass", model.id, ri.id,
                          f"relationclass {ri.relationclass!r} is not defined in {st.name}")
                continue
            for role, end in ((rc.from_role, ri.from_instance), (rc.to_role, ri.to_instance)):
                etype = _endpoint_type(model, end)
                if etype is None:
                    out.error("DanglingEndpoint", model.id, ri.id, f"{role.name} endpoint {end!r} not in model")
                elif etype not in role.allowed_endpoint_types:
                    out.error("RoleViolation", model.id, ri.id,
                              f"{rc.name}.{role.name} does not accept {etype} ({end})")
            _check_attributes(out, bundle, model.id, ri.id, rc.attributes, ri.attributes)

        for rc in st.relationclasses:
            _check_cardinality(out, model, rc)

    return sort_diagnostics(out.items)


def attribute_value(instance, definition: Optional[AttributeDefinition]):
    """Stored value of an attribute, falling back to the declared default."""
    if definition is None:
        return None
    if definition.name in instance.attributes:
        return instance.attributes[definition.name]
    return definition.default
