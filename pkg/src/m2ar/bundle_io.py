"""Canonical JSON interchange for bundles, plus a directory-backed workspace.

Document layout::

    {"assets": {id: {"kind", "uri"}}, "format": "m2ar-bundle",
     "metamodel": name, "models": [...], "version": "1.0"}

Keys are sorted, arrays are ordered by id, floats use Python's shortest
round-trip repr, and the text ends with a single LF. Attribute values are
tagged ``{"kind": <value kind>, "value": <payload>}`` so a document can be
parsed without the metamodel at hand.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Union

from .errors import (
    BundleFormatError,
    DuplicateId,
    IoFailure,
    MalformedDocument,
    NameCollision,
    UnknownValueKind,
    UnsupportedVersion,
)
from .geometry import ChangeList, Pose
from .meta2 import (
    FORMAT_VERSION,
    AssetEntry,
    AssetKind,
    AssetRef,
    Bundle,
    ClassInstance,
    InstanceRef,
    Model,
    PortInstance,
    RefKind,
    RelationclassInstance,
    ValueKind,
)

FORMAT = "m2ar-bundle"
SUPPORTED_VERSIONS = (FORMAT_VERSION,)
BUNDLE_SUFFIX = ".m2ar.json"


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------


def _vec(v) -> list[float]:
    return [float(c) for c in v]


def encode_pose(pose: Pose) -> dict:
    return {"position": _vec(pose.position), "rotation": _vec(pose.rotation), "scale": _vec(pose.scale)}


def encode_ref(ref: InstanceRef) -> dict:
    out = {"kind": ref.kind.value, "model": ref.model_id}
    if ref.instance_id is not None:
        out["instance"] = ref.instance_id
    return out


def _encode_changes(cl: ChangeList) -> dict:
    out: dict[str, Any] = {}
    if cl.visible is not None:
        out["visible"] = cl.visible
    for name in ("position", "rotation", "scale"):
        value = getattr(cl, name)
        if value is not None:
            out[name] = _vec(value)
    return out


def encode_value(value) -> dict:
    if isinstance(value, bool):
        return {"kind": ValueKind.BOOLEAN.value, "value": value}
    if isinstance(value, (int, float)):
        return {"kind": ValueKind.NUMBER.value, "value": float(value)}
    if isinstance(value, str):
        return {"kind": ValueKind.TEXT.value, "value": value}
    if isinstance(value, tuple) and len(value) == 3:
        return {"kind": ValueKind.VECTOR3.value, "value": _vec(value)}
    if isinstance(value, tuple) and len(value) == 4:
        return {"kind": ValueKind.QUATERNION.value, "value": _vec(value)}
    if isinstance(value, AssetRef):
        return {"kind": ValueKind.ASSET_REF.value, "value": value.asset_id}
    if isinstance(value, InstanceRef):
        return {"kind": ValueKind.INSTANCE_REF.value, "value": encode_ref(value)}
    if isinstance(value, ChangeList):
        return {"kind": ValueKind.CHANGE_LIST.value, "value": _encode_changes(value)}
    raise TypeError(f"cannot encode attribute value {value!r}")


def _encode_attrs(attrs: Mapping) -> dict:
    return {name: encode_value(v) for name, v in attrs.items()}


def _encode_model(model: Model) -> dict:
    return {
        "id": model.id,
        "name": model.name,
        "scene_type": model.scene_type,
        "class_instances": [
            {
                "id": c.id,
                "type": c.metaclass,
                "name": c.display_name,
                "attributes": _encode_attrs(c.attributes),
                "placement": None if c.placement is None else encode_pose(c.placement),
            }
            for c in model.class_instances
        ],
        "relationclass_instances": [
            {
                "id": r.id,
                "type": r.relationclass,
                "from": r.from_instance,
                "to": r.to_instance,
                "attributes": _encode_attrs(r.attributes),
            }
            for r in model.relationclass_instances
        ],
        "port_instances": [
            {
                "id": p.id,
                "type": p.port,
                "owner": p.owner,
                "target": None if p.target is None else encode_ref(p.target),
            }
            for p in model.port_instances
        ],
    }


def bundle_to_json(bundle: Bundle) -> dict:
    return {
        "format": FORMAT,
        "version": bundle.format_version,
        "metamodel": bundle.metamodel_name,
        "assets": {k: {"kind": a.kind.value, "uri": a.uri} for k, a in bundle.assets.items()},
        "models": [_encode_model(m) for m in bundle.models],
    }


def canonical_dumps(obj: Any) -> str:
    """Sorted keys, 2-space indent, UTF-8 friendly, trailing LF."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def serialize_bundle(bundle: Bundle) -> bytes:
    return canonical_dumps(bundle_to_json(bundle)).encode("utf-8")


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------


def _reject_constant(name):
    raise MalformedDocument(f"non-finite number {name} is not allowed")


def _obj(value, where) -> dict:
    if not isinstance(value, dict):
        raise MalformedDocument(f"{where}: expected an object")
    return value


def _arr(value, where) -> list:
    if not isinstance(value, list):
        raise MalformedDocument(f"{where}: expected an array")
    return value


def _str(value, where) -> str:
    if not isinstance(value, str):
        raise MalformedDocument(f"{where}: expected a string")
    return value


def _num(value, where) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise MalformedDocument(f"{where}: expected a finite number")
    return float(value)


def _tuple(value, n, where) -> tuple:
    items = _arr(value, where)
    if len(items) != n:
        raise MalformedDocument(f"{where}: expected {n} numbers")
    return tuple(_num(c, where) for c in items)


def _field(obj: dict, key: str, where: str):
    if key not in obj:
        raise MalformedDocument(f"{where}: missing field {key!r}")
    return obj[key]


def decode_pose(value, where="pose") -> Pose:
    obj = _obj(value, where)
    try:
        return Pose(
            _tuple(_field(obj, "position", where), 3, where),
            _tuple(_field(obj, "rotation", where), 4, where),
            _tuple(_field(obj, "scale", where), 3, where),
        )
    except ValueError as exc:
        raise MalformedDocument(f"{where}: {exc}") from None


def decode_ref(value, where) -> InstanceRef:
    obj = _obj(value, where)
    kind = _str(_field(obj, "kind", where), where)
    if kind not in {k.value for k in RefKind}:
        raise MalformedDocument(f"{where}: unknown reference kind {kind!r}")
    model_id = _str(_field(obj, "model", where), where)
    if kind == RefKind.MODEL.value:
        if "instance" in obj:
            raise MalformedDocument(f"{where}: model references carry no instance")
        return InstanceRef(RefKind.MODEL, model_id)
    return InstanceRef(RefKind(kind), model_id, _str(_field(obj, "instance", where), where))


def _decode_changes(value, where) -> ChangeList:
    obj = _obj(value, where)
    unknown = set(obj) - {"visible", "position", "rotation", "scale"}
    if unknown:
        raise MalformedDocument(f"{where}: unknown change channels {sorted(unknown)}")
    visible = obj.get("visible")
    if visible is not None and not isinstance(visible, bool):
        raise MalformedDocument(f"{where}: visible must be a boolean")
    return ChangeList(
        visible=visible,
        position=None if obj.get("position") is None else _tuple(obj["position"], 3, where),
        rotation=None if obj.get("rotation") is None else _tuple(obj["rotation"], 4, where),
        scale=None if obj.get("scale") is None else _tuple(obj["scale"], 3, where),
    )


def decode_value(value, where):
    obj = _obj(value, where)
    kind = _str(_field(obj, "kind", where), where)
    payload = _field(obj, "value", where)
    if kind == ValueKind.TEXT.value:
        return _str(payload, where)
    if kind == ValueKind.NUMBER.value:
        return _num(payload, where)
    if kind == ValueKind.BOOLEAN.value:
        if not isinstance(payload, bool):
            raise MalformedDocument(f"{where}: expected a boolean")
        return payload
    if kind == ValueKind.VECTOR3.value:
        return _tuple(payload, 3, where)
    if kind == ValueKind.QUATERNION.value:
        return _tuple(payload, 4, where)
    if kind == ValueKind.ASSET_REF.value:
        return AssetRef(_str(payload, where))
    if kind == ValueKind.INSTANCE_REF.value:
        return decode_ref(payload, where)
    if kind == ValueKind.CHANGE_LIST.value:
        return _decode_changes(payload, where)
    raise UnknownValueKind(f"{where}: unknown value kind {kind!r}")


def _decode_attrs(value, where) -> dict:
    return {name: decode_value(v, f"{where}.{name}") for name, v in _obj(value, where).items()}


def _decode_model(raw, ids: set) -> Model:
    obj = _obj(raw, "model")
    mid = _str(_field(obj, "id", "model"), "model.id")
    where = f"model {mid!r}"

    def claim(inst_id):
        if inst_id in ids:
            raise DuplicateId(f"instance id {inst_id!r} appears more than once")
        ids.add(inst_id)
        return inst_id

    classes = []
    for c in _arr(_field(obj, "class_instances", where), where):
        c = _obj(c, where)
        cid = claim(_str(_field(c, "id", where), where))
        placement = c.get("placement")
        classes.append(ClassInstance(
            id=cid,
            metaclass=_str(_field(c, "type", where), where),
            display_name=_str(c.get("name", ""), where),
            attributes=_decode_attrs(c.get("attributes", {}), f"{where}/{cid}"),
            placement=None if placement is None else decode_pose(placement, f"{where}/{cid}.placement"),
        ))
    relations = []
    for r in _arr(_field(obj, "relationclass_instances", where), where):
        r = _obj(r, where)
        rid = claim(_str(_field(r, "id", where), where))
        relations.append(RelationclassInstance(
            id=rid,
            relationclass=_str(_field(r, "type", where), where),
            from_instance=_str(_field(r, "from", where), where),
            to_instance=_str(_field(r, "to", where), where),
            attributes=_decode_attrs(r.get("attributes", {}), f"{where}/{rid}"),
        ))
    ports = []
    for p in _arr(_field(obj, "port_instances", where), where):
        p = _obj(p, where)
        pid = claim(_str(_field(p, "id", where), where))
        target = p.get("target")
        ports.append(PortInstance(
            id=pid,
            port=_str(_field(p, "type", where), where),
            owner=_str(_field(p, "owner", where), where),
            target=None if target is None else decode_ref(target, f"{where}/{pid}.target"),
        ))
    return Model(
        id=mid,
        name=_str(obj.get("name", ""), where),
        scene_type=_str(_field(obj, "scene_type", where), where),
        class_instances=tuple(classes),
        relationclass_instances=tuple(relations),
        port_instances=tuple(ports),
    )


def bundle_from_json(doc) -> Bundle:
    doc = _obj(doc, "document")
    if doc.get("format") != FORMAT:
        raise MalformedDocument(f"format must be {FORMAT!r}")
    version = doc.get("version")
    if version not in SUPPORTED_VERSIONS:
        raise UnsupportedVersion(f"unsupported bundle version {version!r}")
    metamodel = _str(_field(doc, "metamodel", "document"), "metamodel")

    assets = {}
    for aid, entry in _obj(_field(doc, "assets", "document"), "assets").items():
        entry = _obj(entry, f"asset {aid!r}")
        kind = _str(_field(entry, "kind", "asset"), "asset.kind")
        if kind not in {k.value for k in AssetKind}:
            raise MalformedDocument(f"asset {aid!r}: unknown kind {kind!r}")
        assets[aid] = AssetEntry(AssetKind(kind), _str(_field(entry, "uri", "asset"), "asset.uri"))

    ids: set = set()
    models, model_ids = [], set()
    for raw in _arr(_field(doc, "models", "document"), "models"):
        model = _decode_model(raw, ids)
        if model.id in model_ids:
            raise DuplicateId(f"model id {model.id!r} appears more than once")
        model_ids.add(model.id)
        models.append(model)
    return Bundle(version, metamodel, tuple(models), assets)


def parse_bundle(document: Union[bytes, str]) -> Bundle:
    """Parse a bundle document. Only :class:`BundleFormatError` subclasses escape."""
    try:
        text = document.decode("utf-8") if isinstance(document, (bytes, bytearray)) else document
        raw = json.loads(text, parse_constant=_reject_constant)
        return bundle_from_json(raw)
    except BundleFormatError:
        raise
    except Exception as exc:  # arbitrary bytes must never crash the parser
        raise MalformedDocument(f"not a bundle document: {exc.__class__.__name__}: {exc}") from None


# ---------------------------------------------------------------------------
# workspace
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Workspace:
    """A directory of ``<name>.m2ar.json`` files plus an ``assets/`` folder.

    Single writer per directory; concurrent writers must coordinate
    externally.
    """

    root: Path

    @property
    def assets_dir(self) -> Path:
        return self.root / "assets"

    def path_for(self, name: str) -> Path:
        if not name or "/" in name or "\\" in name or name.startswith("."):
            raise IoFailure(f"invalid bundle name {name!r}", reason="invalid_name")
        return self.root / f"{name}{BUNDLE_SUFFIX}"

    def resolve_asset(self, uri: str) -> Union[Path, str]:
        """Absolute URIs pass through; anything else is relative to ``assets/``."""
        if "://" in uri or Path(uri).is_absolute():
            return uri
        return self.assets_dir / uri


def load_workspace(root: Union[str, Path]) -> Workspace:
    root = Path(root)
    if not root.is_dir():
        raise IoFailure(f"workspace root {str(root)!r} is not a directory", reason="not_found")
    return Workspace(root)


def save_bundle(ws: Workspace, bundle: Bundle, name: str, overwrite: bool = False) -> Path:
    path = ws.path_for(name)
    if path.exists() and not overwrite:
        raise NameCollision(f"bundle {name!r} already exists in {ws.root}")
    try:
        path.write_bytes(serialize_bundle(bundle))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def load_bundle(ws: Workspace, name: str) -> Bundle:
    path = ws.path_for(name)
    if not path.is_file():
        raise IoFailure(f"no bundle named {name!r} in {ws.root}", reason="not_found")
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return parse_bundle(data)


def list_bundles(ws: Workspace) -> list[str]:
    return sorted(p.name[: -len(BUNDLE_SUFFIX)] for p in ws.root.glob(f"*{BUNDLE_SUFFIX}") if p.is_file())


def read_bundle_file(path: Union[str, Path]) -> Bundle:
    """Load a bundle straight from a file path."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}", reason="not_found") from exc
    return parse_bundle(data)
