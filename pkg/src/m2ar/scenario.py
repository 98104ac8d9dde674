"""Scenario documents: a timed list of simulated AR events.

::

    {"stop_t": 10.0,
     "events": [{"kind": "detect", "t": 1.0, "detectable": "det-origin", "pose": {...}},
                {"kind": "click", "t": 2.0, "augmentation": "aug-a"},
                {"kind": "observer", "t": 2.5, "key": "door", "value": "open"},
                {"kind": "advance", "t": 3.0}]}

``pose`` is optional on detect events and defaults to identity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .bundle_io import canonical_dumps, decode_pose, encode_pose
from .engine import Advance, Click, Detect, Observe, SimEvent
from .errors import MalformedDocument, ScenarioError


@dataclass(frozen=True)
class Scenario:
    stop_t: float
    events: tuple[SimEvent, ...] = ()

    def truncated(self, stop_t: float) -> "Scenario":
        """Same scenario cut off at ``stop_t``; later events are dropped."""
        return Scenario(stop_t, tuple(e for e in self.events if e.t <= stop_t))


def _time(value, where) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
        raise ScenarioError(f"{where}: t must be a finite number >= 0")
    return float(value)


def _text(obj, key, where) -> str:
    value = obj.get(key)
    if not isinstance(value, str):
        raise ScenarioError(f"{where}: {key!r} must be a string")
    return value


def _event(raw, seq: int) -> SimEvent:
    where = f"event #{seq}"
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where}: expected an object")
    t = _time(raw.get("t"), where)
    kind = raw.get("kind")
    if kind == "detect":
        pose = None
        if raw.get("pose") is not None:
            try:
                pose = decode_pose(raw["pose"], f"{where}.pose")
            except MalformedDocument as exc:
                raise ScenarioError(str(exc)) from None
        return Detect(t, _text(raw, "detectable", where), pose, seq)
    if kind == "click":
        return Click(t, _text(raw, "augmentation", where), seq)
    if kind == "observer":
        return Observe(t, _text(raw, "key", where), _text(raw, "value", where), seq)
    if kind == "advance":
        return Advance(t, seq)
    raise ScenarioError(f"{where}: unknown event kind {kind!r}")


def parse_scenario(document: Union[bytes, str]) -> Scenario:
    try:
        text = document.decode("utf-8") if isinstance(document, bytes) else document
        raw = json.loads(text)
    except (UnicodeDecodeError, ValueError) as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from None
    if not isinstance(raw, dict) or not isinstance(raw.get("events", []), list):
        raise ScenarioError("scenario must be an object with an 'events' array")
    stop_t = _time(raw.get("stop_t"), "stop_t")
    events = tuple(_event(e, i) for i, e in enumerate(raw.get("events", [])))
    for prev, nxt in zip(events, events[1:]):
        if nxt.t < prev.t:
            raise ScenarioError(f"events out of order: t={nxt.t} after t={prev.t}")
    if events and events[-1].t > stop_t:
        raise ScenarioError(f"event at t={events[-1].t} is after stop_t={stop_t}")
    return Scenario(stop_t, events)


def read_scenario_file(path: Union[str, Path]) -> Scenario:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
    return parse_scenario(data)


def _event_json(event: SimEvent) -> dict:
    out = {"kind": event.kind, "t": float(event.t)}
    if isinstance(event, Detect):
        out["detectable"] = event.detectable_id
        if event.pose is not None:
            out["pose"] = encode_pose(event.pose)
    elif isinstance(event, Click):
        out["augmentation"] = event.augmentation_id
    elif isinstance(event, Observe):
        out.update(key=event.key, value=event.value)
    return out


def scenario_to_json(scenario: Scenario) -> str:
    return canonical_dumps({"stop_t": float(scenario.stop_t), "events": [_event_json(e) for e in scenario.events]})
