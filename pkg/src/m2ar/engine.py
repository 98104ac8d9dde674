"""Deterministic token interpreter for FlowScene workflows.

The engine is a pure state machine: :func:`load` builds an
:class:`EngineState`, :func:`inject` feeds one simulated AR event, and
:func:`fire_ready` moves tokens until nothing else can happen at the
current clock. Nothing is scheduled internally. A timer fires at the first
processed time point at or after its expiry, so scenarios decide the
granularity.

Interpretation choices the language leaves open:

* Start and every other node fan out to all successors (AND-split).
* A Resolve disables its referenced Condition for the rest of the run,
  drops tokens waiting there, then forwards its own token.
* Detection is level-triggered: once seen, a Detectable stays detected.
  Clicks are edge-triggered and consumed by the one condition they satisfy,
  lowest condition id first.
* An observer condition without ``observer_value`` is satisfied by any
  value stored under its key.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple, Optional, Union

from . import arwfml
from .arwfml import FLOW_SCENE, attr
from .bundle_io import canonical_dumps, encode_pose
from .errors import AmbiguousFlowScene, NoFlowScene, SceneError, TimeRegression, ValidationFailed
from .geometry import IDENTITY, Pose
from .meta2 import Bundle, Model, has_errors, resolve
from .scene import SceneState, apply_statechange, initial_scene
from .scene import snapshot as scene_snapshot

log = logging.getLogger(__name__)


class Phase(str, Enum):
    LOADED = "Loaded"
    AWAIT_ORIGIN = "AwaitOrigin"
    RUNNING = "Running"
    COMPLETED = "Completed"
    FAILED = "Failed"

    @property
    def terminal(self) -> bool:
        return self in (Phase.COMPLETED, Phase.FAILED)


class TraceKind(str, Enum):
    ORIGIN_DETECTED = "origin_detected"
    CONDITION_SATISFIED = "condition_satisfied"
    STATECHANGE_APPLIED = "statechange_applied"
    RESOLVE_APPLIED = "resolve_applied"
    END_REACHED = "end_reached"
    WORKFLOW_COMPLETED = "workflow_completed"


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Detect:
    t: float
    detectable_id: str
    pose: Optional[Pose] = None
    seq: int = 0
    kind = "detect"


@dataclass(frozen=True)
class Click:
    t: float
    augmentation_id: str
    seq: int = 0
    kind = "click"


@dataclass(frozen=True)
class Observe:
    t: float
    key: str
    value: str
    seq: int = 0
    kind = "observer"


@dataclass(frozen=True)
class Advance:
    t: float
    seq: int = 0
    kind = "advance"


SimEvent = Union[Detect, Click, Observe, Advance]


# ---------------------------------------------------------------------------
# state
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    id: str
    at_node: str
    armed_at: Optional[float] = None


@dataclass(frozen=True)
class TraceRecord:
    seq: int
    t: float
    kind: TraceKind
    subject: str
    details: str = ""

    def to_json(self) -> dict:
        return {"seq": self.seq, "t": float(self.t), "kind": self.kind.value,
                "subject": self.subject, "details": self.details}


@dataclass(frozen=True)
class ConditionSpec:
    kind: str
    duration_s: Optional[float] = None
    observes: Optional[str] = None
    key: Optional[str] = None
    value: Optional[str] = None


@dataclass(frozen=True)
class FlowProgram:
    """Static view of one FlowScene, compiled once at load time."""

    bundle: Bundle
    flowscene: Model
    objectspace: Model
    origin_id: str
    start_id: str
    node_kinds: Mapping[str, str]
    successors: Mapping[str, tuple[str, ...]]
    conditions: Mapping[str, ConditionSpec]
    statechanges: Mapping[str, Model]
    resolves: Mapping[str, Optional[str]]


@dataclass(frozen=True)
class PendingClick:
    augmentation_id: str
    t: float
    seq: int


@dataclass(frozen=True)
class EngineState:
    program: FlowProgram
    phase: Phase
    clock: float
    tokens: tuple[Token, ...]
    scene: SceneState
    disabled_conditions: frozenset = frozenset()
    trace: tuple[TraceRecord, ...] = ()
    clicks: tuple[PendingClick, ...] = ()
    observed: Mapping[str, str] = field(default_factory=lambda: MappingProxyType({}))
    next_token: int = 1
    notes: tuple[str, ...] = ()

    def record(self, kind: TraceKind, subject: str, details: str = "") -> "EngineState":
        rec = TraceRecord(len(self.trace) + 1, self.clock, kind, subject, details)
        return replace(self, trace=self.trace + (rec,))

    def note(self, message: str) -> "EngineState":
        log.warning(message)
        return replace(self, notes=self.notes + (message,))


def _token_id(n: int) -> str:
    return f"tok-{n:06d}"


def _compile(bundle: Bundle, fs: Model) -> FlowProgram:
    osr = fs.instances_of("ObjectSpaceRef")[0]
    objectspace = resolve(bundle, attr(fs, osr, "objectspace"))
    origin_port = next(p for p in fs.ports_of(osr.id) if p.port == "Origin")

    successors: dict[str, list[str]] = {}
    for rel in fs.relations_of("flow"):
        successors.setdefault(rel.from_instance, []).append(rel.to_instance)

    linked_keys: dict[str, str] = {}
    for rel in fs.relations_of("observes_link"):
        observer = fs.get(rel.from_instance)
        linked_keys.setdefault(rel.to_instance, attr(fs, observer, "key"))

    conditions = {}
    for c in fs.instances_of("Condition"):
        observes = attr(fs, c, "observes")
        conditions[c.id] = ConditionSpec(
            kind=attr(fs, c, "kind"),
            duration_s=attr(fs, c, "duration_s"),
            observes=None if observes is None else observes.instance_id,
            key=attr(fs, c, "observer_key") or linked_keys.get(c.id),
            value=attr(fs, c, "observer_value"),
        )
    resolves = {}
    for r in fs.instances_of("Resolve"):
        target = attr(fs, r, "resolves")
        resolves[r.id] = None if target is None else target.instance_id

    return FlowProgram(
        bundle=bundle,
        flowscene=fs,
        objectspace=objectspace,
        origin_id=origin_port.target.instance_id,
        start_id=fs.instances_of("Start")[0].id,
        node_kinds={c.id: c.metaclass for c in fs.class_instances if c.metaclass in arwfml.FLOW_NODES},
        successors={k: tuple(v) for k, v in successors.items()},
        conditions=conditions,
        statechanges={
            s.id: resolve(bundle, attr(fs, s, "statechange_model")) for s in fs.instances_of("StatechangeRef")
        },
        resolves=resolves,
    )


def load(bundle: Bundle, flowscene_id: Optional[str] = None) -> EngineState:
    diagnostics = arwfml.validate(bundle)
    if has_errors(diagnostics):
        raise ValidationFailed([d for d in diagnostics if d.is_error])
    flowscenes = bundle.models_of(FLOW_SCENE)
    if flowscene_id is not None:
        fs = next((m for m in flowscenes if m.id == flowscene_id), None)
        if fs is None:
            raise NoFlowScene(f"no FlowScene with id {flowscene_id!r}")
    elif not flowscenes:
        raise NoFlowScene("bundle contains no FlowScene")
    elif len(flowscenes) > 1:
        raise AmbiguousFlowScene(f"{len(flowscenes)} FlowScenes; pick one of {[m.id for m in flowscenes]}")
    else:
        fs = flowscenes[0]

    program = _compile(bundle, fs)
    return EngineState(
        program=program,
        phase=Phase.AWAIT_ORIGIN,
        clock=0.0,
        tokens=(Token(_token_id(1), program.start_id),),
        scene=initial_scene(program.objectspace),
        next_token=2,
    )


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------


def inject(state: EngineState, event: SimEvent) -> EngineState:
    if event.t < state.clock:
        raise TimeRegression(f"event at t={event.t} precedes clock t={state.clock}")
    state = replace(state, clock=float(event.t))
    if state.phase.terminal:
        return state.note(f"t={event.t}: {event.kind} event ignored in phase {state.phase.value}")

    program = state.program
    if state.phase is Phase.AWAIT_ORIGIN:
        if not (isinstance(event, Detect) and event.detectable_id == program.origin_id):
            return state
        pose = event.pose or IDENTITY
        state = replace(state, phase=Phase.RUNNING, scene=state.scene.detect(event.detectable_id, pose).with_origin(pose))
        state = state.record(TraceKind.ORIGIN_DETECTED, event.detectable_id)
        return fire_ready(state)

    if isinstance(event, Detect):
        if event.detectable_id not in state.scene.detectables:
            return fire_ready(state.note(f"t={event.t}: detect of unknown detectable {event.detectable_id!r}"))
        pose = event.pose or IDENTITY
        scene = state.scene.detect(event.detectable_id, pose)
        if event.detectable_id == program.origin_id:
            scene = scene.with_origin(pose)
        state = replace(state, scene=scene)
    elif isinstance(event, Click):
        state = replace(state, clicks=state.clicks + (PendingClick(event.augmentation_id, event.t, event.seq),))
    elif isinstance(event, Observe):
        observed = dict(state.observed)
        observed[event.key] = event.value
        state = replace(state, observed=MappingProxyType(observed))
    return fire_ready(state)


def _click_assignment(state: EngineState) -> dict[str, PendingClick]:
    """Greedy click allocation to waiting click conditions, lowest condition id first."""
    program = state.program
    waiting = [
        tok for tok in state.tokens
        if program.node_kinds.get(tok.at_node) == "Condition"
        and program.conditions[tok.at_node].kind == "click"
        and tok.at_node not in state.disabled_conditions
    ]
    waiting.sort(key=lambda tok: (tok.at_node, tok.id))
    free = sorted(state.clicks, key=lambda c: (c.t, c.seq))
    out = {}
    for tok in waiting:
        target = program.conditions[tok.at_node].observes
        for click in free:
            if click.augmentation_id == target and click.t >= tok.armed_at:
                out[tok.id] = click
                free.remove(click)
                break
    return out


def _satisfied(state: EngineState, tok: Token) -> bool:
    cond = state.program.conditions[tok.at_node]
    if cond.kind == "timer":
        return state.clock >= tok.armed_at + cond.duration_s
    if cond.kind == "detection":
        det = state.scene.detectables.get(cond.observes)
        return det is not None and det.detected
    if cond.kind == "click":
        return tok.id in _click_assignment(state)
    if cond.kind == "observer":
        if cond.key not in state.observed:
            return False
        return cond.value is None or state.observed[cond.key] == cond.value
    return False


def _advance(state: EngineState, tok: Token) -> EngineState:
    program = state.program
    tokens = [t for t in state.tokens if t.id != tok.id]
    n = state.next_token
    for succ in program.successors.get(tok.at_node, ()):
        armed = state.clock if program.node_kinds.get(succ) == "Condition" else None
        tokens.append(Token(_token_id(n), succ, armed))
        n += 1
    return replace(state, tokens=tuple(tokens), next_token=n)


def _drop(state: EngineState, predicate) -> EngineState:
    return replace(state, tokens=tuple(t for t in state.tokens if not predicate(t)))


def _step_token(state: EngineState, tok: Token) -> tuple[EngineState, bool]:
    program = state.program
    kind = program.node_kinds.get(tok.at_node)
    if kind == "Start":
        return _advance(state, tok), True
    if kind == "Condition":
        if tok.at_node in state.disabled_conditions:
            return _drop(state, lambda t: t.id == tok.id), True
        if not _satisfied(state, tok):
            return state, False
        spec = program.conditions[tok.at_node]
        if spec.kind == "click":
            click = _click_assignment(state)[tok.id]
            state = replace(state, clicks=tuple(c for c in state.clicks if c is not click))
        state = state.record(TraceKind.CONDITION_SATISFIED, tok.at_node, spec.kind)
        return _advance(state, tok), True
    if kind == "StatechangeRef":
        model = program.statechanges[tok.at_node]
        state = replace(state, scene=apply_statechange(state.scene, model))
        state = state.record(TraceKind.STATECHANGE_APPLIED, tok.at_node, model.id)
        return _advance(state, tok), True
    if kind == "Resolve":
        target = program.resolves.get(tok.at_node)
        if target is not None:
            state = replace(state, disabled_conditions=state.disabled_conditions | {target})
            state = _drop(state, lambda t: t.at_node == target)
        state = state.record(TraceKind.RESOLVE_APPLIED, tok.at_node, target or "")
        return _advance(state, tok), True
    if kind == "End":
        state = _drop(state, lambda t: t.id == tok.id)
        return state.record(TraceKind.END_REACHED, tok.at_node), True
    return state, False


def fire_ready(state: EngineState) -> EngineState:
    """Move tokens in token-id order, repeating until a full pass makes no progress."""
    if state.phase is not Phase.RUNNING:
        return state
    while True:
        progress = False
        for tok in sorted(state.tokens, key=lambda t: t.id):
            if tok not in state.tokens:
                continue
            try:
                state, moved = _step_token(state, tok)
            except SceneError as exc:
                return replace(state, phase=Phase.FAILED).note(f"t={state.clock}: {exc}")
            progress = progress or moved
        if not state.tokens:
            state = replace(state, phase=Phase.COMPLETED)
            return state.record(TraceKind.WORKFLOW_COMPLETED, state.program.flowscene.id)
        if not progress:
            return state


def snapshot(state: EngineState) -> dict[str, dict]:
    return scene_snapshot(state.scene, state.program.objectspace)


# ---------------------------------------------------------------------------
# whole runs and serialization
# ---------------------------------------------------------------------------


class RunResult(NamedTuple):
    trace: tuple[TraceRecord, ...]
    snapshot: dict[str, dict]
    state: EngineState


def run(
    bundle: Bundle,
    scenario: Iterable[SimEvent],
    stop_t: float,
    flowscene_id: Optional[str] = None,
) -> RunResult:
    state = load(bundle, flowscene_id)
    for event in scenario:
        state = inject(state, event)
    if state.phase.terminal:
        state = replace(state, clock=max(state.clock, float(stop_t)))
    else:
        state = inject(state, Advance(stop_t))
    return RunResult(state.trace, snapshot(state), state)


def trace_to_jsonl(trace: Iterable[TraceRecord]) -> str:
    return "".join(
        json.dumps(rec.to_json(), sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"
        for rec in trace
    )


def snapshot_to_json(snap: Mapping[str, dict]) -> str:
    return canonical_dumps({
        aug_id: {
            "visible": entry["visible"],
            "world_pose": None if entry["world_pose"] is None else encode_pose(entry["world_pose"]),
        }
        for aug_id, entry in snap.items()
    })
