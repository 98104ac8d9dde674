"""Acceptance criteria AC1-AC7; the summary section prints one PASS/FAIL line per criterion."""

import random
import subprocess
import sys
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings

from m2ar import engine
from m2ar.arwfml import arwfml_metamodel, validate
from m2ar.bundle_io import parse_bundle, serialize_bundle
from m2ar.cli import main
from m2ar.engine import Click, Detect, Observe, TraceKind
from m2ar.errors import BundleFormatError
from m2ar.fixtures import FLOWSCENE_ID, OBJECTSPACE_ID, BundleBuilder
from m2ar.geometry import IDENTITY, compose
from m2ar.meta2 import ClassInstance, Model, RelationclassInstance, Severity
from m2ar.scenario import read_scenario_file
from m2ar.scene import AugmentationState, DetectableState, SceneState, world_pose
from mutations import MUTATIONS
from strategies import chain_matrix, conformant_bundles, pose_matrix, random_pose

TOL = 1e-9


def rows(trace):
    return [(r.t, r.kind.value, r.subject, r.details) for r in trace]


# -- AC1 ---------------------------------------------------------------------

AC1 = pytest.mark.criterion("AC1", "color-brick reproduction")


@AC1
def test_ac1_fixture_composition(brick_bundle):
    os_model = brick_bundle.model(OBJECTSPACE_ID)
    fs = brick_bundle.model(FLOWSCENE_ID)
    assert len(os_model.instances_of("Detectable")) == 1
    assert len(os_model.instances_of("Augmentation")) == 3
    assert len(brick_bundle.models_of("Statechange")) == 3
    conditions = fs.instances_of("Condition")
    assert len(conditions) == 4 and all(c.attributes["kind"] == "timer" for c in conditions)
    assert all(c.attributes["duration_s"] == 2.0 for c in conditions)
    assert len(fs.instances_of("StatechangeRef")) == 3


@AC1
def test_ac1_run(tmp_path, capsys):
    assert main(["fixture", "color-brick", "--out", str(tmp_path)]) == 0
    started = time.perf_counter()
    code = main(["run", str(tmp_path / "color-brick.m2ar.json"),
                 "--scenario", str(tmp_path / "color-brick.scenario.json"),
                 "--trace", str(tmp_path / "trace.jsonl"), "--snapshot", str(tmp_path / "snap.json")])
    elapsed = time.perf_counter() - started
    assert code == 0
    assert elapsed < 1.0

    bundle = parse_bundle((tmp_path / "color-brick.m2ar.json").read_bytes())
    scenario = read_scenario_file(tmp_path / "color-brick.scenario.json")
    result = engine.run(bundle, scenario.events, scenario.stop_t)
    trace = result.trace
    assert [r.t for r in trace if r.kind is TraceKind.STATECHANGE_APPLIED] == [3.0, 5.0, 7.0]
    assert [r.t for r in trace if r.kind is TraceKind.ORIGIN_DETECTED] == [1.0]
    assert trace[-1].kind is TraceKind.WORKFLOW_COMPLETED and trace[-1].t == 9.0
    assert engine.trace_to_jsonl(trace) == (tmp_path / "trace.jsonl").read_text()
    assert all(entry["visible"] for entry in result.snapshot.values()) and len(result.snapshot) == 3


@AC1
def test_ac1_progressive_appearance(brick_bundle, brick_scenario):
    visible_at = {}
    for stop in (2.0, 4.0, 6.0, 8.0):
        snap = engine.run(brick_bundle, brick_scenario.truncated(stop).events, stop).snapshot
        visible_at[stop] = sum(e["visible"] for e in snap.values())
    assert visible_at == {2.0: 0, 4.0: 1, 6.0: 2, 8.0: 3}


# -- AC2 ---------------------------------------------------------------------

AC2 = pytest.mark.criterion("AC2", "metamodel fidelity")

EXPECTED_STRUCTURE = {
    "ObjectSpace": ({"Augmentation", "Detectable"}, {"child", "anchored"}),
    "Statechange": ({"Reference"}, set()),
    "FlowScene": ({"Start", "End", "ObjectSpaceRef", "Condition", "StatechangeRef", "Resolve", "Observer"},
                  {"flow", "observes_link"}),
}


@AC2
def test_ac2_scene_types_and_members():
    mm = arwfml_metamodel()
    assert mm.name == "ARWFML"
    assert {s.name for s in mm.scene_types} == set(EXPECTED_STRUCTURE)
    for st in mm.scene_types:
        metaclasses, relationclasses = EXPECTED_STRUCTURE[st.name]
        assert {m.name for m in st.metaclasses} == metaclasses
        assert {r.name for r in st.relationclasses} == relationclasses


@AC2
def test_ac2_origin_port_and_roles():
    fs = arwfml_metamodel().scene_type("FlowScene")
    osr = fs.metaclass("ObjectSpaceRef")
    assert [p.name for p in osr.ports] == ["Origin"]
    assert osr.port("Origin").ref_target.allowed_types == ("Detectable",)
    os_type = arwfml_metamodel().scene_type("ObjectSpace")
    anchored = os_type.relationclass("anchored")
    assert anchored.from_role.allowed_endpoint_types == {"Augmentation"}
    assert anchored.to_role.allowed_endpoint_types == {"Detectable"}
    child = os_type.relationclass("child")
    assert child.from_role.allowed_endpoint_types == child.to_role.allowed_endpoint_types == {"Augmentation"}
    ref = arwfml_metamodel().scene_type("Statechange").metaclass("Reference")
    assert {a.name for a in ref.attributes} == {"target", "changes"}


# -- AC3 ---------------------------------------------------------------------

AC3 = pytest.mark.criterion("AC3", "validator mutation suite")


@AC3
def test_ac3_unmutated_fixture_has_no_errors(brick_bundle):
    assert [d for d in validate(brick_bundle) if d.severity is Severity.ERROR] == []


@AC3
@pytest.mark.parametrize("code", [f"V{i:03d}" for i in range(1, 13)])
def test_ac3_mutation(brick_bundle, code):
    diags = validate(MUTATIONS[code](brick_bundle))
    assert diags
    assert {d.code for d in diags} == {code}


# -- AC4 ---------------------------------------------------------------------

AC4 = pytest.mark.criterion("AC4", "round-trip and canonicalization")


@AC4
@given(conformant_bundles())
@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
def test_ac4_round_trip(bundle):
    data = serialize_bundle(bundle)
    back = parse_bundle(data)
    assert back == bundle
    assert serialize_bundle(back) == data


@AC4
def test_ac4_fuzz_never_crashes():
    rng = random.Random(20261018)
    for _ in range(100_000):
        data = rng.randbytes(rng.randrange(0, 48))
        try:
            parse_bundle(data)
        except BundleFormatError:
            pass


# -- AC5 ---------------------------------------------------------------------

AC5 = pytest.mark.criterion("AC5", "transform oracle equivalence")


def random_hierarchy(rng, uniform):
    """A random forest of up to 12 augmentations, depth <= 5, some rooted at a detected anchor."""
    ids, parents, depth = [], {}, {}
    for i in range(rng.randint(1, 12)):
        node = f"a{i}"
        candidates = [n for n in ids if depth[n] < 5]
        parent = rng.choice(candidates) if candidates and rng.random() < 0.7 else None
        parents[node] = parent
        depth[node] = 1 if parent is None else depth[parent] + 1
        ids.append(node)
    anchors = {n: "det" for n in ids if parents[n] is None and rng.random() < 0.5}
    classes = [ClassInstance(n, "Augmentation") for n in ids] + [ClassInstance("det", "Detectable")]
    rels = [RelationclassInstance(f"c-{n}", "child", p, n) for n, p in parents.items() if p]
    rels += [RelationclassInstance(f"a-{n}", "anchored", n, d) for n, d in anchors.items()]
    local = {n: random_pose(rng, uniform) for n in ids}
    det_pose, origin = random_pose(rng, uniform), random_pose(rng, uniform)
    state = SceneState({n: AugmentationState(True, p) for n, p in local.items()},
                       {"det": DetectableState(True, det_pose)}, origin)
    model = Model("os", "os", "ObjectSpace", tuple(classes), tuple(rels))

    def oracle(node):
        chain = []
        while node is not None:
            chain.append(local[node])
            root = node
            node = parents[node]
        base = det_pose if root in anchors else origin
        return chain_matrix(base, *reversed(chain))

    return state, model, ids, oracle


@AC5
def test_ac5_world_pose_oracle():
    rng = random.Random(5)
    worst_full = worst_pos = 0.0
    for i in range(10_000):
        uniform = i % 2 == 0
        state, model, ids, oracle = random_hierarchy(rng, uniform)
        for node in ids:
            got, want = world_pose(state, model, node), oracle(node)
            worst_pos = max(worst_pos, float(np.max(np.abs(np.array(got.position) - want[:3, 3]))))
            if uniform:
                worst_full = max(worst_full, float(np.max(np.abs(pose_matrix(got) - want))))
    assert worst_pos <= TOL, worst_pos
    assert worst_full <= TOL, worst_full


@AC5
def test_ac5_compose_associativity():
    rng = random.Random(55)
    worst = 0.0
    for _ in range(10_000):
        a, b, c = (random_pose(rng) for _ in range(3))
        left, right = compose(compose(a, b), c), compose(a, compose(b, c))
        worst = max(worst, float(np.max(np.abs(pose_matrix(left) - pose_matrix(right)))))
    assert worst <= TOL, worst


@AC5
def test_ac5_identity_exact():
    rng = random.Random(555)
    for _ in range(1000):
        p = random_pose(rng, uniform_scale=False)
        assert compose(p, IDENTITY) == p == compose(IDENTITY, p)


# -- AC6 ---------------------------------------------------------------------

AC6 = pytest.mark.criterion("AC6", "determinism")


@pytest.fixture
def fixture_files(tmp_path):
    assert main(["fixture", "color-brick", "--out", str(tmp_path)]) == 0
    return tmp_path / "color-brick.m2ar.json", tmp_path / "color-brick.scenario.json"


@AC6
def test_ac6_two_runs_identical(tmp_path, fixture_files):
    bundle, scenario = fixture_files
    outputs = []
    for i in range(2):
        trace, snap = tmp_path / f"trace{i}.jsonl", tmp_path / f"snap{i}.json"
        assert main(["run", str(bundle), "--scenario", str(scenario),
                     "--trace", str(trace), "--snapshot", str(snap)]) == 0
        outputs.append((trace.read_bytes(), snap.read_bytes()))
    assert outputs[0] == outputs[1]


@AC6
def test_ac6_step_session_matches_run(tmp_path, fixture_files):
    bundle, scenario = fixture_files
    trace = tmp_path / "trace.jsonl"
    assert main(["run", str(bundle), "--scenario", str(scenario),
                 "--trace", str(trace), "--snapshot", str(tmp_path / "snap.json")]) == 0
    script = "\n".join(["advance 1", "detect det-origin-marker", "advance 3", "advance 5",
                        "advance 7", "advance 9", "advance 10", "trace", "quit"]) + "\n"
    proc = subprocess.run([sys.executable, "-m", "m2ar", "step", str(bundle)],
                          input=script, capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    stepped = "".join(line + "\n" for line in proc.stdout.splitlines() if line.startswith("{"))
    assert stepped == trace.read_text()


# -- AC7 ---------------------------------------------------------------------

AC7 = pytest.mark.criterion("AC7", "condition-kind coverage")

ORIGIN = Detect(0.0, "det-origin", IDENTITY)


@AC7
def test_ac7_click_consumption():
    # two click conditions wait on the same augmentation; each click feeds one, lowest id first
    b = BundleBuilder(augmentations=["aug-a"])
    b.condition("click-b", "click", observes="aug-a")
    b.condition("click-a", "click", observes="aug-a")
    b.statechange("show", reveal="aug-a")
    b.flow("start", "click-b", "end")
    b.flow("start", "click-a", "show", "end")
    events = [ORIGIN, Click(1.0, "aug-b"), Click(2.0, "aug-a"), Click(3.0, "aug-a"), Click(4.0, "aug-a")]
    result = engine.run(b.build(), events, 5.0)
    assert rows(result.trace) == [
        (0.0, "origin_detected", "det-origin", ""),
        (2.0, "condition_satisfied", "click-a", "click"),
        (2.0, "statechange_applied", "show", "sc-show"),
        (2.0, "end_reached", "end", ""),
        (3.0, "condition_satisfied", "click-b", "click"),
        (3.0, "end_reached", "end", ""),
        (3.0, "workflow_completed", "fs-main", ""),
    ]
    assert len(result.state.notes) == 1  # the click at 4.0 arrives after completion


@AC7
def test_ac7_detection_level_triggered():
    # det-b is detected at 0.5, before d1 is armed at 2.0, and is still detected then
    b = BundleBuilder(detectables=["det-b", "det-c"])
    b.condition("wait", "timer", duration_s=2.0)
    b.condition("d1", "detection", observes="det-b")
    b.condition("d2", "detection", observes="det-c")
    b.flow("start", "wait", "d1", "d2", "end")
    events = [ORIGIN, Detect(0.5, "det-b"), engine.Advance(2.0), engine.Advance(2.5), Detect(3.0, "det-c")]
    result = engine.run(b.build(), events, 4.0)
    assert rows(result.trace) == [
        (0.0, "origin_detected", "det-origin", ""),
        (2.0, "condition_satisfied", "wait", "timer"),
        (2.0, "condition_satisfied", "d1", "detection"),
        (3.0, "condition_satisfied", "d2", "detection"),
        (3.0, "end_reached", "end", ""),
        (3.0, "workflow_completed", "fs-main", ""),
    ]


@AC7
def test_ac7_observer():
    b = BundleBuilder()
    b.condition("o-open", "observer", key="door", value="open")
    b.condition("o-any", "observer")
    b.observer("watch", "light", ["o-any"])
    b.flow("start", "o-open", "o-any", "end")
    events = [ORIGIN, Observe(1.0, "door", "closed"), Observe(2.0, "light", "on"), Observe(3.0, "door", "open")]
    result = engine.run(b.build(), events, 4.0)
    assert rows(result.trace) == [
        (0.0, "origin_detected", "det-origin", ""),
        (3.0, "condition_satisfied", "o-open", "observer"),
        (3.0, "condition_satisfied", "o-any", "observer"),
        (3.0, "end_reached", "end", ""),
        (3.0, "workflow_completed", "fs-main", ""),
    ]
