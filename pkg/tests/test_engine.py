from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from m2ar import engine
from m2ar.engine import Advance, Click, Detect, Observe, Phase, TraceKind
from m2ar.errors import AmbiguousFlowScene, NoFlowScene, TimeRegression, ValidationFailed
from m2ar.fixtures import ORIGIN_ID, BundleBuilder, brick_id, color_brick_bundle, color_brick_scenario
from m2ar.geometry import IDENTITY, Pose
from m2ar.meta2 import Model
from mutations import MUTATIONS


def rows(trace):
    return [(r.t, r.kind.value, r.subject, r.details) for r in trace]


def origin(t=0.0, pose=None):
    return Detect(t, "det-origin", pose or IDENTITY)


def timer_chain(*durations):
    b = BundleBuilder(augmentations=["aug-a"])
    names = []
    for i, d in enumerate(durations, 1):
        b.condition(f"t{i}", "timer", duration_s=d)
        names.append(f"t{i}")
    b.flow("start", *names, "end")
    return b.build()


class TestLoad:
    def test_initial_state(self, brick_bundle):
        state = engine.load(brick_bundle)
        assert state.phase is Phase.AWAIT_ORIGIN
        assert state.clock == 0.0
        assert [t.at_node for t in state.tokens] == ["node-start"]
        assert state.trace == ()

    def test_invalid_bundle(self, brick_bundle):
        with pytest.raises(ValidationFailed) as info:
            engine.load(MUTATIONS["V003"](brick_bundle))
        assert {d.code for d in info.value.diagnostics} == {"V003"}

    def test_no_flowscene(self, brick_bundle):
        with pytest.raises(NoFlowScene):
            engine.load(MUTATIONS["V011"](brick_bundle))
        with pytest.raises(NoFlowScene):
            engine.load(brick_bundle, "fs-nope")

    def test_ambiguous_flowscene(self, brick_bundle):
        fs = brick_bundle.model("fs-color-brick")
        # rename every instance so ids stay unique across the bundle
        rename = lambda i: i + "-b"
        twin = Model(
            "fs-twin", "twin", "FlowScene",
            tuple(replace(c, id=rename(c.id)) for c in fs.class_instances),
            tuple(replace(r, id=rename(r.id), from_instance=rename(r.from_instance), to_instance=rename(r.to_instance))
                  for r in fs.relationclass_instances),
            tuple(replace(p, id=rename(p.id), owner=rename(p.owner)) for p in fs.port_instances),
        )
        two = replace(brick_bundle, models=brick_bundle.models + (twin,))
        with pytest.raises(AmbiguousFlowScene):
            engine.load(two)
        assert engine.load(two, "fs-twin").program.flowscene.id == "fs-twin"


class TestInject:
    def test_events_before_origin_only_move_the_clock(self, brick_bundle):
        state = engine.load(brick_bundle)
        for ev in (Advance(5.0), Click(5.0, brick_id("red")), Detect(6.0, "det-other")):
            state = engine.inject(state, ev)
        assert state.phase is Phase.AWAIT_ORIGIN and state.clock == 6.0 and state.trace == ()

    def test_origin_starts_the_run(self, brick_bundle):
        pose = Pose(position=(1.0, 2.0, 3.0))
        state = engine.inject(engine.load(brick_bundle), Detect(1.0, ORIGIN_ID, pose))
        assert state.phase is Phase.RUNNING
        assert state.scene.origin_frame == pose
        assert rows(state.trace) == [(1.0, "origin_detected", ORIGIN_ID, "")]
        assert [t.at_node for t in state.tokens] == ["cond-1"]
        assert state.tokens[0].armed_at == 1.0

    def test_time_regression(self, brick_bundle):
        state = engine.inject(engine.load(brick_bundle), Advance(4.0))
        with pytest.raises(TimeRegression):
            engine.inject(state, Advance(3.0))

    def test_equal_timestamps_are_allowed(self, brick_bundle):
        state = engine.inject(engine.load(brick_bundle), Advance(4.0))
        assert engine.inject(state, Advance(4.0)).clock == 4.0

    def test_events_after_completion_are_noted(self, brick_bundle, brick_scenario):
        result = engine.run(brick_bundle, brick_scenario.events, brick_scenario.stop_t)
        state = engine.inject(result.state, Click(20.0, brick_id("red")))
        assert state.trace == result.state.trace
        assert state.clock == 20.0
        assert len(state.notes) == 1 and "ignored" in state.notes[0]


class TestTimers:
    def test_fire_at_processed_time_point(self):
        # 1.5 s timer armed at 0 expires at 1.5 but is only seen at the next processed time, 4.0
        result = engine.run(timer_chain(1.5), [origin(), Advance(4.0)], 5.0)
        assert rows(result.trace) == [
            (0.0, "origin_detected", "det-origin", ""),
            (4.0, "condition_satisfied", "t1", "timer"),
            (4.0, "end_reached", "end", ""),
            (4.0, "workflow_completed", "fs-main", ""),
        ]

    def test_chained_timer_arms_at_firing_time(self):
        result = engine.run(timer_chain(1.0, 1.0), [origin(), Advance(1.0), Advance(1.5), Advance(2.0)], 3.0)
        fired = [(r.t, r.subject) for r in result.trace if r.kind is TraceKind.CONDITION_SATISFIED]
        assert fired == [(1.0, "t1"), (2.0, "t2")]

    def test_fan_out_fires_in_token_order(self):
        b = BundleBuilder()
        b.condition("t-long", "timer", duration_s=2.0)
        b.condition("t-short", "timer", duration_s=1.0)
        b.flow("start", "t-long", "end")
        b.flow("start", "t-short", "end")
        state = engine.run(b.build(), [origin(), Advance(3.0)], 3.0).state
        assert rows(state.trace) == [
            (0.0, "origin_detected", "det-origin", ""),
            (3.0, "condition_satisfied", "t-long", "timer"),
            (3.0, "condition_satisfied", "t-short", "timer"),
            (3.0, "end_reached", "end", ""),
            (3.0, "end_reached", "end", ""),
            (3.0, "workflow_completed", "fs-main", ""),
        ]


class TestClick:
    @staticmethod
    def bundle():
        b = BundleBuilder(augmentations=["aug-a"])
        b.condition("c1", "click", observes="aug-a")
        b.statechange("s1", reveal="aug-a")
        b.flow("start", "c1", "s1", "end")
        return b.build()

    def test_click_fires_and_reveals(self):
        result = engine.run(self.bundle(), [origin(), Click(2.0, "aug-other"), Click(2.5, "aug-a")], 3.0)
        assert rows(result.trace) == [
            (0.0, "origin_detected", "det-origin", ""),
            (2.5, "condition_satisfied", "c1", "click"),
            (2.5, "statechange_applied", "s1", "sc-s1"),
            (2.5, "end_reached", "end", ""),
            (2.5, "workflow_completed", "fs-main", ""),
        ]
        assert result.snapshot["aug-a"]["visible"] is True

    def test_click_before_arming_is_not_counted(self):
        b = BundleBuilder(augmentations=["aug-a"])
        b.condition("t1", "timer", duration_s=2.0)
        b.condition("c1", "click", observes="aug-a")
        b.flow("start", "t1", "c1", "end")
        events = [origin(), Click(1.0, "aug-a"), Advance(2.0), Advance(3.0)]
        state = engine.run(b.build(), events, 3.0).state
        assert state.phase is Phase.RUNNING
        assert [t.at_node for t in state.tokens] == ["c1"]
        state = engine.inject(state, Click(4.0, "aug-a"))
        assert rows(state.trace)[-3:] == [
            (4.0, "condition_satisfied", "c1", "click"),
            (4.0, "end_reached", "end", ""),
            (4.0, "workflow_completed", "fs-main", ""),
        ]

    def test_one_click_satisfies_one_condition(self):
        b = BundleBuilder(augmentations=["aug-a"])
        b.condition("c2", "click", observes="aug-a")
        b.condition("c1", "click", observes="aug-a")
        b.flow("start", "c2", "end")
        b.flow("start", "c1", "end")
        state = engine.run(b.build(), [origin(), Click(1.0, "aug-a")], 1.0).state
        assert rows(state.trace)[1:] == [
            (1.0, "condition_satisfied", "c1", "click"),
            (1.0, "end_reached", "end", ""),
        ]
        state = engine.inject(state, Click(2.0, "aug-a"))
        assert rows(state.trace)[3:] == [
            (2.0, "condition_satisfied", "c2", "click"),
            (2.0, "end_reached", "end", ""),
            (2.0, "workflow_completed", "fs-main", ""),
        ]


class TestDetection:
    @staticmethod
    def bundle():
        b = BundleBuilder(detectables=["det-b"])
        b.condition("t1", "timer", duration_s=1.0)
        b.condition("d1", "detection", observes="det-b")
        b.flow("start", "t1", "d1", "end")
        return b.build()

    def test_level_triggered(self):
        # det-b was seen before d1 was armed and stays detected, so d1 passes on arrival
        result = engine.run(self.bundle(), [origin(), Detect(0.5, "det-b"), Advance(1.0)], 2.0)
        assert rows(result.trace)[1:] == [
            (1.0, "condition_satisfied", "t1", "timer"),
            (1.0, "condition_satisfied", "d1", "detection"),
            (1.0, "end_reached", "end", ""),
            (1.0, "workflow_completed", "fs-main", ""),
        ]

    def test_detection_before_origin_is_not_remembered(self):
        result = engine.run(self.bundle(), [Detect(0.0, "det-b"), origin(0.5), Advance(1.5)], 2.0)
        assert result.state.phase is Phase.RUNNING
        assert [(r.t, r.subject) for r in result.trace] == [(0.5, "det-origin"), (1.5, "t1")]
        state = engine.inject(result.state, Detect(3.0, "det-b"))
        assert rows(state.trace)[-3:] == [
            (3.0, "condition_satisfied", "d1", "detection"),
            (3.0, "end_reached", "end", ""),
            (3.0, "workflow_completed", "fs-main", ""),
        ]


class TestObserver:
    def test_value_must_match(self):
        b = BundleBuilder()
        b.condition("o1", "observer", key="door", value="open")
        b.flow("start", "o1", "end")
        events = [origin(), Observe(1.0, "door", "closed"), Observe(2.0, "window", "open"), Observe(3.0, "door", "open")]
        assert rows(engine.run(b.build(), events, 4.0).trace)[1:] == [
            (3.0, "condition_satisfied", "o1", "observer"),
            (3.0, "end_reached", "end", ""),
            (3.0, "workflow_completed", "fs-main", ""),
        ]

    def test_linked_observer_key_and_any_value(self):
        b = BundleBuilder()
        b.condition("o1", "observer")
        b.observer("obs", "door", ["o1"])
        b.flow("start", "o1", "end")
        trace = engine.run(b.build(), [origin(), Observe(1.0, "door", "anything")], 2.0).trace
        assert [(r.t, r.subject) for r in trace][1] == (1.0, "o1")

    def test_stored_value_is_level_triggered(self):
        b = BundleBuilder()
        b.condition("t1", "timer", duration_s=2.0)
        b.condition("o1", "observer", key="door", value="open")
        b.flow("start", "t1", "o1", "end")
        trace = engine.run(b.build(), [origin(), Observe(1.0, "door", "open"), Advance(2.0)], 3.0).trace
        assert [(r.t, r.subject) for r in trace if r.kind is TraceKind.CONDITION_SATISFIED] == [(2.0, "t1"), (2.0, "o1")]


def test_resolve_disables_pending_branch():
    b = BundleBuilder(augmentations=["aug-a"])
    b.condition("c1", "click", observes="aug-a")
    b.condition("t1", "timer", duration_s=1.0)
    b.resolve("r1", "c1")
    b.flow("start", "c1", "end")
    b.flow("start", "t1", "r1", "end")
    result = engine.run(b.build(), [origin(), Advance(1.0), Click(2.0, "aug-a")], 3.0)
    assert rows(result.trace) == [
        (0.0, "origin_detected", "det-origin", ""),
        (1.0, "condition_satisfied", "t1", "timer"),
        (1.0, "resolve_applied", "r1", "c1"),
        (1.0, "end_reached", "end", ""),
        (1.0, "workflow_completed", "fs-main", ""),
    ]
    assert result.state.phase is Phase.COMPLETED


def test_fixture_run(brick_bundle, brick_scenario):
    result = engine.run(brick_bundle, brick_scenario.events, brick_scenario.stop_t)
    applied = [(r.t, r.subject) for r in result.trace if r.kind is TraceKind.STATECHANGE_APPLIED]
    assert applied == [(3.0, "scref-1"), (5.0, "scref-2"), (7.0, "scref-3")]
    assert result.trace[-1].kind is TraceKind.WORKFLOW_COMPLETED and result.trace[-1].t == 9.0
    assert result.state.clock == 10.0
    assert result.state.notes == ()


def test_partial_run_reveals_progressively(brick_bundle, brick_scenario):
    result = engine.run(brick_bundle, brick_scenario.truncated(6.0).events, 6.0)
    visible = {k: v["visible"] for k, v in result.snapshot.items()}
    assert visible == {brick_id("green"): True, brick_id("blue"): True, brick_id("red"): False}
    assert result.state.phase is Phase.RUNNING


def test_replay_equivalence(brick_bundle, brick_scenario):
    plain = engine.run(brick_bundle, brick_scenario.events, 10.0).trace
    split = sorted(brick_scenario.events + (Advance(4.0), Advance(8.0)), key=lambda e: e.t)
    assert engine.run(brick_bundle, split, 10.0).trace == plain


@given(st.lists(st.floats(0.0, 12.0), max_size=8))
@settings(max_examples=100, deadline=None)
def test_trace_is_causal(extra_times):
    # any extra advance points: seq is consecutive, time never decreases,
    # and statechange i is always preceded by the condition that guards it
    scen = color_brick_scenario()
    events = sorted(scen.events + tuple(Advance(t) for t in extra_times), key=lambda e: e.t)
    trace = engine.run(color_brick_bundle(), events, scen.stop_t).trace
    assert [r.seq for r in trace] == list(range(1, len(trace) + 1))
    assert all(a.t <= b.t for a, b in zip(trace, trace[1:]))
    subjects = [r.subject for r in trace]
    for i in (1, 2, 3):
        assert subjects.index(f"cond-{i}") < subjects.index(f"scref-{i}")


def test_trace_jsonl_shape(brick_bundle, brick_scenario):
    text = engine.trace_to_jsonl(engine.run(brick_bundle, brick_scenario.events, 10.0).trace)
    first = text.splitlines()[0]
    assert first == '{"details":"","kind":"origin_detected","seq":1,"subject":"det-origin-marker","t":1.0}'
    assert text.endswith("\n")
