"""
Running the color-brick workflow
================================

One image marker serves as origin. Three bricks appear one after another,
each two seconds after the last.
"""

from m2ar import engine
from m2ar.fixtures import color_brick_bundle, color_brick_scenario

bundle = color_brick_bundle()
scenario = color_brick_scenario()

# the engine waits for the origin, then timers drive the flow
result = engine.run(bundle, scenario.events, scenario.stop_t)
for rec in result.trace:
    print(f"t={rec.t:4.1f}  {rec.kind.value:20s} {rec.subject} {rec.details}")

print()
for aug, entry in sorted(result.snapshot.items()):
    pos = entry["world_pose"].position if entry["world_pose"] else None
    print(f"{aug:16s} visible={entry['visible']}  position={pos}")

# the same run stopped early shows the partial assembly
print()
for stop in (2.0, 4.0, 6.0, 8.0):
    snap = engine.run(bundle, scenario.truncated(stop).events, stop).snapshot
    shown = sorted(k for k, v in snap.items() if v["visible"])
    print(f"stop at {stop}: {shown}")

# stepping by hand gives the same records
state = engine.load(bundle)
for ev in scenario.events:
    state = engine.inject(state, ev)
print()
print("stepwise trace equals run trace:", state.trace == result.trace)
