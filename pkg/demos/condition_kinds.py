"""
Condition kinds
===============

Timers, clicks, detections and observer signals all guard flow edges.
A small bundle per kind shows when each one lets the token through.
"""

from m2ar import engine
from m2ar.engine import Advance, Click, Detect, Observe
from m2ar.fixtures import BundleBuilder


def show(title, bundle, events, stop_t):
    print(title)
    for rec in engine.run(bundle, events, stop_t).trace:
        print(f"  t={rec.t:3.1f} {rec.kind.value} {rec.subject} {rec.details}".rstrip())


origin = Detect(0.0, "det-origin")

# a click is used up by the condition it satisfies
b = BundleBuilder(augmentations=["lever"])
b.condition("pull-1", "click", observes="lever")
b.condition("pull-2", "click", observes="lever")
b.flow("start", "pull-1", "pull-2", "end")
show("click", b.build(), [origin, Click(1.0, "lever"), Click(2.0, "lever")], 3.0)

# detection is a level: an object seen earlier still counts
b = BundleBuilder(detectables=["toolbox"])
b.condition("wait", "timer", duration_s=2.0)
b.condition("see-box", "detection", observes="toolbox")
b.flow("start", "wait", "see-box", "end")
show("detection", b.build(), [origin, Detect(0.5, "toolbox"), Advance(2.0)], 3.0)

# observers match a key and, optionally, a value
b = BundleBuilder()
b.condition("door-open", "observer", key="door", value="open")
b.flow("start", "door-open", "end")
show("observer", b.build(), [origin, Observe(1.0, "door", "ajar"), Observe(2.0, "door", "open")], 3.0)

# a resolve cancels a branch that is still waiting
b = BundleBuilder(augmentations=["help"])
b.condition("ask", "click", observes="help")
b.condition("timeout", "timer", duration_s=1.0)
b.resolve("give-up", "ask")
b.flow("start", "ask", "end")
b.flow("start", "timeout", "give-up", "end")
show("resolve", b.build(), [origin, Advance(1.0)], 2.0)
