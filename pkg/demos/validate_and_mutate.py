"""
Validating a bundle, then breaking it
=====================================

The color-brick bundle is clean. Each edit below introduces one defect,
and the validator names it with a stable code.
"""

from dataclasses import replace

from m2ar import ClassInstance, validate
from m2ar.fixtures import FLOWSCENE_ID, color_brick_bundle

bundle = color_brick_bundle()
print("clean bundle:", validate(bundle) or "no diagnostics")

# a second Start node in the FlowScene
fs = bundle.model(FLOWSCENE_ID)
two_starts = bundle.replace_model(
    replace(fs, class_instances=fs.class_instances + (ClassInstance("node-start-2", "Start", "again"),)))
for d in validate(two_starts):
    print(d.format())

# a flow edge removed: scref-3 becomes a dead end, cond-4 and End become unreachable
no_edge = bundle.replace_model(
    replace(fs, relationclass_instances=tuple(r for r in fs.relationclass_instances if r.id != "flow-07")))
for d in validate(no_edge):
    print(d.format())

# a zero-length timer
cond = fs.get("cond-2")
zero = replace(cond, attributes={**cond.attributes, "duration_s": 0.0})
bad_timer = bundle.replace_model(
    replace(fs, class_instances=tuple(zero if c.id == cond.id else c for c in fs.class_instances)))
for d in validate(bad_timer):
    print(d.format())
