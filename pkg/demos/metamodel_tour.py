"""
A tour of the ARWFML metamodel
==============================

The language is itself a model: three scene types, each with its own
metaclasses and relationclasses, built from a plain declarative mapping.
"""

from m2ar import arwfml_metamodel

mm = arwfml_metamodel()
print(mm.name, mm.version)

for st in mm.scene_types:
    print()
    print(st.name)
    for mc in st.metaclasses:
        attrs = ", ".join(f"{a.name}:{a.value_kind.value}{'!' if a.required else ''}" for a in mc.attributes)
        ports = "".join(f"  [port {p.name}]" for p in mc.ports)
        print(f"  {mc.name}({attrs}){ports}")
    for rc in st.relationclasses:
        fr, tr = rc.from_role, rc.to_role
        bound = lambda n: "unbounded" if n is None else n
        print(f"  {rc.name}: {sorted(fr.allowed_endpoint_types)} -> {sorted(tr.allowed_endpoint_types)}"
              f"  (per source: {bound(fr.max)}, per target: {bound(tr.max)})")
