"""Value flow inside a function and the subgraphs that feed position encoding.

Run: python demos/03_value_flow.py  (writes save_password.dot in the working directory)
"""
from injectgen.code_model import SourceUnit, assemble_input
from injectgen.synth import SAVE_PASSWORD
from injectgen.syntax import parse_function
from injectgen.value_flow import absolute_subgraph, build_vfg, relative_subgraph

ast = parse_function(SAVE_PASSWORD)
inp = assemble_input(SourceUnit("demo", "auth.c", "save_password", SAVE_PASSWORD), ast)
vfg = build_vfg(ast, inp)


def label(i):
    o = vfg.nodes[i]
    return f"{o.name}@{o.line}"


print(len(vfg.nodes), "variable occurrences,", len(vfg.edges), "edges")
for s, d, why in vfg.edges:
    print(f"  {label(s):>14} -> {label(d):<14} {why}")

# everything that can flow into the password passed to strcpy
(pw,) = vfg.find("password", 9)
print("\nabsolute subgraph of", f"{pw.name}@{pw.line}", sorted(f"{o.name}@{o.line}" for o in absolute_subgraph(vfg, pw).nodes))

# the occurrences on flows from BUFSIZE into the NULL test of buf
(buf5,) = vfg.find("buf", 5)
(size3,) = vfg.find("BUFSIZE", 3)
rel = relative_subgraph(vfg, buf5, size3)
print("relative subgraph", sorted(f"{o.name}@{o.line}" for o in rel.nodes))
print("reverse direction:", relative_subgraph(vfg, size3, buf5))

with open("save_password.dot", "w") as fh:
    fh.write(vfg.to_dot())
print("\nwrote save_password.dot")
