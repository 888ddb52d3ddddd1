"""
Scoring the relations against seeded faults
===========================================

Every mutant is a copy of the engine with one small fault. A relation kills
a mutant when some campaign case violates it.
"""
from tapmt.mutants import list_mutants, mutation_campaign

for m in list_mutants()[:5]:
    print(f"{m.id:22}{m.category:18}{m.description}")

###############################################################################
# The equivalence filter drops mutants that behave exactly like the original
# on random probes (20 here), then each survivor faces 100 cases.

result = mutation_campaign(n_cases=100, n_probes=20, workers=4)
print("filtered as equivalent:", [m.id for m in result.equivalent])
print(result.to_table())

###############################################################################
# No single relation is enough. The union beats the best single relation.

mx = result.matrix
best = max(len(mx.killed_by(mr)) for mr in mx.mrs)
print(f"best single relation: {best}, all together: {len(mx.killed_by_any())}")

###############################################################################
# The defect that only MR1 exposes: phases quietly referenced to the end of
# the record instead of t = 0. Appending one point moves that reference.

print({str(mr): mx.kill_count("phase_ref_defect", mr) for mr in mx.mrs})
