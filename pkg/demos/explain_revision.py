"""
Diagnosing an over-constrained model
====================================

The pre-revision iron model carries a floor on the bound-mRNA
degradation rate that contradicts the ordering required by the
translation data.  Propagation proves the whole system empty; the
conflict explainer then names the smallest sets of constraints whose
removal restores consistency, which is exactly the information needed
to decide what to revise.
"""

from steadyscan import load_model, min_conflict_sets, propagate_fixpoint
from steadyscan.explain import render_report

pre = load_model("fixtures/pre_revision.model")

contracted = propagate_fixpoint(pre.constraints, pre.domain_box())
print(f"pre-revision model: contracted box empty = {contracted.is_empty}")

# which constraints have to give?  every reported set is minimal: drop
# any one member and the remainder is consistent again
report = min_conflict_sets(pre.constraints, pre.domain_box())
print()
print(render_report(report))

# the offender carries a reliability tag straight from the model file
tagged = {c.cid: c.tags for c in pre.constraints}
for s in report.minimal_sets:
    for cid in sorted(s):
        print(f"  candidate for revision: {cid}  tags={sorted(tagged[cid])}")

# the shipped iron_v2 model is the post-revision version: same system
# with the low-reliability floor removed and one interval widened
post = load_model("models/iron_v2.model")
contracted = propagate_fixpoint(post.constraints, post.domain_box())
print()
print(f"post-revision model: contracted box empty = {contracted.is_empty}")
