"""
Learning-rate schedules
=======================

Two policies are available. ``poly`` decays linearly (or with a power) to
zero. ``onecycle`` warms up over the first 30% of training and then anneals,
with momentum moving the opposite way.
"""
from layerkit import sched

for name in sched.POLICIES:
    table = sched.tabulate(name, 11)
    print(name)
    for pt in table:
        bar = "#" * round(pt.learning_rate * 4000)
        print(f"  f={pt.fraction:.1f} lr={pt.learning_rate:.5f} m={pt.momentum:.2f} {bar}")

###############################################################################
# A cosine shape keeps the same endpoints but curves between them.

print([round(sched.onecycle(f / 10, shape="cosine")[0], 5) for f in range(11)])
