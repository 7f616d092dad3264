"""
Robust aggregation rules on a poisoned gradient matrix
======================================================

Twenty workers send noisy copies of the same gradient.  Six of them are
replaced by one huge vector pointing the other way, and we compare what each
rule hands back to the server.
"""

import numpy as np

from byzmed import AggregatorSpec, aggregate

rng = np.random.default_rng(0)
g = np.array([1.0, -2.0, 0.5, 3.0])
honest = g + 0.3 * rng.standard_normal((20, g.size))

# the six Byzantine rows all send the negated sum of the honest ones, scaled up
poisoned = honest.copy()
poisoned[:6] = -1e6 * honest[6:].sum(axis=0)

for kind in ("mean", "medoid", "krum", "multikrum", "geomed", "marmed", "meamed"):
    out = aggregate(AggregatorSpec(kind, q=6), poisoned)
    cos = out @ g / (np.linalg.norm(out) * np.linalg.norm(g))
    print(f"{kind:>10}: {np.array2string(out, precision=3):<40} cos to g = {cos:+.3f}")

###############################################################################
# The mean is dragged along by the attackers.  Every other rule stays close to
# g, because six identical outliers cannot outvote fourteen honest rows.
#
# Coordinate-wise corruption is a different story.  Put one bad value on the
# diagonal: every row now carries a corrupted coordinate, yet each column has
# only one.

from byzmed import dimensional_worst_case

diag = dimensional_worst_case(honest[:4], g)
print(diag)
# each column holds one bad value, so MeaMed trims q=1 per coordinate
for kind, q in (("medoid", 0), ("krum", 0), ("marmed", 0), ("meamed", 1)):
    out = aggregate(AggregatorSpec(kind, q=q), diag)
    print(f"{kind:>10}: <out, g> = {out @ g:+.3g}")

###############################################################################
# Medoid and Krum must return one of the rows, and every row is poisoned, so
# their inner product with g is hugely negative.  The per-coordinate rules
# discard the single bad value in each column.
