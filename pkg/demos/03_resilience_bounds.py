"""
When is a rule guaranteed to point downhill?
============================================

Each rule comes with a factor eta(n, q).  If eta * sqrt(d) * sigma < ||g||,
the aggregate keeps a positive inner product with the true gradient, and
sin(alpha) = eta * sqrt(d) * sigma / ||g|| bounds the angle between them.
"""

import math

import numpy as np

from byzmed import ETA, AggregatorSpec, check_condition_i, random_dimensional_adversary, resilience_bound

n, q, d = 20, 6, 10
for rule, eta in ETA.items():
    print(f"{rule:>7}: eta(20, 6) = {eta(n, q):8.4f}")

###############################################################################
# With sigma = 0.05 and g the all-ones vector, MarMed and MeaMed are inside
# their guarantee.  A Monte-Carlo estimate of <E[Aggr], g> under six random
# corrupted values per coordinate agrees.

g = np.ones(d)
sigma = 0.05
adversary = random_dimensional_adversary(q, magnitude=1e30)
for rule in ("marmed", "meamed"):
    bound = resilience_bound(rule, n, q, d, sigma, float(np.linalg.norm(g)))
    est = check_condition_i(AggregatorSpec(rule, q=q), adversary, g, sigma, n, trials=1000)
    print(f"{rule}: sin(alpha) = {bound.sin_alpha:.3f}, <E[Aggr], g> = {est.mean:.3f} "
          f"+- {1.96 * est.stderr:.3f}, ||g||^2 = {est.gnorm_sq:.0f}")

###############################################################################
# The mean has no such guarantee: a single worker that sends -g minus the sum
# of everyone else turns the average into -g/n.

from byzmed import agg_mean, build_mean_counterexample

out = agg_mean(build_mean_counterexample(g, n))
print("mean under one attacker:", out[:3], "... = -g/n with n =", n)
print("sqrt(10) ratio between MeaMed and MarMed:", ETA["meamed"](n, q) / ETA["marmed"](n, q), math.sqrt(10))
