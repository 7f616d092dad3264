"""
Training a classifier while workers misbehave
=============================================

Logistic regression on synthetic data with 20 workers and six Byzantine ones
sending Gaussian noise with standard deviation 200.  A shorter run than the
acceptance suite, but the picture is the same: the mean is wrecked, the
robust rules barely notice.
"""

from byzmed import AggregatorSpec, AttackSpec, ExperimentConfig, ProblemSpec, train

problem = ProblemSpec("logistic", {"n_samples": 2000, "n_features": 20})
attack = AttackSpec("gaussian", q=6, sigma=200.0)

built = problem.build()
for kind in ("mean", "krum", "geomed", "marmed", "meamed"):
    config = ExperimentConfig(n_workers=20, rounds=200, aggregator=AggregatorSpec(kind, q=6),
                              attack=attack, problem=problem, eval_every=50)
    metrics = train(config, built).metrics
    curve = "  ".join(f"{m.eval_metric:.3f}" for m in metrics)
    print(f"{kind:>7}: accuracy at rounds 50..200: {curve}")

###############################################################################
# Coordinate-level attacks separate the rules further.  Bit flips corrupt one
# value in every coordinate, so every worker vector is poisoned and the rules
# that pick or average whole vectors suffer.

attack = AttackSpec("bitflip", num_dims=1000)
for kind in ("krum", "geomed", "marmed", "meamed"):
    config = ExperimentConfig(n_workers=20, rounds=200, aggregator=AggregatorSpec(kind, q=8),
                              attack=attack, problem=problem, eval_every=200)
    print(f"{kind:>7}: final accuracy under bit flips {train(config, built).metrics[-1].eval_metric:.3f}")
