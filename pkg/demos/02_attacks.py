"""
What the attacks do to the wire
===============================

Bit flips act on the single-precision pattern a worker would transmit.  Flipping
bits 22, 30, 31 and 32 (counted from 1 at the least significant bit) turns a
small gradient entry into an enormous one of the opposite sign.
"""

import numpy as np

from byzmed import AttackContext, AttackSpec, apply_attack, attack_rng, bitflip32, from_wire, to_wire

w = to_wire(1.0)
flipped = bitflip32(w, {22, 30, 31, 32})
print(f"1.0 -> 0x{w:08X} -> 0x{flipped:08X} -> {from_wire(flipped):.4g}")

###############################################################################
# Applied to a round, the attack hits one worker per coordinate, rotating over
# the workers, so no single row is "the Byzantine one".

m = np.ones((4, 6))
ctx = AttackContext(round=0, rng=attack_rng(seed=0, round=0))
print(apply_attack(AttackSpec("bitflip", num_dims=6), ctx, m))

###############################################################################
# The gambler attack splits the coordinates over virtual parameter servers and
# corrupts values of one server at random.  With prob=1 every value of the
# target block is multiplied by the factor.

spec = AttackSpec("gambler", num_servers=3, target_server=1, prob=1.0, factor=-1e20)
print(apply_attack(spec, ctx, np.arange(12.0).reshape(2, 6)))

###############################################################################
# Replaying the same seed and round reproduces the corruption exactly.

spec = AttackSpec("gambler", num_servers=1, prob=0.01)
a = apply_attack(spec, AttackContext(round=5, rng=attack_rng(1, 5)), np.ones((20, 500)))
b = apply_attack(spec, AttackContext(round=5, rng=attack_rng(1, 5)), np.ones((20, 500)))
print("corrupted values:", int((a != 1).sum()), "identical replay:", np.array_equal(a, b))
