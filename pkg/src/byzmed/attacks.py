"""Corruption injectors for one round's gradient matrix.

Two placement models are covered:

* worker-level (classic): whole rows are replaced (Gaussian, Omniscient);
* value-level (generalized): individual coordinates are replaced, with a
  budget per coordinate rather than per worker (BitFlip, Gambler and the
  diagonal worst case used by the counterexamples).

Every attack is a pure function of the spec, the input matrix and an explicit
``numpy.random.Generator``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gradcore import ContractError, as_grad_matrix, as_grad_vector, from_wire, to_wire

ATTACK_KINDS = ("none", "gaussian", "omniscient", "bitflip", "gambler")
SELECTION_POLICIES = ("fixed", "resampled")
DEFAULT_BIT_POSITIONS = (22, 30, 31, 32)
WORST_CASE_MAGNITUDE = 1e20


@dataclass(frozen=True)
class AttackSpec:
    """Which corruption to apply and where.

    Fields not used by ``kind`` are ignored.  ``bit_positions`` are 1-based
    from the least-significant bit, so 32 is the sign bit.
    ``num_servers=None`` lets the simulator supply its own server count.
    """

    kind: str = "none"
    q: int = 0
    sigma: float = 200.0
    scale: float = 1e20
    num_dims: int = 1000
    bit_positions: tuple[int, ...] = DEFAULT_BIT_POSITIONS
    same_worker: bool = False
    num_servers: int | None = None
    target_server: int = 0
    prob: float = 0.0005
    factor: float = -1e20
    byzantine_selection: str = "fixed"

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ContractError(
                f"attack.kind: unknown kind {self.kind!r}; valid kinds are {', '.join(ATTACK_KINDS)}"
            )
        if self.byzantine_selection not in SELECTION_POLICIES:
            raise ContractError(
                f"attack.byzantine_selection: expected one of {SELECTION_POLICIES}, got {self.byzantine_selection!r}"
            )
        object.__setattr__(self, "bit_positions", tuple(int(p) for p in self.bit_positions))
        if self.q < 0:
            raise ContractError(f"attack.q must be >= 0, got {self.q}")
        if self.sigma < 0:
            raise ContractError("attack.sigma must be >= 0")
        if self.num_dims < 0:
            raise ContractError("attack.num_dims must be >= 0")
        if any(not 1 <= p <= 32 for p in self.bit_positions):
            raise ContractError(f"attack.bit_positions must lie in 1..32, got {self.bit_positions}")
        if not 0.0 <= self.prob <= 1.0:
            raise ContractError(f"attack.prob must lie in [0, 1], got {self.prob}")
        if self.num_servers is not None and self.num_servers < 1:
            raise ContractError("attack.num_servers must be >= 1")
        if self.target_server < 0:
            raise ContractError("attack.target_server must be >= 0")


@dataclass
class AttackContext:
    """Per-round knowledge handed to the attacker.

    ``rng`` must be derived from (experiment seed, round) only, so a replay
    with the same inputs corrupts the same values.  ``byzantine`` pins the
    Byzantine worker set for worker-level attacks, overriding the spec's
    selection policy.
    """

    round: int
    rng: np.random.Generator
    correct_matrix: np.ndarray | None = None
    num_servers: int = 1
    byzantine: np.ndarray | None = None


def attack_rng(seed: int, round: int) -> np.random.Generator:
    """Random stream for the attacker in a given round."""
    return np.random.default_rng([seed, round, 1])


def byzantine_workers(spec: AttackSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of the Byzantine workers for worker-level attacks, ascending."""
    if spec.q > n:
        raise ContractError(f"attack.q={spec.q} exceeds the number of workers n={n}")
    if spec.byzantine_selection == "fixed":
        return np.arange(spec.q)
    return np.sort(rng.choice(n, size=spec.q, replace=False))


def bitflip32(w: int, bit_positions) -> int:
    """XOR a 32-bit pattern with the mask selecting the given 1-based bit positions."""
    return int(w) ^ bit_mask(bit_positions)


def bit_mask(bit_positions) -> int:
    mask = 0
    for p in bit_positions:
        if not 1 <= int(p) <= 32:
            raise ContractError(f"bit position {p} outside 1..32")
        mask |= 1 << (int(p) - 1)
    return mask


def flip_values(values, bit_positions) -> np.ndarray:
    """Round to float32, flip the bits on the wire, and decode back to float64."""
    bits = np.atleast_1d(to_wire(values))
    return from_wire(bits ^ np.uint32(bit_mask(bit_positions)))


def partition_dims(d: int, num_servers: int) -> list[range]:
    """Split ``range(d)`` into contiguous, near-equal blocks; earlier blocks get the extra element."""
    if num_servers < 1:
        raise ContractError(f"num_servers must be >= 1, got {num_servers}")
    base, extra = divmod(d, num_servers)
    out, start = [], 0
    for s in range(num_servers):
        size = base + (1 if s < extra else 0)
        out.append(range(start, start + size))
        start += size
    return out


def dimensional_worst_case(m, g_estimate) -> np.ndarray:
    """Corrupt the diagonal: entry ``(i, i)`` becomes a huge value opposing ``g_estimate[i]``.

    Every coordinate carries at most one Byzantine value, yet every row is
    corrupted, which defeats any rule that outputs one of its inputs.
    """
    m = as_grad_matrix(m)
    n, d = m.shape
    g = as_grad_vector(g_estimate, d)
    if n > d:
        raise ContractError(f"diagonal placement needs n <= d, got n={n}, d={d}")
    out = m.copy()
    idx = np.arange(n)
    out[idx, idx] = -WORST_CASE_MAGNITUDE * np.sign(g[:n]) * np.maximum(np.abs(g[:n]), 1.0)
    return out


def apply_attack(spec: AttackSpec, ctx: AttackContext, m) -> np.ndarray:
    """Return a corrupted copy of ``m``; the input is never modified."""
    m = as_grad_matrix(m)
    n, d = m.shape
    kind = spec.kind
    if kind == "none":
        return m.copy()
    out = m.copy()

    if kind in ("gaussian", "omniscient"):
        if ctx.byzantine is not None:
            byz = np.sort(np.asarray(ctx.byzantine, dtype=int))
        else:
            byz = byzantine_workers(spec, n, ctx.rng)
        if kind == "gaussian":
            out[byz] = ctx.rng.normal(0.0, spec.sigma, size=(byz.size, d))
        else:
            correct = np.ones(n, dtype=bool)
            correct[byz] = False
            known = m if ctx.correct_matrix is None else as_grad_matrix(ctx.correct_matrix)
            out[byz] = -spec.scale * known[correct].sum(axis=0)
        return out

    if kind == "bitflip":
        cols = np.arange(min(spec.num_dims, d))
        victims = np.zeros_like(cols) if spec.same_worker else cols % n
        out[victims, cols] = flip_values(m[victims, cols], spec.bit_positions)
        return out

    if kind == "gambler":
        servers = spec.num_servers if spec.num_servers is not None else ctx.num_servers
        if spec.target_server >= servers:
            raise ContractError(
                f"attack.target_server={spec.target_server} out of range for {servers} servers"
            )
        block = partition_dims(d, servers)[spec.target_server]
        hit = ctx.rng.random((n, len(block))) < spec.prob
        sub = out[:, block.start:block.stop]
        sub[hit] *= spec.factor
        return out

    raise ContractError(f"unknown attack kind {kind!r}")
