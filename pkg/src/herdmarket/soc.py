"""Information dynamics: global driving, threshold toppling, herding cascades.

Driving pushes every agent's information level toward a shared threshold;
an agent at or above the threshold resets to zero and passes a dissipated
share to its network neighbors, possibly triggering a cascade in which the
newly activated traders copy the initiator's trading status. Random traders
are exempt: they reset without transmitting and are never imitated into.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field as dc_field

import numpy as np

from .agents import Status, TraderKind
from .network import SmallWorldNet


class CascadeOverflowError(RuntimeError):
    """Toppling count exceeded the configured cap (near-conservative runaway)."""


@dataclass
class InfoField:
    """Per-agent information levels plus the global threshold and dissipation."""

    levels: np.ndarray
    i_threshold: float
    alpha: float

    def max_level(self) -> float:
        return float(self.levels.max())


@dataclass(frozen=True)
class AvalancheReport:
    """One cascade: who started it, what status spread, how far it went."""

    step: int
    initiators: tuple[int, ...]
    imitated_status: Status
    size: int
    participants: tuple[int, ...] = dc_field(default_factory=tuple)

    @property
    def initiator_count(self) -> int:
        return len(self.initiators)


def drive(field: InfoField, rng: np.random.Generator) -> InfoField:
    """Add an independent uniform draw from [0, threshold - current max) to
    every agent. Once the max sits at the threshold the interval is empty
    and this is a no-op."""
    gap = field.i_threshold - field.max_level()
    if gap > 0.0:
        field.levels += rng.uniform(0.0, gap, field.levels.size)
    return field


def topple(field: InfoField, k: int, net: SmallWorldNet) -> InfoField:
    """Reset agent k to zero, handing alpha/N_nn of its level to each neighbor."""
    level = float(field.levels[k])
    if level < field.i_threshold:
        raise ValueError(f"agent {k} is below threshold ({level} < {field.i_threshold})")
    nbrs = net.adjacency[k]
    amount = field.alpha * level / len(nbrs)
    field.levels[k] = 0.0
    for j in nbrs:
        field.levels[j] += amount
    return field


def relax(
    field: InfoField,
    net: SmallWorldNet,
    statuses: np.ndarray,
    kinds: np.ndarray,
    rng: np.random.Generator,
    cap: int,
    step: int = 0,
) -> tuple[InfoField, list[AvalancheReport]]:
    """Resolve all super-threshold agents; returns one report per cascade.

    Super-threshold random traders reset silently. The remaining initiators
    fire in a random order, each spreading its own status breadth-first
    (neighbors visited in sorted-id order). An agent's status is overwritten
    on its first toppling within a cascade; re-topplings only re-transmit.
    A pending initiator swallowed by an earlier cascade is credited to that
    cascade. Mutates `field.levels` and `statuses` in place.
    """
    levels = field.levels
    i_th = field.i_threshold
    alpha = field.alpha
    adjacency = net.adjacency
    random_kind = int(TraderKind.RANDOM)

    hot = np.nonzero(levels >= i_th)[0]
    if hot.size == 0:
        return field, []

    random_hot = hot[kinds[hot] == random_kind]
    levels[random_hot] = 0.0
    initiators = hot[kinds[hot] != random_kind]
    if initiators.size == 0:
        return field, []

    order = rng.permutation(initiators)
    pending = set(int(i) for i in order)
    reports: list[AvalancheReport] = []
    total_topples = 0

    for k0 in order:
        k0 = int(k0)
        if k0 not in pending:
            continue  # absorbed by an earlier cascade
        pending.discard(k0)
        cascade_status = Status(int(statuses[k0]))
        absorbed = [k0]
        overwritten: set[int] = set()
        size = 0
        queue: deque[int] = deque([k0])
        while queue:
            k = queue.popleft()
            if levels[k] < i_th:
                continue
            size += 1
            total_topples += 1
            if total_topples > cap:
                raise CascadeOverflowError(
                    f"step {step}: toppling count exceeded cap {cap} "
                    f"(alpha={alpha}); aborting run"
                )
            if k != k0:
                if k in pending:
                    pending.discard(k)
                    absorbed.append(k)
                if k not in overwritten:
                    overwritten.add(k)
                    statuses[k] = cascade_status
            amount = alpha * float(levels[k]) / len(adjacency[k])
            levels[k] = 0.0
            for j in adjacency[k]:
                if kinds[j] == random_kind:
                    levels[j] += amount
                    if levels[j] >= i_th:
                        levels[j] = 0.0
                else:
                    levels[j] += amount
                    if levels[j] >= i_th:
                        queue.append(j)
        reports.append(
            AvalancheReport(
                step=step,
                initiators=tuple(absorbed),
                imitated_status=cascade_status,
                size=size,
                participants=tuple(sorted(overwritten)),
            )
        )
    return field, reports
