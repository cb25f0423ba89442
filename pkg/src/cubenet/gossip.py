"""Cycle-driven gossip simulation over a built topology.

Each cycle every node picks a random subset of `fanout` distinct
physical neighbors and initiates a message exchange with each; an
exchange may be suppressed by the delay setting, and a completed
exchange counts two forwarded messages (the push and the pull reply).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SpecError
from .topology import Topology


@dataclass(frozen=True)
class GossipConfig:
    cycles: int = 5000
    cycle_len: int = 100  # time units per cycle; bookkeeping only
    fanout: int = 4
    delay_prob: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.fanout < 1:
            raise SpecError("fanout must be at least 1")
        if not 0.0 <= self.delay_prob <= 1.0:
            raise SpecError("delay_prob must lie in [0,1]")
        if self.cycles < 1:
            raise SpecError("need at least one cycle")


@dataclass
class GossipMetrics:
    forwarded_per_cycle: np.ndarray
    total_forwarded: int
    in_degree_histogram: np.ndarray  # per node: times selected as exchange partner
    per_node_forwarded: np.ndarray

    def __post_init__(self):
        if int(self.forwarded_per_cycle.sum()) != self.total_forwarded:
            raise SpecError("per-cycle series does not sum to the total")


def run_gossip(topology: Topology, config: GossipConfig) -> GossipMetrics:
    """Deterministic (given seed) cycle loop.

    Nodes with degree below the fanout use their whole neighbor set.
    Suppression is applied per exchange; the surviving partners of a
    node's cycle are a uniform subset of its neighbors, so suppression
    is drawn first and partners second.
    """
    n = topology.n_nodes
    adj = [np.array(a, dtype=np.int64) for a in topology.adjacency()]
    degrees = np.array([len(a) for a in adj])
    if degrees.min() < 1:
        raise SpecError("gossip requires every node to have at least one neighbor")
    attempts = np.minimum(config.fanout, degrees)

    rng = np.random.default_rng(np.random.SeedSequence((config.seed, n, config.cycles)))
    forwarded_per_cycle = np.zeros(config.cycles, dtype=np.int64)
    in_degree = np.zeros(n, dtype=np.int64)
    per_node = np.zeros(n, dtype=np.int64)

    for cycle in range(config.cycles):
        if config.delay_prob > 0.0:
            successes = rng.binomial(attempts, 1.0 - config.delay_prob)
        else:
            successes = attempts
        forwarded_per_cycle[cycle] = 2 * int(successes.sum())
        for u in range(n):
            s = int(successes[u])
            if s == 0:
                continue
            neigh = adj[u]
            deg = len(neigh)
            if s == deg:
                partners = neigh
            else:
                # partial Fisher-Yates: uniform s-subset, deterministic order
                for j in range(s):
                    r = int(rng.integers(j, deg))
                    neigh[j], neigh[r] = neigh[r], neigh[j]
                partners = neigh[:s]
            per_node[u] += s  # pushes
            np.add.at(per_node, partners, 1)  # pull replies
            np.add.at(in_degree, partners, 1)

    return GossipMetrics(
        forwarded_per_cycle=forwarded_per_cycle,
        total_forwarded=int(forwarded_per_cycle.sum()),
        in_degree_histogram=in_degree,
        per_node_forwarded=per_node,
    )


@dataclass(frozen=True)
class SweepRow:
    label: str
    n_nodes: int
    mean_total: float
    per_seed_totals: tuple[int, ...]


def sweep_sizes(
    topologies: list[tuple[str, Topology]],
    config: GossipConfig,
    seeds=(0, 1, 2),
) -> list[SweepRow]:
    """Run the gossip simulation per topology, averaging totals over seeds."""
    rows = []
    for label, topo in topologies:
        totals = []
        for seed in seeds:
            cfg = GossipConfig(
                cycles=config.cycles,
                cycle_len=config.cycle_len,
                fanout=config.fanout,
                delay_prob=config.delay_prob,
                seed=seed,
            )
            totals.append(run_gossip(topo, cfg).total_forwarded)
        rows.append(SweepRow(label, topo.n_nodes, float(np.mean(totals)), tuple(totals)))
    return rows


def linear_fit_r2(xs, ys) -> float:
    """R^2 of the least-squares line through (xs, ys)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    coeffs = np.polyfit(xs, ys, 1)
    pred = np.polyval(coeffs, xs)
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0
    return 1.0 - ss_res / ss_tot
