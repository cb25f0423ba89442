"""Simplified leader-based consortium consensus round simulator.

Abstracts the consensus protocol to propose-broadcast plus
vote-collect over a bandwidth-limited store-and-forward network: the
leader broadcasts the block along a breadth-first spanning tree (one
outgoing transfer at a time per node) and votes aggregate back along
the reverse tree.  No cryptography, no Byzantine behavior.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, SpecError
from .topology import Topology


@dataclass(frozen=True)
class ConsensusConfig:
    tx_rate: float = 60000.0  # transactions per second
    tx_size: int = 24  # bytes
    block_cap: int = 10000  # transactions per block
    max_block_bytes: int = 235_000_000
    link_bandwidth: float = 10e9  # bits per second
    link_latency: float = 0.0  # seconds per hop
    leader_policy: str = "random"  # "random" | "hub" | "rotate:<n>"
    rounds: int = 200
    seed: int = 0
    header_bytes: int = 512
    vote_bytes: int = 64  # per node, aggregated along the reverse tree

    def __post_init__(self):
        if self.block_cap * self.tx_size > self.max_block_bytes:
            raise SpecError("block_cap * tx_size exceeds max_block_bytes")
        if min(self.tx_rate, self.link_bandwidth) <= 0 or self.rounds < 1:
            raise SpecError("rates must be positive and rounds >= 1")
        if self.link_latency < 0:
            raise SpecError("latency must be non-negative")
        policy = self.leader_policy
        if policy not in ("random", "hub") and not policy.startswith("rotate:"):
            raise SpecError(f"unknown leader policy {policy!r}")
        if policy.startswith("rotate:") and int(policy.split(":", 1)[1]) < 1:
            raise SpecError("rotation period must be >= 1")


@dataclass
class ThroughputReport:
    tx_per_second: float  # overall committed / elapsed
    round_rate_std: float  # std of per-round commit rates
    per_round_time: list[float]
    per_round_committed: list[int]
    leader_history: list[int]
    elapsed_s: float


def _bfs_children(topology: Topology, source: int) -> list[list[int]]:
    adj = topology.adjacency()
    n = topology.n_nodes
    children: list[list[int]] = [[] for _ in range(n)]
    seen = [False] * n
    seen[source] = True
    queue = deque([source])
    reached = 1
    while queue:
        u = queue.popleft()
        for v in adj[u]:  # adjacency lists are sorted: deterministic tree
            if not seen[v]:
                seen[v] = True
                children[u].append(v)
                queue.append(v)
                reached += 1
    if reached != n:
        raise ConstructionError("broadcast source cannot reach every node")
    return children


def broadcast_time(topology: Topology, source: int, payload_bytes: float, config: ConsensusConfig) -> float:
    """Time until the last node holds the payload.

    Each tree edge costs payload*8/bandwidth + latency, and a node
    serializes its outgoing transfers, so its i-th child receives i
    transfer times after the node itself finished receiving.
    """
    children = _bfs_children(topology, source)
    transfer = payload_bytes * 8.0 / config.link_bandwidth + config.link_latency
    arrival = [0.0] * topology.n_nodes
    order = deque([source])
    latest = 0.0
    while order:
        u = order.popleft()
        for idx, c in enumerate(children[u], start=1):
            arrival[c] = arrival[u] + idx * transfer
            latest = max(latest, arrival[c])
            order.append(c)
    return latest


def gather_time(topology: Topology, root: int, config: ConsensusConfig) -> float:
    """Vote collection along the reverse broadcast tree.

    Every node contributes `vote_bytes`; a node waits for each child's
    aggregate (vote_bytes * subtree size) and receives from its
    children one at a time.
    """
    children = _bfs_children(topology, root)

    def finish(u: int) -> tuple[float, int]:
        t = 0.0
        size = 1
        for c in children[u]:
            child_done, child_size = finish(c)
            transfer = config.vote_bytes * child_size * 8.0 / config.link_bandwidth
            transfer += config.link_latency
            t = max(t, child_done) + transfer
            size += child_size
        return t, size

    import sys

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, topology.n_nodes + 100))
    try:
        done, size = finish(root)
    finally:
        sys.setrecursionlimit(old)
    assert size == topology.n_nodes
    return done


def _leader_sequence(config: ConsensusConfig, n: int):
    if config.leader_policy == "hub":
        def pick(r: int, rng) -> int:
            return 0
    elif config.leader_policy == "random":
        def pick(r: int, rng) -> int:
            return int(rng.integers(n))
    else:
        period = int(config.leader_policy.split(":", 1)[1])

        def pick(r: int, rng) -> int:
            return (r // period) % n
    return pick


def run_consensus(topology: Topology, config: ConsensusConfig) -> ThroughputReport:
    """Round loop: pick leader, pack pending transactions up to the block
    cap, broadcast the block, collect votes, commit."""
    n = topology.n_nodes
    if n < 4:
        raise SpecError("consensus simulation needs at least 4 nodes")
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, n)))
    pick = _leader_sequence(config, n)

    elapsed = 0.0
    committed = 0
    per_round_time: list[float] = []
    per_round_committed: list[int] = []
    leaders: list[int] = []
    for r in range(config.rounds):
        leader = pick(r, rng)
        leaders.append(leader)
        pool = config.tx_rate * elapsed - committed
        block_tx = min(config.block_cap, int(pool))
        block_bytes = config.header_bytes + block_tx * config.tx_size
        round_time = broadcast_time(topology, leader, block_bytes, config)
        round_time += gather_time(topology, leader, config)
        elapsed += round_time
        committed += block_tx
        per_round_time.append(round_time)
        per_round_committed.append(block_tx)

    rates = [c / t for c, t in zip(per_round_committed, per_round_time)]
    return ThroughputReport(
        tx_per_second=committed / elapsed,
        round_rate_std=float(np.std(rates)),
        per_round_time=per_round_time,
        per_round_committed=per_round_committed,
        leader_history=leaders,
        elapsed_s=elapsed,
    )


@dataclass(frozen=True)
class ConsensusSweepRow:
    kind: str
    n_nodes: int
    tx_per_second: float


def sweep_consensus(
    topologies: list[tuple[str, Topology]],
    config: ConsensusConfig,
) -> list[ConsensusSweepRow]:
    """Throughput per (kind, size); use cross-size std per kind to judge
    stability."""
    return [
        ConsensusSweepRow(label, topo.n_nodes, run_consensus(topo, config).tx_per_second)
        for label, topo in topologies
    ]


def cross_size_std(rows: list[ConsensusSweepRow], kind: str) -> float:
    values = [r.tx_per_second for r in rows if r.kind == kind]
    if not values:
        raise SpecError(f"no sweep rows for kind {kind!r}")
    return float(np.std(values))
