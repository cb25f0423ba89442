"""Partition tolerance analysis.

Implements the discrete-time count chain over the number of invalid
links, its steady state (GTH state-elimination), hybrid exact/sampled
estimation of the partition tolerance probability, the minimum-repair
strategy (repair everything up to a class MTTR threshold), and the
hierarchical aggregation over recursion paths.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import NumericError, ResourceLimitError, SpecError
from .topology import LinkClass, RecursionSpec, Topology, build_complete_hypercube
from .unionfind import UnionFind

ENUM_CAP_DEFAULT = 2_000_000
TAIL_EPS_DEFAULT = 1e-12
BRUTEFORCE_MAX_LINKS = 22
UNDERFLOW_FLOOR = 1e-300


def default_quorum(n_nodes: int) -> int:
    """Minimum good-partition size: floor(N/2) + 1."""
    return n_nodes // 2 + 1


@dataclass(frozen=True)
class FailureParams:
    """Analysis parameters: quorum size plus optional per-class rate overrides.

    `rates` maps class_id -> (lambda, mu) per hour; classes not listed
    use the rates carried by the topology's link classes.
    """

    k: int | None = None
    rates: dict[int, tuple[float, float]] | None = None

    def __post_init__(self):
        for cid, (lam, mu) in (self.rates or {}).items():
            if not (0.0 < lam < 1.0 and 0.0 < mu <= 1.0):
                raise SpecError(
                    f"class {cid}: lambda must lie in (0,1) and mu in (0,1], got ({lam}, {mu})"
                )

    def quorum(self, topology: Topology) -> int:
        k = default_quorum(topology.n_nodes) if self.k is None else self.k
        if not 1 <= k <= topology.n_nodes:
            raise SpecError(f"quorum k={k} outside [1, N={topology.n_nodes}]")
        return k

    def rate_of(self, topology: Topology, class_id: int) -> tuple[float, float]:
        if self.rates and class_id in self.rates:
            return self.rates[class_id]
        c = topology.classes[class_id]
        return c.lam, c.mu


@dataclass(frozen=True)
class CountChain:
    """(L+1)-state chain over the number of invalid links, single class."""

    L: int
    lam: float
    mu: float

    def __post_init__(self):
        if self.L < 1:
            raise SpecError("count chain needs at least one link")
        if not (0.0 < self.lam < 1.0 and 0.0 < self.mu <= 1.0):
            raise SpecError("lambda must lie in (0,1) and mu in (0,1]")

    @property
    def down_prob(self) -> float:
        return self.lam / (self.lam + self.mu)


@dataclass
class StationaryDist:
    pi: np.ndarray
    residual: float = 0.0

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        if np.any(pi < 0):
            raise NumericError("stationary distribution has negative entries")
        if abs(pi.sum() - 1.0) > 1e-10:
            raise NumericError(f"stationary distribution sums to {pi.sum()}")
        self.pi = pi


@dataclass(frozen=True)
class StateEstimate:
    """Estimate of P{wrong partition | i invalid links} for one state."""

    i: int
    pi_i: float
    p_wrong: float
    stderr: float
    n_samples: int
    method: str  # "exact" | "sampled" | "skipped"
    mean_repair_h: float | None = None


@dataclass
class PartitionReport:
    p: float
    stderr: float
    t: float | None
    per_state: list[StateEstimate]
    method: str
    k: int
    underflow: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise NumericError(f"partition tolerance probability {self.p} outside [0,1]")
        if self.t is not None and self.t < 0:
            raise NumericError("negative repair time")


def _log_binom_pmf(k: np.ndarray, n: int, p: float) -> np.ndarray:
    logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    return logc + k * math.log(p) + (n - k) * math.log1p(-p)


def binom_pmf_vector(n: int, p: float) -> np.ndarray:
    """Stable Binomial(n, p) pmf over 0..n; tiny masses flushed to 0."""
    if n == 0:
        return np.array([1.0])
    if p <= 0.0:
        out = np.zeros(n + 1)
        out[0] = 1.0
        return out
    if p >= 1.0:
        out = np.zeros(n + 1)
        out[n] = 1.0
        return out
    logpmf = _log_binom_pmf(np.arange(n + 1, dtype=float), n, p)
    out = np.exp(logpmf)
    out[out < UNDERFLOW_FLOOR] = 0.0
    return out


def transition_prob(i: int, j: int, L: int, lam: float, mu: float) -> float:
    """P(count i -> count j) in one time unit, log-space sum over the
    number m of invalid links left unrepaired during the step."""
    if not (0 <= i <= L and 0 <= j <= L):
        raise SpecError(f"states ({i},{j}) out of range for L={L}")
    m_lo = max(i + j - L, 0)
    m_hi = min(i, j)
    if m_hi < m_lo:
        return 0.0
    m = np.arange(m_lo, m_hi + 1, dtype=float)
    terms = np.full(m.shape, -np.inf)
    # repairs: i-m of i invalid links repaired (prob mu each)
    lg = gammaln(i + 1) - gammaln(m + 1) - gammaln(i - m + 1)
    if mu < 1.0:
        terms = lg + (i - m) * math.log(mu) + m * math.log1p(-mu)
    else:
        terms = np.where(m == 0, lg, -np.inf)
    # failures: j-m of L-i working links fail (prob lam each)
    f = j - m
    lg2 = gammaln(L - i + 1) - gammaln(f + 1) - gammaln(L - i - f + 1)
    terms = terms + lg2 + f * math.log(lam) + (L - i - f) * math.log1p(-lam)
    value = float(np.exp(logsumexp(terms)))
    return 0.0 if value < UNDERFLOW_FLOOR else value


def transition_matrix(chain: CountChain) -> np.ndarray:
    """Full row-stochastic transition matrix of the count chain.

    Row i is the convolution of the kept-invalid distribution
    Binomial(i, 1-mu) with the new-failure distribution
    Binomial(L-i, lambda); identical to the per-entry formula.
    """
    L = chain.L
    if L > 5000:
        raise ResourceLimitError(f"dense transition matrix for L={L} refused")
    P = np.zeros((L + 1, L + 1))
    for i in range(L + 1):
        keep = binom_pmf_vector(i, 1.0 - chain.mu)
        new = binom_pmf_vector(L - i, chain.lam)
        P[i, :] = np.convolve(keep, new)
    return P


def _gth_stationary(P: np.ndarray) -> np.ndarray:
    """Grassmann-Taksar-Heyman state elimination; no subtractions."""
    A = P.astype(float).copy()
    n = A.shape[0]
    scale = np.ones(n)
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        if s <= 0.0:
            raise NumericError(f"GTH elimination hit a zero pivot at state {k}", residual=s)
        scale[k] = s
        A[k, :k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    x = np.zeros(n)
    x[0] = 1.0
    for k in range(1, n):
        x[k] = float(x[:k] @ A[:k, k]) / scale[k]
    return x / x.sum()


def stationary(chain: CountChain) -> StationaryDist:
    """Steady state of the count chain via GTH elimination.

    Agrees with the closed form Binomial(L, lambda/(lambda+mu)): each
    link is an independent two-state chain with stationary down
    probability lambda/(lambda+mu).
    """
    P = transition_matrix(chain)
    pi = _gth_stationary(P)
    residual = float(np.max(np.abs(pi @ P - pi)))
    if residual > 1e-8:
        raise NumericError("stationary solve did not converge", residual=residual)
    return StationaryDist(pi, residual)


def binomial_stationary(chain: CountChain) -> np.ndarray:
    """Closed-form steady state (independent-link product chain)."""
    return binom_pmf_vector(chain.L, chain.down_prob)


def _single_class_id(topology: Topology) -> int | None:
    used = {link.class_id for link in topology.links}
    return used.pop() if len(used) == 1 else None


def _edge_connectivity(topology: Topology) -> int:
    """Exact edge connectivity, cached on the topology (small graphs only)."""
    cached = topology.meta.get("_edge_connectivity")
    if cached is not None:
        return cached
    if topology.n_nodes > 2048:
        value = 0  # unknown; callers treat 0 as "no certified bound"
    else:
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(range(topology.n_nodes))
        g.add_edges_from((lk.u, lk.v) for lk in topology.links)
        value = nx.edge_connectivity(g)
    topology.meta["_edge_connectivity"] = value
    return value


def min_repair_time(topology: Topology, failed_links, k: int | None = None) -> float:
    """Least parallel-repair time restoring a component of size >= k.

    Repairs run in parallel, one MTTR per link; the optimal plan under
    the big-partitions-first strategy repairs every invalid link whose
    class MTTR lies below a threshold, so the answer is the smallest
    class-MTTR threshold that restores a good partition.
    """
    from .topology import max_component_size, resolve_failed_links

    if k is None:
        k = default_quorum(topology.n_nodes)
    failed = resolve_failed_links(topology, failed_links)
    if max_component_size(topology, failed) >= k:
        return 0.0
    thresholds = sorted({topology.classes[topology.links[i].class_id].mttr_h for i in failed})
    for T in thresholds:
        still_failed = {
            i for i in failed if topology.classes[topology.links[i].class_id].mttr_h > T
        }
        if max_component_size(topology, still_failed) >= k:
            return T
    raise NumericError("repairing all failed links did not restore a good partition")


def _repair_time_enum(topology: Topology, failed: set[int], k: int, mttr_of: list[float]) -> float:
    # Same threshold rule, but on a pre-resolved index set (hot path).
    thresholds = sorted({mttr_of[i] for i in failed})
    from .topology import max_component_size

    for T in thresholds:
        still = {i for i in failed if mttr_of[i] > T}
        if max_component_size(topology, still) >= k:
            return T
    raise NumericError("repair threshold search failed")


def conditional_wrong_prob(
    topology: Topology,
    i: int,
    k: int | None = None,
    budget: int = 20000,
    seed: int = 0,
    enum_cap: int = ENUM_CAP_DEFAULT,
    pi_i: float = float("nan"),
    workers: int = 1,
) -> StateEstimate:
    """P{wrong partition | i invalid links}: exact enumeration below the
    cap, Monte Carlo over uniform i-subsets above it.

    A wrong partition is a state whose largest component has fewer than
    k nodes.  Also records the mean minimum repair time over the wrong
    states encountered.
    """
    L = topology.n_links
    N = topology.n_nodes
    if not 0 <= i <= L:
        raise SpecError(f"state {i} out of range for L={L}")
    if k is None:
        k = default_quorum(N)
    mttr_of = [topology.classes[lk.class_id].mttr_h for lk in topology.links]

    if i == 0:
        p0 = 0.0 if N >= k else 1.0
        return StateEstimate(i, pi_i, p0, 0.0, 1, "exact", None)
    if i < _edge_connectivity(topology) and N >= k:
        # Removing fewer links than the edge connectivity cannot
        # disconnect the graph, so the full node set survives.
        return StateEstimate(i, pi_i, 0.0, 0.0, 0, "exact", None)

    n_subsets = math.comb(L, i)
    if n_subsets <= enum_cap:
        wrong = 0
        t_sum = 0.0
        for combo in itertools.combinations(range(L), i):
            failed = set(combo)
            if _max_comp(topology, failed) < k:
                wrong += 1
                t_sum += _repair_time_enum(topology, failed, k, mttr_of)
        p = wrong / n_subsets
        t_mean = (t_sum / wrong) if wrong else None
        return StateEstimate(i, pi_i, p, 0.0, n_subsets, "exact", t_mean)

    rng_streams = [
        np.random.default_rng(np.random.SeedSequence((seed, i, w))) for w in range(workers)
    ]
    shares = [budget // workers + (1 if w < budget % workers else 0) for w in range(workers)]
    wrong = 0
    t_sum = 0.0
    for rng, share in zip(rng_streams, shares):
        for _ in range(share):
            failed = set(rng.choice(L, size=i, replace=False).tolist())
            if _max_comp(topology, failed) < k:
                wrong += 1
                t_sum += _repair_time_enum(topology, failed, k, mttr_of)
    p = wrong / budget
    se = math.sqrt(p * (1.0 - p) / budget)
    t_mean = (t_sum / wrong) if wrong else None
    return StateEstimate(i, pi_i, p, se, budget, "sampled", t_mean)


def _max_comp(topology: Topology, failed: set[int]) -> int:
    uf = UnionFind(topology.n_nodes)
    links = topology.links
    for idx in range(len(links)):
        if idx not in failed:
            lk = links[idx]
            uf.union(lk.u, lk.v)
    return uf.max_component_size()


def partition_tolerance(
    topology: Topology,
    params: FailureParams | None = None,
    budget: int = 20000,
    seed: int = 0,
    enum_cap: int = ENUM_CAP_DEFAULT,
    tail_eps: float = TAIL_EPS_DEFAULT,
    force_sampling: bool = False,
    workers: int = 1,
) -> PartitionReport:
    """Overall partition tolerance probability and average minimum repair time.

    Single-class topologies combine the count chain's steady state with
    per-state conditional estimates (p = 1 - sum_i pi_i * P{wrong|i}).
    Mixed-class topologies sample link states directly, each link down
    with its steady-state probability lambda/(lambda+mu).
    """
    params = params or FailureParams()
    k = params.quorum(topology)
    if topology.n_links == 0:
        p = 1.0 if topology.n_nodes >= k else 0.0
        return PartitionReport(p, 0.0, None if p == 1.0 else 0.0, [], "exact", k)

    cid = _single_class_id(topology)
    if cid is None:
        return _partition_tolerance_multiclass(topology, params, k, budget, seed, workers)

    lam, mu = params.rate_of(topology, cid)
    chain = CountChain(topology.n_links, lam, mu)
    pi = stationary(chain).pi
    per_state: list[StateEstimate] = []
    cap = 0 if force_sampling else enum_cap
    underflow = False
    for i in range(1, topology.n_links + 1):
        if pi[i] < tail_eps:
            if pi[i] > 0:
                underflow = True
            per_state.append(StateEstimate(i, float(pi[i]), 0.0, 0.0, 0, "skipped", None))
            continue
        est = conditional_wrong_prob(
            topology, i, k, budget=budget, seed=seed, enum_cap=cap, pi_i=float(pi[i]),
            workers=workers,
        )
        per_state.append(est)
    wrong_mass = sum(e.pi_i * e.p_wrong for e in per_state if e.method != "skipped")
    var = sum((e.pi_i * e.stderr) ** 2 for e in per_state)
    p = min(max(1.0 - wrong_mass, 0.0), 1.0)
    t_num = sum(
        e.pi_i * e.p_wrong * e.mean_repair_h
        for e in per_state
        if e.mean_repair_h is not None and e.p_wrong > 0
    )
    t = (t_num / wrong_mass) if wrong_mass > 0 else None
    methods = {e.method for e in per_state if e.method != "skipped"}
    method = methods.pop() if len(methods) == 1 else "hybrid"
    return PartitionReport(p, math.sqrt(var), t, per_state, method, k, underflow)


def _partition_tolerance_multiclass(
    topology: Topology,
    params: FailureParams,
    k: int,
    budget: int,
    seed: int,
    workers: int,
) -> PartitionReport:
    L = topology.n_links
    q = np.empty(L)
    for idx, lk in enumerate(topology.links):
        lam, mu = params.rate_of(topology, lk.class_id)
        q[idx] = lam / (lam + mu)
    mttr_of = [topology.classes[lk.class_id].mttr_h for lk in topology.links]

    counts: dict[int, list] = {}  # i -> [n, wrong, t_sum]
    rngs = [np.random.default_rng(np.random.SeedSequence((seed, w))) for w in range(workers)]
    shares = [budget // workers + (1 if w < budget % workers else 0) for w in range(workers)]
    wrong_total = 0
    t_sum_total = 0.0
    for rng, share in zip(rngs, shares):
        for _ in range(share):
            down = rng.random(L) < q
            failed = set(np.flatnonzero(down).tolist())
            i = len(failed)
            rec = counts.setdefault(i, [0, 0, 0.0])
            rec[0] += 1
            if _max_comp(topology, failed) < k:
                rec[1] += 1
                wrong_total += 1
                t = _repair_time_enum(topology, failed, k, mttr_of)
                rec[2] += t
                t_sum_total += t
    p_wrong = wrong_total / budget
    p = 1.0 - p_wrong
    se = math.sqrt(p_wrong * (1.0 - p_wrong) / budget)
    per_state = []
    for i in sorted(counts):
        n, wrong, t_sum = counts[i]
        pw = wrong / n
        per_state.append(
            StateEstimate(
                i, n / budget, pw, math.sqrt(pw * (1 - pw) / n), n, "sampled",
                (t_sum / wrong) if wrong else None,
            )
        )
    t = (t_sum_total / wrong_total) if wrong_total else None
    return PartitionReport(p, se, t, per_state, "sampled", k)


def avg_min_repair_time(
    topology: Topology,
    params: FailureParams | None = None,
    budget: int = 20000,
    seed: int = 0,
    enum_cap: int = ENUM_CAP_DEFAULT,
) -> float | None:
    """Expected minimum repair time over wrong-partition states; None if
    no wrong-partition mass was found within the budget."""
    report = partition_tolerance(topology, params, budget=budget, seed=seed, enum_cap=enum_cap)
    return report.t


def exact_partition_tolerance_bruteforce(
    topology: Topology, params: FailureParams | None = None
) -> tuple[float, float | None]:
    """Exact (p, t) by full enumeration of the 2^L link-state vectors.

    Each link is down with its steady-state probability
    lambda/(lambda+mu); desk-scale oracle, L <= 22 only.
    """
    params = params or FailureParams()
    L = topology.n_links
    if L > BRUTEFORCE_MAX_LINKS:
        raise ResourceLimitError(f"brute force refused for L={L} > {BRUTEFORCE_MAX_LINKS}")
    k = params.quorum(topology)
    q = []
    for lk in topology.links:
        lam, mu = params.rate_of(topology, lk.class_id)
        q.append(lam / (lam + mu))
    mttr_of = [topology.classes[lk.class_id].mttr_h for lk in topology.links]
    wrong_mass = 0.0
    t_mass = 0.0
    for mask in range(2**L):
        weight = 1.0
        failed = set()
        for idx in range(L):
            if mask >> idx & 1:
                weight *= q[idx]
                failed.add(idx)
            else:
                weight *= 1.0 - q[idx]
        if weight == 0.0:
            continue
        if _max_comp(topology, failed) < k:
            wrong_mass += weight
            t_mass += weight * _repair_time_enum(topology, failed, k, mttr_of)
    p = 1.0 - wrong_mass
    t = (t_mass / wrong_mass) if wrong_mass > 0 else None
    return p, t


# -- hierarchical aggregation ------------------------------------------


@dataclass
class DomainEstimate:
    """Per-domain (p, t) values arranged as the recursion tree.

    The root is the single level-1 domain; each node's children are the
    domains it expands into at the next level.
    """

    p: float
    t: float | None
    children: list["DomainEstimate"] = field(default_factory=list)


@dataclass(frozen=True)
class AggregateResult:
    p: float
    t: float | None
    clamped: bool


def recursive_aggregate(tree: DomainEstimate) -> AggregateResult:
    """Combine per-domain values along recursion paths.

    1 - p = sum over every domain of (product of ancestor p) * (1 - p_domain);
    t is the repair-time average weighted by those same terms.  The raw
    sum is a union-style first-order expansion and may exceed 1; it is
    clamped with a flag.
    """
    terms: list[tuple[float, float | None]] = []

    def walk(node: DomainEstimate, ancestor_prod: float) -> None:
        if not 0.0 <= node.p <= 1.0:
            raise SpecError(f"domain p={node.p} outside [0,1]")
        weight = ancestor_prod * (1.0 - node.p)
        if weight > 0.0 and node.t is None:
            raise SpecError("domain with failure mass is missing a repair time")
        terms.append((weight, node.t))
        for child in node.children:
            walk(child, ancestor_prod * node.p)

    walk(tree, 1.0)
    raw = sum(w for w, _ in terms)
    clamped = raw > 1.0
    one_minus_p = min(raw, 1.0)
    p = 1.0 - one_minus_p
    if raw > 0.0:
        t = sum(w * t for w, t in terms if w > 0.0) / raw
    else:
        t = None
    return AggregateResult(p, t, clamped)


def uniform_domain_tree(level_values: list[tuple[float, float | None]], branching: list[int]) -> DomainEstimate:
    """Symmetric recursion tree: every domain at level m shares the same
    (p, t) and expands into branching[m] children."""
    if len(branching) != len(level_values) - 1:
        raise SpecError("need one branching factor per non-leaf level")

    def make(level: int) -> DomainEstimate:
        p, t = level_values[level]
        children = []
        if level < len(level_values) - 1:
            children = [make(level + 1) for _ in range(branching[level])]
        return DomainEstimate(p, t, children)

    return make(0)


def analyze_hierarchical(
    spec: RecursionSpec,
    budget: int = 20000,
    seed: int = 0,
    enum_cap: int = ENUM_CAP_DEFAULT,
) -> AggregateResult:
    """(p, t) of a symmetric/semi-symmetric recursive topology via
    per-level analysis of each level's hypercube plus path aggregation.

    Every level-m domain is the level's hypercube with that level's
    link class and its own quorum floor(2^dim / 2) + 1.
    """
    if spec.mode == "asymmetric":
        raise SpecError("hierarchical aggregation needs a symmetric or semi-symmetric spec")
    level_values: list[tuple[float, float | None]] = []
    for m, dim in enumerate(spec.dims, start=1):
        cls = spec.classes[spec.class_by_level[m]]
        cube = build_complete_hypercube(dim, distance_km=cls.distance_km)
        cube.classes = {0: LinkClass(0, cls.distance_km, cls.mtbf_h, cls.mttr_h)}
        report = partition_tolerance(
            cube, FailureParams(), budget=budget, seed=seed + m, enum_cap=enum_cap
        )
        level_values.append((report.p, report.t))
    branching = [2**d for d in spec.dims[:-1]]
    tree = uniform_domain_tree(level_values, branching)
    return recursive_aggregate(tree)
