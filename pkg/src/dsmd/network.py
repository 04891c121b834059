"""
Time-varying communication networks and doubly stochastic mixing matrices.

A :class:`MixingSchedule` describes a base undirected topology and a random
link-activation rule. Round ``t`` activates a random subset of the base
edges (drawn from a stream seeded by ``(seed, t)``) and weights it with
Metropolis-Hastings weights, which are symmetric and therefore doubly
stochastic. Every ``B``-th round activates the full base topology, so the
union of edges over any window of ``B`` consecutive rounds is connected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

TOPOLOGIES = ("ring", "complete", "custom")


def ring_edges(m: int) -> tuple[tuple[int, int], ...]:
    """Undirected edges of a cycle on ``m`` nodes (a single edge when m == 2)."""
    if m < 2:
        return ()
    if m == 2:
        return ((0, 1),)
    return tuple((i, (i + 1) % m) if i < (i + 1) % m else ((i + 1) % m, i) for i in range(m))


def complete_edges(m: int) -> tuple[tuple[int, int], ...]:
    return tuple((i, j) for i in range(m) for j in range(i + 1, m))


def _normalize_edges(edges, m):
    out = set()
    for u, v in edges:
        u, v = int(u), int(v)
        if u == v:
            raise ValueError(f"self loop ({u}, {v}) is not an edge")
        if not (0 <= u < m and 0 <= v < m):
            raise ValueError(f"edge ({u}, {v}) out of range for {m} nodes")
        out.add((min(u, v), max(u, v)))
    return tuple(sorted(out))


def metropolis_weights(m: int, edges) -> np.ndarray:
    """Symmetric doubly stochastic matrix for an undirected edge set.

    Off-diagonal weight on edge ``(i, j)`` is ``1 / (1 + max(deg_i, deg_j))``
    with degrees counted in ``edges``; the diagonal takes the remainder.
    """
    A = np.zeros((m, m))
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    if len(edges):
        deg = np.bincount(edges.ravel(), minlength=m)
        u, v = edges[:, 0], edges[:, 1]
        w = 1.0 / (1.0 + np.maximum(deg[u], deg[v]))
        A[u, v] = w
        A[v, u] = w
    A[np.diag_indices(m)] = 1.0 - A.sum(axis=1)
    return A


def is_connected(m: int, edges) -> bool:
    if m <= 1:
        return True
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    if not len(edges):
        return False
    adj = csr_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(m, m))
    # links are bidirectional, so strong connectivity is plain connectivity
    n, _ = connected_components(adj, directed=False)
    return n == 1


@dataclass(frozen=True)
class MixingSchedule:
    """Generator of per-round mixing matrices.

    Parameters
    ----------
    m : int
        Number of nodes.
    topology : {"ring", "complete", "custom"}
        Base topology. ``"custom"`` takes its edges from ``edges``.
    activation : float
        Fraction of base edges active in a regular round; exactly
        ``ceil(activation * |E|)`` edges are drawn.
    B : int
        Connectivity window. Round ``t`` with ``t % B == 0`` activates every
        base edge when ``force_connectivity`` is set.
    seed : int
        Seed of the activation stream.
    edges : tuple of (int, int)
        Base edges for the custom topology (0-based node ids).
    force_connectivity : bool
        Switch off only to build schedules that may violate the window
        connectivity condition.
    """

    m: int
    topology: str = "ring"
    activation: float = 0.5
    B: int = 2
    seed: int = 0
    edges: tuple = field(default=(), repr=False)
    force_connectivity: bool = True

    def __post_init__(self):
        m = int(self.m)
        if m < 1:
            raise ValueError(f"need at least one node, got m={self.m}")
        object.__setattr__(self, "m", m)
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}; expected one of {TOPOLOGIES}")
        if not 0.0 < self.activation <= 1.0:
            raise ValueError(f"activation must lie in (0, 1], got {self.activation}")
        if int(self.B) < 1:
            raise ValueError(f"B must be a positive integer, got {self.B}")
        object.__setattr__(self, "B", int(self.B))
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.topology == "ring":
            base = ring_edges(m)
        elif self.topology == "complete":
            base = complete_edges(m)
        else:
            base = _normalize_edges(self.edges, m)
        object.__setattr__(self, "edges", base)
        if m > 1 and not base:
            raise ValueError("activation yields an empty edge set")
        if m > 1 and self.force_connectivity and not is_connected(m, base):
            raise ValueError("base topology is not connected")
        arr = np.asarray(base, dtype=int).reshape(-1, 2)
        arr.setflags(write=False)
        object.__setattr__(self, "_edge_array", arr)
        full = metropolis_weights(m, arr)
        full.setflags(write=False)
        object.__setattr__(self, "_full_matrix", full)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_active(self) -> int:
        """Number of edges activated in a regular (non-forced) round."""
        return math.ceil(self.activation * self.n_edges - 1e-12)

    @property
    def max_degree(self) -> int:
        if not self.edges:
            return 0
        return int(np.bincount(np.ravel(self.edges), minlength=self.m).max())

    @property
    def xi(self) -> float:
        """Declared lower bound on diagonal and active-edge entries.

        Metropolis weights never fall below ``1 / (1 + max base degree)``, on
        or off the diagonal.
        """
        if self.m == 1:
            # single node: the only entry is 1; any xi < 1 works
            return 0.5
        return 1.0 / (1.0 + self.max_degree)

    def is_forced(self, t: int) -> bool:
        return self.force_connectivity and t % self.B == 0

    def active_edges(self, t: int) -> np.ndarray:
        """Edges active in round ``t`` as an ``(k, 2)`` integer array."""
        if t < 1:
            raise ValueError(f"rounds are numbered from 1, got t={t}")
        base = self._edge_array
        if self.is_forced(t) or self.n_active >= self.n_edges:
            return base
        rng = np.random.default_rng((self.seed, t))
        pick = np.sort(rng.permutation(self.n_edges)[: self.n_active])
        return base[pick]

    def to_dict(self) -> dict:
        out = {
            "topology": self.topology,
            "m": self.m,
            "activation": self.activation,
            "B": self.B,
            "seed": self.seed,
        }
        if self.topology == "custom":
            out["edges"] = [list(e) for e in self.edges]
        if not self.force_connectivity:
            out["force_connectivity"] = False
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MixingSchedule":
        data = dict(data)
        if "edges" in data:
            data["edges"] = tuple(tuple(e) for e in data["edges"])
        return cls(**data)


def sample_matrix(sched: MixingSchedule, t: int) -> np.ndarray:
    """Mixing matrix ``A(t)`` of round ``t`` (a pure function of ``sched`` and ``t``).

    Rounds that activate the whole base topology share one read-only matrix.
    """
    edges = sched.active_edges(t)
    if edges is sched._edge_array:
        return sched._full_matrix
    return metropolis_weights(sched.m, edges)


def transition_product(sched: MixingSchedule, t: int, l: int) -> np.ndarray:
    """Left product ``A(t) A(t-1) ... A(l)`` for ``t >= l >= 1``."""
    if not t >= l >= 1:
        raise ValueError(f"need t >= l >= 1, got t={t}, l={l}")
    P = sample_matrix(sched, l)
    for s in range(l + 1, t + 1):
        P = sample_matrix(sched, s) @ P
    return P


@dataclass(frozen=True)
class MixingConstants:
    """Geometric mixing-rate constants ``alpha`` and ``beta``."""

    alpha: float
    beta: float

    def bound(self, length):
        """``alpha * beta ** length`` for a product of ``length`` matrices."""
        return self.alpha * self.beta ** np.asarray(length, dtype=float)


def mixing_constants(xi: float, m: int, B: int) -> MixingConstants:
    """``alpha = (1 - xi / 4m^2)^-2`` and ``beta = (1 - xi / 4m^2)^(1/B)``."""
    if not 0.0 < xi < 1.0:
        raise ValueError(f"xi must lie in (0, 1), got {xi}")
    if m < 1 or B < 1:
        raise ValueError("m and B must be positive")
    q = 1.0 - xi / (4.0 * m * m)
    return MixingConstants(alpha=q**-2.0, beta=q ** (1.0 / B))


def schedule_constants(sched: MixingSchedule) -> MixingConstants:
    return mixing_constants(sched.xi, sched.m, sched.B)


@dataclass
class Assumption1Report:
    """Outcome of :func:`verify_assumption1`."""

    xi: float
    horizon: int
    min_diagonal: float
    min_positive: float
    max_sum_deviation: float
    max_asymmetry: float
    disconnected_windows: list = field(default_factory=list)
    passed: bool = False

    def __str__(self):
        verdict = "pass" if self.passed else "FAIL"
        s = (
            f"{verdict}: xi={self.xi:.4g} min_diag={self.min_diagonal:.4g} "
            f"min_pos={self.min_positive:.4g} sum_dev={self.max_sum_deviation:.2e}"
        )
        if self.disconnected_windows:
            s += f" disconnected windows {self.disconnected_windows[:5]}"
        return s


def verify_assumption1(sched: MixingSchedule, T: int, tol: float = 1e-12) -> Assumption1Report:
    """Sample rounds ``1..T`` and check the three network conditions.

    Checks entries against the declared ``xi``, row and column sums, and
    connectivity of the union graph on every window
    ``{sB + 1, ..., (s + 1)B}`` fully contained in ``1..T``. Windows are
    reported by their index ``s``.
    """
    if T < sched.B:
        raise ValueError(f"horizon T={T} shorter than the window B={sched.B}")
    m = sched.m
    min_diag = np.inf
    min_pos = np.inf
    sum_dev = 0.0
    asym = 0.0
    bad = []
    window_edges = []
    for t in range(1, T + 1):
        A = sample_matrix(sched, t)
        min_diag = min(min_diag, float(np.min(np.diag(A))))
        pos = A[A > 0]
        min_pos = min(min_pos, float(pos.min()))
        sum_dev = max(
            sum_dev,
            float(np.max(np.abs(A.sum(axis=0) - 1.0))),
            float(np.max(np.abs(A.sum(axis=1) - 1.0))),
        )
        asym = max(asym, float(np.max(np.abs(A - A.T))))
        off = A.copy()
        np.fill_diagonal(off, 0.0)
        window_edges.append(np.argwhere(off > 0))
        if t % sched.B == 0:
            if not is_connected(m, np.concatenate(window_edges)):
                bad.append(t // sched.B - 1)
            window_edges = []
    passed = (
        min_diag >= sched.xi - tol
        and min_pos >= sched.xi - tol
        and sum_dev <= tol
        and not bad
    )
    return Assumption1Report(
        xi=sched.xi,
        horizon=T,
        min_diagonal=min_diag,
        min_positive=min_pos,
        max_sum_deviation=sum_dev,
        max_asymmetry=asym,
        disconnected_windows=bad,
        passed=bool(passed),
    )


def mixing_bound_check(
    sched: MixingSchedule,
    samples: int = 1000,
    max_length: int = 200,
    horizon: int | None = None,
    seed: int = 0,
) -> float:
    """Largest excess of ``|[A(t, l)]_ij - 1/m|`` over ``alpha * beta^(t-l+1)``.

    Draws ``samples`` windows ``l..t`` with length ``t - l + 1`` uniform on
    ``1..max_length`` and start uniform on ``1..horizon`` (default
    ``5 * max_length``). A value ``<= 0`` means the bound held everywhere.
    """
    if horizon is None:
        horizon = 5 * max_length
    consts = schedule_constants(sched)
    rng = np.random.default_rng(seed)
    lengths = rng.integers(1, max_length + 1, size=samples)
    starts = rng.integers(1, horizon + 1, size=samples)
    cache: dict[int, np.ndarray] = {}

    def A(s):
        if s not in cache:
            cache[s] = sample_matrix(sched, s)
        return cache[s]

    worst = -np.inf
    for n, l in zip(lengths, starts):
        t = l + n - 1
        P = A(l)
        for s in range(l + 1, t + 1):
            P = A(s) @ P
        dev = float(np.max(np.abs(P - 1.0 / sched.m)))
        worst = max(worst, dev - float(consts.bound(n)))
    return worst
