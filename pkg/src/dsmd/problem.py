"""
Quadratic local objectives, noisy subgradient oracles and certified constants.

Node ``i`` holds ``F_i(x) = a_i * ||x - b_i||^2``; the network minimizes
``F = sum_i F_i`` over a constraint set. Subgradient queries return the exact
gradient plus Gaussian noise with per-coordinate standard deviation
``noise_std``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    ConstraintSet,
    MirrorGeometry,
    bregman_divergence,
    check_pairing,
    euclidean_project,
)

# rows drawn per refill of an oracle's noise buffer
NOISE_BLOCK = 256


@dataclass(frozen=True, eq=False)
class QuadraticObjective:
    """``F(x) = a * ||x - b||^2``.

    ``a = 0`` is accepted and gives the zero objective.
    """

    a: float
    b: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a >= 0):
            raise ValueError(f"weight a must be finite and nonnegative, got {self.a}")
        b = np.array(self.b, dtype=float)
        if b.ndim != 1 or not np.all(np.isfinite(b)):
            raise ValueError("b must be a finite vector")
        b.setflags(write=False)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def value(self, x):
        diff = np.asarray(x, dtype=float) - self.b
        return self.a * np.sum(diff * diff, axis=-1)

    def subgradient(self, x):
        return subgradient(self, x)


def subgradient(obj: QuadraticObjective, x):
    """Exact gradient ``2a(x - b)``."""
    return 2.0 * obj.a * (np.asarray(x, dtype=float) - obj.b)


def agent_seed(seed: int, agent: int) -> np.random.SeedSequence:
    """Seed of the noise stream of ``agent`` under the realization seed ``seed``."""
    return np.random.SeedSequence((int(seed), int(agent)))


class _NoiseStream:
    """Standard normal rows of width ``d`` from one generator, drawn in blocks.

    Block draws consume the generator in the same order as row-by-row draws,
    so query ``n`` always sees the same noise for a given seed.
    """

    def __init__(self, seed_seq, d, block=NOISE_BLOCK):
        self.rng = np.random.default_rng(seed_seq)
        self.d = d
        self.block = block
        self.buf = np.empty((0, d))
        self.pos = 0

    def next(self):
        if self.pos == len(self.buf):
            self.buf = self.rng.standard_normal((self.block, self.d))
            self.pos = 0
        row = self.buf[self.pos]
        self.pos += 1
        return row


class StochasticOracle:
    """Noisy subgradient oracle of a single node.

    Parameters
    ----------
    objective : QuadraticObjective
    noise_std : float
        Per-coordinate standard deviation of the additive Gaussian noise.
    seed : int
        Realization seed; combined with ``agent`` to key the noise stream.
    agent : int
        Node id.
    """

    def __init__(self, objective: QuadraticObjective, noise_std: float, seed: int = 0, agent: int = 0):
        if not noise_std >= 0:
            raise ValueError("noise_std must be nonnegative")
        self.objective = objective
        self.noise_std = float(noise_std)
        self.queries = 0
        self._noise = _NoiseStream(agent_seed(seed, agent), objective.dim)

    def __call__(self, x):
        return noisy_subgradient(self, x)


def noisy_subgradient(oracle: StochasticOracle, x):
    """``2a(x - b) + w`` with fresh ``w ~ N(0, noise_std^2 I)``."""
    g = subgradient(oracle.objective, x)
    oracle.queries += 1
    w = oracle._noise.next()
    if oracle.noise_std == 0.0:
        return g
    return g + oracle.noise_std * w


class NetworkOracle:
    """All ``m`` node oracles at once, queried with an ``(m, d)`` stack.

    Node ``i`` uses exactly the noise stream of ``StochasticOracle(..., agent=i)``.
    """

    def __init__(self, a, b, noise_std: float, seed: int = 0, block: int = NOISE_BLOCK):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.noise_std = float(noise_std)
        m, d = self.b.shape
        self._rngs = [np.random.default_rng(agent_seed(seed, i)) for i in range(m)]
        self._block = block
        self._buf = np.empty((m, 0, d))
        self._pos = 0
        self.queries = 0

    def _refill(self):
        m, d = self.b.shape
        self._buf = np.stack([r.standard_normal((self._block, d)) for r in self._rngs])
        self._pos = 0

    def exact(self, X):
        return 2.0 * self.a[:, None] * (X - self.b)

    def __call__(self, X):
        if self._pos == self._buf.shape[1]:
            self._refill()
        w = self._buf[:, self._pos]
        self._pos += 1
        self.queries += 1
        g = self.exact(X)
        if self.noise_std == 0.0:
            return g
        return g + self.noise_std * w


@dataclass(eq=False)
class ProblemInstance:
    """Sum of quadratic objectives over a constraint set, with certified constants.

    Attributes
    ----------
    a : ndarray, shape (m,)
    b : ndarray, shape (m, d)
    cset : ConstraintSet
    noise_std : float
    sigma_F : float
        Strong-convexity modulus of every ``F_i`` w.r.t. the chosen potential.
    G : float
        Bound on the root second moment of the noisy subgradients over ``X``.
    """

    a: np.ndarray
    b: np.ndarray
    cset: ConstraintSet
    noise_std: float = 0.0
    sigma_F: float = 1.0
    G: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float).reshape(-1)
        self.b = np.asarray(self.b, dtype=float).reshape(len(self.a), -1)
        if self.b.shape[1] != self.cset.dim:
            raise ValueError("data dimension does not match the constraint set")
        if np.any(self.a < 0):
            raise ValueError("weights a_i must be nonnegative")
        if not (self.sigma_F > 0 and self.G > 0):
            raise ValueError("sigma_F and G must be positive")

    @property
    def m(self) -> int:
        return len(self.a)

    @property
    def d(self) -> int:
        return self.cset.dim

    @property
    def objectives(self) -> list[QuadraticObjective]:
        return [QuadraticObjective(ai, bi) for ai, bi in zip(self.a, self.b)]

    def value(self, x):
        """``F(x) = sum_i a_i ||x - b_i||^2`` (broadcasts over leading axes of x)."""
        x = np.asarray(x, dtype=float)
        diff = x[..., None, :] - self.b
        return np.sum(self.a * np.sum(diff * diff, axis=-1), axis=-1)

    def oracle(self, seed: int) -> NetworkOracle:
        return NetworkOracle(self.a, self.b, self.noise_std, seed)

    def node_oracle(self, i: int, seed: int) -> StochasticOracle:
        return StochasticOracle(self.objectives[i], self.noise_std, seed, agent=i)

    def to_dict(self) -> dict:
        return {
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "noise_std": self.noise_std,
            "sigma_F": self.sigma_F,
            "G": self.G,
        }


def global_optimum(instance: ProblemInstance) -> np.ndarray:
    """Exact minimizer of ``sum_i a_i ||x - b_i||^2`` over the constraint set.

    ``F(x) = (sum a) ||x - xbar||^2 + const`` with ``xbar`` the weighted mean
    of the ``b_i``, so the minimizer is the Euclidean projection of ``xbar``.
    """
    total = instance.a.sum()
    if total <= 0:
        raise ValueError("all weights are zero; every feasible point is optimal")
    xbar = instance.a @ instance.b / total
    return euclidean_project(instance.cset, xbar)


def certify_sigma_F(
    a,
    geom: MirrorGeometry,
    cset: ConstraintSet,
    n_pairs: int = 10_000,
    seed: int = 0,
    safety: float = 0.9,
) -> float:
    """Strong-convexity modulus of the ``a_i ||x - b_i||^2`` w.r.t. ``geom``.

    Euclidean: exactly ``2 min a_i``. Entropy: the quadratic's Bregman remainder
    is ``a ||x - y||^2`` whatever ``b`` is, so the certificate is
    ``safety * min_i a_i * min ||x - y||^2 / KL(x || y)`` over ``n_pairs``
    uniform random pairs of the simplex.
    """
    check_pairing(geom, cset)
    a_min = float(np.min(a))
    if not geom.is_entropy:
        sigma = 2.0 * a_min
    else:
        rng = np.random.default_rng(seed)
        x = cset.sample(rng, n_pairs)
        y = cset.sample(rng, n_pairs)
        kl = bregman_divergence(geom, x, y)
        sq = np.sum((x - y) ** 2, axis=-1)
        keep = kl > 0
        sigma = safety * a_min * float(np.min(sq[keep] / kl[keep]))
    if not sigma >= 1e-8:
        raise ValueError(
            f"objective is not strongly convex w.r.t. {geom.kind.value} (certificate {sigma:.3g})"
        )
    return sigma


def certify_G(a, b, cset: ConstraintSet, noise_std: float) -> float:
    """``G = sqrt(max_i sup_X ||2 a_i (x - b_i)||^2 + d noise_std^2)``.

    The supremum of the distance to ``b_i`` over a box or simplex is attained
    at a vertex, found in closed form.
    """
    a = np.asarray(a, dtype=float)
    b = np.atleast_2d(np.asarray(b, dtype=float))
    far = cset.vertices_farthest_from(b)
    grad_sq = (2.0 * a) ** 2 * np.sum((far - b) ** 2, axis=-1)
    G2 = float(np.max(grad_sq)) + cset.dim * noise_std**2
    return max(float(np.sqrt(G2)), 1e-12)


def random_data(m: int, cset: ConstraintSet, seed: int = 0):
    """Problem data: ``a_i ~ U[0.5, 1.5]``, ``b_i`` uniform on the constraint set."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.5, 1.5, size=m)
    b = cset.sample(rng, m)
    return a, b


def make_instance(
    a,
    b,
    cset: ConstraintSet,
    geom: MirrorGeometry,
    noise_std: float = 0.0,
    certificate_seed: int = 0,
) -> ProblemInstance:
    """Build an instance with ``sigma_F`` and ``G`` certified for ``geom``."""
    sigma_F = certify_sigma_F(a, geom, cset, seed=certificate_seed)
    G = certify_G(a, b, cset, noise_std)
    return ProblemInstance(a, b, cset, noise_std, sigma_F, G,
                           meta={"geometry": geom.kind.value})


def random_instance(
    m: int,
    cset: ConstraintSet,
    geom: MirrorGeometry,
    noise_std: float,
    seed: int = 0,
) -> ProblemInstance:
    a, b = random_data(m, cset, seed)
    return make_instance(a, b, cset, geom, noise_std, certificate_seed=seed)
