"""
Distributed stochastic mirror descent engines.

* :func:`run_dsmd` -- every node takes a noisy mirror step with
  ``eta_t = 1 / (sigma_F t)`` and then averages with its neighbours through
  the round's mixing matrix.
* :func:`run_epoch_dsmd` -- the same inner loop with a constant step inside
  epochs of doubling length; each epoch restarts from the per-node average of
  the previous one and halves the step.
* :func:`run_dsps` -- the Euclidean special case (distributed projected
  stochastic subgradient), kept as a named baseline.

Iterates of all ``m`` nodes are stored as an ``(m, d)`` array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .geometry import (
    MirrorGeometry,
    check_pairing,
    euclidean_diameter,
    mirror_step,
    phi_diameter,
    phi_minimizer,
)
from .network import MixingSchedule, sample_matrix, schedule_constants
from .problem import ProblemInstance


class NonFiniteIterate(FloatingPointError):
    """A NaN or infinity appeared; the run is aborted at ``round``."""

    def __init__(self, round_, what):
        super().__init__(f"non-finite {what} in round {round_}")
        self.round = round_


class InfeasibleIterate(AssertionError):
    pass


@dataclass
class RoundState:
    """What a metric hook sees after round ``t`` has been executed.

    ``x`` holds the iterates the round started from (``x_t``), ``x_next`` the
    iterates it produced (``x_{t+1}``), and ``output`` the algorithm's current
    estimate: the running average of ``x_1..x_t`` for DSMD, or the most recent
    epoch average for Epoch-DSMD.
    """

    t: int
    x: np.ndarray
    x_next: np.ndarray
    output: np.ndarray
    eta: float
    disagreement: np.ndarray


Hook = Callable[[RoundState], None]


@dataclass
class Trajectory:
    """Per-step record ``(x_t, g_t, z_{t+1}, eta_t)`` of a run."""

    x: list = field(default_factory=list)
    g: list = field(default_factory=list)
    z: list = field(default_factory=list)
    eta: list = field(default_factory=list)

    def append(self, x, g, z, eta):
        self.x.append(x)
        self.g.append(g)
        self.z.append(z)
        self.eta.append(eta)

    def __len__(self):
        return len(self.eta)


@dataclass
class DsmdResult:
    """Outcome of a DSMD (or DSPS) run.

    Attributes
    ----------
    x : ndarray, shape (m, d)
        Iterates after the last round, ``x_{T+1}``.
    x_avg : ndarray, shape (m, d)
        Running averages ``(1/T) sum_{t<=T} x_t``.
    x_init : ndarray, shape (m, d)
    disagreement_sum : ndarray, shape (m,)
        ``sum_t sum_i ||x_{i,t} - x_{j,t}||`` for every reference node ``j``.
    eta_sum : float
        ``sum_t eta_t``.
    max_step_excess : float
        Largest ``||z_{t+1} - x_t|| - (eta_t / sigma_phi) ||g_t||`` seen.
    trajectory : Trajectory or None
    """

    x: np.ndarray
    x_avg: np.ndarray
    x_init: np.ndarray
    rounds: int
    disagreement_sum: np.ndarray
    eta_sum: float
    max_step_excess: float
    trajectory: Optional[Trajectory] = None


def disagreement(X):
    """``sum_i ||x_i - x_j||`` for every node ``j``."""
    if len(X) == 1:
        return np.zeros(1)
    return cdist(X, X).sum(axis=0)


def initial_points(geom, cset, m, x0=None, seed=0):
    """Stack of ``m`` starting points.

    ``None`` or ``"phi_min"`` starts every node at the minimizer of the
    potential; ``"random"`` draws uniform feasible points; an array of shape
    ``(d,)`` or ``(m, d)`` is used as given.
    """
    if x0 is None or (isinstance(x0, str) and x0 == "phi_min"):
        return np.tile(phi_minimizer(geom, cset), (m, 1))
    if isinstance(x0, str):
        if x0 != "random":
            raise ValueError(f"unknown initialization {x0!r}")
        return cset.sample(np.random.default_rng(seed), m)
    X = np.array(np.broadcast_to(np.asarray(x0, dtype=float), (m, cset.dim)))
    if not np.all(cset.contains(X, tol=1e-9)):
        raise InfeasibleIterate("initial points must lie in the constraint set")
    return X


def _feasible(cset, X, tol):
    """Fast whole-stack membership test for finite ``X``."""
    if cset.is_simplex:
        return X.min() >= -tol and np.abs(X.sum(axis=1) - 1.0).max() <= tol
    return (cset.lower - X).max() <= tol and (X - cset.upper).max() <= tol


class _Engine:
    """Shared inner loop: oracle query, mirror step, mixing.

    The round counter is global: it keeps running across epochs, so the
    mixing schedule is consumed as one sequence.
    """

    def __init__(self, instance, geom, sched, seed, record_steps, check_tol=1e-9):
        check_pairing(geom, instance.cset)
        if sched.m != instance.m:
            raise ValueError(f"schedule has {sched.m} nodes, instance has {instance.m}")
        self.instance = instance
        self.geom = geom
        self.cset = instance.cset
        self.sched = sched
        self.oracle = instance.oracle(seed)
        self.round = 0
        self.disagreement_sum = np.zeros(instance.m)
        self.eta_sum = 0.0
        self.max_step_excess = -np.inf
        self.trajectory = Trajectory() if record_steps else None
        self.check_tol = check_tol

    def step(self, X, eta):
        """Execute one round from ``X``; returns ``(x_next, disagreement of X)``."""
        self.round += 1
        t = self.round
        G = self.oracle(X)
        if not np.isfinite(G.sum()):
            raise NonFiniteIterate(t, "subgradient")
        Z = mirror_step(self.geom, self.cset, X, G, eta)
        step = np.sqrt(np.einsum("ij,ij->i", Z - X, Z - X))
        bound = eta / self.geom.sigma_phi * np.sqrt(np.einsum("ij,ij->i", G, G))
        self.max_step_excess = max(self.max_step_excess, float((step - bound).max()))
        if self.trajectory is not None:
            self.trajectory.append(X.copy(), G, Z, eta)
        A = sample_matrix(self.sched, t)
        X_next = A @ Z
        if not np.isfinite(X_next.sum()):
            raise NonFiniteIterate(t, "iterate")
        if not _feasible(self.cset, X_next, self.check_tol):
            raise InfeasibleIterate(f"iterate left the constraint set in round {t}")
        dis = disagreement(X)
        self.disagreement_sum += dis
        self.eta_sum += eta
        return X_next, dis


def _step_rule(instance, step_size):
    if step_size is None:
        sigma_F = instance.sigma_F
        return lambda t: 1.0 / (sigma_F * t)
    if callable(step_size):
        return step_size
    eta = float(step_size)
    return lambda t: eta


def run_dsmd(
    instance: ProblemInstance,
    geom: MirrorGeometry,
    sched: MixingSchedule,
    T: int,
    seed: int = 0,
    x0=None,
    step_size=None,
    hook: Optional[Hook] = None,
    checkpoints=None,
    record_steps: bool = False,
) -> DsmdResult:
    """Run DSMD for ``T`` rounds.

    Parameters
    ----------
    instance : ProblemInstance
    geom : MirrorGeometry
    sched : MixingSchedule
    T : int
        Number of rounds.
    seed : int
        Realization seed of the noise streams.
    x0 : None, str or array
        Starting points, see :func:`initial_points`.
    step_size : None, float or callable
        ``None`` uses ``eta_t = 1 / (sigma_F t)``; a float gives a constant
        step; a callable maps the round index to the step.
    hook : callable, optional
        Called with a :class:`RoundState` after each round in ``checkpoints``
        (after every round when ``checkpoints`` is None).
    record_steps : bool
        Keep the full per-step trajectory.
    """
    if T < 1:
        raise ValueError("T must be positive")
    eta_of = _step_rule(instance, step_size)
    eng = _Engine(instance, geom, sched, seed, record_steps)
    X = initial_points(geom, instance.cset, instance.m, x0, seed)
    x_init = X.copy()
    S = np.zeros_like(X)
    wanted = None if checkpoints is None else set(int(c) for c in checkpoints)
    for t in range(1, T + 1):
        eta = float(eta_of(t))
        S += X
        X_next, dis = eng.step(X, eta)
        if hook is not None and (wanted is None or t in wanted):
            hook(RoundState(t, X, X_next, S / t, eta, dis))
        X = X_next
    return DsmdResult(
        x=X,
        x_avg=S / T,
        x_init=x_init,
        rounds=T,
        disagreement_sum=eng.disagreement_sum,
        eta_sum=eng.eta_sum,
        max_step_excess=eng.max_step_excess,
        trajectory=eng.trajectory,
    )


def run_dsps(instance, sched, T, seed=0, **kwargs) -> DsmdResult:
    """Distributed projected stochastic subgradient: DSMD with the Euclidean potential."""
    if "geom" in kwargs:
        raise TypeError("run_dsps always uses the Euclidean geometry")
    return run_dsmd(instance, MirrorGeometry.euclidean(), sched, T, seed=seed, **kwargs)


@dataclass(frozen=True)
class EpochSchedule:
    """Epoch lengths and steps: ``T_{k+1} = 2 T_k``, ``eta_{k+1} = eta_k / 2``."""

    T: int
    T1: int
    eta1: float
    epochs: tuple

    @property
    def k_dagger(self) -> int:
        return len(self.epochs)

    @property
    def total_rounds(self) -> int:
        return sum(n for n, _ in self.epochs)

    @property
    def boundaries(self) -> list[int]:
        """Cumulative round count at the end of each epoch."""
        return [int(c) for c in np.cumsum([n for n, _ in self.epochs])]


def epoch_schedule(T: int, sigma_F: float, T1: int = 4) -> EpochSchedule:
    """Epochs that fit into ``T`` rounds, starting from ``eta_1 = 1 / sigma_F``.

    An epoch is run only if it completes within ``T`` rounds; leftover rounds
    are dropped. With ``T1 = 4`` the count is ``floor(log2(T / 4 + 1))``.
    """
    if T < T1:
        raise ValueError(f"T={T} is shorter than the first epoch T1={T1}")
    if not sigma_F > 0:
        raise ValueError("sigma_F must be positive")
    epochs = []
    n, eta, used = T1, 1.0 / sigma_F, 0
    while used + n <= T:
        epochs.append((n, eta))
        used += n
        n, eta = 2 * n, eta / 2.0
    return EpochSchedule(T=T, T1=T1, eta1=1.0 / sigma_F, epochs=tuple(epochs))


def k_dagger(T: int) -> int:
    """``floor(log2(T / 4 + 1))``."""
    return int(math.floor(math.log2(T / 4.0 + 1.0)))


@dataclass
class EpochRecord:
    k: int
    length: int
    eta: float
    first_round: int
    last_round: int
    output: np.ndarray


@dataclass
class EpochResult:
    """Outcome of an Epoch-DSMD run.

    ``x`` holds the final warm-start points ``x^{k+1}_{i,1}`` (the average of
    the last epoch); ``x_last`` the raw iterate after the last round.
    """

    x: np.ndarray
    x_last: np.ndarray
    x_init: np.ndarray
    schedule: EpochSchedule
    epochs: list
    disagreement_sum: np.ndarray
    eta_sum: float
    max_step_excess: float
    trajectory: Optional[Trajectory] = None

    @property
    def rounds(self) -> int:
        return self.schedule.total_rounds


def run_epoch_dsmd(
    instance: ProblemInstance,
    geom: MirrorGeometry,
    sched: MixingSchedule,
    T: int,
    seed: int = 0,
    schedule: Optional[EpochSchedule] = None,
    hook: Optional[Hook] = None,
    checkpoints=None,
    record_steps: bool = False,
) -> EpochResult:
    """Run Epoch-DSMD within a budget of ``T`` rounds.

    Every node starts at the minimizer of the potential. Epoch ``k`` runs the
    DSMD inner loop for ``T_k`` rounds with the constant step ``eta_k``; the
    per-node average of its iterates starts epoch ``k + 1``.
    """
    if schedule is None:
        schedule = epoch_schedule(T, instance.sigma_F)
    eng = _Engine(instance, geom, sched, seed, record_steps)
    X = initial_points(geom, instance.cset, instance.m, None)
    x_init = X.copy()
    output = X.copy()
    wanted = None if checkpoints is None else set(int(c) for c in checkpoints)
    records = []
    for k, (n, eta) in enumerate(schedule.epochs, start=1):
        first = eng.round + 1
        S = np.zeros_like(X)
        for _ in range(n):
            S += X
            X_next, dis = eng.step(X, eta)
            if eng.round == first + n - 1:
                output = S / n
            if hook is not None and (wanted is None or eng.round in wanted):
                hook(RoundState(eng.round, X, X_next, output, eta, dis))
            X = X_next
        records.append(EpochRecord(k, n, eta, first, eng.round, output))
        x_last = X
        X = output
    return EpochResult(
        x=output,
        x_last=x_last,
        x_init=x_init,
        schedule=schedule,
        epochs=records,
        disagreement_sum=eng.disagreement_sum,
        eta_sum=eng.eta_sum,
        max_step_excess=eng.max_step_excess,
        trajectory=eng.trajectory,
    )


@dataclass(frozen=True)
class TheoremConstants:
    """Inputs and derived constants of the two convergence bounds.

    ``init_norm_sum`` is ``sum_i E||x_{i,1}||``, the summed norms of the
    starting points.
    """

    G: float
    sigma_F: float
    sigma_phi: float
    alpha: float
    beta: float
    m: int
    R_X: float
    R_PhiX: float
    init_norm_sum: float

    @property
    def _mix(self):
        return 2.0 * self.alpha * self.beta / (1.0 - self.beta)

    @property
    def c(self) -> float:
        s = self.sigma_phi
        return (2.0 * self.G**2 / (self.sigma_F**2 * s)) * (
            1.0 + 4.0 * self.alpha * self.beta * self.m / ((1.0 - self.beta) * s)
        )

    @property
    def c_prime(self) -> float:
        # first power of G, as stated
        return (2.0 * self.G / (self.sigma_F * self.sigma_phi)) * (self._mix + 1.0) * self.init_norm_sum

    @property
    def c1(self) -> float:
        return self.m * self.G * (self._mix + 1.0) * (self.m * self.R_X + self.init_norm_sum)

    @property
    def c2(self) -> float:
        return self.m * self.G**2 / 2.0 + self._mix * self.m**2 * self.G**2 / self.sigma_phi

    @property
    def c_hat(self) -> float:
        first = (self.sigma_F * self.c1 + 4.0 * self.c2) / (4.0 * self.sigma_F**2 * self.sigma_phi)
        second = self.m * self.R_PhiX**2 / (4.0 * self.sigma_phi)
        return max(first, second)

    def as_dict(self) -> dict:
        return {
            "sigma_F": self.sigma_F,
            "G": self.G,
            "sigma_phi": self.sigma_phi,
            "alpha": self.alpha,
            "beta": self.beta,
            "m": self.m,
            "R_X": self.R_X,
            "R_PhiX": self.R_PhiX,
            "init_norm_sum": self.init_norm_sum,
            "c": self.c,
            "c_prime": self.c_prime,
            "c1": self.c1,
            "c2": self.c2,
            "c_hat": self.c_hat,
        }


def theorem_constants(
    instance: ProblemInstance,
    geom: MirrorGeometry,
    sched: MixingSchedule,
    x0=None,
) -> TheoremConstants:
    """Evaluate the bound constants for a certified instance and schedule."""
    mc = schedule_constants(sched)
    X = initial_points(geom, instance.cset, instance.m, x0)
    return TheoremConstants(
        G=instance.G,
        sigma_F=instance.sigma_F,
        sigma_phi=geom.sigma_phi,
        alpha=mc.alpha,
        beta=mc.beta,
        m=instance.m,
        R_X=euclidean_diameter(instance.cset),
        R_PhiX=phi_diameter(geom, instance.cset),
        init_norm_sum=float(np.linalg.norm(X, axis=1).sum()),
    )


def theorem1_bound(constants: TheoremConstants, T):
    """``c ln(T) / T + c' / T`` (valid for ``T >= 3``)."""
    T = np.asarray(T, dtype=float)
    return constants.c * np.log(T) / T + constants.c_prime / T


def theorem2_bound(constants: TheoremConstants, T):
    """``64 c_hat / T`` (valid for ``T >= 4``)."""
    return 64.0 * constants.c_hat / np.asarray(T, dtype=float)


def step_bound_check(trajectory: Trajectory, sigma_phi: float = 1.0) -> float:
    """Largest ``||z_{t+1} - x_t|| - (eta_t / sigma_phi) ||g_t||`` over all recorded steps.

    Each mirror step moves at most ``eta / sigma_phi`` times the gradient norm,
    so the result should not exceed rounding error.
    """
    if not len(trajectory):
        return -np.inf
    x = np.asarray(trajectory.x)
    g = np.asarray(trajectory.g)
    z = np.asarray(trajectory.z)
    eta = np.asarray(trajectory.eta, dtype=float).reshape((-1,) + (1,) * (x.ndim - 2))
    moved = np.linalg.norm(z - x, axis=-1)
    allowed = eta / sigma_phi * np.linalg.norm(g, axis=-1)
    return float(np.max(moved - allowed))
