"""
Mirror maps, Bregman divergences and the mirror update.

Two distance-generating functions are supported:

* ``Euclidean``: ``phi(x) = 0.5 * ||x||^2``, divergence ``0.5 * ||x - y||^2``.
* ``NegativeEntropy``: ``phi(x) = sum_i x_i log x_i``, divergence is the
  (generalized) Kullback-Leibler divergence.

and two feasible sets, the probability simplex and an axis-aligned box.
All array functions accept a single point of shape ``(d,)`` or a stack of
points of shape ``(..., d)``; the last axis always indexes coordinates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class GeometryKind(enum.Enum):
    EUCLIDEAN = "euclidean"
    NEGATIVE_ENTROPY = "entropy"


class SetKind(enum.Enum):
    SIMPLEX = "simplex"
    BOX = "box"


class GeometryError(ValueError):
    """Raised for invalid points or unsupported geometry/set pairings."""


DEFAULT_ENTROPY_FLOOR = 1e-12

SUPPORTED_PAIRS = frozenset(
    {
        (GeometryKind.EUCLIDEAN, SetKind.BOX),
        (GeometryKind.EUCLIDEAN, SetKind.SIMPLEX),
        (GeometryKind.NEGATIVE_ENTROPY, SetKind.SIMPLEX),
    }
)


@dataclass(frozen=True)
class MirrorGeometry:
    """A distance-generating function together with its constants.

    Parameters
    ----------
    kind : GeometryKind
        Which potential to use.
    sigma_phi : float
        Strong-convexity modulus of the potential w.r.t. the Euclidean norm.
        Both supported potentials have modulus 1 on their domains.
    entropy_floor : float
        Clamp applied to coordinates before taking logarithms
        (negative entropy only).
    """

    kind: GeometryKind
    sigma_phi: float = 1.0
    entropy_floor: float = DEFAULT_ENTROPY_FLOOR

    def __post_init__(self):
        kind = GeometryKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not self.sigma_phi >= 1.0:
            raise GeometryError(f"sigma_phi must be >= 1, got {self.sigma_phi}")
        if self.sigma_phi != 1.0:
            # the modulus of both potentials is exactly 1
            raise GeometryError("both supported potentials have sigma_phi = 1")
        if kind is GeometryKind.NEGATIVE_ENTROPY:
            if not 0.0 < self.entropy_floor <= 1e-9:
                raise GeometryError(
                    f"entropy_floor must lie in (0, 1e-9], got {self.entropy_floor}"
                )

    @classmethod
    def euclidean(cls) -> "MirrorGeometry":
        return cls(GeometryKind.EUCLIDEAN)

    @classmethod
    def entropy(cls, entropy_floor: float = DEFAULT_ENTROPY_FLOOR) -> "MirrorGeometry":
        return cls(GeometryKind.NEGATIVE_ENTROPY, entropy_floor=entropy_floor)

    @property
    def is_entropy(self) -> bool:
        return self.kind is GeometryKind.NEGATIVE_ENTROPY

    def phi(self, x):
        """Value of the potential, reduced over the last axis."""
        x = np.asarray(x, dtype=float)
        if self.is_entropy:
            _check_nonnegative(x)
            # 0 log 0 = 0
            return np.sum(np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0), axis=-1)
        return 0.5 * np.sum(x * x, axis=-1)

    def grad_phi(self, x):
        """Gradient of the potential (entropy: evaluated at the floored point)."""
        x = np.asarray(x, dtype=float)
        if self.is_entropy:
            _check_nonnegative(x)
            return 1.0 + np.log(np.maximum(x, self.entropy_floor))
        return x.copy()

    def grad_phi_inv(self, theta):
        """Inverse of the gradient map (dual point to primal point)."""
        theta = np.asarray(theta, dtype=float)
        if self.is_entropy:
            return np.exp(theta - 1.0)
        return theta.copy()


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Feasible set: probability simplex or box ``lower <= x <= upper``.

    Use :meth:`simplex` or :meth:`box` to construct.
    """

    kind: SetKind
    dim: int
    lower: np.ndarray | None = field(default=None, repr=False)
    upper: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        kind = SetKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if int(self.dim) < 1:
            raise GeometryError(f"dimension must be positive, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        if kind is SetKind.BOX:
            if self.lower is None or self.upper is None:
                raise GeometryError("a box needs lower and upper bounds")
            lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.dim,)).copy()
            upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.dim,)).copy()
            if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
                raise GeometryError("box bounds must be finite")
            if not np.all(lower < upper):
                raise GeometryError("box needs lower < upper in every coordinate")
            lower.setflags(write=False)
            upper.setflags(write=False)
            object.__setattr__(self, "lower", lower)
            object.__setattr__(self, "upper", upper)
        else:
            object.__setattr__(self, "lower", None)
            object.__setattr__(self, "upper", None)

    @classmethod
    def simplex(cls, dim: int) -> "ConstraintSet":
        return cls(SetKind.SIMPLEX, dim)

    @classmethod
    def box(cls, lower, upper, dim: int | None = None) -> "ConstraintSet":
        if dim is None:
            dim = np.size(lower) if np.ndim(lower) else np.size(upper)
        return cls(SetKind.BOX, dim, lower, upper)

    @property
    def is_simplex(self) -> bool:
        return self.kind is SetKind.SIMPLEX

    def __eq__(self, other):
        if not isinstance(other, ConstraintSet):
            return NotImplemented
        if self.kind is not other.kind or self.dim != other.dim:
            return False
        if self.is_simplex:
            return True
        return bool(
            np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)
        )

    __hash__ = None

    def contains(self, x, tol: float = 1e-12):
        """Membership test along the last axis, with absolute tolerance ``tol``."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            return np.zeros(x.shape[:-1], dtype=bool)
        finite = np.all(np.isfinite(x), axis=-1)
        if self.is_simplex:
            return (
                finite
                & np.all(x >= -tol, axis=-1)
                & (np.abs(np.sum(x, axis=-1) - 1.0) <= tol)
            )
        return finite & np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)

    def vertices_farthest_from(self, b):
        """Vertex of the set farthest (Euclidean) from each point in ``b``."""
        b = np.asarray(b, dtype=float)
        if self.is_simplex:
            # ||e_k - b||^2 = ||b||^2 - 2 b_k + 1, largest at the smallest b_k
            k = np.argmin(b, axis=-1)
            return np.eye(self.dim)[k]
        return np.where(
            np.abs(self.lower - b) >= np.abs(self.upper - b), self.lower, self.upper
        )

    def sample(self, rng: np.random.Generator, size=None):
        """Uniform random points of the set."""
        shape = (() if size is None else tuple(np.atleast_1d(size))) + (self.dim,)
        if self.is_simplex:
            e = rng.standard_exponential(shape)
            return e / np.sum(e, axis=-1, keepdims=True)
        return self.lower + (self.upper - self.lower) * rng.random(shape)


def check_pairing(geom: MirrorGeometry, cset: ConstraintSet) -> None:
    """Reject geometry/set combinations outside the supported three."""
    if (geom.kind, cset.kind) not in SUPPORTED_PAIRS:
        raise GeometryError(
            f"unsupported pairing: {geom.kind.value} geometry with {cset.kind.value} set"
        )


def _check_nonnegative(x):
    if np.any(x < 0):
        raise GeometryError("negative coordinate for the entropy geometry (infeasible point)")


def _check_dims(x, y):
    if x.shape[-1] != y.shape[-1]:
        raise GeometryError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")


def bregman_divergence(geom: MirrorGeometry, x, y):
    """Bregman divergence ``phi(x) - phi(y) - <grad phi(y), x - y>``.

    For the entropy geometry this equals
    ``sum x log(x / y) - sum x + sum y``, i.e. the KL divergence on the simplex.
    ``y`` is floored at ``geom.entropy_floor`` before the logarithm.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_dims(x, y)
    if geom.is_entropy:
        _check_nonnegative(x)
        _check_nonnegative(y)
        yf = np.maximum(y, geom.entropy_floor)
        safe_x = np.where(x > 0, x, 1.0)
        terms = np.where(x > 0, x * (np.log(safe_x) - np.log(yf)), 0.0) - x + yf
        out = np.sum(terms, axis=-1)
    else:
        diff = x - y
        out = 0.5 * np.sum(diff * diff, axis=-1)
    # cancellation can leave a tiny negative value
    return np.maximum(out, 0.0)


def project_simplex(y):
    """Euclidean projection onto the probability simplex (sort and threshold).

    Works row-wise on ``(..., d)`` arrays.
    """
    y = np.asarray(y, dtype=float)
    d = y.shape[-1]
    u = -np.sort(-y, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    ind = np.arange(1, d + 1)
    cond = u - css / ind > 0
    # cond holds on a prefix; rho is its length
    rho = np.count_nonzero(cond, axis=-1)
    theta = np.take_along_axis(css, (rho - 1)[..., None], axis=-1) / rho[..., None]
    return np.maximum(y - theta, 0.0)


def project_box(y, lower, upper):
    return np.clip(y, lower, upper)


def euclidean_project(cset: ConstraintSet, y):
    """Euclidean projection onto ``cset``."""
    y = np.asarray(y, dtype=float)
    if cset.is_simplex:
        return project_simplex(y)
    return project_box(y, cset.lower, cset.upper)


def _normalize_log_weights(logw):
    logw = logw - np.max(logw, axis=-1, keepdims=True)
    w = np.exp(logw)
    total = np.sum(w, axis=-1, keepdims=True)
    if np.any(~(total > 0)) or np.any(~np.isfinite(total)):
        raise FloatingPointError("entropic normalization failed (weights underflow or NaN)")
    return w / total


def floor_simplex(x, floor: float = DEFAULT_ENTROPY_FLOOR):
    """Clamp coordinates at ``floor`` and renormalize to sum one."""
    x = np.maximum(np.asarray(x, dtype=float), floor)
    return x / np.sum(x, axis=-1, keepdims=True)


def bregman_project(geom: MirrorGeometry, cset: ConstraintSet, y):
    """``argmin_{w in X} D(w || y)`` for the supported pairings.

    Euclidean/box clamps, Euclidean/simplex uses the sort-based projection,
    entropy/simplex normalizes ``y``.
    """
    check_pairing(geom, cset)
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != cset.dim:
        raise GeometryError(f"dimension mismatch: {y.shape[-1]} vs {cset.dim}")
    if geom.is_entropy:
        if np.any(y < 0):
            raise GeometryError("entropy projection needs a nonnegative point")
        with np.errstate(divide="ignore"):
            logy = np.log(np.maximum(y, 0.0))
        return _normalize_log_weights(logy)
    return euclidean_project(cset, y)


def mirror_step(geom: MirrorGeometry, cset: ConstraintSet, x, g, eta):
    """One mirror descent update from ``x`` with (sub)gradient ``g``.

    Takes the dual step ``grad phi(y) = grad phi(x) - eta * g`` and returns the
    Bregman projection of ``y`` onto ``cset``. ``eta`` may be a scalar or
    broadcastable against the leading axes of ``x``.

    Returns
    -------
    z : ndarray
        The new point, same shape as ``x``; always inside ``cset``.
    """
    check_pairing(geom, cset)
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_dims(x, g)
    eta = _as_step(eta, x)
    # a sum is finite iff every entry is (inf - inf gives nan)
    if not np.isfinite(np.sum(g)):
        raise FloatingPointError("non-finite gradient passed to mirror_step")
    if geom.is_entropy:
        x = floor_simplex(x, geom.entropy_floor)
        theta = geom.grad_phi(x) - eta * g
        # projecting exp(theta - 1) by normalization; done in the log domain
        z = _normalize_log_weights(theta - 1.0)
    else:
        z = euclidean_project(cset, geom.grad_phi_inv(geom.grad_phi(x) - eta * g))
    assert np.isfinite(np.sum(z))
    return z


def entropic_step(x, g, eta, floor: float = DEFAULT_ENTROPY_FLOOR):
    """Closed-form entropic (multiplicative weights) update on the simplex.

    ``z_j = x_j exp(-eta g_j) / sum_l x_l exp(-eta g_l)``. Exponents are shifted
    by their maximum before exponentiation, and ``x`` is floored at ``floor``.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_dims(x, g)
    eta = _as_step(eta, x)
    x = floor_simplex(x, floor)
    return _normalize_log_weights(np.log(x) - eta * g)


def _as_step(eta, x):
    if isinstance(eta, (float, int)):
        if not 0.0 < eta < np.inf:
            raise ValueError("step size must be positive and finite")
        return float(eta)
    eta = np.asarray(eta, dtype=float)
    if np.any(~(eta > 0)) or np.any(~np.isfinite(eta)):
        raise ValueError("step size must be positive and finite")
    if eta.ndim:
        eta = eta.reshape(eta.shape + (1,) * (x.ndim - eta.ndim))
    return eta


def euclidean_diameter(cset: ConstraintSet) -> float:
    """``max_{x, y in X} ||x - y||_2``."""
    if cset.is_simplex:
        return float(np.sqrt(2.0)) if cset.dim > 1 else 0.0
    return float(np.linalg.norm(cset.upper - cset.lower))


def phi_diameter(geom: MirrorGeometry, cset: ConstraintSet) -> float:
    """``(max_X phi - min_X phi) ** 0.5`` in closed form."""
    check_pairing(geom, cset)
    d = cset.dim
    if geom.is_entropy:
        # max 0 at a vertex, min -log d at the barycenter
        return float(np.sqrt(np.log(d)))
    if cset.is_simplex:
        return float(np.sqrt(0.5 * (1.0 - 1.0 / d)))
    far = np.maximum(np.abs(cset.lower), np.abs(cset.upper))
    near = np.clip(0.0, cset.lower, cset.upper)
    return float(np.sqrt(0.5 * np.sum(far**2) - 0.5 * np.sum(near**2)))


def phi_minimizer(geom: MirrorGeometry, cset: ConstraintSet) -> np.ndarray:
    """``argmin_{x in X} phi(x)``: the barycenter of the simplex or the point of X nearest 0."""
    check_pairing(geom, cset)
    if cset.is_simplex:
        return np.full(cset.dim, 1.0 / cset.dim)
    return np.clip(np.zeros(cset.dim), cset.lower, cset.upper)
