import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dsmd.geometry import (
    ConstraintSet,
    GeometryError,
    MirrorGeometry,
    bregman_divergence,
    bregman_project,
    entropic_step,
    euclidean_diameter,
    euclidean_project,
    mirror_step,
    phi_diameter,
    phi_minimizer,
    project_simplex,
)

EUC = MirrorGeometry.euclidean()
ENT = MirrorGeometry.entropy()
BOX2 = ConstraintSet.box(-1.0, 1.0, 2)
SIMPLEX2 = ConstraintSet.simplex(2)


def simplex_projection_bisection(y, iters=200):
    """Independent oracle: bisection on the threshold tau with sum max(y - tau, 0) = 1."""
    lo, hi = np.min(y) - 1.0, np.max(y)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.maximum(y - mid, 0.0).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    return np.maximum(y - 0.5 * (lo + hi), 0.0)


def kl_loop(x, y):
    return sum(xi * np.log(xi / yi) for xi, yi in zip(x, y) if xi > 0)


class TestConstruction:
    def test_geometry_defaults(self):
        assert EUC.sigma_phi == 1.0
        assert ENT.sigma_phi == 1.0
        assert ENT.entropy_floor == 1e-12

    @pytest.mark.parametrize("floor", [0.0, -1e-12, 1e-6])
    def test_bad_entropy_floor(self, floor):
        with pytest.raises(GeometryError):
            MirrorGeometry.entropy(floor)

    def test_sigma_phi_below_one(self):
        with pytest.raises(GeometryError):
            MirrorGeometry(EUC.kind, sigma_phi=0.5)

    def test_box_needs_ordered_bounds(self):
        with pytest.raises(GeometryError):
            ConstraintSet.box([0.0, 1.0], [1.0, 1.0])

    def test_entropy_box_pairing_rejected(self):
        with pytest.raises(GeometryError, match="unsupported pairing"):
            bregman_project(ENT, BOX2, np.array([0.5, 0.5]))
        with pytest.raises(GeometryError):
            mirror_step(ENT, BOX2, np.array([0.5, 0.5]), np.zeros(2), 1.0)

    def test_membership(self):
        assert SIMPLEX2.contains([0.3, 0.7])
        assert not SIMPLEX2.contains([0.3, 0.6])
        assert not SIMPLEX2.contains([1.1, -0.1])
        assert BOX2.contains([1.0, -1.0])
        assert not BOX2.contains([1.0 + 1e-9, 0.0])
        assert not BOX2.contains([np.nan, 0.0])


class TestBregmanDivergence:
    def test_euclidean_example(self):
        assert bregman_divergence(EUC, [1.0, 2.0], [0.0, 0.0]) == pytest.approx(2.5, abs=1e-15)

    def test_entropy_self_divergence(self):
        assert bregman_divergence(ENT, [0.3, 0.7], [0.3, 0.7]) == pytest.approx(0.0, abs=1e-15)

    def test_entropy_example(self):
        # hand evaluation: 0.5 ln(0.5/0.25) + 0.5 ln(0.5/0.75)
        expected = 0.5 * np.log(2.0) + 0.5 * np.log(2.0 / 3.0)
        assert expected == pytest.approx(0.143841, abs=1e-6)
        assert bregman_divergence(ENT, [0.5, 0.5], [0.25, 0.75]) == pytest.approx(expected, abs=1e-14)

    def test_matches_kl_loop(self, rng):
        S = ConstraintSet.simplex(7)
        x, y = S.sample(rng, 50), S.sample(rng, 50)
        got = bregman_divergence(ENT, x, y)
        np.testing.assert_allclose(got, [kl_loop(a, b) for a, b in zip(x, y)], rtol=1e-11, atol=1e-14)

    def test_matches_definition(self, rng):
        # phi(x) - phi(y) - <grad phi(y), x - y> evaluated from the geometry's own pieces
        x = rng.random(5) + 0.1
        y = rng.random(5) + 0.1
        for geom in (EUC, ENT):
            ref = geom.phi(x) - geom.phi(y) - geom.grad_phi(y) @ (x - y)
            assert bregman_divergence(geom, x, y) == pytest.approx(ref, rel=1e-12, abs=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(GeometryError, match="dimension"):
            bregman_divergence(EUC, [1.0, 2.0], [1.0])

    def test_negative_coordinate_rejected(self):
        with pytest.raises(GeometryError, match="infeasible"):
            bregman_divergence(ENT, [-0.1, 1.1], [0.5, 0.5])

    @pytest.mark.parametrize("d", [2, 5, 10])
    def test_nonnegative_and_strongly_convex(self, d):
        rng = np.random.default_rng(d)
        for geom, cset in ((EUC, ConstraintSet.box(-1, 1, d)), (EUC, ConstraintSet.simplex(d)),
                           (ENT, ConstraintSet.simplex(d))):
            x, y = cset.sample(rng, 10_000), cset.sample(rng, 10_000)
            D = bregman_divergence(geom, x, y)
            assert D.min() >= -1e-12
            # Pinsker on the simplex for entropy: KL >= 0.5 ||x-y||_1^2 >= 0.5 ||x-y||_2^2
            assert np.min(D - 0.5 * geom.sigma_phi * np.sum((x - y) ** 2, axis=-1)) >= -1e-9


class TestProjection:
    def test_box_clamp(self):
        np.testing.assert_array_equal(bregman_project(EUC, BOX2, [2.0, -0.5]), [1.0, -0.5])

    def test_simplex_feasible_point_unchanged(self):
        np.testing.assert_allclose(bregman_project(EUC, SIMPLEX2, [0.5, 0.5]), [0.5, 0.5], atol=1e-15)

    def test_simplex_grid_oracle(self):
        y = np.array([1.5, 0.5])
        # brute force over the 1-simplex at resolution 1e-4
        w0 = np.linspace(0.0, 1.0, 10_001)
        W = np.column_stack([w0, 1.0 - w0])
        best = W[np.argmin(np.sum((W - y) ** 2, axis=1))]
        np.testing.assert_allclose(best, [1.0, 0.0], atol=1e-4)
        z = bregman_project(EUC, SIMPLEX2, y)
        np.testing.assert_allclose(z, [1.0, 0.0], atol=1e-15)
        # KKT: y - z = tau * 1 - mu, mu >= 0, mu_i z_i = 0
        tau = (y - z)[z > 0][0]
        mu = tau - (y - z)
        assert np.all(mu >= -1e-12) and np.all(np.abs(mu * z) <= 1e-12)

    @settings(max_examples=200, deadline=None)
    @given(arrays(float, st.integers(1, 12), elements=st.floats(-5, 5)))
    def test_simplex_matches_bisection(self, y):
        np.testing.assert_allclose(project_simplex(y), simplex_projection_bisection(y), atol=1e-9)

    def test_simplex_batched(self, rng):
        Y = rng.normal(size=(30, 6))
        Z = project_simplex(Y)
        for y, z in zip(Y, Z):
            np.testing.assert_allclose(z, project_simplex(y), atol=0)
        np.testing.assert_allclose(Z.sum(axis=1), 1.0, atol=1e-12)

    def test_entropy_projection_normalizes(self):
        np.testing.assert_allclose(bregman_project(ENT, ConstraintSet.simplex(3), [1.0, 2.0, 1.0]),
                                   [0.25, 0.5, 0.25])


class TestMirrorStep:
    def test_euclidean_interior(self):
        z = mirror_step(EUC, BOX2, np.zeros(2), np.array([1.0, -1.0]), 0.5)
        np.testing.assert_allclose(z, [-0.5, 0.5], atol=1e-15)

    @pytest.mark.parametrize("eta", [0.1, 1.0, 37.0])
    def test_entropy_zero_gradient_fixed_point(self, eta):
        z = mirror_step(ENT, SIMPLEX2, np.array([0.5, 0.5]), np.zeros(2), eta)
        np.testing.assert_allclose(z, [0.5, 0.5], atol=1e-15)

    def test_entropy_example(self):
        # weights 0.5 e^{ln 3} = 1.5 and 0.5, normalized
        z = mirror_step(ENT, SIMPLEX2, np.array([0.5, 0.5]), np.array([-np.log(3.0), 0.0]), 1.0)
        np.testing.assert_allclose(z, [0.75, 0.25], atol=1e-14)

    def test_entropic_closed_form_examples(self):
        np.testing.assert_allclose(entropic_step([0.5, 0.5], [0.0, 0.0], 1.0), [0.5, 0.5])
        np.testing.assert_allclose(entropic_step([0.5, 0.5], [-np.log(3.0), 0.0], 1.0), [0.75, 0.25],
                                   atol=1e-14)
        for c in (-3.0, 0.0, 2.5, 1e3):
            np.testing.assert_allclose(entropic_step([0.2, 0.8], [c, c], 1.0), [0.2, 0.8], atol=1e-14)

    def test_closed_form_equivalence(self, rng):
        worst = 0.0
        for _ in range(1000):
            d = int(rng.integers(2, 11))
            S = ConstraintSet.simplex(d)
            x = S.sample(rng)
            g = rng.normal(scale=3.0, size=d)
            eta = float(rng.uniform(0.01, 5.0))
            worst = max(worst, np.max(np.abs(entropic_step(x, g, eta) - mirror_step(ENT, S, x, g, eta))))
        assert worst <= 1e-10

    def test_euclidean_equivalence(self, rng):
        for cset in (ConstraintSet.box(-1, 1, 6), ConstraintSet.box(np.arange(6.0), np.arange(6.0) + 2.0),
                     ConstraintSet.simplex(6)):
            for _ in range(200):
                x = cset.sample(rng)
                g = rng.normal(scale=4.0, size=6)
                eta = rng.uniform(0.01, 2.0)
                z = mirror_step(EUC, cset, x, g, eta)
                np.testing.assert_allclose(z, euclidean_project(cset, x - eta * g), atol=1e-12)

    def test_feasibility_closure(self, rng):
        for geom, cset in ((EUC, ConstraintSet.box(-1, 1, 10)), (EUC, ConstraintSet.simplex(10)),
                           (ENT, ConstraintSet.simplex(10))):
            X = cset.sample(rng, 500)
            G = rng.normal(scale=50.0, size=X.shape)
            Z = mirror_step(geom, cset, X, G, rng.uniform(0.01, 100.0, size=500))
            assert np.all(cset.contains(Z, tol=1e-12))

    def test_shift_invariance(self, rng):
        for _ in range(200):
            d = int(rng.integers(2, 11))
            x = ConstraintSet.simplex(d).sample(rng)
            g = rng.normal(size=d)
            c = rng.normal(scale=100.0)
            eta = rng.uniform(0.1, 3.0)
            np.testing.assert_allclose(entropic_step(x, g + c, eta), entropic_step(x, g, eta), atol=1e-12)

    def test_huge_exponents_do_not_overflow(self):
        z = entropic_step([0.5, 0.5], [-1e6, 1e6], 10.0)
        np.testing.assert_allclose(z, [1.0, 0.0])
        assert np.all(np.isfinite(z))

    def test_boundary_input_is_floored(self):
        z = mirror_step(ENT, SIMPLEX2, np.array([1.0, 0.0]), np.array([1.0, -1.0]), 1.0)
        assert np.all(np.isfinite(z)) and SIMPLEX2.contains(z)

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            mirror_step(EUC, BOX2, np.zeros(2), np.ones(2), 0.0)


class TestDiameters:
    def test_entropy_simplex_phi_diameter(self):
        assert phi_diameter(ENT, ConstraintSet.simplex(10)) == pytest.approx(np.sqrt(np.log(10)), abs=1e-15)
        assert np.sqrt(np.log(10)) == pytest.approx(1.51743, abs=1e-5)

    def test_entropy_extremes_oracle(self, rng):
        S = ConstraintSet.simplex(10)
        vals = ENT.phi(S.sample(rng, 20_000))
        # sampled values sit between the closed-form extremes
        assert vals.max() <= 0.0 and vals.min() >= -np.log(10) - 1e-12
        assert ENT.phi(np.eye(10)[3]) == 0.0
        assert ENT.phi(np.full(10, 0.1)) == pytest.approx(-np.log(10), abs=1e-14)

    def test_box_diameter(self):
        assert euclidean_diameter(ConstraintSet.box(-1, 1, 10)) == pytest.approx(2 * np.sqrt(10))
        assert 2 * np.sqrt(10) == pytest.approx(6.32456, abs=1e-5)

    def test_simplex_diameter(self):
        assert euclidean_diameter(ConstraintSet.simplex(2)) == pytest.approx(np.sqrt(2))

    def test_euclidean_phi_diameter_by_enumeration(self):
        box = ConstraintSet.box([-1.0, 0.5, -2.0], [3.0, 1.0, 0.5])
        corners = np.array(list(itertools.product(*zip(box.lower, box.upper))))
        hi = EUC.phi(corners).max()
        lo = EUC.phi(phi_minimizer(EUC, box))
        assert phi_diameter(EUC, box) == pytest.approx(np.sqrt(hi - lo))
