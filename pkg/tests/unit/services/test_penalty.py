"""
Tests for the group-thresholding functions and robust losses.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from app.core.exceptions import InvalidArgumentError
from app.models.enums import PenaltyFamily
from app.models.penalty import PenaltySpec
from app.services.penalty import (
    ball_projection,
    envelope,
    group_soft_threshold,
    penalty_value,
    psi,
    robust_loss,
    threshold,
    threshold_rows,
)

CONVEX_PROX_FAMILIES = (PenaltyFamily.GROUP_LASSO, PenaltyFamily.GROUP_SCAD, PenaltyFamily.GROUP_MCP)

group_vectors = st.lists(st.floats(min_value=-50, max_value=50, allow_nan=False), min_size=1, max_size=5).map(
    np.array
)


def _spec(family: PenaltyFamily, lam: float, gamma: float | None = None) -> PenaltySpec:
    return PenaltySpec.default(family, lam, gamma)


def _ray_prox(z: np.ndarray, spec: PenaltySpec) -> np.ndarray:
    """Numerical prox along the ray of z: min_t 1/2 (||z|| - t)^2 + P(t)."""
    r = float(np.linalg.norm(z))
    if r == 0:
        return np.zeros_like(z)
    direction = z / r

    def objective(t):
        return 0.5 * (r - t) ** 2 + penalty_value(np.array([t]), spec)

    grid = np.linspace(0.0, r, 2001)
    start = grid[np.argmin([objective(t) for t in grid])]
    step = r / 2000
    res = minimize_scalar(
        objective, bounds=(max(0.0, start - step), min(r, start + step)), method="bounded", options={"xatol": 1e-12}
    )
    t = min([0.0, res.x, start], key=objective)
    return t * direction


class TestGroupSoftThreshold:
    """Tests for group_soft_threshold."""

    def test_boundary_gives_zero(self):
        """Test that ||z|| = lambda maps to zero."""
        np.testing.assert_allclose(group_soft_threshold(np.array([3.0, 4.0]), 5.0), [0.0, 0.0])

    def test_identity_at_zero_lambda(self):
        """Test that lambda = 0 is the identity."""
        np.testing.assert_allclose(group_soft_threshold(np.array([3.0, 4.0]), 0.0), [3.0, 4.0])

    def test_shrinks_toward_zero(self):
        """Test the closed form against a hand computation."""
        np.testing.assert_allclose(group_soft_threshold(np.array([3.0, 4.0]), 2.5), [1.5, 2.0])

    def test_zero_vector(self):
        """Test that the zero vector stays zero."""
        np.testing.assert_allclose(group_soft_threshold(np.zeros(3), 1.0), np.zeros(3))

    def test_non_finite_input(self):
        """Test that non-finite input is rejected."""
        with pytest.raises(InvalidArgumentError):
            group_soft_threshold(np.array([np.nan, 1.0]), 1.0)

    def test_negative_lambda(self):
        """Test that a negative threshold is rejected."""
        with pytest.raises(InvalidArgumentError):
            group_soft_threshold(np.array([1.0, 1.0]), -1.0)

    def test_matches_numerical_prox(self):
        """Test against a numerical minimizer of 1/2||z - o||^2 + lambda ||o||."""
        z = np.array([3.0, 4.0])
        np.testing.assert_allclose(
            group_soft_threshold(z, 2.5), _ray_prox(z, _spec(PenaltyFamily.GROUP_LASSO, 2.5)), atol=1e-6
        )


class TestThreshold:
    """Tests for the family-specific thresholding functions."""

    def test_scad_identity_region(self):
        """Test that SCAD is the identity beyond gamma * lambda."""
        np.testing.assert_allclose(threshold(np.array([5.0, 0.0]), _spec(PenaltyFamily.GROUP_SCAD, 1.0, 3.7)), [5, 0])

    def test_scad_middle_region(self):
        """Test the middle SCAD regime."""
        result = threshold(np.array([3.0, 0.0]), _spec(PenaltyFamily.GROUP_SCAD, 1.0, 3.7))
        assert result[0] == pytest.approx(2.7 / 1.7 * (3.0 - 3.7 / 2.7), abs=1e-10)
        assert result[0] == pytest.approx(2.5882, abs=1e-4)
        assert result[1] == 0.0

    def test_mcp_inner_region(self):
        """Test the MCP regime below gamma * lambda."""
        np.testing.assert_allclose(threshold(np.array([1.5, 0.0]), _spec(PenaltyFamily.GROUP_MCP, 1.0, 3.0)), [0.75, 0])

    def test_tukey_outside_radius(self):
        """Test that Tukey is the identity outside radius lambda."""
        np.testing.assert_allclose(threshold(np.array([4.0, 0.0]), _spec(PenaltyFamily.MULTI_TUKEY, 3.0)), [4.0, 0.0])

    def test_tukey_inside_radius(self):
        """Test the Tukey formula o - o (1 - ||o||^2/lambda^2)^2."""
        z = np.array([1.0, 1.0])
        expected = z - z * (1 - 2.0 / 9.0) ** 2
        np.testing.assert_allclose(threshold(z, _spec(PenaltyFamily.MULTI_TUKEY, 3.0)), expected)

    def test_infinite_lambda_gives_zero(self):
        """Test that an infinite threshold pins the output at zero."""
        for family in PenaltyFamily:
            np.testing.assert_allclose(threshold(np.array([100.0, -3.0]), _spec(family, math.inf)), [0.0, 0.0])

    def test_invalid_gamma(self):
        """Test that gamma bounds are enforced."""
        with pytest.raises(ValueError):
            PenaltySpec(family=PenaltyFamily.GROUP_SCAD, lam=1.0, gamma=2.0)
        with pytest.raises(ValueError):
            PenaltySpec(family=PenaltyFamily.GROUP_MCP, lam=1.0, gamma=1.0)

    def test_rows_match_single_groups(self, rng):
        """Test that threshold_rows applies threshold to each row."""
        Z = rng.normal(0, 3, size=(6, 3))
        spec = _spec(PenaltyFamily.GROUP_SCAD, 1.5)
        expected = np.vstack([threshold(z, spec) for z in Z])
        np.testing.assert_allclose(threshold_rows(Z, spec), expected)

    @pytest.mark.parametrize("family", CONVEX_PROX_FAMILIES)
    def test_matches_numerical_prox_on_random_draws(self, family, rng):
        """Test threshold against a 1-D numerical prox along the ray of z."""
        for _ in range(200):
            p = int(rng.integers(1, 5))
            z = rng.normal(0, 4, size=p)
            lam = float(rng.uniform(0.1, 3.0))
            gamma = float(rng.uniform(2.5, 6.0)) if family != PenaltyFamily.GROUP_LASSO else None
            spec = _spec(family, lam, gamma)
            np.testing.assert_allclose(threshold(z, spec), _ray_prox(z, spec), rtol=1e-6, atol=1e-6)

    @given(group_vectors, st.floats(min_value=0.0, max_value=20.0), st.sampled_from(list(PenaltyFamily)))
    @hsettings(max_examples=60, deadline=None)
    def test_shrinkage_and_direction(self, z, lam, family):
        """Test that the output is a scalar multiple of z in [0, 1]."""
        out = threshold(z, _spec(family, lam))
        norm = np.linalg.norm(z)
        assert np.linalg.norm(out) <= norm + 1e-9
        if norm > 0:
            scale = float(out @ z) / norm**2
            assert -1e-12 <= scale <= 1 + 1e-12
            np.testing.assert_allclose(out, scale * z, atol=1e-9)

    @given(st.floats(min_value=0.0, max_value=2 * np.pi), st.floats(min_value=0.0, max_value=30.0))
    @hsettings(max_examples=40, deadline=None)
    def test_rotational_equivariance(self, angle, radius):
        """Test that threshold(Qz) = Q threshold(z) for rotations Q."""
        Q = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
        z = np.array([radius, 0.3 * radius])
        for family in PenaltyFamily:
            spec = _spec(family, 4.0)
            np.testing.assert_allclose(threshold(Q @ z, spec), Q @ threshold(z, spec), atol=1e-9)


class TestPsi:
    """Tests for the score function psi."""

    def test_group_lasso(self):
        """Test psi = z - soft-threshold(z)."""
        np.testing.assert_allclose(psi(np.array([3.0, 4.0]), _spec(PenaltyFamily.GROUP_LASSO, 2.5)), [1.5, 2.0])

    def test_zero_vector(self):
        """Test that psi(0) = 0 for every family."""
        for family in PenaltyFamily:
            np.testing.assert_allclose(psi(np.zeros(2), _spec(family, 1.0)), [0.0, 0.0])

    def test_scad_identity_region(self):
        """Test that psi vanishes where SCAD is the identity."""
        np.testing.assert_allclose(psi(np.array([5.0, 0.0]), _spec(PenaltyFamily.GROUP_SCAD, 1.0)), [0.0, 0.0])

    @pytest.mark.parametrize("family", list(PenaltyFamily))
    def test_psi_is_gradient_of_envelope(self, family, rng):
        """Test psi against central differences of the envelope."""
        spec = _spec(family, 2.0)
        h = 1e-6
        for _ in range(20):
            z = rng.normal(0, 2.5, size=3)
            grad = np.array([(envelope(z + h * e, spec) - envelope(z - h * e, spec)) / (2 * h) for e in np.eye(3)])
            np.testing.assert_allclose(grad, psi(z, spec), atol=1e-5)

    def test_tukey_loss_gradient_scaling(self, rng):
        """Test that the gradient of the Tukey loss is (6 / lambda^2) psi."""
        lam = 2.0
        spec = _spec(PenaltyFamily.MULTI_TUKEY, lam)
        h = 1e-6
        z = np.array([0.7, -0.4, 0.9])
        grad = np.array(
            [(robust_loss(z + h * e, spec) - robust_loss(z - h * e, spec)) / (2 * h) for e in np.eye(3)]
        )
        np.testing.assert_allclose(grad, 6.0 / lam**2 * psi(z, spec), atol=1e-5)


class TestRobustLoss:
    """Tests for the implied multivariate robust losses."""

    def test_group_lasso_is_huber(self):
        """Test the multivariate Huber form for the group lasso."""
        spec = _spec(PenaltyFamily.GROUP_LASSO, 2.0)
        assert robust_loss(np.array([1.0, 0.0]), spec) == pytest.approx(0.5)
        assert robust_loss(np.array([3.0, 4.0]), spec) == pytest.approx(2.0 * 5.0 - 2.0)

    def test_tukey_saturates(self):
        """Test that the Tukey loss saturates at 1."""
        spec = _spec(PenaltyFamily.MULTI_TUKEY, 2.0)
        assert robust_loss(np.array([10.0, 0.0]), spec) == pytest.approx(1.0)
        assert robust_loss(np.zeros(2), spec) == 0.0

    @pytest.mark.parametrize("family", list(PenaltyFamily))
    def test_continuity_at_regime_boundaries(self, family):
        """Test continuity of the loss at lambda, 2 lambda and gamma lambda."""
        spec = _spec(family, 1.5)
        gamma = spec.gamma or 3.0
        for r in (1.5, 3.0, gamma * 1.5):
            below = robust_loss(np.array([r - 1e-9]), spec)
            above = robust_loss(np.array([r + 1e-9]), spec)
            assert below == pytest.approx(above, abs=1e-6)

    @pytest.mark.parametrize("family", CONVEX_PROX_FAMILIES)
    def test_envelope_is_minimum_over_o(self, family, rng):
        """Test that the loss equals min_o 1/2||z - o||^2 + P(o)."""
        spec = _spec(family, 1.2)
        for _ in range(20):
            z = rng.normal(0, 3, size=2)
            o = threshold(z, spec)
            direct = 0.5 * float(np.sum((z - o) ** 2)) + penalty_value(o, spec)
            assert robust_loss(z, spec) == pytest.approx(direct, abs=1e-10)
            assert envelope(z, spec) == pytest.approx(direct, abs=1e-10)

    def test_tukey_has_no_penalty_value(self):
        """Test that the Tukey penalty value is unavailable."""
        with pytest.raises(InvalidArgumentError):
            penalty_value(np.array([1.0]), _spec(PenaltyFamily.MULTI_TUKEY, 1.0))


class TestBallProjection:
    """Tests for ball_projection."""

    def test_inside_and_outside(self):
        """Test rows inside the ball are kept and others are scaled onto it."""
        Z = np.array([[3.0, 4.0], [0.3, 0.4], [0.0, 0.0]])
        out = ball_projection(Z, 1.0)
        np.testing.assert_allclose(out, [[0.6, 0.8], [0.3, 0.4], [0.0, 0.0]])

    def test_per_row_radius(self):
        """Test one radius per row."""
        Z = np.array([[3.0, 4.0], [3.0, 4.0]])
        out = ball_projection(Z, np.array([5.0, 2.5]))
        np.testing.assert_allclose(np.linalg.norm(out, axis=1), [5.0, 2.5])
