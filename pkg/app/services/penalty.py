"""
Group-thresholding functions, their robust losses and score functions.

Every function here depends on its input only through the Euclidean norm and the
direction, so each is computed as ``scale(||z||) * z``. Row-wise variants accept a
T x p matrix and treat each row as one group.
"""

import math

import numpy as np

from app.core.exceptions import InvalidArgumentError
from app.models.enums import PenaltyFamily
from app.models.penalty import PenaltySpec


def _as_group(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise InvalidArgumentError("group vector must be finite")
    return z


def _row_norms(Z: np.ndarray) -> np.ndarray:
    return np.linalg.norm(Z, axis=-1)


def _soft_scale(norms: np.ndarray, lam: float) -> np.ndarray:
    """max(0, 1 - lam/||z||) with the ratio taken as 0 at z = 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > lam, 1.0 - lam / np.where(norms > 0, norms, 1.0), 0.0)
    return scale


def _threshold_scale(norms: np.ndarray, spec: PenaltySpec) -> np.ndarray:
    lam = spec.lam
    family = spec.family
    if math.isinf(lam):
        return np.zeros_like(norms)

    if family == PenaltyFamily.GROUP_LASSO:
        scale = _soft_scale(norms, lam)
    elif family == PenaltyFamily.GROUP_SCAD:
        gamma = spec.gamma
        scale = np.where(
            norms <= 2 * lam,
            _soft_scale(norms, lam),
            np.where(
                norms <= gamma * lam,
                (gamma - 1) / (gamma - 2) * _soft_scale(norms, gamma * lam / (gamma - 1)),
                1.0,
            ),
        )
    elif family == PenaltyFamily.GROUP_MCP:
        gamma = spec.gamma
        scale = np.where(norms <= gamma * lam, gamma / (gamma - 1) * _soft_scale(norms, lam), 1.0)
    elif family == PenaltyFamily.MULTI_TUKEY:
        if lam == 0:
            scale = np.ones_like(norms)
        else:
            ratio = (norms / lam) ** 2
            scale = np.where(norms <= lam, 1.0 - (1.0 - ratio) ** 2, 1.0)
    else:  # pragma: no cover
        raise InvalidArgumentError(f"unsupported penalty family {family}")

    # Theta(0) = 0 for every family
    return np.where(norms > 0, scale, 0.0)


def group_soft_threshold(z, lam: float) -> np.ndarray:
    """
    Group soft-thresholding ``max(0, 1 - lam/||z||) z``.

    Args:
        z: group vector
        lam: non-negative threshold

    Returns:
        The shrunken vector; zero when ``||z|| <= lam``.
    """
    if lam < 0 or math.isnan(lam):
        raise InvalidArgumentError("lambda must be non-negative")
    z = _as_group(z)
    if z.ndim != 1:
        raise InvalidArgumentError("group_soft_threshold expects a single group vector")
    if math.isinf(lam):
        return np.zeros_like(z)
    return float(_soft_scale(np.asarray(np.linalg.norm(z)), lam)) * z


def threshold(z, spec: PenaltySpec) -> np.ndarray:
    """
    Closed-form group-thresholding function of the penalty family.

    The output is always a non-negative multiple of ``z``.
    """
    z = _as_group(z)
    if z.ndim != 1:
        raise InvalidArgumentError("threshold expects a single group vector; use threshold_rows for matrices")
    return float(_threshold_scale(np.asarray(np.linalg.norm(z)), spec)) * z


def threshold_rows(Z, spec: PenaltySpec) -> np.ndarray:
    """Apply :func:`threshold` to every row of ``Z``."""
    Z = _as_group(Z)
    if Z.ndim != 2:
        raise InvalidArgumentError("threshold_rows expects a matrix")
    return _threshold_scale(_row_norms(Z), spec)[:, None] * Z


def psi(z, spec: PenaltySpec) -> np.ndarray:
    """Score function ``z - threshold(z)``."""
    z = _as_group(z)
    return z - threshold(z, spec)


def psi_rows(Z, spec: PenaltySpec) -> np.ndarray:
    Z = _as_group(Z)
    return Z - threshold_rows(Z, spec)


def _robust_loss_norm(r: np.ndarray, spec: PenaltySpec) -> np.ndarray:
    lam = spec.lam
    family = spec.family
    if math.isinf(lam):
        return 0.5 * r**2 if family != PenaltyFamily.MULTI_TUKEY else np.zeros_like(r)

    if family == PenaltyFamily.GROUP_LASSO:
        return np.where(r <= lam, 0.5 * r**2, lam * r - 0.5 * lam**2)
    if family == PenaltyFamily.GROUP_SCAD:
        g = spec.gamma
        return np.select(
            [r <= lam, r < 2 * lam, r <= g * lam],
            [
                0.5 * r**2,
                lam * r - 0.5 * lam**2,
                g * lam / (g - 2) * r - r**2 / (2 * (g - 2)) - (g + 2) / (2 * (g - 2)) * lam**2,
            ],
            default=0.5 * (g + 1) * lam**2,
        )
    if family == PenaltyFamily.GROUP_MCP:
        g = spec.gamma
        return np.select(
            [r <= lam, r <= g * lam],
            [0.5 * r**2, g * lam / (g - 1) * r - r**2 / (2 * (g - 1)) - g * lam**2 / (2 * (g - 1))],
            default=0.5 * g * lam**2,
        )
    if family == PenaltyFamily.MULTI_TUKEY:
        if lam == 0:
            return np.where(r > 0, 1.0, 0.0)
        return np.where(r <= lam, 1.0 - (1.0 - (r / lam) ** 2) ** 3, 1.0)
    raise InvalidArgumentError(f"unsupported penalty family {family}")  # pragma: no cover


def robust_loss(z, spec: PenaltySpec) -> float:
    """
    Multivariate robust loss implied by the thresholding function.

    Group lasso gives the multivariate Huber loss. Multivariate Tukey saturates at 1
    outside radius lambda.
    """
    z = _as_group(z)
    return float(_robust_loss_norm(np.asarray(np.linalg.norm(z)), spec))


def envelope(z, spec: PenaltySpec) -> float:
    """
    ``min_o 1/2 ||z - o||^2 + P(o)``, the potential whose gradient is :func:`psi`.

    Identical to :func:`robust_loss` except for multivariate Tukey, which carries the
    factor lambda^2 / 6.
    """
    z = _as_group(z)
    return float(envelope_rows(z[None, :], spec)[0])


def envelope_rows(Z, spec: PenaltySpec) -> np.ndarray:
    """Row-wise :func:`envelope`."""
    Z = _as_group(Z)
    r = _row_norms(Z)
    if spec.family != PenaltyFamily.MULTI_TUKEY:
        return _robust_loss_norm(r, spec)
    lam = spec.lam
    if lam == 0:
        return np.zeros_like(r)
    inside = 0.5 * r**2 - r**4 / (2 * lam**2) + r**6 / (6 * lam**4)
    return np.where(r <= lam, inside, lam**2 / 6.0)


def _scad_norm(t: np.ndarray, lam: float, g: float) -> np.ndarray:
    return np.select(
        [t <= lam, t <= g * lam],
        [lam * t, (2 * g * lam * t - t**2 - lam**2) / (2 * (g - 1))],
        default=0.5 * (g + 1) * lam**2,
    )


def _mcp_norm(t: np.ndarray, lam: float, g: float) -> np.ndarray:
    return np.where(t <= g * lam, lam * t - t**2 / (2 * g), 0.5 * g * lam**2)


def penalty_value_rows(O, spec: PenaltySpec) -> np.ndarray:
    """Row-wise group penalty ``P(o; lambda, gamma)``."""
    O = _as_group(O)
    t = _row_norms(O)
    lam = spec.lam
    if math.isinf(lam):
        return np.where(t > 0, np.inf, 0.0)
    if spec.family == PenaltyFamily.GROUP_LASSO:
        return lam * t
    if spec.family == PenaltyFamily.GROUP_SCAD:
        return _scad_norm(t, lam, spec.gamma)
    if spec.family == PenaltyFamily.GROUP_MCP:
        return _mcp_norm(t, lam, spec.gamma)
    raise InvalidArgumentError("multivariate Tukey has no closed-form penalty; use envelope()")


def penalty_value(o, spec: PenaltySpec) -> float:
    """Group penalty ``P(o; lambda, gamma)`` of one group."""
    o = _as_group(o)
    return float(penalty_value_rows(o[None, :], spec)[0])


def ball_projection(Z, radius) -> np.ndarray:
    """
    Row-wise ``min(||z||, radius) z / ||z||`` (projection onto the radius ball), 0 at z = 0.

    ``radius`` is a scalar or one radius per row.
    """
    Z = np.asarray(Z, dtype=float)
    single = Z.ndim == 1
    Z2 = Z[None, :] if single else Z
    norms = _row_norms(Z2)
    radius = np.broadcast_to(np.asarray(radius, dtype=float), norms.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > radius, radius / np.where(norms > 0, norms, 1.0), 1.0)
    out = scale[:, None] * Z2
    return out[0] if single else out
