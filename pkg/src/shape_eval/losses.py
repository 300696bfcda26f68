"""Training objectives as pure numeric functions with analytic gradients.

* scale/shift-invariant depth loss: each map is self-aligned by its masked
  median and mean absolute deviation, then compared by MAE
* projection loss: masked MSE between 3D projection maps, with chain-rule
  gradients through unprojection to depth and intrinsics
* occupancy loss: standard binary cross entropy on clamped probabilities
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CameraIntrinsics, DepthMap, ProjectionMap
from .geometry import unproject, unproject_gradients

BCE_EPS = 1e-7
MAD_EPS = 1e-8


@dataclass(frozen=True)
class LossValue:
    value: float
    gradients: dict | None = None

    def __post_init__(self):
        if not np.isfinite(self.value) or self.value < 0.0:
            raise ValueError(f"loss value must be finite and >= 0, got {self.value}")


def _check_masks(a_mask: np.ndarray, b_mask: np.ndarray, minimum: int) -> np.ndarray:
    if a_mask.shape != b_mask.shape or not np.array_equal(a_mask, b_mask):
        raise ValueError("prediction and ground-truth masks must be identical")
    n = int(a_mask.sum())
    if n < minimum:
        raise ValueError(f"need at least {minimum} masked pixels, got {n}")
    return a_mask


def _median_weights(values: np.ndarray) -> np.ndarray:
    """Subgradient weights of the median; ties go to the lower index."""
    m = len(values)
    order = np.argsort(values, kind="stable")
    w = np.zeros(m)
    if m % 2 == 1:
        w[order[m // 2]] = 1.0
    else:
        w[order[m // 2 - 1]] += 0.5
        w[order[m // 2]] += 0.5
    return w


def _align_median_mad(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    shift = float(np.median(values))
    r = values - shift
    mad = float(np.mean(np.abs(r)))
    return r / max(mad, MAD_EPS), shift, mad


def ssimae_depth_loss(
    pred: DepthMap,
    gt: DepthMap,
    with_gradients: bool = False,
    alignment: str = "median-mad",
) -> LossValue:
    """Scale/shift-invariant depth MAE over the shared mask.

    ``alignment="median-mad"`` self-aligns both maps (shift = masked median,
    scale = mean absolute deviation from it); ``"least-squares"`` instead
    fits pred to gt affinely before the MAE. Gradients (w.r.t. the masked
    prediction pixels) are only available for the median/MAD form and use
    the lower-index median subgradient at ties.
    """
    mask = _check_masks(pred.mask, gt.mask, minimum=2)
    p = pred.values[mask]
    g = gt.values[mask]
    m = len(p)

    if alignment == "least-squares":
        a = np.stack([p, np.ones(m)], axis=1)
        coef, *_ = np.linalg.lstsq(a, g, rcond=None)
        value = float(np.mean(np.abs(a @ coef - g)))
        if with_gradients:
            raise NotImplementedError("gradients only implemented for median-mad alignment")
        return LossValue(value=value)
    if alignment != "median-mad":
        raise ValueError(f"unknown alignment {alignment!r}")

    u, shift_p, s_p = _align_median_mad(p)
    v, _, _ = _align_median_mad(g)
    diff = u - v
    value = float(np.mean(np.abs(diff)))
    if not with_gradients:
        return LossValue(value=value)

    w = np.sign(diff) / m
    dt = _median_weights(p)
    r = p - shift_p
    sig = np.sign(r)
    a_sum = w.sum()
    if s_p <= MAD_EPS:
        grad_masked = (w - dt * a_sum) / MAD_EPS
    else:
        ds = (sig - dt * sig.sum()) / m
        b_sum = float(w @ r)
        grad_masked = (w - dt * a_sum) / s_p - b_sum * ds / s_p**2
    grad = np.zeros(pred.shape)
    grad[mask] = grad_masked
    return LossValue(value=value, gradients={"depth": grad})


def projection_loss(
    pred: ProjectionMap, gt: ProjectionMap, with_gradients: bool = False
) -> LossValue:
    """Mean squared Euclidean difference of masked projection-map points."""
    mask = _check_masks(pred.mask, gt.mask, minimum=1)
    diff = pred.points[mask] - gt.points[mask]
    m = len(diff)
    value = float(np.sum(diff**2) / m)
    if not with_gradients:
        return LossValue(value=value)
    grad = np.zeros(pred.points.shape)
    grad[mask] = 2.0 * diff / m
    return LossValue(value=value, gradients={"points": grad})


def projection_loss_depth_intrinsics(
    depth: DepthMap, k: CameraIntrinsics, gt: ProjectionMap
) -> LossValue:
    """Projection loss of unproject(depth, k) with chain-rule gradients.

    Gradients cover the masked depth pixels and the four intrinsics scalars,
    proving out the differentiability of the unprojection unit.
    """
    pred = unproject(depth, k)
    base = projection_loss(pred, gt, with_gradients=True)
    d_points = base.gradients["points"]
    jac = unproject_gradients(depth, k)
    grads = {
        "depth": np.sum(d_points * jac.d_depth, axis=-1),
        "fx": float(np.sum(d_points * jac.d_fx)),
        "fy": float(np.sum(d_points * jac.d_fy)),
        "cx": float(np.sum(d_points * jac.d_cx)),
        "cy": float(np.sum(d_points * jac.d_cy)),
    }
    return LossValue(value=base.value, gradients=grads)


def occupancy_bce(
    pred_prob: np.ndarray, labels: np.ndarray, with_gradients: bool = False
) -> LossValue:
    """Mean binary cross entropy with predictions clamped to [eps, 1 - eps]."""
    p = np.asarray(pred_prob, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if p.shape != y.shape or p.size == 0:
        raise ValueError("predictions and labels must be matching non-empty vectors")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("labels must be binary (0 or 1)")
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    value = float(np.mean(-(y * np.log(pc) + (1.0 - y) * np.log1p(-pc))))
    if not with_gradients:
        return LossValue(value=value)
    grad = (pc - y) / (pc * (1.0 - pc)) / p.size
    return LossValue(value=value, gradients={"prob": grad})
