"""Image, depth, flow, and mask quality metrics.

All image metrics take float arrays; RGB images are (H, W, 3) in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# Reported PSNR is capped here; identical images hit the cap instead of inf.
PSNR_SENTINEL = 99.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at the 99 dB sentinel.

    10 * log10(peak^2 / MSE) over every channel; identical inputs report the
    sentinel rather than infinity.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_SENTINEL
    return min(PSNR_SENTINEL, float(10.0 * np.log10(peak * peak / mse)))


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _windowed_mean(img: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Separable valid-mode Gaussian filtering of a 2D array."""
    v = sliding_window_view(img, len(k), axis=0) @ k
    return sliding_window_view(v, len(k), axis=1) @ k


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Structural similarity with the standard 11x11 Gaussian window
    (sigma 1.5, K1 = 0.01, K2 = 0.03), averaged over valid windows and
    channels.  Symmetric in its arguments; ssim(x, x) is exactly 1.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    if a.ndim != 3:
        raise ValueError(f"expected (H, W) or (H, W, C) images, got {a.shape}")
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}")

    k = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    per_channel = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        mx = _windowed_mean(x, k)
        my = _windowed_mean(y, k)
        vx = _windowed_mean(x * x, k) - mx * mx
        vy = _windowed_mean(y * y, k) - my * my
        cxy = _windowed_mean(x * y, k) - mx * my
        s = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        per_channel.append(float(np.mean(s)))
    return float(np.mean(per_channel))


@dataclass(frozen=True)
class DepthAlignment:
    """Least-squares affine fit a * pred + b ~ gt over the valid mask."""

    scale: float
    offset: float
    degenerate: bool = False


def align_depth(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> DepthAlignment:
    """Fit (a, b) minimizing sum((a * pred + b - gt)^2) over masked pixels.

    A constant prediction makes the fit rank-deficient; then a = 0 and b is
    the mean ground-truth depth, with the degenerate flag set.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if pred.shape != gt.shape or mask.shape != pred.shape:
        raise ValueError("pred, gt, and mask must share one shape")
    x = pred[mask]
    y = gt[mask]
    if x.size == 0:
        raise ValueError("empty valid mask")
    mean_x = float(np.mean(x))
    var_x = float(np.mean((x - mean_x) ** 2))
    if var_x <= 1e-12 * max(1.0, mean_x * mean_x):
        return DepthAlignment(scale=0.0, offset=float(np.mean(y)), degenerate=True)
    cov = float(np.mean((x - mean_x) * (y - np.mean(y))))
    a = cov / var_x
    b = float(np.mean(y)) - a * mean_x
    return DepthAlignment(scale=a, offset=b)


@dataclass(frozen=True)
class DepthEvalConfig:
    valid_mask: np.ndarray        # boolean (H, W); typically non-sky and finite GT
    align: bool = True


def d_rmse(pred: np.ndarray, gt: np.ndarray, config: DepthEvalConfig) -> float:
    """RMSE between predicted and ground-truth depth over the valid mask,
    after the optional least-squares affine alignment of the prediction."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    mask = np.asarray(config.valid_mask, dtype=bool)
    if not np.any(mask):
        raise ValueError("empty valid mask")
    if config.align:
        fit = align_depth(pred, gt, mask)
        pred = fit.scale * pred + fit.offset
    res = pred[mask] - gt[mask]
    return float(np.sqrt(np.mean(res * res)))


@dataclass(frozen=True)
class FlowMetrics:
    epe3d: float       # mean endpoint error, meters
    acc5: float        # % of points with error < 5 cm or < 5 % relative
    acc10: float       # % of points with error < 10 cm or < 10 % relative
    angular: float     # mean angle between homogeneous-augmented flows, radians


def flow_metrics(pred: np.ndarray, gt: np.ndarray) -> FlowMetrics:
    """Scene-flow metrics over (N, 3) flow vectors.

    Accuracy counts a point when either its absolute endpoint error or its
    error relative to the ground-truth magnitude clears the bar; the angular
    error appends a unit fourth component to both flows before measuring the
    angle, so zero flows still have a defined direction.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 2 or pred.shape[1] != 3:
        raise ValueError("pred and gt must both be (N, 3)")
    if len(pred) == 0:
        raise ValueError("no flow vectors")

    err = np.linalg.norm(pred - gt, axis=1)
    gt_norm = np.linalg.norm(gt, axis=1)
    rel = np.full(len(err), np.inf)
    np.divide(err, gt_norm, out=rel, where=gt_norm > 0)
    acc5 = float(np.mean((err < 0.05) | (rel < 0.05)) * 100.0)
    acc10 = float(np.mean((err < 0.10) | (rel < 0.10)) * 100.0)

    ph = np.concatenate([pred, np.ones((len(pred), 1))], axis=1)
    gh = np.concatenate([gt, np.ones((len(gt), 1))], axis=1)
    ph /= np.linalg.norm(ph, axis=1, keepdims=True)
    gh /= np.linalg.norm(gh, axis=1, keepdims=True)
    # angle from the chord, 2*arcsin(|u - v|/2): exact zero for identical
    # flows, where the arccos of a dot product wobbles at ~1e-8
    chord = np.linalg.norm(ph - gh, axis=1)
    ang = float(np.mean(2.0 * np.arcsin(np.clip(0.5 * chord, -1.0, 1.0))))

    return FlowMetrics(epe3d=float(np.mean(err)), acc5=acc5, acc10=acc10, angular=ang)


def bce(pred: np.ndarray, target: np.ndarray, clamp: float = 1e-7) -> float:
    """Mean binary cross-entropy with predictions clamped to
    [clamp, 1 - clamp], so confident mistakes stay finite."""
    pred = np.clip(np.asarray(pred, dtype=np.float64), clamp, 1.0 - clamp)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError("pred and target must share one shape")
    return float(np.mean(-(target * np.log(pred) + (1.0 - target) * np.log(1.0 - pred))))
