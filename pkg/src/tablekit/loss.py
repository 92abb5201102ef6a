"""Training-loss kernels with analytic gradients, framework independent.

All map arguments use the :mod:`tablekit.targets` layout ``(channels, H, W)``.
Values and gradients are computed in float64, or in the inputs' wider float
type when given one (used by the finite-difference checks).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .targets import TargetMaps


@dataclass(frozen=True)
class LossConfig:
    lambda_cv: float = 1.0
    lambda_vc: float = 0.5
    lambda_off: float = 1.0
    focal_alpha: float = 2.0
    focal_beta: float = 4.0
    eps_denominator: float = 1.0

    def __post_init__(self):
        for name in ("lambda_cv", "lambda_vc", "lambda_off", "focal_alpha", "focal_beta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.eps_denominator <= 0:
            raise ValueError("eps_denominator must be > 0")


@dataclass(frozen=True)
class PairObservation:
    pred_cv: tuple[float, float]
    gt_cv: tuple[float, float]
    pred_vc: tuple[float, float]
    gt_vc: tuple[float, float]


def pair_distance(o: PairObservation, eps_denominator: float = 1.0) -> float:
    """Regression error of a center/vertex pair relative to the pair length, clamped to 1."""
    num = (abs(o.pred_cv[0] - o.gt_cv[0]) + abs(o.pred_cv[1] - o.gt_cv[1])
           + abs(o.pred_vc[0] - o.gt_vc[0]) + abs(o.pred_vc[1] - o.gt_vc[1]))
    den = max(abs(o.gt_cv[0]) + abs(o.gt_cv[1]), eps_denominator)
    return min(num / den, 1.0)


def pair_weight(d):
    """``1 - exp(-pi * d)``; works on scalars and arrays."""
    if np.ndim(d) == 0:
        return 1.0 - math.exp(-math.pi * float(d))
    return 1.0 - np.exp(-np.pi * np.asarray(d, dtype=float))


def _ftype(*arrays):
    # float64 at least; extended precision passes through for finite differences
    return np.result_type(*arrays, np.float64)


def _gather_pairs(pred_cv_map, pred_vc_map, targets: TargetMaps):
    p = targets.pairs
    cy, cx, k, vy, vx, j = (p[:, i] for i in range(6))
    ch_cv = np.stack([2 * k, 2 * k + 1], axis=1)
    ch_vc = np.stack([2 * j, 2 * j + 1], axis=1)
    dt = _ftype(pred_cv_map, pred_vc_map)
    pred_cv = np.asarray(pred_cv_map, dtype=dt)[ch_cv, cy[:, None], cx[:, None]]
    gt_cv = targets.cv_map.astype(dt)[ch_cv, cy[:, None], cx[:, None]]
    pred_vc = np.asarray(pred_vc_map, dtype=dt)[ch_vc, vy[:, None], vx[:, None]]
    gt_vc = targets.vc_map.astype(dt)[ch_vc, vy[:, None], vx[:, None]]
    return (ch_cv, cy, cx), (ch_vc, vy, vx), pred_cv, gt_cv, pred_vc, gt_vc


def pair_weights(pred_cv_map, pred_vc_map, targets: TargetMaps, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """Per-pair focusing weights for the current predictions (row order of ``targets.pairs``)."""
    if targets.pairs is None or len(targets.pairs) == 0:
        return np.zeros(0)
    _, _, pred_cv, gt_cv, pred_vc, gt_vc = _gather_pairs(pred_cv_map, pred_vc_map, targets)
    num = np.abs(pred_cv - gt_cv).sum(axis=1) + np.abs(pred_vc - gt_vc).sum(axis=1)
    den = np.maximum(np.abs(gt_cv).sum(axis=1), cfg.eps_denominator)
    return pair_weight(np.minimum(num / den, 1.0))


def pairing_loss(pred_cv_map, pred_vc_map, targets: TargetMaps, cfg: LossConfig = LossConfig(),
                 weights: np.ndarray | None = None):
    """Weighted l1 loss over supervised center/vertex pairs, averaged per pair.

    Returns ``(value, grad_cv_map, grad_vc_map)``.  The per-pair weight is a
    constant of the evaluation (no gradient flows through it); pass
    ``weights`` to freeze it explicitly, e.g. for finite differences.
    """
    dt = _ftype(pred_cv_map, pred_vc_map)
    pred_cv_map = np.asarray(pred_cv_map, dtype=dt)
    pred_vc_map = np.asarray(pred_vc_map, dtype=dt)
    if pred_cv_map.shape != targets.cv_map.shape or pred_vc_map.shape != targets.vc_map.shape:
        raise ValueError("prediction shapes do not match targets")
    grad_cv = np.zeros_like(pred_cv_map)
    grad_vc = np.zeros_like(pred_vc_map)
    n = 0 if targets.pairs is None else len(targets.pairs)
    if n == 0:
        return 0.0, grad_cv, grad_vc

    idx_cv, idx_vc, pred_cv, gt_cv, pred_vc, gt_vc = _gather_pairs(pred_cv_map, pred_vc_map, targets)
    if weights is None:
        num = np.abs(pred_cv - gt_cv).sum(axis=1) + np.abs(pred_vc - gt_vc).sum(axis=1)
        den = np.maximum(np.abs(gt_cv).sum(axis=1), cfg.eps_denominator)
        weights = pair_weight(np.minimum(num / den, 1.0))
    weights = np.asarray(weights, dtype=dt)

    l_cv = np.abs(pred_cv - gt_cv).sum(axis=1)
    l_vc = np.abs(pred_vc - gt_vc).sum(axis=1)
    value = np.sum(weights * (cfg.lambda_cv * l_cv + cfg.lambda_vc * l_vc)) / n

    w = weights[:, None] / n
    ch, ys, xs = idx_cv
    np.add.at(grad_cv, (ch, ys[:, None], xs[:, None]), w * cfg.lambda_cv * np.sign(pred_cv - gt_cv))
    ch, ys, xs = idx_vc
    np.add.at(grad_vc, (ch, ys[:, None], xs[:, None]), w * cfg.lambda_vc * np.sign(pred_vc - gt_vc))
    return value, grad_cv, grad_vc


def focal_loss(pred_heatmap, gt_heatmap, alpha: float = 2.0, beta: float = 4.0):
    """Penalty-reduced pixelwise focal loss on probabilities, normalized by positives.

    Positives are pixels where the target equals 1.  Returns ``(value, grad)``.
    """
    p = np.asarray(pred_heatmap, dtype=_ftype(pred_heatmap))
    g = np.asarray(gt_heatmap, dtype=p.dtype)
    if np.any(p <= 0) or np.any(p >= 1):
        raise ValueError("heatmap predictions must lie strictly inside (0, 1)")
    pos = g == 1
    neg = ~pos
    n_pos = max(int(pos.sum()), 1)
    lp, l1p = np.log(p), np.log1p(-p)
    neg_w = (1 - g) ** beta
    value = -(np.sum(((1 - p) ** alpha * lp)[pos]) + np.sum((neg_w * p ** alpha * l1p)[neg])) / n_pos

    grad = np.zeros_like(p)
    pp = p[pos]
    grad[pos] = alpha * (1 - pp) ** (alpha - 1) * np.log(pp) - (1 - pp) ** alpha / pp
    pn = p[neg]
    grad[neg] = -neg_w[neg] * (alpha * pn ** (alpha - 1) * np.log1p(-pn) - pn ** alpha / (1 - pn))
    return value, grad / n_pos


def offset_loss(pred_offset, targets: TargetMaps):
    """l1 sub-pixel offset loss at keypoint pixels, averaged per keypoint."""
    pred = np.asarray(pred_offset, dtype=_ftype(pred_offset))
    mask = targets.keypoint_mask
    n = int(mask.sum())
    grad = np.zeros_like(pred)
    if n == 0:
        return 0.0, grad
    diff = pred[:, mask] - targets.offset_map[:, mask].astype(pred.dtype)
    grad[:, mask] = np.sign(diff) / n
    return np.abs(diff).sum() / n, grad


@dataclass
class LossResult:
    value: float
    components: dict
    grads: dict


def total_loss(pred: dict, targets: TargetMaps, cfg: LossConfig = LossConfig(),
               weights: np.ndarray | None = None) -> LossResult:
    """Keypoint focal loss + weighted offset loss + pairing loss.

    ``pred`` holds ``keypoint_heatmap`` (already squashed into (0, 1)),
    ``offset_map``, ``cv_map`` and ``vc_map``.
    """
    l_k, g_k = focal_loss(pred["keypoint_heatmap"], targets.keypoint_heatmap, cfg.focal_alpha, cfg.focal_beta)
    l_off, g_off = offset_loss(pred["offset_map"], targets)
    l_p, g_cv, g_vc = pairing_loss(pred["cv_map"], pred["vc_map"], targets, cfg, weights)
    return LossResult(
        value=l_k + cfg.lambda_off * l_off + l_p,
        components={"keypoint": l_k, "offset": l_off, "pairing": l_p},
        grads={"keypoint_heatmap": g_k, "offset_map": cfg.lambda_off * g_off, "cv_map": g_cv, "vc_map": g_vc},
    )


# --------------------------------------------------------------------------
# finite-difference verification

def check_gradients(fn: Callable[[dict], float], inputs: dict, grads: dict, coords: dict,
                    step: float = 1e-4, floor: float = 1e-8) -> float:
    """Worst relative error between analytic ``grads`` and central differences of ``fn``.

    ``coords`` maps input names to index arrays (as from ``np.nonzero``) of
    the coordinates to probe.  Relative error is
    ``|a - n| / max(|a|, |n|, floor)``.  Inputs are promoted to
    ``np.longdouble`` so the differences are not swamped by round-off where
    gradients are tiny; ``fn`` must keep that precision.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    worst = 0.0
    work = {k: np.array(v, dtype=np.longdouble) for k, v in inputs.items()}
    for name, idx in coords.items():
        arr = work[name]
        for pos in zip(*idx):
            orig = arr[pos]
            arr[pos] = orig + step
            up = fn(work)
            arr[pos] = orig - step
            down = fn(work)
            arr[pos] = orig
            num = float((up - down) / (2 * np.longdouble(step)))
            ana = float(grads[name][pos])
            err = abs(ana - num) / max(abs(ana), abs(num), floor)
            worst = max(worst, err)
    return worst


def random_instance(rng: np.random.Generator, size: int = 16, stride: int = 1, kink_margin: float = 1e-2):
    """Random targets and predictions on a ``size x size`` map for gradient checks.

    Targets come from a small random grid of cells; predictions are targets
    plus noise, resampled wherever an l1 argument lands within
    ``kink_margin`` of zero.  Heatmap predictions lie in (0.05, 0.95).
    """
    from .geometry import CellQuad
    from .targets import encode_targets

    rows, cols = rng.integers(1, 3, size=2)
    cw = (size - 2) / cols
    ch = (size - 2) / rows
    xs = 1 + np.cumsum(np.r_[0, np.full(cols, cw)])
    ys = 1 + np.cumsum(np.r_[0, np.full(rows, ch)])
    xs[1:-1] += rng.uniform(-0.2, 0.2, size=cols - 1) * cw
    ys[1:-1] += rng.uniform(-0.2, 0.2, size=rows - 1) * ch
    cells = [CellQuad.from_box(xs[c], ys[r], xs[c + 1], ys[r + 1]) for r in range(rows) for c in range(cols)]
    targets = encode_targets([cells], (size * stride, size * stride), stride)

    def noisy(t, scale):
        t = t.astype(float)
        out = t + rng.normal(0, scale, size=t.shape)
        bad = np.abs(out - t) < kink_margin
        while bad.any():
            out[bad] = t[bad] + rng.normal(0, scale, size=int(bad.sum()))
            bad = np.abs(out - t) < kink_margin
        return out

    pred = {
        "keypoint_heatmap": rng.uniform(0.05, 0.95, size=targets.keypoint_heatmap.shape),
        "offset_map": noisy(targets.offset_map, 0.3),
        "cv_map": noisy(targets.cv_map, 1.0),
        "vc_map": noisy(targets.vc_map, 1.0),
    }
    return targets, pred


def gradient_report(rng: np.random.Generator, n_instances: int = 20, size: int = 16,
                    step: float = 1e-4, cfg: LossConfig = LossConfig()) -> dict:
    """Max relative gradient error of :func:`pairing_loss` and :func:`total_loss` over random instances."""
    worst_pair = worst_total = 0.0
    for _ in range(n_instances):
        targets, pred = random_instance(rng, size)
        w = pair_weights(pred["cv_map"], pred["vc_map"], targets, cfg)

        _, g_cv, g_vc = pairing_loss(pred["cv_map"], pred["vc_map"], targets, cfg, w)
        sup_cv = np.zeros(targets.cv_map.shape, bool)
        sup_vc = np.zeros(targets.vc_map.shape, bool)
        for cy, cx, k, vy, vx, j in targets.pairs:
            sup_cv[2 * k:2 * k + 2, cy, cx] = True
            sup_vc[2 * j:2 * j + 2, vy, vx] = True
        worst_pair = max(worst_pair, check_gradients(
            lambda a: pairing_loss(a["cv_map"], a["vc_map"], targets, cfg, w)[0],
            {"cv_map": pred["cv_map"], "vc_map": pred["vc_map"]},
            {"cv_map": g_cv, "vc_map": g_vc},
            {"cv_map": np.nonzero(sup_cv), "vc_map": np.nonzero(sup_vc)}, step))

        res = total_loss(pred, targets, cfg, w)
        kp = targets.keypoint_mask
        coords = {
            "keypoint_heatmap": np.nonzero(np.ones(targets.keypoint_heatmap.shape, bool)),
            "offset_map": np.nonzero(np.broadcast_to(kp, targets.offset_map.shape)),
            "cv_map": np.nonzero(sup_cv),
            "vc_map": np.nonzero(sup_vc),
        }
        worst_total = max(worst_total, check_gradients(
            lambda a: total_loss(a, targets, cfg, w).value, pred, res.grads, coords, step))
    return {"pairing_loss": worst_pair, "total_loss": worst_total}
