"""Grad-CAM heatmaps and colorized overlays.

Channel weights are spatial means of the class-logit gradient at the target
conv activation; the weighted activation sum is ReLU'd and normalized by its
maximum (all-zero when the weighted sum is nowhere positive).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .imaging import ColorImage, PixelGrid8, bilinear_resize_array, round_u8
from .model import ArchitectureSpec, ModelParams, class_score_gradient


@dataclass(frozen=True)
class Heatmap:
    values: np.ndarray   # (h, w) floats in [0, 1]
    target_layer: int    # conv-layer index
    class_idx: int


def grad_cam(params: ModelParams, x: np.ndarray, class_idx: int,
             target_layer: int | None = None) -> Heatmap:
    """Heatmap at the target conv layer's spatial resolution.

    target_layer indexes the model's conv layers; default is the last one.
    """
    convs = params.spec.conv_indices()
    if target_layer is None:
        target_layer = len(convs) - 1
    activation, grad, _ = class_score_gradient(params, x, class_idx, target_layer)
    alpha = grad.mean(axis=(1, 2))                       # (K,)
    weighted = np.tensordot(alpha, activation, axes=1)   # (h, w)
    relu = np.maximum(weighted, 0.0)
    peak = relu.max()
    values = relu / peak if peak > 0 else np.zeros_like(relu)
    return Heatmap(values=values.astype(np.float64), target_layer=target_layer,
                   class_idx=class_idx)


def heatmap_geometry(spec: ArchitectureSpec, conv_layer: int):
    """Input-space geometry of the conv layer's grid.

    Returns (center0, jump, rf): heatmap cell (i, j) corresponds to input
    center (center0 + i*jump, center0 + j*jump) with receptive field `rf`.
    """
    convs = spec.conv_indices()
    if conv_layer < 0 or conv_layer >= len(convs):
        raise InvalidArgumentError("conv layer index out of range")
    center0, jump, rf = 0.0, 1, 1
    for ls in spec.layers[:convs[conv_layer] + 1]:
        if ls.kind == "conv":
            rf += 2 * jump
        elif ls.kind == "pool":
            rf += jump
            center0 += jump * 0.5
            jump *= 2
    return center0, jump, rf


def heatmap_argmax_input_coords(spec: ArchitectureSpec, h: Heatmap):
    """(y, x) input-pixel coordinates of the heatmap's peak cell center."""
    i, j = np.unravel_index(int(np.argmax(h.values)), h.values.shape)
    center0, jump, _ = heatmap_geometry(spec, h.target_layer)
    return center0 + i * jump, center0 + j * jump


def _blue_red_ramp(v: np.ndarray) -> np.ndarray:
    """Linear blue -> red colormap: R = 255 v, G = 0, B = 255 (1 - v)."""
    h, w = v.shape
    rgb = np.zeros((h, w, 3))
    rgb[:, :, 0] = 255.0 * v
    rgb[:, :, 2] = 255.0 * (1.0 - v)
    return rgb


def overlay(h: Heatmap, base: PixelGrid8, alpha: float) -> ColorImage:
    """Composite the upsampled heatmap over the grayscale base.

    out = (1 - alpha*v) * gray + alpha*v * ramp(v), per channel.
    """
    if not 0.0 <= alpha <= 1.0:
        raise InvalidArgumentError("alpha must be in [0, 1]")
    v = np.clip(bilinear_resize_array(h.values, base.width, base.height), 0.0, 1.0)
    gray = base.pixels.astype(np.float64)[:, :, None]
    color = _blue_red_ramp(v)
    av = (alpha * v)[:, :, None]
    return ColorImage(round_u8((1.0 - av) * gray + av * color))
