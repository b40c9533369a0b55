"""Depth completion and color hole-filling stand-ins.

Both trained completion models are replaced by deterministic operators
behind the same I/O contract (RGB + incomplete depth + validity mask in,
fully valid raster out):

  - Depth: unknown pixels solve the discrete Laplace equation with the
    known pixels as Dirichlet boundary (red-black Gauss-Seidel, prefilled
    by a push-pull pass so convergence is fast). Obeys the discrete
    maximum principle, so completed depth stays inside [min known,
    max known] and hence positive.

  - Color: push-pull pyramid fill — validity-weighted 2x2 downsampling
    to a fully valid coarse level, then bilinear upsampling that writes
    only invalid pixels.

Known pixels pass through bit-exact in both cases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import DepthMap, ImageRGB, Mask, bilinear_sample_many
from .renderer import RenderOutput

HARMONIC_TOL = 1e-4
HARMONIC_MAX_SWEEPS = 10000


@dataclass
class CompletionInput:
    rgb: ImageRGB
    depth: DepthMap
    mask: Mask  # True = known; must equal the depth validity pattern

    def __post_init__(self):
        if self.rgb.data.shape[:2] != self.depth.data.shape:
            raise ValueError(
                f"rgb {self.rgb.data.shape[:2]} vs depth {self.depth.data.shape}")
        if self.mask.data.shape != self.depth.data.shape:
            raise ValueError(
                f"mask {self.mask.data.shape} vs depth {self.depth.data.shape}")
        if not np.array_equal(self.mask.data, self.depth.valid_mask()):
            raise ValueError("mask must be True exactly where depth is non-sentinel")


def make_hole_mask(render: RenderOutput, tau: float) -> Mask:
    """Known-pixel mask from a render: True where accumulated alpha >= tau."""
    return Mask(render.alpha >= tau)


def _halve_weighted(values: np.ndarray, weight: np.ndarray):
    """Weighted 2x2 block average; odd trailing rows/cols get zero weight."""
    h, w = weight.shape
    h2, w2 = (h + 1) // 2, (w + 1) // 2
    pv = np.zeros((h2 * 2, w2 * 2) + values.shape[2:], dtype=np.float64)
    pw = np.zeros((h2 * 2, w2 * 2), dtype=np.float64)
    pv[:h, :w] = values * (weight[..., None] if values.ndim == 3 else weight)
    pw[:h, :w] = weight
    if values.ndim == 3:
        vsum = pv.reshape(h2, 2, w2, 2, -1).sum(axis=(1, 3))
    else:
        vsum = pv.reshape(h2, 2, w2, 2).sum(axis=(1, 3))
    wsum = pw.reshape(h2, 2, w2, 2).sum(axis=(1, 3))
    safe = np.where(wsum > 0, wsum, 1.0)
    out = vsum / (safe[..., None] if values.ndim == 3 else safe)
    return out, wsum > 0


def _upsample_to(coarse: np.ndarray, h: int, w: int) -> np.ndarray:
    """Bilinear 2x upsample (clamp-to-edge) cropped to (h, w)."""
    ch, cw = coarse.shape[:2]
    u = np.clip((np.arange(w) + 0.5) / 2.0 - 0.5, 0.0, cw - 1.0)
    v = np.clip((np.arange(h) + 0.5) / 2.0 - 0.5, 0.0, ch - 1.0)
    uu, vv = np.meshgrid(u, v)
    values, _ = bilinear_sample_many(coarse, uu, vv)
    return values


def push_pull_fill(values: np.ndarray, valid: np.ndarray, default: float):
    """Fill invalid pixels of an (H, W[, C]) array from valid ones.

    Valid pixels are returned untouched (bit-exact). An all-invalid input
    fills with `default`.
    """
    values = np.asarray(values, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    if not valid.any():
        return np.full(values.shape, default, dtype=np.float64)
    if valid.all():
        return values.copy()

    # Pull: shrink until every pixel has support.
    levels = [(values * (valid[..., None] if values.ndim == 3 else valid),
               valid.astype(np.float64))]
    vals, wgt = values, valid.astype(np.float64)
    while not (wgt > 0).all() and min(wgt.shape) > 1:
        vals, has = _halve_weighted(vals, wgt)
        wgt = has.astype(np.float64)
        levels.append((vals, wgt))

    # Push: fill holes of each finer level from the coarser one.
    filled = levels[-1][0]
    for vals, wgt in reversed(levels[:-1]):
        up = _upsample_to(filled, wgt.shape[0], wgt.shape[1])
        known = wgt > 0
        filled = np.where(known[..., None] if vals.ndim == 3 else known, vals, up)
    return np.where(valid[..., None] if values.ndim == 3 else valid, values, filled)


def _neighbor_stats(d: np.ndarray):
    """Sum and count of in-grid 4-neighbors for every pixel."""
    h, w = d.shape
    nsum = np.zeros((h, w), dtype=np.float64)
    ncnt = np.zeros((h, w), dtype=np.float64)
    nsum[1:, :] += d[:-1, :]
    ncnt[1:, :] += 1
    nsum[:-1, :] += d[1:, :]
    ncnt[:-1, :] += 1
    nsum[:, 1:] += d[:, :-1]
    ncnt[:, 1:] += 1
    nsum[:, :-1] += d[:, 1:]
    ncnt[:, :-1] += 1
    return nsum, ncnt


def harmonic_residual(d: np.ndarray, unknown: np.ndarray) -> float:
    """Max deviation of unknown pixels from their 4-neighbor average."""
    if not unknown.any():
        return 0.0
    nsum, ncnt = _neighbor_stats(d)
    resid = np.abs(d - nsum / ncnt)
    return float(resid[unknown].max())


def harmonic_fill(init: np.ndarray, known: np.ndarray, tol: float = HARMONIC_TOL,
                  max_sweeps: int = HARMONIC_MAX_SWEEPS):
    """Red-black Gauss-Seidel relaxation of unknown pixels toward the
    discrete Laplace solution with known pixels as Dirichlet boundary.

    `init` supplies both boundary values and the starting guess for the
    unknowns. Returns (solution float64, residual after each sweep).
    """
    d = np.asarray(init, dtype=np.float64).copy()
    unknown = ~np.asarray(known, dtype=bool)
    h, w = d.shape
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    red = ((yy + xx) % 2 == 0) & unknown
    black = ((yy + xx) % 2 == 1) & unknown

    residuals = []
    for _ in range(max_sweeps):
        for parity in (red, black):
            nsum, ncnt = _neighbor_stats(d)
            d[parity] = (nsum / ncnt)[parity]
        residuals.append(harmonic_residual(d, unknown))
        if residuals[-1] < tol:
            break
    return d, residuals


def complete_depth(inp: CompletionInput, bootstrap_depth: float = 2.0,
                   tol: float = HARMONIC_TOL,
                   max_sweeps: int = HARMONIC_MAX_SWEEPS) -> DepthMap:
    """Fill unknown depth harmonically; known pixels pass through bit-exact.

    With zero known pixels the whole map becomes `bootstrap_depth` (the
    fully-masked bootstrap case).
    """
    known = inp.mask.data
    if not known.any():
        return DepthMap(np.full(inp.depth.data.shape, bootstrap_depth, dtype=np.float32))
    if known.all():
        return DepthMap(inp.depth.data.copy())

    init = push_pull_fill(inp.depth.data.astype(np.float64), known, bootstrap_depth)
    d, _ = harmonic_fill(init, known, tol=tol, max_sweeps=max_sweeps)
    out = d.astype(np.float32)
    out[known] = inp.depth.data[known]  # bit-exact passthrough
    return DepthMap(out)


def inpaint_color(inp: CompletionInput) -> ImageRGB:
    """Fill unknown color with a push-pull pyramid; known pixels bit-exact.

    All-unknown input fills with mid-gray. Text prompts are recorded at
    the pipeline level and do not influence this operator.
    """
    filled = push_pull_fill(inp.rgb.data.astype(np.float64), inp.mask.data, 0.5)
    out = np.clip(filled, 0.0, 1.0).astype(np.float32)
    out[inp.mask.data] = inp.rgb.data[inp.mask.data]
    return ImageRGB(out)
