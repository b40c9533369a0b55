"""CPU tile-based Gaussian splat rasterizer.

Isotropic Gaussians project to isotropic screen-space footprints:
sigma^2 = (scale * fx / z)^2 + 0.3^2 (the 0.3 px term is a fixed
low-pass so sub-pixel splats never vanish). A splat influences pixels
within 3 sigma of its projected center; outside that radius its weight is
exactly zero.

Compositing is front-to-back over a single global depth order (ties
broken by storage index), evaluated per 16x16 tile:

    w_k   = opacity_k * exp(-0.5 * r^2 / sigma_k^2), clamped to <= 0.99
    T_1   = 1,  T_{k+1} = T_k * (1 - w_k)
    color = sum_k T_k * w_k * c_k
    alpha = sum_k T_k * w_k
    depth = sum_k T_k * w_k * z_k / alpha   where alpha >= tau, else 0

Tiles are independent, accumulation order within a tile is fixed by the
global sort and a constant chunk size, so output is bit-identical for any
thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .gaussians import GaussianSet
from .geometry import Intrinsics, Pose, project_points
from .imaging import DepthMap, ImageRGB

TILE = 16
LOWPASS_SIGMA = 0.3
CUTOFF_SIGMAS = 3.0
WEIGHT_CLAMP = 0.99
_CHUNK = 2048  # fixed compositing block; part of the output's bit contract


@dataclass
class RenderOutput:
    color: ImageRGB
    depth: DepthMap  # alpha-weighted expected depth, sentinel where alpha < tau
    alpha: np.ndarray  # (H, W) float32 accumulated opacity


def _composite_tile(x0, y0, x1, y1, sel, u, v, z, sig2, opa, col):
    """Front-to-back compositing of the selected splats over one tile."""
    px = np.arange(x0, x1) + 0.5
    py = np.arange(y0, y1) + 0.5
    npx = len(px) * len(py)
    gx, gy = np.meshgrid(px, py)
    gx = gx.reshape(-1)
    gy = gy.reshape(-1)

    color = np.zeros((npx, 3))
    depth_sum = np.zeros(npx)
    alpha = np.zeros(npx)
    trans = np.ones(npx)

    for start in range(0, len(sel), _CHUNK):
        idx = sel[start:start + _CHUNK]
        du = u[idx][:, None] - gx[None, :]
        dv = v[idx][:, None] - gy[None, :]
        r2 = du * du + dv * dv
        s2 = sig2[idx][:, None]
        w = opa[idx][:, None] * np.exp(-0.5 * r2 / s2)
        w = np.where(r2 <= (CUTOFF_SIGMAS ** 2) * s2, w, 0.0)
        np.minimum(w, WEIGHT_CLAMP, out=w)

        keep = np.cumprod(1.0 - w, axis=0)
        t_local = np.vstack([np.ones((1, npx)), keep[:-1]])
        contrib = trans[None, :] * t_local * w

        alpha += contrib.sum(axis=0)
        color += np.einsum("gp,gc->pc", contrib, col[idx])
        depth_sum += contrib.T @ z[idx]
        trans = trans * keep[-1]
        if np.all(trans < 1e-6):
            break

    shape = (y1 - y0, x1 - x0)
    return (color.reshape(shape + (3,)), depth_sum.reshape(shape),
            alpha.reshape(shape))


def render_view(g: GaussianSet, pose: Pose, intr: Intrinsics, tau: float = 0.5,
                threads: int = 1) -> RenderOutput:
    """Rasterize the scene from a pose.

    tau is the coverage threshold: pixels whose accumulated alpha falls
    below it carry sentinel depth (these are the holes completion fills).
    """
    if not 0 < tau <= 1:
        raise ValueError(f"tau must be in (0, 1], got {tau}")
    w_img, h_img = intr.width, intr.height
    color_out = np.zeros((h_img, w_img, 3))
    depth_sum_out = np.zeros((h_img, w_img))
    alpha_out = np.zeros((h_img, w_img))

    if len(g) > 0:
        u, v, z, in_front = project_points(pose, intr, g.center.astype(np.float64))
        scale = g.scale.astype(np.float64)
        fx = intr.fx
        sig2 = np.where(in_front, (scale * fx / np.where(in_front, z, 1.0)) ** 2, 0.0) \
            + LOWPASS_SIGMA ** 2
        radius = CUTOFF_SIGMAS * np.sqrt(sig2)
        visible = (in_front & (u + radius > 0) & (u - radius < w_img)
                   & (v + radius > 0) & (v - radius < h_img))

        keep = np.nonzero(visible)[0]
        order = keep[np.argsort(z[keep], kind="stable")]  # ties -> storage index
        if len(order):
            tiles_x = (w_img + TILE - 1) // TILE
            tiles_y = (h_img + TILE - 1) // TILE
            uo, vo, ro = u[order], v[order], radius[order]
            tx0 = np.clip(np.floor((uo - ro) / TILE).astype(np.int64), 0, tiles_x - 1)
            tx1 = np.clip(np.floor((uo + ro) / TILE).astype(np.int64), 0, tiles_x - 1)
            ty0 = np.clip(np.floor((vo - ro) / TILE).astype(np.int64), 0, tiles_y - 1)
            ty1 = np.clip(np.floor((vo + ro) / TILE).astype(np.int64), 0, tiles_y - 1)

            nx = tx1 - tx0 + 1
            ny = ty1 - ty0 + 1
            rep = nx * ny
            total = int(rep.sum())
            pos = np.repeat(np.arange(len(order)), rep)
            k = np.arange(total) - np.repeat(np.concatenate([[0], np.cumsum(rep)[:-1]]), rep)
            nxr = np.repeat(nx, rep)
            dx = k % nxr
            dy = k // nxr
            tile_id = (np.repeat(ty0, rep) + dy) * tiles_x + (np.repeat(tx0, rep) + dx)

            tile_order = np.argsort(tile_id, kind="stable")  # keeps depth order per tile
            tile_sorted = tile_id[tile_order]
            pos_sorted = order[pos[tile_order]]
            starts = np.searchsorted(tile_sorted, np.arange(tiles_x * tiles_y), side="left")
            ends = np.searchsorted(tile_sorted, np.arange(tiles_x * tiles_y), side="right")

            zc = z
            opa = g.opacity.astype(np.float64)
            col = g.color.astype(np.float64)

            def run_tile(t):
                if starts[t] == ends[t]:
                    return
                ty, tx = divmod(t, tiles_x)
                x0, y0 = tx * TILE, ty * TILE
                x1, y1 = min(x0 + TILE, w_img), min(y0 + TILE, h_img)
                sel = pos_sorted[starts[t]:ends[t]]
                c, d, a = _composite_tile(x0, y0, x1, y1, sel, u, v, zc, sig2, opa, col)
                color_out[y0:y1, x0:x1] = c
                depth_sum_out[y0:y1, x0:x1] = d
                alpha_out[y0:y1, x0:x1] = a

            tile_ids = range(tiles_x * tiles_y)
            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    list(pool.map(run_tile, tile_ids))
            else:
                for t in tile_ids:
                    run_tile(t)

    # Coverage is judged on the float32 alpha the caller will see, so the
    # depth sentinel pattern always matches downstream mask computations.
    alpha32 = np.clip(alpha_out, 0.0, 1.0).astype(np.float32)
    covered = alpha32 >= tau
    depth = np.where(covered, depth_sum_out / np.where(covered, alpha_out, 1.0), 0.0)
    return RenderOutput(
        color=ImageRGB(np.clip(color_out, 0.0, 1.0).astype(np.float32)),
        depth=DepthMap(depth.astype(np.float32)),
        alpha=alpha32,
    )
