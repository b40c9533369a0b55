"""Straight-line scalar reimplementations used as oracles.

Everything here is deliberately loop-based and independent of the library
internals: unproject/project with explicit arithmetic, manual bilinear
weights, 3x3 replicate-padded smoothing, plain softmax.
"""

import math

import numpy as np


def _bilinear_scalar(data, u, v):
    """Manual bilinear sample at index coords; zero-weight neighbors ignored."""
    h, w = data.shape[:2]
    j0 = math.floor(u)
    i0 = math.floor(v)
    fj = u - j0
    fi = v - i0
    taps = [
        (i0, j0, (1 - fi) * (1 - fj)),
        (i0, j0 + 1, (1 - fi) * fj),
        (i0 + 1, j0, fi * (1 - fj)),
        (i0 + 1, j0 + 1, fi * fj),
    ]
    value = np.zeros(data.shape[2:], dtype=np.float64)
    for ii, jj, wt in taps:
        if wt == 0.0:
            continue
        if ii < 0 or ii >= h or jj < 0 or jj >= w:
            return None
        value = value + wt * data[ii, jj].astype(np.float64)
    return value


def brute_force_cost_and_depth(f_cur, neighbors, pose_cur, intr_feat,
                               cand_values, temperature):
    """Warp -> correlate -> 3x3 smooth -> softmax regression, all loops.

    f_cur: (H, W, C) float array. neighbors: list of (Pose, (H, W, C) array).
    cand_values: (n_d, H, W). Returns (smoothed scores, depth, confidence).
    """
    n_d, h, w = cand_values.shape
    fx, fy, cx, cy = intr_feat.fx, intr_feat.fy, intr_feat.cx, intr_feat.cy
    r_cur = pose_cur.rotation
    t_cur = pose_cur.translation

    scores = np.zeros((n_d, h, w))
    evidence = np.zeros((h, w), dtype=bool)
    for s in range(n_d):
        for i in range(h):
            for j in range(w):
                d = cand_values[s, i, j]
                xc = np.array([
                    (j + 0.5 - cx) / fx * d,
                    (i + 0.5 - cy) / fy * d,
                    d,
                ])
                world = r_cur @ xc + t_cur
                acc = 0.0
                count = 0
                for pose_n, feat_n in neighbors:
                    pc = pose_n.rotation.T @ (world - pose_n.translation)
                    if pc[2] <= 0:
                        continue
                    u_src = fx * pc[0] / pc[2] + cx
                    v_src = fy * pc[1] / pc[2] + cy
                    sample = _bilinear_scalar(np.asarray(feat_n), u_src - 0.5, v_src - 0.5)
                    if sample is None:
                        continue
                    sample = sample / (math.sqrt(float(np.dot(sample, sample))) + 1e-8)
                    acc += float(np.dot(f_cur[i, j].astype(np.float64), sample))
                    count += 1
                scores[s, i, j] = acc / count if count else 0.0
                if count:
                    evidence[i, j] = True

    smoothed = np.zeros_like(scores)
    for s in range(n_d):
        for i in range(h):
            for j in range(w):
                total = 0.0
                for di in (-1, 0, 1):
                    for dj in (-1, 0, 1):
                        ii = min(max(i + di, 0), h - 1)
                        jj = min(max(j + dj, 0), w - 1)
                        total += scores[s, ii, jj]
                smoothed[s, i, j] = total / 9.0

    depth = np.zeros((h, w))
    confidence = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            logits = [smoothed[s, i, j] / temperature for s in range(n_d)]
            m = max(logits)
            exps = [math.exp(l - m) for l in logits]
            z = sum(exps)
            probs = [e / z for e in exps]
            depth[i, j] = sum(p * cand_values[s, i, j] for s, p in enumerate(probs))
            confidence[i, j] = max(probs) if evidence[i, j] else 1.0
    return smoothed, depth, confidence


def brute_force_fuse(global_centers, global_present, local_pixels, local_depths,
                     pose, intr, delta):
    """O(K*n) double-loop redundancy decision for fusion.

    global_centers: (K, 3); local_pixels: list of (x, y); local_depths (n,).
    Returns a boolean keep-list for the locals.
    """
    projected = []
    for mu in global_centers:
        pc = pose.rotation.T @ (np.asarray(mu, dtype=np.float64) - pose.translation)
        if pc[2] <= 0:
            continue
        u = intr.fx * pc[0] / pc[2] + intr.cx
        v = intr.fy * pc[1] / pc[2] + intr.cy
        x = math.floor(u)
        y = math.floor(v)
        if 0 <= x < intr.width and 0 <= y < intr.height:
            projected.append((x, y, pc[2]))

    keep = []
    for (x_l, y_l), d_l in zip(local_pixels, local_depths):
        redundant = False
        for (x_g, y_g, d_g) in projected:
            if x_g == x_l and y_g == y_l and abs(float(d_l) - d_g) < delta * float(d_l):
                redundant = True
                break
        keep.append(not redundant)
    return keep
