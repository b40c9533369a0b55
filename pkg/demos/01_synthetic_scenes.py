"""Ground-truth scenes: build procedural rooms and ray-cast RGB-D views.

Walks the three scene kinds, renders a few poses from each, and writes the
images plus depth maps to demos/out/01/. Depth here is analytic (exact), so
these views double as the oracle inputs used everywhere else.
"""

from pathlib import Path

from splatforge import Intrinsics, build_synthetic_scene, render_ground_truth, standard_trajectories
from splatforge.imaging import write_pfm, write_png

out = Path(__file__).parent / "out" / "01"
out.mkdir(parents=True, exist_ok=True)

intr = Intrinsics(fx=64.0, fy=64.0, cx=64.0, cy=64.0, width=128, height=128)

for kind in ("room", "corridor", "plane_field"):
    scene = build_synthetic_scene(seed=0, kind=kind)
    print(f"{kind}: {len(scene.planes)} textured planes")
    poses = standard_trajectories("panorama", 4)
    for k, pose in enumerate(poses):
        img, depth = render_ground_truth(scene, pose, intr)
        write_png(out / f"{kind}_{k}.png", img)
        write_pfm(out / f"{kind}_{k}.pfm", depth.data)
        finite = depth.data[depth.data < 100.0]
        span = f"{finite.min():.2f}..{finite.max():.2f}" if finite.size else "background only"
        print(f"  yaw {90 * k:3d}: depth {span}")

print(f"\nwrote views to {out}")
