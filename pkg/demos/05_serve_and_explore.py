"""Scripted session against the HTTP API (no browser needed).

Drives the same endpoints the viewer uses: create a session from a
ground-truth view, explore with read-only renders, commit steps at new
poses, then export the scene PLY. Runs the app in-process; point the same
calls at `splatforge serve` to do it over the wire.
"""

import base64
from pathlib import Path

from fastapi.testclient import TestClient

from splatforge import Intrinsics, Pose, build_synthetic_scene, render_ground_truth, standard_trajectories
from splatforge.imaging import encode_pfm, encode_png
from splatforge.service import create_app

out = Path(__file__).parent / "out" / "05"
out.mkdir(parents=True, exist_ok=True)

intr = Intrinsics(fx=32.0, fy=32.0, cx=32.0, cy=32.0, width=64, height=64)
scene = build_synthetic_scene(seed=0, kind="room")
img, depth = render_ground_truth(scene, Pose.identity(), intr)

client = TestClient(create_app())
created = client.post("/session", json={
    "image": base64.b64encode(encode_png(img)).decode(),
    "depth": base64.b64encode(encode_pfm(depth.data)).decode(),
    "pose": Pose.identity().to_array12(),
    "intrinsics": intr.to_dict(),
}).json()
sid = created["id"]
print(f"session {sid[:8]}…  {created['gaussian_count']} gaussians")

poses = standard_trajectories("panorama", 8)

print("exploring (read-only renders leave the scene untouched):")
for pose in poses[:4]:
    pose_csv = ",".join(repr(v) for v in pose.to_array12())
    resp = client.get(f"/session/{sid}/render", params={"pose": pose_csv})
    print(f"  render -> {resp.status_code}, {len(resp.content)} bytes (multipart PNG+PFM)")
meta = client.get(f"/session/{sid}").json()
print(f"after exploring: still {meta['gaussian_count']} gaussians, step_count {meta['step_count']}")

print("committing two turns:")
for pose in poses[1:3]:
    body = client.post(f"/session/{sid}/step",
                       json={"pose": pose.to_array12(), "prompt": "keep going"}).json()
    agg = body["aggregate"]
    print(f"  step -> {body['gaussian_count']} gaussians, "
          f"geometry {agg['geometry_ms']:.0f} ms, appearance {agg['appearance_ms']:.0f} ms "
          f"(reference GPU system: {body['reference_gpu_seconds']['total']} s)")
    frame = client.get(body["frame_url"])
    (out / f"frame_{body['step_count']:02d}.png").write_bytes(frame.content)

ply = client.get(f"/session/{sid}/export.ply")
(out / "scene.ply").write_bytes(ply.content)
print(f"\nexported {len(ply.content)} PLY bytes and frames to {out}")
