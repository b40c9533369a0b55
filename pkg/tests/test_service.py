import base64
import threading

import pytest
from fastapi.testclient import TestClient

from splatforge.geometry import Intrinsics, Pose
from splatforge.imaging import decode_pfm, decode_png, encode_pfm, encode_png
from splatforge.service import MULTIPART_BOUNDARY, create_app
from splatforge.testkit import build_synthetic_scene, render_ground_truth, standard_trajectories

INTR = Intrinsics(fx=32.0, fy=32.0, cx=32.0, cy=32.0, width=64, height=64)


def session_payload(seed=0, pose=None):
    scene = build_synthetic_scene(seed, "room")
    pose = pose or Pose.identity()
    img, depth = render_ground_truth(scene, pose, INTR)
    return {
        "image": base64.b64encode(encode_png(img)).decode(),
        "depth": base64.b64encode(encode_pfm(depth.data)).decode(),
        "pose": pose.to_array12(),
        "intrinsics": INTR.to_dict(),
    }


def pose_query(pose):
    return ",".join(repr(v) for v in pose.to_array12())


@pytest.fixture
def client():
    return TestClient(create_app(max_sessions=4, max_image_px=1 << 20))


def make_session(client) -> str:
    resp = client.post("/session", json=session_payload())
    assert resp.status_code == 201
    return resp.json()["id"]


class TestCreate:
    def test_valid_payload_creates(self, client):
        resp = client.post("/session", json=session_payload())
        assert resp.status_code == 201
        body = resp.json()
        assert body["gaussian_count"] == 64 * 64
        assert body["id"]

    def test_distinct_ids(self, client):
        a = client.post("/session", json=session_payload()).json()["id"]
        b = client.post("/session", json=session_payload()).json()["id"]
        assert a != b

    def test_missing_depth_names_field(self, client):
        payload = session_payload()
        del payload["depth"]
        resp = client.post("/session", json=payload)
        assert resp.status_code == 400
        assert "depth" in resp.json()["detail"]

    def test_bad_image_bytes(self, client):
        payload = session_payload()
        payload["image"] = base64.b64encode(b"not a png").decode()
        resp = client.post("/session", json=payload)
        assert resp.status_code == 400
        assert "image" in resp.json()["detail"]

    def test_size_cap_413(self):
        client = TestClient(create_app(max_sessions=4, max_image_px=1000))
        resp = client.post("/session", json=session_payload())
        assert resp.status_code == 413

    def test_session_cap_429(self):
        client = TestClient(create_app(max_sessions=1))
        assert client.post("/session", json=session_payload()).status_code == 201
        assert client.post("/session", json=session_payload()).status_code == 429


class TestStep:
    def test_step_at_new_pose(self, client):
        sid = make_session(client)
        pose = standard_trajectories("panorama", 8)[1]
        resp = client.post(f"/session/{sid}/step",
                           json={"pose": pose.to_array12(), "prompt": "onward"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["gaussian_count"] > 64 * 64
        assert body["step_count"] == 2
        assert set(body["timing"]) == {
            "render_ms", "inpaint_ms", "depth_ms", "stepsplat_ms", "fuse_ms", "total_ms"}
        assert body["aggregate"]["geometry_ms"] >= 0
        frame = client.get(body["frame_url"])
        assert frame.status_code == 200
        decoded = decode_png(frame.content)
        assert (decoded.width, decoded.height) == (64, 64)

    def test_unknown_session_404(self, client):
        resp = client.post("/session/nope/step", json={"pose": Pose.identity().to_array12()})
        assert resp.status_code == 404

    def test_invalid_pose_400(self, client):
        sid = make_session(client)
        resp = client.post(f"/session/{sid}/step", json={"pose": [1, 2, 3]})
        assert resp.status_code == 400

    def test_concurrent_steps_one_409(self, client):
        sid = make_session(client)
        poses = standard_trajectories("panorama", 8)
        statuses = []
        lock = threading.Lock()

        def fire(pose):
            resp = client.post(f"/session/{sid}/step", json={"pose": pose.to_array12()})
            with lock:
                statuses.append(resp.status_code)

        threads = [threading.Thread(target=fire, args=(poses[k],)) for k in (1, 2)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sorted(statuses) == [200, 409]

    def test_pipeline_stage_error_maps_to_422(self, client, monkeypatch):
        from splatforge import service as service_module
        from splatforge.errors import StageError

        sid = make_session(client)

        def exploding_step(state, pose, prompt=""):
            raise StageError("stepsplat", RuntimeError("boom"))

        monkeypatch.setattr(service_module, "pipeline_step", exploding_step)
        resp = client.post(f"/session/{sid}/step",
                           json={"pose": Pose.identity().to_array12()})
        assert resp.status_code == 422
        assert "stepsplat" in resp.json()["detail"]


class TestRender:
    def test_render_matches_init_view(self, client):
        from splatforge.imaging import psnr

        sid = make_session(client)
        resp = client.get(f"/session/{sid}/render",
                          params={"pose": pose_query(Pose.identity())})
        assert resp.status_code == 200
        assert MULTIPART_BOUNDARY in resp.headers["content-type"]
        parts = resp.content.split(b"--" + MULTIPART_BOUNDARY.encode())
        png = parts[1].split(b"\r\n\r\n", 1)[1].rstrip(b"\r\n")
        pfm = parts[2].split(b"\r\n\r\n", 1)[1].rstrip(b"\r\n")
        img = decode_png(png)
        depth = decode_pfm(pfm)
        scene = build_synthetic_scene(0, "room")
        gt_img, _ = render_ground_truth(scene, Pose.identity(), INTR)
        assert psnr(img, gt_img) >= 30.0
        assert depth.shape == (64, 64)

    def test_render_is_deterministic_bytes(self, client):
        sid = make_session(client)
        params = {"pose": pose_query(standard_trajectories("panorama", 8)[1])}
        a = client.get(f"/session/{sid}/render", params=params)
        b = client.get(f"/session/{sid}/render", params=params)
        assert a.content == b.content

    def test_render_does_not_mutate(self, client):
        sid = make_session(client)
        before = client.get(f"/session/{sid}").json()
        for k in range(5):
            pose = standard_trajectories("panorama", 8)[k % 8]
            client.get(f"/session/{sid}/render", params={"pose": pose_query(pose)})
        after = client.get(f"/session/{sid}").json()
        assert after["gaussian_count"] == before["gaussian_count"]
        assert after["step_count"] == before["step_count"]

    def test_render_unknown_404(self, client):
        resp = client.get("/session/nope/render",
                          params={"pose": pose_query(Pose.identity())})
        assert resp.status_code == 404


class TestExportAndMetadata:
    def test_export_equals_ply_bytes(self, client):
        from splatforge.gaussians import decode_ply

        sid = make_session(client)
        blob = client.get(f"/session/{sid}/export.ply").content
        g = decode_ply(blob)
        assert len(g) == 64 * 64

    def test_metadata_tracks_steps(self, client):
        sid = make_session(client)
        meta = client.get(f"/session/{sid}").json()
        assert meta["step_count"] == 1 and meta["prompts"] == []
        pose = standard_trajectories("panorama", 8)[1]
        client.post(f"/session/{sid}/step", json={"pose": pose.to_array12(), "prompt": "x"})
        meta = client.get(f"/session/{sid}").json()
        assert meta["step_count"] == 2 and meta["prompts"] == ["x"]

    def test_metadata_unknown_404(self, client):
        assert client.get("/session/nope").status_code == 404
