"""HTTP service tests: bounds, caching, and agreement with the library."""

import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from edi.cli import main
from edi.events import index_events
from edi.formats import SequenceBundle, load_gray_image
from edi.optimize import EnergyParams, energy_function, find_c
from edi.server import create_app


def png_pixels(content: bytes) -> np.ndarray:
    return np.asarray(Image.open(io.BytesIO(content)))


@pytest.fixture(scope="module")
def moving(tmp_path_factory):
    out = tmp_path_factory.mktemp("srv_moving")
    assert main(["synth", "--out", str(out), "--width", "96", "--height", "72",
                 "--n-patches", "36", "--seed", "5"]) == 0
    bundle = SequenceBundle.load(out / "events.txt", out / "blurry.txt")
    return bundle, TestClient(create_app(bundle))


@pytest.fixture(scope="module")
def static(tmp_path_factory):
    src = tmp_path_factory.mktemp("srv_sharp")
    flat = np.full((24, 32), 93, dtype=np.uint8)
    for i in range(8):
        Image.fromarray(flat, mode="L").save(src / f"f_{i:02d}.png")
    out = tmp_path_factory.mktemp("srv_static")
    assert main(["synth", "--in", str(src), "--out", str(out)]) == 0
    bundle = SequenceBundle.load(out / "events.txt", out / "blurry.txt")
    return bundle, TestClient(create_app(bundle))


class TestInfo:
    def test_shape_and_bounds(self, moving):
        bundle, client = moving
        info = client.get("/api/info").json()
        assert info["width"] == 96 and info["height"] == 72
        assert info["n_events"] == bundle.stream.ts.size
        assert info["c_lo"] == EnergyParams().c_lo
        assert info["c_hi"] == EnergyParams().c_hi
        assert info["c_lo"] <= info["c_default"] <= info["c_hi"]
        assert len(info["frames"]) == len(bundle.frames)
        row = info["frames"][0]
        frame = bundle.frames[0]
        assert row["midpoint"] == frame.midpoint
        assert row["t_lo"] == pytest.approx(frame.exposure_start - frame.duration)
        assert row["t_hi"] == pytest.approx(frame.exposure_end + frame.duration)


class TestFrameEndpoint:
    def test_returns_png_of_sensor_size(self, moving):
        _, client = moving
        r = client.get("/api/frame", params={"frame": 0, "c": 0.3})
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert png_pixels(r.content).shape == (72, 96)

    def test_identical_query_is_byte_identical(self, moving):
        _, client = moving
        q = {"frame": 0, "c": 0.2, "t": 0.01}
        assert client.get("/api/frame", params=q).content == client.get(
            "/api/frame", params=q
        ).content

    def test_c_changes_the_image(self, moving):
        _, client = moving
        lo = client.get("/api/frame", params={"frame": 0, "c": 0.01}).content
        hi = client.get("/api/frame", params={"frame": 0, "c": 0.9}).content
        assert lo != hi

    def test_t_scrub_changes_the_image(self, moving):
        bundle, client = moving
        frame = bundle.frames[0]
        a = client.get("/api/frame", params={"frame": 0, "c": 0.3,
                                             "t": frame.exposure_start}).content
        b = client.get("/api/frame", params={"frame": 0, "c": 0.3,
                                             "t": frame.exposure_end}).content
        assert a != b

    def test_default_t_is_midpoint(self, moving):
        bundle, client = moving
        implicit = client.get("/api/frame", params={"frame": 0, "c": 0.3}).content
        explicit = client.get(
            "/api/frame", params={"frame": 0, "c": 0.3, "t": bundle.frames[0].midpoint}
        ).content
        assert implicit == explicit

    def test_unknown_frame_404(self, moving):
        _, client = moving
        assert client.get("/api/frame", params={"frame": 5}).status_code == 404

    def test_c_out_of_bounds_echoes_bounds(self, moving):
        _, client = moving
        r = client.get("/api/frame", params={"frame": 0, "c": 3.0})
        assert r.status_code == 400
        detail = r.json()["detail"]
        assert "0.01" in detail and "1.0" in detail

    def test_t_out_of_bounds_rejected(self, moving):
        _, client = moving
        r = client.get("/api/frame", params={"frame": 0, "c": 0.3, "t": 99.0})
        assert r.status_code == 400
        assert "bounds" in r.json()["detail"]

    def test_zero_events_serves_the_input_frame(self, static):
        bundle, client = static
        for c in [0.01, 0.21, 1.0]:
            r = client.get("/api/frame", params={"frame": 0, "c": c})
            assert r.status_code == 200
            np.testing.assert_array_equal(
                png_pixels(r.content), np.full((24, 32), 93)
            )


class TestEnergyEndpoint:
    def test_matches_offline_evaluator(self, moving):
        bundle, client = moving
        rows = client.get("/api/energy", params={"frame": 0, "n": 12}).json()
        fn = energy_function(bundle.frames[0], index_events(bundle.stream), EnergyParams())
        grid = np.geomspace(EnergyParams().c_lo, EnergyParams().c_hi, 12)
        assert len(rows) == 12
        for (c, e), want_c in zip(rows, grid):
            assert c == pytest.approx(want_c, rel=1e-15)
            assert e == pytest.approx(fn(float(want_c)), rel=1e-12)

    def test_flat_on_zero_events(self, static):
        _, client = static
        rows = client.get("/api/energy", params={"frame": 0}).json()
        values = [e for _, e in rows]
        assert len(rows) == 20
        assert max(values) - min(values) <= 1e-12

    def test_bad_n_rejected(self, moving):
        _, client = moving
        assert client.get("/api/energy", params={"frame": 0, "n": 1}).status_code == 400


class TestOptimizeEndpoint:
    def test_matches_offline_find_c(self, moving):
        bundle, client = moving
        r = client.post("/api/optimize", json={"frame": 0})
        assert r.status_code == 200
        body = r.json()
        offline = find_c(bundle.frames[0], bundle.stream)
        assert body["c_hat"] == pytest.approx(offline.c_hat, rel=1e-12)
        assert body["flat"] is False
        assert len(body["curve"]) == body["n_evaluations"]

    def test_repeat_call_joins_cached_result(self, moving):
        _, client = moving
        a = client.post("/api/optimize", json={"frame": 0}).json()
        b = client.post("/api/optimize", json={"frame": 0}).json()
        assert a == b

    def test_missing_frame_key(self, moving):
        _, client = moving
        assert client.post("/api/optimize", json={}).status_code == 400

    def test_unknown_frame(self, moving):
        _, client = moving
        assert client.post("/api/optimize", json={"frame": 9}).status_code == 404


class TestBlurryEndpoint:
    def test_serves_the_stored_input(self, moving):
        bundle, client = moving
        r = client.get("/api/blurry", params={"frame": 0})
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        # same quantization as the CLI export, so bytes match the stored pixels
        want = np.floor(np.clip(bundle.frames[0].pixels, 0, 1) * 255 + 0.5)
        np.testing.assert_array_equal(png_pixels(r.content), want)

    def test_repeat_is_byte_identical(self, moving):
        _, client = moving
        q = {"frame": 1}
        assert client.get("/api/blurry", params=q).content == client.get(
            "/api/blurry", params=q
        ).content

    def test_zero_events_matches_latent_at_any_c(self, static):
        _, client = static
        blurry = client.get("/api/blurry", params={"frame": 0}).content
        latent = client.get("/api/frame", params={"frame": 0, "c": 0.5}).content
        assert blurry == latent

    def test_unknown_frame_404(self, moving):
        _, client = moving
        assert client.get("/api/blurry", params={"frame": 7}).status_code == 404


class TestEdgesEndpoint:
    def test_returns_png(self, moving):
        _, client = moving
        r = client.get("/api/edges", params={"frame": 0})
        assert r.status_code == 200
        pix = png_pixels(r.content)
        assert pix.shape == (72, 96)
        assert pix.max() == 255  # peak normalized before export

    def test_black_on_zero_events(self, static):
        _, client = static
        r = client.get("/api/edges", params={"frame": 0})
        assert np.all(png_pixels(r.content) == 0)

    def test_t_bounds_enforced(self, moving):
        _, client = moving
        assert client.get(
            "/api/edges", params={"frame": 0, "t": -5.0}
        ).status_code == 400
