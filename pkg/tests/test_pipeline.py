"""
Tests for the Pipeline Module
Runs the full stage chain on a small synthetic face, checks determinism, resuming
from cached stages, failure reporting and dataset simulation.
"""

import itertools
import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import OperatorConfig, PatchConfig, PipelineConfig, RigConfig, ShadingConfig
from src.errors import ConfigError, GeometryError, OperatorError, StageError
from src.geometry import save_obj
from src.geometry.synthetic import smooth_albedo, sphere_face, uv_sphere
from src.metrics import psnr
from src.pipeline import (
    STAGE_ORDER,
    PipelineRunner,
    config_hash,
    load_bundle,
    run_pipeline,
    simulate_dataset,
    variation_seed,
)
from src.raster import MapKind, save_raster
from src.shading import LightingRig, bake_texture

SEED = 3
WIDTH, HEIGHT = 48, 32
FAST_SHADING = ShadingConfig(env_samples=16, shadow_grid=64, render_size=24, views=["frontal"])


def _config(root: Path, **overrides) -> PipelineConfig:
    base = dict(
        seed=SEED,
        mesh_path="face.obj",
        texture_path="texture.rmap",
        output_dir="out",
        texture_size=(WIDTH, HEIGHT),
        scale=1,
        patches=PatchConfig(patch=16, stride=8),
        shading=FAST_SHADING,
        subdivision=0,
    )
    base.update(overrides)
    return PipelineConfig(**base)


@pytest.fixture(scope="module")
def asset_dir(tmp_path_factory):
    """Face mesh, its albedo and a texture baked under the default studio rig"""
    root = tmp_path_factory.mktemp("asset")
    mesh = sphere_face(rows=12, cols=16)
    albedo = smooth_albedo(WIDTH, HEIGHT, seed=1)
    texture = bake_texture(albedo, mesh, RigConfig().to_rig(), FAST_SHADING.to_params(), seed=SEED)
    save_obj(mesh, root / "face.obj")
    save_raster(texture, root / "texture.rmap")
    save_raster(albedo, root / "albedo.rmap")
    return root


@pytest.fixture(scope="module")
def full_run(asset_dir):
    config = _config(asset_dir, output_dir="out-full", truth_albedo_path="albedo.rmap")
    return run_pipeline(config, base_dir=asset_dir)


# ============================================================
# Test Full Run
# ============================================================


class TestRunPipeline:
    """End-to-end run with reference backends"""

    def test_all_stages_recorded(self, full_run):
        manifest = json.loads((full_run.output_dir / "manifest.json").read_text())
        assert set(manifest["stages"]) == set(STAGE_ORDER)
        assert manifest["seed"] == SEED

    def test_output_kinds(self, full_run):
        maps = full_run.maps
        assert maps["texture_hat"].kind == MapKind.TEXTURE
        assert maps["diffuse_albedo"].kind == MapKind.DIFFUSE_ALBEDO
        assert maps["specular_albedo"].kind == MapKind.SPECULAR_ALBEDO
        assert maps["specular_normals"].kind == MapKind.NORMALS_SPECULAR
        assert maps["diffuse_normals"].kind == MapKind.NORMALS_DIFFUSE
        assert maps["displacement"].kind == MapKind.DISPLACEMENT

    def test_outputs_keep_resolution(self, full_run):
        for name in ("diffuse_albedo", "specular_albedo", "specular_normals", "diffuse_normals", "displacement"):
            assert full_run.maps[name].resolution == (WIDTH, HEIGHT)

    def test_normals_are_unit_on_valid_texels(self, full_run):
        for name in ("specular_normals", "diffuse_normals"):
            normals = full_run.maps[name]
            lengths = np.linalg.norm(normals.data[normals.validity()].astype(np.float64), axis=1)
            np.testing.assert_allclose(lengths, 1.0, atol=1e-4)

    def test_albedos_in_unit_range(self, full_run):
        for name in ("diffuse_albedo", "specular_albedo"):
            data = full_run.maps[name].data
            assert data.min() >= 0.0 and data.max() <= 1.0

    def test_artifacts_written(self, full_run):
        out = full_run.output_dir
        for name in ("manifest.json", "timings.json", "config.json", "embossed.obj", "metrics.json", "metrics.md"):
            assert (out / name).exists(), name
        assert (out / "renders" / "studio_frontal.png").exists()
        assert set(full_run.renders["studio"]) == {"frontal"}

    def test_manifest_paths_are_relative(self, full_run):
        manifest = json.loads((full_run.output_dir / "manifest.json").read_text())
        for record in manifest["stages"].values():
            for entry in record["outputs"].values():
                assert not Path(entry["file"]).is_absolute()
                assert (full_run.output_dir / entry["file"]).exists()

    def test_manifest_has_no_wall_times(self, full_run):
        text = (full_run.output_dir / "manifest.json").read_text()
        timings = json.loads((full_run.output_dir / "timings.json").read_text())
        assert set(timings) == set(STAGE_ORDER)
        assert "timings" not in text

    def test_flags(self, full_run):
        stages = full_run.manifest.stages
        assert stages["displacement"].flags["residual"] <= 1e-8
        assert stages["delta"].flags["filled"] >= 0
        assert "seam_ratio" in stages["psi"].flags

    def test_round_trip_albedo(self, full_run):
        report = full_run.report
        assert report.entries["diffuse_albedo"].psnr_db >= 40.0
        assert report.entries["diffuse_albedo"].texels > 0.3 * WIDTH * HEIGHT

    def test_rebake_matches_texture(self, full_run):
        assert full_run.report.entries["rebake"].psnr_db >= 40.0

    def test_reflectance_set(self, full_run):
        refl = full_run.reflectance()
        assert refl.resolution == (WIDTH, HEIGHT)
        assert refl.displacement is not None


# ============================================================
# Test Determinism
# ============================================================


class TestDeterminism:
    """Identical config and seed give byte-identical manifests"""

    def test_rerun_and_worker_count(self, asset_dir):
        one = run_pipeline(_config(asset_dir, output_dir="det-1", workers=1), base_dir=asset_dir)
        many = run_pipeline(_config(asset_dir, output_dir="det-3", workers=3), base_dir=asset_dir)
        first = (one.output_dir / "manifest.json").read_bytes()
        assert first == (many.output_dir / "manifest.json").read_bytes()

    def test_config_hash_ignores_placement(self, asset_dir):
        a = _config(asset_dir, output_dir="a", workers=1)
        b = _config(asset_dir, output_dir="b", workers=4)
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash(_config(asset_dir, seed=SEED + 1))


# ============================================================
# Test Resume
# ============================================================


class TestResume:
    """Rerunning from a cached stage"""

    def test_resume_reproduces_manifest(self, asset_dir):
        config = _config(asset_dir, output_dir="resume")
        first = run_pipeline(config, base_dir=asset_dir)
        before = (first.output_dir / "manifest.json").read_bytes()
        resumed = PipelineRunner(config, base_dir=asset_dir).run(from_stage="psi")
        assert (resumed.output_dir / "manifest.json").read_bytes() == before
        assert resumed.maps["diffuse_albedo"].content_hash() == first.maps["diffuse_albedo"].content_hash()

    def test_resume_without_previous_run(self, asset_dir):
        with pytest.raises(ConfigError, match="No manifest"):
            PipelineRunner(_config(asset_dir, output_dir="never-ran"), base_dir=asset_dir).run(from_stage="rho")

    def test_unknown_stage(self, asset_dir):
        with pytest.raises(ConfigError, match="Unknown stage"):
            PipelineRunner(_config(asset_dir), base_dir=asset_dir).run(from_stage="denoise")


# ============================================================
# Test Failures
# ============================================================


class TestFailures:
    """Stage failures carry the stage name and last good artifact"""

    def test_failing_operator(self, asset_dir):
        crash = [sys.executable, "-c", "import sys; sys.exit(1)"]
        config = _config(
            asset_dir, output_dir="crash",
            operators={"delta": OperatorConfig(backend="external", command=crash, timeout=10.0)},
        )
        with pytest.raises(StageError) as exc:
            run_pipeline(config, base_dir=asset_dir)
        assert exc.value.stage == "delta"
        assert isinstance(exc.value.cause, OperatorError)
        assert exc.value.last_good.endswith("depth.rmap")
        assert Path(exc.value.last_good).exists()
        assert "Stage 'delta' failed" in str(exc.value)

    def test_texture_size_mismatch(self, asset_dir):
        config = _config(asset_dir, output_dir="size", texture_size=(144, 96))
        with pytest.raises(StageError) as exc:
            run_pipeline(config, base_dir=asset_dir)
        assert exc.value.stage == "load"
        assert exc.value.last_good is None
        assert "any_size" in str(exc.value)

    def test_any_size_accepts_texture(self, asset_dir):
        config = _config(asset_dir, output_dir="any", texture_size=(144, 96), any_size=True)
        runner = PipelineRunner(config, base_dir=asset_dir)
        runner._run_stage(0, "load")
        assert runner.maps["texture"].resolution == (WIDTH, HEIGHT)

    def test_missing_mesh(self, asset_dir):
        with pytest.raises(ConfigError, match="mesh_path"):
            run_pipeline(_config(asset_dir, mesh_path="missing.obj"), base_dir=asset_dir)

    def test_duplicate_rig_names(self, asset_dir):
        config = _config(asset_dir, render_rigs=[RigConfig(name="studio", preset="uniform")])
        with pytest.raises(ConfigError, match="unique"):
            run_pipeline(config, base_dir=asset_dir)


# ============================================================
# Test Simulation
# ============================================================


class TestSimulateDataset:
    """Tests for simulate_dataset and bundle persistence"""

    @pytest.fixture(scope="class")
    def assets(self):
        mesh = sphere_face(rows=12, cols=16)
        return [("a", mesh, smooth_albedo(WIDTH, HEIGHT, seed=1)), ("b", mesh, smooth_albedo(WIDTH, HEIGHT, seed=2))]

    def test_single_bake_without_jitter(self, assets):
        rig = LightingRig.studio()
        params = FAST_SHADING.to_params()
        bundle = simulate_dataset(assets[:1], rig, 1, seed=SEED, params=params)
        samples = bundle.assets["a"]
        assert samples.seeds == [variation_seed(SEED, 0)]
        expected = bake_texture(assets[0][2], assets[0][1], rig, params, seed=SEED)
        assert samples.textures[0].content_hash() == expected.content_hash()

    def test_jitter_gives_distinct_bakes(self, assets):
        rig = LightingRig.studio(jitter_sigma=0.3)
        bundle = simulate_dataset(assets[:1], rig, 3, seed=SEED, params=FAST_SHADING.to_params())
        textures = bundle.assets["a"].textures
        for a, b in itertools.combinations(textures, 2):
            assert psnr(a, b) < math.inf

    def test_bundle_reloads_exactly(self, assets, tmp_path):
        bundle = simulate_dataset(
            assets, LightingRig.studio(jitter_sigma=0.2), 2, seed=SEED,
            params=FAST_SHADING.to_params(), output_dir=tmp_path,
        )
        loaded = load_bundle(tmp_path)
        assert loaded.seed == SEED
        assert list(loaded.assets) == ["a", "b"]
        for name, samples in bundle.assets.items():
            other = loaded.assets[name]
            assert other.seeds == samples.seeds
            assert other.albedo.content_hash() == samples.albedo.content_hash()
            assert other.normals.content_hash() == samples.normals.content_hash()
            assert other.depth.content_hash() == samples.depth.content_hash()
            for mine, theirs in zip(samples.textures, other.textures):
                assert np.array_equal(mine.data, theirs.data)
                assert np.array_equal(mine.validity(), theirs.validity())
            assert np.array_equal(other.mesh.vertices, samples.mesh.vertices)
        assert (tmp_path / "a" / "texture_v0.png").exists()

    def test_topology_mismatch(self, assets):
        odd = ("odd", uv_sphere(8, 12), smooth_albedo(WIDTH, HEIGHT))
        with pytest.raises(GeometryError, match="topology"):
            simulate_dataset([assets[0], odd], LightingRig.studio(), 1, seed=0, params=FAST_SHADING.to_params())

    def test_needs_a_variation(self, assets):
        with pytest.raises(ConfigError):
            simulate_dataset(assets, LightingRig.studio(), 0, seed=0)

    def test_missing_bundle(self, tmp_path):
        with pytest.raises(ConfigError, match="bundle.json"):
            load_bundle(tmp_path)
