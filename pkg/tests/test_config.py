"""
Tests for the Configuration Module
Tests strict JSON loading, profiles, validation and persistence.
"""

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import (
    OperatorConfig,
    PatchConfig,
    PipelineConfig,
    ReferenceOperatorParams,
    RigConfig,
    ShadingConfig,
)
from src.errors import ConfigError


def _write(tmp_path: Path, data: dict) -> Path:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return path


# ============================================================
# Test Loading
# ============================================================


class TestLoad:
    """Tests for PipelineConfig.from_dict and load_from_file"""

    def test_minimal(self):
        config = PipelineConfig.from_dict({"seed": 7})
        assert config.seed == 7
        assert config.profile == "desk"
        assert config.texture_size == (144, 96)
        assert set(config.operators) == {"zeta", "delta", "psi", "rho", "sigma"}
        assert all(op.backend == "reference" for op in config.operators.values())

    def test_seed_is_mandatory(self):
        with pytest.raises(ConfigError, match="seed"):
            PipelineConfig.from_dict({"profile": "desk"})

    def test_seed_must_be_integer(self):
        with pytest.raises(ConfigError, match="seed"):
            PipelineConfig.from_dict({"seed": "7"})
        with pytest.raises(ConfigError, match="seed"):
            PipelineConfig.from_dict({"seed": True})

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            PipelineConfig.from_dict({"seed": 1, "sead": 2})

    @pytest.mark.parametrize(
        "section,body",
        [
            ("rig", {"name": "x", "colour": 1}),
            ("patches", {"patch": 192, "overlap": 4}),
            ("shading", {"samples": 4}),
            ("reference", {"s0": 0.3, "s1": 0.1}),
        ],
    )
    def test_unknown_nested_key(self, section, body):
        with pytest.raises(ConfigError, match="unknown keys"):
            PipelineConfig.from_dict({"seed": 1, section: body})

    def test_unknown_operator_stage(self):
        with pytest.raises(ConfigError, match="unknown stages"):
            PipelineConfig.from_dict({"seed": 1, "operators": {"upscale": {}}})

    def test_external_backend_needs_command(self):
        with pytest.raises(ConfigError, match="command"):
            PipelineConfig.from_dict({"seed": 1, "operators": {"psi": {"backend": "external"}}})

    def test_unknown_backend(self):
        with pytest.raises(ConfigError, match="backend"):
            OperatorConfig(backend="gpu")

    def test_nested_sections(self):
        config = PipelineConfig.from_dict(
            {
                "seed": 1,
                "rig": {"name": "lab", "preset": None, "lights": [{"pos": [0, 0, 3], "intensity": [1, 1, 1]}]},
                "render_rigs": [{"name": "flat", "preset": "uniform", "env_uniform": 0.5}],
                "patches": {"patch": 64, "stride": 32},
                "shading": {"env_samples": 16, "views": ["frontal"]},
                "reference": {"beta": 0.5},
            }
        )
        assert config.rig.name == "lab"
        assert config.render_rigs[0].env_uniform == 0.5
        assert config.patches.effective_stride == 32
        assert config.shading.views == ["frontal"]
        assert config.reference.beta == 0.5

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            PipelineConfig.load_from_file(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{seed: 1")
        with pytest.raises(ConfigError, match="Invalid JSON"):
            PipelineConfig.load_from_file(path)


# ============================================================
# Test Profiles
# ============================================================


class TestProfiles:
    """Tests for the desk and full presets"""

    def test_desk(self):
        config = PipelineConfig.desk_profile(seed=0)
        assert config.output_size == (1152, 768)
        assert config.patches.patch == 192
        assert config.sr_patch == 24

    def test_full(self):
        config = PipelineConfig.from_dict({"seed": 0, "profile": "full"})
        assert config.output_size == (4608, 3072)
        assert config.patches.patch == 1536
        assert config.patches.effective_stride == 768
        assert config.shading.env_samples == 1024

    def test_overrides_win(self):
        config = PipelineConfig.from_dict({"seed": 0, "profile": "full", "texture_size": [72, 48]})
        assert config.texture_size == (72, 48)

    def test_unknown_profile(self):
        with pytest.raises(ConfigError, match="profile"):
            PipelineConfig.from_dict({"seed": 0, "profile": "laptop"})


# ============================================================
# Test Validation
# ============================================================


class TestValidation:
    """Tests for field checks and validate()"""

    def test_patch_multiple_of_scale(self):
        with pytest.raises(ConfigError, match="multiple of scale"):
            PipelineConfig(seed=0, scale=8, patches=PatchConfig(patch=100, stride=50))

    def test_stride_above_patch(self):
        with pytest.raises(ConfigError, match="stride"):
            PatchConfig(patch=16, stride=32)

    def test_delta_conditioning(self):
        with pytest.raises(ConfigError, match="delta_conditioning"):
            PipelineConfig(seed=0, delta_conditioning="albedo")

    def test_unknown_view(self):
        with pytest.raises(ConfigError, match="views"):
            ShadingConfig(views=["top"])

    def test_reference_params_ranges(self):
        with pytest.raises(ConfigError, match="s0"):
            ReferenceOperatorParams(s0=1.5)
        with pytest.raises(ConfigError, match="nz_min"):
            ReferenceOperatorParams(nz_min=1.0)

    def test_equivariance_margin(self):
        assert ReferenceOperatorParams().equivariance_margin == 20

    def test_unknown_rig_preset(self):
        with pytest.raises(ConfigError, match="preset"):
            RigConfig(preset="sunset")

    def test_validate_requires_inputs(self, tmp_path):
        with pytest.raises(ConfigError, match="mesh_path is required"):
            PipelineConfig(seed=0).validate(tmp_path)

    def test_validate_resolves_against_base_dir(self, tmp_path):
        (tmp_path / "face.obj").write_text("")
        (tmp_path / "texture.png").write_bytes(b"")
        config = PipelineConfig(seed=0, mesh_path="face.obj", texture_path="texture.png")
        config.validate(tmp_path)
        with pytest.raises(ConfigError, match="texture_path not found"):
            PipelineConfig(seed=0, mesh_path="face.obj", texture_path="other.png").validate(tmp_path)

    def test_validate_truth_albedo(self, tmp_path):
        (tmp_path / "face.obj").write_text("")
        (tmp_path / "texture.png").write_bytes(b"")
        config = PipelineConfig(
            seed=0, mesh_path="face.obj", texture_path="texture.png", truth_albedo_path="truth.png"
        )
        with pytest.raises(ConfigError, match="truth_albedo_path"):
            config.validate(tmp_path)

    def test_validate_env_path(self, tmp_path):
        (tmp_path / "face.obj").write_text("")
        (tmp_path / "texture.png").write_bytes(b"")
        config = PipelineConfig(
            seed=0, mesh_path="face.obj", texture_path="texture.png",
            render_rigs=[RigConfig(name="hdr", preset=None, env_path="sky.rmap")],
        )
        with pytest.raises(ConfigError, match="env_path"):
            config.validate(tmp_path)


# ============================================================
# Test Persistence
# ============================================================


class TestPersistence:
    """Tests for save_to_file / load_from_file"""

    def test_round_trip(self, tmp_path):
        config = PipelineConfig.from_dict(
            {
                "seed": 11,
                "mesh_path": "face.obj",
                "texture_path": "texture.png",
                "remap_size": [64, 48],
                "render_rigs": [{"name": "flat", "preset": "uniform"}],
                "operators": {"rho": {"backend": "external", "command": ["model", "--rho"]}},
                "patches": {"patch": 64},
            }
        )
        path = tmp_path / "saved.json"
        config.save_to_file(path)
        loaded = PipelineConfig.load_from_file(path)
        assert loaded.to_dict() == config.to_dict()
        assert loaded.remap_size == (64, 48)
        assert loaded.operators["rho"].command == ["model", "--rho"]

    def test_saved_file_is_sorted_json(self, tmp_path):
        path = tmp_path / "saved.json"
        PipelineConfig(seed=1).save_to_file(path)
        data = json.loads(path.read_text())
        assert list(data) == sorted(data)

    def test_load_from_written_file(self, tmp_path):
        path = _write(tmp_path, {"seed": 5, "workers": 2})
        assert PipelineConfig.load_from_file(path).workers == 2
