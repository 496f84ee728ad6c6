"""End-to-end orchestration: stage runner, run manifest and dataset simulation"""

from .manifest import Manifest, StageRecord, file_hash
from .runner import STAGE_ORDER, PipelineResult, PipelineRunner, config_hash, run_pipeline
from .simulation import (
    AssetSamples,
    SimulationBundle,
    load_bundle,
    save_bundle,
    simulate_dataset,
    variation_seed,
)

__all__ = [
    "STAGE_ORDER",
    "AssetSamples",
    "Manifest",
    "PipelineResult",
    "PipelineRunner",
    "SimulationBundle",
    "StageRecord",
    "config_hash",
    "file_hash",
    "load_bundle",
    "run_pipeline",
    "save_bundle",
    "simulate_dataset",
    "variation_seed",
]
