"""Shared fixtures: a small synthetic dataset and a model sized for it."""

import pytest

from hyperscreen.data import generate_synthetic
from hyperscreen.model import build_batch, init_params
from hyperscreen.models import BucketConfig, ModelConfig
from hyperscreen.seeding import derive_rng
from hyperscreen.trainer import resolve_buckets

TINY_DIM = 6


@pytest.fixture
def tiny_data():
    return generate_synthetic(targets=3, ligands_per_assay=4, dim=TINY_DIM, noise=0.05, seed=1)


@pytest.fixture
def tiny_batch(tiny_data):
    assays, store = tiny_data
    return build_batch(assays, store, resolve_buckets(BucketConfig(), assays))


@pytest.fixture
def tiny_params():
    config = ModelConfig(embed_dim=TINY_DIM, init_std=0.1)
    return init_params(TINY_DIM, config, derive_rng(0, "init"))
