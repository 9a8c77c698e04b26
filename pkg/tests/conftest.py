"""Shared fixtures. Model training is slow, so it happens once per session."""

import pytest

from visquest import load_config, load_models
from visquest.synthetic import build_demo_bundle


@pytest.fixture(scope="session")
def bundle(tmp_path_factory):
    """Demo bundle: trained models, images, config, all on disk."""
    out = tmp_path_factory.mktemp("bundle")
    return build_demo_bundle(out, seed=0, n_scenes=8)


@pytest.fixture(scope="session")
def pipeline_config(bundle):
    return load_config(bundle["config"])


@pytest.fixture(scope="session")
def models(pipeline_config):
    return load_models(pipeline_config)
