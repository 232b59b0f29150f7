"""Shared fixtures: deterministic synthetic samples and CSV writers."""

import numpy as np
import pytest

from partialid.datamodel import Sample


def make_sample(n=400, seed=0, effect=1.0):
    """Simple instrumented-treatment sample with a positive effect.

    Z is a fair coin, D follows Z with 80% probability, and Y is a
    Gaussian outcome shifted by ``effect`` under treatment.
    """
    rng = np.random.default_rng(seed)
    z = (rng.random(n) < 0.5).astype(int)
    comply = rng.random(n) < 0.8
    d = np.where(comply, z, 1 - z)
    y = rng.normal(2.0, 1.0, n) + effect * d
    return Sample(y=y, d=d.astype(int), z=z)


def write_sample_csv(path, sample):
    rows = ["y,d,z"]
    rows += [f"{yi},{di},{zi}" for yi, di, zi in
             zip(sample.y, sample.d, sample.z)]
    path.write_text("\n".join(rows) + "\n")
    return path


@pytest.fixture
def sample():
    return make_sample()


@pytest.fixture
def sample_csv(tmp_path, sample):
    return write_sample_csv(tmp_path / "sample.csv", sample)
