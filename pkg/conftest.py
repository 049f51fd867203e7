"""
Shared fixtures for the test suite.
"""

import os

os.environ.setdefault("FUNHASH_ENV", "testing")

from pathlib import Path  # noqa: E402

import hypothesis  # noqa: E402
import numpy as np  # noqa: E402
import pytest  # noqa: E402

from datasets.loader import MNIST_FILES, mnist_available  # noqa: E402
from datasets.idx import write_idx  # noqa: E402

np.seterr(all="warn")

hypothesis.settings.register_profile("dev", max_examples=20, deadline=None)
hypothesis.settings.register_profile("ci", max_examples=100, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "dev"))

MNIST_DIR = os.environ.get("FUNHASH_DATA_DIR", "data")

requires_mnist = pytest.mark.skipif(
    not mnist_available(Path(MNIST_DIR) / "mnist") and not mnist_available(MNIST_DIR),
    reason=f"MNIST IDX files not found under {MNIST_DIR}",
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def idx_dir(tmp_path):
    """
    Directory holding a tiny MNIST-named IDX set: 60 train and 20 test
    images of 4x4 pixels with labels 0..9.
    """
    generator = np.random.default_rng(7)
    for partition, count in (("train", 60), ("test", 20)):
        images = generator.integers(0, 256, size=(count, 4, 4), dtype=np.uint8)
        labels = (np.arange(count) % 10).astype(np.uint8)
        write_idx(tmp_path / MNIST_FILES[f"{partition}_images"], images)
        write_idx(tmp_path / MNIST_FILES[f"{partition}_labels"], labels)
    return tmp_path


@pytest.fixture
def write_experiment(tmp_path):
    """Factory writing experiment text to a file and returning its path."""

    def write(text: str, name: str = "experiment.ini") -> Path:
        path = tmp_path / name
        path.write_text(text)
        return path

    return write


SMALL_SYNTHETIC = """\
[dataset]
source = synthetic
kind = blobs
train_size = 160
test_size = 40

[network]
depth = 3
hidden = 8

[compression]
modes = {modes}
ratios = {ratios}
variants = U2-G3

[training]
learning_rate = 0.05
epochs = 2
batch_size = 32

[run]
seeds = {seeds}
output = {output}
"""


@pytest.fixture
def small_experiment(tmp_path):
    """Factory for a seconds-long synthetic experiment text."""

    def make(modes: str = "hashednets, funhash", ratios: str = "1/2", seeds: str = "0") -> str:
        return SMALL_SYNTHETIC.format(
            modes=modes, ratios=ratios, seeds=seeds, output=tmp_path / "results"
        )

    return make
