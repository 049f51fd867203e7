"""
Tests for experiment files: parsing, errors, round trip and grid expansion
"""

from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from training.experiment_config import (
    DEFAULT_RATIOS,
    CompressionSpec,
    DatasetSpec,
    ExperimentConfig,
    ExperimentConfigError,
    RunSettings,
    TopologySpec,
    format_variant_label,
    parse_variant_label,
)
from training.trainer import TrainConfig

BASE_EXPERIMENT = """\
[dataset]
source = mnist
path = mnist
train_size = 10000
test_size = 2000

[network]
depth = 3
hidden = 200

[compression]
modes = hashednets, funhash
ratios = 1/8
variants = U4-G3

[run]
seeds = 0, 1, 2
output = results/one_eighth
"""


def test_parse_base_configuration():
    config = ExperimentConfig.parse(BASE_EXPERIMENT)
    assert config.dataset.train_size == 10000
    assert config.network.hidden_layers() == 1
    assert config.compression.ratios == [0.125]
    assert config.variants() == [(4, 3, False)]
    assert config.training == TrainConfig()
    assert config.run.seeds == [0, 1, 2]


def test_defaults_for_optional_sections():
    config = ExperimentConfig.parse("[dataset]\nsource = synthetic\n[network]\nhidden = 20\n")
    assert config.compression.ratios == list(DEFAULT_RATIOS)
    assert config.compression.regime == "fixed-virtual"
    assert config.compression.hash_mode is None
    assert config.run.checkpoint is True


def test_variant_labels():
    assert parse_variant_label("U4-G3") == (4, 3, False)
    assert parse_variant_label(" U16-G2-D ") == (16, 2, True)
    assert format_variant_label(8, 4, True) == "U8-G4-D"
    with pytest.raises(ExperimentConfigError):
        parse_variant_label("U4G3")


@pytest.mark.parametrize(
    "text, fragment",
    [
        (BASE_EXPERIMENT.replace("hidden = 200", "hidden = 200\nwidth = 3"), "network.width: unknown key"),
        (BASE_EXPERIMENT.replace("depth = 3", "depth = 4"), "network.depth"),
        (BASE_EXPERIMENT.replace("ratios = 1/8", "ratios = 0"), "compression.ratios"),
        (BASE_EXPERIMENT.replace("ratios = 1/8", "ratios = 1/0"), "compression.ratios"),
        (BASE_EXPERIMENT.replace("ratios = 1/8", "ratios = 2"), "compression.ratios"),
        (BASE_EXPERIMENT.replace("variants = U4-G3", "variants = U4-G7"), "compression.variants"),
        (BASE_EXPERIMENT.replace("variants = U4-G3", "U = 0"), "compression.U"),
        (BASE_EXPERIMENT.replace("seeds = 0, 1, 2", "seeds = 0, 0"), "run.seeds"),
        (BASE_EXPERIMENT.replace("seeds = 0, 1, 2", "seeds = a"), "run.seeds"),
        (BASE_EXPERIMENT.replace("modes = hashednets, funhash", "modes = multihop"), "compression.hops"),
        (BASE_EXPERIMENT.replace("source = mnist", "source = cifar"), "dataset.source"),
        (BASE_EXPERIMENT.replace("hidden = 200", ""), "network.hidden: missing required field"),
        (BASE_EXPERIMENT + "[optimizer]\nlr = 1\n", "optimizer: unknown section"),
        (BASE_EXPERIMENT + "[training]\nmomentum = 1.5\n", "training"),
    ],
)
def test_errors_name_the_field(text, fragment):
    with pytest.raises(ExperimentConfigError) as excinfo:
        ExperimentConfig.parse(text)
    assert fragment in str(excinfo.value)


def test_syntax_errors_report_line_numbers():
    with pytest.raises(ExperimentConfigError) as excinfo:
        ExperimentConfig.parse("[dataset]\nsource = mnist\nthis line has no separator\n")
    assert excinfo.value.line == 3
    assert "line 3" in str(excinfo.value)

    with pytest.raises(ExperimentConfigError) as excinfo:
        ExperimentConfig.parse("source = mnist\n")
    assert excinfo.value.line == 1


def test_missing_file(tmp_path):
    with pytest.raises(ExperimentConfigError):
        ExperimentConfig.from_file(tmp_path / "absent.ini")


def test_from_file(write_experiment):
    config = ExperimentConfig.from_file(write_experiment(BASE_EXPERIMENT))
    assert config.run.output == "results/one_eighth"


def test_round_trip_of_base_configuration():
    config = ExperimentConfig.parse(BASE_EXPERIMENT)
    assert ExperimentConfig.parse(config.to_text()) == config


ratio_values = st.sampled_from([1.0, 0.5, 0.25, 0.125, 1 / 3, 1 / 64, 0.3])


@given(
    dataset=st.builds(
        DatasetSpec,
        source=st.sampled_from(["mnist", "idx", "synthetic"]),
        path=st.sampled_from(["", "mnist", "data/other"]),
        kind=st.sampled_from(["blobs", "xor", "convex-like"]),
        train_size=st.none() | st.integers(min_value=1, max_value=60000),
        test_size=st.none() | st.integers(min_value=1, max_value=10000),
        validation_fraction=st.sampled_from([0.0, 0.2, 0.1]),
        num_classes=st.integers(min_value=2, max_value=10),
    ),
    network=st.builds(
        TopologySpec,
        depth=st.sampled_from([3, 5]),
        hidden=st.integers(min_value=1, max_value=2000),
        head=st.sampled_from(["softmax", "squared"]),
    ),
    compression=st.builds(
        CompressionSpec,
        modes=st.lists(
            st.sampled_from(["dense", "hashednets", "funhash", "funhash-dual"]), min_size=1, max_size=4, unique=True
        ),
        ratios=st.lists(ratio_values, min_size=1, max_size=4),
        U=st.lists(st.sampled_from([1, 2, 4, 8, 16]), min_size=1, max_size=3),
        G=st.lists(st.sampled_from([2, 3, 4]), min_size=1, max_size=3),
        dual=st.lists(st.booleans(), min_size=1, max_size=2),
        variants=st.lists(
            st.builds(format_variant_label, st.sampled_from([2, 4]), st.sampled_from([2, 3]), st.booleans()),
            max_size=3,
        ),
        hops=st.integers(min_value=0, max_value=3),
        regime=st.sampled_from(["fixed-virtual", "fixed-memory"]),
        hash_mode=st.sampled_from([None, "cached", "online"]),
        dual_k=st.none() | st.integers(min_value=1, max_value=1000),
    ),
    training=st.builds(
        TrainConfig,
        learning_rate=st.sampled_from([0.01, 0.1, 0.05]),
        momentum=st.sampled_from([0.0, 0.9, 0.5]),
        batch_size=st.integers(min_value=1, max_value=512),
        epochs=st.integers(min_value=0, max_value=50),
        eval_every=st.integers(min_value=1, max_value=5),
        lr_decay=st.sampled_from([1.0, 0.99]),
    ),
    run=st.builds(
        RunSettings,
        seeds=st.lists(st.integers(min_value=0, max_value=10_000), min_size=1, max_size=4, unique=True),
        output=st.sampled_from(["results", "results/fixed_virtual"]),
        record_wall_time=st.booleans(),
        hash_seed=st.none() | st.integers(min_value=0, max_value=1000),
        checkpoint=st.booleans(),
    ),
)
def test_parse_serialize_parse_is_identity(dataset, network, compression, training, run):
    config = ExperimentConfig(dataset, network, compression, training, run)
    config.validate()
    text = config.to_text()
    parsed = ExperimentConfig.parse(text)
    assert parsed == config
    assert parsed.to_text() == text


# ----------------------------------------------------------------------
# grid expansion


def test_expand_base_configuration():
    runs = ExperimentConfig.parse(BASE_EXPERIMENT).expand()
    assert [(run.mode, run.U, run.G, run.seed) for run in runs] == [
        ("hashednets", 1, 0, 0),
        ("hashednets", 1, 0, 1),
        ("hashednets", 1, 0, 2),
        ("funhash", 4, 3, 0),
        ("funhash", 4, 3, 1),
        ("funhash", 4, 3, 2),
    ]
    assert [run.index for run in runs] == list(range(6))
    assert runs[3].name == "funhash_r1-8_U4-G3_s0"
    assert runs[0].train_config(5).seed == 5


def test_dense_runs_follow_ratios_in_fixed_virtual_regime():
    config = ExperimentConfig.parse(
        BASE_EXPERIMENT.replace("modes = hashednets, funhash", "modes = dense, funhash")
        .replace("ratios = 1/8", "ratios = 1, 1/8")
    )
    dense = [run for run in config.expand() if run.mode == "dense"]
    assert len(dense) == 2 * len(config.run.seeds)
    assert sorted({run.ratio for run in dense}) == [0.125, 1.0]
    assert {run.name.split("_")[1] for run in dense} == {"r1", "r1-8"}


def test_dense_follows_ratios_in_fixed_memory_regime():
    config = ExperimentConfig.parse(
        BASE_EXPERIMENT.replace("modes = hashednets, funhash", "modes = dense")
        .replace("ratios = 1/8", "ratios = 1, 1/4\nregime = fixed-memory")
    )
    assert sorted({run.ratio for run in config.expand()}) == [0.25, 1.0]


def test_dual_mode_is_a_funhash_variant():
    config = ExperimentConfig.parse(
        BASE_EXPERIMENT.replace("modes = hashednets, funhash", "modes = funhash-dual")
    )
    run = config.expand()[0]
    assert (run.mode, run.dual, run.layer_mode) == ("funhash", True, "funhash-dual")
    assert run.name.startswith("funhash_r1-8_U4-G3-D")


def test_variant_suffix_selects_dual():
    config = ExperimentConfig.parse(
        BASE_EXPERIMENT.replace("modes = hashednets, funhash", "modes = funhash")
        .replace("variants = U4-G3", "variants = U4-G3, U4-G3-D, U8-G2")
    )
    assert [(run.U, run.G, run.dual) for run in config.expand() if run.seed == 0] == [
        (4, 3, False),
        (4, 3, True),
        (8, 2, False),
    ]


def test_grid_of_u_g_and_dual():
    config = ExperimentConfig.parse(
        BASE_EXPERIMENT.replace("modes = hashednets, funhash", "modes = funhash")
        .replace("variants = U4-G3", "U = 2, 4\nG = 2, 3\ndual = false, true")
        .replace("seeds = 0, 1, 2", "seeds = 0")
    )
    assert len(config.expand()) == 8


def test_multihop_runs_carry_hop_count():
    config = ExperimentConfig.parse(
        BASE_EXPERIMENT.replace("modes = hashednets, funhash", "modes = multihop")
        .replace("variants = U4-G3", "variants = U4-G3, U4-G3-D\nhops = 2")
    )
    runs = config.expand()
    assert {run.hops for run in runs} == {2}
    assert {run.dual for run in runs} == {False}
    assert runs[0].name == "multihop_r1-8_U4-G3_M2_s0"


def test_five_layer_topology():
    config = ExperimentConfig.parse(BASE_EXPERIMENT.replace("depth = 3", "depth = 5"))
    assert config.network.hidden_layers() == 3


@pytest.mark.parametrize("path", sorted(Path(__file__).parent.glob("experiments/*.ini")), ids=lambda p: p.stem)
def test_shipped_experiments_parse(path):
    config = ExperimentConfig.from_file(path)
    assert config.expand()
