"""
Experiment Configuration
Flat INI experiment files with [dataset], [network], [compression],
[training] and [run] sections. parse() and to_text() round-trip exactly;
expand() turns one file into the grid of individual runs.

Example:

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

import configparser
import io
import logging
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from training.trainer import TrainConfig

logger = logging.getLogger(__name__)

SOURCES = ("mnist", "idx", "flat", "synthetic")
DEPTHS = (3, 5)
HEADS = ("softmax", "squared")
MODES = ("dense", "hashednets", "funhash", "funhash-dual", "multihop")
REGIMES = ("fixed-virtual", "fixed-memory")
HASH_MODES = ("cached", "online")
RECON_DEPTHS = (2, 3, 4)

DEFAULT_RATIOS = (1.0, 1 / 2, 1 / 4, 1 / 8, 1 / 16, 1 / 32, 1 / 64)

_VARIANT = re.compile(r"^U(\d+)-G(\d+)(-D)?$")


class ExperimentConfigError(ValueError):
    """Invalid experiment file"""

    def __init__(self, message: str, section: str = None, key: str = None, line: int = None):
        location = ".".join(part for part in (section, key) if part)
        prefix = f"{location}: " if location else ""
        suffix = f" (line {line})" if line else ""
        super().__init__(f"{prefix}{message}{suffix}")
        self.section = section
        self.key = key
        self.line = line


# ----------------------------------------------------------------------
# Variant labels


def parse_variant_label(label: str) -> Tuple[int, int, bool]:
    """
    Parse a U{x}-G{y}[-D] label into (U, G, dual).

    >>> parse_variant_label("U4-G3-D")
    (4, 3, True)
    """
    match = _VARIANT.match(label.strip())
    if not match:
        raise ExperimentConfigError(f"Variant label {label!r} is not of the form U<x>-G<y>[-D]")
    return int(match.group(1)), int(match.group(2)), bool(match.group(3))


def format_variant_label(U: int, G: int, dual: bool = False) -> str:
    return f"U{U}-G{G}" + ("-D" if dual else "")


# ----------------------------------------------------------------------
# Sections


@dataclass
class DatasetSpec:
    source: str = "mnist"
    path: str = ""
    kind: str = "blobs"
    train_size: Optional[int] = None
    test_size: Optional[int] = None
    validation_fraction: float = 0.0
    num_classes: int = 10


@dataclass
class TopologySpec:
    depth: int = 3
    hidden: int = 200
    head: str = "softmax"

    def hidden_layers(self) -> int:
        return 1 if self.depth == 3 else 3


@dataclass
class CompressionSpec:
    modes: List[str] = field(default_factory=lambda: ["funhash"])
    ratios: List[float] = field(default_factory=lambda: list(DEFAULT_RATIOS))
    U: List[int] = field(default_factory=lambda: [4])
    G: List[int] = field(default_factory=lambda: [3])
    dual: List[bool] = field(default_factory=lambda: [False])
    variants: List[str] = field(default_factory=list)
    hops: int = 0
    regime: str = "fixed-virtual"
    hash_mode: Optional[str] = None
    dual_k: Optional[int] = None


@dataclass
class RunSettings:
    seeds: List[int] = field(default_factory=lambda: [0])
    output: str = "results"
    record_wall_time: bool = False
    hash_seed: Optional[int] = None
    checkpoint: bool = True


@dataclass(frozen=True)
class RunSpec:
    """One cell of the experiment grid."""

    index: int
    mode: str
    ratio: float
    U: int
    G: int
    dual: bool
    hops: int
    seed: int
    experiment: "ExperimentConfig" = field(repr=False, compare=False)

    @property
    def layer_mode(self) -> str:
        if self.mode == "funhash" and self.dual:
            return "funhash-dual"
        return self.mode

    @property
    def name(self) -> str:
        parts = [self.mode, f"r{Fraction(self.ratio).limit_denominator(4096)}".replace("/", "-")]
        if self.mode in ("funhash", "multihop"):
            parts.append(format_variant_label(self.U, self.G, self.dual))
        if self.hops:
            parts.append(f"M{self.hops}")
        parts.append(f"s{self.seed}")
        return "_".join(parts)

    def train_config(self, seed: int) -> TrainConfig:
        return replace(
            self.experiment.training,
            seed=seed,
            record_wall_time=self.experiment.run.record_wall_time,
        )


# ----------------------------------------------------------------------
# Value codecs


def _parse_int(text: str) -> int:
    return int(text)


def _parse_optional_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in ("", "none") else int(text)


def _parse_float(text: str) -> float:
    return float(Fraction(text.strip()))


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{text!r} is not a boolean")


def _parse_str(text: str) -> str:
    return text.strip()


def _parse_optional_str(text: str) -> Optional[str]:
    return None if text.strip().lower() in ("", "none") else text.strip()


def _list_of(parse: Callable[[str], Any]) -> Callable[[str], List[Any]]:
    def parse_list(text: str) -> List[Any]:
        items = [item.strip() for item in text.split(",") if item.strip()]
        if not items:
            raise ValueError("empty list")
        return [parse(item) for item in items]

    return parse_list


def _format(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(_format(item) for item in value)
    return str(value)


_SCHEMA: Dict[str, Dict[str, Callable[[str], Any]]] = {
    "dataset": {
        "source": _parse_str,
        "path": _parse_str,
        "kind": _parse_str,
        "train_size": _parse_optional_int,
        "test_size": _parse_optional_int,
        "validation_fraction": _parse_float,
        "num_classes": _parse_int,
    },
    "network": {
        "depth": _parse_int,
        "hidden": _parse_int,
        "head": _parse_str,
    },
    "compression": {
        "modes": _list_of(_parse_str),
        "ratios": _list_of(_parse_float),
        "U": _list_of(_parse_int),
        "G": _list_of(_parse_int),
        "dual": _list_of(_parse_bool),
        "variants": _list_of(_parse_str),
        "hops": _parse_int,
        "regime": _parse_str,
        "hash_mode": _parse_optional_str,
        "dual_k": _parse_optional_int,
    },
    "training": {
        "learning_rate": _parse_float,
        "momentum": _parse_float,
        "batch_size": _parse_int,
        "epochs": _parse_int,
        "eval_every": _parse_int,
        "lr_decay": _parse_float,
    },
    "run": {
        "seeds": _list_of(_parse_int),
        "output": _parse_str,
        "record_wall_time": _parse_bool,
        "hash_seed": _parse_optional_int,
        "checkpoint": _parse_bool,
    },
}

_REQUIRED = {
    "dataset": ("source",),
    "network": ("hidden",),
}


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    network: TopologySpec = field(default_factory=TopologySpec)
    compression: CompressionSpec = field(default_factory=CompressionSpec)
    training: TrainConfig = field(default_factory=TrainConfig)
    run: RunSettings = field(default_factory=RunSettings)

    def _sections(self) -> Dict[str, Any]:
        return {
            "dataset": self.dataset,
            "network": self.network,
            "compression": self.compression,
            "training": self.training,
            "run": self.run,
        }

    # ------------------------------------------------------------------

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        """
        Parse experiment text.

        Raises:
            ExperimentConfigError: Syntax errors (with line numbers), unknown
                sections or keys, bad values and missing required fields
        """
        parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.MissingSectionHeaderError as e:
            raise ExperimentConfigError("missing section header", line=e.lineno) from e
        except configparser.ParsingError as e:
            line = e.errors[0][0] if e.errors else None
            raise ExperimentConfigError("syntax error", line=line) from e
        except configparser.Error as e:
            raise ExperimentConfigError(
                e.message.splitlines()[0], line=getattr(e, "lineno", None)
            ) from e

        values: Dict[str, Dict[str, Any]] = {}
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ExperimentConfigError("unknown section", section=section)
            values[section] = {}
            for key, raw in parser.items(section):
                parse = _SCHEMA[section].get(key)
                if parse is None:
                    raise ExperimentConfigError("unknown key", section=section, key=key)
                try:
                    values[section][key] = parse(raw)
                except (ValueError, ZeroDivisionError) as e:
                    raise ExperimentConfigError(
                        f"bad value {raw!r} ({e})", section=section, key=key
                    ) from e

        for section, keys in _REQUIRED.items():
            for key in keys:
                if key not in values.get(section, {}):
                    raise ExperimentConfigError("missing required field", section=section, key=key)

        try:
            training = TrainConfig(**values.get("training", {}))
        except ValueError as e:
            raise ExperimentConfigError(str(e), section="training") from e

        config = cls(
            dataset=DatasetSpec(**values.get("dataset", {})),
            network=TopologySpec(**values.get("network", {})),
            compression=CompressionSpec(**values.get("compression", {})),
            training=training,
            run=RunSettings(**values.get("run", {})),
        )
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ExperimentConfigError(f"config file {path} does not exist")
        config = cls.parse(path.read_text())
        logger.info(f"Loaded experiment {path} ({len(config.expand())} runs)")
        return config

    def to_text(self) -> str:
        """Serialize every field; parse(to_text()) == self."""
        parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
        parser.optionxform = str
        for name, section in self._sections().items():
            parser[name] = {
                key: _format(getattr(section, key))
                for key in _SCHEMA[name]
                if not (name == "compression" and key == "variants" and not section.variants)
            }
        buffer = io.StringIO()
        parser.write(buffer)
        return buffer.getvalue()

    # ------------------------------------------------------------------

    def _check(self, condition: bool, section: str, key: str, message: str):
        if not condition:
            raise ExperimentConfigError(message, section=section, key=key)

    def validate(self):
        data, net, comp, run = self.dataset, self.network, self.compression, self.run

        self._check(data.source in SOURCES, "dataset", "source", f"must be one of {SOURCES}")
        self._check(
            0.0 <= data.validation_fraction < 1.0,
            "dataset",
            "validation_fraction",
            "must lie in [0, 1)",
        )
        self._check(data.num_classes >= 2, "dataset", "num_classes", "must be >= 2")
        for key in ("train_size", "test_size"):
            size = getattr(data, key)
            self._check(size is None or size >= 1, "dataset", key, "must be positive")

        self._check(net.depth in DEPTHS, "network", "depth", f"must be one of {DEPTHS}")
        self._check(net.hidden >= 1, "network", "hidden", "must be positive")
        self._check(net.head in HEADS, "network", "head", f"must be one of {HEADS}")

        for mode in comp.modes:
            self._check(mode in MODES, "compression", "modes", f"unknown mode {mode!r}")
        for ratio in comp.ratios:
            self._check(0.0 < ratio <= 1.0, "compression", "ratios", "ratios must lie in (0, 1]")
        for U in comp.U:
            self._check(U >= 1, "compression", "U", "U must be >= 1")
        for G in comp.G:
            self._check(G in RECON_DEPTHS, "compression", "G", f"G must be one of {RECON_DEPTHS}")
        for label in comp.variants:
            try:
                U, G, _ = parse_variant_label(label)
            except ExperimentConfigError as e:
                raise ExperimentConfigError(str(e), section="compression", key="variants") from e
            self._check(U >= 1 and G in RECON_DEPTHS, "compression", "variants", f"bad {label}")
        self._check(comp.hops >= 0, "compression", "hops", "must be >= 0")
        self._check(
            "multihop" not in comp.modes or comp.hops >= 1,
            "compression",
            "hops",
            "the multihop mode needs hops >= 1",
        )
        self._check(comp.regime in REGIMES, "compression", "regime", f"must be one of {REGIMES}")
        self._check(
            comp.hash_mode is None or comp.hash_mode in HASH_MODES,
            "compression",
            "hash_mode",
            f"must be one of {HASH_MODES}",
        )
        self._check(comp.dual_k is None or comp.dual_k >= 1, "compression", "dual_k", "must be >= 1")

        self._check(len(set(run.seeds)) == len(run.seeds), "run", "seeds", "seeds must be unique")

    # ------------------------------------------------------------------

    def variants(self) -> List[Tuple[int, int, bool]]:
        """(U, G, dual) combinations of the compression grid."""
        comp = self.compression
        if comp.variants:
            return [parse_variant_label(label) for label in comp.variants]
        return [(U, G, dual) for U in comp.U for G in comp.G for dual in comp.dual]

    def _mode_variants(self, mode: str) -> List[Tuple[int, int, bool, int]]:
        if mode == "dense":
            return [(0, 0, False, 0)]
        if mode == "hashednets":
            return [(1, 0, False, 0)]
        if mode == "funhash-dual":
            grid = [(U, G, True, 0) for U, G, _ in self.variants()]
        elif mode == "multihop":
            grid = [(U, G, False, self.compression.hops) for U, G, dual in self.variants() if not dual]
        else:
            grid = [(U, G, dual, 0) for U, G, dual in self.variants()]
        return list(dict.fromkeys(grid))

    def expand(self) -> List[RunSpec]:
        """
        Every (mode, ratio, variant, seed) run, in file order.

        Dense runs follow the ratios too: they are the same-size baselines
        of the compressed runs.
        """
        runs = []
        for mode in self.compression.modes:
            normalized = "funhash" if mode == "funhash-dual" else mode
            for ratio in self.compression.ratios:
                for U, G, dual, hops in self._mode_variants(mode):
                    for seed in self.run.seeds:
                        runs.append(
                            RunSpec(
                                index=len(runs),
                                mode=normalized,
                                ratio=ratio,
                                U=U,
                                G=G,
                                dual=dual,
                                hops=hops,
                                seed=seed,
                                experiment=self,
                            )
                        )
        return runs
