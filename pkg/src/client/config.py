"""
The configuration module: harness settings from TOML and experiment configs from JSON.
"""

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import orjson
import tomli

from src.client.errors import ConfigError
from src.utils.noise import noise_levels, resolve_levels
from src.utils.proximal import SolverConfig

ROOT = Path(__file__).resolve().parents[2]

# keys that are valid without having a default
_OPTIONAL_KEYS = {"solver": {"gamma"}, "noise": {"rate"}}
# JSON keys whose field name is not the plain hyphen-to-underscore spelling
RENAMED = {"lambda": "lam", "lambda-l1": "lam_l1"}


class Config:
    """
    The harness settings, read once from ``config/config.toml``.
    """

    _path: Path = ROOT / "config" / "config.toml"
    _config: Optional[dict] = None

    @classmethod
    def _load_config(cls) -> dict:
        """
        Load the configuration file.
        This is an internal method and should not be called directly.

        :raises TOMLDecodeError: Raised when the config is invalid.
        :raises FileNotFoundError: Raised when the file is not found.

        :return: The configuration file.
        :rtype: dict
        """
        with open(cls._path, "rb") as f:
            return tomli.load(f)

    @classmethod
    def data(cls) -> dict:
        if cls._config is None:
            cls._config = cls._load_config()
        return cls._config

    @classmethod
    def get(cls, key: str, default: Any = None) -> Any:
        """
        Get a key from the configuration file.

        :param key: The key to get.
        :type key: str
        :param default: The default value if the key is not found.
        :type default: Any, optional

        :return: The value of the key.
        :rtype: Any
        """
        return cls.data().get(key, default)

    @classmethod
    def reload(cls) -> None:
        """
        Reload the configuration file.
        """
        cls._config = cls._load_config()

    def __getitem__(self, key: str) -> Any:
        return self.data()[key]


def _pick(name: str, given: Any, defaults: Mapping[str, Any]) -> Dict[str, Any]:
    """
    Overlay a user section on its defaults, rejecting keys the defaults do not know.

    :param name: The section name, used in error messages.
    :type name: str
    :param given: The user section (may be ``None``).
    :type given: Any
    :param defaults: The documented defaults of the section.
    :type defaults: Mapping[str, Any]

    :raises ConfigError: Raised on a non-object section or an unknown key.

    :return: The merged section.
    :rtype: Dict[str, Any]
    """
    if given is None:
        given = {}
    if not isinstance(given, Mapping):
        raise ConfigError(f"Section '{name}' must be an object.")
    known = set(defaults) | _OPTIONAL_KEYS.get(name, set())
    unknown = sorted(set(given) - known)
    if unknown:
        raise ConfigError(f"Unknown key(s) in '{name}': {', '.join(unknown)}.")
    merged = dict(defaults)
    merged.update(given)
    return merged


def _number(name: str, value: Any, kind: type = float) -> Any:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{name}' must be a number, got {value!r}.")
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(f"'{name}' must be an integer, got {value!r}.")
        return int(value)
    return float(value)


@dataclass(frozen=True)
class ProblemConfig:
    """
    Shapes of the synthetic benchmark and the planted-code statistics.
    """

    H: int = 16
    W: int = 16
    C: int = 1
    D: int = 4
    k: int = 3
    density: float = 0.05
    magnitude: Tuple[float, float] = (0.5, 1.5)

    def __post_init__(self) -> None:
        for name in ("H", "W", "C", "D", "k"):
            if getattr(self, name) < 1:
                raise ConfigError(f"problem.{name} must be >= 1.")
        if self.k % 2 == 0:
            raise ConfigError(f"problem.k must be odd, got {self.k}.")
        if not 0.0 <= self.density <= 1.0:
            raise ConfigError("problem.density must lie in [0, 1].")
        low, high = self.magnitude
        if not 0.0 <= low <= high:
            raise ConfigError("problem.magnitude must be [low, high] with 0 <= low <= high.")


@dataclass(frozen=True)
class InfluenceConfig:
    ts: Tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    epsilon: float = 0.01
    beta: float = 0.5
    scale: float = 0.05

    def __post_init__(self) -> None:
        if not self.ts or any(not 0.0 < t <= 0.1 for t in self.ts):
            raise ConfigError("influence.ts must be non-empty values in (0, 0.1].")
        if self.epsilon <= 0:
            raise ConfigError("influence.epsilon must be > 0.")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError("influence.beta must lie in [0, 1].")
        if self.scale < 0:
            raise ConfigError("influence.scale must be >= 0.")


@dataclass(frozen=True)
class TrainingConfig:
    """
    The dictionary learns at ``lr * lr_dictionary_scale``, so ``lr = 0`` freezes every parameter.
    """

    samples: int = 64
    eval_samples: int = 64
    classes: int = 2
    epochs: int = 50
    lr: float = 0.5
    lr_dictionary_scale: float = 0.02
    pretrain_epochs: int = 0
    learn_beta: bool = False
    separation: float = 0.35
    noise_std: float = 0.08
    init: str = "identity"
    H: int = 8
    W: int = 8
    steps: int = 3
    lam: float = 0.02

    def __post_init__(self) -> None:
        if self.classes < 2:
            raise ConfigError("training.classes must be >= 2.")
        if self.samples < self.classes or self.eval_samples < 1:
            raise ConfigError("training needs at least one sample per class.")
        if self.epochs < 0 or self.pretrain_epochs < 0:
            raise ConfigError("training epochs must be >= 0.")
        if self.lr < 0 or self.lr_dictionary_scale < 0:
            raise ConfigError("training learning rates must be >= 0.")
        if self.noise_std < 0:
            raise ConfigError("training.noise-std must be >= 0.")
        if self.init not in ("identity", "random"):
            raise ConfigError("training.init must be 'identity' or 'random'.")
        if self.H < 1 or self.W < 1 or self.steps < 1 or self.lam < 0:
            raise ConfigError("training shape, steps and lambda must be positive.")

    @property
    def lr_dictionary(self) -> float:
        return self.lr * self.lr_dictionary_scale


@dataclass(frozen=True)
class AttackConfig:
    budgets: Tuple[float, ...] = (0.0, 2 / 255, 4 / 255, 8 / 255)
    runs: int = 10

    def __post_init__(self) -> None:
        if not self.budgets or any(b < 0 for b in self.budgets):
            raise ConfigError("attack.budgets must be non-empty and >= 0.")
        if self.runs < 1:
            raise ConfigError("attack.runs must be >= 1.")


@dataclass(frozen=True)
class SweepConfig:
    lambdas: Tuple[float, ...] = (0.0, 0.05, 0.1)

    def __post_init__(self) -> None:
        if not self.lambdas or any(v < 0 for v in self.lambdas):
            raise ConfigError("sweep.lambdas must be non-empty and >= 0.")
        if list(self.lambdas) != sorted(self.lambdas):
            raise ConfigError("sweep.lambdas must be sorted ascending.")


@dataclass(frozen=True)
class DenoiseConfig:
    """
    The l1 fidelity gets its own sparsity weight ``lam_l1``. Vanilla solves keep the solver
    ``lambda`` and an elastic solve blends the two by ``beta``.
    """

    lam_l1: float = 0.4

    def __post_init__(self) -> None:
        if not self.lam_l1 >= 0:
            raise ConfigError("denoise.lambda-l1 must be >= 0.")

    def lam_for(self, lam: float, beta: float) -> float:
        return beta * lam + (1.0 - beta) * self.lam_l1


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One fully validated experiment. The seed determines every random draw.
    """

    problem: ProblemConfig
    solver: SolverConfig
    levels: Tuple[float, ...]
    trials: int
    seed: int
    influence: InfluenceConfig = field(default_factory=InfluenceConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    denoise: DenoiseConfig = field(default_factory=DenoiseConfig)
    source: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    SECTIONS = ("problem", "solver", "noise", "influence", "training", "attack", "sweep", "denoise")

    @classmethod
    def from_mapping(
        cls, raw: Mapping[str, Any], defaults: Optional[Mapping[str, Any]] = None
    ) -> "ExperimentConfig":
        """
        Build a config from a decoded JSON document.

        :param raw: The decoded document.
        :type raw: Mapping[str, Any]
        :param defaults: The ``[defaults]`` table; read from ``config.toml`` if omitted.
        :type defaults: Mapping[str, Any], optional

        :raises ConfigError: Raised on unknown keys or invalid values.

        :return: The validated config.
        :rtype: ExperimentConfig
        """
        if not isinstance(raw, Mapping):
            raise ConfigError("The experiment config must be a JSON object.")
        defaults = defaults if defaults is not None else Config.get("defaults", {})
        unknown = sorted(set(raw) - set(cls.SECTIONS) - {"trials", "seed"})
        if unknown:
            raise ConfigError(f"Unknown top-level key(s): {', '.join(unknown)}.")

        merged: Dict[str, Any] = {
            name: _pick(name, raw.get(name), defaults.get(name, {})) for name in cls.SECTIONS
        }
        merged["trials"] = raw.get("trials", defaults.get("trials", 100))
        merged["seed"] = raw.get("seed", defaults.get("seed", 0))

        try:
            problem = merged["problem"]
            solver = merged["solver"]
            noise = merged["noise"]
            presets = noise_levels(Config.get("noise", {}).get("presets", {}))
            if noise.get("rate") is not None:
                levels = resolve_levels([noise["rate"]], presets)
            else:
                levels = resolve_levels(noise.get("levels", [0.0]), presets)
            config = cls(
                problem=ProblemConfig(
                    H=_number("problem.H", problem["H"], int),
                    W=_number("problem.W", problem["W"], int),
                    C=_number("problem.C", problem["C"], int),
                    D=_number("problem.D", problem["D"], int),
                    k=_number("problem.k", problem["k"], int),
                    density=_number("problem.density", problem["density"]),
                    magnitude=tuple(_number("problem.magnitude", v) for v in problem["magnitude"]),
                ),
                solver=SolverConfig(
                    lam=_number("solver.lambda", solver["lambda"]),
                    beta=_number("solver.beta", solver["beta"]),
                    gamma=None if solver.get("gamma") is None else _number("solver.gamma", solver["gamma"]),
                    steps=_number("solver.steps", solver["steps"], int),
                    epsilon=_number("solver.epsilon", solver["epsilon"]),
                    step_rule=str(solver["step-rule"]),
                    power_iters=_number("solver.power-iters", solver["power-iters"], int),
                ),
                levels=levels,
                trials=_number("trials", merged["trials"], int),
                seed=_number("seed", merged["seed"], int),
                influence=_build(InfluenceConfig, merged["influence"]),
                training=_build(TrainingConfig, merged["training"]),
                attack=_build(AttackConfig, merged["attack"]),
                sweep=_build(SweepConfig, merged["sweep"]),
                denoise=_build(DenoiseConfig, merged["denoise"]),
                source=merged,
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"Malformed experiment config: {e}") from e
        if config.trials < 1:
            raise ConfigError("trials must be >= 1.")
        return config

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ExperimentConfig":
        """
        Read and validate a JSON experiment config.

        :raises ConfigError: Raised when the file is missing, malformed or invalid.
        """
        try:
            raw = orjson.loads(Path(path).read_bytes())
        except FileNotFoundError as e:
            raise ConfigError(f"Config file not found: {path}") from e
        except orjson.JSONDecodeError as e:
            raise ConfigError(f"Config file is not valid JSON: {e}") from e
        return cls.from_mapping(raw)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        source = dict(self.source)
        source["seed"] = seed
        return replace(self, seed=seed, source=source)

    def canonical(self) -> Dict[str, Any]:
        """
        The fully resolved config as plain data, suitable for canonical JSON.
        """
        data = {
            "problem": asdict(self.problem),
            "solver": asdict(self.solver),
            "levels": list(self.levels),
            "trials": self.trials,
            "seed": self.seed,
            "influence": asdict(self.influence),
            "training": asdict(self.training),
            "attack": asdict(self.attack),
            "sweep": asdict(self.sweep),
            "denoise": asdict(self.denoise),
        }
        data["problem"]["magnitude"] = list(self.problem.magnitude)
        return data


def _build(kind: type, section: Mapping[str, Any]):
    """
    Instantiate one of the flat section dataclasses from a hyphenated JSON section.
    """
    fields = {}
    for key, value in section.items():
        name = RENAMED.get(key, key.replace("-", "_"))
        default = getattr(kind, name, None)
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"'{key}' must be a boolean.")
        elif isinstance(default, int):
            value = _number(key, value, int)
        elif isinstance(default, float):
            value = _number(key, value)
        elif isinstance(default, tuple):
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"'{key}' must be a list.")
            value = tuple(_number(key, v) for v in value)
        fields[name] = value
    return kind(**fields)
