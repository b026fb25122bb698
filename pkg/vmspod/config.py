"""
Run configuration, presets and logging setup for vmspod.
"""

import configparser
import io
import logging
import math
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

from .errors import ConfigError, InvalidArgumentError
from .fem import SUPPORTED_DEGREES
from .pod import InnerProduct
from .problem import TIME_GRID_TOL, ProblemSpec, exact_solution_by_name
from .rom import ModelKind
from .utils import atomic_write_text, parse_float_list, parse_int_list


OUTPUT_DIR_ENV = 'VMSPOD_OUTPUT_DIR'

CONFIG_FILENAME = 'config.ini'

SOLUTIONS = ('tanh-front', 'zero')

# b = (cos π/3, sin π/3)
DEFAULT_CONVECTION = (math.cos(math.pi / 3), math.sin(math.pi / 3))


@dataclass
class RunConfig:
    """Everything that determines a run; saved next to its artifacts."""

    # [problem]
    epsilon: float = 1e-4
    b: Tuple[float, float] = DEFAULT_CONVECTION
    g: float = 1.0
    T: float = 1.0
    solution: str = 'tanh-front'
    width: float = 0.04

    # [discretization]
    nx: int = 50
    degree: int = 2
    dt: float = 2e-3
    stride: int = 1
    quad_refine: int = 1

    # [pod]
    inner_product: str = 'h1'
    rank_tol: float = 1e-12
    quotients: bool = True

    # [rom]
    r: int = 20
    R: int = 10
    alpha: str = 'auto'
    model: str = 'vms-pod'

    # [experiment]
    table1_r: Tuple[int, ...] = (10, 20, 30, 40)
    table3_r: Tuple[int, ...] = (10, 20)
    e3_alpha: float = 0.0
    e3_r: int = 0
    e3_R: Tuple[int, ...] = (1, 3, 5, 7, 9, 11, 13)
    eps_values: Tuple[float, ...] = (1e-2, 1e-4, 1e-6)
    convergence_nx: Tuple[int, ...] = (8, 16, 32)
    convergence_width: float = 0.2
    convergence_T: float = 5e-3
    convergence_dt: float = 5e-6
    concurrency: int = 2
    seed: int = 0

    # [output]
    output_dir: Path = field(default_factory=lambda: Path('vmspod-runs') / 'desk')

    def __post_init__(self):
        """Normalise types coming from INI text or CLI flags."""
        if not isinstance(self.output_dir, Path):
            self.output_dir = Path(self.output_dir)
        self.b = tuple(float(v) for v in self.b)
        self.alpha = str(self.alpha).strip().lower()
        for name in ('table1_r', 'table3_r', 'e3_R', 'convergence_nx'):
            setattr(self, name, tuple(int(v) for v in getattr(self, name)))
        self.eps_values = tuple(float(v) for v in self.eps_values)

    @property
    def num_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def num_snapshots(self) -> int:
        """N, the index of the last snapshot instance."""
        return self.num_steps // self.stride

    @property
    def snapshot_dt(self) -> float:
        return self.dt * self.stride

    @property
    def h(self) -> float:
        return 1.0 / self.nx

    @property
    def alpha_value(self) -> Optional[float]:
        """Explicit artificial viscosity, or None when it is selected automatically."""
        return None if self.alpha == 'auto' else float(self.alpha)

    @property
    def e3_alpha_value(self) -> Optional[float]:
        """Fixed viscosity of the e3 study, or None to pick one that makes e3 dominate."""
        return self.e3_alpha or None

    @property
    def inner_product_kind(self) -> InnerProduct:
        return InnerProduct.parse(self.inner_product)

    @property
    def model_kind(self) -> ModelKind:
        return ModelKind.parse(self.model)

    def problem(self, epsilon: Optional[float] = None) -> ProblemSpec:
        """ProblemSpec described by this configuration."""
        return ProblemSpec(
            epsilon=self.epsilon if epsilon is None else epsilon,
            b=self.b,
            g=self.g,
            T=self.T,
            dt=self.dt,
            exact=exact_solution_by_name(self.solution, width=self.width),
        )

    def validate(self) -> 'RunConfig':
        """
        Check every field.

        Returns:
            self, so calls can be chained

        Raises:
            ConfigError: naming the first offending field
        """
        if not self.epsilon >= 0:
            raise ConfigError('epsilon', f"must be non-negative, got {self.epsilon}")
        if len(self.b) != 2 or not all(math.isfinite(v) for v in self.b):
            raise ConfigError('b', f"must be two finite numbers, got {self.b}")
        if not self.g >= 0:
            raise ConfigError('g', f"must be non-negative, got {self.g}")
        if self.solution not in SOLUTIONS:
            raise ConfigError('solution', f"must be one of {', '.join(SOLUTIONS)}, got {self.solution!r}")
        for name in ('T', 'dt', 'width', 'rank_tol', 'convergence_width',
                     'convergence_T', 'convergence_dt'):
            value = getattr(self, name)
            if not value > 0:
                raise ConfigError(name, f"must be positive, got {value}")
        if abs(self.num_steps * self.dt - self.T) > TIME_GRID_TOL or self.num_steps < 1:
            raise ConfigError('dt', f"dt={self.dt} does not divide T={self.T} within {TIME_GRID_TOL}")
        conv_steps = int(round(self.convergence_T / self.convergence_dt))
        if conv_steps < 1 or abs(conv_steps * self.convergence_dt - self.convergence_T) > TIME_GRID_TOL:
            raise ConfigError('convergence_dt', f"does not divide convergence_T={self.convergence_T}")

        if self.nx < 2:
            raise ConfigError('nx', f"must be at least 2, got {self.nx}")
        if self.degree not in SUPPORTED_DEGREES:
            raise ConfigError('degree', f"must be 1 or 2, got {self.degree}")
        if self.stride < 1 or self.num_steps % self.stride:
            raise ConfigError('stride', f"must divide the step count {self.num_steps}, got {self.stride}")
        if self.quad_refine < 1:
            raise ConfigError('quad_refine', f"must be at least 1, got {self.quad_refine}")

        try:
            InnerProduct.parse(self.inner_product)
        except InvalidArgumentError as e:
            raise ConfigError('inner_product', str(e))
        if self.rank_tol >= 1:
            raise ConfigError('rank_tol', f"must be below 1, got {self.rank_tol}")

        if self.r < 1:
            raise ConfigError('r', f"must be at least 1, got {self.r}")
        if not 0 <= self.R <= self.r:
            raise ConfigError('R', f"must lie in [0, r={self.r}], got {self.R}")
        if self.alpha == 'auto':
            if self.R >= self.r:
                raise ConfigError('R', f"automatic alpha needs R < r, got R={self.R}, r={self.r}")
        else:
            try:
                value = float(self.alpha)
            except ValueError:
                raise ConfigError('alpha', f"must be 'auto' or a number, got {self.alpha!r}")
            if not (value >= 0 and math.isfinite(value)):
                raise ConfigError('alpha', f"must be non-negative, got {self.alpha}")
        try:
            ModelKind.parse(self.model)
        except InvalidArgumentError as e:
            raise ConfigError('model', str(e))

        for name in ('table1_r', 'table3_r', 'e3_R', 'eps_values', 'convergence_nx'):
            if not getattr(self, name):
                raise ConfigError(name, "must list at least one value")
        if min(self.table1_r) < 1 or min(self.table3_r) < 1:
            raise ConfigError('table1_r' if min(self.table1_r) < 1 else 'table3_r', "mode counts must be positive")
        if min(self.e3_R) < 0:
            raise ConfigError('e3_R', "coarse mode counts must be non-negative")
        if min(self.eps_values) < 0:
            raise ConfigError('eps_values', "diffusion coefficients must be non-negative")
        if min(self.convergence_nx) < 2:
            raise ConfigError('convergence_nx', "every mesh needs nx >= 2")
        if not (self.e3_alpha >= 0 and math.isfinite(self.e3_alpha)):
            raise ConfigError('e3_alpha', f"must be non-negative (0 selects it automatically), got {self.e3_alpha}")
        if self.e3_r < 0:
            raise ConfigError('e3_r', f"must be non-negative (0 picks min(60, d-5)), got {self.e3_r}")
        if self.concurrency < 1:
            raise ConfigError('concurrency', f"must be at least 1, got {self.concurrency}")
        return self

    @classmethod
    def preset(cls, name: str, **overrides) -> 'RunConfig':
        """Configuration of a named preset, with field overrides."""
        try:
            values = dict(PRESETS[name])
        except KeyError:
            raise ConfigError('preset', f"unknown preset {name!r} (choose from {', '.join(PRESETS)})")
        values.update(overrides)
        return cls(**values)

    def override(self, **values: Any) -> 'RunConfig':
        """Copy with the given fields replaced; None values are ignored."""
        return replace(self, **{k: v for k, v in values.items() if v is not None})

    @classmethod
    def load(cls, config_path: Path) -> 'RunConfig':
        """Load configuration from an INI file."""
        parser = configparser.ConfigParser()
        parser.optionxform = str
        if not parser.read(config_path):
            raise FileNotFoundError(f"Config file not found: {config_path}")

        known = {f.name for f in fields(cls)}
        values: Dict[str, Any] = {}
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigError(section, f"unknown section in {config_path}")
            for key, raw in parser.items(section):
                if key not in known or key not in SECTIONS[section]:
                    raise ConfigError(key, f"unknown key in section [{section}]")
                try:
                    values[key] = _PARSERS.get(key, _parse_scalar(key))(raw.strip())
                except ValueError as e:
                    raise ConfigError(key, f"cannot parse {raw!r}: {e}")
        return cls(**values)

    def save(self, config_path: Path) -> None:
        """Save configuration to an INI file."""
        parser = configparser.ConfigParser()
        parser.optionxform = str
        for section, names in SECTIONS.items():
            parser[section] = {name: _format_value(getattr(self, name)) for name in names}
        buffer = io.StringIO()
        parser.write(buffer)
        atomic_write_text(config_path, buffer.getvalue())

    def get_paths(self) -> Dict[str, Path]:
        """Get all run paths."""
        root = self.output_dir
        return {
            'root': root,
            'config': root / CONFIG_FILENAME,
            'snapshots': root / 'snapshots',
            'basis': root / 'basis',
            'rom': root / 'rom',
            'tables': root / 'tables',
            'report': root / 'rom' / 'report.csv',
            'log': root / 'vmspod.log',
        }

    def create_directories(self) -> None:
        """Create all necessary run directories."""
        paths = self.get_paths()
        paths['root'].mkdir(parents=True, exist_ok=True)
        for name in ('snapshots', 'basis', 'rom', 'tables'):
            paths[name].mkdir(exist_ok=True)


SECTIONS: Dict[str, Tuple[str, ...]] = {
    'problem': ('epsilon', 'b', 'g', 'T', 'solution', 'width'),
    'discretization': ('nx', 'degree', 'dt', 'stride', 'quad_refine'),
    'pod': ('inner_product', 'rank_tol', 'quotients'),
    'rom': ('r', 'R', 'alpha', 'model'),
    'experiment': (
        'table1_r', 'table3_r', 'e3_alpha', 'e3_r', 'e3_R', 'eps_values',
        'convergence_nx', 'convergence_width', 'convergence_T', 'convergence_dt',
        'concurrency', 'seed',
    ),
    'output': ('output_dir',),
}

_PARSERS: Dict[str, Callable[[str], Any]] = {
    'b': lambda text: tuple(parse_float_list(text)),
    'table1_r': lambda text: tuple(parse_int_list(text)),
    'table3_r': lambda text: tuple(parse_int_list(text)),
    'e3_R': lambda text: tuple(parse_int_list(text)),
    'convergence_nx': lambda text: tuple(parse_int_list(text)),
    'eps_values': lambda text: tuple(parse_float_list(text)),
    'output_dir': Path,
}


def _parse_bool(text: str) -> bool:
    try:
        return configparser.ConfigParser.BOOLEAN_STATES[text.lower()]
    except KeyError:
        raise ValueError(f"not a boolean: {text!r}")


def _parse_scalar(name: str) -> Callable[[str], Any]:
    default = _DEFAULTS[name]
    if isinstance(default, bool):
        return _parse_bool
    if isinstance(default, int):
        return int
    if isinstance(default, float):
        return float
    return str


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, tuple):
        return ', '.join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


_DEFAULTS: Dict[str, Any] = {f.name: getattr(RunConfig(), f.name) for f in fields(RunConfig)}

PRESETS: Dict[str, Dict[str, Any]] = {
    'desk': {},
    'paper': {
        'nx': 100,
        'dt': 1e-4,
        'stride': 10,
        'r': 40,
        'R': 20,
        'table1_r': (20, 40, 60, 80),
        'table3_r': (20, 40, 60),
        'e3_alpha': 5e-3,
        'e3_r': 100,
        'e3_R': (1, 4, 7, 10, 13),
        'eps_values': (1e-2, 1e-4, 1e-6, 1e-8),
        'output_dir': Path('vmspod-runs') / 'paper',
    },
}


def resolve_output_dir(flag: Optional[Path], config: RunConfig) -> Path:
    """Output directory by precedence: flag, then VMSPOD_OUTPUT_DIR, then config."""
    if flag is not None:
        return Path(flag)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    return config.output_dir


def setup_logging(config: RunConfig, verbose: bool = False) -> logging.Logger:
    """Configure logging for the run."""
    log_level = logging.DEBUG if verbose else logging.INFO

    logger = logging.getLogger('vmspod')
    logger.setLevel(logging.DEBUG)

    for handler in logger.handlers:
        handler.close()
    logger.handlers = []

    console = logging.StreamHandler()
    console.setLevel(log_level)
    console.setFormatter(logging.Formatter('%(levelname)s: %(message)s'))
    logger.addHandler(console)

    log_path = config.get_paths()['log']
    log_path.parent.mkdir(parents=True, exist_ok=True)
    file_handler = logging.FileHandler(log_path)
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter(
        '%(asctime)s [%(levelname)s] %(name)s: %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    ))
    logger.addHandler(file_handler)

    return logger


def init_run(config: RunConfig) -> RunConfig:
    """Validate, create the run directories and save the effective configuration."""
    config.validate()
    config.create_directories()
    config.save(config.get_paths()['config'])
    return config


def load_run(output_dir: Path) -> RunConfig:
    """Load the configuration of an existing run."""
    config_path = Path(output_dir) / CONFIG_FILENAME
    if not config_path.exists():
        raise FileNotFoundError(
            f"No run found in {output_dir}. "
            f"Run 'dns' command first to initialize."
        )
    config = RunConfig.load(config_path)
    config.output_dir = Path(output_dir)
    return config
