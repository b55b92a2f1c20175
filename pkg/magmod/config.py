"""Configuration models and loader for the magmod workbench."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from .groups import CongruenceSubgroup, GroupElement
from .scalars import DomainError


CONFIG_FILE_NAME = "magmod_config.yaml"
DEFAULT_CONFIG_PATH = Path.home() / ".magmod" / CONFIG_FILE_NAME
CATALOG_ENV_VAR = "MAGMOD_CATALOG"
PACKAGED_CATALOG = Path(__file__).with_name("catalog.yaml")


class ConfigError(RuntimeError):
    """Raised when the configuration file is invalid."""


class CatalogError(ConfigError):
    """Raised when a catalog file cannot be parsed."""


@dataclass
class PrecisionConfig:
    """Working precision and the escalation ladder used by reconstruction."""

    bits: int = 256
    ladder: List[int] = field(default_factory=lambda: [256, 384, 512, 768])


@dataclass
class ReconstructionConfig:
    max_denominator: int = 10**6
    tolerance_bits: Optional[int] = None


@dataclass
class CatalogConfig:
    path: Optional[Path] = None


@dataclass
class ComputeConfig:
    max_order: int = 4000
    workers: int = 1


@dataclass
class SlashConfig:
    """Sampling parameters of the numeric slash action."""

    height_margin: Fraction = Fraction(1, 2)
    terms: int = 12
    min_image_height: Fraction = Fraction(1, 20)


@dataclass
class ResidueConfig:
    points_per_bit: int = 4
    radius_cap: Fraction = Fraction(1, 16)


def _default_generators() -> Dict[str, List[List[int]]]:
    return {
        "SL2(Z)": [[0, 1, -1, 0], [1, 1, 0, 1]],
        "Gamma0(2)": [[1, 1, 0, 1], [1, 0, 2, 1]],
        "Gamma1(6)": [[1, 1, 0, 1], [-5, 1, -6, 1], [7, -3, 12, -5]],
        "Gamma0(8)": [[1, 1, 0, 1], [1, 0, -8, 1], [-3, 2, -8, 5], [-3, 1, -16, 5]],
        "Gamma(2)": [[1, 2, 0, 1], [1, 0, 2, 1]],
    }


@dataclass
class PeriodConfig:
    """Integration parameters and the fixed generator sets per group."""

    split_height: Fraction = Fraction(2)
    detour_radius: Fraction = Fraction(1, 32)
    panel_degree: int = 6
    generators: Dict[str, List[List[int]]] = field(default_factory=_default_generators)


@dataclass
class SearchConfig:
    smooth_number: int = 302400
    initial_constraints: int = 64
    stabilizations: int = 3
    max_constraints: int = 512
    verify_nmax: int = 500


@dataclass
class DatabaseConfig:
    """Database configuration."""

    path: Path = Path.home() / ".magmod" / "magmod.db"
    enabled: bool = True


@dataclass
class Config:
    """Root configuration model for magmod."""

    precision: PrecisionConfig = field(default_factory=PrecisionConfig)
    reconstruction: ReconstructionConfig = field(default_factory=ReconstructionConfig)
    catalog: CatalogConfig = field(default_factory=CatalogConfig)
    compute: ComputeConfig = field(default_factory=ComputeConfig)
    slash: SlashConfig = field(default_factory=SlashConfig)
    residues: ResidueConfig = field(default_factory=ResidueConfig)
    periods: PeriodConfig = field(default_factory=PeriodConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    database: DatabaseConfig = field(default_factory=DatabaseConfig)

    def catalog_path(self, override: Optional[Path] = None) -> Path:
        """Flag beats environment variable beats config file beats the packaged catalog."""

        if override is not None:
            return Path(override).expanduser()
        env_value = os.environ.get(CATALOG_ENV_VAR)
        if env_value:
            return Path(env_value).expanduser()
        if self.catalog.path is not None:
            return Path(self.catalog.path).expanduser()
        return PACKAGED_CATALOG


def _coerce_fraction(value: Any, key: str) -> Fraction:
    try:
        return Fraction(str(value))
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{key} must be a rational number, got {value!r}") from exc


def _coerce_int(value: Any, key: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{key} must be at least {minimum}, got {value}")
    return value


def _coerce_reconstruction(data: Dict[str, Any]) -> ReconstructionConfig:
    section = ReconstructionConfig(**data)
    tolerance = section.tolerance_bits
    return ReconstructionConfig(
        max_denominator=_coerce_int(section.max_denominator, "reconstruction.max_denominator"),
        tolerance_bits=None if tolerance is None else _coerce_int(tolerance, "reconstruction.tolerance_bits", 8),
    )


def _coerce_compute(data: Dict[str, Any]) -> ComputeConfig:
    section = ComputeConfig(**data)
    return ComputeConfig(
        max_order=_coerce_int(section.max_order, "compute.max_order"),
        workers=_coerce_int(section.workers, "compute.workers"),
    )


def _coerce_search(data: Dict[str, Any]) -> SearchConfig:
    section = SearchConfig(**data)
    values = {name: _coerce_int(getattr(section, name), f"search.{name}")
              for name in ("smooth_number", "initial_constraints", "stabilizations", "max_constraints", "verify_nmax")}
    if values["max_constraints"] < values["initial_constraints"]:
        raise ConfigError("search.max_constraints must not be below search.initial_constraints")
    return SearchConfig(**values)


def _coerce_precision(data: Dict[str, Any]) -> PrecisionConfig:
    section = PrecisionConfig(**data)
    if int(section.bits) < 64:
        raise ConfigError("precision.bits must be at least 64")
    ladder = [int(bits) for bits in section.ladder]
    if not ladder or any(b <= a for a, b in zip(ladder, ladder[1:])) or ladder[0] < 64:
        raise ConfigError("precision.ladder must be strictly increasing and start at 64 bits or more")
    return PrecisionConfig(bits=int(section.bits), ladder=ladder)


def _coerce_generators(data: Dict[str, Any]) -> Dict[str, List[List[int]]]:
    generators = _default_generators()
    for tag, matrices in (data or {}).items():
        try:
            group = CongruenceSubgroup.parse(tag)
            elements = [GroupElement.from_list(m) for m in matrices]
        except DomainError as exc:
            raise ConfigError(f"periods.generators[{tag!r}]: {exc}") from exc
        for element in elements:
            if not group.contains(element):
                raise ConfigError(f"generator {element} is not an element of {group.tag}")
        generators[group.tag] = [[int(x) for x in m] for m in matrices]
    return generators


def _coerce_periods(data: Dict[str, Any]) -> PeriodConfig:
    data = dict(data)
    generators = _coerce_generators(data.pop("generators", None))
    section = PeriodConfig(**data)
    return PeriodConfig(
        split_height=_coerce_fraction(section.split_height, "periods.split_height"),
        detour_radius=_coerce_fraction(section.detour_radius, "periods.detour_radius"),
        panel_degree=int(section.panel_degree),
        generators=generators,
    )


def _build_config(data: Dict[str, Any]) -> Config:
    try:
        slash = SlashConfig(**(data.get("slash") or {}))
        residues = ResidueConfig(**(data.get("residues") or {}))
        catalog_data = data.get("catalog") or {}
        database_data = dict(data.get("database") or {})
        if "path" in database_data:
            database_data["path"] = Path(database_data["path"]).expanduser()
        return Config(
            precision=_coerce_precision(data.get("precision") or {}),
            reconstruction=_coerce_reconstruction(data.get("reconstruction") or {}),
            catalog=CatalogConfig(
                path=Path(catalog_data["path"]).expanduser() if catalog_data.get("path") else None
            ),
            compute=_coerce_compute(data.get("compute") or {}),
            slash=SlashConfig(
                height_margin=_coerce_fraction(slash.height_margin, "slash.height_margin"),
                terms=_coerce_int(slash.terms, "slash.terms"),
                min_image_height=_coerce_fraction(slash.min_image_height, "slash.min_image_height"),
            ),
            residues=ResidueConfig(
                points_per_bit=_coerce_int(residues.points_per_bit, "residues.points_per_bit"),
                radius_cap=_coerce_fraction(residues.radius_cap, "residues.radius_cap"),
            ),
            periods=_coerce_periods(data.get("periods") or {}),
            search=_coerce_search(data.get("search") or {}),
            database=DatabaseConfig(**database_data),
        )
    except TypeError as exc:
        raise ConfigError(f"Unknown configuration key: {exc}") from exc


def load_config(config_path: Optional[Path] = None) -> Config:
    """Load configuration from disk or provide defaults.

    Parameters
    ----------
    config_path:
        Optional explicit path to a configuration file. When not provided the
        function looks for ``~/.magmod/magmod_config.yaml`` and writes the
        default configuration there if it does not exist yet. An explicit path
        that does not exist is an error.
    """

    if config_path is None:
        resolved_path = DEFAULT_CONFIG_PATH
        if not resolved_path.exists():
            resolved_path.parent.mkdir(parents=True, exist_ok=True)
            resolved_path.write_text(_default_config_text(), encoding="utf-8")
    else:
        resolved_path = Path(config_path).expanduser()
        if not resolved_path.exists():
            raise ConfigError(f"Configuration file {resolved_path} does not exist")

    with resolved_path.open("r", encoding="utf-8") as handle:
        try:
            data = yaml.safe_load(handle)
        except yaml.YAMLError as exc:
            raise ConfigError(f"Configuration file {resolved_path} is malformed: {exc}") from exc

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("Configuration file is empty or malformed")
    return _build_config(data)


def default_config() -> Config:
    """The configuration that an empty file produces."""

    return _build_config({})


def _default_config_text() -> str:
    """Provide the default configuration shipped with the repository."""

    return """
# magmod default configuration
# Generated automatically if no configuration exists.

precision:
  bits: 256
  ladder: [256, 384, 512, 768]

reconstruction:
  max_denominator: 1000000
  tolerance_bits: null      # null means half the working precision

catalog:
  path: null                # null means the packaged catalog.yaml

compute:
  max_order: 4000
  workers: 1

slash:
  height_margin: "1/2"
  terms: 12
  min_image_height: "1/20"

residues:
  points_per_bit: 4
  radius_cap: "1/16"

periods:
  split_height: 2
  detour_radius: "1/32"
  panel_degree: 6            # mpmath Gauss-Legendre degree, 3*2^(degree-1) nodes
  generators:
    SL2(Z): [[0, 1, -1, 0], [1, 1, 0, 1]]
    Gamma0(2): [[1, 1, 0, 1], [1, 0, 2, 1]]
    Gamma1(6): [[1, 1, 0, 1], [-5, 1, -6, 1], [7, -3, 12, -5]]
    Gamma0(8): [[1, 1, 0, 1], [1, 0, -8, 1], [-3, 2, -8, 5], [-3, 1, -16, 5]]
    Gamma(2): [[1, 2, 0, 1], [1, 0, 2, 1]]

search:
  smooth_number: 302400
  initial_constraints: 64
  stabilizations: 3
  max_constraints: 512
  verify_nmax: 500

database:
  path: "~/.magmod/magmod.db"
  enabled: true
"""
