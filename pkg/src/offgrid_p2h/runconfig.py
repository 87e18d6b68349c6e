"""Top-level run configuration loaded by the command-line tool."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from .config import PlantConfig, SimConfig, default_plant, from_dict, load_json, register_tuple_item, to_dict
from .costing import EconParams
from .errors import ConfigError
from .ingest import load_meteo_series
from .simulator import EmergencyScenario
from .sizing import SizingConfig
from .slf import SlfParams
from .socode import EmergencyEvent, SeverityTable


@dataclass(frozen=True)
class Paths:
    meteo: Optional[str] = None  # None -> bundled synthetic week
    severity_table: Optional[str] = None  # None -> bundled table
    output_dir: str = "out"


@dataclass(frozen=True)
class EmergencySection:
    horizon_s: float = 120.0
    scenario: EmergencyScenario = EmergencyScenario()
    events: Optional[tuple] = None  # None -> largest source and load loss at t = 10 s


@dataclass(frozen=True)
class SensitivityGrid:
    slf_steps_s: tuple = (5.0, 10.0, 15.0, 30.0, 60.0, 90.0)
    ramps_mw_s: tuple = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5)


register_tuple_item(EmergencySection, "events", EmergencyEvent)
register_tuple_item(SizingConfig, "events", EmergencyEvent)


@dataclass(frozen=True)
class RunConfig:
    paths: Paths = Paths()
    plant: PlantConfig = default_plant()
    econ: EconParams = EconParams()
    slf: SlfParams = default_plant().slf
    sim: SimConfig = SimConfig()
    sizing: SizingConfig = SizingConfig()
    emergency: EmergencySection = EmergencySection()
    sensitivity: SensitivityGrid = SensitivityGrid()
    seed: int = 0

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, seed=seed, sim=dataclasses.replace(self.sim, seed=seed))

    def meteo_path(self) -> Path:
        if self.paths.meteo is None:
            return Path(str(resources.files("offgrid_p2h").joinpath("data/sample_week.csv")))
        return Path(self.paths.meteo)

    def load_meteo(self):
        return load_meteo_series(self.meteo_path())

    def to_dict(self) -> dict:
        return to_dict(self)


def _resolve(path: Optional[str], base: Path) -> Optional[str]:
    if path is None:
        return None
    p = Path(path)
    return str(p if p.is_absolute() else (base / p))


def run_config_from_dict(data: dict, base_dir: Path | str = ".") -> RunConfig:
    """Validate a config dict. Relative paths resolve against ``base_dir``;
    input paths must exist. A top-level ``slf`` section is the SLF tuning
    and is copied into the plant."""
    base = Path(base_dir)
    cfg = from_dict(RunConfig, data)
    plant_slf = (data.get("plant") or {}).get("slf")
    if "slf" in data and plant_slf is not None and from_dict(SlfParams, plant_slf) != cfg.slf:
        raise ConfigError("plant.slf and slf disagree; give the SLF tuning once")
    slf = cfg.slf if "slf" in data or plant_slf is None else cfg.plant.slf
    paths = Paths(
        meteo=_resolve(cfg.paths.meteo, base),
        severity_table=_resolve(cfg.paths.severity_table, base),
        output_dir=cfg.paths.output_dir,
    )
    for name in ("meteo", "severity_table"):
        p = getattr(paths, name)
        if p is not None and not Path(p).is_file():
            raise ConfigError(f"{name} file not found", path=p)
    plant = dataclasses.replace(cfg.plant, slf=slf)
    if paths.severity_table is not None:
        SeverityTable.load(paths.severity_table)  # validates the rows
        plant = dataclasses.replace(plant, socode=dataclasses.replace(plant.socode, table_path=paths.severity_table))
    if cfg.sim.seed != cfg.seed and "seed" in data and "seed" not in (data.get("sim") or {}):
        cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, seed=cfg.seed))
    return dataclasses.replace(cfg, paths=paths, plant=plant, slf=slf)


def load_run_config(path) -> RunConfig:
    path = Path(path)
    return run_config_from_dict(load_json(path), path.parent)
