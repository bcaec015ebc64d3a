"""Run configuration: typed key=value files with units in the key names.

Unit bugs are the dominant failure mode for this kind of physics, so every
dimensional key carries its unit (field_kv_per_cm_x, dt_fs, k_max_per_nm).
Defaults are the baseline operating point: T = 300 K, eps_F = 0.15 eV,
E_x = 3 kV/cm, 120x120 grid over [-3.8, 3.8]/nm, dt = 2.5 fs, 5 ps total,
sampled-partner e-e with one partner, alpha = 1.1.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

EE_MODES = ("off", "fullsum", "sampled")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    temperature_K: float = 300.0
    fermi_level_eV: float = 0.15
    field_kv_per_cm_x: float = 3.0
    field_kv_per_cm_y: float = 0.0
    k_max_per_nm: float = 3.8
    n_k: int = 120
    dt_fs: float = 2.5
    t_max_ps: float = 5.0
    n_particles_target: int = 100_000
    ee_mode: str = "sampled"
    n_partner_samples: int = 1
    m_beta: int = 10
    alpha_bound: float = 1.1
    kappa_dielectric: float = 1.0
    ee_calibration: float = 1.0
    seed: int = 1
    record_every: int = 1
    snapshot_times_ps: tuple[float, ...] = ()
    rebase_threshold_cells: float = 1.0
    pauli_disabled: bool = False
    eph_disabled: bool = False

    def __post_init__(self) -> None:
        if self.temperature_K <= 0:
            raise ConfigError("temperature_K must be positive")
        if self.fermi_level_eV <= 0:
            raise ConfigError("fermi_level_eV must be positive")
        if self.k_max_per_nm <= 0:
            raise ConfigError("k_max_per_nm must be positive")
        if self.n_k < 2 or self.n_k % 2 != 0:
            raise ConfigError("n_k must be even and >= 2")
        if self.dt_fs <= 0:
            raise ConfigError("dt_fs must be positive")
        if self.t_max_ps < self.dt_fs * 1e-3:
            raise ConfigError("t_max_ps must cover at least one step")
        if self.n_particles_target < 1:
            raise ConfigError("n_particles_target must be >= 1")
        if self.ee_mode not in EE_MODES:
            raise ConfigError(f"ee_mode must be one of {EE_MODES}")
        if self.n_partner_samples < 1:
            raise ConfigError("n_partner_samples must be >= 1")
        if self.m_beta < 1:
            raise ConfigError("m_beta must be >= 1")
        if self.alpha_bound <= 1.0:
            raise ConfigError("alpha_bound must exceed 1")
        if self.kappa_dielectric <= 0:
            raise ConfigError("kappa_dielectric must be positive")
        if self.ee_calibration <= 0:
            raise ConfigError("ee_calibration must be positive")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")

    @property
    def dt_ps(self) -> float:
        return self.dt_fs * 1e-3

    @property
    def n_steps(self) -> int:
        return max(1, round(self.t_max_ps / self.dt_ps))

    @property
    def dk_per_nm(self) -> float:
        return 2.0 * self.k_max_per_nm / self.n_k


_FIELD_TYPES = {f.name: f.type for f in fields(SimConfig)}


def _parse_value(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown configuration key: {key}")
    raw = raw.strip()
    kind = _FIELD_TYPES[key]
    try:
        if key == "snapshot_times_ps":
            if not raw:
                return ()
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
        if kind in ("bool", bool):
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse value for {key}: {raw!r}") from exc


def parse_config_text(text: str, base: SimConfig | None = None) -> SimConfig:
    """Parse key=value lines ('#' comments allowed) on top of ``base``."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        values[key] = _parse_value(key, raw)
    if base is None:
        return SimConfig(**values)
    return replace(base, **values)


def load_config(path: str | Path) -> SimConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"configuration file not found: {p}")
    return parse_config_text(p.read_text())


def apply_overrides(cfg: SimConfig, overrides: list[str]) -> SimConfig:
    """Apply repeatable 'key=value' command-line overrides."""
    values = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        values[key.strip()] = _parse_value(key.strip(), raw)
    return replace(cfg, **values)


def format_config(cfg: SimConfig, prefix: str = "") -> str:
    """Serialize a config as key=value lines that parse back identically."""
    lines = []
    for f in fields(SimConfig):
        value = getattr(cfg, f.name)
        if f.name == "snapshot_times_ps":
            rendered = ",".join(repr(v) for v in value)
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{prefix}{f.name} = {rendered}")
    return "\n".join(lines) + "\n"
