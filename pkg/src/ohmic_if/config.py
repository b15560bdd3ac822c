"""Run configuration: strict ``[section] key = value`` files with typed validation."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from .dynamics import SpinModel, as_density_matrix, density_matrix
from .errors import ConfigError, ContractError, ParameterError
from .kernel import BathSpec

__all__ = ["SimConfig", "load_config", "parse_config", "default_config_text", "DEFAULT_SEED"]

DEFAULT_SEED = 42

# allowed keys per section, mapped to "required"
_SCHEMA: Dict[str, Dict[str, bool]] = {
    "bath": {"alpha": True, "omega_c": True},
    "time": {"total_time": True, "delta_t": False, "n_steps": False},
    "accuracy": {
        "epsilon": True,
        "n_eps": False,
        "m_eps": False,
        "per_mode_cap": False,
        "global_cap": False,
        "modes": False,
        "shift": False,
    },
    "spin": {"preset": False, "unitaries": False},
    "initial": {"state": False, "rho": False},
    "output": {"trajectory": False, "modes": False, "report": False, "plan": False},
    "run": {"seed": False},
}


@dataclass(frozen=True)
class SimConfig:
    bath: BathSpec
    total_time: float
    delta_t: float
    n_steps: int
    epsilon: float
    n_eps: Optional[int] = None
    m_eps: Optional[int] = None
    per_mode_cap: Optional[int] = None
    global_cap: Optional[int] = None
    # inclusive node window (k_min, k_max) used for tensors, None = all nodes
    mode_window: Optional[Tuple[int, int]] = None
    shift: str = "finite-step"
    spin_preset: str = "free"
    unitaries_path: Optional[Path] = None
    rho0: np.ndarray = field(default_factory=lambda: density_matrix("up"))
    outputs: Dict[str, str] = field(default_factory=lambda: {
        "trajectory": "trajectory.csv", "modes": "modes.csv", "report": "report.txt",
        "plan": "plan.csv"})
    seed: int = DEFAULT_SEED

    def spin_model(self) -> SpinModel:
        if self.unitaries_path is not None:
            return SpinModel(unitaries=_load_unitaries(self.unitaries_path), name="unitaries")
        return _parse_preset(self.spin_preset)


def _parse_preset(text: str) -> SpinModel:
    parts = text.split()
    if not parts:
        raise ConfigError("spin.preset is empty")
    name, args = parts[0], parts[1:]
    try:
        vals = [float(a) for a in args]
    except ValueError:
        raise ConfigError(f"spin.preset: non-numeric parameter in {text!r}") from None
    expected = {"free": 0, "rabi": 1, "biased-rabi": 2}
    if name not in expected:
        raise ConfigError(f"spin.preset: unknown preset {name!r} (free, rabi, biased-rabi)")
    if len(vals) != expected[name]:
        raise ConfigError(f"spin.preset: {name!r} takes {expected[name]} parameter(s)")
    if name == "free":
        return SpinModel.free()
    if name == "rabi":
        return SpinModel.rabi(vals[0])
    return SpinModel.biased_rabi(vals[0], vals[1])


def _load_unitaries(path: Path) -> np.ndarray:
    """One unitary per line: ``re00 im00 re01 im01 re10 im10 re11 im11``."""
    try:
        raw = np.loadtxt(path, ndmin=2)
    except OSError as exc:
        raise ConfigError(f"spin.unitaries: cannot read {path}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"spin.unitaries: malformed file {path}: {exc}") from None
    if raw.shape[1] != 8:
        raise ConfigError("spin.unitaries: each line needs 8 numbers")
    return (raw[:, 0::2] + 1j * raw[:, 1::2]).reshape(-1, 2, 2)


def _num(section: str, key: str, text: str, kind=float):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {text!r} as {kind.__name__}") from None


def default_config_text() -> str:
    return resources.files("ohmic_if").joinpath("data/default.ini").read_text()


def _apply_overrides(parser: configparser.ConfigParser, overrides: Iterable[str]) -> None:
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        lhs, value = item.split("=", 1)
        if "." not in lhs:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        section, key = (p.strip() for p in lhs.split(".", 1))
        if not parser.has_section(section):
            parser.add_section(section)
        if value.strip():
            parser.set(section, key, value.strip())
        else:
            # an empty value removes the key, e.g. to swap delta_t for n_steps
            parser.remove_option(section, key)


def parse_config(text: str, overrides: Iterable[str] = (), base_dir: Optional[Path] = None) -> SimConfig:
    parser = configparser.ConfigParser(strict=True, interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    _apply_overrides(parser, overrides)

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
    for section, keys in _SCHEMA.items():
        for key, required in keys.items():
            if required and not parser.has_option(section, key):
                raise ConfigError(f"missing required field {section}.{key}")

    get = lambda s, k: parser.get(s, k) if parser.has_option(s, k) else None  # noqa: E731
    try:
        bath = BathSpec(_num("bath", "alpha", get("bath", "alpha")),
                        _num("bath", "omega_c", get("bath", "omega_c")))
    except ParameterError as exc:
        raise ConfigError(f"bath: {exc}") from None

    total_time = _num("time", "total_time", get("time", "total_time"))
    dt_text, n_text = get("time", "delta_t"), get("time", "n_steps")
    if (dt_text is None) == (n_text is None):
        raise ConfigError("time: give exactly one of delta_t and n_steps")
    if total_time <= 0:
        raise ConfigError("time.total_time must be > 0")
    if dt_text is not None:
        delta_t = _num("time", "delta_t", dt_text)
        if delta_t <= 0:
            raise ConfigError("time.delta_t must be > 0")
        n_steps = int(round(total_time / delta_t))
        if n_steps < 1 or abs(n_steps * delta_t - total_time) > 1e-9 * total_time:
            raise ConfigError("time: total_time must be an integer multiple of delta_t")
    else:
        n_steps = _num("time", "n_steps", n_text, int)
        if n_steps < 1:
            raise ConfigError("time.n_steps must be >= 1")
        delta_t = total_time / n_steps

    epsilon = _num("accuracy", "epsilon", get("accuracy", "epsilon"))
    if not epsilon > 0:
        raise ConfigError("accuracy.epsilon must be > 0")
    ints = {}
    for key in ("n_eps", "m_eps", "per_mode_cap", "global_cap"):
        val = get("accuracy", key)
        ints[key] = None if val is None else _num("accuracy", key, val, int)
        if ints[key] is not None and ints[key] < 0:
            raise ConfigError(f"accuracy.{key} must be >= 0")
    window = None
    modes_text = get("accuracy", "modes")
    if modes_text is not None and modes_text.strip() != "all":
        lo, sep, hi = modes_text.partition(":")
        if not sep:
            raise ConfigError("accuracy.modes must be 'all' or 'k_min:k_max'")
        window = (_num("accuracy", "modes", lo, int), _num("accuracy", "modes", hi, int))
        if window[1] < window[0]:
            raise ConfigError("accuracy.modes: empty window")
    shift = get("accuracy", "shift") or "finite-step"
    if shift not in ("finite-step", "first-order"):
        raise ConfigError("accuracy.shift must be 'finite-step' or 'first-order'")

    preset, upath = get("spin", "preset"), get("spin", "unitaries")
    if preset is not None and upath is not None:
        raise ConfigError("spin: give either preset or unitaries")
    unitaries_path = None
    if upath is not None:
        unitaries_path = Path(upath)
        if not unitaries_path.is_absolute() and base_dir is not None:
            unitaries_path = base_dir / unitaries_path
    preset = preset or "free"
    if unitaries_path is None:
        _parse_preset(preset)

    state, rho_text = get("initial", "state"), get("initial", "rho")
    if state is not None and rho_text is not None:
        raise ConfigError("initial: give either state or rho")
    if rho_text is not None:
        vals = [_num("initial", "rho", v) for v in rho_text.split()]
        if len(vals) != 8:
            raise ConfigError("initial.rho needs 8 numbers: re00 im00 re01 im01 re10 im10 re11 im11")
        arr = np.array(vals)
        rho0 = (arr[0::2] + 1j * arr[1::2]).reshape(2, 2)
    else:
        try:
            rho0 = density_matrix(state or "up")
        except ParameterError as exc:
            raise ConfigError(f"initial.state: {exc}") from None
    try:
        rho0 = as_density_matrix(rho0)
    except ContractError as exc:
        raise ConfigError(f"initial: {exc}") from None

    outputs = dict(SimConfig.__dataclass_fields__["outputs"].default_factory())
    if parser.has_section("output"):
        outputs.update(parser["output"])
    seed = get("run", "seed")
    seed = DEFAULT_SEED if seed is None else _num("run", "seed", seed, int)

    return SimConfig(
        bath=bath, total_time=total_time, delta_t=delta_t, n_steps=n_steps, epsilon=epsilon,
        n_eps=ints["n_eps"], m_eps=ints["m_eps"], per_mode_cap=ints["per_mode_cap"],
        global_cap=ints["global_cap"], mode_window=window, shift=shift, spin_preset=preset,
        unitaries_path=unitaries_path, rho0=rho0, outputs=outputs, seed=seed,
    )


def load_config(path=None, overrides: Iterable[str] = ()) -> SimConfig:
    """Parse ``path`` (the shipped default when ``None``)."""
    if path is None:
        return parse_config(default_config_text(), overrides)
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, overrides, base_dir=path.parent)
