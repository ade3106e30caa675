"""Run configuration: a flat ``key = value`` file plus command-line overrides.

Lists are comma-separated (``n_grid = 32, 64, 128``). Unknown keys and
malformed values are errors. When a flag and the file disagree the flag wins
and the conflict is logged.
"""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

__all__ = ["ConfigError", "RunConfig", "KEYS", "SUBCOMMANDS", "PRESETS", "parse_config", "load_file"]

log = logging.getLogger(__name__)

SUBCOMMANDS = ("gen", "train", "noise", "approx", "cover", "rates", "check")
OUT_ENV = "SVMRATES_OUT"


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _float_or_inf(s: str) -> float:
    return float(s.strip())


def _list(conv):
    def parse(s: str):
        parts = [p for p in s.replace(";", ",").split(",") if p.strip()]
        if not parts:
            raise ValueError("empty list")
        return tuple(conv(p.strip()) for p in parts)

    return parse


# key -> (parser, default); a default of ... marks a required key
KEYS = {
    "family": (str, "power_margin"),
    "gamma": (float, 1.0),
    "q": (float, 1.0),
    "delta": (float, 0.5),
    "d": (int, 1),
    "seed": (int, ...),
    "n": (int, 200),
    "lambda": (float, 0.01),
    "sigma": (float, 2.0),
    "with_offset": (_bool, False),
    "route": (str, "dual"),
    "tol_opt": (float, 0.0),
    "n_grid": (_list(int), (32, 64, 128, 256, 512, 1024, 2048)),
    "trials": (int, 20),
    "fixed_sigma": (float, 0.0),
    "lambda_exponent": (float, 0.0),
    "sigma_exponent": (float, 0.0),
    "sigma_grid": (_list(float), (2.0, 4.0, 8.0, 16.0, 32.0)),
    "lambda_grid": (_list(float), (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)),
    "epsilon_grid": (_list(float), tuple(2.0**-k for k in range(1, 9))),
    "t_grid": (_list(_float_or_inf), (1e-3, 1.78e-3, 3.16e-3, 5.62e-3, 1e-2, 1.78e-2, 3.16e-2, 5.62e-2, 1e-1)),
    "empirical": (_bool, False),
    "n_dense": (int, 2000),
    "n_boot": (int, 2000),
    "out": (str, ""),
    "jobs": (int, 0),
    "plot": (_bool, False),
}

# keys that change where or how fast results are produced but not their content
NON_CONTENT_KEYS = ("out", "jobs", "plot")

PRESETS = {
    # uniform marginal, |2 eta - 1| = |x|: q = 1, alpha = 2, beta = 8/19
    "power_margin_gamma1": {"family": "power_margin", "gamma": "1", "n_grid": "32,64,128,256,512,1024,2048",
                            "trials": "20"},
    "separated": {"family": "separated", "delta": "0.5", "d": "1", "n_grid": "16,32,64,128,256", "trials": "20"},
}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    values: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def canonical(self) -> str:
        """Deterministic ``key=value`` text of every content-bearing setting."""
        from .io import fmt

        items = [("subcommand", self.subcommand)]
        items += [(k, self.values[k]) for k in sorted(self.values) if k not in NON_CONTENT_KEYS]
        return "\n".join(f"{k}={fmt(v)}" for k, v in items)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:12]

    def header(self) -> dict:
        return {"svmrates": __version__, "config_hash": self.config_hash, "seed": self.values["seed"]}

    def out_dir(self) -> Path:
        out = self.values.get("out") or os.environ.get(OUT_ENV) or "svmrates_out"
        return Path(out)

    def jobs(self) -> int:
        j = self.values.get("jobs", 0)
        return j if j > 0 else (os.cpu_count() or 1)


def load_file(path) -> dict[str, str]:
    """Raw ``key -> text`` pairs from a config file; ``#`` starts a comment."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    raw = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{p}:{lineno}: expected 'key = value', got {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        if k in raw:
            raise ConfigError(f"{p}:{lineno}: duplicate key {k!r}")
        raw[k] = v
    return raw


def _convert(key: str, text: str):
    if key not in KEYS:
        raise ConfigError(f"unknown key {key!r}")
    conv, _ = KEYS[key]
    try:
        return conv(text)
    except ValueError as exc:
        raise ConfigError(f"malformed value for {key!r}: {text!r} ({exc})") from None


def _validate(subcommand: str, cfg: dict):
    for key in ("n_grid", "sigma_grid", "lambda_grid", "epsilon_grid", "t_grid"):
        g = cfg[key]
        if list(g) != sorted(g) and list(g) != sorted(g, reverse=True):
            raise ConfigError(f"{key} must be sorted")
        if len(set(g)) != len(g):
            raise ConfigError(f"{key} has repeated values")
    for key in ("n", "trials", "n_dense", "d"):
        if cfg[key] < 1:
            raise ConfigError(f"{key} must be positive")
    for key in ("lambda", "sigma"):
        if not cfg[key] > 0:
            raise ConfigError(f"{key} must be positive")
    if subcommand == "rates" and cfg["trials"] < 5:
        raise ConfigError("rates needs trials >= 5 for a median and bootstrap fit")
    if cfg["tol_opt"] < 0:
        raise ConfigError("tol_opt must be positive (0 selects the default)")


def parse_config(
    subcommand: str,
    path=None,
    flags: dict[str, str] | None = None,
    preset: str | None = None,
) -> RunConfig:
    """Merge defaults, preset, file and flags (later wins) into a validated config.

    ``flags`` maps key names to their textual values, as given on the command
    line. A flag that overrides a different file value is logged.
    """
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    layers: list[tuple[str, dict[str, str]]] = []
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; expected one of {sorted(PRESETS)}")
        layers.append(("preset", PRESETS[preset]))
    if path is not None:
        layers.append(("file", load_file(path)))
    if flags:
        layers.append(("flag", {k: str(v) for k, v in flags.items()}))
    values = {k: d for k, (_, d) in KEYS.items()}
    source = {k: "default" for k in KEYS}
    file_text: dict[str, str] = {}
    for origin, layer in layers:
        for k, text in layer.items():
            v = _convert(k, text)
            if origin == "flag" and k in file_text and file_text[k] != text.strip():
                log.warning("flag %s=%s overrides config file value %s", k, text, file_text[k])
            if origin == "file":
                file_text[k] = text.strip()
            values[k] = v
            source[k] = origin
    missing = [k for k, v in values.items() if v is ...]
    if missing:
        raise ConfigError(f"missing required key(s): {', '.join(missing)}")
    _validate(subcommand, values)
    return RunConfig(subcommand, values, source)
