"""Run configuration: plain key = value files plus flag overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .eigenform import WEIGHTS
from .errors import ConfigurationError
from .kernel import TEST_FUNCTIONS


class UnknownKeyError(ConfigurationError):
    pass


class MalformedValueError(ConfigurationError):
    pass


class ParityError(ConfigurationError):
    pass


class MomentOrderError(ConfigurationError):
    pass


def _int(v: str) -> int:
    f = float(v)
    if f != int(f):
        raise ValueError(f"{v!r} is not an integer")
    return int(f)


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{v!r} is not a boolean")


def _ints(v: str) -> tuple:
    return tuple(_int(x) for x in v.replace(";", ",").split(",") if x.strip())


def _floats(v: str) -> tuple:
    return tuple(float(x) for x in v.replace(";", ",").split(",") if x.strip())


def _opt_float(v: str):
    return None if v.strip().lower() in ("", "none", "auto") else float(v)


def _opt_int(v: str):
    return None if v.strip().lower() in ("", "none", "auto") else _int(v)


def _opt_str(v: str):
    return None if v.strip().lower() in ("", "none") else v.strip()


@dataclass
class RunConfig:
    weight: int = 18
    X: float = 10000.0
    k: float = 1.0
    quantity: str = "auto"          # value | derivative | auto (by weight parity)
    mollifier: bool = True
    mode: str = "practical"
    N: int = 5
    M: int = 1
    ell1: int = 10
    R: int = 1
    Y: float = 100.0
    alpha: float | None = None      # defaults to 2k - 1
    test_function: str = "one"
    afe_tol: float = 1e-9
    euler_cutoff: int = 10**6
    threads: int = 1
    cache_dir: str | None = None    # default: $QTWIST_CACHE_DIR or ./.cache
    out_dir: str = "qtwist-out"
    csv: str | None = None
    dump_family: str | None = None
    x_grid: tuple = (4096.0, 8192.0, 16384.0, 32768.0)
    twists: tuple = (1, 3, 5, 9)
    charsum_n: tuple = (1, 9, 25, 3, 5, 7)
    samples: int = 50
    n_max: int | None = None        # table length for gen-eigenform (auto when unset)
    mertens_max: int = 10**7
    seed: int = 20240501
    suites: tuple = ("verify-afe", "verify-charsum", "verify-first-moment", "mollifier-check",
                     "holder-check", "mertens", "s1s2")
    defaults_used: tuple = field(default=(), compare=False)

    @property
    def resolved_quantity(self) -> str:
        if self.quantity != "auto":
            return self.quantity
        return "value" if self.weight % 4 == 0 else "derivative"

    @property
    def resolved_alpha(self) -> float:
        return 2 * self.k - 1 if self.alpha is None else self.alpha

    def as_lines(self) -> list[str]:
        out = []
        for f in dataclasses.fields(self):
            if f.name == "defaults_used":
                continue
            tag = " (default)" if f.name in self.defaults_used else ""
            out.append(f"{f.name} = {getattr(self, f.name)}{tag}")
        out.append(f"quantity (resolved) = {self.resolved_quantity}")
        out.append(f"alpha (resolved) = {self.resolved_alpha}")
        return out


_PARSERS = {
    "weight": _int, "X": float, "k": float, "quantity": str.strip, "mollifier": _bool,
    "mode": str.strip, "N": _int, "M": _int, "ell1": _int, "R": _int, "Y": float,
    "alpha": _opt_float, "test_function": str.strip, "afe_tol": float, "euler_cutoff": _int,
    "threads": _int, "cache_dir": _opt_str, "out_dir": str.strip, "csv": _opt_str,
    "dump_family": _opt_str, "x_grid": _floats, "twists": _ints, "charsum_n": _ints,
    "samples": _int, "seed": _int, "n_max": _opt_int,
    "mertens_max": _int,
    "suites": lambda v: tuple(x.strip() for x in v.split(",") if x.strip()),
}
_ALIASES = {"kappa": "weight", "x": "X", "l1": "ell1", "workers": "threads"}


def read_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    out = {}
    for no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise MalformedValueError(f"{path}:{no}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Merge file and flag settings (flags win), convert, and validate."""
    raw = read_config_file(path) if path is not None else {}
    raw.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    values = {}
    for key, value in raw.items():
        name = _ALIASES.get(key, key)
        if name not in _PARSERS:
            raise UnknownKeyError(f"unknown config key {key!r}; known keys: {sorted(_PARSERS)}")
        try:
            values[name] = _PARSERS[name](value)
        except (ValueError, TypeError) as exc:
            raise MalformedValueError(f"bad value for {key!r}: {value!r} ({exc})") from None
    names = {f.name for f in dataclasses.fields(RunConfig)} - {"defaults_used"}
    cfg = RunConfig(**values, defaults_used=tuple(sorted(names - set(values))))
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    if cfg.weight not in WEIGHTS:
        raise MalformedValueError(f"weight must be one of {sorted(WEIGHTS)}, got {cfg.weight}")
    if cfg.quantity not in ("auto", "value", "derivative"):
        raise MalformedValueError("quantity must be value, derivative or auto")
    q = cfg.resolved_quantity
    if q == "derivative" and cfg.weight % 4 != 2:
        raise ParityError(f"weight {cfg.weight} has root number +1: its family is studied through "
                          "central values, derivatives need weight = 2 mod 4")
    if q == "value" and cfg.weight % 4 != 0:
        raise ParityError(f"weight {cfg.weight} has root number -1: every central value vanishes, "
                          "use quantity = derivative")
    if cfg.mollifier and cfg.k <= 0.5:
        raise MomentOrderError(f"k = {cfg.k}: the mollified lower-bound argument assumes k > 1/2 "
                               "(k = 1/2 follows from the first moment directly)")
    if cfg.X < 16:
        raise MalformedValueError("X must be >= 16")
    if cfg.mode not in ("paper", "practical"):
        raise MalformedValueError("mode must be paper or practical")
    if cfg.ell1 <= 0 or cfg.ell1 % 2:
        raise MalformedValueError("ell1 must be a positive even integer")
    if cfg.test_function not in TEST_FUNCTIONS:
        raise MalformedValueError(f"test_function must be one of {sorted(TEST_FUNCTIONS)}")
    if cfg.threads < 1:
        raise MalformedValueError("threads must be >= 1")
    if any(l < 1 or l % 2 == 0 for l in cfg.twists):
        raise MalformedValueError("twists must be odd positive integers")
    if any(n < 1 or n % 2 == 0 for n in cfg.charsum_n):
        raise MalformedValueError("charsum_n entries must be odd positive integers")
