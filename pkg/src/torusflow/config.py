"""Run configuration: line-oriented `key = value` files.

Recognized keys:

    N             number of basis modes
    M             quadrature grid resolution per axis
    dt            target time step for the coefficient ODE
    T             final time
    picard_tol    fixed-point stopping tolerance (default 1e-10)
    picard_max    iteration cap (default 30)
    dtau          characteristic backtracking step (default: dt)
    density.kind  constant | bump | vacuum-well
    density.floor_n   positive integer or `inf` (default: no floor)
    u0.modes      initial velocity, entries `k1,k2,parity:amplitude`
                  joined by commas, e.g. `1,0,cos:0.3,0,1,cos:0.2`
    snapshots     comma-separated times for field snapshots (optional)

Blank lines and `#` comments are ignored.  Unknown or missing required keys
raise ConfigError naming the offender.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSet
from .transport import DENSITY_CATALOG, DensitySource, lift_floor


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


@dataclass
class ModeSpec:
    k1: int
    k2: int
    parity: str
    amplitude: float


@dataclass
class RunConfig:
    N: int
    M: int
    dt: float
    T: float
    density_kind: str
    u0_modes: list[ModeSpec]
    picard_tol: float = 1e-10
    picard_max: int = 30
    dtau: float | None = None
    density_floor_n: int | None = None
    snapshots: list[float] = field(default_factory=list)

    @property
    def backtrack_step(self) -> float:
        return self.dt if self.dtau is None else self.dtau


_REQUIRED = ("N", "M", "dt", "T", "density.kind", "u0.modes")
_KNOWN = set(_REQUIRED) | {
    "picard_tol",
    "picard_max",
    "dtau",
    "density.floor_n",
    "snapshots",
}


def _parse_modes(text: str) -> list[ModeSpec]:
    tokens = [tok.strip() for tok in text.split(",") if tok.strip()]
    if len(tokens) % 3 != 0:
        raise ConfigError(
            f"u0.modes needs k1,k2,parity:amplitude triples, got {text!r}",
            key="u0.modes",
        )
    modes = []
    for i in range(0, len(tokens), 3):
        k1_s, k2_s, tail = tokens[i : i + 3]
        if ":" not in tail:
            raise ConfigError(
                f"u0.modes entry missing `parity:amplitude` in {text!r}",
                key="u0.modes",
            )
        parity, amp_s = tail.split(":", 1)
        parity = parity.strip()
        try:
            k1, k2, amp = int(k1_s), int(k2_s), float(amp_s)
        except ValueError as exc:
            raise ConfigError(f"bad u0.modes entry: {exc}", key="u0.modes") from exc
        if parity not in ("cos", "sin"):
            raise ConfigError(
                f"parity must be cos or sin, got {parity!r}", key="u0.modes"
            )
        if not (k1 > 0 or (k1 == 0 and k2 > 0)):
            raise ConfigError(
                f"wavevector ({k1},{k2}) is not in the canonical half-space "
                "(k1>0, or k1=0 and k2>0)",
                key="u0.modes",
            )
        modes.append(ModeSpec(k1, k2, parity, amp))
    if not modes:
        raise ConfigError("u0.modes lists no modes", key="u0.modes")
    return modes


def parse_config_text(text: str) -> RunConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected `key = value`: {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _KNOWN:
            raise ConfigError(f"unknown configuration key {key!r}", key=key)
        if key in raw:
            raise ConfigError(f"duplicate configuration key {key!r}", key=key)
        raw[key] = value

    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing required configuration key {key!r}", key=key)

    def _int(key, minimum=1):
        try:
            v = int(raw[key])
        except ValueError as exc:
            raise ConfigError(f"{key} must be an integer: {exc}", key=key) from exc
        if v < minimum:
            raise ConfigError(f"{key} must be >= {minimum}", key=key)
        return v

    def _float(key, positive=True):
        try:
            v = float(raw[key])
        except ValueError as exc:
            raise ConfigError(f"{key} must be a number: {exc}", key=key) from exc
        if positive and v <= 0:
            raise ConfigError(f"{key} must be positive", key=key)
        return v

    kind = raw["density.kind"]
    if kind not in DENSITY_CATALOG:
        raise ConfigError(
            f"density.kind must be one of {sorted(DENSITY_CATALOG)}, got {kind!r}",
            key="density.kind",
        )

    floor_n: int | None = None
    if "density.floor_n" in raw:
        v = raw["density.floor_n"].lower()
        if v not in ("inf", "none"):
            try:
                floor_n = int(v)
            except ValueError as exc:
                raise ConfigError(
                    f"density.floor_n must be a positive integer or inf: {exc}",
                    key="density.floor_n",
                ) from exc
            if floor_n < 1:
                raise ConfigError(
                    "density.floor_n must be >= 1", key="density.floor_n"
                )

    snapshots: list[float] = []
    if "snapshots" in raw and raw["snapshots"].strip():
        try:
            snapshots = [float(tok) for tok in raw["snapshots"].split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad snapshots list: {exc}", key="snapshots") from exc

    cfg = RunConfig(
        N=_int("N"),
        M=_int("M", minimum=3),
        dt=_float("dt"),
        T=_float("T"),
        density_kind=kind,
        u0_modes=_parse_modes(raw["u0.modes"]),
        picard_tol=_float("picard_tol") if "picard_tol" in raw else 1e-10,
        picard_max=_int("picard_max") if "picard_max" in raw else 30,
        dtau=_float("dtau") if "dtau" in raw else None,
        density_floor_n=floor_n,
        snapshots=snapshots,
    )
    if cfg.T < cfg.dt:
        raise ConfigError("T must be at least one time step", key="T")
    return cfg


def parse_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc


def build_basis(config: RunConfig) -> BasisSet:
    basis = BasisSet(config.N)
    minimum = 2 * basis.kmax + 1
    if config.M < minimum:
        raise ConfigError(
            f"M={config.M} aliases this basis; need M >= {minimum}", key="M"
        )
    return basis


def build_source(config: RunConfig) -> DensitySource:
    source = DENSITY_CATALOG[config.density_kind]()
    if config.density_floor_n is not None:
        source = lift_floor(source, config.density_floor_n)
    return source


def build_u0(config: RunConfig, basis: BasisSet) -> np.ndarray:
    """Initial coefficient vector.  Modes outside the basis span project away."""
    coeffs = np.zeros(basis.size)
    index = {(m.k, m.parity): i for i, m in enumerate(basis.modes)}
    for spec in config.u0_modes:
        i = index.get(((spec.k1, spec.k2), spec.parity))
        if i is not None:
            coeffs[i] += spec.amplitude
    return coeffs
