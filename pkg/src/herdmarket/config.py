"""Model configuration: defaults, file parsing, validation, serialization."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Raised when a configuration file is malformed or violates an invariant."""


@dataclass(frozen=True)
class ModelConfig:
    """Complete parameter set for one simulation run.

    Frozen after validation, so one instance can be shared across replicas.
    """

    n_agents: int = 1600
    lattice_side: int = 40
    frac_fundamentalists: float = 0.5
    frac_chartists: float = 0.5
    frac_random: float = 0.0
    p0: float = 100.0
    p_fund_global: float = 120.0
    theta: float = 30.0
    t_max_window: int = 15
    phi: float = 2.0
    kappa: float = 2.0
    alpha: float = 0.95
    i_threshold: float = 1.0
    delta: float = 0.05
    sigma: float = 30.0
    tau: float = 20.0
    q_init: int = 50
    m_init: float = 35000.0
    t_soc: int = 10000
    t_run: int = 20000
    seed: int = 1
    rewire_prob: float = 0.02
    price_floor: float = 0.01
    # 0 means "derive from n_agents" (1000 topplings per agent per step).
    avalanche_topple_cap: int = 0

    def __post_init__(self) -> None:
        if self.avalanche_topple_cap == 0:
            object.__setattr__(self, "avalanche_topple_cap", 1000 * self.n_agents)
        _validate(self)

    def agent_counts(self) -> tuple[int, int, int]:
        """Number of (fundamentalists, chartists, random traders).

        Largest-remainder apportionment of the kind fractions over n_agents,
        ties broken in that kind order; always sums to n_agents.
        """
        fracs = (self.frac_fundamentalists, self.frac_chartists, self.frac_random)
        quotas = [f * self.n_agents for f in fracs]
        counts = [math.floor(q) for q in quotas]
        remainders = [q - c for q, c in zip(quotas, counts)]
        for _ in range(self.n_agents - sum(counts)):
            k = max(range(3), key=lambda i: (remainders[i], -i))
            counts[k] += 1
            remainders[k] = -1.0
        return counts[0], counts[1], counts[2]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """sha256 of the canonical (key-sorted) JSON form."""
        payload = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ModelConfig)}
_INT_FIELDS = {f.name for f in dataclasses.fields(ModelConfig) if f.type == "int"}


def _validate(cfg: ModelConfig) -> None:
    def fail(key: str, msg: str) -> None:
        raise ConfigError(f"invalid value for '{key}': {msg}")

    if cfg.n_agents <= 0:
        fail("n_agents", "must be positive")
    if cfg.lattice_side < 2:
        fail("lattice_side", "must be at least 2")
    if cfg.lattice_side * cfg.lattice_side != cfg.n_agents:
        fail("lattice_side", f"side^2 = {cfg.lattice_side ** 2} does not equal n_agents = {cfg.n_agents}")
    for key in ("frac_fundamentalists", "frac_chartists", "frac_random"):
        v = getattr(cfg, key)
        if not 0.0 <= v <= 1.0:
            fail(key, "must lie in [0, 1]")
    total = cfg.frac_fundamentalists + cfg.frac_chartists + cfg.frac_random
    if abs(total - 1.0) > 1e-9:
        fail("frac_fundamentalists", f"kind fractions sum to {total!r}, expected 1")
    if cfg.t_max_window < 2:
        fail("t_max_window", "must be at least 2")
    if not 0.0 < cfg.alpha <= 1.0:
        fail("alpha", "must lie in (0, 1]")
    for key in ("theta", "sigma", "tau", "delta"):
        if getattr(cfg, key) < 0.0:
            fail(key, "must be non-negative")
    if cfg.price_floor <= 0.0:
        fail("price_floor", "must be positive")
    if cfg.p0 < cfg.price_floor:
        fail("p0", "must be at least price_floor")
    if cfg.i_threshold <= 0.0:
        fail("i_threshold", "must be positive")
    if not 0.0 <= cfg.rewire_prob <= 1.0:
        fail("rewire_prob", "must lie in [0, 1]")
    if cfg.q_init < 0:
        fail("q_init", "must be non-negative")
    if cfg.m_init < 0.0:
        fail("m_init", "must be non-negative")
    for key in ("t_soc", "t_run"):
        if getattr(cfg, key) < 0:
            fail(key, "must be non-negative")
    if not 0 <= cfg.seed < 2**64:
        fail("seed", "must fit in an unsigned 64-bit integer")
    if cfg.avalanche_topple_cap <= 0:
        fail("avalanche_topple_cap", "must be positive")


def default_config() -> ModelConfig:
    """The baseline parameter set (1600 agents, no random traders)."""
    return ModelConfig()


def parse_config(text: str) -> ModelConfig:
    """Parse a flat ``key = value`` document; missing keys take defaults."""
    overrides: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in overrides:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        try:
            overrides[key] = int(value) if key in _INT_FIELDS else float(value)
        except ValueError:
            kind = "an integer" if key in _INT_FIELDS else "a number"
            raise ConfigError(f"line {lineno}: value for '{key}' must be {kind}, got {value!r}") from None
    return ModelConfig(**overrides)


def load_config(path: str | Path) -> ModelConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def dump_config(cfg: ModelConfig) -> str:
    """Render a config in the same flat format accepted by parse_config."""
    lines = [f"{f.name} = {getattr(cfg, f.name)!r}" for f in dataclasses.fields(ModelConfig)]
    return "\n".join(lines) + "\n"


def save_config(cfg: ModelConfig, path: str | Path) -> None:
    Path(path).write_text(dump_config(cfg), encoding="utf-8")
