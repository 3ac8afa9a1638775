"""Plain-text key-value run configuration.

Format: one ``section.key = value`` per line; ``#`` starts a comment; blank
lines ignored. Vector values are whitespace separated. Unknown keys are
errors. See DEFAULT_CONFIG_TEXT for the full schema with defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .geometry import MeshConfig

DEFAULT_CONFIG_TEXT = """\
# geometry: outer box, strictly interior cube, cells per unit length
geometry.outer_lo = 0 0 0
geometry.outer_hi = 1 1 1
geometry.inner_lo = 0.25 0.25 0.25
geometry.inner_hi = 0.75 0.75 0.75
geometry.n = 4

# time-domain run
simulate.T = 60
simulate.tau = 0.01
simulate.seed = 1
simulate.fit_window = 1 50
simulate.initial = smooth        # smooth | zero

# frequency sweep
sweep.beta_min = 1
sweep.beta_max = 200
sweep.points = 25
sweep.probe_seed = 2
sweep.opnorm_tol = 1e-4

# multiplier probe
probe.manufactured = true
probe.refinements = 4 8 16
probe.beta = 2

# outputs
output_dir = out
solve_tol = 1e-10
"""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimulateConfig:
    T: float = 60.0
    tau: float = 0.01
    seed: int = 1
    fit_window: tuple = (1.0, 50.0)
    initial: str = "smooth"


@dataclass(frozen=True)
class SweepConfig:
    beta_min: float = 1.0
    beta_max: float = 200.0
    points: int = 25
    probe_seed: int = 2
    opnorm_tol: float = 1e-4


@dataclass(frozen=True)
class ProbeConfig:
    manufactured: bool = True
    refinements: tuple = (4, 8, 16)
    beta: float = 2.0


@dataclass(frozen=True)
class RunConfig:
    geometry: MeshConfig = field(default_factory=MeshConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    output_dir: str = "out"
    solve_tol: float = 1e-10

    def validate(self):
        self.geometry.validate()
        s = self.simulate
        if s.T <= 0 or s.tau <= 0:
            raise ConfigError("simulate.T and simulate.tau must be positive")
        ta, tb = s.fit_window
        if not (0 <= ta < tb <= s.T):
            raise ConfigError(f"fit window [{ta}, {tb}] must lie within [0, T]")
        if s.initial not in ("smooth", "zero"):
            raise ConfigError(f"simulate.initial must be smooth or zero, got {s.initial!r}")
        w = self.sweep
        if w.beta_min < 1:
            raise ConfigError("sweep.beta_min must be >= 1")
        if w.beta_max <= w.beta_min:
            raise ConfigError("sweep.beta_max must exceed sweep.beta_min")
        if w.points < 1:
            raise ConfigError("sweep.points must be positive")
        if w.opnorm_tol <= 0 or self.solve_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if len(self.probe.refinements) < 1:
            raise ConfigError("probe.refinements must name at least one resolution")


def _vec3(raw, key):
    parts = raw.split()
    if len(parts) != 3:
        raise ConfigError(f"{key}: expected 3 numbers, got {raw!r}")
    return tuple(float(p) for p in parts)


def _bool(raw, key):
    low = raw.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def parse_config(text: str) -> RunConfig:
    geo = {}
    sim = {}
    swp = {}
    prb = {}
    top = {}
    setters = {
        "geometry.outer_lo": lambda v: geo.__setitem__("outer_lo", _vec3(v, "geometry.outer_lo")),
        "geometry.outer_hi": lambda v: geo.__setitem__("outer_hi", _vec3(v, "geometry.outer_hi")),
        "geometry.inner_lo": lambda v: geo.__setitem__("inner_lo", _vec3(v, "geometry.inner_lo")),
        "geometry.inner_hi": lambda v: geo.__setitem__("inner_hi", _vec3(v, "geometry.inner_hi")),
        "geometry.n": lambda v: geo.__setitem__("n", int(v)),
        "simulate.T": lambda v: sim.__setitem__("T", float(v)),
        "simulate.tau": lambda v: sim.__setitem__("tau", float(v)),
        "simulate.seed": lambda v: sim.__setitem__("seed", int(v)),
        "simulate.fit_window": lambda v: sim.__setitem__(
            "fit_window", tuple(float(p) for p in v.split())
        ),
        "simulate.initial": lambda v: sim.__setitem__("initial", v.strip()),
        "sweep.beta_min": lambda v: swp.__setitem__("beta_min", float(v)),
        "sweep.beta_max": lambda v: swp.__setitem__("beta_max", float(v)),
        "sweep.points": lambda v: swp.__setitem__("points", int(v)),
        "sweep.probe_seed": lambda v: swp.__setitem__("probe_seed", int(v)),
        "sweep.opnorm_tol": lambda v: swp.__setitem__("opnorm_tol", float(v)),
        "probe.manufactured": lambda v: prb.__setitem__("manufactured", _bool(v, "probe.manufactured")),
        "probe.refinements": lambda v: prb.__setitem__(
            "refinements", tuple(int(p) for p in v.split())
        ),
        "probe.beta": lambda v: prb.__setitem__("beta", float(v)),
        "output_dir": lambda v: top.__setitem__("output_dir", v.strip()),
        "solve_tol": lambda v: top.__setitem__("solve_tol", float(v)),
    }
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in setters:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            setters[key](value)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc

    cfg = RunConfig(
        geometry=MeshConfig(**geo),
        simulate=SimulateConfig(**sim),
        sweep=SweepConfig(**swp),
        probe=ProbeConfig(**prb),
        **top,
    )
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def default_config() -> RunConfig:
    return parse_config(DEFAULT_CONFIG_TEXT)


def with_overrides(cfg: RunConfig, *, seed=None, output_dir=None) -> RunConfig:
    if seed is not None:
        cfg = replace(cfg, simulate=replace(cfg.simulate, seed=seed),
                      sweep=replace(cfg.sweep, probe_seed=seed))
    if output_dir is not None:
        cfg = replace(cfg, output_dir=output_dir)
    return cfg
