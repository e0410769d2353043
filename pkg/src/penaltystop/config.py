"""Run configuration: INI-style `key = value` sections.

Grammar (sections and keys; `;` or `#` start comments):

    [run]       mode, seed, output_dir, method (penalty | snell)
    [grid]      lower, upper, spacing, and h or h_over_dx2
    [region]    predicate (below | above | interval | all) plus its parameters
    [chain]     drift, vol (constant | linear) with dotted parameters
                such as vol.value; optional jump_rate and jump_targets (x list)
    [payoff]    alpha, f, G, H (built-in name or csv:PATH) with dotted
                parameters such as G.cap; boundary_convention (g | h | max);
                horizon (finite mode)
    [solver]    beta_schedule, tol, max_iters, target_bound, oracle_check
    [policy]    enabled, epsilon, start, n_paths, eta
    [benchmark] alpha, x_left, spacings, sample_lower, sample_upper, n_sample,
                slack, mc_paths

Relative CSV paths resolve against the config file's directory.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .lattice import PREDICATES
from .payoff import BUILTINS, BoundaryConvention, Mode, TabulatedPayoff

MODES = ("exit", "general", "infinite", "finite", "benchmark")


class ConfigError(ValueError):
    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


# drift/vol families: name -> (required parameters, factory)
COEFFICIENTS = {
    "constant": (("value",), lambda value: (lambda x: value + 0.0 * x)),
    "linear": (("intercept", "slope"), lambda intercept, slope: (lambda x: intercept + slope * x)),
}


@dataclass
class RunConfig:
    mode: str
    seed: int
    output_dir: Path
    method: str
    grid: dict
    region: tuple  # (name, params)
    drift: tuple
    vol: tuple
    jump_rate: float
    jump_targets: tuple
    alpha: float
    payoffs: dict  # name -> (kind, params or path)
    boundary_convention: BoundaryConvention
    horizon: float | None
    beta_schedule: tuple
    tol: float
    max_iters: int
    target_bound: float | None
    oracle_check: bool
    policy: dict
    benchmark: dict
    text: str = field(repr=False, default="")
    base_dir: Path = field(repr=False, default=Path("."))


def _floats(s: str) -> tuple:
    return tuple(float(v) for v in s.replace(",", " ").split())


class _Reader:
    def __init__(self, cp: configparser.ConfigParser):
        self.cp = cp

    def has(self, sec, key):
        return self.cp.has_section(sec) and self.cp.has_option(sec, key)

    def get(self, sec, key, conv=str, default=...):
        where = f"{sec}.{key}"
        if not self.has(sec, key):
            if default is ...:
                raise ConfigError(where, "required")
            return default
        raw = self.cp.get(sec, key).strip()
        try:
            return conv(raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(where, f"cannot parse {raw!r}: {e}") from None

    def params(self, sec, prefix) -> dict:
        if not self.cp.has_section(sec):
            return {}
        out = {}
        for k, v in self.cp.items(sec):
            if k.startswith(prefix + "."):
                try:
                    out[k[len(prefix) + 1:]] = float(v)
                except ValueError:
                    raise ConfigError(f"{sec}.{k}", f"cannot parse {v!r}") from None
        return out


def _bool(s: str) -> bool:
    v = s.lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _coefficient(r: _Reader, key: str) -> tuple:
    name = r.get("chain", key)
    if name not in COEFFICIENTS:
        raise ConfigError(f"chain.{key}", f"unknown family {name!r} (choose from {sorted(COEFFICIENTS)})")
    required, _ = COEFFICIENTS[name]
    params = r.params("chain", key)
    for p in required:
        if p not in params:
            raise ConfigError(f"chain.{key}.{p}", "required")
    extra = set(params) - set(required)
    if extra:
        raise ConfigError(f"chain.{key}", f"unexpected parameters {sorted(extra)}")
    return name, params


def _payoff(r: _Reader, key: str, base: Path) -> tuple:
    raw = r.get("payoff", key, default="zero")
    if raw.startswith("csv:"):
        path = Path(raw[4:].strip())
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise ConfigError(f"payoff.{key}", f"CSV file {str(path)!r} does not exist")
        return "csv", path
    if raw not in BUILTINS:
        raise ConfigError(f"payoff.{key}", f"unknown payoff {raw!r} (choose from {sorted(BUILTINS)} or csv:PATH)")
    return raw, r.params("payoff", key)


def load_config(path, *, mode=None, seed=None, output_dir=None, beta_list=None) -> RunConfig:
    """Parse and validate a config file; keyword arguments override it."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(str(path), f"cannot read: {e.strerror}") from None
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str  # keys are case-sensitive (payoff.G vs payoff.g)
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as e:
        raise ConfigError(str(path), str(e).splitlines()[0]) from None
    r = _Reader(cp)
    base = path.parent

    mode = mode or r.get("run", "mode", default="exit")
    if mode not in MODES:
        raise ConfigError("run.mode", f"unknown mode {mode!r}")
    seed = int(seed) if seed is not None else r.get("run", "seed", int, 0)
    if seed < 0:
        raise ConfigError("run.seed", "must be non-negative")
    out = Path(output_dir) if output_dir is not None else Path(r.get("run", "output_dir", default="output"))
    method = r.get("run", "method", default="penalty")
    if method not in ("penalty", "snell"):
        raise ConfigError("run.method", f"unknown method {method!r}")

    if beta_list is not None:
        try:
            schedule = _floats(beta_list)
        except ValueError:
            raise ConfigError("--beta-list", f"cannot parse {beta_list!r}") from None
        where = "--beta-list"
    else:
        schedule = r.get("solver", "beta_schedule", _floats, tuple(2.0**k for k in range(13)))
        where = "solver.beta_schedule"
    if not schedule:
        raise ConfigError(where, "empty")
    if any(b < 0 for b in schedule) or any(b2 <= b1 for b1, b2 in zip(schedule, schedule[1:])):
        raise ConfigError(where, "must be non-negative and strictly increasing")
    tol = r.get("solver", "tol", float, 1e-10)
    if not tol > 0:
        raise ConfigError("solver.tol", "must be > 0")
    max_iters = r.get("solver", "max_iters", int, 10**6)
    if max_iters < 1:
        raise ConfigError("solver.max_iters", "must be >= 1")

    benchmark = {}
    if mode == "benchmark":
        benchmark = {
            "alpha": r.get("benchmark", "alpha", float, 0.25),
            "x_left": r.get("benchmark", "x_left", float, -8.0),
            "spacings": r.get("benchmark", "spacings", _floats, (0.02, 0.01)),
            "sample_lower": r.get("benchmark", "sample_lower", float, -2.0),
            "sample_upper": r.get("benchmark", "sample_upper", float, 0.9),
            "n_sample": r.get("benchmark", "n_sample", int, 20),
            "slack": r.get("benchmark", "slack", float, 0.0),
            "mc_paths": r.get("benchmark", "mc_paths", int, 0),
        }
        if not 0 < benchmark["alpha"] < 0.5:
            raise ConfigError("benchmark.alpha", "must lie in (0, 1/2)")
        if not benchmark["spacings"] or min(benchmark["spacings"]) <= 0:
            raise ConfigError("benchmark.spacings", "need positive spacings")
        grid = region = drift = vol = None
        payoffs, alpha, horizon = {}, benchmark["alpha"], None
        jump_rate, jump_targets = 0.0, ()
        conv = BoundaryConvention.USE_MAX
    else:
        grid = {
            "lower": r.get("grid", "lower", float),
            "upper": r.get("grid", "upper", float),
            "spacing": r.get("grid", "spacing", float),
        }
        if not grid["spacing"] > 0:
            raise ConfigError("grid.spacing", "must be > 0")
        if not grid["upper"] > grid["lower"]:
            raise ConfigError("grid.upper", "must exceed grid.lower")
        if r.has("grid", "h"):
            grid["h"] = r.get("grid", "h", float)
        else:
            grid["h"] = r.get("grid", "h_over_dx2", float) * grid["spacing"] ** 2
        if not grid["h"] > 0:
            raise ConfigError("grid.h", "must be > 0")
        pname = r.get("region", "predicate", default="all")
        if pname not in PREDICATES:
            raise ConfigError("region.predicate", f"unknown predicate {pname!r} (choose from {sorted(PREDICATES)})")
        pparams = {k: float(v) for k, v in cp.items("region") if k != "predicate"} if cp.has_section("region") else {}
        region = (pname, pparams)
        drift = _coefficient(r, "drift")
        vol = _coefficient(r, "vol")
        jump_rate = r.get("chain", "jump_rate", float, 0.0)
        if jump_rate < 0:
            raise ConfigError("chain.jump_rate", "must be >= 0")
        jump_targets = r.get("chain", "jump_targets", _floats, ())
        if jump_rate > 0 and not jump_targets:
            raise ConfigError("chain.jump_targets", "required when jump_rate > 0")
        alpha = r.get("payoff", "alpha", float)
        payoffs = {k: _payoff(r, k, base) for k in ("f", "G", "H")}
        known = {"alpha", "f", "G", "H", "boundary_convention", "horizon"}
        for k, _ in cp.items("payoff") if cp.has_section("payoff") else ():
            if k not in known and k.split(".")[0] not in ("f", "G", "H"):
                raise ConfigError(f"payoff.{k}", "unknown key")
        try:
            conv = BoundaryConvention(r.get("payoff", "boundary_convention", default="max"))
        except ValueError:
            raise ConfigError("payoff.boundary_convention", "choose g, h or max") from None
        horizon = r.get("payoff", "horizon", float, None)
        if mode == "finite":
            if horizon is None or not horizon > 0:
                raise ConfigError("payoff.horizon", "finite mode needs a positive horizon")
            if alpha < 0:
                raise ConfigError("payoff.alpha", "must be >= 0")
        elif not alpha > 0:
            raise ConfigError("payoff.alpha", "must be > 0")

    policy = {
        "enabled": r.get("policy", "enabled", _bool, False),
        "epsilon": r.get("policy", "epsilon", float, 0.0),
        "start": r.get("policy", "start", float, None),
        "n_paths": r.get("policy", "n_paths", int, 10_000),
        "eta": r.get("policy", "eta", float, None),
    }
    if policy["epsilon"] < 0:
        raise ConfigError("policy.epsilon", "must be >= 0")
    if policy["enabled"] and policy["start"] is None and mode != "benchmark":
        raise ConfigError("policy.start", "required when the policy section is enabled")
    if policy["enabled"] and policy["n_paths"] < 100:
        raise ConfigError("policy.n_paths", "must be >= 100")

    return RunConfig(
        mode=mode, seed=seed, output_dir=out, method=method, grid=grid, region=region, drift=drift, vol=vol,
        jump_rate=jump_rate, jump_targets=jump_targets, alpha=alpha, payoffs=payoffs,
        boundary_convention=conv, horizon=horizon, beta_schedule=schedule, tol=tol, max_iters=max_iters,
        target_bound=r.get("solver", "target_bound", float, None),
        oracle_check=r.get("solver", "oracle_check", _bool, False),
        policy=policy, benchmark=benchmark, text=text, base_dir=base,
    )


def make_payoff(kind: str, params):
    if kind == "csv":
        return TabulatedPayoff.from_csv(params)
    return BUILTINS[kind](**params)


def make_coefficient(name: str, params: dict):
    return COEFFICIENTS[name][1](**params)


def mode_enum(mode: str) -> Mode:
    return Mode(mode)


__all__ = ["ConfigError", "RunConfig", "load_config", "make_payoff", "make_coefficient", "mode_enum"]
