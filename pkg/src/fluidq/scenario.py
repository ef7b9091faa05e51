"""Scenario files: one experiment = one flat key/value text file.

Schema (keys are lowercase, one ``key = value`` per line, ``#`` comments):

    name            required  experiment name
    lambda          required  fluid-scale arrival rate, >= 0
    service         required  law string: ``exponential rate=1.0`` |
                              ``lognormal mu=0.0 sigma=0.5`` |
                              ``uniform a=0.0 b=2.0`` |
                              ``deterministic value=0.5``
    rate            required  ``constant value=1.0`` |
                              ``capped_linear base=0.5 slope=1.0 cap=2.0`` |
                              ``table knots=0:1,2:1.5 lipschitz=0.25``
    horizon         required  simulation/solve horizon T, >= 0
    arrival         default exponential; one of exponential | deterministic | uniform
    initial         default ``empty``; or ``scaled_tail mass=0.6`` (that
                    fraction of the service-law tail) or an explicit
                    ``grid points=0:0.6,1:0.3,2:0`` tail
    q0              default 0; initial queue mass (requires full initial tail)
    dt              default 0.001
    x_max, x_step   default 10.0, 0.05; the x-grid for tail comparisons
    n_list          default 10,100,1000
    replications    default 3
    seed            default 12345; base seed, replication r uses seed + r
    snapshot_times  default T/5, T/2, T

Unknown keys are rejected with their line number.  Round trip holds:
parsing the canonical serialization reproduces the scenario exactly.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .fluid import FluidParams, check_initial_consistency
from .laws import (
    ARRIVAL_KINDS,
    SERVICE_KINDS,
    capped_linear_rate,
    constant_rate,
    make_arrivals,
    table_rate,
)
from .measures import TailFunction


class ScenarioError(ValueError):
    """Scenario file violates the schema or its consistency checks."""


_DEFAULTS = {
    "arrival": "exponential",
    "initial": ("empty", ()),
    "q0": 0.0,
    "dt": 1e-3,
    "x_max": 10.0,
    "x_step": 0.05,
    "n_list": (10, 100, 1000),
    "replications": 3,
    "seed": 12345,
}

_KNOWN_KEYS = {
    "name", "lambda", "arrival", "service", "rate", "initial", "q0",
    "horizon", "dt", "x_max", "x_step", "n_list", "replications", "seed",
    "snapshot_times",
}


@dataclass(frozen=True)
class Scenario:
    name: str
    lam: float
    arrival_kind: str
    service_kind: str
    service_params: tuple  # ((key, value), ...) in a fixed order
    rate_kind: str
    rate_params: tuple
    initial_kind: str
    initial_params: tuple
    q0: float
    horizon: float
    dt: float
    x_max: float
    x_step: float
    n_list: tuple
    replications: int
    seed: int
    snapshot_times: tuple

    # -- builders ----------------------------------------------------------

    def build_service(self):
        return SERVICE_KINDS[self.service_kind](**dict(self.service_params))

    def build_arrivals(self):
        return make_arrivals(self.arrival_kind, self.lam)

    def build_rate(self):
        params = dict(self.rate_params)
        if self.rate_kind == "constant":
            return constant_rate(params["value"])
        if self.rate_kind == "capped_linear":
            return capped_linear_rate(params["base"], params["slope"], params["cap"])
        if self.rate_kind == "table":
            xs, ks = zip(*params["knots"])
            return table_rate(xs, ks, params["lipschitz"])
        raise ScenarioError(f"unknown rate kind '{self.rate_kind}'")

    def build_initial_tail(self) -> TailFunction:
        params = dict(self.initial_params)
        if self.initial_kind == "empty":
            return TailFunction.zero()
        if self.initial_kind == "scaled_tail":
            grid = self.x_grid()
            service = self.build_service()
            return TailFunction(grid, params["mass"] * np.asarray(service.tail(grid)))
        if self.initial_kind == "grid":
            xs, vs = zip(*params["points"])
            return TailFunction(xs, vs)
        raise ScenarioError(f"unknown initial kind '{self.initial_kind}'")

    def x_grid(self) -> np.ndarray:
        return np.arange(0.0, self.x_max + 0.5 * self.x_step, self.x_step)

    def fluid_params(self) -> FluidParams:
        return FluidParams(
            arrival_rate=self.lam,
            service=self.build_service(),
            rate=self.build_rate(),
            initial_tail=self.build_initial_tail(),
            initial_queue=self.q0,
            horizon=self.horizon,
            dt=self.dt,
        )


def _parse_kv_tokens(tokens, line_no, context):
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ScenarioError(
                f"line {line_no}: expected key=value in {context}, got '{tok}'"
            )
        k, v = tok.split("=", 1)
        out[k] = v
    return out


def _parse_pairs(text, line_no, context):
    """Comma-separated x:y pairs."""
    pairs = []
    for chunk in text.split(","):
        if ":" not in chunk:
            raise ScenarioError(
                f"line {line_no}: expected x:y pairs in {context}, got '{chunk}'"
            )
        a, b = chunk.split(":", 1)
        try:
            pairs.append((float(a), float(b)))
        except ValueError:
            raise ScenarioError(f"line {line_no}: bad number in {context}") from None
    return tuple(pairs)


def _parse_float(raw, line_no, key):
    try:
        return float(raw)
    except ValueError:
        raise ScenarioError(f"line {line_no}: key '{key}' needs a number") from None


_SERVICE_PARAM_ORDER = {
    "exponential": ("rate",),
    "lognormal": ("mu", "sigma"),
    "uniform": ("a", "b"),
    "deterministic": ("value",),
}


def parse_scenario(text: str) -> Scenario:
    raw: dict = {}
    lines: dict = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ScenarioError(f"line {line_no}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ScenarioError(f"line {line_no}: unknown key '{key}'")
        if key in raw:
            raise ScenarioError(f"line {line_no}: duplicate key '{key}'")
        raw[key] = value
        lines[key] = line_no
    for required in ("name", "lambda", "service", "rate", "horizon"):
        if required not in raw:
            raise ScenarioError(f"missing required key '{required}'")

    def line_of(key):
        return lines.get(key, 0)

    lam = _parse_float(raw["lambda"], line_of("lambda"), "lambda")
    if lam < 0:
        raise ScenarioError(f"line {line_of('lambda')}: lambda must be >= 0")
    horizon = _parse_float(raw["horizon"], line_of("horizon"), "horizon")
    if horizon < 0:
        raise ScenarioError(f"line {line_of('horizon')}: horizon must be >= 0")

    arrival_kind = raw.get("arrival", _DEFAULTS["arrival"])
    if arrival_kind not in ARRIVAL_KINDS:
        raise ScenarioError(
            f"line {line_of('arrival')}: unknown arrival kind '{arrival_kind}'"
        )

    svc_tokens = raw["service"].split()
    service_kind = svc_tokens[0]
    if service_kind not in _SERVICE_PARAM_ORDER:
        raise ScenarioError(
            f"line {line_of('service')}: unknown service kind '{service_kind}'"
        )
    svc_kv = _parse_kv_tokens(svc_tokens[1:], line_of("service"), "service")
    expected = _SERVICE_PARAM_ORDER[service_kind]
    if set(svc_kv) != set(expected):
        raise ScenarioError(
            f"line {line_of('service')}: service '{service_kind}' needs "
            f"parameters {', '.join(expected)}"
        )
    service_params = tuple(
        (k, _parse_float(svc_kv[k], line_of("service"), k)) for k in expected
    )

    rate_tokens = raw["rate"].split()
    rate_kind = rate_tokens[0]
    rate_kv = _parse_kv_tokens(rate_tokens[1:], line_of("rate"), "rate")
    if rate_kind == "constant":
        if set(rate_kv) != {"value"}:
            raise ScenarioError(f"line {line_of('rate')}: constant rate needs value=")
        rate_params = (("value", _parse_float(rate_kv["value"], line_of("rate"), "value")),)
    elif rate_kind == "capped_linear":
        if set(rate_kv) != {"base", "slope", "cap"}:
            raise ScenarioError(
                f"line {line_of('rate')}: capped_linear needs base=, slope=, cap="
            )
        rate_params = tuple(
            (k, _parse_float(rate_kv[k], line_of("rate"), k))
            for k in ("base", "slope", "cap")
        )
    elif rate_kind == "table":
        if set(rate_kv) != {"knots", "lipschitz"}:
            raise ScenarioError(
                f"line {line_of('rate')}: table rate needs knots=, lipschitz="
            )
        rate_params = (
            ("knots", _parse_pairs(rate_kv["knots"], line_of("rate"), "rate knots")),
            ("lipschitz", _parse_float(rate_kv["lipschitz"], line_of("rate"), "lipschitz")),
        )
    else:
        raise ScenarioError(f"line {line_of('rate')}: unknown rate kind '{rate_kind}'")

    if "initial" in raw:
        ini_tokens = raw["initial"].split()
        initial_kind = ini_tokens[0]
        ini_kv = _parse_kv_tokens(ini_tokens[1:], line_of("initial"), "initial")
        if initial_kind == "empty":
            if ini_kv:
                raise ScenarioError(
                    f"line {line_of('initial')}: 'empty' takes no parameters"
                )
            initial_params = ()
        elif initial_kind == "scaled_tail":
            if set(ini_kv) != {"mass"}:
                raise ScenarioError(
                    f"line {line_of('initial')}: scaled_tail needs mass="
                )
            initial_params = (
                ("mass", _parse_float(ini_kv["mass"], line_of("initial"), "mass")),
            )
        elif initial_kind == "grid":
            if set(ini_kv) != {"points"}:
                raise ScenarioError(f"line {line_of('initial')}: grid needs points=")
            initial_params = (
                ("points", _parse_pairs(ini_kv["points"], line_of("initial"), "initial grid")),
            )
        else:
            raise ScenarioError(
                f"line {line_of('initial')}: unknown initial kind '{initial_kind}'"
            )
    else:
        initial_kind, initial_params = _DEFAULTS["initial"]

    q0 = _parse_float(raw.get("q0", "0"), line_of("q0"), "q0")
    if q0 < 0:
        raise ScenarioError(f"line {line_of('q0')}: q0 must be >= 0")
    dt = _parse_float(raw.get("dt", repr(_DEFAULTS["dt"])), line_of("dt"), "dt")
    if dt <= 0:
        raise ScenarioError(f"line {line_of('dt')}: dt must be positive")
    x_max = _parse_float(raw.get("x_max", repr(_DEFAULTS["x_max"])), line_of("x_max"), "x_max")
    x_step = _parse_float(raw.get("x_step", repr(_DEFAULTS["x_step"])), line_of("x_step"), "x_step")
    if x_max <= 0 or x_step <= 0 or x_step > x_max:
        raise ScenarioError("x_max and x_step must be positive with x_step <= x_max")

    if "n_list" in raw:
        try:
            n_list = tuple(int(v) for v in raw["n_list"].split(","))
        except ValueError:
            raise ScenarioError(f"line {line_of('n_list')}: n_list needs integers") from None
    else:
        n_list = _DEFAULTS["n_list"]
    if not n_list or any(n < 1 for n in n_list):
        raise ScenarioError(f"line {line_of('n_list')}: n_list entries must be >= 1")

    replications = int(_parse_float(raw.get("replications", "3"), line_of("replications"), "replications"))
    if replications < 1:
        raise ScenarioError(f"line {line_of('replications')}: replications must be >= 1")
    seed = int(_parse_float(raw.get("seed", repr(float(_DEFAULTS["seed"]))), line_of("seed"), "seed"))

    if "snapshot_times" in raw:
        snapshot_times = tuple(
            _parse_float(v, line_of("snapshot_times"), "snapshot_times")
            for v in raw["snapshot_times"].split(",")
        )
    else:
        snapshot_times = (horizon / 5.0, horizon / 2.0, horizon)
    if any(t < 0 or t > horizon for t in snapshot_times):
        raise ScenarioError("snapshot times must lie within [0, horizon]")

    scenario = Scenario(
        name=raw["name"],
        lam=lam,
        arrival_kind=arrival_kind,
        service_kind=service_kind,
        service_params=service_params,
        rate_kind=rate_kind,
        rate_params=rate_params,
        initial_kind=initial_kind,
        initial_params=initial_params,
        q0=q0,
        horizon=horizon,
        dt=dt,
        x_max=x_max,
        x_step=x_step,
        n_list=n_list,
        replications=replications,
        seed=seed,
        snapshot_times=snapshot_times,
    )
    # surface time-zero consistency and law construction problems now
    try:
        service = scenario.build_service()
        scenario.build_rate()
        tail0 = scenario.build_initial_tail()
        check_initial_consistency(tail0.total_mass, scenario.q0)
        del service
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    return scenario


def _format_pairs(pairs) -> str:
    return ",".join(f"{float(a)!r}:{float(b)!r}" for a, b in pairs)


def serialize_scenario(sc: Scenario) -> str:
    """Canonical text form; parsing it reproduces the scenario exactly."""
    svc = " ".join(f"{k}={float(v)!r}" for k, v in sc.service_params)
    if sc.rate_kind == "table":
        params = dict(sc.rate_params)
        rate = f"table knots={_format_pairs(params['knots'])} lipschitz={float(params['lipschitz'])!r}"
    else:
        rate = sc.rate_kind + "".join(
            f" {k}={float(v)!r}" for k, v in sc.rate_params
        )
    if sc.initial_kind == "grid":
        initial = f"grid points={_format_pairs(dict(sc.initial_params)['points'])}"
    elif sc.initial_kind == "scaled_tail":
        initial = f"scaled_tail mass={float(dict(sc.initial_params)['mass'])!r}"
    else:
        initial = "empty"
    lines = [
        f"name = {sc.name}",
        f"lambda = {float(sc.lam)!r}",
        f"arrival = {sc.arrival_kind}",
        f"service = {sc.service_kind} {svc}".rstrip(),
        f"rate = {rate}",
        f"initial = {initial}",
        f"q0 = {float(sc.q0)!r}",
        f"horizon = {float(sc.horizon)!r}",
        f"dt = {float(sc.dt)!r}",
        f"x_max = {float(sc.x_max)!r}",
        f"x_step = {float(sc.x_step)!r}",
        f"n_list = {','.join(str(n) for n in sc.n_list)}",
        f"replications = {sc.replications}",
        f"seed = {sc.seed}",
        f"snapshot_times = {','.join(repr(float(t)) for t in sc.snapshot_times)}",
    ]
    return "\n".join(lines) + "\n"


def scenario_hash(sc: Scenario) -> str:
    return hashlib.sha256(serialize_scenario(sc).encode()).hexdigest()[:16]


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())
