"""Reading observations and run configuration; writing every run output.

Numeric output is written with 17 significant digits so that a run can be
replayed bit for bit from its files.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .density import SmoothedDensity
from .errors import ConfigError, ParseError, SchemaError, ValidationError
from .evidence import EvidenceEstimate
from .inference import (DEFAULT_SAMPLED, SERIES, ObservationSeries,
                        PosteriorDraws, SamplerConfig)
from .model import (COMPARTMENTS, SCALAR_NAMES, SCHEDULE_NAMES, ModelTag, ParameterSet,
                    RateSchedule, StateVector, VaccinationPolicy)
from .predictive import ScenarioSummary
from .presets import (BASELINE_VACCINATION_DAY, BED_CAPACITY, DEFAULT_ALPHA_BREAKPOINTS,
                      DEFAULT_GAMMA1_BREAKPOINTS, DEFAULT_PHI_BREAKPOINTS, HORIZON,
                      POPULATION, SUMMARY_DAY, table_initial_state, table_parameters)

log = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
OBSERVATION_COLUMNS = ("day",) + SERIES
# Number of transmission rates implied by the ten intervention dates.
EXPECTED_ALPHA_SEGMENTS = 11


def fmt(value: float) -> str:
    return FLOAT_FORMAT % value


# -- observations -------------------------------------------------------------

def _parse_count(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"row {row}: {column} value {text!r} is not a number") from None
    if not math.isfinite(value) or value != round(value):
        raise ParseError(f"row {row}: {column} value {text!r} is not an integer count")
    return value


def read_observations(stream, source: str = "<stream>") -> ObservationSeries:
    reader = csv.reader(stream)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError(f"{source}: empty file, expected a header row") from None
    for column in OBSERVATION_COLUMNS:
        if column not in header:
            raise SchemaError(f"{source}: missing column {column!r}")
    position = {name: header.index(name) for name in OBSERVATION_COLUMNS}

    days, values, masks = [], {n: [] for n in SERIES}, {n: [] for n in SERIES}
    for row_number, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        day_text = row[position["day"]].strip()
        if not day_text:
            raise ParseError(f"row {row_number}: day is blank")
        day = _parse_count(day_text, row_number, "day")
        if day < 0:
            raise ValidationError(f"row {row_number}: negative day {day:g}")
        days.append(int(day))
        for name in SERIES:
            cell = row[position[name]].strip()
            if cell == "":
                values[name].append(0.0)
                masks[name].append(False)
                continue
            value = _parse_count(cell, row_number, name)
            if value < 0:
                raise ValidationError(f"day {int(day)}: negative {name} count {value:g}")
            values[name].append(value)
            masks[name].append(True)
    if not days:
        raise SchemaError(f"{source}: no data rows")
    days_arr = np.asarray(days, dtype=np.int64)
    if np.any(np.diff(days_arr) <= 0):
        at = days_arr[np.flatnonzero(np.diff(days_arr) <= 0)[0] + 1]
        raise ValidationError(f"day {at}: days must be strictly increasing")
    counts = {n: np.asarray(values[n]) for n in SERIES}
    observed = {n: np.asarray(masks[n], dtype=bool) for n in SERIES}
    return ObservationSeries(days_arr, counts, observed)


def load_observations(path) -> ObservationSeries:
    """Observed daily counts from a headered CSV.

    Columns: ``day`` plus the six observed series.  Blank cells mark days on
    which a series was not recorded; nothing is imputed.
    """
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"observation file {path} does not exist")
    with path.open(newline="") as fh:
        return read_observations(fh, str(path))


def write_observations(path, obs: ObservationSeries) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(OBSERVATION_COLUMNS)
        for i, day in enumerate(obs.days):
            writer.writerow([int(day)] + [
                int(obs.counts[n][i]) if obs.observed[n][i] else "" for n in SERIES
            ])


# -- configuration --------------------------------------------------------------

@dataclass(frozen=True)
class PredictiveConfig:
    threshold: float = float(BED_CAPACITY)
    day: int = SUMMARY_DAY
    max_draws: Optional[int] = None
    seed: int = 0


@dataclass(frozen=True)
class EvidenceConfig:
    n_prior_draws: int = 100_000
    seed: int = 0
    sampled: tuple[str, ...] = DEFAULT_SAMPLED


@dataclass(frozen=True)
class StudyConfig:
    """Fully resolved run configuration.

    ``parameters`` holds the starting point of the sampler and the values of
    every rate that is not sampled.
    """

    model: ModelTag = ModelTag.M1
    horizon: int = HORIZON
    population: float = float(POPULATION)
    s2_fraction: float = 1 / 6
    initial: Mapping[str, float] = field(default_factory=dict)
    parameters: Optional[ParameterSet] = None
    vaccination_start: int = BASELINE_VACCINATION_DAY
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    scenarios: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    predictive: PredictiveConfig = field(default_factory=PredictiveConfig)
    evidence: EvidenceConfig = field(default_factory=EvidenceConfig)
    observations: Optional[str] = None
    warnings: tuple[str, ...] = ()

    def initial_state(self) -> StateVector:
        return StateVector.from_mapping(self.model, self.initial)

    def policy(self) -> VaccinationPolicy:
        return VaccinationPolicy(self.vaccination_start)

    def with_seed(self, seed: int) -> "StudyConfig":
        """Same config with the sampler, predictive and evidence seeds set to ``seed``."""
        return replace(self,
                       sampler=replace(self.sampler, seed=int(seed)),
                       predictive=replace(self.predictive, seed=int(seed)),
                       evidence=replace(self.evidence, seed=int(seed)))


_SECTIONS = {
    "model": {"model", "horizon"},
    "initial": {"population", "s2_fraction"} | set(COMPARTMENTS[ModelTag.M1])
    | set(COMPARTMENTS[ModelTag.M2]),
    "schedule": {f"{n}_breakpoints" for n in SCHEDULE_NAMES},
    "parameters": set(SCHEDULE_NAMES) | set(SCALAR_NAMES),
    "vaccination": {"start_day"},
    "sampler": {"n_draws", "n_tuning_chains", "tuning_length", "seed", "initial_scale",
                "acceptance_window", "sampled", "step"},
    "scenarios": {"ids"},
    "predictive": {"threshold", "day", "max_draws", "seed"},
    "evidence": {"n_prior_draws", "seed", "sampled"},
    "data": {"observations"},
}


def _floats(text: str, key: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.replace("\n", ",").split(",")]
    try:
        return tuple(float(p) for p in parts if p)
    except ValueError:
        raise ConfigError(f"{key}: expected a list of numbers, got {text!r}") from None


def _names(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.replace("\n", ",").split(",") if p.strip())


def _number(text: str, key: str, kind=float):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    if kind is int:
        if value != round(value):
            raise ConfigError(f"{key}: expected an integer, got {text!r}")
        return int(value)
    return value


def _schedule(name: str, breakpoints: Sequence[float], rates: Sequence[float],
              horizon: int) -> RateSchedule:
    if len(rates) != len(breakpoints) + 1:
        raise ValidationError(
            f"{name}: {len(rates)} rates given for {len(breakpoints)} breakpoints "
            f"(need {len(breakpoints) + 1})"
        )
    for b in breakpoints:
        if not 0 <= b <= horizon:
            raise ValidationError(f"{name}: breakpoint {b:g} outside [0, {horizon}]")
    try:
        return RateSchedule(tuple(breakpoints), tuple(rates))
    except ValidationError as exc:
        raise ValidationError(f"{name}: {exc}") from None


def parse_config(text: str, strict: bool = True, source: str = "<config>") -> StudyConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}".splitlines()[0]) from None

    for section in parser.sections():
        allowed = _SECTIONS.get(section)
        unknown = [section] if allowed is None else [k for k in parser[section] if k not in allowed]
        for key in unknown:
            where = f"section [{section}]" if allowed is None else f"key {key!r} in [{section}]"
            if strict:
                raise ConfigError(f"{source}: unknown {where}")
            log.warning("%s: ignoring unknown %s", source, where)

    def get(section, key, default=None, keep_empty=False):
        if parser.has_section(section) and key in parser[section]:
            value = parser[section][key].strip()
            return value if value != "" or keep_empty else default
        return default

    warnings = []
    model = ModelTag.parse(get("model", "model", "M1"))
    horizon = _number(get("model", "horizon", str(HORIZON)), "horizon", int)
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")

    # initial state: table defaults, then explicit compartments
    population = _number(get("initial", "population", str(POPULATION)), "population")
    s2_fraction = _number(get("initial", "s2_fraction", repr(1 / 6)), "s2_fraction")
    initial = table_initial_state(model, population, s2_fraction).as_dict()
    for name in list(initial):
        value = get("initial", name)
        if value is not None:
            initial[name] = _number(value, name)
    for name in set(_SECTIONS["initial"]) - set(initial) - {"population", "s2_fraction"}:
        if get("initial", name) is not None:
            raise ConfigError(f"compartment {name} does not exist in model {model.value}")
    state = StateVector.from_mapping(model, initial)

    # schedules and rates: Table 2 defaults, then explicit values
    breakpoints = {
        "alpha": DEFAULT_ALPHA_BREAKPOINTS,
        "gamma1": DEFAULT_GAMMA1_BREAKPOINTS,
        "phi": DEFAULT_PHI_BREAKPOINTS,
    }
    for name in SCHEDULE_NAMES:
        # an empty list is meaningful here: a single constant rate
        value = get("schedule", f"{name}_breakpoints", keep_empty=True)
        if value is not None:
            breakpoints[name] = _floats(value, f"{name}_breakpoints")
    table = table_parameters(model)
    kwargs = {}
    for name in SCHEDULE_NAMES:
        value = get("parameters", name)
        rates = _floats(value, name) if value is not None else getattr(table, name).rates
        kwargs[name] = _schedule(name, breakpoints[name], rates, horizon)
    for name in SCALAR_NAMES:
        value = get("parameters", name)
        kwargs[name] = _number(value, name) if value is not None else getattr(table, name)
    params = ParameterSet(**kwargs)
    params.check()
    if len(params.alpha) != EXPECTED_ALPHA_SEGMENTS:
        warnings.append(
            f"alpha has {len(params.alpha)} segments; eleven intervention periods "
            f"(ten change dates) are implied by the model definition, while the "
            f"published estimates list ten rates"
        )

    start_day = _number(get("vaccination", "start_day", str(BASELINE_VACCINATION_DAY)),
                        "start_day", int)

    defaults = SamplerConfig()
    window = get("sampler", "acceptance_window")
    sampler = SamplerConfig(
        n_draws=_number(get("sampler", "n_draws", str(defaults.n_draws)), "n_draws", int),
        n_tuning_chains=_number(get("sampler", "n_tuning_chains",
                                    str(defaults.n_tuning_chains)), "n_tuning_chains", int),
        tuning_length=_number(get("sampler", "tuning_length", str(defaults.tuning_length)),
                              "tuning_length", int),
        seed=_number(get("sampler", "seed", "0"), "seed", int),
        initial_scale=_number(get("sampler", "initial_scale", repr(defaults.initial_scale)),
                              "initial_scale"),
        acceptance_window=(_floats(window, "acceptance_window") if window
                           else defaults.acceptance_window),
        sampled=_names(get("sampler", "sampled", ",".join(defaults.sampled))),
        step=_number(get("sampler", "step", repr(defaults.step)), "step"),
    )
    if len(sampler.acceptance_window) != 2:
        raise ConfigError("acceptance_window needs exactly two numbers")
    sampler = replace(sampler, acceptance_window=tuple(sampler.acceptance_window))
    _check_sampled(sampler.sampled, params)

    scenarios = tuple(int(v) for v in _floats(get("scenarios", "ids", "1,2,3,4,5,6"), "ids"))
    for sid in scenarios:
        if not 1 <= sid <= 6:
            raise ValidationError(f"unknown scenario {sid}; expected 1-6")

    max_draws = get("predictive", "max_draws")
    predictive = PredictiveConfig(
        threshold=_number(get("predictive", "threshold", str(BED_CAPACITY)), "threshold"),
        day=_number(get("predictive", "day", str(SUMMARY_DAY)), "day", int),
        max_draws=None if max_draws is None else _number(max_draws, "max_draws", int),
        seed=_number(get("predictive", "seed", "0"), "seed", int),
    )
    if not 0 <= predictive.day <= horizon:
        raise ValidationError(f"predictive day {predictive.day} outside [0, {horizon}]")
    if predictive.threshold < 0:
        raise ValidationError("threshold must be >= 0")

    evidence = EvidenceConfig(
        n_prior_draws=_number(get("evidence", "n_prior_draws", "100000"), "n_prior_draws", int),
        seed=_number(get("evidence", "seed", "0"), "seed", int),
        sampled=_names(get("evidence", "sampled", ",".join(sampler.sampled))),
    )
    _check_sampled(evidence.sampled, params)

    for message in warnings:
        log.warning("%s: %s", source, message)
    return StudyConfig(
        model=model, horizon=horizon, population=population, s2_fraction=s2_fraction,
        initial=state.as_dict(), parameters=params, vaccination_start=start_day,
        sampler=sampler, scenarios=scenarios, predictive=predictive, evidence=evidence,
        observations=get("data", "observations"), warnings=tuple(warnings),
    )


def _check_sampled(sampled: Sequence[str], params: ParameterSet) -> None:
    flat = set(params.names())
    for name in sampled:
        if name not in PARAMETER_GROUPS and name not in flat:
            raise ConfigError(f"cannot sample unknown parameter {name!r}")


PARAMETER_GROUPS = set(SCHEDULE_NAMES) | set(SCALAR_NAMES)


def load_config(path=None, strict: bool = True) -> StudyConfig:
    """Resolved configuration from an INI-style file; ``None`` gives all defaults.

    Sections: ``model``, ``initial``, ``schedule``, ``parameters``,
    ``vaccination``, ``sampler``, ``scenarios``, ``predictive``, ``evidence``
    and ``data``.  In strict mode unknown sections or keys are errors.
    """
    if path is None:
        return parse_config("", strict)
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    config = parse_config(path.read_text(), strict, str(path))
    if config.observations and not os.path.isabs(config.observations):
        # relative data paths are taken relative to the config file
        config = replace(config, observations=str(path.parent / config.observations))
    return config


def _join(values: Iterable) -> str:
    return ", ".join(repr(float(v)) if not isinstance(v, str) else v for v in values)


def config_text(config: StudyConfig) -> str:
    """INI text that :func:`parse_config` resolves back to ``config``."""
    params = config.parameters
    out = io.StringIO()
    w = out.write
    w(f"[model]\nmodel = {config.model.value}\nhorizon = {config.horizon}\n\n")
    w(f"[initial]\npopulation = {config.population!r}\n"
      f"s2_fraction = {config.s2_fraction!r}\n")
    for name, value in config.initial.items():
        w(f"{name} = {float(value)!r}\n")
    w("\n[schedule]\n")
    for name in SCHEDULE_NAMES:
        w(f"{name}_breakpoints = {_join(getattr(params, name).breakpoints)}\n")
    w("\n[parameters]\n")
    for name in SCHEDULE_NAMES:
        w(f"{name} = {_join(getattr(params, name).rates)}\n")
    for name in SCALAR_NAMES:
        w(f"{name} = {getattr(params, name)!r}\n")
    w(f"\n[vaccination]\nstart_day = {config.vaccination_start}\n")
    s = config.sampler
    w(f"\n[sampler]\nn_draws = {s.n_draws}\nn_tuning_chains = {s.n_tuning_chains}\n"
      f"tuning_length = {s.tuning_length}\nseed = {s.seed}\n"
      f"initial_scale = {s.initial_scale!r}\n"
      f"acceptance_window = {_join(s.acceptance_window)}\n"
      f"sampled = {', '.join(s.sampled)}\nstep = {s.step!r}\n")
    w(f"\n[scenarios]\nids = {', '.join(str(i) for i in config.scenarios)}\n")
    p = config.predictive
    w(f"\n[predictive]\nthreshold = {p.threshold!r}\nday = {p.day}\n"
      f"max_draws = {'' if p.max_draws is None else p.max_draws}\nseed = {p.seed}\n")
    e = config.evidence
    w(f"\n[evidence]\nn_prior_draws = {e.n_prior_draws}\nseed = {e.seed}\n"
      f"sampled = {', '.join(e.sampled)}\n")
    w(f"\n[data]\nobservations = {config.observations or ''}\n")
    return out.getvalue()


def write_config(path, config: StudyConfig) -> None:
    Path(path).write_text(config_text(config))


# -- posterior draws --------------------------------------------------------------

def _write_matrix(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else
                              (str(v) if isinstance(v, (int, np.integer)) else fmt(v))
                              for v in row) + "\n")


def metadata_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_draws(path, draws: PosteriorDraws, model_tag, initial: StateVector,
                policy: VaccinationPolicy, extra: Optional[Mapping] = None) -> None:
    """Draw CSV (one row per draw) plus a JSON sidecar for exact replay."""
    names = draws.names
    _write_matrix(path, ["draw"] + names + ["log_posterior"],
                  ([i] + draws.values[i].tolist() + [float(draws.log_posterior[i])]
                   for i in range(len(draws))))
    template = draws.template
    meta = {
        "model": ModelTag.parse(model_tag).value,
        "n_draws": len(draws),
        "seed": draws.seed,
        "sampled": list(draws.sampled),
        "breakpoints": {n: list(getattr(template, n).breakpoints) for n in SCHEDULE_NAMES},
        "template": template.to_vector().tolist(),
        "initial": initial.as_dict(),
        "vaccination_start": policy.start_day,
        "acceptance_rates": draws.acceptance_rates,
        "proposal_scales": draws.proposal_scales,
        "tuning": draws.tuning,
    }
    if extra:
        meta.update(extra)
    metadata_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


@dataclass
class DrawsFile:
    draws: PosteriorDraws
    model: ModelTag
    initial: StateVector
    policy: VaccinationPolicy
    metadata: dict


def read_draws(path) -> DrawsFile:
    path = Path(path)
    meta_file = metadata_path(path)
    if not path.is_file():
        raise SchemaError(f"posterior draw file {path} does not exist")
    if not meta_file.is_file():
        raise SchemaError(f"metadata file {meta_file} for {path} does not exist")
    meta = json.loads(meta_file.read_text())
    model = ModelTag.parse(meta["model"])
    skeleton = ParameterSet(**{
        n: RateSchedule(tuple(meta["breakpoints"][n]),
                        (0.0,) * (len(meta["breakpoints"][n]) + 1))
        for n in SCHEDULE_NAMES
    }, **{n: 0.0 for n in SCALAR_NAMES})
    template = skeleton.from_vector(meta["template"])
    with path.open(newline="") as fh:
        header = fh.readline().strip().split(",")
        expected = ["draw"] + template.names() + ["log_posterior"]
        if header != expected:
            missing = [c for c in expected if c not in header]
            raise SchemaError(f"{path}: unexpected columns; missing {missing or 'none'}")
        try:
            table = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from None
    draws = PosteriorDraws(
        template=template, values=table[:, 1:-1], log_posterior=table[:, -1],
        sampled=tuple(meta["sampled"]), acceptance_rates=meta.get("acceptance_rates", {}),
        proposal_scales=meta.get("proposal_scales", {}), tuning=meta.get("tuning", []),
        seed=meta.get("seed"),
    )
    initial = StateVector.from_mapping(model, meta["initial"])
    return DrawsFile(draws, model, initial, VaccinationPolicy(meta["vaccination_start"]), meta)


def write_trace(path, draws: PosteriorDraws, tuning_length: int) -> None:
    """Every sweep of the tuning chains and the retained chain."""
    names = draws.names

    def rows():
        if draws.tuning_values is not None:
            for i, (v, lp) in enumerate(zip(draws.tuning_values, draws.tuning_log_posterior)):
                chain, it = divmod(i, max(tuning_length, 1))
                yield ["tuning", chain, it] + v.tolist() + [float(lp)]
        for i in range(len(draws)):
            yield ["sampling", 0, i] + draws.values[i].tolist() + [float(draws.log_posterior[i])]

    _write_matrix(path, ["phase", "chain", "iteration"] + names + ["log_posterior"], rows())


def write_parameter_summary(path, draws: PosteriorDraws,
                            pseudo_r2: Optional[float] = None) -> None:
    rows = [[r["parameter"], r["mean"], r["q0.025"], r["q0.975"]] for r in draws.summary()]
    if pseudo_r2 is not None:
        rows.append(["pseudo_r2", pseudo_r2, "", ""])
    _write_matrix(path, ["parameter", "mean", "q0.025", "q0.975"], rows)


def write_fit_bands(path, bands: Mapping[str, np.ndarray], probs: Sequence[float],
                    obs: Optional[ObservationSeries] = None) -> None:
    """Long-format fitted quantile bands: series, day, observed, one column per quantile."""
    observed = {}
    if obs is not None:
        for name in SERIES:
            observed[name] = {int(d): int(c) for d, c, m in
                              zip(obs.days, obs.counts[name], obs.observed[name]) if m}

    def rows():
        for name in SERIES:
            band = bands[name]
            for day in range(band.shape[1]):
                seen = observed.get(name, {}).get(day, "")
                yield [name, day, str(seen)] + band[:, day].tolist()

    _write_matrix(path, ["series", "day", "observed"] + [f"q{p:g}" for p in probs], rows())


# -- predictive -----------------------------------------------------------------

PREDICTIVE_COLUMNS = ("draw", "day", "overload_days", "overload_days_mean",
                      "cumulative_infected", "cumulative_reinfected", "cumulative_deaths")
HELLINGER_SERIES = ("cumulative_infected", "cumulative_reinfected", "cumulative_deaths")


def write_predictive(path, summary: ScenarioSummary) -> None:
    _write_matrix(path, PREDICTIVE_COLUMNS, (
        [int(d), summary.day, int(o), int(om), int(i), int(r), int(x)]
        for d, o, om, i, r, x in zip(summary.draw_index, summary.overload_sampled,
                                     summary.overload_mean, summary.infected,
                                     summary.reinfected, summary.deaths)
    ))


def read_predictive(path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"predictive file {path} does not exist")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        for column in HELLINGER_SERIES:
            if column not in header:
                raise SchemaError(f"{path}: missing column {column!r}")
        rows = []
        for row_number, row in enumerate(reader, start=2):
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ParseError(f"{path}: row {row_number} is not numeric") from None
    table = np.asarray(rows, dtype=float).reshape(-1, len(header))
    return {name: table[:, i] for i, name in enumerate(header)}


def write_overload_table(path, rows: Sequence[Mapping]) -> None:
    header = ["scenario", "label", "threshold", "day", "n_draws", "n_failed",
              "overload_min", "overload_max", "overload_mean_min", "overload_mean_max",
              "median_cumulative_infected", "median_cumulative_reinfected",
              "median_cumulative_deaths"]
    _write_matrix(path, header, ([r[k] for k in header] for r in rows))


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, [])
        return header, [row for row in reader]


# -- densities, distances, evidence ------------------------------------------------

def write_density(path, density: SmoothedDensity) -> None:
    _write_matrix(path, ["x", "density"], zip(density.grid.tolist(), density.values.tolist()))


def write_matrix(path, labels: Sequence[str], matrix: np.ndarray) -> None:
    _write_matrix(path, ["label"] + list(labels),
                  ([label] + matrix[i].tolist() for i, label in enumerate(labels)))


def write_evidence(path, labels: Sequence[str], estimates: Sequence[EvidenceEstimate],
                   bf: Optional[float], verdict: str) -> None:
    """Evidence CSV plus a short plain-text report next to it."""
    rows = [[label, e.log_marginal, e.n_draws, e.n_zero, "" if e.seed is None else e.seed]
            for label, e in zip(labels, estimates)]
    _write_matrix(path, ["model", "log_marginal_likelihood", "n_prior_draws",
                         "n_zero_likelihood", "seed"], rows)
    lines = [f"{label}: log marginal likelihood {fmt(e.log_marginal)} "
             f"({e.n_draws} prior draws, {e.n_zero} with zero likelihood)"
             for label, e in zip(labels, estimates)]
    if bf is not None:
        log_bf = estimates[0].log_marginal - estimates[1].log_marginal
        lines.append(f"Bayes factor {labels[0]} / {labels[1]}: {fmt(bf)} "
                     f"(log Bayes factor {fmt(log_bf)})")
        lines.append(f"Interpretation: {verdict}")
    Path(path).with_suffix(".txt").write_text("\n".join(lines) + "\n")
