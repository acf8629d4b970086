"""End-to-end discovery runs: solve, perturb, sample, train, meta-data, search.

Configurations are plain JSON documents with one section per stage.  Named
presets bundle the settings of each benchmark problem at two scales:
``<problem>-paper`` runs at full scale (network sizes, sample counts, grids and
GA population), ``<problem>-desk`` shrinks them so a run takes a couple of
minutes on one CPU core.
"""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, GapdeError, StageError
from .ga import GaConfig, evolve
from .genome import GenePool, Genome, from_text, to_text
from .regression import FixedLibrary, stridge_search
from .linear_system import target_column
from .solvers import Field, ProblemSpec, add_noise, sample_training_data, solve_reference_problem
from .surrogate import MetaGridSpec, SurrogateNet, TrainConfig, generate_meta_data, train

log = logging.getLogger(__name__)

# canonical true genomes and coefficients in canonical module order
TRUTH = {
    "kdv": lambda c, sign: ("[1],{[0,1],[3]}", [-1.0, sign * c]),
    "burgers": lambda c, sign: ("[1],{[0,1],[2]}", [-1.0, c]),
    "wave": lambda c, sign: ("[2],{[2]}", [c]),
    "chaffee_infante": lambda c, sign: ("[1],{[0],[0,0,0],[2]}", [-c, c, 1.0]),
}


@dataclass
class NetSpec:
    hidden: list = field(default_factory=lambda: [30, 30, 30, 30])
    activation: str = "sin"


@dataclass
class BaselineSpec:
    library: str = "chaffee16"
    l0_penalty: float = 1e-2
    ridge_lambda: float | None = None
    max_iters: int = 10


@dataclass
class ExperimentConfig:
    name: str = "custom"
    problem: ProblemSpec = field(default_factory=lambda: ProblemSpec("burgers"))
    noise: float = 0.0
    n_samples: int = 2000
    net: NetSpec = field(default_factory=NetSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    meta_grid: MetaGridSpec = field(default_factory=lambda: MetaGridSpec(-8, 8, 160, 0, 9, 90, False, False))
    ga: GaConfig = field(default_factory=GaConfig)
    baseline: BaselineSpec | None = None
    run_ga: bool = True
    seed: int = 0
    out_dir: str | None = None
    cache_dir: str | None = None

    def validate(self):
        if self.noise < 0:
            raise ConfigurationError("noise level must be non-negative")
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be >= 1")
        self.problem.validate()
        self.train.validate()
        self.ga.validate()
        self.meta_grid.axes()

    def truth(self):
        spec = self.problem.resolved()
        text, coeffs = TRUTH[spec.kind](spec.coefficient, spec.kdv_sign)
        return from_text(text), np.array(coeffs)

    def to_dict(self):
        d = dataclasses.asdict(self)
        return d

    @classmethod
    def from_dict(cls, d):
        d = copy.deepcopy(d)
        ga = d.get("ga", {})
        pool = GenePool(**ga.pop("pool", {}))
        baseline = d.get("baseline")
        return cls(
            name=d.get("name", "custom"),
            problem=ProblemSpec(**d["problem"]),
            noise=d.get("noise", 0.0),
            n_samples=d.get("n_samples", 2000),
            net=NetSpec(**d.get("net", {})),
            train=TrainConfig(**d.get("train", {})),
            meta_grid=MetaGridSpec(**d["meta_grid"]),
            ga=GaConfig(pool=pool, **ga),
            baseline=BaselineSpec(**baseline) if baseline else None,
            run_ga=d.get("run_ga", True),
            seed=d.get("seed", 0),
            out_dir=d.get("out_dir"),
            cache_dir=d.get("cache_dir"),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def derive_seed(master: int, stage: str) -> int:
    """Stable 32-bit seed for one pipeline stage."""
    digest = hashlib.sha256(f"{int(master)}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


# -- presets --

_DESK_TRAIN = dict(learning_rate=3e-3, max_epochs=300, batch_size=512, patience=2000,
                   lr_decay=0.99, lbfgs_iters=1000)
_DESK_TRAIN_TANH = dict(learning_rate=3e-3, max_epochs=2000, batch_size=256, patience=2000,
                        lr_decay=0.998, lbfgs_iters=1000)
_FULL_TRAIN = dict(learning_rate=1e-3, max_epochs=30000, batch_size=256, patience=500)

_PROBLEMS = {
    "kdv": dict(
        n_samples=30000, desk_samples=10000,
        full_net=([50] * 5, "sin"),
        full_grid=MetaGridSpec(-0.5, 0.5, 1000, 0.0, 1.0, 200, False, False),
        desk_grid=MetaGridSpec(-0.5, 0.5, 100, 0.0, 1.0, 50, False, False),
    ),
    "wave": dict(
        n_samples=10000, desk_samples=10000,
        full_net=([50] * 5, "sin"),
        full_grid=MetaGridSpec(0.0, 2.0, 400, 0.0, 5.0, 400),
        desk_grid=MetaGridSpec(0.0, 2.0, 100, 0.0, 5.0, 100),
    ),
    "burgers": dict(
        n_samples=2000, desk_samples=2000,
        full_net=([20] * 9, "tanh"),
        full_grid=MetaGridSpec(-8.0, 8.0, 320, 0.0, 9.0, 180, False, False),
        desk_grid=MetaGridSpec(-8.0, 8.0, 160, 0.0, 9.0, 90, False, False),
    ),
    "chaffee_infante": dict(
        n_samples=10000, desk_samples=10000,
        full_net=([50] * 5, "sin"),
        full_grid=MetaGridSpec(0.3, 2.0, 400, 0.2, 0.4, 400),
        desk_grid=MetaGridSpec(0.3, 2.0, 100, 0.2, 0.4, 100),
    ),
}

# missing-gene variants: (lhs options, rhs options, max spatial order)
_MISSING = {
    "kdv": ((1, 2), (0, 1, 2), 4),
    "wave": ((1,), (0, 1, 2, 3), 3),
    "burgers": ((1, 2), (0, 2), 3),
}

_ALIASES = {"chaffee-infante": "chaffee_infante", "ci": "chaffee_infante"}


def preset_names():
    names = []
    for kind in _PROBLEMS:
        label = kind.replace("_", "-")
        names += [f"{label}-paper", f"{label}-desk"]
        if kind in _MISSING:
            names += [f"{label}-missing-paper", f"{label}-missing-desk"]
    return names


def preset(name: str) -> ExperimentConfig:
    parts = name.split("-")
    scale = parts[-1]
    missing = len(parts) > 2 and parts[-2] == "missing"
    label = "-".join(parts[:-2] if missing else parts[:-1])
    kind = _ALIASES.get(label, label.replace("-", "_"))
    if kind not in _PROBLEMS or scale not in ("paper", "desk") or (missing and kind not in _MISSING):
        raise ConfigurationError(f"unknown preset {name!r}; choose from {preset_names()}")
    info = _PROBLEMS[kind]
    hidden, act = info["full_net"]
    if scale == "paper":
        net = NetSpec(hidden, act)
        train_cfg = TrainConfig(**_FULL_TRAIN)
        grid = info["full_grid"]
        n_samples = info["n_samples"]
        ga = GaConfig(population_size=200, max_generations=100, elitism=True)
    else:
        net = NetSpec([30] * 4, act)
        train_cfg = TrainConfig(**(_DESK_TRAIN_TANH if act == "tanh" else _DESK_TRAIN))
        grid = info["desk_grid"]
        n_samples = info["desk_samples"]
        ga = GaConfig(population_size=100, max_generations=50, elitism=True)
    if missing:
        lhs, rhs, max_order = _MISSING[kind]
        ga.pool = GenePool(lhs_options=lhs, rhs_options=rhs, max_spatial_order=max_order)
        ga.max_generations = 100
    baseline = BaselineSpec("chaffee16") if kind == "chaffee_infante" else (
        BaselineSpec("burgers12") if kind == "burgers" else None)
    return ExperimentConfig(
        name=name, problem=ProblemSpec(kind), n_samples=n_samples, net=net,
        train=train_cfg, meta_grid=dataclasses.replace(grid), ga=ga, baseline=baseline,
    )


# -- reports --

@dataclass
class Report:
    name: str
    seed: int
    noise: float
    n_samples: int
    equation: str | None = None
    genome: str | None = None
    coefficients: list | None = None
    fitness: float | None = None
    convergence_generation: int | None = None
    trace_summary: list = field(default_factory=list)
    truth_genome: str | None = None
    truth_coefficients: list | None = None
    structure_match: bool | None = None
    relative_errors: list | None = None
    baseline: dict | None = None
    timings: dict = field(default_factory=dict)
    error: str | None = None

    def to_dict(self, include_timings=True):
        d = dataclasses.asdict(self)
        if not include_timings:
            d.pop("timings")
        return _json_safe(d)

    def to_json(self, include_timings=True):
        return json.dumps(self.to_dict(include_timings), indent=2, sort_keys=True)

    def to_text(self):
        lines = [f"experiment: {self.name} (seed {self.seed}, noise {self.noise}, "
                 f"{self.n_samples} samples)"]
        if self.error:
            lines.append(f"error: {self.error}")
        if self.equation:
            lines.append(f"discovered: {self.equation}")
            lines.append(f"genome:     {self.genome}")
            lines.append(f"truth:      {self.truth_genome}  match={self.structure_match}")
            if self.relative_errors is not None:
                errs = ", ".join(f"{e:.2%}" for e in self.relative_errors)
                lines.append(f"coefficient relative errors: {errs}")
            lines.append(f"converged at generation {self.convergence_generation}")
            for gen, genome, fit in self.trace_summary:
                lines.append(f"  gen {gen:4d}  {genome}  fitness={fit:.6g}")
        if self.baseline:
            lines.append(f"baseline ({self.baseline['library']}): {self.baseline['equation']}"
                         f"  support match={self.baseline['support_match']}")
        if self.timings:
            lines.append("timings: " + ", ".join(f"{k}={v:.1f}s" for k, v in self.timings.items()))
        return "\n".join(lines) + "\n"


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if math.isfinite(value) else str(value)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    return obj


def relative_errors(found, truth):
    truth = np.asarray(truth, dtype=float)
    return (np.abs(np.asarray(found) - truth) / np.abs(truth)).tolist()


# -- pipeline --

@dataclass
class RunArtifacts:
    """Everything a run produced, kept in memory for callers that want more than the report."""

    field: Field | None = None
    samples: np.ndarray | None = None
    net: SurrogateNet | None = None
    train_result: object = None
    meta: object = None
    discovery: object = None
    baseline_fit: object = None


class _Stage:
    def __init__(self, name, timings):
        self.name = name
        self.timings = timings

    def __enter__(self):
        self.start = time.perf_counter()
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        self.timings[self.name] = time.perf_counter() - self.start
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def solve_cached(spec: ProblemSpec, cache_dir=None) -> Field:
    if cache_dir is None:
        return solve_reference_problem(spec)
    key = hashlib.sha256(json.dumps(spec.resolved().to_dict(), sort_keys=True).encode())
    path = Path(cache_dir) / f"field-{key.hexdigest()[:16]}.bin"
    if path.exists():
        return Field.load(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    result = solve_reference_problem(spec)
    tmp = path.with_suffix(".tmp")
    result.save(tmp)
    tmp.replace(path)
    return result


def build_surrogate(cfg: ExperimentConfig, data: Field) -> SurrogateNet:
    return SurrogateNet.create(
        cfg.net.hidden, cfg.net.activation, seed=derive_seed(cfg.seed, "init"),
        x_range=(data.x.min(), data.x.max()), t_range=(data.t.min(), data.t.max()),
        u_shift=float(data.values.mean()), u_scale=float(data.values.std()) or 1.0,
    )


def run_experiment(cfg: ExperimentConfig, artifacts: RunArtifacts | None = None) -> Report:
    """Run the full pipeline; raises :class:`StageError` naming the failing stage.

    A net already present in ``artifacts`` is used as is and training is
    skipped.  Artifacts written before a failure are left in ``out_dir``.
    """
    cfg.validate()
    art = artifacts if artifacts is not None else RunArtifacts()
    out = Path(cfg.out_dir) if cfg.out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(cfg.to_json())
    truth_genome, truth_coeffs = cfg.truth()
    report = Report(cfg.name, cfg.seed, cfg.noise, cfg.n_samples,
                    truth_genome=to_text(truth_genome),
                    truth_coefficients=truth_coeffs.tolist())
    timings = report.timings

    with _Stage("solve", timings):
        clean = solve_cached(cfg.problem, cfg.cache_dir)
        if out:
            clean.save(out / "field.bin")
    with _Stage("noise", timings):
        noisy = add_noise(clean, cfg.noise, derive_seed(cfg.seed, "noise"))
    with _Stage("sample", timings):
        art.samples = sample_training_data(noisy, cfg.n_samples, derive_seed(cfg.seed, "sample"))
        if out:
            np.save(out / "samples.npy", art.samples)
    art.field = noisy
    with _Stage("train", timings):
        if art.net is None:
            net = build_surrogate(cfg, noisy)
            train_cfg = dataclasses.replace(cfg.train, seed=derive_seed(cfg.seed, "train"))
            art.train_result = train(net, art.samples, train_cfg)
            art.net = art.train_result.net
        if out:
            art.net.save(out / "net.json")
    with _Stage("meta", timings):
        art.meta = generate_meta_data(art.net, cfg.meta_grid)

    if cfg.run_ga:
        with _Stage("discover", timings):
            ga_cfg = dataclasses.replace(cfg.ga, seed=derive_seed(cfg.seed, "ga"))
            result = evolve(art.meta, ga_cfg)
            art.discovery = result
        _fill_discovery(report, result, truth_genome, truth_coeffs)
        if out:
            (out / "trace.log").write_text(result.trace_log())

    if cfg.baseline is not None:
        with _Stage("baseline", timings):
            report.baseline = run_baseline(cfg, art.meta, truth_genome, art)

    if out:
        (out / "report.json").write_text(report.to_json())
        (out / "report.txt").write_text(report.to_text())
    return report


def _fill_discovery(report, result, truth_genome, truth_coeffs):
    best = result.best
    report.equation = best.equation()
    report.genome = to_text(best.genome)
    report.coefficients = np.asarray(best.coeffs).tolist()
    report.fitness = best.fitness
    report.convergence_generation = result.convergence_generation
    summary, last = [], None
    for entry in result.trace:
        if entry.genome != last:
            summary.append([entry.generation, to_text(entry.genome), entry.fitness])
            last = entry.genome
    report.trace_summary = summary
    report.structure_match = best.genome == truth_genome
    if report.structure_match:
        report.relative_errors = relative_errors(best.coeffs, truth_coeffs)


def run_baseline(cfg: ExperimentConfig, meta, truth_genome: Genome, art=None) -> dict:
    """STRidge over a fixed library with the truth's lhs as target."""
    spec = cfg.baseline
    library = FixedLibrary.named(spec.library)
    theta = library.columns(meta)
    target = target_column(meta, truth_genome.lhs)
    fit = stridge_search(theta, target, l0_penalty=spec.l0_penalty,
                         ridge_lambda=spec.ridge_lambda, max_iters=spec.max_iters,
                         seed=derive_seed(cfg.seed, "baseline"))
    if art is not None:
        art.baseline_fit = fit
    support = [library.terms[i] for i in fit.support]
    names = library.names()
    terms = [f"{fit.coeffs[i]:+.4g}*{names[i]}" for i in fit.support]
    equation = f"u_{'t' * truth_genome.lhs} = " + (" ".join(terms) if terms else "0")
    return {
        "library": spec.library,
        "support": [names[i] for i in fit.support],
        "coefficients": [float(fit.coeffs[i]) for i in fit.support],
        "equation": equation,
        "support_match": sorted(support) == sorted(truth_genome.rhs),
        "mse": fit.mse,
    }


def sweep_seed(master: int, index: int) -> int:
    return int(master) + 1000 * int(index)


def run_sweep(base: ExperimentConfig, axis: str, values) -> list:
    """One run per value; failures are recorded in the row's ``error`` field."""
    if axis not in ("noise", "data_volume"):
        raise ConfigurationError(f"sweep axis must be 'noise' or 'data_volume', got {axis!r}")
    values = list(values)
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    reports = []
    for i, value in enumerate(values):
        cfg = copy.deepcopy(base)
        cfg.seed = sweep_seed(base.seed, i)
        if axis == "noise":
            cfg.noise = float(value)
        else:
            cfg.n_samples = int(value)
        if base.out_dir:
            cfg.out_dir = str(Path(base.out_dir) / f"{axis}-{i:02d}")
        try:
            reports.append(run_experiment(cfg))
        except (GapdeError, ValueError, ArithmeticError) as exc:
            log.warning("sweep row %d (%s=%s) failed: %s", i, axis, value, exc)
            reports.append(Report(cfg.name, cfg.seed, cfg.noise, cfg.n_samples,
                                  error=str(exc)))
    if base.out_dir:
        Path(base.out_dir).mkdir(parents=True, exist_ok=True)
        (Path(base.out_dir) / "sweep.txt").write_text(comparison_table(reports, axis))
    return reports


def comparison_table(reports, axis="noise") -> str:
    head = "noise" if axis == "noise" else "samples"
    rows = [f"{head:>8}  match  {'discovered':<50}  baseline"]
    for r in reports:
        key = f"{r.noise:g}" if axis == "noise" else str(r.n_samples)
        eq = r.error and f"ERROR: {r.error}" or (r.equation or "-")
        base = r.baseline["equation"] if r.baseline else "-"
        rows.append(f"{key:>8}  {str(r.structure_match):5}  {eq:<50}  {base}")
    return "\n".join(rows) + "\n"
