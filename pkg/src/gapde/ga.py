"""Genetic search over genomes with an L0-penalized least-squares fitness.

Each generation every parent is crossed twice (two independent random
pairings), every child is mutated, the 2P children are ranked by

    fitness = mse + eps * (total rhs gene count)

and the best P become the next parents.  In the default "relative" mode the
mse is expressed in units of the target column's variance, which keeps u_t
and u_tt candidates comparable.  All randomness is drawn from
generators seeded by ``(seed, generation, stream, index)`` so results do not
depend on evaluation order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .genome import GenePool, Genome, canonicalize, random_genome, render, to_text
from .linear_system import ModuleColumnCache, build_system, target_column
from .regression import FitResult, least_squares

log = logging.getLogger(__name__)

SENTINEL_FITNESS = math.inf

_STREAM_INIT, _STREAM_PAIRING, _STREAM_CROSS, _STREAM_MUTATE = 0, 1, 2, 3


def _rng(seed, generation, stream, index=0):
    return np.random.default_rng([int(seed), int(generation), stream, int(index)])


@dataclass
class GaConfig:
    population_size: int = 200
    max_generations: int = 100
    crossover_rate: float = 0.8
    gene_mutation_rate: float = 0.1
    add_module_rate: float = 0.3
    delete_module_rate: float = 0.3
    lhs_mutation_rate: float = 0.1
    # "relative": mse is divided by the variance of each genome's target column
    epsilon: float = 1e-2
    epsilon_mode: str = "relative"
    elitism: bool = False
    pool: GenePool = field(default_factory=GenePool)
    seed: int = 0

    def validate(self):
        for name in ("crossover_rate", "gene_mutation_rate", "add_module_rate",
                     "delete_module_rate", "lhs_mutation_rate"):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {value}")
        if self.population_size < 4 or self.population_size % 2:
            raise ConfigurationError("population size must be even and >= 4")
        if self.max_generations < 0:
            raise ConfigurationError("max_generations must be >= 0")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")
        if self.epsilon_mode not in ("relative", "absolute"):
            raise ConfigurationError(f"unknown epsilon mode {self.epsilon_mode!r}")
        self.pool.validate()


@dataclass
class FitnessRecord:
    """``fitness = mse / mse_scale + epsilon * genome.length``.

    ``mse_scale`` is the variance of the genome's target column in relative
    mode and 1 in absolute mode.
    """

    genome: Genome
    fit: FitResult
    fitness: float
    epsilon: float
    mse_scale: float = 1.0

    @property
    def mse(self):
        return self.fit.mse

    @property
    def scaled_mse(self):
        return self.fit.mse / self.mse_scale

    @property
    def coeffs(self):
        return self.fit.coeffs

    def equation(self):
        return render(self.genome, self.fit.coeffs)


@dataclass
class TraceEntry:
    generation: int
    genome: Genome
    fitness: float
    mse: float
    coeffs: np.ndarray

    def line(self):
        coeffs = ",".join(f"{c:.6g}" for c in self.coeffs)
        return f"{self.generation}\t{to_text(self.genome)}\t{self.fitness:.6e}\t{self.mse:.6e}\t{coeffs}"


@dataclass
class DiscoveryResult:
    best: FitnessRecord
    trace: list
    convergence_generation: int

    def trace_log(self):
        header = "generation\tgenome\tfitness\tmse\tcoeffs"
        return "\n".join([header] + [e.line() for e in self.trace]) + "\n"


# -- operators --

def swap_modules(a: Genome, b: Genome, i: int, j: int):
    """Exchange module ``i`` of ``a`` with module ``j`` of ``b`` (no canonicalization)."""
    ra, rb = list(a.rhs), list(b.rhs)
    ra[i], rb[j] = rb[j], ra[i]
    return Genome(a.lhs, tuple(ra)), Genome(b.lhs, tuple(rb))


def crossover(a: Genome, b: Genome, rng, rate: float = 0.8):
    """With probability ``rate`` swap one uniformly chosen rhs module of each parent."""
    if rng.random() >= rate:
        return a, b
    i = int(rng.integers(a.n_modules))
    j = int(rng.integers(b.n_modules))
    ca, cb = swap_modules(a, b, i, j)
    return canonicalize(ca), canonicalize(cb)


def mutate_gene(gene: int, max_order: int, rng) -> int:
    if gene > 0:
        return gene - 1
    return int(rng.integers(1, max_order + 1))


def order_mutation(g: Genome, pool: GenePool, rate: float, rng) -> Genome:
    """Each rhs gene independently mutates with probability ``rate``."""
    modules = tuple(
        tuple(mutate_gene(x, pool.max_spatial_order, rng) if rng.random() < rate else x
              for x in module)
        for module in g.rhs
    )
    return Genome(g.lhs, modules)


def add_module(g: Genome, module) -> Genome:
    return Genome(g.lhs, g.rhs + (tuple(module),))


def delete_module(g: Genome, index: int) -> Genome:
    """Remove one module; a single-module genome is returned unchanged."""
    if g.n_modules == 1:
        return g
    return Genome(g.lhs, g.rhs[:index] + g.rhs[index + 1:])


def mutate(g: Genome, cfg: GaConfig, rng) -> Genome:
    """Order, add-module and delete-module mutation on the rhs; order mutation on the lhs."""
    pool = cfg.pool
    g = order_mutation(g, pool, cfg.gene_mutation_rate, rng)
    if rng.random() < cfg.add_module_rate:
        g = add_module(g, pool.random_module(rng))
    if rng.random() < cfg.delete_module_rate and g.n_modules > 1:
        g = delete_module(g, int(rng.integers(g.n_modules)))
    lhs = g.lhs
    if rng.random() < cfg.lhs_mutation_rate and pool.max_temporal_order > 1:
        choices = [k for k in range(1, pool.max_temporal_order + 1) if k != lhs]
        lhs = int(rng.choice(choices))
    return Genome.make(lhs, g.rhs)


# -- fitness --

class FitnessEvaluator:
    """Fitness with memoization; the dataset is treated as immutable."""

    def __init__(self, data, cfg: GaConfig):
        self.data = data
        self.cfg = cfg
        self.columns = ModuleColumnCache(data.spatial)
        self._records = {}
        self._scales = {}

    def mse_scale(self, lhs: int) -> float:
        if self.cfg.epsilon_mode == "absolute":
            return 1.0
        if lhs not in self._scales:
            var = float(np.var(target_column(self.data, lhs)))
            self._scales[lhs] = var if var > 0 else 1.0
        return self._scales[lhs]

    def __call__(self, g: Genome) -> FitnessRecord:
        rec = self._records.get(g)
        if rec is None:
            rec = evaluate_fitness(g, self.data, self.cfg.epsilon,
                                   self.mse_scale(g.lhs), self.columns)
            self._records[g] = rec
        return rec

    def __len__(self):
        return len(self._records)


def evaluate_fitness(g: Genome, data, epsilon: float, mse_scale: float = 1.0,
                     cache=None) -> FitnessRecord:
    sys = build_system(g, data, cache)
    fit = least_squares(sys)
    if fit.condition_flag or not math.isfinite(fit.mse):
        value = SENTINEL_FITNESS
    else:
        value = fit.mse / mse_scale + epsilon * g.length
    return FitnessRecord(g, fit, value, epsilon, mse_scale)


def fitness(g: Genome, data, cfg: GaConfig) -> FitnessRecord:
    """Fitness of one genome under ``cfg``'s epsilon rule."""
    return FitnessEvaluator(data, cfg)(g)


def _rank_key(rec: FitnessRecord):
    return (rec.fitness, rec.genome.length, to_text(rec.genome))


# -- evolution --

def evolve(data, cfg: GaConfig, callback=None) -> DiscoveryResult:
    cfg.validate()
    if len(data) == 0:
        raise ConfigurationError("meta-dataset is empty")
    evaluator = FitnessEvaluator(data, cfg)
    pop_size = cfg.population_size
    parents = [evaluator(random_genome(cfg.pool, _rng(cfg.seed, 0, _STREAM_INIT, i)))
               for i in range(pop_size)]
    parents.sort(key=_rank_key)
    trace = [_entry(0, parents[0])]
    best = parents[0]
    if callback:
        callback(trace[-1])

    for gen in range(1, cfg.max_generations + 1):
        pair_rng = _rng(cfg.seed, gen, _STREAM_PAIRING)
        children = []
        pair_index = 0
        for _ in range(2):
            perm = pair_rng.permutation(pop_size)
            for k in range(0, pop_size, 2):
                a = parents[perm[k]].genome
                b = parents[perm[k + 1]].genome
                ca, cb = crossover(a, b, _rng(cfg.seed, gen, _STREAM_CROSS, pair_index),
                                   cfg.crossover_rate)
                children.extend([ca, cb])
                pair_index += 1
        children = [mutate(c, cfg, _rng(cfg.seed, gen, _STREAM_MUTATE, idx))
                    for idx, c in enumerate(children)]
        pool = [evaluator(c) for c in children]
        if cfg.elitism:
            pool.append(parents[0])
        pool.sort(key=_rank_key)
        parents = pool[:pop_size]
        trace.append(_entry(gen, parents[0]))
        if _rank_key(parents[0]) < _rank_key(best):
            best = parents[0]
        if callback:
            callback(trace[-1])

    return DiscoveryResult(best, trace, convergence_generation(trace))


def _entry(gen, rec):
    return TraceEntry(gen, rec.genome, rec.fitness, rec.mse, np.array(rec.coeffs, copy=True))


def convergence_generation(trace) -> int:
    """First generation from which the per-generation best genome never changes."""
    if not trace:
        return -1
    genome = trace[-1].genome
    gen = trace[-1].generation
    for entry in reversed(trace):
        if entry.genome != genome:
            break
        gen = entry.generation
    return gen
