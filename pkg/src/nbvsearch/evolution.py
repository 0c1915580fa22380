"""Real-valued evolutionary search over bounded camera poses.

The generational cycle is tournament selection, pairwise two-point crossover
and Gaussian mutation, followed by clamping to the bounds. The population is
not elitist; the best individual ever evaluated is tracked separately.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .exceptions import UnevaluatedFitnessError

GENES = ("x", "y", "z", "pitch", "yaw")


@dataclass(frozen=True, eq=False)
class PoseBounds:
    """Per-gene lower/upper limits for ``(x, y, z, pitch, yaw)``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64).reshape(-1).copy()
        hi = np.asarray(self.upper, dtype=np.float64).reshape(-1).copy()
        if lo.shape != hi.shape:
            raise ValueError("lower and upper bounds differ in length")
        if np.any(lo > hi) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("bounds must be finite with lower <= upper")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def around_extent(cls, width: float, depth: float, margin: float = 5.0,
                      z_range: Tuple[float, float] = (2.0, 30.0),
                      pitch_range: Tuple[float, float] = (-math.pi / 2, 0.0),
                      yaw_range: Tuple[float, float] = (-math.pi, math.pi),
                      ground: float = 0.0) -> "PoseBounds":
        """Bounds over a ``width x depth`` scene grown by ``margin`` in x and y."""
        if z_range[0] <= ground:
            raise ValueError("minimum camera height must be above the ground")
        return cls([-margin, -margin, z_range[0], pitch_range[0], yaw_range[0]],
                   [width + margin, depth + margin, z_range[1], pitch_range[1], yaw_range[1]])

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def ndim(self) -> int:
        return len(self.lower)

    def clip(self, genome) -> np.ndarray:
        return np.clip(genome, self.lower, self.upper)

    def contains(self, genome) -> bool:
        g = np.asarray(genome)
        return bool(np.all(g >= self.lower) and np.all(g <= self.upper))


@dataclass
class EvolutionConfig:
    population: int = 50
    generations: int = 20
    crossover_rate: float = 0.8
    mutation_rate: float = 0.2
    tournament_size: int = 3
    sigma_fraction: float = 0.05
    sigma: Optional[float] = None
    gene_rate: float = 0.2
    seed: Optional[int] = None

    def __post_init__(self):
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if self.generations < 0:
            raise ValueError("generations must be non-negative")
        for name in ("crossover_rate", "mutation_rate", "gene_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be at least 1")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "EvolutionConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown evolution config key(s): {sorted(unknown)}")
        return cls(**dict(data))

    def to_dict(self) -> dict:
        return asdict(self)

    def mutation_sigma(self, bounds: PoseBounds) -> np.ndarray:
        """Absolute per-gene standard deviation."""
        if self.sigma is not None:
            return np.full(bounds.ndim, float(self.sigma))
        return self.sigma_fraction * bounds.span


@dataclass
class Individual:
    genome: np.ndarray
    fitness: Optional[float] = None

    def copy(self) -> "Individual":
        return Individual(self.genome.copy(), self.fitness)


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    max_fitness: float
    mean_fitness: float
    best_ever: float


@dataclass
class EvolutionResult:
    best: Individual
    history: List[GenerationStats] = field(default_factory=list)
    evaluations: int = 0

    def best_ever_curve(self) -> np.ndarray:
        return np.array([h.best_ever for h in self.history])


def initialize(bounds: PoseBounds, cfg: EvolutionConfig, rng: np.random.Generator) -> List[Individual]:
    """``cfg.population`` genomes drawn uniformly inside the bounds."""
    u = rng.random((cfg.population, bounds.ndim))
    genomes = bounds.lower + u * bounds.span
    return [Individual(bounds.clip(g)) for g in genomes]


def tournament_select(population: Sequence[Individual], rng: np.random.Generator,
                      size: int = 3) -> Individual:
    """Fittest of ``size`` members drawn uniformly with replacement."""
    if any(ind.fitness is None for ind in population):
        raise UnevaluatedFitnessError("tournament over unevaluated individuals")
    picks = rng.integers(0, len(population), size=size)
    best = picks[0]
    for p in picks[1:]:
        if population[p].fitness > population[best].fitness:
            best = p
    return population[best]


def two_point_crossover(a, b, rng: Optional[np.random.Generator] = None,
                        points: Optional[Tuple[int, int]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Swap the gene segment ``[p, q)`` between two parents.

    Cut points are drawn as two distinct positions in ``1..n`` unless given.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("parents must have the same length")
    if points is None:
        p, q = sorted(rng.choice(np.arange(1, len(a) + 1), size=2, replace=False).tolist())
    else:
        p, q = points
    c1, c2 = a.copy(), b.copy()
    c1[p:q], c2[p:q] = b[p:q], a[p:q]
    return c1, c2


def gaussian_mutate(genome, sigma, rng: np.random.Generator, gene_rate: float = 0.2,
                    bounds: Optional[PoseBounds] = None) -> np.ndarray:
    """Add ``N(0, sigma_j^2)`` to each gene with probability ``gene_rate``, then clamp."""
    g = np.array(genome, dtype=np.float64)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), g.shape)
    mask = rng.random(g.shape) < gene_rate
    noise = rng.standard_normal(g.shape)
    g = g + np.where(mask, sigma * noise, 0.0)
    if bounds is not None:
        g = bounds.clip(g)
    return g


def _stats(gen: int, pop: Sequence[Individual], best_ever: float) -> GenerationStats:
    fit = np.array([ind.fitness for ind in pop], dtype=np.float64)
    return GenerationStats(gen, float(fit.max()), float(fit.mean()), best_ever)


def run(fitness: Callable[[np.ndarray], float], bounds: PoseBounds, cfg: EvolutionConfig,
        callback: Optional[Callable[[GenerationStats], None]] = None) -> EvolutionResult:
    """Maximise ``fitness`` over the bounded genome space.

    Each generation draws from its own RNG stream spawned from ``cfg.seed``,
    so results do not depend on how evaluations are scheduled. Individuals
    left unchanged by variation keep their fitness.

    Returns the best individual ever evaluated and per-generation
    ``(max, mean, best-ever)`` fitness.
    """
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.generations + 1)]
    sigma = cfg.mutation_sigma(bounds)
    result = EvolutionResult(best=Individual(np.full(bounds.ndim, np.nan), -np.inf))

    def evaluate(pop):
        for ind in pop:
            if ind.fitness is None:
                ind.fitness = float(fitness(ind.genome))
                result.evaluations += 1
                if ind.fitness > result.best.fitness:
                    result.best = ind.copy()

    pop = initialize(bounds, cfg, streams[0])
    evaluate(pop)
    result.history.append(_stats(0, pop, result.best.fitness))
    if callback:
        callback(result.history[-1])

    for gen in range(1, cfg.generations + 1):
        rng = streams[gen]
        offspring = [tournament_select(pop, rng, cfg.tournament_size).copy() for _ in range(cfg.population)]
        for i in range(1, len(offspring), 2):
            if rng.random() < cfg.crossover_rate:
                a, b = offspring[i - 1], offspring[i]
                c1, c2 = two_point_crossover(a.genome, b.genome, rng)
                if not np.array_equal(c1, a.genome):
                    a.genome, a.fitness = c1, None
                if not np.array_equal(c2, b.genome):
                    b.genome, b.fitness = c2, None
        for ind in offspring:
            if rng.random() < cfg.mutation_rate:
                g = gaussian_mutate(ind.genome, sigma, rng, cfg.gene_rate, bounds)
                if not np.array_equal(g, ind.genome):
                    ind.genome, ind.fitness = g, None
        evaluate(offspring)
        pop = offspring
        result.history.append(_stats(gen, pop, result.best.fitness))
        if callback:
            callback(result.history[-1])
    return result


def write_stats(path, history: Sequence[GenerationStats]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "max_fitness", "mean_fitness"])
        for h in history:
            w.writerow([h.generation, repr(h.max_fitness), repr(h.mean_fitness)])
