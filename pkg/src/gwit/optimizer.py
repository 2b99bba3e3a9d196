"""Genetic-algorithm search for test operators with minimal signed significance.

A genome is the packed lower triangle of a 2N x 2N matrix G; it decodes to
``M = (G G^T + eps I) / tr(G G^T + eps I)``, which is positive definite and
trace-normalized by construction.  The significance is invariant under
``M -> cM``, so the normalization costs nothing.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from gwit.model import (
    ConvexK,
    CovarianceState,
    Individual,
    InputError,
    SeparabilityTarget,
    TestOperator,
    WitnessVerdict,
    check_target,
    mode_indices,
    normalize_state,
)
from gwit.partitions import MAX_EXHAUSTIVE_MODES, mask_to_modes, partition_masks
from gwit.symplectic import symplectic_trace_batch
from gwit.witness import verdict

EPSILON = 1e-8
STALL_GENERATIONS = 50


@dataclass(frozen=True)
class GaConfig:
    rng_seed: int
    target: SeparabilityTarget = ConvexK(1)
    population_size: int = 64
    generations: int = 400
    tournament_size: int = 3
    crossover_rate: float = 0.9
    blend_alpha: float = 0.5
    mutation_rate: float = 0.15
    mutation_sigma: float = 0.1
    elite_count: int = 2
    restarts: int = 4
    init_sigma: float = 0.5
    inverse_covariance_seed: bool = True

    def __post_init__(self):
        for name in ("population_size", "generations", "tournament_size", "restarts"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be positive")
        if self.elite_count < 1 or self.elite_count >= self.population_size:
            raise InputError("elite_count must be in 1..population_size-1")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InputError(f"{name} must lie in [0, 1]")
        if self.mutation_sigma <= 0 or self.init_sigma <= 0 or self.blend_alpha < 0:
            raise InputError("mutation_sigma and init_sigma must be positive, blend_alpha >= 0")

    def hyperparameters(self) -> dict:
        """Settings without the target, in a JSON-friendly dict."""
        out = asdict(self)
        out.pop("target")
        return out


_HYPER_KEYS = {f.name for f in fields(GaConfig)} - {"target"}


def config_from_mapping(data: dict, **overrides) -> GaConfig:
    """GaConfig from a JSON-style dict (unknown keys rejected) plus overrides."""
    unknown = set(data) - _HYPER_KEYS
    if unknown:
        raise InputError(f"unknown GA config keys: {sorted(unknown)}")
    merged = {**data, **{k: v for k, v in overrides.items() if v is not None}}
    merged.setdefault("rng_seed", 0)
    return GaConfig(**merged)


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read GA config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise InputError("GA config must be a JSON object")
    return data


def n_genes(n_modes: int) -> int:
    return n_modes * (2 * n_modes + 1)


def identity_genome(n_modes: int) -> np.ndarray:
    d = 2 * n_modes
    rows, cols = np.tril_indices(d)
    return (rows == cols).astype(float)


def genome_from_operator(op: TestOperator) -> np.ndarray:
    """A genome decoding to ``op`` up to scale (and the eps floor)."""
    d = 2 * op.n_modes
    m = op.matrix / np.trace(op.matrix)
    low = np.linalg.cholesky(m + 1e-12 * np.eye(d))
    return low[np.tril_indices(d)]


def decode_batch(genomes: np.ndarray, n_modes: int) -> np.ndarray:
    g = np.atleast_2d(np.asarray(genomes, dtype=float))
    d = 2 * n_modes
    low = np.zeros((g.shape[0], d, d))
    rows, cols = np.tril_indices(d)
    low[:, rows, cols] = g
    a = low @ np.swapaxes(low, 1, 2) + EPSILON * np.eye(d)
    a = (a + np.swapaxes(a, 1, 2)) / 2
    tr = np.trace(a, axis1=1, axis2=2)
    return a / tr[:, None, None]


def decode(genome: np.ndarray, n_modes: int) -> TestOperator:
    return TestOperator(n_modes, decode_batch(genome, n_modes)[0])


class BatchObjective:
    """Signed significance for a stack of test operators at one target.

    Block scores of every mode subset the target needs are computed once per
    stack, grouped by subset size.
    """

    def __init__(self, state: CovarianceState, target: SeparabilityTarget):
        state = normalize_state(state)
        check_target(target, state.n_modes)
        n = state.n_modes
        self.n = n
        self.target = target
        self.c = state.matrix
        self.dc_upper = np.triu(state.uncertainty)
        if isinstance(target, Individual):
            table = (target.partition.masks,)
        else:
            if n > MAX_EXHAUSTIVE_MODES:
                raise InputError(f"K-partition scans are capped at N={MAX_EXHAUSTIVE_MODES}")
            table = partition_masks(n, target.k)
        subsets = sorted({m for masks in table for m in masks})
        column = {m: i for i, m in enumerate(subsets)}
        self.subsets = subsets
        self.table = np.array([[column[m] for m in masks] for masks in table], dtype=np.intp)
        self.by_size: dict[int, tuple[list[int], np.ndarray]] = {}
        for i, mask in enumerate(subsets):
            modes = mask_to_modes(mask)
            entry = self.by_size.setdefault(len(modes), ([], []))
            entry[0].append(i)
            entry[1].append(mode_indices(modes, n))
        self.by_size = {k: (cols, np.array(idx)) for k, (cols, idx) in self.by_size.items()}

    def components(self, ms: np.ndarray):
        """Expectations, errors, bounds and argmin rows for a stack ``ms``."""
        p = ms.shape[0]
        exp = np.einsum("pij,ij->p", ms, self.c)
        w = 2.0 * np.triu(ms, 1)
        diag = np.einsum("pii->pi", ms)
        idx = np.arange(2 * self.n)
        w[:, idx, idx] = diag
        err = np.sqrt(np.sum((w * self.dc_upper) ** 2, axis=(1, 2)))
        scores = np.empty((p, len(self.subsets)))
        for cols, idx_rows in self.by_size.values():
            sub = ms[:, idx_rows[:, :, None], idx_rows[:, None, :]]
            scores[:, cols] = symplectic_trace_batch(sub)
        totals = scores[:, self.table].sum(axis=2)
        arg = np.argmin(totals, axis=1)
        bound = totals[np.arange(p), arg]
        return exp, err, bound, arg

    def __call__(self, ms: np.ndarray) -> np.ndarray:
        exp, err, bound, _ = self.components(ms)
        num = exp - bound
        with np.errstate(divide="ignore", invalid="ignore"):
            sig = num / err
        zero = err == 0
        sig[zero] = np.where(num[zero] == 0, 0.0, np.copysign(np.inf, num[zero]))
        return sig


def objective(genome: np.ndarray, state: CovarianceState, target: SeparabilityTarget) -> float:
    """Signed significance of the decoded genome."""
    return verdict(decode(genome, state.n_modes), state, target).sigma


@dataclass(frozen=True, eq=False)
class GaResult:
    best_verdict: WitnessVerdict
    best_m: TestOperator
    best_genome: np.ndarray
    history: np.ndarray
    evaluations: int
    config: GaConfig = field(repr=False, default=None)


def _check_uncertainty(state: CovarianceState) -> None:
    dc = state.uncertainty
    if not np.any(dc > 0):
        raise InputError("state has no uncertainties (dC == 0); significances are undefined")
    if not np.any(np.diag(dc) > 0):
        raise InputError("uncertainty diagonal is zero; the error of <L> may vanish")


def _tournament(rng: np.random.Generator, rank: np.ndarray, count: int, size: int) -> np.ndarray:
    picks = rng.integers(0, rank.size, size=(count, size))
    best = np.argmin(rank[picks], axis=1)
    return picks[np.arange(count), best]


def minimize(state: CovarianceState, config: GaConfig,
             seeds: Sequence[np.ndarray] = ()) -> GaResult:
    """Search for the test operator minimizing the signed significance.

    Restart 0 holds the identity genome, the genome of ``C^{-1}`` (unless
    disabled in the config) and any ``seeds`` (e.g. the best genomes of
    related targets); the rest of its population and all other restarts
    start from Gaussian genes.  Elitism makes the best-so-far
    history non-increasing, and the result is never worse than any seed.
    Deterministic for a given ``config.rng_seed``.
    """
    state = normalize_state(state)
    target = config.target
    check_target(target, state.n_modes)
    _check_uncertainty(state)
    n = state.n_modes
    dim = n_genes(n)
    pop_size = config.population_size
    evaluate = BatchObjective(state, target)
    rng = np.random.default_rng(config.rng_seed)

    seeds = [np.asarray(s, dtype=float).reshape(dim) for s in seeds]
    if config.inverse_covariance_seed:
        inverse = TestOperator(n, np.linalg.inv(state.matrix))
        seeds.insert(0, genome_from_operator(inverse))
    if len(seeds) + 1 > pop_size:
        raise InputError(f"too many seed genomes ({len(seeds)}) for population {pop_size}")

    history = np.empty(config.restarts * config.generations)
    best_sigma = math.inf
    best_genome = identity_genome(n)
    evaluations = 0
    step = 0
    for restart in range(config.restarts):
        pop = rng.normal(0.0, config.init_sigma, size=(pop_size, dim))
        if restart == 0:
            pop[1:] += identity_genome(n)
            pop[0] = identity_genome(n)
            for i, s in enumerate(seeds, start=1):
                pop[i] = s
        fit = evaluate(decode_batch(pop, n))
        evaluations += pop_size
        sigma = config.mutation_sigma
        run_best = math.inf
        stall = 0
        for gen in range(config.generations):
            order = np.lexsort((np.arange(pop_size), fit))
            lead = fit[order[0]]
            if lead < run_best:
                run_best = lead
                stall = 0
            else:
                stall += 1
                if stall >= STALL_GENERATIONS:
                    sigma /= 2
                    stall = 0
            if lead < best_sigma:
                best_sigma = lead
                best_genome = pop[order[0]].copy()
            history[step] = best_sigma
            step += 1
            if gen == config.generations - 1:
                break

            rank = np.empty(pop_size, dtype=np.intp)
            rank[order] = np.arange(pop_size)
            n_child = pop_size - config.elite_count
            a = pop[_tournament(rng, rank, n_child, config.tournament_size)]
            b = pop[_tournament(rng, rank, n_child, config.tournament_size)]
            lo, hi = np.minimum(a, b), np.maximum(a, b)
            span = hi - lo
            blend = rng.uniform(lo - config.blend_alpha * span, hi + config.blend_alpha * span)
            cross = rng.random(n_child) < config.crossover_rate
            children = np.where(cross[:, None], blend, a)
            mutate = rng.random((n_child, dim)) < config.mutation_rate
            children = children + mutate * rng.normal(0.0, sigma, size=(n_child, dim))

            elites = order[:config.elite_count]
            child_fit = evaluate(decode_batch(children, n))
            evaluations += n_child
            pop = np.vstack([pop[elites], children])
            fit = np.concatenate([fit[elites], child_fit])

    best_m = decode(best_genome, n)
    best = verdict(best_m, state, target)
    return GaResult(best, best_m, best_genome, history, evaluations, config)


def with_target(config: GaConfig, target: SeparabilityTarget) -> GaConfig:
    return replace(config, target=target)


def baseline_sigma(state: CovarianceState, target: SeparabilityTarget) -> float:
    """Significance of the identity genome, the anchor every search starts from."""
    return objective(identity_genome(state.n_modes), state, target)


def _run_one(args):
    state, config, seeds = args
    return minimize(state, config, seeds)


def _best_seeds(state: CovarianceState, target: SeparabilityTarget,
                candidates: Sequence[np.ndarray], limit: int) -> list[np.ndarray]:
    if not candidates or limit < 1:
        return []
    score = BatchObjective(state, target)(decode_batch(np.array(candidates), state.n_modes))
    order = np.lexsort((np.arange(len(candidates)), score))
    return [candidates[i] for i in order[:limit]]


def sweep(state: CovarianceState, targets: Sequence[SeparabilityTarget], config: GaConfig,
          workers: int = 1) -> dict:
    """Optimize every target; returns ``{target: GaResult}``.

    Individual partitions run first (in a process pool when ``workers > 1``),
    then ConvexK targets from small K to large, each seeded with the best
    genomes found for smaller K and for its own K-partitions.  For a fixed
    M, ``Sigma_K(M)`` never exceeds ``Sigma_{K'}(M)`` for K' < K, so the
    seeding makes the reported ConvexK values non-increasing in K.
    Every target uses ``config.rng_seed``, so results do not depend on
    ``workers``.
    """
    state = normalize_state(state)
    for t in targets:
        check_target(t, state.n_modes)
    _check_uncertainty(state)
    individual = [t for t in targets if isinstance(t, Individual)]
    convex = sorted((t for t in targets if isinstance(t, ConvexK)), key=lambda t: t.k)
    results: dict = {}
    jobs = [(state, with_target(config, t), ()) for t in individual]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(_run_one, jobs))
    else:
        done = [_run_one(job) for job in jobs]
    results.update(zip(individual, done))

    limit = max(1, config.population_size // 4 - 2)
    finished: list = []
    for t in convex:
        candidates = [results[p].best_genome for p in individual if p.k == t.k]
        candidates += [results[q].best_genome for q in finished]
        seeds = _best_seeds(state, t, candidates, limit)
        results[t] = minimize(state, with_target(config, t), seeds)
        finished.append(t)
    return results
