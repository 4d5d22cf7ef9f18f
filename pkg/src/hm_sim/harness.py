"""Monte Carlo experiment runner and statistical acceptance checks.

Batches of membrane measurements are executed vectorized: breaking points
are drawn as barycentric-weight arrays and classified against the landed
state point in one argmin, which keeps hundreds of thousands of trials per
second within reach.  Trials are organized in fixed-size chunks, each chunk
drawing from its own derived random stream, so results are bit-identical
regardless of execution order or how many workers shard the chunks.

Every run carries two probability routes: the Hilbert-space oracle
Tr(D P_i) and the membrane geometry (barycentric coordinates of the
projected state).  They must agree to 1e-9 or the run aborts; empirical
frequencies are then compared against the oracle with per-block sigma bands
and a Pearson chi-square test.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import stats as _scipy_stats

from .bloch import (
    BlochVector,
    DensityOperator,
    PureState,
    bloch_to_density,
    density_to_bloch,
    generator_basis,
    pure_to_density,
)
from .dynamics import (
    MembraneModel,
    RandomSource,
    VERTEX_TOL,
    _cellular_weights,
    _uniform_weights,
)
from .errors import ConfigError, DimensionError, OracleMismatchError
from .geometry import (
    MeasurementSimplex,
    Observable,
    barycentric_coordinates,
    born_probabilities,
    build_measurement_simplex,
    canonical_observable,
    project_onto_membrane,
    spin_observable,
)

# Trials per chunk.  Fixed: chunk boundaries define the random streams, so
# changing this constant changes results, but worker counts never do.
CHUNK_TRIALS = 8192

ORACLE_TOL = 1e-9


# --- experiment specification -------------------------------------------------


def resolve_state_spec(spec: dict, dimension: int) -> DensityOperator:
    """Build the initial density operator from a JSON-shaped spec."""
    kind = spec.get("kind")
    if kind == "pure":
        re = np.asarray(spec["re"], dtype=float)
        im = np.asarray(spec.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != (dimension,) or im.shape != (dimension,):
            raise ConfigError(
                f"pure state needs {dimension} amplitudes, got {re.shape}/{im.shape}"
            )
        return pure_to_density(PureState.normalized(re + 1j * im))
    if kind == "bloch":
        coords = np.asarray(spec["coordinates"], dtype=float)
        return bloch_to_density(
            BlochVector(dimension, coords), generator_basis(dimension)
        )
    if kind == "preset":
        name = spec.get("name")
        if name == "maximally_mixed":
            return DensityOperator.maximally_mixed(dimension)
        if name == "basis":
            return pure_to_density(
                PureState.basis_state(dimension, int(spec["index"]))
            )
        raise ConfigError(f"unknown state preset {name!r}")
    raise ConfigError(f"unknown state kind {kind!r}")


def resolve_observable_spec(spec: dict, dimension: int) -> Observable:
    kind = spec.get("kind")
    if kind == "canonical":
        return canonical_observable(dimension, spec.get("labels"))
    if kind == "spin_axis":
        if dimension != 2:
            raise ConfigError("spin_axis observables require dimension 2")
        return spin_observable(spec["axis"])
    if kind == "explicit":
        states = tuple(
            PureState(
                dimension,
                np.asarray(s["re"], dtype=float)
                + 1j * np.asarray(s.get("im", np.zeros(dimension)), dtype=float),
            )
            for s in spec["eigenstates"]
        )
        return Observable(dimension, states, tuple(spec["labels"]))
    raise ConfigError(f"unknown observable kind {kind!r}")


def resolve_membrane_spec(spec: dict) -> MembraneModel:
    kind = spec.get("kind")
    if kind == "uniform":
        return MembraneModel.uniform()
    if kind == "solipsistic":
        return MembraneModel.solipsistic()
    if kind == "cellular":
        return MembraneModel.cellular(np.asarray(spec["weights"], dtype=float))
    raise ConfigError(f"unknown membrane kind {kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """A complete Monte Carlo experiment: state, observable, membrane, trials.

    The state/observable/membrane fields hold the JSON-shaped specs used by
    config files; ``resolve_*`` turns them into domain objects.
    """

    dimension: int
    state: dict
    observable: dict
    membrane: dict
    trials: int
    master_seed: int
    tolerance_sigmas: float = 4.0

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.tolerance_sigmas > 0:
            raise ConfigError("tolerance_sigmas must be positive")

    def resolve(self) -> tuple[DensityOperator, Observable, MembraneModel]:
        return (
            resolve_state_spec(self.state, self.dimension),
            resolve_observable_spec(self.observable, self.dimension),
            resolve_membrane_spec(self.membrane),
        )


# --- vectorized sampling -------------------------------------------------------


def _classify_batch(weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Vectorized breaking-point classification: argmin of v_i / u_i.

    numpy's argmin takes the first minimum, which is exactly the
    lowest-index tie-break used on tension lines.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = weights / u
    if np.any(u == 0.0):
        ratios[:, u == 0.0] = np.inf
    return np.argmin(ratios, axis=1)


def _chunk_outcomes(
    simplex_dimension: int,
    model: MembraneModel,
    u: np.ndarray,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    n = simplex_dimension
    if model.kind == "solipsistic":
        # Breaks only at vertices; a break at vertex j actualizes outcome j.
        return rng.integers(0, n, size=count)
    if model.kind == "cellular":
        v = _cellular_weights(rng, count, n, model)
    else:
        v = _uniform_weights(rng, count, n)
    return _classify_batch(v, u)


def sample_elementary_outcomes(
    state: DensityOperator,
    observable: Observable,
    model: MembraneModel,
    trials: int,
    source: RandomSource,
    job: int = 0,
    workers: int = 1,
    simplex: MeasurementSimplex | None = None,
) -> np.ndarray:
    """Outcome indices of ``trials`` independent membrane measurements.

    ``job`` namespaces the random streams so distinct experiment parts sharing
    one master seed stay independent.  ``workers`` only affects wall time.
    """
    n = state.dimension
    basis = generator_basis(n)
    if simplex is None:
        simplex = build_measurement_simplex(observable, basis)
    r = density_to_bloch(state, basis)

    dists = np.linalg.norm(simplex.vertices - r.coordinates, axis=1)
    if dists.min() <= VERTEX_TOL:
        # Eigenstate input: that outcome occurs with certainty under every
        # membrane model (first-kind condition).
        return np.full(trials, int(np.argmin(dists)), dtype=np.int64)

    on_membrane = project_onto_membrane(r, simplex)
    u = barycentric_coordinates(on_membrane, simplex).weights

    chunk_ids = range((trials + CHUNK_TRIALS - 1) // CHUNK_TRIALS)

    def run_chunk(c: int) -> np.ndarray:
        count = min(CHUNK_TRIALS, trials - c * CHUNK_TRIALS)
        return _chunk_outcomes(n, model, u, count, source.chunk_stream(job, c))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_chunk, chunk_ids))
    else:
        parts = [run_chunk(c) for c in chunk_ids]
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)


def _oracle_probabilities(
    state: DensityOperator,
    observable: Observable,
    simplex: MeasurementSimplex,
) -> np.ndarray:
    """Born probabilities, cross-checked against the membrane geometry."""
    born = born_probabilities(state, observable).weights
    basis = generator_basis(state.dimension)
    r = density_to_bloch(state, basis)
    geometric = barycentric_coordinates(
        project_onto_membrane(r, simplex), simplex
    ).weights
    gap = float(np.max(np.abs(born - geometric)))
    if gap > ORACLE_TOL:
        raise OracleMismatchError(
            f"geometric and Hilbert-space probabilities differ by {gap:.3e}"
        )
    return born


# --- statistics ----------------------------------------------------------------


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    degrees_of_freedom: int
    threshold: float
    passed: bool


def chi_square_check(
    observed_counts, expected_probabilities, quantile: float = 0.999
) -> ChiSquareResult:
    """Pearson goodness-of-fit against the given expected probabilities.

    Blocks with expected probability below 10/total are pooled into one;
    the threshold is the ``quantile`` point of chi-square with
    (retained blocks - 1) degrees of freedom.
    """
    observed = np.asarray(observed_counts, dtype=float)
    expected = np.asarray(expected_probabilities, dtype=float)
    if observed.shape != expected.shape:
        raise DimensionError("observed and expected shapes differ")
    total = float(observed.sum())
    if total <= 0:
        raise ConfigError("cannot test all-zero counts")
    if abs(float(expected.sum()) - 1.0) > 1e-9:
        raise ConfigError("expected probabilities must sum to 1")

    retain = expected >= 10.0 / total
    terms = []
    cells = 0
    statistic = 0.0
    for o, e in zip(observed[retain], expected[retain] * total):
        statistic += (o - e) ** 2 / e
        cells += 1
    pooled_obs = float(observed[~retain].sum())
    pooled_exp = float(expected[~retain].sum()) * total
    if np.any(~retain):
        if pooled_exp > 0.0:
            statistic += (pooled_obs - pooled_exp) ** 2 / pooled_exp
            cells += 1
        elif pooled_obs > 0.0:
            statistic = float("inf")

    dof = max(cells - 1, 0)
    threshold = float(_scipy_stats.chi2.ppf(quantile, dof)) if dof >= 1 else 0.0
    return ChiSquareResult(
        float(statistic), dof, threshold, bool(statistic <= threshold)
    )


@dataclass(frozen=True)
class ConvergenceReport:
    """Empirical block frequencies versus the Born oracle.

    ``sigma`` holds the one-sigma scale per block; ``sigma_model`` records
    whether it is the plain binomial scale sqrt(p(1-p)/trials) or the
    between-membrane standard error used by the universal-average
    experiment.  ``passed`` (serialized as "pass") requires every deviation
    within tolerance_sigmas * sigma and the chi-square statistic below its
    0.999-quantile threshold.
    """

    block_labels: tuple[float, ...]
    observed_counts: tuple[int, ...]
    empirical_frequencies: np.ndarray
    oracle_probabilities: np.ndarray
    per_block_deviation: np.ndarray
    sigma: np.ndarray
    sigma_model: str
    tolerance_sigmas: float
    trials: int
    chi_square_statistic: float
    chi_square_threshold: float
    degrees_of_freedom: int
    passed: bool
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        freq = np.asarray(self.empirical_frequencies, dtype=float)
        if abs(float(freq.sum()) - 1.0) > 1e-12:
            raise OracleMismatchError("empirical frequencies must sum to 1")


def _block_structure(observable: Observable):
    blocks = observable.degeneracy_partition
    labels = tuple(observable.eigenvalue_labels[b[0]] for b in blocks)
    elem_to_block = np.empty(observable.dimension, dtype=np.int64)
    for bi, block in enumerate(blocks):
        for i in block:
            elem_to_block[i] = bi
    return blocks, labels, elem_to_block


def _block_counts(outcomes: np.ndarray, elem_to_block: np.ndarray, n_blocks: int):
    return np.bincount(elem_to_block[outcomes], minlength=n_blocks)


def _band_report(
    labels,
    counts: np.ndarray,
    oracle_blocks: np.ndarray,
    sigma: np.ndarray,
    sigma_model: str,
    tolerance_sigmas: float,
    trials: int,
    chi: ChiSquareResult,
    meta: dict,
) -> ConvergenceReport:
    freq = counts / counts.sum()
    dev = np.abs(freq - oracle_blocks)
    bands_ok = bool(np.all(dev <= tolerance_sigmas * sigma + 1e-15))
    return ConvergenceReport(
        block_labels=tuple(labels),
        observed_counts=tuple(int(c) for c in counts),
        empirical_frequencies=freq,
        oracle_probabilities=oracle_blocks,
        per_block_deviation=dev,
        sigma=sigma,
        sigma_model=sigma_model,
        tolerance_sigmas=tolerance_sigmas,
        trials=trials,
        chi_square_statistic=chi.statistic,
        chi_square_threshold=chi.threshold,
        degrees_of_freedom=chi.degrees_of_freedom,
        passed=bool(bands_ok and chi.passed),
        meta=meta,
    )


def simulate_statistics(
    config: ExperimentConfig, job: int = 0, workers: int = 1
) -> ConvergenceReport:
    """Run the configured experiment and compare frequencies to the oracle."""
    state, observable, model = config.resolve()
    basis = generator_basis(config.dimension)
    simplex = build_measurement_simplex(observable, basis)
    oracle_elem = _oracle_probabilities(state, observable, simplex)
    blocks, labels, elem_to_block = _block_structure(observable)
    oracle_blocks = np.array([oracle_elem[list(b)].sum() for b in blocks])

    source = RandomSource(config.master_seed)
    outcomes = sample_elementary_outcomes(
        state, observable, model, config.trials, source, job, workers, simplex
    )
    counts = _block_counts(outcomes, elem_to_block, len(blocks))
    sigma = np.sqrt(oracle_blocks * (1 - oracle_blocks) / config.trials)
    chi = chi_square_check(counts, oracle_blocks)
    return _band_report(
        labels,
        counts,
        oracle_blocks,
        sigma,
        "binomial",
        config.tolerance_sigmas,
        config.trials,
        chi,
        meta={},
    )


def _hotelling_check(
    membrane_freqs: np.ndarray, oracle_blocks: np.ndarray, quantile: float = 0.999
) -> ChiSquareResult:
    """Hotelling T^2 of the per-membrane frequency vectors against the oracle.

    The grand mean over random membranes carries between-membrane variance on
    top of multinomial noise, so a plain Pearson statistic on pooled counts
    would be wildly anticonservative; T^2 uses the empirical covariance of
    the K membrane frequency vectors instead.
    """
    k, b = membrane_freqs.shape
    p = b - 1
    if k <= p + 1:
        # Too few membranes to estimate the covariance; leave the decision to
        # the per-block sigma bands.
        return ChiSquareResult(0.0, 0, 0.0, True)
    x = membrane_freqs[:, :p]
    diff = x.mean(axis=0) - oracle_blocks[:p]
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    pinv = np.linalg.pinv(cov)
    if np.linalg.norm(cov @ (pinv @ diff) - diff) > 1e-12 * (1 + np.linalg.norm(diff)):
        # Deviation along a zero-variance direction: infinitely significant.
        return ChiSquareResult(float("inf"), p, 0.0, False)
    t2 = float(k * diff @ pinv @ diff)
    scale = p * (k - 1) / (k - p)
    threshold = scale * float(_scipy_stats.f.ppf(quantile, p, k - p))
    return ChiSquareResult(t2, p, threshold, bool(t2 <= threshold))


def universal_average_experiment(
    dimension: int,
    state: dict,
    observable: dict,
    cell_count: int,
    membrane_samples: int,
    trials_per_membrane: int,
    master_seed: int,
    tolerance_sigmas: float = 4.0,
    fixed_cell_weights=None,
    workers: int = 1,
) -> ConvergenceReport:
    """Born-rule recovery as an average over random non-uniform membranes.

    Draws ``membrane_samples`` cellular membranes whose cell weights are
    uniform on the probability simplex (normalized unit-rate exponentials),
    runs ``trials_per_membrane`` measurements on each, and reports the
    grand-average block frequencies against the Born oracle.  Expectation
    over the weight distribution equals the uniform membrane exactly because
    the cells are equal-measure, so the grand average must satisfy the Born
    bands even though individual membranes need not.

    ``fixed_cell_weights`` pins every membrane to one explicit weight vector
    instead (used to exhibit adversarial non-uniform membranes); the report
    then uses plain binomial statistics.
    """
    if cell_count < 1:
        raise ConfigError("cell_count must be >= 1")
    if membrane_samples < 1:
        raise ConfigError("membrane_samples must be >= 1")
    if trials_per_membrane < 1:
        raise ConfigError("trials_per_membrane must be >= 1")

    state_op = resolve_state_spec(state, dimension)
    observable_op = resolve_observable_spec(observable, dimension)
    basis = generator_basis(dimension)
    simplex = build_measurement_simplex(observable_op, basis)
    oracle_elem = _oracle_probabilities(state_op, observable_op, simplex)
    blocks, labels, elem_to_block = _block_structure(observable_op)
    oracle_blocks = np.array([oracle_elem[list(b)].sum() for b in blocks])

    source = RandomSource(master_seed)
    k, n = membrane_samples, trials_per_membrane
    total = k * n

    if cell_count == 1:
        # Single full-simplex cell: every membrane is the uniform one.  Run a
        # single uniform job so the result is draw-for-draw identical to the
        # plain uniform-membrane experiment with k*n trials.
        outcomes = sample_elementary_outcomes(
            state_op, observable_op, MembraneModel.uniform(), total, source,
            job=0, workers=workers, simplex=simplex,
        )
        per_membrane = outcomes.reshape(k, n)
        counts_matrix = np.stack(
            [_block_counts(row, elem_to_block, len(blocks)) for row in per_membrane]
        )
        random_weights = False
    else:
        counts_matrix = np.empty((k, len(blocks)), dtype=np.int64)
        random_weights = fixed_cell_weights is None
        for i in range(k):
            if fixed_cell_weights is not None:
                weights = np.asarray(fixed_cell_weights, dtype=float)
            else:
                e = source.membrane_stream(i).standard_exponential(cell_count)
                weights = e / e.sum()
            model = MembraneModel.cellular(weights)
            outcomes = sample_elementary_outcomes(
                state_op, observable_op, model, n, source,
                job=i, workers=workers, simplex=simplex,
            )
            counts_matrix[i] = _block_counts(outcomes, elem_to_block, len(blocks))

    counts = counts_matrix.sum(axis=0)
    binomial_sigma = np.sqrt(oracle_blocks * (1 - oracle_blocks) / total)

    if random_weights and cell_count > 1 and k >= 2:
        membrane_freqs = counts_matrix / n
        se = np.std(membrane_freqs, axis=0, ddof=1) / np.sqrt(k)
        sigma = np.maximum(se, binomial_sigma)
        chi = _hotelling_check(membrane_freqs, oracle_blocks)
        sigma_model = "between_membrane_se"
    else:
        sigma = binomial_sigma
        chi = chi_square_check(counts, oracle_blocks)
        sigma_model = "binomial"

    meta = {
        "cells": cell_count,
        "membranes": k,
        "trials_per_membrane": n,
        "fixed_cell_weights": fixed_cell_weights is not None,
    }
    return _band_report(
        labels, counts, oracle_blocks, sigma, sigma_model,
        tolerance_sigmas, total, chi, meta,
    )


# --- random test states ---------------------------------------------------------


def random_pure_state(source: RandomSource, index: int, dimension: int) -> PureState:
    """Deterministic random pure state number ``index`` for a master seed."""
    rng = source.state_stream(index)
    a = rng.standard_normal(dimension) + 1j * rng.standard_normal(dimension)
    return PureState.normalized(a)


def born_identity_max_gap(
    state: DensityOperator, observable: Observable
) -> float:
    """Max componentwise gap between the geometric and Born probabilities."""
    basis = generator_basis(state.dimension)
    simplex = build_measurement_simplex(observable, basis)
    born = born_probabilities(state, observable).weights
    geometric = barycentric_coordinates(
        project_onto_membrane(density_to_bloch(state, basis), simplex), simplex
    ).weights
    return float(np.max(np.abs(born - geometric)))
