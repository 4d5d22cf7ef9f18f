"""Hidden-measurement simulator.

States of an N-dimensional quantum system are represented as real vectors
in the (N^2 - 1)-dimensional unit ball; projective measurements become
breakable elastic membranes stretched over the simplex of the observable's
eigenstate vectors.  The package verifies numerically that this mechanism
reproduces the Born rule, first-kind repeatability and Lueders collapse.
"""

from .bloch import (
    BlochVector,
    DensityOperator,
    GeneratorBasis,
    PureState,
    StateValidity,
    bloch_to_density,
    build_generator_basis,
    density_to_bloch,
    generator_basis,
    is_valid_state,
    pure_to_density,
)
from .dynamics import (
    CollapseTrace,
    MembraneModel,
    RandomSource,
    die_measure,
    die_observable,
    die_state,
    luders_posterior,
    run_measurement,
    sample_breaking_point,
    spin_machine_measure,
)
from .errors import (
    ConfigError,
    DimensionError,
    GeometryError,
    HmSimError,
    ImpossibleOutcomeError,
    InvalidMembranePointError,
    InvalidStateError,
    ObservableError,
    OracleMismatchError,
)
from .geometry import (
    BarycentricCoordinates,
    MeasurementSimplex,
    Observable,
    barycentric_coordinates,
    born_probabilities,
    build_measurement_simplex,
    canonical_observable,
    classify_breaking_point,
    project_onto_membrane,
    spin_observable,
    subsimplex_volume_fractions,
)
from .cli import RunManifest
from .harness import (
    ChiSquareResult,
    ConvergenceReport,
    ExperimentConfig,
    chi_square_check,
    sample_elementary_outcomes,
    simulate_statistics,
    universal_average_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "BarycentricCoordinates",
    "BlochVector",
    "ChiSquareResult",
    "CollapseTrace",
    "ConfigError",
    "ConvergenceReport",
    "DensityOperator",
    "DimensionError",
    "ExperimentConfig",
    "GeneratorBasis",
    "GeometryError",
    "HmSimError",
    "ImpossibleOutcomeError",
    "InvalidMembranePointError",
    "InvalidStateError",
    "MeasurementSimplex",
    "MembraneModel",
    "Observable",
    "ObservableError",
    "OracleMismatchError",
    "PureState",
    "RandomSource",
    "RunManifest",
    "StateValidity",
    "barycentric_coordinates",
    "bloch_to_density",
    "born_probabilities",
    "build_generator_basis",
    "build_measurement_simplex",
    "canonical_observable",
    "chi_square_check",
    "classify_breaking_point",
    "density_to_bloch",
    "die_measure",
    "die_observable",
    "die_state",
    "generator_basis",
    "is_valid_state",
    "luders_posterior",
    "project_onto_membrane",
    "pure_to_density",
    "run_measurement",
    "sample_breaking_point",
    "sample_elementary_outcomes",
    "simulate_statistics",
    "spin_machine_measure",
    "spin_observable",
    "subsimplex_volume_fractions",
    "universal_average_experiment",
]
