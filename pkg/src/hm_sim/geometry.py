"""Measurement simplexes: the elastic-membrane geometry of an observable.

The Bloch images of an observable's N orthonormal eigenstates are unit
vectors with pairwise inner product -1/(N-1); they span a regular
(N-1)-simplex inscribed in the unit sphere (a diameter for N = 2, an
equilateral triangle for N = 3, ...).  A measurement projects the state
point orthogonally onto the simplex's affine hull, and the barycentric
coordinates of the landed point are exactly the Born probabilities
Tr(D P_i).  The same numbers arise as relative volumes of the N
sub-simplexes cut out by joining the landed point to the vertices, which
is the breakable-membrane reading: a uniform membrane tears inside
sub-simplex i with probability equal to its volume fraction, detaching all
anchors except vertex i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bloch import (
    BlochVector,
    DensityOperator,
    GeneratorBasis,
    PureState,
    _frozen,
    density_to_bloch,
    pure_to_density,
)
from .errors import (
    DimensionError,
    GeometryError,
    InvalidMembranePointError,
    ObservableError,
)

HULL_TOL = 1e-8        # max distance from the affine hull for membrane points
CLAMP_TOL = 1e-10      # negative barycentric weight treated as exact zero
SIMPLEX_TOL = 1e-10    # vertex norm / inner-product / orthogonality checks


@dataclass(frozen=True)
class Observable:
    """A projective observable: orthonormal eigenstates plus eigenvalue labels.

    Equal labels induce the degeneracy partition; each block of
    ``degeneracy_partition`` holds the (0-based) indices sharing one label,
    ordered by first appearance.
    """

    dimension: int
    eigenstates: tuple[PureState, ...]
    eigenvalue_labels: tuple[float, ...]
    degeneracy_partition: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self):
        n = self.dimension
        states = tuple(self.eigenstates)
        labels = tuple(float(x) for x in self.eigenvalue_labels)
        if len(states) != n or len(labels) != n:
            raise DimensionError(
                f"need exactly {n} eigenstates and labels, "
                f"got {len(states)} and {len(labels)}"
            )
        for s in states:
            if s.dimension != n:
                raise DimensionError("eigenstate dimension mismatch")
        for i in range(n):
            for j in range(i + 1, n):
                if abs(states[i].overlap(states[j])) > SIMPLEX_TOL:
                    raise ObservableError(
                        f"eigenstates {i} and {j} are not orthogonal"
                    )
        blocks: list[list[int]] = []
        seen: dict[float, int] = {}
        for i, lab in enumerate(labels):
            if lab in seen:
                blocks[seen[lab]].append(i)
            else:
                seen[lab] = len(blocks)
                blocks.append([i])
        object.__setattr__(self, "eigenstates", states)
        object.__setattr__(self, "eigenvalue_labels", labels)
        object.__setattr__(
            self, "degeneracy_partition", tuple(tuple(b) for b in blocks)
        )

    def projector(self, indices) -> np.ndarray:
        """Sum of |n_i><n_i| over the given eigenstate indices."""
        p = np.zeros((self.dimension, self.dimension), dtype=complex)
        for i in indices:
            a = self.eigenstates[i].amplitudes
            p += np.outer(a, a.conj())
        return p

    def block_of(self, index: int) -> tuple[int, ...]:
        for block in self.degeneracy_partition:
            if index in block:
                return block
        raise IndexError(index)


def canonical_observable(dimension: int, labels=None) -> Observable:
    """Observable with the standard basis as eigenstates; labels default 0..N-1."""
    if labels is None:
        labels = tuple(float(i) for i in range(dimension))
    states = tuple(PureState.basis_state(dimension, i) for i in range(dimension))
    return Observable(dimension, states, tuple(labels))


def spin_observable(axis) -> Observable:
    """The two-outcome observable along a spatial axis (N = 2).

    Eigenstates are spin-up and spin-down along ``axis``; labels are the
    eigenvalues +-1/2 of (1/2)(|n><n| - |-n><-n|) in units where hbar = 1.
    """
    a = np.asarray(axis, dtype=float)
    if a.shape != (3,):
        raise DimensionError(f"axis must be a 3-vector, got shape {a.shape}")
    norm = float(np.linalg.norm(a))
    if norm < 1e-12:
        raise GeometryError("measurement axis must be nonzero")
    nx, ny, nz = a / norm
    theta = np.arccos(np.clip(nz, -1.0, 1.0))
    phi = np.arctan2(ny, nx)
    up = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    down = np.array([-np.sin(theta / 2), np.exp(1j * phi) * np.cos(theta / 2)])
    return Observable(2, (PureState(2, up), PureState(2, down)), (0.5, -0.5))


@dataclass(frozen=True)
class BarycentricCoordinates:
    """N non-negative weights summing to 1 (clamped to [0, 1] on output)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise GeometryError(f"weights sum to {w.sum()}, expected 1")
        if w.min() < 0.0 or w.max() > 1.0:
            raise GeometryError("weights not clamped to [0, 1]")
        object.__setattr__(self, "weights", _frozen(w))

    @classmethod
    def clamped(cls, raw: np.ndarray) -> "BarycentricCoordinates":
        """Clamp float noise of magnitude <= 1e-10 and renormalize.

        Anything more negative is a genuine geometry violation and raises.
        """
        raw = np.asarray(raw, dtype=float)
        low = float(raw.min())
        if low < -CLAMP_TOL:
            raise InvalidMembranePointError(
                f"barycentric weight {low:.3e} is negative beyond tolerance; "
                "point lies outside the simplex"
            )
        w = np.clip(raw, 0.0, 1.0)
        return cls(w / w.sum())


@dataclass(frozen=True)
class MeasurementSimplex:
    """The regular (N-1)-simplex of an observable's eigenstate Bloch vectors.

    ``vertices`` holds the N unit vectors as rows of an (N, N^2-1) array.
    An orthonormal frame of the affine hull is computed once (Gram-Schmidt
    over the edge vectors n_i - n_1 in index order) and cached; after
    construction the object is read-only and shareable across workers.
    """

    dimension: int
    vertices: np.ndarray
    frame: np.ndarray = field(init=False)          # (N^2-1, N-1), orthonormal columns
    local_vertices: np.ndarray = field(init=False)  # (N, N-1) coords in the frame

    def __post_init__(self):
        n = self.dimension
        v = np.asarray(self.vertices, dtype=float)
        if v.shape != (n, n * n - 1):
            raise DimensionError(
                f"expected {n} vertices of length {n * n - 1}, got {v.shape}"
            )
        norms = np.linalg.norm(v, axis=1)
        if np.max(np.abs(norms - 1.0)) > SIMPLEX_TOL:
            raise GeometryError("simplex vertices must be unit vectors")
        gram = v @ v.T
        target = -1.0 / (n - 1)
        off = gram[~np.eye(n, dtype=bool)]
        if np.max(np.abs(off - target)) > SIMPLEX_TOL:
            raise GeometryError(
                f"vertex inner products deviate from {target:.6f}; "
                "not a regular inscribed simplex"
            )
        frame = _orthonormal_frame(v)
        if frame.shape[1] != n - 1:
            raise GeometryError("vertices are not affinely independent")
        object.__setattr__(self, "vertices", _frozen(v))
        object.__setattr__(self, "frame", _frozen(frame))
        object.__setattr__(
            self, "local_vertices", _frozen((v - v[0]) @ frame)
        )

    @property
    def vertex_vectors(self) -> tuple[BlochVector, ...]:
        return tuple(BlochVector(self.dimension, row) for row in self.vertices)

    def to_local(self, point: np.ndarray) -> np.ndarray:
        return (np.asarray(point, dtype=float) - self.vertices[0]) @ self.frame

    def from_barycentric(self, weights: np.ndarray) -> np.ndarray:
        return np.asarray(weights, dtype=float) @ self.vertices

    def hull_distance(self, point: np.ndarray) -> float:
        rel = np.asarray(point, dtype=float) - self.vertices[0]
        return float(np.linalg.norm(rel - self.frame @ (self.frame.T @ rel)))


def _orthonormal_frame(vertices: np.ndarray) -> np.ndarray:
    """Deterministic Gram-Schmidt over edge vectors, two passes for stability."""
    base = vertices[0]
    cols: list[np.ndarray] = []
    for row in vertices[1:]:
        u = row - base
        for _ in range(2):
            for q in cols:
                u = u - np.dot(q, u) * q
        norm = np.linalg.norm(u)
        if norm > 1e-12:
            cols.append(u / norm)
    return np.column_stack(cols) if cols else np.zeros((vertices.shape[1], 0))


def build_measurement_simplex(
    observable: Observable, basis: GeneratorBasis
) -> MeasurementSimplex:
    """Map each eigenstate through the Bloch representation and assemble."""
    if observable.dimension != basis.dimension:
        raise DimensionError(
            f"dimension mismatch: {observable.dimension} vs {basis.dimension}"
        )
    rows = [
        density_to_bloch(pure_to_density(s), basis).coordinates
        for s in observable.eigenstates
    ]
    return MeasurementSimplex(observable.dimension, np.stack(rows))


def project_onto_membrane(r: BlochVector, simplex: MeasurementSimplex) -> BlochVector:
    """Orthogonal projection of a state point onto the membrane's affine hull."""
    if r.dimension != simplex.dimension:
        raise DimensionError("state and simplex dimensions differ")
    rel = r.coordinates - simplex.vertices[0]
    q = simplex.frame
    return BlochVector(r.dimension, simplex.vertices[0] + q @ (q.T @ rel))


def _barycentric_raw(point: np.ndarray, simplex: MeasurementSimplex) -> np.ndarray:
    """Least-squares solve of the stacked vertex system [V^T; 1] w = [p; 1]."""
    n = simplex.dimension
    a = np.vstack([simplex.vertices.T, np.ones((1, n))])
    b = np.append(point, 1.0)
    w, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
    return w / w.sum()


def barycentric_coordinates(
    point: BlochVector, simplex: MeasurementSimplex
) -> BarycentricCoordinates:
    """Weights w with point = sum_i w_i n_i and sum w_i = 1.

    The point must lie in the membrane's affine hull (within 1e-8) and
    inside the simplex up to float noise; clamping and error thresholds
    follow ``BarycentricCoordinates.clamped``.
    """
    if point.dimension != simplex.dimension:
        raise DimensionError("point and simplex dimensions differ")
    p = point.coordinates
    dist = simplex.hull_distance(p)
    if dist > HULL_TOL:
        raise GeometryError(
            f"point lies {dist:.3e} from the membrane's affine hull"
        )
    return BarycentricCoordinates.clamped(_barycentric_raw(p, simplex))


def born_probabilities(
    state: DensityOperator, observable: Observable
) -> BarycentricCoordinates:
    """Hilbert-space outcome probabilities p_i = Tr(D P_i) = <n_i| D |n_i>.

    This is the oracle route against which the membrane geometry is checked.
    """
    if state.dimension != observable.dimension:
        raise DimensionError("state and observable dimensions differ")
    probs = np.array(
        [
            float(np.real(np.vdot(s.amplitudes, state.matrix @ s.amplitudes)))
            for s in observable.eigenstates
        ]
    )
    return BarycentricCoordinates.clamped(probs)


def _sqrt_gram_volume(points: np.ndarray) -> float:
    """Gram-determinant volume of conv(points), up to the common factorial.

    In membrane-local coordinates the edge matrix is square, so the square
    root of det(E E^T) is just |det E|; evaluating it that way keeps the
    noise floor at machine precision instead of its square root.
    """
    edges = points[1:] - points[0]
    return float(abs(np.linalg.det(edges)))


def subsimplex_volume_fractions(
    on_membrane: BlochVector, simplex: MeasurementSimplex
) -> BarycentricCoordinates:
    """Volume fraction of each tension-line sub-simplex.

    Sub-simplex i is conv({p} union {n_j : j != i}); its volume divided by
    the full simplex volume equals barycentric weight i.  Computed through
    Gram determinants in membrane-local coordinates, it is an independent
    cross-check of the linear-solve route.
    """
    if on_membrane.dimension != simplex.dimension:
        raise DimensionError("point and simplex dimensions differ")
    p = on_membrane.coordinates
    if simplex.hull_distance(p) > HULL_TOL:
        raise GeometryError("point is not on the membrane")
    n = simplex.dimension
    local_p = simplex.to_local(p)
    total = _sqrt_gram_volume(simplex.local_vertices)
    if total < 1e-12:
        raise GeometryError("degenerate simplex: zero volume")
    fractions = np.empty(n)
    for i in range(n):
        pts = simplex.local_vertices.copy()
        pts[i] = local_p
        fractions[i] = _sqrt_gram_volume(pts) / total
    if abs(fractions.sum() - 1.0) > 1e-8:
        raise GeometryError(
            f"sub-simplex volumes sum to {fractions.sum():.9f}; "
            "point lies outside the simplex"
        )
    return BarycentricCoordinates.clamped(fractions / fractions.sum())


def classify_breaking_point(
    breaking_point: BlochVector,
    on_membrane: BlochVector,
    simplex: MeasurementSimplex,
) -> int:
    """Outcome index of a membrane breaking point.

    Breaking inside sub-simplex i (anchored at the landed state point p and
    the vertices other than n_i) tears those anchors away and the membrane
    contracts to n_i.  Writing v, u for the barycentric weights of the
    breaking point and of p, membership in sub-simplex i is equivalent to
    v_i / u_i <= v_j / u_j for all j, so the outcome is the argmin of the
    ratios; on tension lines (ties) the lowest index wins.
    """
    v = barycentric_coordinates(breaking_point, simplex).weights
    u = barycentric_coordinates(on_membrane, simplex).weights
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = v / u
    # A zero weight of p means the sub-simplex is a measure-zero sliver the
    # membrane cannot tear into; never classify there.
    ratios[u == 0.0] = np.inf
    return int(np.argmin(ratios))
