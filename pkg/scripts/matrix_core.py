"""
Matrix Core

Dense complex matrix support for the matrix special functions. It includes:
- Validation of square, finite complex matrices
- Spectral abscissa, logarithmic norms and positive stability
- Holomorphic functions of a matrix by the block Schur-Parlett method
- Norm bounds for matrix exponentials and powers
- Seeded generation of commuting positive stable matrix families
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from common import (
    ConfluenceError,
    DomainError,
    GenerationError,
    NumericalFailureError,
    PreconditionError,
    commutator_norm,
)

CLUSTER_RELATIVE_TOL = 1e-4
TAYLOR_TAIL_TOL = 1e-10
DEFAULT_CAUCHY_RADIUS = 0.5
MIN_CAUCHY_SAMPLES = 32
MAX_SIMILARITY_CONDITION = 50.0
GENERATION_RETRIES = 100
COMMUTATION_TOL = 1e-10

MARGIN_LABELS = ("Q", "R", "R-Q", "R-P", "R-Q-P")


def as_cmatrix(p):
    """Return ``p`` as a read-only complex128 square matrix.

    Scalars become 1×1 matrices.

    Raises:
        ValueError: If the array is not square or has non-finite entries.
    """
    if isinstance(p, np.ndarray) and p.dtype == np.complex128 and p.ndim == 2 and not p.flags.writeable:
        return p
    matrix = np.array(p, dtype=complex)
    if matrix.ndim == 0:
        matrix = matrix.reshape(1, 1)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise ValueError(f"Expected a non-empty square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("Matrix has non-finite entries")
    matrix.setflags(write=False)
    return matrix


def identity(dim):
    return as_cmatrix(np.eye(dim, dtype=complex))


def eigenvalues(p):
    """Eigenvalues of ``p``.

    Raises:
        NumericalFailureError: If the eigenvalue iteration does not converge.
    """
    try:
        return np.linalg.eigvals(as_cmatrix(p))
    except np.linalg.LinAlgError as e:
        raise NumericalFailureError(f"Eigenvalue computation failed: {e}")


def spectral_abscissa(p):
    """a(P): the largest real part over the spectrum."""
    return float(np.max(eigenvalues(p).real))


def spectral_floor(p):
    """b(P) = −a(−P): the smallest real part over the spectrum."""
    return float(np.min(eigenvalues(p).real))


def _hermitian_part_eigenvalues(p):
    p = as_cmatrix(p)
    try:
        return np.linalg.eigvalsh((p + p.conj().T) / 2)
    except np.linalg.LinAlgError as e:
        raise NumericalFailureError(f"Eigenvalue computation failed: {e}")


def log_norm(p):
    """μ(P): the largest eigenvalue of the Hermitian part (P + P*)/2."""
    return float(np.max(_hermitian_part_eigenvalues(p)))


def log_norm_lower(p):
    """μ̃(P) = −μ(−P): the smallest eigenvalue of the Hermitian part."""
    return float(np.min(_hermitian_part_eigenvalues(p)))


def is_positive_stable(p, margin=0.0):
    """True iff every eigenvalue of ``p`` has real part above ``margin``."""
    if margin < 0:
        raise ValueError("margin must be non-negative")
    return spectral_floor(p) > margin


def two_norm(p):
    """Spectral norm: the largest singular value."""
    return float(np.linalg.norm(as_cmatrix(p), 2))


def exp_norm_bound(p, t):
    """Upper bound e^{t a(P)} Σ_{u<r} (‖P‖ r^{1/2} t)^u / u! on ‖e^{tP}‖, for t ≥ 0."""
    if t < 0:
        raise DomainError(f"exp_norm_bound needs t >= 0, got {t}")
    p = as_cmatrix(p)
    r = p.shape[0]
    x = two_norm(p) * math.sqrt(r) * t
    series = sum(x**u / math.factorial(u) for u in range(r))
    return math.exp(t * spectral_abscissa(p)) * series


def power_norm_bound(p, t):
    """Upper bound t^{a(P)} Σ_{u<r} (‖P‖ r^{1/2} ln t)^u / u! on ‖t^P‖, for t ≥ 1."""
    if t < 1:
        raise DomainError(f"power_norm_bound needs t >= 1, got {t}")
    return exp_norm_bound(p, math.log(t))


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    schur_unitary: np.ndarray
    schur_triangular: np.ndarray

    def reconstruct(self):
        u = self.schur_unitary
        return u @ self.schur_triangular @ u.conj().T


def spectral_data(p):
    """Complex Schur factorization P = U T U*.

    Raises:
        NumericalFailureError: If the Schur iteration does not converge.
    """
    p = as_cmatrix(p)
    try:
        t, u = scipy.linalg.schur(p, output="complex")
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalFailureError(f"Schur decomposition failed: {e}")
    return SpectralData(
        eigenvalues=np.diag(t).copy(),
        schur_unitary=as_cmatrix(u),
        schur_triangular=as_cmatrix(np.triu(t)),
    )


def _single_linkage(values, threshold):
    """Cluster labels joining values closer than ``threshold``, numbered by first appearance."""
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= threshold:
                parent[find(j)] = find(i)

    labels, names = [], {}
    for i in range(n):
        labels.append(names.setdefault(find(i), len(names)))
    return np.array(labels)


def _call_vectorized(f, z, *args):
    """Evaluate ``f`` on a 1-D array, falling back to elementwise calls for scalar-only callables."""
    try:
        values = np.asarray(f(z, *args), dtype=complex)
    except TypeError:
        values = None
    if values is None or values.shape[-1:] != z.shape:
        values = np.array([complex(f(complex(x), *args)) for x in z])
    return values


class FunctionPlan:
    """Reordered complex Schur form of one matrix, reusable across function evaluations.

    Eigenvalues closer than CLUSTER_RELATIVE_TOL·‖T‖ are grouped by single
    linkage and moved next to each other on the diagonal. Diagonal blocks are
    evaluated by a Taylor expansion about the cluster mean of order 2·dim,
    off-diagonal blocks by the block Parlett recurrence, whose Sylvester
    operators are factorized once here.
    """

    def __init__(self, p):
        self.matrix = as_cmatrix(p)
        self.dim = self.matrix.shape[0]
        self.order = 2 * self.dim

        try:
            t, z = scipy.linalg.schur(self.matrix, output="complex")
        except (np.linalg.LinAlgError, ValueError) as e:
            raise NumericalFailureError(f"Schur decomposition failed: {e}")
        t = np.triu(t)
        values = np.diag(t).copy()
        scale = np.linalg.norm(t)
        self.threshold = CLUSTER_RELATIVE_TOL * scale if scale > 0 else 0.0
        labels = _single_linkage(values, self.threshold)

        self.schur_triangular, self.schur_unitary, self.blocks = self._reorder(t, z, values, labels)
        self.eigenvalues = np.diag(self.schur_triangular).copy()
        self._prepare_blocks()

    def _reorder(self, t, z, values, labels):
        t = t.copy()
        z = z.copy()
        sizes = np.bincount(labels)
        start = 0
        blocks = []

        def label_of(x):
            return labels[int(np.argmin(np.abs(values - x)))]

        for cluster in range(len(sizes)):
            size = int(sizes[cluster])
            stop = start + size
            current = [label_of(x) for x in np.diag(t)[start:stop]]
            if cluster < len(sizes) - 1 and any(c != cluster for c in current):
                try:
                    t2, z2, sdim = scipy.linalg.schur(
                        t[start:, start:],
                        output="complex",
                        sort=lambda x, c=cluster: bool(label_of(x) == c),
                    )
                except (np.linalg.LinAlgError, ValueError) as e:
                    raise NumericalFailureError(f"Schur reordering failed: {e}")
                if sdim != size:
                    raise NumericalFailureError(
                        f"Schur reordering moved {sdim} eigenvalues, expected {size}"
                    )
                t[start:, start:] = np.triu(t2)
                t[:start, start:] = t[:start, start:] @ z2
                z[:, start:] = z[:, start:] @ z2
            blocks.append((start, stop))
            start = stop
        return t, z, blocks

    def _prepare_blocks(self):
        t = self.schur_triangular
        self.means = []
        self.powers = []
        for start, stop in self.blocks:
            block = t[start:stop, start:stop]
            mean = complex(np.mean(np.diag(block)))
            nilpotent = block - mean * np.eye(stop - start)
            self.means.append(mean)
            if stop - start == 1 or not np.any(nilpotent):
                self.powers.append(None)
                continue
            powers = [np.eye(stop - start, dtype=complex)]
            for _ in range(self.order):
                powers.append(powers[-1] @ nilpotent)
            self.powers.append(np.array(powers))

        self.sylvester = {}
        for i, (si, ei) in enumerate(self.blocks):
            for j in range(i + 1, len(self.blocks)):
                sj, ej = self.blocks[j]
                tii = t[si:ei, si:ei]
                tjj = t[sj:ej, sj:ej]
                operator = np.kron(tii, np.eye(ej - sj)) - np.kron(np.eye(ei - si), tjj.T)
                self.sylvester[i, j] = scipy.linalg.lu_factor(operator, check_finite=False)

    def _taylor_coefficients(self, f, derivative, radius):
        """Taylor coefficients (batch, block, order+1) about each cluster mean.

        Trivial blocks only need the value at the mean.
        """
        means = np.array(self.means)
        values = _call_vectorized(f, means)
        batched = values.ndim == 2
        values = np.atleast_2d(values)
        if not np.all(np.isfinite(values)):
            bad = means[np.any(~np.isfinite(values), axis=0)][0]
            raise DomainError(f"Function is not defined at eigenvalue {bad:.12g}")

        coefficients = np.zeros((values.shape[0], len(means), self.order + 1), dtype=complex)
        coefficients[:, :, 0] = values
        confluent = [i for i, powers in enumerate(self.powers) if powers is not None]
        if not confluent:
            return coefficients, batched

        cmeans = means[confluent]
        if derivative is not None:
            for k in range(1, self.order + 1):
                dk = np.atleast_2d(_call_vectorized(derivative, cmeans, k))
                coefficients[:, confluent, k] = dk / math.factorial(k)
        else:
            samples = max(MIN_CAUCHY_SAMPLES, 4 * (self.order + 1))
            roots = np.exp(2j * np.pi * np.arange(samples) / samples)
            for idx, mean in zip(confluent, cmeans):
                rho = radius(mean) if callable(radius) else (radius or DEFAULT_CAUCHY_RADIUS)
                circle = _call_vectorized(f, mean + rho * roots)
                circle = np.atleast_2d(circle)
                if not np.all(np.isfinite(circle)):
                    raise DomainError(
                        f"Function is not holomorphic within {rho:.3g} of eigenvalue {mean:.12g}"
                    )
                spectrum = np.fft.fft(circle, axis=-1)[:, 1 : self.order + 1] / samples
                coefficients[:, idx, 1:] = spectrum / rho ** np.arange(1, self.order + 1)
        if not np.all(np.isfinite(coefficients)):
            raise DomainError("Function derivatives are not finite at a clustered eigenvalue")
        return coefficients, batched

    def evaluate(self, f, derivative=None, radius=None):
        """f(P) for a scalar holomorphic ``f``.

        ``f`` may return an extra leading batch axis, in which case the result
        has shape (batch, dim, dim).

        Args:
            f: Callable on a 1-D complex array (or on scalars)
            derivative: Optional callable ``derivative(z, k)`` giving the k-th derivative
            radius: Cauchy sampling radius, a float or a callable of the cluster mean

        Raises:
            DomainError: If ``f`` is not finite at an eigenvalue.
            ConfluenceError: If a cluster's Taylor expansion does not converge.
        """
        coefficients, batched = self._taylor_coefficients(f, derivative, radius)
        count = coefficients.shape[0]
        t = self.schur_triangular
        result = np.zeros((count, self.dim, self.dim), dtype=complex)

        for i, (start, stop) in enumerate(self.blocks):
            powers = self.powers[i]
            if powers is None:
                result[:, start:stop, start:stop] = coefficients[:, i, :1, None] * np.eye(stop - start)
                continue
            block = np.einsum("bk,kij->bij", coefficients[:, i, :], powers)
            tail = np.abs(coefficients[:, i, -2:]) * np.array(
                [np.linalg.norm(powers[-2]), np.linalg.norm(powers[-1])]
            )
            bound = TAYLOR_TAIL_TOL * (1.0 + np.linalg.norm(block, axis=(1, 2)))
            if np.any(tail.max(axis=1) > bound):
                raise ConfluenceError(
                    f"Taylor expansion about eigenvalue cluster {self.means[i]:.12g} does not converge"
                )
            result[:, start:stop, start:stop] = block

        nblocks = len(self.blocks)
        for gap in range(1, nblocks):
            for i in range(nblocks - gap):
                j = i + gap
                si, ei = self.blocks[i]
                sj, ej = self.blocks[j]
                rhs = result[:, si:ei, si:ei] @ t[si:ei, sj:ej] - t[si:ei, sj:ej] @ result[:, sj:ej, sj:ej]
                for k in range(i + 1, j):
                    sk, ek = self.blocks[k]
                    rhs += result[:, si:ei, sk:ek] @ t[sk:ek, sj:ej] - t[si:ei, sk:ek] @ result[:, sk:ek, sj:ej]
                flat = rhs.reshape(count, -1).T
                solved = scipy.linalg.lu_solve(self.sylvester[i, j], flat, check_finite=False)
                result[:, si:ei, sj:ej] = solved.T.reshape(count, ei - si, ej - sj)

        u = self.schur_unitary
        result = np.einsum("ij,bjk,lk->bil", u, result, u.conj())
        if not np.all(np.isfinite(result)):
            raise DomainError("Matrix function overflowed")
        return result if batched else result[0]

    def exp_scaled(self, scales):
        """exp(s·P) for every scalar s in ``scales``; shape (len(scales), dim, dim)."""
        scales = np.asarray(scales, dtype=complex).reshape(-1)

        def f(z):
            return np.exp(np.multiply.outer(scales, z))

        def derivative(z, k):
            return scales[:, None] ** k * np.exp(np.multiply.outer(scales, z))

        return self.evaluate(f, derivative)


def holomorphic_apply(f, p, derivative=None, radius=None):
    """f(P) via complex Schur form and the block Parlett recurrence.

    Args:
        f: Scalar holomorphic function, vectorized or not
        p: Square complex matrix
        derivative: Optional ``derivative(z, k)`` for clustered eigenvalues
        radius: Cauchy sampling radius used when ``derivative`` is absent

    Returns:
        numpy.ndarray: f(P)
    """
    return as_cmatrix(FunctionPlan(p).evaluate(f, derivative, radius))


def matrix_power_scalar(t, p):
    """t^P = exp(P ln t) for t > 0; t = 1 gives I exactly."""
    if not t > 0:
        raise DomainError(f"Scalar base must be positive, got {t}")
    p = as_cmatrix(p)
    if t == 1:
        return identity(p.shape[0])
    return as_cmatrix(FunctionPlan(p).exp_scaled([math.log(t)])[0])


def check_commuting(matrices, names=None, tol=COMMUTATION_TOL):
    """Require every pair to commute within tol·(1 + ‖A‖‖B‖).

    Raises:
        PreconditionError: Naming the first non-commuting pair.
    """
    names = names or [f"#{i}" for i in range(len(matrices))]
    norms = [np.linalg.norm(m, 2) for m in matrices]
    for i in range(len(matrices)):
        for j in range(i + 1, len(matrices)):
            gap = commutator_norm(matrices[i], matrices[j])
            if gap > tol * (1.0 + norms[i] * norms[j]):
                raise PreconditionError(
                    f"Parameters {names[i]} and {names[j]} do not commute (‖[A,B]‖ = {gap:.3e})"
                )


def stability_margins(p, q, r):
    """b(·) of Q, R, R−Q, R−P and R−Q−P, keyed by MARGIN_LABELS."""
    matrices = (q, r, r - q, r - p, r - q - p)
    return {label: spectral_floor(m) for label, m in zip(MARGIN_LABELS, matrices)}


@dataclass(frozen=True)
class StabilityConstraints:
    """Spectral recipe for a commuting family.

    Diagonal entries are drawn with real parts in the given ranges and
    imaginary parts in ±imag_spread. R = Q + gap. P is drawn from p_range,
    fixed to p_scalar·I, or set to gap − residual when residual_range is
    given. ``margins`` maps MARGIN_LABELS to required minimum b(·).
    """

    margins: dict = field(default_factory=lambda: {"Q": 0.1, "R": 0.1, "R-Q": 0.1})
    q_range: tuple = (0.2, 2.0)
    gap_range: tuple = (0.3, 2.0)
    p_range: tuple = (-1.0, 1.5)
    residual_range: tuple = None
    p_scalar: float = None
    imag_spread: float = 0.3

    def satisfied_by(self, margins):
        return all(margins[label] >= minimum for label, minimum in self.margins.items())


@dataclass(frozen=True)
class CommutingTriple:
    p: np.ndarray
    q: np.ndarray
    r: np.ndarray
    similarity: np.ndarray
    seed: int
    stability_margins: dict

    @property
    def dim(self):
        return self.p.shape[0]

    @classmethod
    def from_matrices(cls, p, q, r, similarity=None, seed=0):
        """Wrap explicit matrices (or scalars) and record their margins."""
        q = as_cmatrix(q)
        dim = q.shape[0]

        def lift(x):
            x = np.asarray(x, dtype=complex)
            return as_cmatrix(x * np.eye(dim) if x.ndim == 0 else x)

        p, r = lift(p), lift(r)
        similarity = identity(dim) if similarity is None else as_cmatrix(similarity)
        return cls(p, q, r, similarity, int(seed), stability_margins(p, q, r))

    def commutators(self):
        return (
            commutator_norm(self.p, self.q),
            commutator_norm(self.p, self.r),
            commutator_norm(self.q, self.r),
        )


def _draw(rng, bounds, dim, spread):
    real = rng.uniform(bounds[0], bounds[1], dim)
    imag = rng.uniform(-spread, spread, dim) if spread > 0 else np.zeros(dim)
    return real + 1j * imag


def _random_unitary(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_commuting_triple(seed, dim, constraints=None):
    """Draw P, Q, R = V·diag·V⁻¹ sharing one similarity V with cond(V) ≤ 50.

    Args:
        seed: Integer seed or numpy SeedSequence
        dim: Matrix dimension
        constraints: StabilityConstraints, defaults to Q, R, R−Q margins of 0.1

    Raises:
        GenerationError: If no draw satisfies the constraints after GENERATION_RETRIES tries.
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    constraints = constraints or StabilityConstraints()
    rng = np.random.default_rng(seed)
    spread = constraints.imag_spread

    for _ in range(GENERATION_RETRIES):
        q = _draw(rng, constraints.q_range, dim, spread)
        gap = _draw(rng, constraints.gap_range, dim, spread)
        if constraints.residual_range is not None:
            p = gap - _draw(rng, constraints.residual_range, dim, spread)
        elif constraints.p_scalar is not None:
            p = np.full(dim, constraints.p_scalar, dtype=complex)
        else:
            p = _draw(rng, constraints.p_range, dim, spread)
        r = q + gap
        diagonal = stability_margins(np.diag(p), np.diag(q), np.diag(r))
        if constraints.satisfied_by(diagonal):
            break
    else:
        raise GenerationError(
            f"No {dim}x{dim} family satisfies margins {constraints.margins} "
            f"after {GENERATION_RETRIES} draws"
        )

    left = _random_unitary(rng, dim)
    right = _random_unitary(rng, dim)
    singular = np.exp(rng.uniform(0.0, math.log(MAX_SIMILARITY_CONDITION), dim))
    similarity = (left * singular) @ right
    inverse = (right.conj().T / singular) @ left.conj().T

    def conjugate(d):
        return as_cmatrix((similarity * d) @ inverse)

    p, q, r = conjugate(p), conjugate(q), conjugate(r)
    seed_value = int(seed.generate_state(1, dtype=np.uint64)[0]) if isinstance(seed, np.random.SeedSequence) else int(seed)
    return CommutingTriple(p, q, r, as_cmatrix(similarity), seed_value, stability_margins(p, q, r))
