"""
Generalized Hypergeometric Matrix Series

Truncated-series evaluation of pFq(P_1..P_p; Q_1..Q_q; z) with commuting
matrix parameters, using the term recurrence

    T_0 = I,  T_{m+1} = T_m · Π(P_i + mI) · Π(Q_j + mI)⁻¹ · z/(m+1).

Summation stops once ‖T_m‖/(1+‖S_m‖) ≤ tol for ``consecutive_small``
successive terms. Slowly convergent or only Euler-summable series can be
accelerated with (E,1) means of the partial sums. At z = 1 a p = q+1
series converges only algebraically, S − S_m ~ m^{−E}(A_0 + A_1/m + …) with
E = ΣQ − ΣP, and is extrapolated by Richardson elimination over the
partial sums at m = 16, 32, 64, ….
"""

from dataclasses import dataclass

import numpy as np
import scipy.stats

from common import DomainError, PreconditionError
from matrix_core import as_cmatrix, check_commuting, eigenvalues, matrix_power_scalar, spectral_floor
from special_fn import pochhammer, pole_eigenvalues

DEFAULT_SERIES_TOL = 1e-15
DEFAULT_MAX_TERMS = 5000
DEFAULT_CONSECUTIVE_SMALL = 3
DEFAULT_PATIENCE = 12
UNIT_CIRCLE_MARGIN = 0.15
UNIT_CIRCLE_TOL = 1e-14
TERMINATION_TOL = 1e-10
RICHARDSON_START = 16
RICHARDSON_TOL = 1e-12
ACCELERATIONS = ("none", "euler")


@dataclass(frozen=True)
class SeriesConfig:
    tol: float = DEFAULT_SERIES_TOL
    max_terms: int = DEFAULT_MAX_TERMS
    consecutive_small: int = DEFAULT_CONSECUTIVE_SMALL
    acceleration: str = "none"
    patience: int = DEFAULT_PATIENCE

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")
        if self.consecutive_small < 1:
            raise ValueError("consecutive_small must be at least 1")
        if self.acceleration not in ACCELERATIONS:
            raise ValueError(f"acceleration must be one of {ACCELERATIONS}")


@dataclass(frozen=True)
class SeriesResult:
    """Truncated sum.

    ``last_term_norm`` is the norm of the last raw term, or of the last
    difference between Euler means when ``method`` is "euler".
    """

    value: np.ndarray
    terms_used: int
    last_term_norm: float
    converged: bool
    method: str = "raw"


def _euler_mean(partials):
    n = len(partials) - 1
    weights = scipy.stats.binom.pmf(np.arange(n + 1), n, 0.5)
    return np.einsum("j,jab->ab", weights, np.asarray(partials))


def sum_series(terms, config=None):
    """Sum an iterable of matrix terms under the stop rules of ``config``.

    A finite iterable is summed exactly and reported as converged. With
    Euler acceleration the raw rule is still tried first; otherwise the best
    Euler mean is returned once successive means agree to ``tol`` or have
    stopped improving for ``patience`` steps.
    """
    config = config or SeriesConfig()
    accelerate = config.acceleration == "euler"
    total = None
    used = 0
    last = np.inf
    small = 0
    partials = []
    previous_mean = None
    best = None
    stall = 0
    mean_small = 0

    for term in terms:
        total = np.array(term, dtype=complex) if total is None else total + term
        used += 1
        last = float(np.linalg.norm(term, 2))
        small = small + 1 if last <= config.tol * (1.0 + np.linalg.norm(total, 2)) else 0
        if small >= config.consecutive_small:
            return SeriesResult(as_cmatrix(total), used, last, True, "raw")

        if accelerate:
            partials.append(total)
            mean = _euler_mean(partials)
            if previous_mean is not None:
                diff = float(np.linalg.norm(mean - previous_mean, 2))
                if best is None or diff < best[1]:
                    best = (mean, diff)
                    stall = 0
                else:
                    stall += 1
                scale = 1.0 + np.linalg.norm(mean, 2)
                mean_small = mean_small + 1 if diff <= config.tol * scale else 0
                if mean_small >= config.consecutive_small:
                    return SeriesResult(as_cmatrix(mean), used, diff, True, "euler")
                if stall >= config.patience:
                    break
            previous_mean = mean

        if used >= config.max_terms:
            break
    else:
        if total is None:
            raise ValueError("Empty series")
        return SeriesResult(as_cmatrix(total), used, 0.0, True, "raw")

    if best is not None:
        mean, diff = best
        converged = diff <= config.tol * (1.0 + np.linalg.norm(mean, 2))
        return SeriesResult(as_cmatrix(mean), used, diff, bool(converged), "euler")
    return SeriesResult(as_cmatrix(total), used, last, False, "raw")


def _lift(values, dim):
    out = []
    for value in values:
        value = np.asarray(value, dtype=complex)
        out.append(as_cmatrix(value * np.eye(dim) if value.ndim == 0 else value))
    return tuple(out)


@dataclass(frozen=True)
class HyperParams:
    numerator: tuple
    denominator: tuple
    dim: int

    @classmethod
    def build(cls, numerator, denominator, dim=None):
        """Validate and lift parameters; bare numbers become c·I.

        Raises:
            PreconditionError: If dimensions differ or parameters do not commute.
        """
        shapes = {np.shape(v)[0] for v in list(numerator) + list(denominator) if np.ndim(v) == 2}
        if len(shapes) > 1:
            raise PreconditionError(f"Parameters have different dimensions {sorted(shapes)}")
        if dim is None:
            dim = shapes.pop() if shapes else 1
        elif shapes and shapes.pop() != dim:
            raise PreconditionError(f"Parameters do not have dimension {dim}")
        numerator = _lift(numerator, dim)
        denominator = _lift(denominator, dim)
        names = [f"num[{i}]" for i in range(len(numerator))] + [f"den[{j}]" for j in range(len(denominator))]
        check_commuting(list(numerator) + list(denominator), names)
        return cls(numerator, denominator, dim)

    def termination_index(self):
        """Smallest N with (P_i)_{N+1} = 0 for some numerator, else None.

        A spectrum inside {0, −1, …, −N} is not enough on its own: a Jordan
        block keeps (P)_{N+1} ≠ 0, so the product is checked as well.
        """
        best = None
        eye = np.eye(self.dim)
        for p in self.numerator:
            values = eigenvalues(p)
            poles = pole_eigenvalues(values)
            if len(poles) != len(values):
                continue
            n = int(round(-min(poles.real)))
            scale = np.prod([1.0 + np.linalg.norm(p + k * eye, 2) for k in range(n + 1)])
            if np.linalg.norm(pochhammer(p, n + 1), 2) > TERMINATION_TOL * scale:
                continue
            best = n if best is None else min(best, n)
        return best


def _require_invertible_shifts(params, limit):
    for j, q in enumerate(params.denominator):
        poles = pole_eigenvalues(eigenvalues(q), limit=limit)
        if len(poles):
            m = int(round(-poles[0].real))
            raise DomainError(f"Denominator den[{j}] + {m}I is singular", index=m)


def _check_argument(params, z, config, terminating):
    p, q = len(params.numerator), len(params.denominator)
    if terminating or p <= q or z == 0:
        return
    if p > q + 1:
        raise DomainError(f"{p}F{q} diverges for z != 0 unless it terminates")
    radius = abs(z)
    if radius > 1 + UNIT_CIRCLE_TOL:
        raise DomainError(f"|z| = {radius:.6g} > 1 is outside the disk of convergence")
    if radius < 1 - UNIT_CIRCLE_TOL:
        return
    if config.acceleration == "euler" and abs(z - 1) > UNIT_CIRCLE_TOL:
        return
    excess = sum(params.denominator) - sum(params.numerator)
    margin = spectral_floor(excess)
    if margin < UNIT_CIRCLE_MARGIN:
        raise PreconditionError(
            f"b(ΣQ − ΣP) = {margin:.4g} < {UNIT_CIRCLE_MARGIN} at |z| = 1"
        )


def series_terms(params, z, count=None):
    """Yield T_0, T_1, … (T_0..T_count when ``count`` is given)."""
    eye = np.eye(params.dim)
    term = eye.astype(complex)
    yield term
    m = 0
    while count is None or m < count:
        for p in params.numerator:
            term = term @ (p + m * eye)
        for j, q in enumerate(params.denominator):
            try:
                term = np.linalg.solve(q + m * eye, term)
            except np.linalg.LinAlgError:
                raise DomainError(f"Denominator den[{j}] + {m}I is singular", index=m)
        term = term * (z / (m + 1))
        yield term
        m += 1


def extrapolate_at_one(params, config=None):
    """Richardson extrapolation of a p = q+1 series at z = 1.

    Level j of the table removes the m^{−(E+jI)} part of the error using
    the factor 2^{−(E+jI)}, which commutes with every partial sum. The
    result is converged once two successive diagonal estimates agree to
    max(tol, RICHARDSON_TOL).
    """
    config = config or SeriesConfig()
    eye = np.eye(params.dim)
    excess = sum(params.denominator) - sum(params.numerator)
    checkpoints = []
    m = RICHARDSON_START
    while m <= config.max_terms:
        checkpoints.append(m)
        m *= 2
    if len(checkpoints) < 2:
        return sum_series(series_terms(params, 1.0), config)

    factors, inverses = [], []
    for j in range(len(checkpoints) - 1):
        factor = matrix_power_scalar(0.5, excess + j * eye)
        factors.append(factor)
        inverses.append(np.linalg.inv(eye - factor))

    tol = max(config.tol, RICHARDSON_TOL)
    terms = series_terms(params, 1.0)
    total = np.zeros((params.dim, params.dim), dtype=complex)
    used = 0
    previous_row = None
    previous = None
    best = None
    for k, stop in enumerate(checkpoints):
        while used < stop:
            total = total + next(terms)
            used += 1
        row = [total.copy()]
        for j in range(k):
            row.append((row[j] - factors[j] @ previous_row[j]) @ inverses[j])
        estimate = row[-1]
        if previous is not None:
            diff = float(np.linalg.norm(estimate - previous, 2))
            if best is None or diff < best[1]:
                best = (estimate, diff)
            if diff <= tol * (1.0 + np.linalg.norm(estimate, 2)):
                return SeriesResult(as_cmatrix(estimate), used, diff, True, "richardson")
        previous_row = row
        previous = estimate
    estimate, diff = best
    return SeriesResult(as_cmatrix(estimate), used, diff, False, "richardson")


def pfq(params, z, config=None):
    """Generalized hypergeometric matrix function pFq(params; z).

    Non-terminating p = q+1 series at z = 1 go through ``extrapolate_at_one``.

    Args:
        params: HyperParams
        z: Complex argument
        config: SeriesConfig

    Returns:
        SeriesResult

    Raises:
        DomainError: On |z| > 1 for non-terminating p = q+1 series, or a singular denominator shift.
        PreconditionError: When the |z| = 1 margin rule fails.
    """
    config = config or SeriesConfig()
    z = complex(z)
    terminating = params.termination_index()
    _check_argument(params, z, config, terminating is not None)
    limit = config.max_terms if terminating is None else terminating
    _require_invertible_shifts(params, limit)
    at_one = abs(z - 1) <= UNIT_CIRCLE_TOL
    if terminating is None and at_one and len(params.numerator) == len(params.denominator) + 1:
        return extrapolate_at_one(params, config)
    return sum_series(series_terms(params, z, terminating), config)


def two_f_one(p, q, r, z, config=None):
    """2F1(P, Q; R; z)."""
    return pfq(HyperParams.build([p, q], [r]), z, config)
