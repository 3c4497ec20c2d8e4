"""
Euler-type Integrals

Quadrature for

    Γ(R)Γ⁻¹(Q)Γ⁻¹(R−Q) ∫₀¹ u^{Q−I} (1−u)^{R−Q−I} (1−z u^q)^{−P} du

with commuting matrix parameters. The matrix weights are split as
u^{Q−I} = u^{(b(Q)−1)} · u^{Q−b(Q)I}, and likewise for (1−u); the scalar
singular factors become the weight of a Jacobi-type rule and the bounded
matrix remainder is evaluated at every node in one batched pass.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.special

from common import AccuracyError, DomainError, PreconditionError, relative_residual
from matrix_core import FunctionPlan, as_cmatrix, check_commuting, spectral_floor
from special_fn import gamma_matrix, reciprocal_gamma

DEFAULT_QUADRATURE_TOL = 1e-11
QUADRATURE_START_NODES = 16
QUADRATURE_MAX_NODES = 1024
INTEGER_SPECTRUM_TOL = 1e-12
TANH_SINH_MAX_S = 345.0
TANH_SINH_DECAY = 40.0
METHODS = ("auto", "gauss-jacobi", "tanh-sinh")


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights on [0,1] for the weight u^beta (1−u)^alpha."""

    alpha: float
    beta: float
    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    log_nodes: np.ndarray
    log_complements: np.ndarray

    def __len__(self):
        return len(self.nodes)


def _frozen(*arrays):
    for a in arrays:
        a.setflags(write=False)
    return arrays


def _check_exponents(n, alpha, beta):
    if n < 1:
        raise DomainError(f"Rule needs at least one node, got {n}")
    if alpha <= -1 or beta <= -1:
        raise DomainError(f"Jacobi exponents must exceed -1, got alpha={alpha}, beta={beta}")


def _jacobi_recurrence(n, a, b):
    """Diagonal and off-diagonal of the Jacobi matrix for (1−x)^a (1+x)^b on [−1,1]."""
    i = np.arange(n, dtype=float)
    s = 2 * i + a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        diag = (b * b - a * a) / (s * (s + 2))
    diag[0] = (b - a) / (a + b + 2)

    k = np.arange(1, n, dtype=float)
    sk = 2 * k + a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        rb = 4 * k * (k + a) * (k + b) * (k + a + b) / ((sk * sk - 1) * sk * sk)
    if n > 1:
        rb[0] = 4 * (a + 1) * (b + 1) / ((a + b + 3) * (a + b + 2) ** 2)
    return diag, np.sqrt(rb)


@functools.lru_cache(maxsize=256)
def gauss_jacobi_rule(n, alpha, beta):
    """n-point Gauss rule for u^beta (1−u)^alpha on [0,1] (Golub–Welsch).

    Raises:
        DomainError: If alpha or beta is not above −1.
    """
    _check_exponents(n, alpha, beta)
    a, b = float(alpha), float(beta)
    diag, off = _jacobi_recurrence(n, a, b)
    if n == 1:
        x, first = diag, np.ones(1)
    else:
        x, vectors = scipy.linalg.eigh_tridiagonal(diag, off)
        first = vectors[0]
    total = math.exp(scipy.special.betaln(a + 1, b + 1))
    nodes = (1 + x) / 2
    weights = total * first**2
    return QuadratureRule(
        a, b, *_frozen(nodes, weights), "gauss-jacobi", *_frozen(np.log(nodes), np.log1p(-nodes))
    )


@functools.lru_cache(maxsize=256)
def tanh_sinh_rule(n, alpha, beta):
    """Tanh-sinh rule with n = 2N+1 nodes and the weight u^beta (1−u)^alpha folded in.

    Nodes are u = 1/(1+e^{−2s}), s = (π/2) sinh t, on a uniform t grid truncated
    where the folded weight has decayed by e^{−40}. Logs of u and 1−u are
    kept so nodes that round to 0 or 1 stay usable.
    """
    _check_exponents(n, alpha, beta)
    half = max(1, n // 2)
    decay = min(alpha, beta) + 1
    s_end = min(TANH_SINH_MAX_S, max(TANH_SINH_DECAY / (2 * decay), 3.0))
    t_max = math.asinh(2 * s_end / math.pi)
    h = t_max / half
    t = h * np.arange(-half, half + 1)
    s = (math.pi / 2) * np.sinh(t)
    log_u = -np.logaddexp(0.0, -2 * s)
    log_complement = -np.logaddexp(0.0, 2 * s)
    log_cosh = np.logaddexp(t, -t) - math.log(2.0)
    log_weights = (
        math.log(h) + math.log(math.pi) + log_cosh + (beta + 1) * log_u + (alpha + 1) * log_complement
    )
    nodes = np.exp(log_u)
    weights = np.exp(log_weights)
    return QuadratureRule(
        float(alpha), float(beta), *_frozen(nodes, weights), "tanh-sinh", *_frozen(log_u, log_complement)
    )


RULES = {"gauss-jacobi": gauss_jacobi_rule, "tanh-sinh": tanh_sinh_rule}


@dataclass(frozen=True)
class QuadratureResult:
    value: np.ndarray
    nodes_used: int
    residual: float
    method: str
    history: tuple


def _polynomial_remainder(plan):
    """True if u^{plan matrix} is a polynomial in u: non-negative integer, non-defective spectrum."""
    values = plan.eigenvalues
    nearest = np.round(values.real)
    integral = np.all(np.abs(values - nearest) <= INTEGER_SPECTRUM_TOL) and np.all(nearest >= 0)
    return bool(integral) and all(powers is None for powers in plan.powers)


def weighted_matrix_integral(
    left,
    right,
    kernel=None,
    tol=DEFAULT_QUADRATURE_TOL,
    method="auto",
    max_nodes=QUADRATURE_MAX_NODES,
):
    """∫₀¹ u^{A−I} (1−u)^{B−I} K(u) du for commuting positive stable A, B.

    Args:
        left: A, the exponent matrix at u = 0
        right: B, the exponent matrix at u = 1
        kernel: Optional callable taking a QuadratureRule and returning K at its nodes, shape (n, dim, dim)
        tol: Relative difference between successive ladder levels that ends refinement
        method: "auto", "gauss-jacobi" or "tanh-sinh"
        max_nodes: Largest rule size on the doubling ladder

    Returns:
        QuadratureResult

    Raises:
        PreconditionError: If A or B is not positive stable.
        AccuracyError: If the ladder ends before two levels agree to ``tol``.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    left, right = as_cmatrix(left), as_cmatrix(right)
    b_left, b_right = spectral_floor(left), spectral_floor(right)
    if b_left <= 0 or b_right <= 0:
        raise PreconditionError(
            f"Weight exponents must be positive stable, got b = {b_left:.4g} and {b_right:.4g}"
        )
    eye = np.eye(left.shape[0])
    left_plan = FunctionPlan(left - b_left * eye)
    right_plan = FunctionPlan(right - b_right * eye)
    if method == "auto":
        smooth = _polynomial_remainder(left_plan) and _polynomial_remainder(right_plan)
        method = "gauss-jacobi" if smooth else "tanh-sinh"
    builder = RULES[method]

    previous = None
    history = []
    n = QUADRATURE_START_NODES
    while n <= max_nodes:
        rule = builder(n, b_right - 1, b_left - 1)
        values = left_plan.exp_scaled(rule.log_nodes) @ right_plan.exp_scaled(rule.log_complements)
        if kernel is not None:
            values = values @ kernel(rule)
        current = np.einsum("n,nij->ij", rule.weights, values)
        if previous is not None:
            residual = relative_residual(current, previous)
            history.append((len(rule), residual))
            if residual <= tol:
                return QuadratureResult(as_cmatrix(current), len(rule), residual, method, tuple(history))
        previous = current
        n *= 2

    last = history[-1][1] if history else float("inf")
    raise AccuracyError(
        f"Quadrature did not reach tol {tol:.1e} with {max_nodes} nodes (last residual {last:.3e})",
        residual=last,
        history=history,
    )


@dataclass(frozen=True)
class EulerIntegralSpec:
    p: np.ndarray
    q_mat: np.ndarray
    r_mat: np.ndarray
    z: complex
    q_exp: int
    prefactor: np.ndarray

    @classmethod
    def build(cls, p, q_mat, r_mat, z, q_exp=2):
        """Validate the parameters and compute Γ(R)Γ⁻¹(Q)Γ⁻¹(R−Q).

        Raises:
            DomainError: If q_exp < 1 or 1 − z u^q crosses the branch cut.
            PreconditionError: If Q, R, R−Q are not positive stable or the matrices do not commute.
        """
        q_mat = as_cmatrix(q_mat)
        dim = q_mat.shape[0]

        def lift(x):
            x = np.asarray(x, dtype=complex)
            return as_cmatrix(x * np.eye(dim) if x.ndim == 0 else x)

        p, r_mat = lift(p), lift(r_mat)
        if int(q_exp) != q_exp or q_exp < 1:
            raise DomainError(f"Exponent q must be a positive integer, got {q_exp}")
        z = complex(z)
        if z.imag == 0 and z.real > 1:
            raise DomainError(f"1 - z u^q reaches the branch cut for z = {z.real:.6g}")
        check_commuting([p, q_mat, r_mat], ["P", "Q", "R"])
        for name, matrix in (("Q", q_mat), ("R", r_mat), ("R-Q", r_mat - q_mat)):
            if spectral_floor(matrix) <= 0:
                raise PreconditionError(f"{name} is not positive stable")
        prefactor = gamma_matrix(r_mat) @ reciprocal_gamma(q_mat) @ reciprocal_gamma(r_mat - q_mat)
        return cls(p, q_mat, r_mat, z, int(q_exp), as_cmatrix(prefactor))


def euler_integral_detailed(spec, tol=DEFAULT_QUADRATURE_TOL, method="auto"):
    """Evaluate the Euler-type integral of ``spec``; at z = 1 the weight becomes (1−u)^{R−Q−P−I}.

    Raises:
        PreconditionError: At z = 1 when R−Q−P is not positive stable.
        AccuracyError: If the quadrature ladder does not converge.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    p_plan = FunctionPlan(spec.p)
    q = spec.q_exp

    if spec.z == 1:
        right = spec.r_mat - spec.q_mat - spec.p
        if spectral_floor(right) <= 0:
            raise PreconditionError("R-Q-P must be positive stable at z = 1")
        if q == 1:
            kernel = None
        else:

            def kernel(rule):
                total = sum(rule.nodes**j for j in range(q))
                return p_plan.exp_scaled(-np.log(total))

    else:
        right = spec.r_mat - spec.q_mat

        def kernel(rule):
            return p_plan.exp_scaled(-np.log(1 - spec.z * rule.nodes**q + 0j))

    result = weighted_matrix_integral(spec.q_mat, right, kernel, tol, method)
    return QuadratureResult(
        as_cmatrix(spec.prefactor @ result.value),
        result.nodes_used,
        result.residual,
        result.method,
        result.history,
    )


def euler_integral(spec, tol=DEFAULT_QUADRATURE_TOL):
    """Γ(R)Γ⁻¹(Q)Γ⁻¹(R−Q) ∫₀¹ u^{Q−I} (1−u)^{R−Q−I} (1−z u^q)^{−P} du."""
    return euler_integral_detailed(spec, tol).value
