"""
Special Matrix Functions

Gamma, reciprocal gamma, beta, Pochhammer symbol and binomial coefficient of
a matrix argument, plus the limit form of the gamma function and the
Pochhammer multiplication formula.

Scalar gamma uses the Lanczos approximation (g = 7, 9 coefficients) with the
reflection formula below Re(z) = 0.5; matrix versions lift it through the
block Schur-Parlett evaluation of matrix_core.
"""

import math
from dataclasses import dataclass

import numpy as np

from common import DomainError, NumericalFailureError, relative_residual
from matrix_core import (
    FunctionPlan,
    as_cmatrix,
    check_commuting,
    eigenvalues,
    holomorphic_apply,
    identity,
    matrix_power_scalar,
)

LANCZOS_G = 7
LANCZOS_COEFFICIENTS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
POLE_TOL = 1e-10
MULTIPLICATION_TOL = 1e-11


def _sinpi(z):
    """sin(πz) with exact zeros at the integers."""
    x, y = z.real, z.imag
    r = x - 2.0 * np.round(x / 2.0)
    s = np.where(r == np.round(r), 0.0, np.sin(np.pi * r))
    half = r - 0.5
    c = np.where(half == np.round(half), 0.0, np.cos(np.pi * r))
    return s * np.cosh(np.pi * y) + 1j * c * np.sinh(np.pi * y)


def _lanczos(z):
    """Lanczos sum for Re(z) ≥ 0.5."""
    z = z - 1.0
    x = np.full(z.shape, LANCZOS_COEFFICIENTS[0], dtype=complex)
    for i, c in enumerate(LANCZOS_COEFFICIENTS[1:], start=1):
        x = x + c / (z + i)
    t = z + LANCZOS_G + 0.5
    return math.sqrt(2 * math.pi) * np.exp((z + 0.5) * np.log(t) - t) * x


def scalar_gamma(z):
    """Γ(z) elementwise; poles map to complex infinity."""
    z = np.asarray(z, dtype=complex)
    flat = z.reshape(-1)
    out = np.empty_like(flat)
    reflect = flat.real < 0.5
    out[~reflect] = _lanczos(flat[~reflect])
    zr = flat[reflect]
    s = _sinpi(zr)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[reflect] = np.where(s == 0, np.inf, np.pi / (s * _lanczos(1.0 - zr)))
    return out.reshape(z.shape)


def scalar_rgamma(z):
    """1/Γ(z) elementwise; exactly zero at the non-positive integers."""
    z = np.asarray(z, dtype=complex)
    flat = z.reshape(-1)
    out = np.empty_like(flat)
    reflect = flat.real < 0.5
    out[~reflect] = 1.0 / _lanczos(flat[~reflect])
    zr = flat[reflect]
    out[reflect] = _sinpi(zr) * _lanczos(1.0 - zr) / np.pi
    return out.reshape(z.shape)


def pole_eigenvalues(values, limit=None):
    """Eigenvalues within POLE_TOL of a non-positive integer (down to −limit if given)."""
    values = np.asarray(values, dtype=complex)
    nearest = np.round(values.real)
    hit = (nearest <= 0) & (np.abs(values - nearest) <= POLE_TOL * np.maximum(1.0, np.abs(nearest)))
    if limit is not None:
        hit &= nearest >= -limit
    return values[hit]


def _require_no_poles(values, what):
    poles = pole_eigenvalues(values)
    if len(poles):
        raise DomainError(f"{what} has eigenvalue {poles[0]:.12g} at a pole of the gamma function")


def _pole_radius(mean):
    nearest = min(0.0, round(mean.real))
    return min(0.5, 0.5 * abs(mean - nearest))


def gamma_matrix(p):
    """Γ(P) through the scalar Lanczos gamma.

    Raises:
        DomainError: If an eigenvalue of ``p`` is a non-positive integer.
    """
    plan = FunctionPlan(p)
    _require_no_poles(plan.eigenvalues, "Gamma argument")
    return as_cmatrix(plan.evaluate(scalar_gamma, radius=_pole_radius))


def reciprocal_gamma(p):
    """Γ⁻¹(P); eigenvalues at poles contribute zero."""
    return holomorphic_apply(scalar_rgamma, p)


def pochhammer(p, m):
    """(P)_m = P(P+I)···(P+(m−1)I), with (P)_0 = I."""
    if m < 0:
        raise DomainError(f"Pochhammer index must be non-negative, got {m}")
    p = as_cmatrix(p)
    eye = np.eye(p.shape[0])
    result = eye.astype(complex)
    for k in range(m):
        result = result @ (p + k * eye)
    return as_cmatrix(result)


def reciprocal_gamma_shifted(p, n):
    """Γ⁻¹(P) as (P)_n · Γ⁻¹(P + nI)."""
    p = as_cmatrix(p)
    shifted = p + n * np.eye(p.shape[0])
    return as_cmatrix(pochhammer(p, n) @ reciprocal_gamma(shifted))


@dataclass(frozen=True)
class PochhammerCache:
    base: np.ndarray
    values: tuple

    @classmethod
    def build(cls, base, m_max):
        """Cache (base)_m for m = 0..m_max."""
        base = as_cmatrix(base)
        eye = np.eye(base.shape[0])
        values = [identity(base.shape[0])]
        for k in range(m_max):
            values.append(as_cmatrix(values[-1] @ (base + k * eye)))
        return cls(base, tuple(values))

    def __getitem__(self, m):
        return self.values[m]

    def __len__(self):
        return len(self.values)


def matrix_binomial(p, m):
    """binom(−P, m) = (−1)^m (P)_m / m!."""
    if m < 0:
        raise DomainError(f"Binomial index must be non-negative, got {m}")
    p = as_cmatrix(p)
    eye = np.eye(p.shape[0])
    result = eye.astype(complex)
    for k in range(m):
        result = result @ (p + k * eye) * (-1.0 / (k + 1))
    return as_cmatrix(result)


def beta_matrix(p, q):
    """B(P, Q) = Γ(P) Γ(Q) Γ⁻¹(P+Q) for commuting P, Q.

    Raises:
        PreconditionError: If ``p`` and ``q`` do not commute.
        DomainError: If P, Q or P+Q has an eigenvalue at a pole.
    """
    p, q = as_cmatrix(p), as_cmatrix(q)
    check_commuting([p, q], ["P", "Q"])
    total = p + q
    _require_no_poles(eigenvalues(total), "P+Q")
    return as_cmatrix(gamma_matrix(p) @ gamma_matrix(q) @ reciprocal_gamma(total))


def beta_matrix_quadrature(p, q, tol=None):
    """B(P, Q) = ∫₀¹ t^{P−I} (1−t)^{Q−I} dt by quadrature, for positive stable commuting P, Q."""
    from euler_quadrature import DEFAULT_QUADRATURE_TOL, weighted_matrix_integral

    p, q = as_cmatrix(p), as_cmatrix(q)
    check_commuting([p, q], ["P", "Q"])
    return weighted_matrix_integral(p, q, tol=tol or DEFAULT_QUADRATURE_TOL).value


def gamma_limit_form(p, m):
    """(m−1)! · (P)_m⁻¹ · m^P, the m-th term of the sequence converging to Γ(P).

    Evaluated as P⁻¹ · Π_{k<m} k(P+kI)⁻¹ · m^P so the factorials never overflow.

    Raises:
        DomainError: If m < 1 or (P)_m is singular.
    """
    if m < 1:
        raise DomainError(f"Limit index must be at least 1, got {m}")
    p = as_cmatrix(p)
    singular = pole_eigenvalues(eigenvalues(p), limit=m - 1)
    if len(singular):
        raise DomainError(f"(P)_{m} is singular: eigenvalue {singular[0]:.12g}")
    eye = np.eye(p.shape[0])
    result = np.linalg.inv(p)
    for k in range(1, m):
        result = result @ (k * np.linalg.inv(p + k * eye))
    return as_cmatrix(result @ matrix_power_scalar(m, p))


def pochhammer_multiplication(p, m, n):
    """m^{mn} · Π_{j<m} ((P + jI)/m)_n, checked against (P)_{mn}.

    Raises:
        NumericalFailureError: If the product differs from (P)_{mn} by more than 1e-11 relative.
    """
    if m < 1 or n < 0:
        raise DomainError(f"Need m >= 1 and n >= 0, got m={m}, n={n}")
    p = as_cmatrix(p)
    eye = np.eye(p.shape[0])
    result = float(m) ** (m * n) * eye.astype(complex)
    for j in range(m):
        result = result @ pochhammer((p + j * eye) / m, n)
    expected = pochhammer(p, m * n)
    residual = relative_residual(result, expected)
    if residual > MULTIPLICATION_TOL:
        raise NumericalFailureError(
            f"Pochhammer multiplication residual {residual:.3e} for m={m}, n={n}"
        )
    return as_cmatrix(result)
