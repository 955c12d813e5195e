r"""Local normal forms at the singular points.

At infinity a system with diagonal residue :math:`\Lambda` admits a
normalized fundamental solution

.. math:: \Phi(z) = \Bigl(1 + \Psi_1 z^{-1} + \Psi_2 z^{-2} + \dots\Bigr)
          \, z^{-\Lambda} z^{-R},

where :math:`R` is nilpotent, graded by the integer eigenvalue gaps of
:math:`\Lambda`, and commutes with :math:`e^{2\pi i\Lambda}`.  At a
finite pole :math:`u_k` the analogous form is

.. math:: \Phi_k(z) = T\,\Bigl(\sum_{j\ge 0} W_j t^j\Bigr)\,
          t^{\Lambda_k} t^{R_k}, \qquad t = z - u_k,

with :math:`T` diagonalizing the residue.  The series coefficients are
produced by an entrywise division recursion; whenever the divisor
vanishes (a resonance) the obstruction is moved into the graded part of
:math:`R` and the corresponding series entry becomes a free slot.  Free
slots default to zero here; pinning them to deformation-consistent
values is the job of :func:`isomonodromy.flow.isomonodromic_psi`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NumericError, ToleranceConfig, default_tolerance
from .linalg import as_matrix, diagonalize, is_nilpotent
from .system import FuchsianSystem

__all__ = [
    "AdmissiblePair",
    "LeveltExpansion",
    "levelt_at_infinity",
    "levelt_at_pole",
    "evaluate_levelt",
    "centralizer_membership",
]

INFINITY = None  # sentinel for the anchor of expansions at infinity


@dataclass(frozen=True)
class AdmissiblePair:
    """Exponents together with the nilpotent logarithm of a local form.

    ``exponents`` is the diagonal of :math:`\\Lambda`; ``log_part`` is
    the full matrix :math:`R`, the sum of its graded parts.  Each graded
    part ``(k, r_k)`` is supported on entries whose exponent gap equals
    ``k``.
    """

    exponents: np.ndarray
    log_part: np.ndarray
    graded_parts: tuple[tuple[int, np.ndarray], ...] = ()

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    def formal_monodromy(self) -> np.ndarray:
        """The matrix ``exp(2 pi i Lambda) exp(2 pi i R)``."""
        lam = np.diag(np.exp(2j * np.pi * self.exponents))
        m = self.size
        # R is nilpotent, so the exponential series terminates.
        r = 2j * np.pi * self.log_part
        out = np.eye(m, dtype=complex)
        term = np.eye(m, dtype=complex)
        fact = 1.0
        for k in range(1, m + 1):
            term = term @ r
            fact *= k
            out += term / fact
        return lam @ out


@dataclass(frozen=True)
class LeveltExpansion:
    """Truncated local fundamental solution at one singular point.

    Attributes
    ----------
    center : complex or None
        The pole the expansion lives at; ``None`` means infinity.
    frame : ndarray
        Constant change of basis in front of the series (identity at
        infinity, the eigenvector matrix of the residue at a finite
        pole).
    coefficients : tuple of ndarray
        ``coefficients[j]`` multiplies ``t**j`` at a finite pole and
        ``z**-j`` at infinity; entry 0 is the identity.
    pair : AdmissiblePair
        Exponents and logarithm of the exact factor.
    radius : float
        Validity radius.  At a finite pole, evaluation is refused
        outside ``|z - center| < radius``; at infinity, inside
        ``|z| < radius``.
    free_slots : tuple
        Entries ``(j, p, q)`` of the series that the recursion left
        undetermined (resonances), together with the value they were
        filled with, as ``(j, p, q, value)``.
    """

    center: complex | None
    frame: np.ndarray
    coefficients: tuple[np.ndarray, ...]
    pair: AdmissiblePair
    radius: float
    free_slots: tuple[tuple[int, int, int, complex], ...] = ()

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1


def _power_sums(system: FuchsianSystem, order: int) -> list[np.ndarray]:
    """Coefficients ``b_j = -sum_k A_k u_k**j`` for ``j = 1..order``."""
    return [
        -sum(system.residues[k] * system.poles[k] ** j for k in range(system.n))
        for j in range(1, order + 1)
    ]


def _grade_of_gap(gap: complex, order: int, eps: float) -> int | None:
    """The positive integer ``k <= order`` that ``gap`` sits on, if any."""
    k = int(round(gap.real))
    if 1 <= k <= order and abs(gap - k) < eps:
        return k
    return None


def _series_recursion(
    lam: np.ndarray,
    rhs_blocks: list[np.ndarray],
    order: int,
    sign: int,
    eps: float,
    fills: dict[tuple[int, int, int], complex] | None,
) -> tuple[list[np.ndarray], list[np.ndarray], list[tuple[int, int, int, complex]]]:
    """Shared entrywise division recursion.

    ``sign = +1`` is the convention at infinity (series entry
    ``-rhs / (gap - j)``), ``sign = -1`` the one at a finite pole
    (series entry ``rhs / (j - gap)``); on a resonant entry the
    obstruction ``rhs`` moves into the graded part in both cases.  The
    two conventions agree up to replacing ``Lambda`` by ``-Lambda`` and
    relabeling; they are kept explicit so each matches its derivation.
    """
    m = lam.shape[0]
    coeffs: list[np.ndarray] = [np.eye(m, dtype=complex)]
    graded: list[np.ndarray] = [np.zeros((m, m), dtype=complex)]
    slots: list[tuple[int, int, int, complex]] = []
    for j in range(1, order + 1):
        rhs = rhs_blocks[j - 1](coeffs, graded)
        cj = np.zeros((m, m), dtype=complex)
        rj = np.zeros((m, m), dtype=complex)
        for p in range(m):
            for q in range(m):
                gap = lam[p] - lam[q]
                div = (gap - j) if sign > 0 else (j - gap)
                if abs(div) < eps:
                    rj[p, q] = rhs[p, q]
                    fill = 0.0
                    if fills is not None:
                        fill = fills.get((j, p, q), 0.0)
                    cj[p, q] = fill
                    slots.append((j, p, q, complex(fill)))
                else:
                    cj[p, q] = -rhs[p, q] / div if sign > 0 else rhs[p, q] / div
        coeffs.append(cj)
        graded.append(rj)
    return coeffs, graded, slots


def _pair_from_graded(lam: np.ndarray, graded: list[np.ndarray]) -> AdmissiblePair:
    m = lam.shape[0]
    total = np.zeros((m, m), dtype=complex)
    parts = []
    for k, rk in enumerate(graded):
        if k >= 1 and np.max(np.abs(rk)) > 0:
            parts.append((k, rk))
            total = total + rk
    return AdmissiblePair(lam.copy(), total, tuple(parts))


def levelt_at_infinity(
    system: FuchsianSystem,
    order: int | None = None,
    fills: dict[tuple[int, int, int], complex] | None = None,
    tol: ToleranceConfig | None = None,
    strict: bool = True,
) -> LeveltExpansion:
    """Normalized expansion at infinity for a system with diagonal residue.

    Parameters
    ----------
    system : FuchsianSystem
        Its residue at infinity must already be diagonal; conjugate the
        system first if it is not.
    order : int, optional
        Truncation order of the series (defaults to the configured
        ``series_order``).
    fills : dict, optional
        Values for resonant free slots, keyed by ``(j, p, q)``.  Slots
        not mentioned stay zero.
    strict : bool
        When set, repeated exponents raise instead of being accepted
        with a zero grade-0 logarithm.

    Raises
    ------
    NumericError
        If the residue at infinity is not diagonal, or two of its
        eigenvalues coincide while ``strict`` is set.
    """
    tol = tol or default_tolerance()
    order = order if order is not None else tol.series_order
    ainf = system.residue_at_infinity
    lam = np.diag(ainf).astype(complex)
    off = ainf - np.diag(lam)
    scale = max(1.0, float(np.max(np.abs(lam))))
    if np.max(np.abs(off)) > 1e-10 * scale:
        raise NumericError(
            "residue at infinity is not diagonal; conjugate the system first",
            off_diagonal=float(np.max(np.abs(off))),
        )
    m = lam.shape[0]
    if strict:
        for p in range(m):
            for q in range(p + 1, m):
                if abs(lam[p] - lam[q]) < tol.resonance_eps:
                    raise NumericError(
                        "repeated exponents at infinity",
                        exponents=lam,
                    )
    bs = _power_sums(system, order)

    def rhs_at(j):
        def rhs(coeffs, graded):
            out = bs[j - 1].copy()
            for i in range(1, j):
                out += bs[i - 1] @ coeffs[j - i] - coeffs[j - i] @ graded[i]
            return out
        return rhs

    # rhs here is (B_j + sum B_i Psi_{j-i} - Psi_{j-i} R_i); with the
    # sign=+1 convention the recursion divides -rhs by (gap - j), which
    # matches Psi_j = (-B_j + sum(Psi R - B Psi)) / (gap - j).
    coeffs, graded, slots = _series_recursion(
        lam, [rhs_at(j) for j in range(1, order + 1)], order, +1, tol.resonance_eps, fills
    )
    pair = _pair_from_graded(lam, graded)
    radius = 2.0 * max(1.0, float(np.max(np.abs(system.poles))))
    return LeveltExpansion(
        center=INFINITY,
        frame=np.eye(m, dtype=complex),
        coefficients=tuple(coeffs),
        pair=pair,
        radius=radius,
        free_slots=tuple(slots),
    )


def levelt_at_pole(
    system: FuchsianSystem,
    k: int,
    order: int | None = None,
    fills: dict[tuple[int, int, int], complex] | None = None,
    tol: ToleranceConfig | None = None,
) -> LeveltExpansion:
    """Levelt form at the finite pole with index ``k``.

    The residue is diagonalized into the canonical eigenvalue order and
    the Taylor coefficients of the regular part drive the division
    recursion.  Requires a diagonalizable residue; a failed or untrusted
    eigendecomposition raises :class:`NumericError`.
    """
    tol = tol or default_tolerance()
    order = order if order is not None else tol.series_order
    if not 0 <= k < system.n:
        raise ValueError(f"pole index {k} out of range 0..{system.n - 1}")
    lam, frame = diagonalize(system.residues[k])
    u = system.poles
    # Taylor coefficients at u_k of the regular part of the coefficient
    # matrix, conjugated into the eigenbasis of the residue.
    finv = np.linalg.inv(frame)
    reg = []
    for j in range(order):
        c = sum(
            -system.residues[l] / (u[l] - u[k]) ** (j + 1)
            for l in range(system.n)
            if l != k
        )
        reg.append(finv @ c @ frame)

    def rhs_at(j):
        def rhs(coeffs, graded):
            out = sum(reg[j - 1 - i] @ coeffs[i] for i in range(j))
            out -= sum(coeffs[j - i] @ graded[i] for i in range(1, j))
            return out
        return rhs

    coeffs, graded, slots = _series_recursion(
        lam, [rhs_at(j) for j in range(1, order + 1)], order, -1, tol.resonance_eps, fills
    )
    pair = _pair_from_graded(lam, graded)
    return LeveltExpansion(
        center=complex(u[k]),
        frame=frame,
        coefficients=tuple(coeffs),
        pair=pair,
        radius=0.5 * system.nearest_other_pole(k),
        free_slots=tuple(slots),
    )


def _branch_log(t: complex, log_branch: int) -> complex:
    return np.log(t) + 2j * np.pi * log_branch


def _power_factors(
    pair: AdmissiblePair, logt: complex, sign: int
) -> tuple[np.ndarray, np.ndarray]:
    """``t**(sign Lambda)`` and ``t**(sign R)`` for the chosen log."""
    lam_factor = np.diag(np.exp(sign * pair.exponents * logt))
    m = pair.size
    r = sign * logt * pair.log_part
    out = np.eye(m, dtype=complex)
    term = np.eye(m, dtype=complex)
    fact = 1.0
    for k in range(1, m + 1):
        term = term @ r
        fact *= k
        out += term / fact
    return lam_factor, out


def evaluate_levelt(
    exp: LeveltExpansion,
    z: complex,
    log_branch: int = 0,
    with_derivative: bool = False,
) -> np.ndarray | tuple[np.ndarray, np.ndarray]:
    """Evaluate a truncated local solution, optionally with its derivative.

    The logarithm is the principal branch shifted by ``2 pi i
    log_branch``.  Evaluation outside the expansion's validity region
    raises :class:`NumericError`; accuracy there would be silently lost
    otherwise.
    """
    at_inf = exp.center is INFINITY or exp.center is None
    if at_inf:
        if abs(z) < exp.radius:
            raise NumericError(
                f"|z| = {abs(z):.3g} inside the validity bound {exp.radius:.3g}"
                " of the expansion at infinity"
            )
        t = complex(z)
        sign = -1
        powers = [t ** (-j) for j in range(len(exp.coefficients))]
    else:
        t = complex(z) - exp.center
        if abs(t) > exp.radius:
            raise NumericError(
                f"|z - {exp.center}| = {abs(t):.3g} outside the validity radius"
                f" {exp.radius:.3g}"
            )
        if t == 0:
            raise NumericError("cannot evaluate at the singular point itself")
        sign = +1
        powers = [t ** j for j in range(len(exp.coefficients))]

    series = sum(c * p for c, p in zip(exp.coefficients, powers))
    logt = _branch_log(t, log_branch)
    lam_factor, log_factor = _power_factors(exp.pair, logt, sign)
    value = exp.frame @ series @ lam_factor @ log_factor
    if not with_derivative:
        return value

    # d/dt of the series, plus the exact factor's logarithmic part:
    # with F the series, the derivative is
    #   T [F' + sign * F (Lambda + sum_k R_k t**(sign k)) / t] t**(sL) t**(sR).
    dseries = sum(
        j * c * (powers[j - 1] if sign > 0 else t ** (-j - 1) * (-1))
        for j, c in enumerate(exp.coefficients)
        if j >= 1
    )
    if isinstance(dseries, int):
        dseries = np.zeros_like(series)
    graded_sum = np.zeros_like(series)
    for k, rk in exp.pair.graded_parts:
        graded_sum = graded_sum + rk * t ** (sign * k)
    core = dseries + sign * series @ (np.diag(exp.pair.exponents) + graded_sum) / t
    derivative = exp.frame @ core @ lam_factor @ log_factor
    return value, derivative


def centralizer_membership(
    g: np.ndarray,
    pair: AdmissiblePair,
    at_infinity: bool = False,
    tol: ToleranceConfig | None = None,
    zero_floor: float = 1e-10,
) -> tuple[bool, list[tuple[int, int, complex]]]:
    """Test whether ``g`` respects the filtration of an admissible pair.

    An entry ``g[i, j]`` is allowed only when the exponent gap
    ``lam_i - lam_j`` is a non-negative integer (the sign of the gap
    flips at infinity).  Returns the verdict together with the list of
    violating entries ``(i, j, value)`` as a certificate.
    """
    tol = tol or default_tolerance()
    g = as_matrix(g, pair.size)
    lam = pair.exponents
    scale = max(1.0, float(np.max(np.abs(g))))
    violations: list[tuple[int, int, complex]] = []
    for i in range(pair.size):
        for j in range(pair.size):
            if abs(g[i, j]) <= zero_floor * scale:
                continue
            gap = lam[i] - lam[j]
            if at_infinity:
                gap = -gap
            k = int(round(gap.real))
            if k < 0 or abs(gap - k) > tol.resonance_eps:
                violations.append((i, j, complex(g[i, j])))
    return (not violations), violations


def admissible_pair_checks(pair: AdmissiblePair, tol: float = 1e-10) -> dict[str, float]:
    """Residuals of the defining properties of an admissible pair.

    Returns a dict with the nilpotency defect of the log part, the
    commutation defect with ``exp(2 pi i Lambda)`` and the worst graded
    support defect.  All should sit at rounding level for output of the
    expansion constructors; tests assert on these numbers.
    """
    lam = pair.exponents
    r = pair.log_part
    m = pair.size
    power = np.linalg.matrix_power(r, m) if m > 0 else r
    e = np.diag(np.exp(2j * np.pi * lam))
    commute = e @ r - r @ e
    support = 0.0
    for k, rk in pair.graded_parts:
        for p in range(m):
            for q in range(m):
                if abs(rk[p, q]) > tol and abs(lam[p] - lam[q] - k) > 1e-6:
                    support = max(support, float(abs(rk[p, q])))
    return {
        "nilpotency": float(np.max(np.abs(power))) if m else 0.0,
        "commutation": float(np.max(np.abs(commute))) if m else 0.0,
        "graded_support": support,
    }
