r"""Rational functions of one complex variable.

The scalar reduction manipulates coefficient functions of Fuchsian odes:
sums of simple and double poles, their logarithmic derivatives, squares
and residues.  Everything here is a ratio of polynomials with complex
coefficients stored in ascending order (numpy's ``polynomial`` layout),
and the questions asked of them are local: Laurent data at a point and
decay at infinity.

Cancellation is deliberately conservative.  Numerators and denominators
are only reduced when a root of one is verifiably a root of the other,
so the class never silently alters pole orders of ill-conditioned input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .config import NumericError

__all__ = [
    "RationalFunction",
    "poly_from_roots",
    "poly_shift",
    "rational_sum_of_poles",
]


def _trim(coeffs: np.ndarray) -> np.ndarray:
    """Drop trailing (highest-order) zeros, keeping at least one entry."""
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    if c.ndim != 1:
        raise ValueError("polynomial coefficients must be one-dimensional")
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        return np.zeros(1, dtype=complex)
    return c[: nz[-1] + 1].copy()


def poly_from_roots(roots) -> np.ndarray:
    """Monic polynomial with the given roots, ascending coefficients."""
    c = np.ones(1, dtype=complex)
    for r in roots:
        c = npoly.polymul(c, np.array([-complex(r), 1.0]))
    return _trim(c)


def poly_shift(coeffs: np.ndarray, center: complex) -> np.ndarray:
    r"""Taylor coefficients of ``p(center + w)`` in ``w``.

    Classical synthetic-division shift: repeatedly divide by
    ``(z - center)`` and collect remainders.  Exact in the sense of
    floating Horner evaluation, no binomial blow-up.
    """
    c = _trim(coeffs).copy()
    n = c.size
    out = np.zeros(n, dtype=complex)
    for j in range(n):
        acc = np.zeros_like(c)
        acc[-1] = c[-1]
        for i in range(c.size - 2, -1, -1):
            acc[i] = c[i] + center * acc[i + 1]
        out[j] = acc[0]
        if acc.size == 1:
            break
        c = acc[1:]
    return out


def _series_div(num: np.ndarray, den: np.ndarray, nterms: int) -> np.ndarray:
    """First ``nterms`` Taylor coefficients of ``num/den`` (den[0] != 0)."""
    if abs(den[0]) == 0.0:
        raise NumericError("series division by a series with zero constant term")
    out = np.zeros(nterms, dtype=complex)
    for j in range(nterms):
        acc = num[j] if j < num.size else 0.0
        for i in range(1, j + 1):
            if i < den.size:
                acc -= den[i] * out[j - i]
        out[j] = acc / den[0]
    return out


def rational_sum_of_poles(poles, weights) -> "RationalFunction":
    r"""Build ``sum_k weights[k] / (z - poles[k])`` over one common denominator."""
    poles = [complex(u) for u in poles]
    weights = [complex(w) for w in weights]
    if len(poles) != len(weights):
        raise ValueError("poles and weights must have matching lengths")
    den = poly_from_roots(poles)
    num = np.zeros(1, dtype=complex)
    for k, w in enumerate(weights):
        other = poly_from_roots([u for j, u in enumerate(poles) if j != k])
        num = npoly.polyadd(num, w * other)
    return RationalFunction(num, den)


@dataclass(frozen=True)
class RationalFunction:
    """Quotient of two polynomials, ascending complex coefficients."""

    num: np.ndarray
    den: np.ndarray

    def __post_init__(self) -> None:
        num = _trim(self.num)
        den = _trim(self.den)
        if den.size == 1 and den[0] == 0:
            raise ZeroDivisionError("zero denominator")
        # keep the denominator monic so equality checks are meaningful
        lead = den[-1]
        object.__setattr__(self, "num", num / lead)
        object.__setattr__(self, "den", den / lead)

    # -- basic algebra -------------------------------------------------

    @staticmethod
    def constant(value: complex) -> "RationalFunction":
        return RationalFunction(np.array([complex(value)]), np.ones(1))

    @staticmethod
    def from_poly(coeffs) -> "RationalFunction":
        return RationalFunction(np.asarray(coeffs, dtype=complex), np.ones(1))

    def __add__(self, other: "RationalFunction") -> "RationalFunction":
        other = self._coerce(other)
        num = npoly.polyadd(
            npoly.polymul(self.num, other.den), npoly.polymul(other.num, self.den)
        )
        return RationalFunction(num, npoly.polymul(self.den, other.den))

    def __radd__(self, other) -> "RationalFunction":
        return self.__add__(other)

    def __neg__(self) -> "RationalFunction":
        return RationalFunction(-self.num, self.den)

    def __sub__(self, other: "RationalFunction") -> "RationalFunction":
        return self.__add__(-self._coerce(other))

    def __rsub__(self, other) -> "RationalFunction":
        return (-self).__add__(other)

    def __mul__(self, other) -> "RationalFunction":
        other = self._coerce(other)
        return RationalFunction(
            npoly.polymul(self.num, other.num), npoly.polymul(self.den, other.den)
        )

    def __rmul__(self, other) -> "RationalFunction":
        return self.__mul__(other)

    def __truediv__(self, other) -> "RationalFunction":
        other = self._coerce(other)
        return RationalFunction(
            npoly.polymul(self.num, other.den), npoly.polymul(self.den, other.num)
        )

    @staticmethod
    def _coerce(value) -> "RationalFunction":
        if isinstance(value, RationalFunction):
            return value
        return RationalFunction.constant(value)

    def derivative(self) -> "RationalFunction":
        num = npoly.polysub(
            npoly.polymul(npoly.polyder(self.num), self.den),
            npoly.polymul(self.num, npoly.polyder(self.den)),
        )
        return RationalFunction(num, npoly.polymul(self.den, self.den))

    def log_derivative(self) -> "RationalFunction":
        """d/dz log f as num'/num - den'/den (no squared denominators)."""
        return RationalFunction(npoly.polyder(self.num), self.num) - RationalFunction(
            npoly.polyder(self.den), self.den
        )

    def __call__(self, z: complex) -> complex:
        return complex(npoly.polyval(z, self.num) / npoly.polyval(z, self.den))

    def is_zero(self, tol: float = 0.0) -> bool:
        scale = max(np.abs(self.den).max(), 1.0)
        return bool(np.abs(self.num).max() <= tol * scale)

    # -- local structure -----------------------------------------------

    def cancel(self, tol: float = 1e-9) -> "RationalFunction":
        """Remove denominator roots that the numerator verifiably shares."""
        num, den = _trim(self.num), _trim(self.den)
        if num.size == 1 and num[0] == 0:
            return RationalFunction(num, np.ones(1))
        if den.size == 1:
            return RationalFunction(num / den[0], np.ones(1))
        changed = True
        while changed and den.size > 1:
            changed = False
            for r in npoly.polyroots(den):
                mag = float(npoly.polyval(abs(r), np.abs(num)))
                if abs(npoly.polyval(r, num)) < tol * max(mag, 1e-300):
                    num = npoly.polydiv(num, np.array([-r, 1.0]))[0]
                    den = npoly.polydiv(den, np.array([-r, 1.0]))[0]
                    num, den = _trim(num), _trim(den)
                    changed = True
                    break
        return RationalFunction(num, den)

    def _local_structure(self, center: complex) -> tuple[int, float]:
        """Denominator multiplicity at ``center`` and a safe contour radius.

        Repeated roots come out of the companion-matrix solver scattered
        over a small disc, so everything within two percent of the local
        scale counts as the center's own cluster.  Distinct singularities
        closer than that are not resolved; the package keeps its poles
        and apparent points far enough apart for this never to matter.
        """
        if self.den.size == 1:
            return 0, 1.0
        roots = npoly.polyroots(self.den)
        eps = 0.02 * max(1.0, abs(center))
        order = 0
        nearest = np.inf
        for r in roots:
            d = abs(r - center)
            if d <= eps:
                order += 1
            elif d < nearest:
                nearest = d
        radius = 1.0 if not np.isfinite(nearest) else 0.4 * nearest
        return order, radius

    def pole_order(self, center: complex, tol: float = 1e-9) -> int:
        """Multiplicity of ``center`` in the denominator (0 if regular).

        Counts uncancelled factors; the analytic pole order can be lower
        when the numerator shares roots, which shows up as vanishing
        leading Laurent coefficients rather than a smaller count here.
        """
        order, _ = self._local_structure(center)
        return order

    def laurent_at(self, center: complex, nterms: int, tol: float = 1e-9):
        r"""Laurent coefficients ``(lead, coeffs)`` at ``center``.

        ``coeffs[j]`` multiplies ``(z - center)**(lead + j)`` and ``nterms``
        coefficients are returned starting from ``lead = -pole_order``.
        Coefficients come from trapezoid contour integrals on a circle
        between the center and the nearest other singularity; uncancelled
        common factors only show up as leading coefficients that vanish.
        """
        order, radius = self._local_structure(center)
        npts = 512
        angles = np.exp(2j * np.pi * (np.arange(npts) + 0.37) / npts)
        ring = radius * angles
        points = center + ring
        vals = npoly.polyval(points, self.num) / npoly.polyval(points, self.den)
        coeffs = np.empty(nterms, dtype=complex)
        for j in range(nterms):
            power = -order + j
            coeffs[j] = np.mean(vals * ring ** (-power))
        return -order, coeffs

    def coefficient_at(self, center: complex, order: int, tol: float = 1e-9) -> complex:
        """Laurent coefficient of ``(z - center)**order``."""
        lead = -self.pole_order(center, tol)
        if order < lead:
            return 0.0 + 0.0j
        _, coeffs = self.laurent_at(center, order - lead + 1, tol)
        return complex(coeffs[order - lead])

    def residue_at(self, center: complex, tol: float = 1e-9) -> complex:
        """Coefficient of ``1/(z - center)`` in the Laurent expansion."""
        order = self.pole_order(center, tol)
        if order == 0:
            return 0.0 + 0.0j
        lead, coeffs = self.laurent_at(center, order, tol)
        return complex(coeffs[order - 1])

    def series_at_infinity(self, nterms: int) -> np.ndarray:
        r"""Coefficients ``c`` with ``f(z) = sum_j c[j] z**(-j)`` for large z.

        Requires ``deg num <= deg den``; anything growing at infinity is
        rejected because every coefficient function in this package decays.
        """
        num, den = self.num, self.den
        if num.size > den.size and np.abs(num[den.size:]).max() > 0:
            raise NumericError("rational function grows at infinity")
        gap = den.size - num.size
        num_rev = np.zeros(den.size, dtype=complex)
        num_rev[gap : gap + num.size] = num[::-1]
        den_rev = den[::-1]
        return _series_div(num_rev, den_rev, nterms)

    def finite_poles(self, tol: float = 1e-9) -> list:
        """Denominator roots after cancellation, clustered with multiplicity."""
        reduced = self.cancel(tol)
        if reduced.den.size == 1:
            return []
        roots = npoly.polyroots(reduced.den)
        out: list[tuple[complex, int]] = []
        for r in roots:
            for i, (c, mult) in enumerate(out):
                if abs(r - c) < tol * max(1.0, abs(c)):
                    out[i] = ((c * mult + r) / (mult + 1), mult + 1)
                    break
            else:
                out.append((complex(r), 1))
        return out
