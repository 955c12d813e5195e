r"""Scalar reduction and Darboux coordinates for 2x2 Fuchsian systems.

Eliminating the second component of a rank-two system leaves one second
order equation ``y'' = d1(z) y' + d0(z) y`` whose only singularities are
the original poles, infinity, and the zeros of the off-diagonal entry of
the coefficient matrix.  Those extra zeros are apparent: every solution
stays analytic there, and their positions ``q_i`` together with the
momenta ``p_i = Res_{q_i}(d0 + d1^2/2)`` coordinatize systems with fixed
exponents up to diagonal conjugation.  The traced Hamiltonians are the
matching residues at the true poles, with a sign.

Two birational symmetries act on these charts: a reflection that swaps
the first pole with the k-th one, and an inversion that trades the first
pole for infinity at the price of a scalar exponent twist.  Both are
implemented on plain Python numbers so exact (rational) charts pass
through without rounding.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial import polynomial as npoly

from .config import NumericError, ToleranceConfig, default_tolerance
from .linalg import diagonalize
from .ratfun import RationalFunction, poly_from_roots, rational_sum_of_poles
from .system import FuchsianSystem, build_system, spectrum

__all__ = [
    "ScalarEquation",
    "DarbouxChart",
    "to_scalar",
    "apparent_singularities",
    "momenta",
    "darboux_hamiltonians",
    "local_exponents",
    "frobenius_obstruction",
    "chart_from_system",
    "hamiltonians_from_chart",
    "reconstruct_system",
    "apply_Sk",
    "apply_Sinf",
]

logger = logging.getLogger(__name__)


def genus(m: int, n: int) -> int:
    """Number of apparent singularities for a generic m x m, n-pole system."""
    return m * (m - 1) * (n - 1) // 2 - (m - 1)


@dataclass(frozen=True)
class ScalarEquation:
    r"""Single equation ``y^(m) = sum_l coefficients[l] y^(l)``.

    ``coefficients[l]`` multiplies the l-th derivative, so a second order
    equation stores ``(d0, d1)``.  ``singular_points`` are the poles of
    the source system; ``apparent_points`` the extra regular-looking
    singularities produced by the elimination.
    """

    coefficients: tuple
    singular_points: tuple
    apparent_points: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "coefficients", tuple(self.coefficients))
        object.__setattr__(
            self, "singular_points", tuple(complex(u) for u in self.singular_points)
        )
        object.__setattr__(
            self, "apparent_points", tuple(complex(q) for q in self.apparent_points)
        )

    @property
    def order(self) -> int:
        return len(self.coefficients)

    def momentum_source(self) -> RationalFunction:
        """The rational function ``d_{m-2} + d_{m-1}^2 / 2`` whose residues
        are momenta (at apparent points) and Hamiltonians (at poles)."""
        dm2 = self.coefficients[self.order - 2]
        dm1 = self.coefficients[self.order - 1]
        return dm2 + 0.5 * (dm1 * dm1)


def _cluster(values, tol: float) -> list[complex]:
    out: list[tuple[complex, int]] = []
    for v in values:
        v = complex(v)
        for i, (c, mult) in enumerate(out):
            if abs(v - c) < tol:
                out[i] = ((c * mult + v) / (mult + 1), mult + 1)
                break
        else:
            out.append((v, 1))
    return [c for c, _ in out]


def _entry_functions(system: FuchsianSystem) -> list[list[RationalFunction]]:
    m = system.m
    out = []
    for i in range(m):
        row = []
        for j in range(m):
            weights = [system.residues[k][i, j] for k in range(len(system.poles))]
            row.append(rational_sum_of_poles(system.poles, weights))
        out.append(row)
    return out


def to_scalar(
    system: FuchsianSystem,
    component: int = 0,
    tol: ToleranceConfig | None = None,
) -> ScalarEquation:
    r"""Eliminate one component of a 2x2 system.

    With ``component=0`` the surviving unknown is the first entry of the
    column solution and the pivot is the (1,2) matrix entry; the flag
    swaps the roles.  A vanishing pivot means the system is triangular
    in that component and the elimination is impossible, which is
    reported rather than silently switching components.
    """
    tol = tol or default_tolerance()
    if system.m != 2:
        raise NumericError(
            "scalar elimination is implemented for 2x2 systems",
            dimension=system.m,
        )
    if component not in (0, 1):
        raise ValueError("component must be 0 or 1")
    i = component
    j = 1 - component
    res_scale = max(float(np.abs(a).max()) for a in system.residues)
    pivot_mass = max(float(abs(a[i, j])) for a in system.residues)
    if pivot_mass <= 1e-14 * max(res_scale, 1.0):
        raise NumericError(
            "the ({}, {}) entry of the coefficient matrix vanishes identically; "
            "the system is triangular in this component, eliminate component {} "
            "instead".format(i + 1, j + 1, j + 1),
            component=component,
        )
    # Assemble both coefficients over the explicit common denominators
    # P^2 N_off and P N_off (P the monic pole polynomial, N_off the
    # numerator of the pivot entry): the degrees stay tiny and every
    # later Laurent extraction is well conditioned.
    entry_num = _entry_functions(system)
    p_poly = poly_from_roots(system.poles)
    p_der = npoly.polyder(p_poly)
    n_off = entry_num[i][j].num
    n_keep = entry_num[i][i].num
    n_other = entry_num[j][j].num
    n_back = entry_num[j][i].num
    trace_num = npoly.polyadd(entry_num[0][0].num, entry_num[1][1].num)
    d1 = RationalFunction(
        npoly.polyadd(
            npoly.polymul(trace_num, n_off),
            npoly.polysub(
                npoly.polymul(npoly.polyder(n_off), p_poly),
                npoly.polymul(n_off, p_der),
            ),
        ),
        npoly.polymul(p_poly, n_off),
    )
    cross = npoly.polysub(npoly.polymul(n_off, n_back), npoly.polymul(n_keep, n_other))
    keep_der = npoly.polysub(
        npoly.polymul(npoly.polyder(n_keep), p_poly), npoly.polymul(n_keep, p_der)
    )
    off_der = npoly.polysub(
        npoly.polymul(npoly.polyder(n_off), p_poly), npoly.polymul(n_off, p_der)
    )
    d0 = RationalFunction(
        npoly.polysub(
            npoly.polymul(npoly.polyadd(cross, keep_der), n_off),
            npoly.polymul(n_keep, off_der),
        ),
        npoly.polymul(npoly.polymul(p_poly, p_poly), n_off),
    )

    reduced = RationalFunction(n_off, p_poly).cancel()
    # the true numerator degree reflects the decay at infinity; a
    # roundoff-sized leading coefficient would spawn a phantom root
    num = reduced.num
    top = float(np.abs(num).max())
    while num.size > 1 and abs(num[-1]) < 1e-9 * top:
        num = num[:-1]
    try:
        roots = npoly.polyroots(num) if num.size > 1 else np.array([])
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            "root finding failed on the off-diagonal numerator"
        ) from exc
    scale = max(1.0, max(abs(u) for u in system.poles))
    apparent = _cluster(roots, 1e-9 * scale)
    apparent.sort(key=lambda z: (round(z.real, 12), round(z.imag, 12)))
    g = genus(2, len(system.poles))
    if len(apparent) != g:
        logger.warning(
            "expected %d apparent singularities for this pole count, found %d "
            "(non-generic stratum)", g, len(apparent),
        )
    return ScalarEquation((d0, d1), system.poles, apparent)


def apparent_singularities(
    eq: ScalarEquation, tol: ToleranceConfig | None = None
) -> list[complex]:
    """Validated apparent points of ``eq``: deduplicated, away from poles."""
    tol = tol or default_tolerance()
    scale = max([1.0] + [abs(u) for u in eq.singular_points])
    clearance = tol.pole_clearance_factor * scale
    points = _cluster(eq.apparent_points, 1e-9 * scale)
    for q in points:
        nearest = min(abs(q - u) for u in eq.singular_points)
        if nearest < clearance:
            raise NumericError(
                "apparent singularity collides with a pole",
                point=q,
                distance=nearest,
            )
    g = genus(eq.order, len(eq.singular_points))
    if len(points) != g:
        logger.warning(
            "apparent singularity count %d differs from the generic count %d",
            len(points), g,
        )
    return sorted(points, key=lambda z: (round(z.real, 12), round(z.imag, 12)))


def _coeff_window(f: RationalFunction, center: complex, low: int, high: int) -> dict:
    """Laurent coefficients of ``f`` at ``center`` for orders ``low..high``."""
    lead, _ = f.laurent_at(center, 1)
    nterms = high - lead + 1
    out = {j: 0.0 + 0.0j for j in range(low, high + 1)}
    if nterms <= 0:
        return out
    lead, coeffs = f.laurent_at(center, nterms)
    for j in range(low, high + 1):
        idx = j - lead
        if 0 <= idx < coeffs.size:
            out[j] = complex(coeffs[idx])
    return out


def _residue_of_source(eq: ScalarEquation, point: complex, check_order: bool) -> complex:
    r"""Residue of ``d0 + d1^2/2`` at ``point`` via Laurent convolution.

    Working with the two low-degree coefficient functions separately is
    far better conditioned than forming the square; the 1/(z-c) term of
    the square is twice the product of the c^-1 and c^0 coefficients.
    """
    d0, d1 = eq.coefficients[0], eq.coefficients[1]
    w1 = _coeff_window(d1, point, -2, 0)
    w0 = _coeff_window(d0, point, -3, -1)
    if check_order:
        scale1 = max(abs(v) for v in w1.values()) or 1.0
        scale0 = max(max(abs(v) for v in w0.values()), scale1 * scale1)
        if abs(w1[-2]) > 1e-6 * scale1 or abs(w0[-3]) > 1e-6 * scale0:
            raise NumericError(
                "degenerate apparent singularity: pole order exceeds two",
                point=complex(point),
            )
    return w0[-1] + w1[-1] * w1[0]


def momenta(eq: ScalarEquation, q=None, tol: ToleranceConfig | None = None) -> list[complex]:
    """Residues of ``d_{m-2} + d_{m-1}^2/2`` at the apparent points."""
    if q is None:
        q = eq.apparent_points
    return [_residue_of_source(eq, qi, check_order=True) for qi in q]


def darboux_hamiltonians(
    eq: ScalarEquation, u=None, tol: ToleranceConfig | None = None
) -> list[complex]:
    """Hamiltonians as minus the residues of ``d_{m-2} + d_{m-1}^2/2`` at the poles."""
    if u is None:
        u = eq.singular_points
    return [-_residue_of_source(eq, uk, check_order=False) for uk in u]


def local_exponents(eq: ScalarEquation, point: complex) -> tuple[complex, complex]:
    """Indicial roots of a second order equation at a regular singular point."""
    if eq.order != 2:
        raise NumericError("indicial analysis implemented for second order equations")
    a_m1 = eq.coefficients[1].coefficient_at(point, -1)
    b_m2 = eq.coefficients[0].coefficient_at(point, -2)
    # nu(nu-1) = a_m1 nu + b_m2
    half = (1.0 + a_m1) / 2.0
    disc = np.sqrt(complex(half * half + b_m2))
    return (complex(half + disc), complex(half - disc))


def frobenius_obstruction(eq: ScalarEquation, point: complex) -> float:
    r"""Logarithm obstruction at an exponent-{0,2} apparent point.

    The power series ansatz from the smaller exponent hits the resonance
    at degree two; the coefficient that must vanish for a log-free basis
    is ``(a0 + b_{-1}) b_{-1} - b0`` in terms of the Laurent data of the
    two coefficient functions.  Zero (to tolerance) certifies that all
    solutions are analytic at the point.
    """
    if eq.order != 2:
        raise NumericError("the log-freeness certificate is for second order equations")
    d0, d1 = eq.coefficients[0], eq.coefficients[1]
    a0 = d1.coefficient_at(point, 0)
    b_m1 = d0.coefficient_at(point, -1)
    b0 = d0.coefficient_at(point, 0)
    return float(abs((a0 + b_m1) * b_m1 - b0))


@dataclass(frozen=True)
class DarbouxChart:
    """Positions, momenta, exponents and Hamiltonians of one system.

    Fields are plain tuples of Python numbers so exact arithmetic types
    survive the symmetry maps unchanged.
    """

    g: int
    q: tuple
    p: tuple
    u: tuple
    exponents: tuple
    infinity: tuple
    hamiltonians: tuple
    notes: tuple = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", tuple(self.q))
        object.__setattr__(self, "p", tuple(self.p))
        object.__setattr__(self, "u", tuple(self.u))
        object.__setattr__(self, "exponents", tuple(tuple(e) for e in self.exponents))
        object.__setattr__(self, "infinity", tuple(self.infinity))
        object.__setattr__(self, "hamiltonians", tuple(self.hamiltonians))
        object.__setattr__(self, "notes", tuple(self.notes))
        if len(self.p) != len(self.q):
            raise ValueError("q and p must have matching lengths")
        if len(self.exponents) != len(self.u) or len(self.hamiltonians) != len(self.u):
            raise ValueError("per-pole data must match the pole count")
        m, n = len(self.infinity), len(self.u)
        if self.g != genus(m, n):
            raise ValueError(
                "chart genus {} does not match the {}x{} count {}".format(
                    self.g, m, n, genus(m, n)
                )
            )
        if len(self.q) != self.g:
            raise ValueError("expected {} apparent points, got {}".format(self.g, len(self.q)))
        for i, qi in enumerate(self.q):
            for qj in self.q[i + 1 :]:
                if abs(qi - qj) == 0:
                    raise ValueError("apparent points must be distinct")
            for uk in self.u:
                if abs(qi - uk) == 0:
                    raise ValueError("apparent points must avoid the poles")

    @property
    def m(self) -> int:
        return len(self.infinity)

    @property
    def n(self) -> int:
        return len(self.u)


def chart_from_system(
    system: FuchsianSystem, tol: ToleranceConfig | None = None
) -> DarbouxChart:
    """Compute the Darboux chart of a 2x2 system.

    A non-diagonal residue at infinity is diagonalized first; the chart
    does not depend on that choice beyond the remaining diagonal freedom,
    under which it is invariant.
    """
    tol = tol or default_tolerance()
    if system.m != 2:
        raise NumericError(
            "Darboux charts are implemented for 2x2 systems",
            dimension=system.m,
        )
    a_inf = system.residue_at_infinity
    scale = max(1.0, float(np.abs(a_inf).max()))
    if float(np.abs(a_inf - np.diag(np.diag(a_inf))).max()) > 1e-12 * scale:
        lam0, frame = diagonalize(a_inf)
        # keep the component order of the incoming diagonal, so an almost
        # diagonal matrix is cleaned up rather than permuted
        cur = np.diag(a_inf)
        if (abs(lam0[0] - cur[0]) + abs(lam0[1] - cur[1])
                > abs(lam0[1] - cur[0]) + abs(lam0[0] - cur[1])):
            frame = frame[:, ::-1]
        system = system.with_residues(
            [np.linalg.solve(frame, a @ frame) for a in system.residues]
        )
        a_inf = system.residue_at_infinity
    lam = np.diag(a_inf)
    if abs(lam[0] - lam[1]) < tol.resonance_eps:
        logger.warning("equal exponents at infinity; the chart may be degenerate")
    eq = to_scalar(system, tol=tol)
    q = apparent_singularities(eq, tol)
    g = genus(2, len(system.poles))
    if len(q) != g:
        raise NumericError(
            "system lies off the generic stratum: its scalar form has "
            f"{len(q)} apparent points where the chart needs {g}",
            found=len(q),
            needed=g,
        )
    p = momenta(eq, q, tol)
    h = darboux_hamiltonians(eq, tol=tol)
    exps = tuple(tuple(spectrum(a)) for a in system.residues)
    return DarbouxChart(
        g=genus(2, len(system.poles)),
        q=tuple(q),
        p=tuple(p),
        u=tuple(system.poles),
        exponents=exps,
        infinity=tuple(lam),
        hamiltonians=tuple(h),
    )


def _regular_part_of_d1(u, q, rho, at) -> complex:
    """Value at ``at`` of d1 minus its own singular term there."""
    total = 0.0 + 0.0j
    for uk, rk in zip(u, rho):
        if abs(complex(at) - complex(uk)) > 0:
            total += rk / (at - uk)
    for qs in q:
        if abs(complex(at) - complex(qs)) > 0:
            total += 1.0 / (at - qs)
    return complex(total)


def hamiltonians_from_chart(chart: DarbouxChart) -> tuple:
    r"""Hamiltonians as functions of ``(q, p, u)`` and the exponents.

    The residues of ``d0`` at the poles are pinned by a square linear
    system: log-freeness at every apparent point, decay of ``d0`` at
    infinity, and the second-order decay coefficient fixed by the
    indicial roots there.  Only the 2x2 chart structure is supported.
    """
    if chart.m != 2:
        raise NumericError("chart Hamiltonians are implemented for 2x2 systems")
    u = [complex(x) for x in chart.u]
    q = [complex(x) for x in chart.q]
    p = [complex(x) for x in chart.p]
    lam = [complex(x) for x in chart.infinity]
    theta = [tuple(complex(t) for t in pair) for pair in chart.exponents]
    n, g = chart.n, chart.g
    rho = [t[0] + t[1] - 1.0 for t in theta]
    s = [-t[0] * t[1] for t in theta]
    a0 = [_regular_part_of_d1(u, q, rho, qi) for qi in q]
    w = [p[i] - a0[i] for i in range(g)]
    mat = np.zeros((n, n), dtype=complex)
    rhs = np.zeros(n, dtype=complex)
    for i in range(g):
        for k in range(n):
            mat[i, k] = 1.0 / (q[i] - u[k])
        rhs[i] = (a0[i] + w[i]) * w[i]
        rhs[i] -= sum(s[k] / (q[i] - u[k]) ** 2 for k in range(n))
        rhs[i] -= sum(w[j] / (q[i] - q[j]) for j in range(g) if j != i)
    mat[g, :] = 1.0
    rhs[g] = -sum(w)
    mat[g + 1, :] = u
    rhs[g + 1] = -lam[0] * (lam[1] + 1.0) - sum(w[i] * q[i] for i in range(g)) - sum(s)
    t = np.linalg.solve(mat, rhs)
    out = []
    for k in range(n):
        hk = _regular_part_of_d1(u, q, rho, u[k])
        out.append(-(t[k] + rho[k] * hk))
    return tuple(complex(v) for v in out)


def reconstruct_system(
    chart: DarbouxChart, tol: ToleranceConfig | None = None
) -> FuchsianSystem:
    r"""Rank-two Fuchsian system with the given chart.

    The off-diagonal entry is proportional to the monic ratio
    ``prod(z - q_i) / prod(z - u_k)``, scaled so that the two
    off-diagonal magnitudes balance; any such choice differs by a
    diagonal conjugation and leaves the chart unchanged.  Raises when the
    chart data violates the log-freeness constraint it encodes.
    """
    tol = tol or default_tolerance()
    if chart.m != 2:
        raise NumericError("system reconstruction is implemented for 2x2 charts")
    u = [complex(x) for x in chart.u]
    q = [complex(x) for x in chart.q]
    p = [complex(x) for x in chart.p]
    lam = [complex(x) for x in chart.infinity]
    theta = [tuple(complex(t) for t in pair) for pair in chart.exponents]
    ham = [complex(x) for x in chart.hamiltonians]
    n, g = chart.n, chart.g
    if abs(lam[0] - lam[1]) < tol.resonance_eps:
        raise NumericError("equal exponents at infinity: reconstruction is degenerate")
    rho = [t[0] + t[1] - 1.0 for t in theta]
    s = [-t[0] * t[1] for t in theta]
    a0 = [_regular_part_of_d1(u, q, rho, qi) for qi in q]
    w = [p[i] - a0[i] for i in range(g)]
    t = [-ham[k] - rho[k] * _regular_part_of_d1(u, q, rho, u[k]) for k in range(n)]

    # Everything below is assembled over the factored denominators U Q,
    # U^2 Q and U Q^2 (U, Q the monic pole and apparent-point
    # polynomials), cancelling shared monomials symbolically; operator
    # chaining would pile the factors up beyond what the local Laurent
    # extraction can separate.
    u_poly = poly_from_roots(u)
    q_poly = poly_from_roots(q)
    u_der = npoly.polyder(u_poly)
    q_der = npoly.polyder(q_poly)
    num_rho = rational_sum_of_poles(u, rho).num
    num_t = rational_sum_of_poles(u, t).num
    num_d1 = npoly.polymul(num_rho, q_poly)
    if g:
        num_one = rational_sum_of_poles(q, [1.0] * g).num
        num_d1 = npoly.polyadd(num_d1, npoly.polymul(num_one, u_poly))
    num_d0 = npoly.polymul(npoly.polymul(num_t, u_poly), q_poly)
    for k in range(n):
        others = poly_from_roots([u[l] for l in range(n) if l != k])
        term = s[k] * npoly.polymul(npoly.polymul(others, others), q_poly)
        num_d0 = npoly.polyadd(num_d0, term)
    if g:
        num_w = rational_sum_of_poles(q, w).num
        num_d0 = npoly.polyadd(
            num_d0, npoly.polymul(num_w, npoly.polymul(u_poly, u_poly))
        )
    den_d1 = npoly.polymul(u_poly, q_poly)
    d1 = RationalFunction(num_d1, den_d1)
    d0 = RationalFunction(num_d0, npoly.polymul(u_poly, den_d1))

    # diagonal (1,1) entry: value -w_i at each apparent point, trace decay
    # -lam1/z at infinity, and one more linear decay condition from the
    # 1/z^3 coefficient of the (2,1) numerator.
    d0_tail = d0.series_at_infinity(4)
    d1_tail = d1.series_at_infinity(3)
    mat = np.zeros((n, n), dtype=complex)
    rhs = np.zeros(n, dtype=complex)
    for i in range(g):
        for k in range(n):
            mat[i, k] = 1.0 / (q[i] - u[k])
        rhs[i] = -w[i]
    mat[g, :] = 1.0
    rhs[g] = -lam[0]
    mat[g + 1, :] = u
    rhs[g + 1] = (lam[0] * d1_tail[2] - d0_tail[3]) / (lam[0] - lam[1])
    alpha = np.linalg.solve(mat, rhs)

    num_alpha = rational_sum_of_poles(u, alpha).num
    a11 = RationalFunction(num_alpha, u_poly)
    a12 = RationalFunction(q_poly, u_poly)
    # a22 = d1 - a11 - (log a12)' over U Q
    num_a22 = npoly.polysub(num_d1, npoly.polymul(num_alpha, q_poly))
    num_a22 = npoly.polysub(
        num_a22,
        npoly.polysub(npoly.polymul(q_der, u_poly), npoly.polymul(u_der, q_poly)),
    )
    a22 = RationalFunction(num_a22, den_d1)
    # a21 = (d0 - a11' + a11 d1 - a11^2) / a12 over U Q^2, after one exact
    # cancellation of U against the a12 division
    bracket = num_d0
    alpha_der = npoly.polysub(
        npoly.polymul(npoly.polyder(num_alpha), u_poly),
        npoly.polymul(num_alpha, u_der),
    )
    bracket = npoly.polysub(bracket, npoly.polymul(alpha_der, q_poly))
    bracket = npoly.polyadd(bracket, npoly.polymul(num_alpha, num_d1))
    bracket = npoly.polysub(
        bracket, npoly.polymul(npoly.polymul(num_alpha, num_alpha), q_poly)
    )
    a21 = RationalFunction(bracket, npoly.polymul(den_d1, q_poly))

    residues = []
    for k in range(n):
        residues.append(
            np.array(
                [
                    [a11.residue_at(u[k]), a12.residue_at(u[k])],
                    [a21.residue_at(u[k]), a22.residue_at(u[k])],
                ]
            )
        )
    # balance the two off-diagonal magnitudes by a diagonal conjugation;
    # the chart cannot see the difference, downstream continuation can
    top = max(float(abs(a[0, 1])) for a in residues)
    bot = max(float(abs(a[1, 0])) for a in residues)
    if top > 0 and bot > 0:
        f = (bot / top) ** 0.25
        gauge = np.diag([1.0 / f, f])
        residues = [np.diag(1.0 / np.diag(gauge)) @ a @ gauge for a in residues]
    res_scale = max(1.0, max(float(np.abs(a).max()) for a in residues))
    for qi in q:
        spurious = abs(a21.residue_at(qi))
        if spurious > 1e-6 * res_scale:
            raise NumericError(
                "chart data violates the log-freeness constraint; no rank-two "
                "system realizes it",
                point=qi,
                residue=spurious,
            )
    a_inf = -sum(residues)
    if float(np.abs(a_inf - np.diag(lam)).max()) > 1e-6 * res_scale:
        raise NumericError(
            "reconstructed residue at infinity drifted from the chart exponents",
            drift=float(np.abs(a_inf - np.diag(lam)).max()),
        )
    for k in range(n):
        want = theta[k][0] * theta[k][1]
        got = np.linalg.det(residues[k])
        if abs(got - want) > 1e-6 * max(1.0, res_scale**2):
            raise NumericError(
                "reconstructed residue determinant disagrees with the exponents",
                pole=u[k],
                determinant=complex(got),
                expected=complex(want),
            )
    return build_system(u, residues)


def apply_Sk(chart: DarbouxChart, k: int) -> DarbouxChart:
    r"""Reflection symmetry swapping pole 1 with pole k (1-based, k >= 2).

    Positions reflect through ``u_1 + u_k``, momenta and Hamiltonians
    flip sign, exponent data rides along unchanged.  Exact input numbers
    are transformed exactly.  The induced monodromy relabeling is
    recorded in the notes.
    """
    if not 2 <= k <= chart.n:
        raise ValueError("k must lie in 2..n")
    s = chart.u[0] + chart.u[k - 1]
    note = (
        "S_{0}: z -> u1 + u{0} - z; new M_1 = W^-1 M_{0} W with W = "
        "M_{1}...M_1, new M_j = M_(j-1) for j = 2..{0}, H_l -> -H_l"
    ).format(k, k - 1)
    return DarbouxChart(
        g=chart.g,
        q=tuple(s - qi for qi in chart.q),
        p=tuple(-pi for pi in chart.p),
        u=tuple(s - ul for ul in chart.u),
        exponents=chart.exponents,
        infinity=chart.infinity,
        hamiltonians=tuple(-h for h in chart.hamiltonians),
        notes=chart.notes + (note,),
    )


def _d0_m_minus_1(chart: DarbouxChart, x, exclude: int | None = None):
    """The auxiliary sum over apparent points and poles entering S_inf."""
    m = chart.m
    total = 0
    for qs in chart.q:
        total = total + 1 / (x - qs)
    weight = Fraction(m * (m - 1), 2)
    for l, ul in enumerate(chart.u):
        if exclude is not None and l == exclude:
            continue
        total = total - weight * (1 / (x - ul))
    return total


def apply_Sinf(chart: DarbouxChart) -> DarbouxChart:
    r"""Inversion symmetry exchanging the first pole with infinity.

    Coordinates map by ``q -> 1/(q - u_1)`` and the conjugate momenta by
    the quadratic twist with coefficient ``(2m^2 - 1)/m``.  The pole that
    was at infinity reappears at the origin of the new coordinate with
    exponents raised by ``1/m`` and the first pole leaves for infinity
    with exponents lowered by ``1/m``.  The first Hamiltonian is carried
    over unchanged; each remaining one rescales by ``(u_l - u_1)^2`` and
    picks up correction terms built from the auxiliary sum evaluated at
    ``u_l - u_1``.  Hamiltonians are only determined up to functions of
    the pole positions, and these lines fix one normalization of the
    transformed ones.  Applying this map twice is not asserted to be the
    identity.
    """
    u1 = chart.u[0]
    for qi in chart.q:
        if abs(qi - u1) == 0:
            raise NumericError("apparent point sits on the first pole", point=complex(qi))
    for ul in chart.u[1:]:
        if abs(ul - u1) == 0:
            raise NumericError("repeated first pole", point=complex(ul))
    m = chart.m
    zero = u1 - u1
    one = zero + 1
    c_twist = Fraction(2 * m * m - 1, m)
    new_q = tuple(one / (qi - u1) for qi in chart.q)
    new_p = tuple(
        -pi * qi * qi - c_twist * qi for qi, pi in zip(chart.q, chart.p)
    )
    new_u = (zero,) + tuple(one / (ul - u1) for ul in chart.u[1:])
    shift = Fraction(1, m)
    new_exponents = (tuple(lam + shift for lam in chart.infinity),) + chart.exponents[1:]
    new_infinity = tuple(t - shift for t in chart.exponents[0])
    c_ham = Fraction((m - 1) * (m * m - m - 1), m)
    new_h = [chart.hamiltonians[0]]
    for l in range(1, chart.n):
        dl = chart.u[l] - u1
        d0val = _d0_m_minus_1(chart, dl, exclude=l)
        new_h.append(-chart.hamiltonians[l] * dl * dl + dl * d0val * d0val - dl * c_ham * d0val)
    note = (
        "S_inf: z -> 1/(z - u1); pole 1 to infinity (exponents - 1/m), old "
        "infinity to the origin (exponents + 1/m); new M_inf = e^(-2 pi i/m) M_1, "
        "new M_1 = e^(2 pi i/m) M_inf"
    )
    return DarbouxChart(
        g=chart.g,
        q=new_q,
        p=new_p,
        u=new_u,
        exponents=new_exponents,
        infinity=new_infinity,
        hamiltonians=tuple(new_h),
        notes=chart.notes + (note,),
    )
