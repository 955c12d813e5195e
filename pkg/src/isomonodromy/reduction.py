r"""Elementary gauge transformations and structural surgery.

Three kinds of moves generate everything here:

* constant conjugations (permutations, diagonalizations, balancing),
* z-linear shift gauges ``I(z) + G`` and ``J(z) + F`` with determinant
  identically 1, which move the top and bottom exponents at infinity by
  ``(+1, -1)`` and ``(-1, +1)`` respectively,
* conformal relocations ``w = 1/(z - c)`` and their inverses.

Composites of these reduce a system with reducible monodromy to block
upper-triangular form, erase a pole whose monodromy is trivial, and
attach a fresh pole with trivial monodromy.  Every move is recorded in
an auditable :class:`GaugeChain` that can be replayed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .config import NumericError, ToleranceConfig, default_tolerance
from .levelt import levelt_at_infinity
from .linalg import diagonalize, permutation_matrix
from .system import FuchsianSystem, build_system

if TYPE_CHECKING:
    from .flow import DeformationState

logger = logging.getLogger(__name__)

__all__ = [
    "ElementaryGauge",
    "GaugeChain",
    "BlockSplit",
    "apply_gauge",
    "apply_chain",
    "apply_conformal",
    "order_for_subspace",
    "elementary_up_shift",
    "elementary_down_shift",
    "reduce_reducible",
    "block_pfaffian_rhs",
    "erase_identity_singularity",
    "attach_identity_singularity",
]


@dataclass(frozen=True)
class ElementaryGauge:
    """One invertible move on a Fuchsian system.

    kinds and payloads:

    ``constant``    matrix P, residues map to P^-1 A_k P
    ``up-shift``    matrix G of the z-linear factor I(z) + G
    ``down-shift``  matrix F of the z-linear factor J(z) + F
    ``conformal``   center c; forward sends z to 1/(z-c), inverse
                    (``invert`` flag) sends w to c + 1/w
    ``discard``     pole index whose residue is dropped as zero
    ``project``     block size l; the lower-left l-complement block is
                    zeroed

    ``audit`` carries the norm destroyed by lossy moves (discard,
    project); exactly invertible moves leave it at zero.
    """

    kind: str
    matrix: np.ndarray | None = None
    center: complex | None = None
    invert: bool = False
    index: int | None = None
    block: int | None = None
    audit: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in (
            "constant",
            "up-shift",
            "down-shift",
            "conformal",
            "discard",
            "project",
        ):
            raise ValueError(f"unknown gauge kind {self.kind!r}")
        if self.matrix is not None:
            object.__setattr__(
                self, "matrix", np.asarray(self.matrix, dtype=complex)
            )


@dataclass(frozen=True)
class GaugeChain:
    """Ordered record of gauges from ``source`` to ``target``.

    ``infinity_shift`` declares the total integer change of the
    exponents at infinity in the source frame, entry per eigenvalue.
    """

    elements: tuple[ElementaryGauge, ...]
    source: FuchsianSystem
    target: FuchsianSystem
    infinity_shift: tuple[int, ...] | None = None

    def __len__(self) -> int:
        return len(self.elements)

    def replay(self, tol: ToleranceConfig | None = None) -> FuchsianSystem:
        return apply_chain(self.source, self.elements, tol=tol)

    def zeroed_mass(self) -> float:
        return float(sum(e.audit for e in self.elements))


@dataclass(frozen=True)
class BlockSplit:
    """Block upper-triangular residues, stored blockwise.

    ``upper[k]`` is l x l, ``coupling[k]`` is l x (m-l), ``lower[k]`` is
    (m-l) x (m-l); assembled matrices have an exactly zero lower-left
    block.
    """

    l: int
    poles: np.ndarray
    upper: np.ndarray
    coupling: np.ndarray
    lower: np.ndarray

    @property
    def n(self) -> int:
        return len(self.poles)

    @property
    def m(self) -> int:
        return self.upper.shape[1] + self.lower.shape[1]

    def assemble(self) -> FuchsianSystem:
        n, m, l = self.n, self.m, self.l
        res = np.zeros((n, m, m), dtype=complex)
        res[:, :l, :l] = self.upper
        res[:, :l, l:] = self.coupling
        res[:, l:, l:] = self.lower
        return build_system(self.poles, res)


def _split(system: FuchsianSystem, l: int) -> BlockSplit:
    r = system.residues
    return BlockSplit(
        l=l,
        poles=system.poles.copy(),
        upper=r[:, :l, :l].copy(),
        coupling=r[:, :l, l:].copy(),
        lower=r[:, l:, l:].copy(),
    )


# ----------------------------------------------------------------------
# applying gauges
# ----------------------------------------------------------------------

def _shift_factor(gauge: ElementaryGauge, z: complex) -> np.ndarray:
    m = gauge.matrix.shape[0]
    f = gauge.matrix.copy()
    if gauge.kind == "up-shift":
        f[0, 0] += z
    else:
        f[m - 1, m - 1] += z
    return f


def apply_conformal(
    system: FuchsianSystem,
    center: complex,
    invert: bool = False,
    tol: ToleranceConfig | None = None,
) -> FuchsianSystem:
    """Relocate the variable by ``w = 1/(z - center)`` (or its inverse).

    Residues at surviving poles are unchanged; a pole sitting at the
    center (forward) or at the origin (inverse) moves to infinity and
    drops out of the list, while a nonzero residue at infinity enters
    the list at the origin (forward) or at the center (inverse).
    Surviving poles keep their order; the entering pole is appended.
    """
    tol = tol or default_tolerance()
    center = complex(center)
    scale = max(1.0, float(np.max(np.abs(system.residues))))
    poles: list[complex] = []
    residues: list[np.ndarray] = []
    for k in range(system.n):
        u = complex(system.poles[k])
        if invert:
            if abs(u) < 1e-12:
                continue  # heads to infinity
            poles.append(center + 1.0 / u)
        else:
            if abs(u - center) < 1e-12 * max(1.0, abs(center)):
                continue
            poles.append(1.0 / (u - center))
        residues.append(system.residues[k].copy())
    entering = system.residue_at_infinity
    if float(np.max(np.abs(entering))) > 1e-14 * scale:
        poles.append(center if invert else 0.0)
        residues.append(entering)
    if not poles:
        raise NumericError("conformal relocation left no poles")
    return build_system(poles, residues, tol=tol)


def apply_gauge(
    system: FuchsianSystem,
    gauge: ElementaryGauge,
    tol: ToleranceConfig | None = None,
) -> FuchsianSystem:
    tol = tol or default_tolerance()
    if gauge.kind == "constant":
        p = gauge.matrix
        pinv = np.linalg.inv(p)
        return system.with_residues(
            np.array([pinv @ a @ p for a in system.residues])
        )
    if gauge.kind in ("up-shift", "down-shift"):
        out = []
        for k in range(system.n):
            f = _shift_factor(gauge, complex(system.poles[k]))
            out.append(np.linalg.solve(f, system.residues[k] @ f))
        return system.with_residues(np.array(out))
    if gauge.kind == "conformal":
        return apply_conformal(system, gauge.center, gauge.invert, tol=tol)
    if gauge.kind == "discard":
        k = gauge.index
        keep = [j for j in range(system.n) if j != k]
        return build_system(
            system.poles[keep], system.residues[keep], tol=tol
        )
    if gauge.kind == "project":
        l = gauge.block
        res = system.residues.copy()
        res[:, l:, :l] = 0.0
        return system.with_residues(res)
    raise ValueError(f"unknown gauge kind {gauge.kind!r}")


def apply_chain(
    system: FuchsianSystem,
    elements: tuple[ElementaryGauge, ...] | list[ElementaryGauge],
    tol: ToleranceConfig | None = None,
) -> FuchsianSystem:
    for g in elements:
        system = apply_gauge(system, g, tol=tol)
    return system


# ----------------------------------------------------------------------
# shift gauges
# ----------------------------------------------------------------------

def _require_diagonal_infinity(system: FuchsianSystem) -> np.ndarray:
    ainf = system.residue_at_infinity
    scale = max(1.0, float(np.max(np.abs(ainf))))
    if np.max(np.abs(ainf - np.diag(np.diag(ainf)))) > 1e-8 * scale:
        raise NumericError(
            "shift gauges require a diagonal residue at infinity;"
            " diagonalize first"
        )
    return np.diag(ainf)


def elementary_up_shift(
    system: FuchsianSystem,
    psi1: np.ndarray,
    psi2: np.ndarray,
    tol: ToleranceConfig | None = None,
) -> tuple[FuchsianSystem, ElementaryGauge]:
    """Raise the top exponent at infinity and lower the bottom one.

    The z-linear factor I(z) + G is built from the first two expansion
    coefficients at infinity; its determinant is identically 1.  The
    exponents there move from (l1, ..., lm) to (l1+1, ..., lm-1).
    """
    tol = tol or default_tolerance()
    lam = _require_diagonal_infinity(system)
    m = system.m
    psi1 = np.asarray(psi1, dtype=complex)
    psi2 = np.asarray(psi2, dtype=complex)
    pivot = complex(psi1[m - 1, 0])
    scale = max(1.0, float(np.max(np.abs(psi1))))
    if abs(pivot) < 1e-12 * scale:
        raise NumericError(
            "up-shift pivot entry of the first expansion coefficient is zero",
            pivot=pivot,
        )
    gap = lam[m - 1] - lam[0]
    if abs(gap - 2.0) < tol.resonance_eps:
        exp = levelt_at_infinity(system, order=2, tol=tol, strict=False)
        r2 = dict((k, rk) for k, rk in exp.pair.graded_parts).get(2)
        if r2 is not None and abs(r2[m - 1, 0]) > tol.resonance_eps:
            raise NumericError(
                "up-shift obstructed: second-level resonance entry is nonzero",
                value=complex(r2[m - 1, 0]),
            )
    g = np.zeros((m, m), dtype=complex)
    g[m - 1, 0] = pivot
    g[0, m - 1] = -1.0 / pivot
    for p in range(1, m - 1):
        g[p, p] = 1.0
        g[0, p] = psi1[m - 1, p] * g[0, m - 1]
        g[p, 0] = psi1[p, 0]
    g[0, 0] = g[0, m - 1] * psi2[m - 1, 0] + psi1[0, 0]
    gauge = ElementaryGauge("up-shift", matrix=g)
    shifted = apply_gauge(system, gauge, tol=tol)
    expected = lam.copy()
    expected[0] += 1.0
    expected[m - 1] -= 1.0
    got = shifted.residue_at_infinity
    resid = float(np.max(np.abs(got - np.diag(expected))))
    if resid > 1e-6 * max(1.0, float(np.max(np.abs(expected)))):
        raise NumericError(
            "up-shift produced a wrong residue at infinity; the expansion"
            " coefficients do not belong to this system",
            residual=resid,
        )
    return shifted, gauge


def elementary_down_shift(
    system: FuchsianSystem,
    psi1: np.ndarray,
    psi2: np.ndarray,
    tol: ToleranceConfig | None = None,
) -> tuple[FuchsianSystem, ElementaryGauge]:
    """Inverse move: lower the top exponent at infinity, raise the bottom."""
    tol = tol or default_tolerance()
    lam = _require_diagonal_infinity(system)
    m = system.m
    psi1 = np.asarray(psi1, dtype=complex)
    psi2 = np.asarray(psi2, dtype=complex)
    pivot = complex(psi1[0, m - 1])
    scale = max(1.0, float(np.max(np.abs(psi1))))
    if abs(pivot) < 1e-12 * scale:
        raise NumericError(
            "down-shift pivot entry of the first expansion coefficient is"
            " zero",
            pivot=pivot,
        )
    f = np.zeros((m, m), dtype=complex)
    f[0, m - 1] = pivot
    f[m - 1, 0] = -1.0 / pivot
    for p in range(1, m - 1):
        f[p, p] = 1.0
        f[m - 1, p] = psi1[0, p] * f[m - 1, 0]
        f[p, m - 1] = psi1[p, m - 1]
    f[m - 1, m - 1] = f[m - 1, 0] * psi2[0, m - 1] + psi1[m - 1, m - 1]
    gauge = ElementaryGauge("down-shift", matrix=f)
    shifted = apply_gauge(system, gauge, tol=tol)
    expected = lam.copy()
    expected[0] -= 1.0
    expected[m - 1] += 1.0
    got = shifted.residue_at_infinity
    resid = float(np.max(np.abs(got - np.diag(expected))))
    if resid > 1e-6 * max(1.0, float(np.max(np.abs(expected)))):
        raise NumericError(
            "down-shift produced a wrong residue at infinity; the expansion"
            " coefficients do not belong to this system",
            residual=resid,
        )
    return shifted, gauge


def order_for_subspace(
    a_inf: np.ndarray, subspace: np.ndarray, tol: float = 1e-8
) -> tuple[int, ...]:
    """Permutation putting the subspace exponents first.

    ``subspace`` must be (a basis of) a coordinate subspace up to mixing
    within its support.  The subspace block is ordered by descending
    real part (so its first exponent is maximal), the complement
    likewise (so the last exponent is minimal over the complement).
    """
    a_inf = np.asarray(a_inf, dtype=complex)
    lam = np.diag(a_inf) if a_inf.ndim == 2 else a_inf
    m = len(lam)
    v = np.asarray(subspace, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    l = v.shape[1]
    norms = np.linalg.norm(v, axis=1)
    support = [i for i in range(m) if norms[i] > tol * max(1.0, norms.max())]
    if len(support) != l or np.linalg.matrix_rank(v[support, :], tol=tol) < l:
        raise NumericError(
            "subspace is not alignable with coordinate axes by a permutation",
            support=support,
            dimension=l,
        )
    rest = [i for i in range(m) if i not in support]
    support.sort(key=lambda i: -lam[i].real)
    rest.sort(key=lambda i: -lam[i].real)
    return tuple(support + rest)


# ----------------------------------------------------------------------
# reduction to block-triangular form
# ----------------------------------------------------------------------

def _subspace_exponents(
    lam: np.ndarray, coords: np.ndarray, tol: float = 1e-6
) -> list[complex]:
    """Exponents carried by a solution subspace, from frame coordinates.

    ``coords`` holds the subspace basis expressed in a local eigenframe
    (rows follow ``lam``).  Each basis direction picks up the smallest
    real part over its support; for higher dimensions the selection
    walks the exponents in ascending real part and keeps those where the
    accumulated row rank grows.
    """
    v = np.asarray(coords, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    l = v.shape[1]
    scale = float(np.max(np.abs(v)))
    order = sorted(range(len(lam)), key=lambda i: lam[i].real)
    chosen: list[complex] = []
    rows: list[np.ndarray] = []
    rank = 0
    for i in order:
        if np.max(np.abs(v[i])) < tol * scale:
            continue
        rows.append(v[i])
        new_rank = np.linalg.matrix_rank(np.array(rows), tol=1e-10 * scale)
        if new_rank > rank:
            chosen.append(complex(lam[i]))
            rank = new_rank
        else:
            rows.pop()
        if rank == l:
            break
    if rank < l:
        raise NumericError(
            "subspace coordinates are rank-deficient in the local frame"
        )
    return chosen


def _triangularity_mass(system: FuchsianSystem, l: int) -> float:
    return float(np.max(np.abs(system.residues[:, l:, :l])))


def _solve_free_pivot(
    system: FuchsianSystem,
    slots: list[tuple[int, int, int]],
    remaining: int,
    l: int,
    tol: ToleranceConfig,
) -> complex:
    """Value of the free resonant pivot slot that makes the reduction close.

    The lower-left mass of the fully shifted system is a rational
    function of the slot value; it vanishes exactly at the
    deformation-consistent value.  Sampled at several trial values, the
    numerator polynomial of each lower-left entry is recovered by
    least squares and the common root is returned.
    """

    def run(v: complex) -> FuchsianSystem:
        cur = system
        for step in range(remaining):
            fills = {s: v for s in slots} if step == 0 else None
            exp = levelt_at_infinity(cur, order=2, fills=fills, tol=tol, strict=False)
            cur, _ = elementary_up_shift(
                cur, exp.coefficients[1], exp.coefficients[2], tol=tol
            )
        return cur

    # entries of the shifted residues are rational in the slot value with
    # denominator a power of the pivot; v^(2*remaining) * entry is a
    # polynomial of bounded degree.  Fit it on a sample grid, take the
    # roots, then polish the best one by Newton on the actual entry.
    deg = 4 * remaining
    samples = np.array(
        [1.0, -1.0, 2.0, -2.0, 0.5, 3.0, -0.5, 1.5, -3.0, 0.25, 4.0, -1.5],
        dtype=complex,
    )[: max(deg + 3, 8)]
    vand = np.vander(samples, deg + 1, increasing=True)
    rows = []
    for v in samples:
        sysv = run(v)
        rows.append((v ** (2 * remaining)) * sysv.residues[:, l:, :l].ravel())
    values = np.array(rows)
    coeffs, *_ = np.linalg.lstsq(vand, values, rcond=None)
    # pick the entry with the largest variation for root finding
    weight = np.max(np.abs(values), axis=0)
    idx = int(np.argmax(weight))
    poly = coeffs[:, idx][::-1]
    roots = [r for r in np.roots(poly) if abs(r) > 1e-10]
    if not roots:
        raise NumericError(
            "no pivot slot value closes the reduction; the subspace data is"
            " inconsistent"
        )
    best = min(roots, key=lambda r: _triangularity_mass(run(complex(r)), l))

    def entry(v: complex) -> complex:
        return complex(run(v).residues[:, l:, :l].ravel()[idx])

    v = complex(best)
    h = 1e-6 * max(1.0, abs(v))
    for _ in range(4):
        fv = entry(v)
        dfv = (entry(v + h) - entry(v - h)) / (2 * h)
        if abs(dfv) < 1e-30:
            break
        step = fv / dfv
        v -= step
        if abs(step) < 1e-14 * max(1.0, abs(v)):
            break
    mass = _triangularity_mass(run(v), l)
    logger.debug("pivot slot solved: %s (mass %.2e)", v, mass)
    return v


def reduce_reducible(
    system: FuchsianSystem,
    subspace: np.ndarray | None = None,
    tol: ToleranceConfig | None = None,
) -> tuple[BlockSplit, GaugeChain]:
    """Gauge a system with reducible monodromy to block-triangular form.

    The invariant subspace of the monodromy (found automatically when
    not given) fixes, via its exponents at every singularity, the
    number N of up-shifts; a permutation orders the exponents at
    infinity, the shifts run, and a final projection zeroes the residual
    lower-left mass, which is recorded in the chain.
    """
    from .monodromy import connection_matrices, invariant_subspace, monodromy_matrices

    tol = tol or default_tolerance()
    data = monodromy_matrices(system, tol=tol)
    if subspace is None:
        v = invariant_subspace(data)
        if v is None:
            raise NumericError("monodromy has no invariant subspace; nothing to reduce")
    else:
        v = np.asarray(subspace, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        qv, _ = np.linalg.qr(v)
        proj = np.eye(data.m) - qv @ qv.conj().T
        resid = max(
            float(np.linalg.norm(proj @ (data.matrices[k] @ qv)))
            for k in range(data.n)
        )
        if resid > 1e-6 * max(1.0, float(np.max(np.abs(data.matrices)))):
            raise NumericError(
                "given subspace is not invariant under the monodromy",
                residual=resid,
            )
    l = v.shape[1]
    m = system.m

    # exponents of the subspace at every singularity
    conn, local_frames, data = connection_matrices(system, data=data, tol=tol)
    total = 0.0 + 0.0j
    for k in range(system.n):
        coords = conn[k] @ v
        total += sum(
            _subspace_exponents(local_frames[k].pair.exponents, coords)
        )
    total += sum(_subspace_exponents(data.infinity_pair.exponents, v))
    n_shift = -total
    if abs(n_shift - round(n_shift.real)) > tol.resonance_eps or round(
        n_shift.real
    ) < 0:
        raise NumericError(
            "subspace exponent sum is not a non-positive integer; the"
            " subspace cannot be gauge-invariant",
            exponent_sum=total,
        )
    n_shift = int(round(n_shift.real))

    elements: list[ElementaryGauge] = []
    work = system

    # frame: diagonalize at infinity if necessary, in the recorded frame
    if float(np.max(np.abs(data.frame - np.eye(m)))) > 0:
        elements.append(ElementaryGauge("constant", matrix=data.frame))
        work = apply_gauge(work, elements[-1], tol=tol)

    # order exponents at infinity: subspace support first
    sub_sel = _subspace_exponents(data.infinity_pair.exponents, v)
    lam_inf = data.infinity_pair.exponents
    used: set[int] = set()
    support: list[int] = []
    for s in sub_sel:
        for i in range(m):
            if i not in used and abs(lam_inf[i] - s) < 1e-12:
                support.append(i)
                used.add(i)
                break
    rest = [i for i in range(m) if i not in used]
    support.sort(key=lambda i: -lam_inf[i].real)
    rest.sort(key=lambda i: -lam_inf[i].real)
    order = tuple(support + rest)
    if order != tuple(range(m)):
        p = permutation_matrix(order)
        elements.append(ElementaryGauge("constant", matrix=p))
        work = apply_gauge(work, elements[-1], tol=tol)

    # run the shifts; a free resonant pivot slot is solved for the value
    # that closes the reduction
    for step in range(n_shift):
        exp = levelt_at_infinity(work, order=2, tol=tol, strict=False)
        pivot_slots = [
            (j, p, q) for (j, p, q, _) in exp.free_slots if (j, p, q) == (1, m - 1, 0)
        ]
        fills = None
        if pivot_slots:
            value = _solve_free_pivot(
                work, pivot_slots, n_shift - step, l, tol
            )
            fills = {s: value for s in pivot_slots}
            exp = levelt_at_infinity(
                work, order=2, fills=fills, tol=tol, strict=False
            )
        work, gauge = elementary_up_shift(
            work, exp.coefficients[1], exp.coefficients[2], tol=tol
        )
        elements.append(gauge)

    # audit triangularity, then project
    mass = _triangularity_mass(work, l)
    scale = max(1.0, float(np.max(np.abs(work.residues))))
    if mass > 1e-4 * scale:
        raise NumericError(
            "system is not block-triangular after the declared number of"
            " shifts",
            mass=mass,
            shifts=n_shift,
        )
    if mass > 0:
        elements.append(ElementaryGauge("project", block=l, audit=mass))
        work = apply_gauge(work, elements[-1], tol=tol)
    logger.debug("reduction: %d shifts, projected mass %.3e", n_shift, mass)

    shift_vec = [0] * m
    shift_vec[0] = n_shift
    shift_vec[m - 1] = -n_shift
    # undo the ordering permutation for the declared shift in the source frame
    declared = [0] * m
    for pos, src in enumerate(order):
        declared[src] = shift_vec[pos]
    chain = GaugeChain(
        elements=tuple(elements),
        source=system,
        target=work,
        infinity_shift=tuple(declared),
    )
    return _split(work, l), chain


def block_pfaffian_rhs(split: BlockSplit) -> np.ndarray:
    """Derivatives ``d C_i / d u_j`` of the coupling blocks.

    The upper and lower diagonal blocks follow their own flows; the
    coupling blocks obey the linear system returned here, shape
    (n, n, l, m-l).
    """
    n, l = split.n, split.l
    u = split.poles
    bu, c, bl = split.upper, split.coupling, split.lower
    out = np.zeros((n, n, l, split.m - l), dtype=complex)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            term = (
                bu[i] @ c[j] - bu[j] @ c[i] + c[i] @ bl[j] - c[j] @ bl[i]
            ) / (u[i] - u[j])
            out[i, j] = term
            out[i, i] -= term
    return out


# ----------------------------------------------------------------------
# erasing and attaching trivial singularities
# ----------------------------------------------------------------------

def _diagonalize_infinity(
    system: FuchsianSystem, elements: list[ElementaryGauge], tol: ToleranceConfig
) -> FuchsianSystem:
    ainf = system.residue_at_infinity
    scale = max(1.0, float(np.max(np.abs(ainf))))
    if np.max(np.abs(ainf - np.diag(np.diag(ainf)))) <= 1e-10 * scale:
        return system
    _, frame = diagonalize(ainf)
    elements.append(ElementaryGauge("constant", matrix=frame))
    return apply_gauge(system, elements[-1], tol=tol)


def _shift_exponents_to(
    system: FuchsianSystem,
    target: np.ndarray,
    elements: list[ElementaryGauge],
    tol: ToleranceConfig,
) -> FuchsianSystem:
    """Drive the diagonal exponents at infinity onto ``target`` (integers).

    Each round permutes a deficient exponent to the top and an excessive
    one to the bottom, then up-shifts; down-shifts handle the opposite
    imbalance.  Terminates because the total discrepancy drops by 2 per
    round.
    """
    m = system.m
    work = system
    for _ in range(200):
        lam = np.real(np.diag(work.residue_at_infinity))
        diff = np.round(target - lam).astype(int)
        if np.all(diff == 0):
            return work
        raise_idx = [i for i in range(m) if diff[i] > 0]
        lower_idx = [i for i in range(m) if diff[i] < 0]
        if not raise_idx or not lower_idx:
            raise NumericError(
                "exponent targets are unbalanced; shifts preserve the total",
                remaining=diff.tolist(),
            )
        a, b = raise_idx[0], lower_idx[0]
        order = [a] + [i for i in range(m) if i not in (a, b)] + [b]
        if order != list(range(m)):
            p = permutation_matrix(tuple(order))
            elements.append(ElementaryGauge("constant", matrix=p))
            work = apply_gauge(work, elements[-1], tol=tol)
            target = target[order]
        exp = levelt_at_infinity(work, order=2, tol=tol, strict=False)
        work, gauge = elementary_up_shift(
            work, exp.coefficients[1], exp.coefficients[2], tol=tol
        )
        elements.append(gauge)
    raise NumericError("exponent shifting did not terminate")


def erase_identity_singularity(
    system: "FuchsianSystem | DeformationState",
    l: int,
    tol: ToleranceConfig | None = None,
) -> tuple[FuchsianSystem, GaugeChain]:
    """Remove a pole whose monodromy is the identity.

    The pole is sent to infinity by a conformal relocation, its integer
    exponents are shifted to zero, the then-trivial residue is dropped,
    and the relocation is undone.  Preconditions: identity monodromy
    (checked), integer exponents summing to zero.  A deformation state
    is accepted in place of the bare system; erasing is pointwise in u,
    so only the system itself is used.
    """
    from .monodromy import monodromy_matrices, scalar_monodromy_indices

    tol = tol or default_tolerance()
    system = getattr(system, "system", system)
    if not 0 <= l < system.n:
        raise ValueError(f"pole index {l} out of range")
    data = monodromy_matrices(system, tol=tol)
    scalars = dict(scalar_monodromy_indices(data))
    if l not in scalars:
        raise NumericError(
            f"monodromy at pole {l + 1} is not scalar; it cannot be erased"
        )
    mu = scalars[l]
    if abs(mu - 1.0) > 1e-6:
        raise NumericError(
            f"monodromy at pole {l + 1} is scalar but not the identity;"
            " remove the root-of-unity factor by a symmetry first",
            scalar=mu,
        )
    lam_l = data.exponents[l]
    ints = np.round(np.real(lam_l)).astype(int)
    if np.max(np.abs(lam_l - ints)) > tol.resonance_eps:
        raise NumericError(
            "exponents at the pole are not integers; identity monodromy is"
            " inconsistent",
            exponents=lam_l.tolist(),
        )
    if int(ints.sum()) != 0:
        raise NumericError(
            "exponents at the pole do not sum to zero; the shift gauges"
            " preserve that sum, so this pole cannot be erased",
            exponents=ints.tolist(),
        )

    elements: list[ElementaryGauge] = []
    center = complex(system.poles[l])
    elements.append(ElementaryGauge("conformal", center=center))
    work = apply_gauge(system, elements[-1], tol=tol)
    work = _diagonalize_infinity(work, elements, tol)
    work = _shift_exponents_to(
        work, np.zeros(system.m), elements, tol
    )
    # the erased pole now sits at infinity with zero exponents and trivial
    # monodromy: its residue must be gone
    leftover = float(np.max(np.abs(work.residue_at_infinity)))
    scale = max(1.0, float(np.max(np.abs(work.residues))))
    if leftover > 1e-7 * scale:
        raise NumericError(
            "residue at the erased singularity did not vanish",
            leftover=leftover,
        )
    back = ElementaryGauge("conformal", center=center, invert=True)
    elements.append(back)
    work = apply_gauge(work, back, tol=tol)
    # absorb the zero-exponent ghost: the inverse map reinstates a pole at
    # the old position exactly when some residue at infinity survived; the
    # vanishing check above guarantees it carries only roundoff, which the
    # conformal step already dropped if it was exactly zero
    for k in range(work.n):
        if abs(complex(work.poles[k]) - center) < 1e-9 * max(1.0, abs(center)):
            mass = float(np.max(np.abs(work.residues[k])))
            elements.append(ElementaryGauge("discard", index=k, audit=mass))
            work = apply_gauge(work, elements[-1], tol=tol)
            break
    work = _diagonalize_infinity(work, elements, tol)
    chain = GaugeChain(tuple(elements), source=system, target=work)
    return work, chain


def attach_identity_singularity(
    system: FuchsianSystem,
    u_new: complex,
    exponents: list[int] | tuple[int, ...],
    tol: ToleranceConfig | None = None,
) -> tuple[FuchsianSystem, GaugeChain]:
    """Insert a pole with identity monodromy and prescribed integer exponents.

    The solution frame is normalized to the identity at ``u_new`` by a
    constant gauge (so no logarithms arise there), the point is sent to
    infinity conformally, shift gauges build the requested exponents,
    and the relocation is undone.
    """
    from .levelt import evaluate_levelt
    from .monodromy import transport

    tol = tol or default_tolerance()
    u_new = complex(u_new)
    m = system.m
    exps = np.asarray(exponents, dtype=int)
    if exps.shape != (m,):
        raise ValueError(f"need {m} integer exponents")
    if int(exps.sum()) != 0:
        raise ValueError("exponents must sum to zero")
    if min(abs(u_new - complex(u)) for u in system.poles) < 1e-9 * max(
        1.0, abs(u_new)
    ):
        raise ValueError("u_new collides with an existing pole")
    if np.all(exps == 0):
        poles = list(system.poles) + [u_new]
        residues = list(system.residues) + [np.zeros((m, m), dtype=complex)]
        bigger = build_system(poles, residues, tol=tol)
        return bigger, GaugeChain((), source=system, target=bigger)

    elements: list[ElementaryGauge] = []
    work = _diagonalize_infinity(system, elements, tol)

    # normalize the frame at the attachment point, approaching along a
    # direction that clears the poles
    anchor = levelt_at_infinity(work, order=24, tol=tol, strict=False)
    from .system import PathSpec

    clearance = 0.25 * min(
        work.min_pole_distance(),
        min(abs(u_new - complex(u)) for u in work.poles),
    )
    route = None
    for theta in np.pi * np.array([0.5, 2 / 3, 1 / 3, 0.75, 0.25, 5 / 6, 1 / 6, -0.5, 1.0, 0.0]):
        zb = 3.0 * anchor.radius * np.exp(1j * theta)
        if PathSpec((zb, u_new)).clearance(work.poles) > clearance:
            route = zb
            break
    if route is None:
        raise NumericError(
            "no straight approach to the attachment point clears the poles;"
            " choose a different u_new"
        )
    zb = route
    phi_b = evaluate_levelt(anchor, zb)
    phi_at_new = transport(work, [zb, u_new], initial=phi_b, tol=tol)
    # residues transform under Phi -> C0 Phi as A -> C0 A C0^-1, which is
    # the constant gauge with P = C0^-1 = the frame value itself
    elements.append(ElementaryGauge("constant", matrix=phi_at_new))
    work = apply_gauge(work, elements[-1], tol=tol)

    elements.append(ElementaryGauge("conformal", center=u_new))
    work = apply_gauge(work, elements[-1], tol=tol)
    work = _diagonalize_infinity(work, elements, tol)
    target = np.array(sorted(exps.tolist(), reverse=True), dtype=float)
    work = _shift_exponents_to(work, target, elements, tol)
    back = ElementaryGauge("conformal", center=u_new, invert=True)
    elements.append(back)
    work = apply_gauge(work, back, tol=tol)
    work = _diagonalize_infinity(work, elements, tol)
    chain = GaugeChain(tuple(elements), source=system, target=work)
    return work, chain
