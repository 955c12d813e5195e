r"""Monodromy of a Fuchsian system from analytic continuation.

The solution normalized at infinity is continued along lassos around
the poles.  The geometry is fixed by a :class:`LoopBasis`: branch cuts
run from every pole in the direction ``cut_direction``, the basepoint
sits on the opposite ray, and each lasso runs parallel to the cut
direction to a counterclockwise circle of half the distance to the
nearest other pole.  Loops are traversed in the order the cuts are met
by a large counterclockwise circle (ascending transverse coordinate
``Im(u / cut_direction)``); a braid normalization then rewrites the raw
matrices into label order without changing their product, so that

.. math:: M_\infty M_n \cdots M_1 = 1,
          \qquad M_\infty = e^{2\pi i \Lambda^{(\infty)}}
                            e^{2\pi i R^{(\infty)}}.

The residual of that identity is the certificate of the whole
computation and is checked, not just reported.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from .config import NumericError, ToleranceConfig, default_tolerance
from .levelt import (
    AdmissiblePair,
    LeveltExpansion,
    evaluate_levelt,
    levelt_at_infinity,
    levelt_at_pole,
)
from .linalg import diagonalize, sorted_eig
from .system import FuchsianSystem, PathSpec, spectrum

logger = logging.getLogger(__name__)

__all__ = [
    "LoopBasis",
    "MonodromyData",
    "EquivalenceWitness",
    "transport",
    "monodromy_matrices",
    "connection_matrices",
    "monodromy_equivalent",
    "invariant_subspace",
    "scalar_monodromy_indices",
]

_ARC_SEGMENTS = 8          # chords approximating each small circle
_LOCAL_ORDER = 24          # series order for finite-pole frames; the
                           # matching point sits at a quarter of the
                           # local radius, so the tail is ~4**-24


@dataclass(frozen=True)
class LoopBasis:
    """Geometry of the loop system used for continuation.

    ``cut_direction`` is a nonzero complex number; branch cuts leave
    every pole along it and the basepoint lies on the opposite ray at
    ``basepoint_radius`` (chosen automatically when omitted).
    ``ordering``, when present, records the traversal order of the
    loops as pole indices, first loop first; it is filled in by
    :func:`monodromy_matrices`.
    """

    cut_direction: complex = 1j
    basepoint_radius: float | None = None
    ordering: tuple[int, ...] | None = None

    def unit(self) -> complex:
        c = complex(self.cut_direction)
        if c == 0:
            raise ValueError("cut_direction must be nonzero")
        return c / abs(c)


@dataclass(frozen=True)
class MonodromyData:
    """Labeled monodromy matrices plus the data needed to audit them.

    ``matrices[k]`` is the monodromy around pole ``k`` in the frame of
    the solution normalized at infinity (of the conjugated system when
    ``frame`` is not the identity); ``at_infinity`` is the loop around
    infinity, computed from the exponents there.  ``conjugators[k]``
    records the braid conjugation that moved the raw loop ``k`` into
    label order; connection matrices use it to stay consistent with
    the labeled matrices.
    """

    matrices: np.ndarray
    at_infinity: np.ndarray
    closure_residual: float
    exponents: tuple[np.ndarray, ...]
    infinity_pair: AdmissiblePair
    basis: LoopBasis
    frame: np.ndarray
    conjugators: np.ndarray

    @property
    def n(self) -> int:
        return self.matrices.shape[0]

    @property
    def m(self) -> int:
        return self.matrices.shape[1]

    def trace_words(self) -> dict[str, complex]:
        """Traces of single letters and ordered pairs, for quick comparison."""
        out: dict[str, complex] = {}
        for k in range(self.n):
            out[f"tr M{k + 1}"] = complex(np.trace(self.matrices[k]))
        for k in range(self.n):
            for l in range(k + 1, self.n):
                out[f"tr M{k + 1}M{l + 1}"] = complex(
                    np.trace(self.matrices[k] @ self.matrices[l])
                )
        out["tr Minf"] = complex(np.trace(self.at_infinity))
        return out


@dataclass(frozen=True)
class EquivalenceWitness:
    """Outcome of a monodromy-data comparison."""

    equivalent: bool
    permutation: tuple[int, ...] | None
    integer_shift: tuple[int, ...] | None
    conjugator: np.ndarray | None
    conjugation_residual: float
    detail: str = ""


# ----------------------------------------------------------------------
# analytic continuation
# ----------------------------------------------------------------------

def _segment_transport(
    system: FuchsianSystem, z0: complex, z1: complex, y0: np.ndarray, tol: ToleranceConfig
) -> np.ndarray:
    m = system.m
    u = system.poles
    a = system.residues

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        z = z0 + t * (z1 - z0)
        mat = y.view(complex).reshape(m, m)
        coeff = sum(a[k] / (z - u[k]) for k in range(system.n))
        return ((z1 - z0) * (coeff @ mat)).ravel().view(float)

    sol = solve_ivp(
        rhs,
        (0.0, 1.0),
        y0.ravel().view(float).copy(),
        method="DOP853",
        rtol=tol.ode_rel_tol,
        atol=tol.ode_abs_tol,
    )
    if not sol.success:
        raise NumericError(
            f"continuation failed on segment {z0} -> {z1}: {sol.message}"
        )
    return sol.y[:, -1].view(complex).reshape(m, m)


def transport(
    system: FuchsianSystem,
    path: PathSpec | list[complex] | tuple[complex, ...],
    initial: np.ndarray | None = None,
    tol: ToleranceConfig | None = None,
) -> np.ndarray:
    """Continue a solution frame along a piecewise straight path.

    The path must clear every pole by the configured clearance; a path
    that does not is refused rather than integrated inaccurately.
    """
    tol = tol or default_tolerance()
    if not isinstance(path, PathSpec):
        path = PathSpec(tuple(complex(p) for p in path))
    clearance = tol.pole_clearance_factor * min(system.min_pole_distance(), 1.0)
    actual = path.clearance(system.poles)
    if actual < clearance:
        raise NumericError(
            "path passes too close to a pole",
            clearance=actual,
            required=clearance,
        )
    y = initial if initial is not None else np.eye(system.m, dtype=complex)
    y = np.asarray(y, dtype=complex)
    for z0, z1 in path.segments():
        y = _segment_transport(system, z0, z1, y, tol)
    return y


# ----------------------------------------------------------------------
# loop construction
# ----------------------------------------------------------------------

def _loop_radii(system: FuchsianSystem) -> list[float]:
    return [0.5 * system.nearest_other_pole(k) for k in range(system.n)]


def _lasso(
    zeta_pole: complex, radius: float, west: float, zeta_base: complex
) -> list[complex]:
    """Lasso polyline in the rotated frame where cuts run east.

    From the basepoint to the western horizon at the pole's transverse
    level, east to the circle, counterclockwise around, and back.
    """
    entry = zeta_pole - radius
    horizon = west + 1j * zeta_pole.imag
    pts = [zeta_base, horizon, entry]
    for t in np.linspace(0.0, 2.0 * np.pi, _ARC_SEGMENTS + 1)[1:]:
        pts.append(zeta_pole + radius * np.exp(1j * (np.pi + t)))
    pts.extend([horizon, zeta_base])
    return pts


def _prepare(
    system: FuchsianSystem, basis: LoopBasis, tol: ToleranceConfig
) -> tuple[FuchsianSystem, LoopBasis, np.ndarray, LeveltExpansion, complex]:
    """Diagonalize at infinity if needed, fix the basepoint, anchor there."""
    ainf = system.residue_at_infinity
    m = system.m
    off = ainf - np.diag(np.diag(ainf))
    frame = np.eye(m, dtype=complex)
    work = system
    if np.max(np.abs(off)) > 1e-12 * max(1.0, float(np.max(np.abs(ainf)))):
        _, frame = diagonalize(ainf)
        finv = np.linalg.inv(frame)
        work = system.with_residues(
            np.array([finv @ a @ frame for a in system.residues])
        )

    scale = max(1.0, float(np.max(np.abs(work.poles))))
    radius = basis.basepoint_radius or 6.0 * scale
    if radius < 2.0 * scale:
        raise ValueError(
            f"basepoint_radius {radius} too small; needs at least {2.0 * scale}"
        )
    # series order so the anchor tail is below the ODE tolerance
    ratio = scale / radius
    target = min(1e-14, tol.ode_rel_tol * 1e-3)
    order = int(np.ceil(np.log(target) / np.log(ratio))) if ratio < 1 else 30
    order = max(8, min(60, order))
    anchor = levelt_at_infinity(work, order=order, tol=tol, strict=False)
    base = -radius * basis.unit()
    basis = replace(basis, basepoint_radius=radius)
    return work, basis, frame, anchor, base


def _geometric_order(
    system: FuchsianSystem, basis: LoopBasis, tol: ToleranceConfig
) -> list[int]:
    unit = basis.unit()
    tau = [(u / unit).imag for u in system.poles]
    scale = max(1.0, float(np.max(np.abs(system.poles))))
    for i in range(system.n):
        for j in range(i + 1, system.n):
            if abs(tau[i] - tau[j]) < 1e-9 * scale:
                raise NumericError(
                    f"poles {i + 1} and {j + 1} are aligned along the cut"
                    " direction; rotate cut_direction",
                )
    return sorted(range(system.n), key=lambda k: tau[k])


def _braid_to_label_order(
    order: list[int], raw: dict[int, np.ndarray]
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Rewrite raw loop matrices into label order, preserving the product.

    ``order`` lists pole indices, first traversed first; the first
    traversed loop is the rightmost factor.  Adjacent factors are
    swapped by conjugation until the labels ascend with position, so the
    final product reads ``M_n ... M_1``.  Returns the labeled matrices
    and the accumulated conjugator of each label.
    """
    n = len(order)
    seq = list(order)
    mats = {k: raw[k].copy() for k in raw}
    conj = {k: np.eye(mats[k].shape[0], dtype=complex) for k in raw}
    changed = True
    while changed:
        changed = False
        for i in range(n - 1):
            if seq[i] > seq[i + 1]:
                a, b = seq[i], seq[i + 1]
                # literal sub-product is mats[b] @ mats[a]; keep it while
                # moving the larger label left
                mats[a] = mats[b] @ mats[a] @ np.linalg.inv(mats[b])
                conj[a] = mats[b] @ conj[a]
                seq[i], seq[i + 1] = seq[i + 1], seq[i]
                changed = True
    return [mats[k] for k in range(n)], [conj[k] for k in range(n)]


def monodromy_matrices(
    system: FuchsianSystem,
    basis: LoopBasis | None = None,
    tol: ToleranceConfig | None = None,
) -> MonodromyData:
    """Monodromy matrices of the frame normalized at infinity.

    Raises :class:`NumericError` when the closure identity fails beyond
    the accumulated tolerance of the continuation, when loops cannot
    clear the poles, or when two poles are aligned with the cut
    direction.
    """
    tol = tol or default_tolerance()
    basis = basis or LoopBasis()
    work, basis, frame, anchor, base = _prepare(system, basis, tol)
    unit = basis.unit()
    order = _geometric_order(work, basis, tol)
    basis = replace(basis, ordering=tuple(order))

    phi0 = evaluate_levelt(anchor, base)
    radii = _loop_radii(work)
    west = -basis.basepoint_radius
    zeta_base = base / unit
    clearance = tol.pole_clearance_factor * min(work.min_pole_distance(), 1.0)
    raw: dict[int, np.ndarray] = {}
    for k in range(work.n):
        zeta_pole = complex(work.poles[k]) / unit
        pts_zeta = _lasso(zeta_pole, radii[k], west, zeta_base)
        pts = [unit * p for p in pts_zeta]
        path = PathSpec(tuple(pts))
        # non-encircled poles must stay clear of the polyline
        others = np.array([work.poles[j] for j in range(work.n) if j != k])
        if others.size and path.clearance(others) < max(clearance, 0.25 * radii[k]):
            raise NumericError(
                f"loop around pole {k + 1} passes too close to another pole;"
                " rotate cut_direction or adjust the basepoint",
            )
        y = phi0
        for z0, z1 in path.segments():
            y = _segment_transport(work, z0, z1, y, tol)
        raw[k] = np.linalg.solve(phi0, y)

    labeled, conj = _braid_to_label_order(order, raw)
    matrices = np.array(labeled)
    minf = anchor.pair.formal_monodromy()
    prod = np.eye(work.m, dtype=complex)
    for k in range(work.n):
        prod = matrices[k] @ prod
    closure = float(np.max(np.abs(minf @ prod - np.eye(work.m))))
    closure_tol = tol.closure_gate_factor * work.n * tol.ode_rel_tol
    if closure > closure_tol:
        raise NumericError(
            "monodromy closure residual above tolerance",
            residual=closure,
            tolerance=closure_tol,
        )
    logger.debug("closure residual %.3e (order %s)", closure, order)
    return MonodromyData(
        matrices=matrices,
        at_infinity=minf,
        closure_residual=closure,
        exponents=tuple(spectrum(a) for a in work.residues),
        infinity_pair=anchor.pair,
        basis=basis,
        frame=frame,
        conjugators=np.array(conj),
    )


def connection_matrices(
    system: FuchsianSystem,
    data: MonodromyData | None = None,
    basis: LoopBasis | None = None,
    tol: ToleranceConfig | None = None,
) -> tuple[list[np.ndarray], list[LeveltExpansion], MonodromyData]:
    """Connection matrices between the frame at infinity and local frames.

    For each finite pole the local Levelt frame is matched against the
    continued global frame on the ray opposite the cut, and the labeled
    monodromy identity ``M_k = C_k^-1 E_k C_k`` (with ``E_k`` the formal
    local monodromy) is verified as a postcondition.  Requires
    diagonalizable residues.
    """
    tol = tol or default_tolerance()
    data = data or monodromy_matrices(system, basis=basis, tol=tol)
    basis = data.basis
    unit = basis.unit()
    work = system
    if np.max(np.abs(data.frame - np.eye(system.m))) > 0:
        finv = np.linalg.inv(data.frame)
        work = system.with_residues(
            np.array([finv @ a @ data.frame for a in system.residues])
        )
    # rebuild the anchor exactly as monodromy_matrices did
    _, _, _, anchor, base = _prepare(work, replace(basis, ordering=None), tol)
    phi0 = evaluate_levelt(anchor, base)
    west = -basis.basepoint_radius
    zeta_base = base / unit
    theta = np.angle(unit)
    branch = 0 if theta > 0 else -1
    out: list[np.ndarray] = []
    locals_: list[LeveltExpansion] = []
    n4_tol = 1e5 * tol.ode_rel_tol
    for k in range(work.n):
        dmin = work.nearest_other_pole(k)
        zstar = complex(work.poles[k]) - 0.25 * dmin * unit
        zeta_pole = complex(work.poles[k]) / unit
        horizon = unit * (west + 1j * zeta_pole.imag)
        y = phi0
        for z0, z1 in ((base, horizon), (horizon, zstar)):
            y = _segment_transport(work, z0, z1, y, tol)
        local = levelt_at_pole(work, k, order=_LOCAL_ORDER, tol=tol)
        fk = evaluate_levelt(local, zstar, log_branch=branch)
        ck_raw = np.linalg.solve(fk, y)
        ck = ck_raw @ np.linalg.inv(data.conjugators[k])
        ek = local.pair.formal_monodromy()
        predicted = np.linalg.solve(ck, ek @ ck)
        resid = float(np.max(np.abs(predicted - data.matrices[k])))
        if resid > n4_tol:
            raise NumericError(
                f"connection matrix at pole {k + 1} fails the local"
                " monodromy identity",
                residual=resid,
                tolerance=n4_tol,
            )
        out.append(ck)
        locals_.append(local)
    return out, locals_, data


# ----------------------------------------------------------------------
# comparisons and substructure
# ----------------------------------------------------------------------

def _match_up_to_integers(
    a: np.ndarray, b: np.ndarray, perm: tuple[int, ...], eps: float
) -> tuple[bool, tuple[int, ...]]:
    """Does ``b = a[perm] + integer vector`` hold entrywise?"""
    shift = []
    for i, p in enumerate(perm):
        d = b[i] - a[p]
        k = int(round(d.real))
        if abs(d - k) > eps:
            return False, ()
        shift.append(k)
    return True, tuple(shift)


def monodromy_equivalent(
    d1: MonodromyData,
    d2: MonodromyData,
    tol: float = 1e-5,
    resonance_eps: float = 1e-6,
) -> EquivalenceWitness:
    """Decide whether two sets of monodromy data agree.

    Agreement means: pole-wise exponents related by one common
    permutation, exponents at infinity by the same permutation plus an
    integer vector, and the monodromy tuples simultaneously conjugate.
    The conjugator is produced as a witness via a least-squares
    intertwiner; its residual is part of the report.
    """
    from itertools import permutations

    from .linalg import intertwiner

    if d1.m != d2.m or d1.n != d2.n:
        return EquivalenceWitness(False, None, None, None, np.inf, "shape mismatch")
    m, n = d1.m, d1.n

    # cheap invariant filter first
    w1, w2 = d1.trace_words(), d2.trace_words()
    trace_resid = max(
        abs(w1[k] - w2[k]) for k in w1 if k != "tr Minf"
    )
    if trace_resid > tol * max(1.0, max(abs(v) for v in w1.values())):
        return EquivalenceWitness(
            False, None, None, None, np.inf, f"trace words differ by {trace_resid:.3e}"
        )

    hit = None
    for perm in permutations(range(m)):
        ok = all(
            _match_up_to_integers(
                d1.exponents[k], d2.exponents[k], perm, resonance_eps
            )[0]
            and all(
                s == 0
                for s in _match_up_to_integers(
                    d1.exponents[k], d2.exponents[k], perm, resonance_eps
                )[1]
            )
            for k in range(n)
        )
        if not ok:
            continue
        okinf, shift = _match_up_to_integers(
            d1.infinity_pair.exponents, d2.infinity_pair.exponents, perm, resonance_eps
        )
        if okinf:
            hit = (perm, shift)
            break
    if hit is None:
        return EquivalenceWitness(
            False, None, None, None, np.inf, "exponent data not matchable"
        )
    perm, shift = hit

    pairs = [(d1.matrices[k], d2.matrices[k]) for k in range(n)]
    x, sigma = intertwiner(pairs)
    cond = np.linalg.cond(x)
    scale = max(float(np.max(np.abs(d1.matrices))), 1.0)
    resid = max(
        float(np.max(np.abs(d1.matrices[k] @ x - x @ d2.matrices[k])))
        for k in range(n)
    ) / scale
    good = bool(resid < tol and np.isfinite(cond) and cond < 1e8)
    detail = "" if good else f"intertwiner residual {resid:.3e}, cond {cond:.3e}"
    return EquivalenceWitness(good, perm, shift, x if good else None, resid, detail)


def invariant_subspace(
    data: MonodromyData,
    dimension: int | None = None,
    tol: float = 1e-8,
    seed: int = 0,
) -> np.ndarray | None:
    """A common invariant subspace of the monodromy matrices, or None.

    Searches candidate spans built from eigenspaces of a seeded random
    combination of the matrices and of the first matrix (sums of
    eigenspaces for higher dimensions).  Returns an orthonormal basis,
    columns spanning the subspace, of the smallest invariant dimension
    found (or the requested ``dimension``).
    """
    mats = [data.matrices[k] for k in range(data.n)]
    m = data.m
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=data.n) + 1j * rng.normal(size=data.n)
    probe = sum(c * mk for c, mk in zip(coeffs, mats))

    def residual(v: np.ndarray) -> float:
        q, _ = np.linalg.qr(v)
        proj = np.eye(m) - q @ q.conj().T
        return max(
            float(np.linalg.norm(proj @ (mk @ q))) / max(np.linalg.norm(mk), 1.0)
            for mk in mats
        )

    def orthonormal(v: np.ndarray) -> np.ndarray:
        q, _ = np.linalg.qr(v)
        return q[:, : v.shape[1]]

    dims = [dimension] if dimension else list(range(1, m))
    _, probe_vecs = sorted_eig(probe)
    _, first_vecs = sorted_eig(mats[0])
    for l in dims:
        candidates: list[np.ndarray] = []
        from itertools import combinations

        for cols in combinations(range(m), l):
            candidates.append(probe_vecs[:, list(cols)])
            candidates.append(first_vecs[:, list(cols)])
        best: tuple[float, np.ndarray] | None = None
        for cand in candidates:
            if np.linalg.matrix_rank(cand, tol=1e-10) < l:
                continue
            r = residual(cand)
            if best is None or r < best[0]:
                best = (r, cand)
        if best is not None and best[0] < tol:
            return orthonormal(best[1])
    return None


def scalar_monodromy_indices(
    data: MonodromyData, tol: float = 1e-6
) -> list[tuple[int, complex]]:
    """Poles whose monodromy is scalar, with the scalar.

    Each hit is cross-checked against the exponents: the ``m``-th power
    of the scalar must match ``exp(2 pi i tr A_k)``.
    """
    out: list[tuple[int, complex]] = []
    m = data.m
    for k in range(data.n):
        mk = data.matrices[k]
        mu = complex(np.trace(mk)) / m
        if float(np.max(np.abs(mk - mu * np.eye(m)))) < tol * max(1.0, abs(mu)):
            tr = complex(np.sum(data.exponents[k]))
            expected = np.exp(2j * np.pi * tr)
            if abs(mu ** m - expected) > 1e-4:
                raise NumericError(
                    f"scalar monodromy at pole {k + 1} is inconsistent with"
                    " the residue trace",
                    scalar=mu,
                    trace=tr,
                )
            out.append((k, mu))
    return out
