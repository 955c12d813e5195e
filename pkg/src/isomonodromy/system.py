r"""Fuchsian systems on the Riemann sphere and paths between their poles.

A system is the data of distinct finite points :math:`u_1,\dots,u_n`
and square residue matrices :math:`A_1,\dots,A_n` of a common size,
standing for

.. math:: \frac{d\Phi}{dz} \;=\; \sum_{k=1}^{n} \frac{A_k}{z-u_k}\,\Phi .

The point at infinity carries the residue :math:`-(A_1+\dots+A_n)`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import ParseError, ToleranceConfig, default_tolerance
from .linalg import as_matrix, sorted_eig

__all__ = [
    "FuchsianSystem",
    "PathSpec",
    "build_system",
    "residue_at_infinity",
    "spectrum",
]


@dataclass(frozen=True)
class FuchsianSystem:
    """Validated first order system with simple poles.

    Instances come from :func:`build_system`; the arrays are never
    mutated after construction.
    """

    poles: np.ndarray          # shape (n,), complex
    residues: np.ndarray       # shape (n, m, m), complex

    @property
    def n(self) -> int:
        return self.poles.shape[0]

    @property
    def m(self) -> int:
        return self.residues.shape[1]

    @property
    def residue_at_infinity(self) -> np.ndarray:
        return -self.residues.sum(axis=0)

    def coefficient(self, z: complex) -> np.ndarray:
        """The coefficient matrix ``A(z)`` away from the poles."""
        return sum(
            self.residues[k] / (z - self.poles[k]) for k in range(self.n)
        )

    def min_pole_distance(self) -> float:
        if self.n < 2:
            return float("inf")
        u = self.poles
        d = np.abs(u[:, None] - u[None, :])
        np.fill_diagonal(d, np.inf)
        return float(d.min())

    def nearest_other_pole(self, k: int) -> float:
        """Distance from pole ``k`` to the closest other pole."""
        if self.n < 2:
            return float("inf")
        d = np.abs(self.poles - self.poles[k])
        d[k] = np.inf
        return float(d.min())

    def with_residues(self, residues: np.ndarray) -> "FuchsianSystem":
        return FuchsianSystem(self.poles.copy(), np.asarray(residues, dtype=complex).copy())


@dataclass(frozen=True)
class PathSpec:
    """Piecewise straight path in the punctured plane.

    ``vertices`` lists the corners in order; ``closed`` appends the
    first vertex at the end when set.
    """

    vertices: tuple[complex, ...]
    closed: bool = False

    def __post_init__(self) -> None:
        if len(self.vertices) < 2 and not self.closed:
            raise ParseError("a path needs at least two vertices")

    def segments(self) -> list[tuple[complex, complex]]:
        pts = list(self.vertices)
        if self.closed:
            pts.append(pts[0])
        return [(pts[i], pts[i + 1]) for i in range(len(pts) - 1)]

    def clearance(self, points: np.ndarray) -> float:
        """Smallest distance from any segment to any of ``points``."""
        best = float("inf")
        for a, b in self.segments():
            ab = b - a
            denom = abs(ab) ** 2
            for p in np.atleast_1d(points):
                if denom == 0.0:
                    best = min(best, abs(p - a))
                    continue
                t = ((p - a) * np.conj(ab)).real / denom
                t = min(1.0, max(0.0, t))
                best = min(best, abs(a + t * ab - p))
        return best


def build_system(
    poles: object,
    residues: object,
    tol: ToleranceConfig | None = None,
) -> FuchsianSystem:
    """Validate raw pole and residue data into a :class:`FuchsianSystem`.

    Parameters
    ----------
    poles : sequence of complex
        Distinct finite singular points.
    residues : sequence of matrices
        One square matrix per pole, all of the same size.

    Raises
    ------
    ParseError
        On an empty pole list, a pole count mismatch, ragged or
        non-square residues, non-finite entries, or poles closer than
        the clearance tolerance allows.
    """
    tol = tol or default_tolerance()
    u = np.atleast_1d(np.asarray(poles, dtype=complex))
    if u.ndim != 1 or u.size == 0:
        raise ParseError("poles must be a non-empty one dimensional list")
    if not np.all(np.isfinite(u)):
        raise ParseError("poles must be finite")
    try:
        mats = [as_matrix(a) for a in residues]
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    if len(mats) != u.size:
        raise ParseError(f"{u.size} poles but {len(mats)} residue matrices")
    sizes = {a.shape[0] for a in mats}
    if len(sizes) != 1:
        raise ParseError(f"residue sizes disagree: {sorted(sizes)}")
    a = np.array(mats, dtype=complex)
    if not np.all(np.isfinite(a)):
        raise ParseError("residues must have finite entries")
    if u.size > 1:
        d = np.abs(u[:, None] - u[None, :])
        np.fill_diagonal(d, np.inf)
        dmin = float(d.min())
        scale = max(1.0, float(np.max(np.abs(u))))
        if dmin <= 100 * np.finfo(float).eps * scale:
            i, j = np.unravel_index(int(d.argmin()), d.shape)
            raise ParseError(f"poles {i + 1} and {j + 1} coincide: {u[i]} vs {u[j]}")
    return FuchsianSystem(u, a)


def residue_at_infinity(system: FuchsianSystem) -> np.ndarray:
    """Negative of the sum of the finite residues."""
    return system.residue_at_infinity


def spectrum(matrix: object) -> np.ndarray:
    """Eigenvalues in the canonical order (Re descending, Im descending)."""
    w, _ = sorted_eig(as_matrix(matrix))
    return w
