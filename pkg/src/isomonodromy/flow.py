r"""Schlesinger flow and the deformation of the expansion at infinity.

The residues of a Fuchsian system depend on the pole positions through

.. math:: \partial_{u_j} A_i = \frac{[A_i, A_j]}{u_i - u_j}\ (i \ne j),
          \qquad
          \partial_{u_i} A_i = -\sum_{j \ne i} \frac{[A_i, A_j]}{u_i - u_j},

which conserves :math:`A_\infty` and the spectrum of every residue.
The first two coefficients of the expansion at infinity ride along via

.. math:: \partial_{u_i} \Psi_1 = -A_i, \qquad
          \partial_{u_i} \Psi_2 = -A_i \Psi_1 - u_i A_i,

and these equations are what fixes the entries of the
:math:`\Psi_j` that the series recursion leaves free at resonances:
integrating them from a reference point propagates the free slots
isomonodromically.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .config import NumericError, ToleranceConfig, default_tolerance
from .levelt import levelt_at_infinity
from .system import FuchsianSystem, PathSpec, build_system

logger = logging.getLogger(__name__)

__all__ = [
    "DeformationState",
    "schlesinger_rhs",
    "hamiltonian",
    "initial_state",
    "integrate_schlesinger",
    "isomonodromic_psi",
]

_BLOWUP_NORM = 1e8


@dataclass(frozen=True)
class DeformationState:
    """A system together with its deformed expansion coefficients.

    ``psi1`` and ``psi2`` are the first two coefficients of the
    expansion at infinity, normalized isomonodromically: their
    resonance-free entries satisfy the series recursion of the current
    system and the resonant entries carry the values transported from
    the reference point of the flow.
    """

    system: FuchsianSystem
    psi1: np.ndarray
    psi2: np.ndarray
    u_path_position: float = 0.0

    def __post_init__(self) -> None:
        for name in ("psi1", "psi2"):
            v = np.asarray(getattr(self, name), dtype=complex)
            if v.shape != (self.system.m, self.system.m):
                raise ValueError(f"{name} must be {self.system.m} x {self.system.m}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, v)


def schlesinger_rhs(system: FuchsianSystem) -> np.ndarray:
    """All partial derivatives ``grad[i, j]`` = d A_i / d u_j.

    The returned array has shape (n, n, m, m).  Columns sum to zero:
    the residue at infinity is a conserved quantity of the flow.
    """
    n, m = system.n, system.m
    u = system.poles
    a = system.residues
    grad = np.zeros((n, n, m, m), dtype=complex)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            comm = a[i] @ a[j] - a[j] @ a[i]
            grad[i, j] = comm / (u[i] - u[j])
            grad[i, i] -= comm / (u[i] - u[j])
    return grad


def hamiltonian(system: FuchsianSystem, k: int) -> complex:
    """The quadratic Hamiltonian generating motion of pole ``k``."""
    u = system.poles
    a = system.residues
    return complex(
        sum(
            np.trace(a[k] @ a[l]) / (u[k] - u[l])
            for l in range(system.n)
            if l != k
        )
    )


def initial_state(
    system: FuchsianSystem,
    fills: dict[tuple[int, int, int], complex] | None = None,
    tol: ToleranceConfig | None = None,
) -> DeformationState:
    """Seed a deformation state from the series recursion.

    Resonant entries of the expansion coefficients are set from
    ``fills`` (zero when absent); this is the reference normalization
    the flow transports.
    """
    exp = levelt_at_infinity(system, order=2, fills=fills, tol=tol)
    return DeformationState(system, exp.coefficients[1], exp.coefficients[2])


def _pack(state: DeformationState) -> np.ndarray:
    return np.concatenate(
        [state.system.residues.ravel(), state.psi1.ravel(), state.psi2.ravel()]
    )


def _segment_flow(
    poles: np.ndarray,
    moving: int,
    z0: complex,
    z1: complex,
    y0: np.ndarray,
    n: int,
    m: int,
    tol: ToleranceConfig,
) -> np.ndarray:
    sz = n * m * m

    def rhs(t: float, yf: np.ndarray) -> np.ndarray:
        y = yf.view(complex)
        a = y[:sz].reshape(n, m, m)
        psi1 = y[sz : sz + m * m].reshape(m, m)
        u = poles.copy()
        u[moving] = z0 + t * (z1 - z0)
        dy = np.zeros_like(y)
        da = dy[:sz].reshape(n, m, m)
        amov = a[moving]
        for i in range(n):
            if i == moving:
                continue
            comm = a[i] @ amov - amov @ a[i]
            da[i] = comm / (u[i] - u[moving])
            da[moving] -= comm / (u[i] - u[moving])
        dy[sz : sz + m * m] = -amov.ravel()
        dy[sz + m * m :] = (-amov @ psi1 - u[moving] * amov).ravel()
        dy *= z1 - z0
        return dy.view(float)

    def blowup(t: float, yf: np.ndarray) -> float:
        return _BLOWUP_NORM - float(np.max(np.abs(yf)))

    blowup.terminal = True  # type: ignore[attr-defined]

    sol = solve_ivp(
        rhs,
        (0.0, 1.0),
        y0.view(float).copy(),
        method="DOP853",
        rtol=tol.ode_rel_tol,
        atol=tol.ode_abs_tol,
        events=blowup,
    )
    if sol.t_events and len(sol.t_events[0]):
        t_hit = float(sol.t_events[0][0])
        raise NumericError(
            "solution blew up along the deformation path"
            " (movable singularity)",
            location=z0 + t_hit * (z1 - z0),
            path_parameter=t_hit,
        )
    if not sol.success:
        raise NumericError(f"deformation step failed: {sol.message}")
    return sol.y[:, -1].view(complex)


def integrate_schlesinger(
    state: DeformationState,
    moving: int,
    u_target: complex,
    path: PathSpec | None = None,
    tol: ToleranceConfig | None = None,
) -> DeformationState:
    """Move one pole along a path, evolving residues and expansion jointly.

    ``path`` defaults to the straight segment from the current position
    to ``u_target``; when given, it must start and end there.  The run
    is refused if the path comes too close to a resting pole, and a
    blow-up of the residues is reported as a movable singularity with
    its location estimate.
    """
    tol = tol or default_tolerance()
    system = state.system
    n, m = system.n, system.m
    if not 0 <= moving < n:
        raise ValueError(f"moving index {moving} out of range")
    start = complex(system.poles[moving])
    u_target = complex(u_target)
    if path is None:
        path = PathSpec((start, u_target))
    else:
        if abs(complex(path.vertices[0]) - start) > 1e-12 * max(1.0, abs(start)):
            raise ValueError("path must start at the moving pole's position")
        if abs(complex(path.vertices[-1]) - u_target) > 1e-12 * max(1.0, abs(u_target)):
            raise ValueError("path must end at u_target")

    others = np.array([system.poles[j] for j in range(n) if j != moving])
    clearance = tol.pole_clearance_factor * min(1.0, system.min_pole_distance())
    if others.size and path.clearance(others) < clearance:
        raise NumericError(
            "deformation path passes within pole clearance of a resting pole",
            clearance=path.clearance(others),
            required=clearance,
        )

    y = _pack(state)
    poles = system.poles.copy()
    for z0, z1 in path.segments():
        y = _segment_flow(poles, moving, z0, z1, y, n, m, tol)
    poles[moving] = u_target

    sz = n * m * m
    residues = y[:sz].reshape(n, m, m).copy()
    psi1 = y[sz : sz + m * m].reshape(m, m).copy()
    psi2 = y[sz + m * m :].reshape(m, m).copy()
    new_system = build_system(poles, residues, tol=tol)
    drift = float(
        np.max(np.abs(new_system.residue_at_infinity - system.residue_at_infinity))
    )
    if drift > 1e-6:
        raise NumericError(
            "residue at infinity drifted along the flow; step size or"
            " tolerances are inadequate",
            drift=drift,
        )
    logger.debug("flow %s -> %s, infinity drift %.2e", start, u_target, drift)
    return DeformationState(
        new_system, psi1, psi2, u_path_position=state.u_path_position + 1.0
    )


def isomonodromic_psi(
    system: FuchsianSystem,
    reference: DeformationState | None = None,
    tol: ToleranceConfig | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Expansion coefficients at infinity, resonant slots included.

    Without resonances the series recursion determines everything and
    ``reference`` is not consulted.  Otherwise the reference state is
    flowed to the poles of ``system``, one pole at a time along straight
    segments; the flowed residues must reproduce ``system`` (same
    Schlesinger trajectory), and the flowed coefficients supply the
    resonant entries.
    """
    tol = tol or default_tolerance()
    exp = levelt_at_infinity(system, order=2, tol=tol)
    if not exp.free_slots:
        return exp.coefficients[1], exp.coefficients[2]
    if reference is None:
        raise NumericError(
            "resonant expansion requires a reference state to fix the free"
            " entries",
            slots=[s[:3] for s in exp.free_slots],
        )
    state = reference
    for k in range(system.n):
        target = complex(system.poles[k])
        if abs(complex(state.system.poles[k]) - target) < 1e-14 * max(1.0, abs(target)):
            continue
        state = integrate_schlesinger(state, k, target, tol=tol)
    mismatch = float(np.max(np.abs(state.system.residues - system.residues)))
    scale = max(1.0, float(np.max(np.abs(system.residues))))
    if mismatch > 1e-6 * scale:
        raise NumericError(
            "reference state does not flow into the given system; it lies on"
            " a different trajectory",
            mismatch=mismatch,
        )
    # rebuild by recursion with the flowed values in the free slots; the
    # remaining entries must then agree with the flow
    flowed = {1: state.psi1, 2: state.psi2}
    fills = {
        (j, p, q): complex(flowed[j][p, q])
        for (j, p, q, _) in exp.free_slots
    }
    check = levelt_at_infinity(state.system, order=2, fills=fills, tol=tol)
    worst = max(
        float(np.max(np.abs(check.coefficients[j] - flowed[j]))) for j in (1, 2)
    )
    if worst > 1e-5 * scale:
        raise NumericError(
            "flowed coefficients disagree with the series recursion in"
            " resonance-free entries",
            residual=worst,
        )
    return check.coefficients[1], check.coefficients[2]
