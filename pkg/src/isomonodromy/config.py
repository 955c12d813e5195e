"""Shared numeric configuration and the error taxonomy.

Every operation in the package that makes a tolerance decision takes a
:class:`ToleranceConfig`, defaulting to :func:`default_tolerance`.  The
environment variable ``ISOMONODROMY_TOL`` overrides the default ODE
relative tolerance so the command line tools can be loosened or
tightened without code changes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace


class ParseError(ValueError):
    """A document or argument could not be validated.

    Raised for malformed input (ragged residue lists, duplicate poles,
    unknown schema versions).  The command line maps this to exit
    code 1.
    """


class NumericError(RuntimeError):
    """A computation failed or left its certified accuracy regime.

    Raised for eigensolver failures, monodromy closure residuals above
    tolerance, zero gauge pivots, blow-up of a deformation trajectory
    and similar runtime conditions.  The command line maps this to exit
    code 2.
    """

    def __init__(self, message: str, **info: object) -> None:
        super().__init__(message)
        self.info = dict(info)


@dataclass(frozen=True)
class ToleranceConfig:
    """Numeric knobs shared across the package.

    Attributes
    ----------
    ode_rel_tol, ode_abs_tol : float
        Relative and absolute tolerances handed to the adaptive
        integrator used for analytic continuation and deformation flow.
    resonance_eps : float
        Two exponents whose difference is within ``resonance_eps`` of a
        nonzero integer are treated as resonant; integrality tests use
        the same window.
    pole_clearance_factor : float
        Paths must keep a distance of at least this factor times the
        smallest pairwise pole distance from every singularity.
    series_order : int
        Default truncation order for local expansions.  Anchoring at
        infinity raises it automatically until the series tail is below
        the ODE tolerance.
    closure_gate_factor : float
        The monodromy closure identity must hold within this factor
        times ``n`` times ``ode_rel_tol``.  The default treats any
        excess as a failure; systems with large residue entries lose
        accuracy to conditioning rather than to the integrator, and a
        caller who has checked the entries may widen the gate without
        touching the integration itself.
    """

    ode_rel_tol: float = 1e-10
    ode_abs_tol: float = 1e-12
    resonance_eps: float = 1e-8
    pole_clearance_factor: float = 1e-3
    series_order: int = 2
    closure_gate_factor: float = 1e4

    def with_rel_tol(self, rel: float) -> "ToleranceConfig":
        return replace(self, ode_rel_tol=rel, ode_abs_tol=rel * 1e-2)


def default_tolerance() -> ToleranceConfig:
    """Return the package default tolerances.

    ``ISOMONODROMY_TOL`` in the environment, when set, replaces the ODE
    relative tolerance (the absolute tolerance follows two orders of
    magnitude below it).
    """
    cfg = ToleranceConfig()
    env = os.environ.get("ISOMONODROMY_TOL")
    if env is not None:
        try:
            rel = float(env)
        except ValueError as exc:
            raise ParseError(f"ISOMONODROMY_TOL is not a number: {env!r}") from exc
        if not 0 < rel < 1:
            raise ParseError(f"ISOMONODROMY_TOL out of range (0, 1): {rel}")
        cfg = cfg.with_rel_tol(rel)
    return cfg
