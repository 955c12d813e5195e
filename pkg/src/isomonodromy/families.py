r"""Closed-form 2x2 families used by the regression and acceptance suites.

All four families live on the pole configuration :math:`(0, x, 1)` with
the second pole moving, and all are rank two.  They exercise different
corners of the machinery:

``triangular_family``
    Upper triangular residues with algebraic entries; reducible with the
    span of the first coordinate vector invariant.
``logarithmic_family``
    Full residues whose entries involve ``log((sqrt(x)+1)/(sqrt(x)-1))``;
    reducible monodromy with a one dimensional invariant subspace.
``nilpotent_family``
    All three residues nilpotent; the exponents at infinity are
    ``(1/2, -1/2)`` and the logarithm of the local form at infinity is
    nonzero.
``companion_family``
    The image of ``triangular_family`` under an exponent-lowering gauge
    whose free series slot is chosen consistently with the deformation
    equations; unlike the raw tabulated logarithmic family it satisfies
    the pole-motion equations literally (see the regression tests for
    the comparison).
"""

from __future__ import annotations

import numpy as np

from .system import FuchsianSystem, build_system

__all__ = [
    "triangular_family",
    "logarithmic_family",
    "nilpotent_family",
    "companion_family",
    "nilpotent_series_reference",
    "family_by_name",
]


def _poles(x: float) -> list[complex]:
    return [0.0 + 0j, complex(x), 1.0 + 0j]


def triangular_family(x: float) -> FuchsianSystem:
    """Upper triangular family; valid for real ``x > 1``."""
    s = np.sqrt(x)
    b1 = np.array([[0.5, s / (x - 1)], [0, -0.5]], dtype=complex)
    b2 = np.array([[-0.25, s / (x - 1) ** 2], [0, 0.25]], dtype=complex)
    b3 = np.array([[-0.75, -x * s / (x - 1) ** 2], [0, 0.75]], dtype=complex)
    return build_system(_poles(x), [b1, b2, b3])


def logarithmic_family(x: float) -> FuchsianSystem:
    """Family with logarithmic entries and reducible monodromy.

    Tabulated closed form.  Its traces and exponents agree with
    ``triangular_family`` up to an integer shift at infinity, but the
    tabulated entries drift off the pole-motion equations by a
    triangular gauge; ``companion_family`` is the repaired counterpart.
    """
    s = np.sqrt(x)
    ell = np.log((s + 1) / (s - 1))
    d = (x - 1) * ell - 2 * s
    a111 = (2 * ell * s * (x ** 2 + 4 * x - 5) - 4 * x * (4 + 3 * x)
            - ell ** 2 * (x - 1) ** 2) / (2 * d ** 2)
    a112 = ((ell ** 2 * (x - 1) ** 2 + 2 * x * (5 + 3 * x) - (x ** 2 + 6 * x - 7) * s * ell)
            * (6 * s * (1 + x) - (x ** 2 + 2 * x - 3) * ell)) / (4 * d ** 2 * (x - 1))
    a121 = 4 * s * (1 - x) / d ** 2
    a211 = (ell ** 2 * (x - 1) ** 3 - 4 * x * (7 + x)
            - 8 * ell * s * (x ** 2 - 3 * x + 2)) / (4 * d ** 2 * (x - 1))
    a212 = -((ell ** 2 * (x - 1) ** 3 - 16 * x - 2 * (3 * x ** 2 - 8 * x + 5) * s * ell)
             * (2 * s * (3 + x) + (x ** 2 - 4 * x + 3) * ell)) / (8 * d ** 2 * (x - 1) ** 2)
    a221 = -4 * s / d ** 2
    a311 = 0.5 - a111 - a211
    a312 = -a112 - a212
    a321 = -a121 - a221
    a1 = np.array([[a111, a112], [a121, -a111]], dtype=complex)
    a2 = np.array([[a211, a212], [a221, -a211]], dtype=complex)
    a3 = np.array([[a311, a312], [a321, -a311]], dtype=complex)
    return build_system(_poles(x), [a1, a2, a3])


def nilpotent_family(x: float) -> FuchsianSystem:
    """Family whose three residues are all nilpotent."""
    s = np.sqrt(x)
    a1 = np.array(
        [[-(s + 1) ** 2 / (16 * s), -1 / (2 * s)],
         [(s + 1) ** 4 / (128 * s), (s + 1) ** 2 / (16 * s)]], dtype=complex)
    a2 = np.array(
        [[-(3 * s - 1) / (16 * s), 1 / (2 * (s + 1) * s)],
         [-(s + 1) * (3 * s - 1) ** 2 / (128 * s), (3 * s - 1) / (16 * s)]], dtype=complex)
    a3 = np.array(
        [[(s - 3) / 16, 1 / (2 * (s + 1))],
         [-(s - 3) ** 2 * (s + 1) / 128, (3 - s) / 16]], dtype=complex)
    return build_system(_poles(x), [a1, a2, a3])


def nilpotent_series_reference(x: float) -> np.ndarray:
    """Tabulated first series coefficient going with ``nilpotent_family``.

    The entry ``[0, 1]`` is the free resonant slot; the other entries
    differ from the zero-slot recursion output by constants in ``x``
    (the recursion regression tests pin both versions).
    """
    s = np.sqrt(x)
    return np.array(
        [[(3 * x - 2 * s) / 16, -np.log(s + 1)],
         [(4.5 * x ** 2 + 2 * x * s - 5 * x + 2 * s) / 128, (2 * s - 3 * x) / 16]],
        dtype=complex)


def companion_family(x: float, slot_offset: complex = 0.0) -> FuchsianSystem:
    """Exponent-lowered triangular family with a flow-consistent slot.

    Applies the elementary down-shift gauge to ``triangular_family(x)``
    after pinning the free slot of the first series coefficient to

    .. math:: w(x) = \frac{\sqrt x}{x-1}
              + \tfrac12 \log\frac{\sqrt x + 1}{\sqrt x - 1} + w_0,

    the unique choice (up to the constant ``w_0``) whose ``x``
    derivative matches the deformation equation for the slot.  The
    result solves the pole-motion equations literally.
    """
    # local import: keeps the fixture-only entry points import-light
    from .levelt import levelt_at_infinity
    from .reduction import elementary_down_shift

    s = np.sqrt(x)
    w = s / (x - 1) + 0.5 * np.log((s + 1) / (s - 1)) + slot_offset
    base = triangular_family(x)
    exp = levelt_at_infinity(base, order=2, fills={(1, 0, 1): complex(w)})
    shifted, _ = elementary_down_shift(base, exp.coefficients[1], exp.coefficients[2])
    return shifted


_FAMILIES = {
    "triangular": triangular_family,
    "logarithmic": logarithmic_family,
    "nilpotent": nilpotent_family,
    "companion": companion_family,
}


def family_by_name(name: str, x: float) -> FuchsianSystem:
    """Look up a bundled family by name (used by the command line)."""
    try:
        fam = _FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown family {name!r}; choices: {sorted(_FAMILIES)}") from None
    return fam(x)
