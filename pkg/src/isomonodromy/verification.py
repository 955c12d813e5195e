"""Named regression checks against the tabulated fixture families.

Each check exercises one documented behaviour on the closed-form
families and reports a measured number next to a pass/fail verdict.
Three checks are declared ``expected_to_pass=False``: the tabulated
frame coefficient and the logarithmic family's literal pole-motion and
flow-endpoint residuals record known defects of the tabulated entries
(the family is consistent in the trace sense only; see
``families.logarithmic_family`` and the companion family repairing it).
A declared defect that starts passing is reported as loudly as a fresh
regression: either way the register no longer matches the world.

The command line exposes this register through ``isomon verify``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable

import numpy as np

from .config import default_tolerance
from .documents import SystemDocument, chain_to_text
from .families import (
    companion_family,
    logarithmic_family,
    nilpotent_family,
    nilpotent_series_reference,
    triangular_family,
)
from .flow import initial_state, integrate_schlesinger, isomonodromic_psi, schlesinger_rhs
from .levelt import levelt_at_infinity
from .monodromy import monodromy_matrices, monodromy_equivalent
from .reduction import (
    BlockSplit,
    block_pfaffian_rhs,
    elementary_down_shift,
    elementary_up_shift,
    reduce_reducible,
)
from .scalar import DarbouxChart, apply_Sinf, apply_Sk, chart_from_system
from .system import build_system, spectrum


@dataclass(frozen=True)
class Check:
    name: str
    description: str
    expected_to_pass: bool
    run: Callable[[], tuple[bool, str]]


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    passed: bool
    expected_to_pass: bool
    detail: str

    @property
    def status(self) -> str:
        if self.passed and self.expected_to_pass:
            return "ok"
        if not self.passed and not self.expected_to_pass:
            return "known-defect"
        if self.passed:
            return "unexpected-pass"
        return "regression"

    @property
    def surprising(self) -> bool:
        return self.passed is not self.expected_to_pass


_REGISTRY: dict[str, Check] = {}


def _check(name: str, description: str, expected_to_pass: bool = True):
    def wrap(fn: Callable[[], tuple[bool, str]]) -> Callable[[], tuple[bool, str]]:
        _REGISTRY[name] = Check(name, description, expected_to_pass, fn)
        return fn

    return wrap


_shared: dict[str, object] = {}


def _monodromy_of(family: str):
    if family not in _shared:
        system = {
            "triangular": triangular_family,
            "logarithmic": logarithmic_family,
        }[family](4.0)
        _shared[family] = monodromy_matrices(system)
    return _shared[family]


def _fd_residual(family: Callable, x: float = 4.0, h: float = 1e-5) -> float:
    plus = family(x + h).residues
    minus = family(x - h).residues
    fd = (plus - minus) / (2 * h)
    rhs = schlesinger_rhs(family(x))
    return float(np.max(np.abs(fd - rhs[:, 1])))


def _flow_endpoint_error(family: Callable) -> float:
    state = initial_state(family(4.0))
    moved = integrate_schlesinger(state, 1, 9.0)
    return float(np.max(np.abs(moved.system.residues - family(9.0).residues)))


# ----------------------------------------------------------------------
# fixture sanity
# ----------------------------------------------------------------------

@_check(
    "triangular-build",
    "triangular family at x=4 is a valid rank-two system with poles 0, 4, 1",
)
def _triangular_build() -> tuple[bool, str]:
    system = triangular_family(4.0)
    ok = (
        system.m == 2
        and system.n == 3
        and np.allclose(system.poles, [0.0, 4.0, 1.0])
    )
    return ok, f"m={system.m} n={system.n} poles={[complex(u) for u in system.poles]}"


@_check(
    "triangular-infinity",
    "residue at infinity of the triangular family is diag(1/2, -1/2)",
)
def _triangular_infinity() -> tuple[bool, str]:
    a = triangular_family(4.0).residue_at_infinity
    err = float(np.max(np.abs(a - np.diag([0.5, -0.5]))))
    return err < 1e-12, f"max deviation {err:.3e}"


@_check(
    "nilpotent-infinity",
    "residue at infinity of the nilpotent family is diag(1/2, -1/2)",
)
def _nilpotent_infinity() -> tuple[bool, str]:
    a = nilpotent_family(4.0).residue_at_infinity
    err = float(np.max(np.abs(a - np.diag([0.5, -0.5]))))
    return err < 1e-10, f"max deviation {err:.3e}"


@_check(
    "triangular-exponents",
    "first residue of the triangular family has exponents 1/2, -1/2",
)
def _triangular_exponents() -> tuple[bool, str]:
    lam = spectrum(triangular_family(4.0).residues[0])
    err = float(np.max(np.abs(np.sort_complex(lam) - np.array([-0.5, 0.5]))))
    return err < 1e-12, f"exponents {lam}, deviation {err:.3e}"


@_check(
    "nilpotent-spectra",
    "every residue of the nilpotent family has the double exponent 0",
)
def _nilpotent_spectra() -> tuple[bool, str]:
    worst = max(
        float(np.max(np.abs(spectrum(a)))) for a in nilpotent_family(4.0).residues
    )
    return worst < 1e-7, f"largest |exponent| {worst:.3e}"


# ----------------------------------------------------------------------
# local expansions at the resonant fixture
# ----------------------------------------------------------------------

@_check(
    "resonant-correction",
    "series recursion at infinity yields the nilpotent correction [[0,-1/2],[0,0]]",
)
def _resonant_correction() -> tuple[bool, str]:
    exp = levelt_at_infinity(nilpotent_family(4.0), order=2)
    r = exp.pair.log_part
    err = float(np.max(np.abs(r - np.array([[0.0, -0.5], [0.0, 0.0]]))))
    structure = abs(r[0, 0]) < 1e-10 and abs(r[1, 0]) < 1e-10 and abs(r[1, 1]) < 1e-10
    return structure and err < 1e-10, f"max deviation {err:.3e}"


@_check(
    "tabulated-frame-entries",
    "determined entries of the first series coefficient match the tabulated ones",
    expected_to_pass=False,
)
def _tabulated_frame_entries() -> tuple[bool, str]:
    # The recursion pins every entry except the resonant (1,2) slot; the
    # tabulated matrix disagrees on the pinned ones by x-independent
    # constants (it integrates the deformation equation instead).
    exp = levelt_at_infinity(nilpotent_family(4.0), order=2)
    got = exp.coefficients[1]
    want = nilpotent_series_reference(4.0)
    mask = np.ones((2, 2), dtype=bool)
    mask[0, 1] = False
    err = float(np.max(np.abs((got - want)[mask])))
    return err < 1e-10, f"max deviation on determined entries {err:.3e}"


@_check(
    "resonant-slot-flow",
    "deformation flow fixes the free series slot to -log 3 at x=4 from -log 4 at x=9",
)
def _resonant_slot_flow() -> tuple[bool, str]:
    reference = initial_state(
        nilpotent_family(9.0), fills={(1, 0, 1): -np.log(4.0)}
    )
    psi1, _ = isomonodromic_psi(nilpotent_family(4.0), reference)
    err = abs(complex(psi1[0, 1]) + np.log(3.0))
    return err < 1e-6, f"slot value {complex(psi1[0, 1]):.8f}, deviation {err:.3e}"


# ----------------------------------------------------------------------
# pole-motion equations on the closed-form families
# ----------------------------------------------------------------------

@_check(
    "pole-motion-rhs-triangular",
    "finite differences of the triangular family match the pole-motion right side",
)
def _rhs_triangular() -> tuple[bool, str]:
    err = _fd_residual(triangular_family)
    return err < 1e-6, f"max residual {err:.3e}"


@_check(
    "pole-motion-rhs-logarithmic",
    "finite differences of the logarithmic family match the pole-motion right side",
    expected_to_pass=False,
)
def _rhs_logarithmic() -> tuple[bool, str]:
    # Known defect of the tabulated entries: the family drifts inside
    # its gauge class (free resonant slot integrated with the wrong
    # sign), so the literal equations fail while every trace is
    # conserved.  The companion family is the repaired version.
    err = _fd_residual(logarithmic_family)
    return err < 1e-6, f"max residual {err:.3e}"


@_check(
    "pole-motion-rhs-companion",
    "finite differences of the companion family match the pole-motion right side",
)
def _rhs_companion() -> tuple[bool, str]:
    err = _fd_residual(companion_family)
    return err < 1e-6, f"max residual {err:.3e}"


@_check(
    "flow-endpoint-triangular",
    "integrating the triangular family from x=4 to x=9 lands on the closed form",
)
def _flow_triangular() -> tuple[bool, str]:
    err = _flow_endpoint_error(triangular_family)
    return err < 1e-6, f"max endpoint deviation {err:.3e}"


@_check(
    "flow-endpoint-logarithmic",
    "integrating the logarithmic family from x=4 to x=9 lands on the closed form",
    expected_to_pass=False,
)
def _flow_logarithmic() -> tuple[bool, str]:
    err = _flow_endpoint_error(logarithmic_family)
    return err < 1e-5, f"max endpoint deviation {err:.3e}"


@_check(
    "trace-conservation-logarithmic",
    "monodromy traces of the logarithmic family agree at x=4 and x=9",
)
def _trace_conservation() -> tuple[bool, str]:
    w4 = monodromy_matrices(logarithmic_family(4.0)).trace_words()
    # at x=9 the family's entries reach 6.5e3 and the closure product
    # saturates on conditioning near 1e-3; the traces themselves stay
    # accurate, so the gate is widened rather than the integration
    loose = replace(default_tolerance(), closure_gate_factor=1e8)
    w9 = monodromy_matrices(logarithmic_family(9.0), tol=loose).trace_words()
    keys = ["tr M1", "tr M2", "tr M3", "tr M1M2"]
    err = max(abs(w4[k] - w9[k]) for k in keys)
    return err < 1e-5, f"largest trace drift {err:.3e}"


# ----------------------------------------------------------------------
# gauge moves between the families
# ----------------------------------------------------------------------

@_check(
    "triangular-class-witness",
    "logarithmic and triangular families share monodromy up to the shift (+1, -1)",
)
def _class_witness() -> tuple[bool, str]:
    witness = monodromy_equivalent(
        _monodromy_of("logarithmic"), _monodromy_of("triangular")
    )
    ok = witness.equivalent and witness.integer_shift == (1, -1)
    return ok, (
        f"equivalent={witness.equivalent} shift={witness.integer_shift}"
        f" conjugation residual {witness.conjugation_residual:.3e}"
    )


@_check(
    "up-shift-logarithmic",
    "the raising gauge moves the logarithmic family's infinity to diag(1/2, -1/2)",
)
def _up_shift() -> tuple[bool, str]:
    system = logarithmic_family(4.0)
    exp = levelt_at_infinity(system, order=2, fills={(1, 1, 0): 1.0})
    shifted, _ = elementary_up_shift(system, exp.coefficients[1], exp.coefficients[2])
    err = float(
        np.max(np.abs(shifted.residue_at_infinity - np.diag([0.5, -0.5])))
    )
    return err < 1e-8, f"max deviation {err:.3e}"


@_check(
    "down-shift-triangular",
    "the lowering gauge sends the triangular family into the logarithmic class",
)
def _down_shift() -> tuple[bool, str]:
    system = triangular_family(4.0)
    exp = levelt_at_infinity(system, order=2, fills={(1, 0, 1): 1.0})
    shifted, _ = elementary_down_shift(system, exp.coefficients[1], exp.coefficients[2])
    err = float(
        np.max(np.abs(shifted.residue_at_infinity - np.diag([-0.5, 0.5])))
    )
    witness = monodromy_equivalent(
        monodromy_matrices(shifted), _monodromy_of("logarithmic")
    )
    ok = err < 1e-8 and witness.equivalent and witness.integer_shift == (0, 0)
    return ok, (
        f"infinity deviation {err:.3e}, equivalent={witness.equivalent}"
        f" shift={witness.integer_shift}"
    )


@_check(
    "reduce-logarithmic",
    "reduction gauges the logarithmic family to triangular form, declaring (+1, -1)",
)
def _reduce_logarithmic() -> tuple[bool, str]:
    split, chain = reduce_reducible(logarithmic_family(4.0))
    assembled = split.assemble()
    witness = monodromy_equivalent(
        monodromy_matrices(assembled), _monodromy_of("triangular")
    )
    ok = chain.infinity_shift == (1, -1) and witness.equivalent
    return ok, (
        f"declared shift {chain.infinity_shift}, equivalent={witness.equivalent},"
        f" zeroed mass {chain.zeroed_mass():.3e}"
    )


@_check(
    "coupling-block-derivatives",
    "finite differences of the triangular coupling entries match the linear system",
)
def _coupling_blocks() -> tuple[bool, str]:
    def split_at(x: float) -> BlockSplit:
        r = triangular_family(x).residues
        return BlockSplit(
            l=1,
            poles=triangular_family(x).poles,
            upper=r[:, :1, :1],
            coupling=r[:, :1, 1:],
            lower=r[:, 1:, 1:],
        )

    h = 1e-5
    fd = (split_at(4.0 + h).coupling - split_at(4.0 - h).coupling) / (2 * h)
    rhs = block_pfaffian_rhs(split_at(4.0))
    err = float(np.max(np.abs(fd - rhs[:, 1])))
    return err < 1e-6, f"max residual {err:.3e}"


# ----------------------------------------------------------------------
# scalar reduction and chart symmetries
# ----------------------------------------------------------------------

def _generic_three_pole():
    return build_system(
        [0.0, 4.0, 1.0],
        [
            np.array([[0.31, 0.42], [0.15, -0.44]]),
            np.array([[0.2, 0.7], [0.11, -0.2]]),
            np.array([[-0.1, 0.05], [1.0 / 3.0, 0.1]]),
        ],
    )


def _generic_four_pole():
    # frozen draw; the residue at infinity is diag(0.63, -0.82) and the
    # two apparent points come out a unit away from every pole
    a1 = np.array([[0.05029208843735732, -0.05284194531652076],
                   [0.25616906017731284, 0.04196004686121588]])
    a2 = np.array([[-0.2142677492644444, 0.1446380219637939],
                   [0.5216000180520549, 0.3788323852516969]])
    a3 = np.array([[-0.28149409432279704, -0.506168588418421],
                   [-0.2493097850149409, 0.01653039173889744]])
    a4 = -np.diag([0.63, -0.82]) - (a1 + a2 + a3)
    return build_system([0.0, 1.0, 3.0, 5.0], [a1, a2, a3, a4])


@_check(
    "apparent-count-three-poles",
    "a generic rank-two system with three poles has exactly one apparent point",
)
def _apparent_three() -> tuple[bool, str]:
    chart = chart_from_system(_generic_three_pole())
    return chart.g == 1 and len(chart.q) == 1, f"g={chart.g} points={list(chart.q)}"


@_check(
    "apparent-count-four-poles",
    "a generic rank-two system with four poles has exactly two apparent points",
)
def _apparent_four() -> tuple[bool, str]:
    chart = chart_from_system(_generic_four_pole())
    return chart.g == 2 and len(chart.q) == 2, f"g={chart.g} points={list(chart.q)}"


def _fraction_chart() -> DarbouxChart:
    return DarbouxChart(
        g=1,
        q=(Fraction(5, 2),),
        p=(Fraction(-3, 7),),
        u=(Fraction(0), Fraction(4), Fraction(7)),
        exponents=(
            (Fraction(1, 3), Fraction(-1, 3)),
            (Fraction(1, 5), Fraction(-1, 5)),
            (Fraction(1, 7), Fraction(-1, 7)),
        ),
        infinity=(Fraction(1, 2), Fraction(-1, 2)),
        hamiltonians=(Fraction(1, 9), Fraction(2, 11), Fraction(-3, 5)),
    )


@_check(
    "reflection-pole-set",
    "the reflection symmetry permutes the poles as u1 + uk - u",
)
def _reflection_poles() -> tuple[bool, str]:
    chart = _fraction_chart()
    image = apply_Sk(chart, 2)
    want = {Fraction(4) - u for u in chart.u}
    ok = set(image.u) == want
    return ok, f"image poles {sorted(image.u)}"


@_check(
    "reflection-hamiltonian-sign",
    "the reflection symmetry flips every Hamiltonian sign exactly",
)
def _reflection_hamiltonians() -> tuple[bool, str]:
    chart = _fraction_chart()
    image = apply_Sk(chart, 2)
    ok = image.hamiltonians == tuple(-h for h in chart.hamiltonians)
    return ok, f"image Hamiltonians {image.hamiltonians}"


@_check(
    "inversion-pole-lines",
    "on an empty chart the inversion acts by its pole and Hamiltonian lines alone",
)
def _inversion_g0() -> tuple[bool, str]:
    chart = DarbouxChart(
        g=0,
        q=(),
        p=(),
        u=(Fraction(0), Fraction(4)),
        exponents=(
            (Fraction(1, 3), Fraction(-1, 3)),
            (Fraction(1, 5), Fraction(-1, 5)),
        ),
        infinity=(Fraction(1, 2), Fraction(-1, 2)),
        hamiltonians=(Fraction(1, 9), Fraction(2, 11)),
    )
    image = apply_Sinf(chart)
    ok = (
        image.u == (Fraction(0), Fraction(1, 4))
        and image.hamiltonians == (Fraction(1, 9), Fraction(-95, 44))
        and image.exponents[0] == (Fraction(1), Fraction(0))
        and image.infinity == (Fraction(-1, 6), Fraction(-5, 6))
    )
    return ok, f"image u {image.u}, Hamiltonians {image.hamiltonians}"


@_check(
    "inversion-momentum-twist",
    "the inversion maps momenta by -p q^2 - (7/2) q at rank two",
)
def _inversion_momentum() -> tuple[bool, str]:
    image = apply_Sinf(_fraction_chart())
    ok = image.q == (Fraction(2, 5),) and image.p == (Fraction(-85, 14),)
    return ok, f"image q {image.q}, p {image.p}"


# ----------------------------------------------------------------------
# document pipeline
# ----------------------------------------------------------------------

@_check(
    "document-flow-endpoint",
    "flowing a serialized triangular document to x=9 reproduces the closed form",
)
def _document_flow() -> tuple[bool, str]:
    doc = SystemDocument.from_system(triangular_family(4.0), branch={"x": 4.0})
    system = SystemDocument.from_text(doc.to_text()).to_system()
    moved = integrate_schlesinger(initial_state(system), 1, 9.0)
    err = float(
        np.max(np.abs(moved.system.residues - triangular_family(9.0).residues))
    )
    return err < 1e-6, f"max endpoint deviation {err:.3e}"


@_check(
    "document-reduce-chain",
    "reducing a serialized logarithmic document emits a replayable chain",
)
def _document_reduce() -> tuple[bool, str]:
    doc = SystemDocument.from_system(logarithmic_family(4.0))
    system = SystemDocument.from_text(doc.to_text()).to_system()
    split, chain = reduce_reducible(system)
    text = chain_to_text(chain)
    from .documents import chain_from_text

    replayed = chain_from_text(text).replay()
    dev = float(np.max(np.abs(replayed.residues - split.assemble().residues)))
    ok = chain.infinity_shift == (1, -1) and dev < 1e-8
    return ok, f"declared shift {chain.infinity_shift}, replay deviation {dev:.3e}"


# ----------------------------------------------------------------------
# running the register
# ----------------------------------------------------------------------

def all_checks() -> tuple[Check, ...]:
    return tuple(_REGISTRY.values())


def run_checks(names: list[str] | None = None) -> list[CheckOutcome]:
    """Run the named checks (all of them by default), never raising.

    A check that throws is reported as failed with the exception text in
    its detail; the surprising/expected bookkeeping is left to callers.
    """
    if names is None:
        selected = list(_REGISTRY.values())
    else:
        unknown = [n for n in names if n not in _REGISTRY]
        if unknown:
            raise KeyError(f"unknown checks: {', '.join(unknown)}")
        selected = [_REGISTRY[n] for n in names]
    outcomes = []
    for check in selected:
        try:
            passed, detail = check.run()
        except Exception as exc:  # noqa: BLE001 - register must survive anything
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        outcomes.append(
            CheckOutcome(
                name=check.name,
                passed=passed,
                expected_to_pass=check.expected_to_pass,
                detail=detail,
            )
        )
    return outcomes
