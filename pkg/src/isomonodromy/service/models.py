"""Request and response schemas of the HTTP service.

Complex numbers travel as two-element ``[re, im]`` arrays, the same
shape the on-disk documents use; pole indices in requests and reports
are 1-based, matching the command line.  Gauge chains are embedded as
plain JSON objects produced by :mod:`isomonodromy.documents`, so the
service response and the artifact file a client saves are identical.
"""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel

from ..documents import SystemDocument
from ..scalar import DarbouxChart

Pair = tuple[float, float]


def pair(z: complex) -> Pair:
    z = complex(z)
    return (z.real, z.imag)


def matrix_pairs(a) -> list[list[Pair]]:
    return [[pair(entry) for entry in row] for row in a]


class SystemPayload(BaseModel):
    """A Fuchsian system in the document shape."""

    m: int
    poles: list[Pair]
    residues: list[list[list[Pair]]]
    labels: list[str] | None = None
    branch: dict[str, Any] | None = None
    schema_version: int = 1

    def to_document(self) -> SystemDocument:
        return SystemDocument(
            m=self.m,
            poles=[list(u) for u in self.poles],
            residues=[
                [[list(entry) for entry in row] for row in mat]
                for mat in self.residues
            ],
            labels=self.labels,
            branch=self.branch,
            schema_version=self.schema_version,
        )

    @classmethod
    def from_document(cls, doc: SystemDocument) -> "SystemPayload":
        return cls(**doc.to_payload())


class SolverOptions(BaseModel):
    """Numeric overrides shared by the computing endpoints.

    ``tol`` replaces the ODE relative tolerance, ``radius`` pins the
    continuation basepoint distance and ``cut_angle`` (degrees) rotates
    the branch-cut direction.
    """

    tol: float | None = None
    radius: float | None = None
    cut_angle: float | None = None


class MonodromyRequest(SolverOptions):
    system: SystemPayload


class FlowRequest(SolverOptions):
    system: SystemPayload
    move: int
    to: Pair
    steps: int = 1


class ReduceRequest(SolverOptions):
    system: SystemPayload
    subspace: Literal["auto"] | list[list[Pair]] = "auto"


class EraseRequest(SolverOptions):
    system: SystemPayload
    pole: int


class DarbouxRequest(SolverOptions):
    system: SystemPayload


class SymmetryRequest(SolverOptions):
    system: SystemPayload
    op: Literal["Sk", "Sinf"]
    k: int | None = None


class VerifyRequest(BaseModel):
    names: list[str] | None = None
    list_only: bool = False


class HealthResponse(BaseModel):
    status: str
    version: str


class ScalarPole(BaseModel):
    pole: int
    value: Pair


class MonodromyResponse(BaseModel):
    matrices: list[list[list[Pair]]]
    at_infinity: list[list[Pair]]
    closure_residual: float
    traces: dict[str, Pair]
    exponents: list[list[Pair]]
    scalar_poles: list[ScalarPole]
    invariant_subspace: list[list[Pair]] | None


class FlowResponse(BaseModel):
    document: SystemPayload
    intermediate: list[SystemPayload]
    hamiltonians: list[Pair]


class ReduceResponse(BaseModel):
    document: SystemPayload
    chain: dict[str, Any]
    invariant_dimension: int
    infinity_shift: list[int] | None
    zeroed_mass: float


class EraseResponse(BaseModel):
    document: SystemPayload
    chain: dict[str, Any]
    pole: int
    scalar: Pair


class ApparentCertificate(BaseModel):
    point: Pair
    exponents: tuple[Pair, Pair]
    no_log_residual: float


class ChartPayload(BaseModel):
    g: int
    q: list[Pair]
    p: list[Pair]
    u: list[Pair]
    exponents: list[list[Pair]]
    infinity: list[Pair]
    hamiltonians: list[Pair]
    notes: list[str]

    @classmethod
    def from_chart(cls, chart: DarbouxChart) -> "ChartPayload":
        return cls(
            g=chart.g,
            q=[pair(x) for x in chart.q],
            p=[pair(x) for x in chart.p],
            u=[pair(x) for x in chart.u],
            exponents=[[pair(t) for t in lam] for lam in chart.exponents],
            infinity=[pair(t) for t in chart.infinity],
            hamiltonians=[pair(h) for h in chart.hamiltonians],
            notes=list(chart.notes),
        )


class DarbouxResponse(BaseModel):
    chart: ChartPayload
    certificates: list[ApparentCertificate]


class SymmetryResponse(BaseModel):
    chart: ChartPayload
    document: SystemPayload


class VerifyCheck(BaseModel):
    name: str
    description: str
    expected_to_pass: bool
    status: str | None = None
    detail: str | None = None


class VerifyResponse(BaseModel):
    checks: list[VerifyCheck]
    ok: bool
