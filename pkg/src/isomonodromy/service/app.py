"""HTTP service exposing the solver over JSON.

Run locally with ``uvicorn isomonodromy.service:app``.  Parse problems
come back as 422, numeric failures (closure violations, blow-ups,
degenerate inputs) as 400; both use the envelope
``{"error": {"kind": ..., "message": ...}}`` so a thin client can map
them to exit codes without inspecting the message text.
"""

from __future__ import annotations

import json
import logging
from dataclasses import replace

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import NumericError, ParseError, ToleranceConfig, default_tolerance
from ..system import FuchsianSystem
from ..documents import SystemDocument, chain_to_text
from ..flow import hamiltonian, initial_state, integrate_schlesinger
from ..monodromy import (
    LoopBasis,
    invariant_subspace,
    monodromy_matrices,
    scalar_monodromy_indices,
)
from ..reduction import erase_identity_singularity, reduce_reducible
from ..scalar import (
    apply_Sinf,
    apply_Sk,
    chart_from_system,
    frobenius_obstruction,
    hamiltonians_from_chart,
    local_exponents,
    reconstruct_system,
    to_scalar,
)
from ..verification import all_checks, run_checks
from .models import (
    ApparentCertificate,
    ChartPayload,
    DarbouxRequest,
    DarbouxResponse,
    EraseRequest,
    EraseResponse,
    FlowRequest,
    FlowResponse,
    HealthResponse,
    MonodromyRequest,
    MonodromyResponse,
    ReduceRequest,
    ReduceResponse,
    ScalarPole,
    SolverOptions,
    SymmetryRequest,
    SymmetryResponse,
    SystemPayload,
    VerifyCheck,
    VerifyRequest,
    VerifyResponse,
    matrix_pairs,
    pair,
)

logger = logging.getLogger(__name__)

app = FastAPI(title="isomonodromy", version=__version__)


def _tolerance(opts: SolverOptions) -> ToleranceConfig:
    tol = default_tolerance()
    if opts.tol is not None:
        if not 0.0 < opts.tol < 1.0:
            raise ParseError(f"tolerance must lie in (0, 1), got {opts.tol}")
        tol = tol.with_rel_tol(opts.tol)
    return tol


def _basis(opts: SolverOptions) -> LoopBasis | None:
    if opts.radius is None and opts.cut_angle is None:
        return None
    cut = 1j
    if opts.cut_angle is not None:
        cut = complex(np.exp(1j * np.pi * opts.cut_angle / 180.0))
    return LoopBasis(cut_direction=cut, basepoint_radius=opts.radius)


def _system(payload: SystemPayload, tol: ToleranceConfig) -> FuchsianSystem:
    return payload.to_document().to_system(tol)


def _document(system: FuchsianSystem) -> SystemPayload:
    return SystemPayload.from_document(SystemDocument.from_system(system))


def _chain_payload(chain) -> dict:
    return json.loads(chain_to_text(chain))


@app.exception_handler(ParseError)
async def _parse_error(request: Request, exc: ParseError) -> JSONResponse:
    return JSONResponse(
        status_code=422,
        content={"error": {"kind": "parse", "message": str(exc)}},
    )


@app.exception_handler(NumericError)
async def _numeric_error(request: Request, exc: NumericError) -> JSONResponse:
    info = {key: _plain(value) for key, value in exc.info.items()}
    return JSONResponse(
        status_code=400,
        content={"error": {"kind": "numeric", "message": str(exc), "info": info}},
    )


@app.exception_handler(RequestValidationError)
async def _validation_error(
    request: Request, exc: RequestValidationError
) -> JSONResponse:
    return JSONResponse(
        status_code=422,
        content={"error": {"kind": "parse", "message": str(exc)}},
    )


def _plain(value):
    """Best-effort JSON form of a diagnostic value."""
    if isinstance(value, (bool, int, float, str)) or value is None:
        return value
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.generic):
        return _plain(value.item())
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return str(value)


@app.get("/health")
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/monodromy")
def monodromy(req: MonodromyRequest) -> MonodromyResponse:
    tol = _tolerance(req)
    system = _system(req.system, tol)
    data = monodromy_matrices(system, basis=_basis(req), tol=tol)
    subspace = invariant_subspace(data)
    return MonodromyResponse(
        matrices=[matrix_pairs(mk) for mk in data.matrices],
        at_infinity=matrix_pairs(data.at_infinity),
        closure_residual=data.closure_residual,
        traces={word: pair(value) for word, value in data.trace_words().items()},
        exponents=[[pair(t) for t in lam] for lam in data.exponents],
        scalar_poles=[
            ScalarPole(pole=k + 1, value=pair(mu))
            for k, mu in scalar_monodromy_indices(data)
        ],
        invariant_subspace=None if subspace is None else matrix_pairs(subspace),
    )


@app.post("/flow")
def flow(req: FlowRequest) -> FlowResponse:
    tol = _tolerance(req)
    system = _system(req.system, tol)
    if not 1 <= req.move <= system.n:
        raise ParseError(f"pole index {req.move} out of range 1..{system.n}")
    if req.steps < 1:
        raise ParseError("steps must be positive")
    moving = req.move - 1
    target = complex(*req.to)
    start = complex(system.poles[moving])
    state = initial_state(system)
    intermediate: list[SystemPayload] = []
    for step in range(1, req.steps + 1):
        waypoint = start + (target - start) * step / req.steps
        state = integrate_schlesinger(state, moving, waypoint, tol=tol)
        if step < req.steps:
            intermediate.append(_document(state.system))
    final = state.system
    return FlowResponse(
        document=_document(final),
        intermediate=intermediate,
        hamiltonians=[pair(hamiltonian(final, k)) for k in range(final.n)],
    )


@app.post("/reduce")
def reduce(req: ReduceRequest) -> ReduceResponse:
    tol = _tolerance(req)
    system = _system(req.system, tol)
    subspace = None
    if req.subspace != "auto":
        vectors = np.array(
            [[complex(re, im) for re, im in vector] for vector in req.subspace],
            dtype=complex,
        )
        if vectors.ndim != 2 or vectors.shape[1] != system.m:
            raise ParseError("subspace vectors must have one entry per component")
        subspace = vectors.T
    split, chain = reduce_reducible(system, subspace, tol=tol)
    return ReduceResponse(
        document=_document(split.assemble()),
        chain=_chain_payload(chain),
        invariant_dimension=split.l,
        infinity_shift=(
            None if chain.infinity_shift is None else list(chain.infinity_shift)
        ),
        zeroed_mass=chain.zeroed_mass(),
    )


@app.post("/erase")
def erase(req: EraseRequest) -> EraseResponse:
    tol = _tolerance(req)
    system = _system(req.system, tol)
    if not 1 <= req.pole <= system.n:
        raise ParseError(f"pole index {req.pole} out of range 1..{system.n}")
    data = monodromy_matrices(system, tol=tol)
    scalars = dict(scalar_monodromy_indices(data))
    if req.pole - 1 not in scalars:
        raise NumericError(
            f"monodromy at pole {req.pole} is not scalar; it cannot be erased"
        )
    erased, chain = erase_identity_singularity(system, req.pole - 1, tol=tol)
    return EraseResponse(
        document=_document(erased),
        chain=_chain_payload(chain),
        pole=req.pole,
        scalar=pair(scalars[req.pole - 1]),
    )


@app.post("/darboux")
def darboux(req: DarbouxRequest) -> DarbouxResponse:
    tol = _tolerance(req)
    system = _system(req.system, tol)
    chart = chart_from_system(system, tol=tol)
    certificates: list[ApparentCertificate] = []
    if chart.g > 0:
        # certify against a realization of the chart itself, which has a
        # diagonal residue at infinity by construction
        eq = to_scalar(reconstruct_system(chart, tol=tol), tol=tol)
        for point in chart.q:
            low, high = local_exponents(eq, point)
            certificates.append(
                ApparentCertificate(
                    point=pair(point),
                    exponents=(pair(low), pair(high)),
                    no_log_residual=frobenius_obstruction(eq, point),
                )
            )
    return DarbouxResponse(chart=ChartPayload.from_chart(chart), certificates=certificates)


@app.post("/symmetry")
def symmetry(req: SymmetryRequest) -> SymmetryResponse:
    tol = _tolerance(req)
    system = _system(req.system, tol)
    chart = chart_from_system(system, tol=tol)
    chart = replace(chart, hamiltonians=tuple(hamiltonians_from_chart(chart)))
    if req.op == "Sk":
        if req.k is None:
            raise ParseError("op Sk needs k")
        if not 2 <= req.k <= chart.n:
            raise ParseError(f"k must lie in 2..{chart.n}")
        image = apply_Sk(chart, req.k)
    else:
        image = apply_Sinf(chart)
    image = replace(image, hamiltonians=tuple(hamiltonians_from_chart(image)))
    realized = reconstruct_system(image, tol=tol)
    return SymmetryResponse(
        chart=ChartPayload.from_chart(image),
        document=_document(realized),
    )


@app.post("/verify")
def verify(req: VerifyRequest) -> VerifyResponse:
    checks = all_checks()
    if req.names:
        known = {check.name for check in checks}
        missing = [name for name in req.names if name not in known]
        if missing:
            raise ParseError(f"unknown checks: {', '.join(missing)}")
        checks = [check for check in checks if check.name in set(req.names)]
    if req.list_only:
        return VerifyResponse(
            checks=[
                VerifyCheck(
                    name=check.name,
                    description=check.description,
                    expected_to_pass=check.expected_to_pass,
                )
                for check in checks
            ],
            ok=True,
        )
    outcomes = run_checks([check.name for check in checks])
    by_name = {check.name: check for check in checks}
    return VerifyResponse(
        checks=[
            VerifyCheck(
                name=outcome.name,
                description=by_name[outcome.name].description,
                expected_to_pass=outcome.expected_to_pass,
                status=outcome.status,
                detail=outcome.detail,
            )
            for outcome in outcomes
        ],
        ok=not any(outcome.surprising for outcome in outcomes),
    )
