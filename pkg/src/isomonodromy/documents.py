"""JSON documents for systems and gauge chains.

The on-disk format is deliberately dumb: UTF-8 JSON, complex numbers as
two-element ``[re, im]`` arrays (never strings), residues row-major.
Printing and re-parsing a document reproduces it bit-exactly because
Python's float repr round-trips.  Closed-form comparison fixtures keep
their sampling parameters in the free-form ``branch`` mapping next to
the sampled values, so exact formulas live only in the test code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np

from .config import ParseError, ToleranceConfig
from .reduction import ElementaryGauge, GaugeChain
from .system import FuchsianSystem, build_system

SCHEMA_VERSION = 1


def _pair(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _matrix_data(a: np.ndarray) -> list[list[list[float]]]:
    return [[_pair(a[i, j]) for j in range(a.shape[1])] for i in range(a.shape[0])]


def _read_pair(value: Any, what: str) -> complex:
    ok = (
        isinstance(value, (list, tuple))
        and len(value) == 2
        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value)
    )
    if not ok:
        raise ParseError(f"{what} must be a [re, im] pair, got {value!r}")
    return complex(float(value[0]), float(value[1]))


def _read_matrix(value: Any, m: int, what: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != m:
        raise ParseError(f"{what} must be a {m}x{m} nested array")
    out = np.zeros((m, m), dtype=complex)
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != m:
            raise ParseError(f"{what} row {i} must have {m} entries")
        for j, entry in enumerate(row):
            out[i, j] = _read_pair(entry, f"{what}[{i}][{j}]")
    return out


def _require(mapping: dict[str, Any], key: str, what: str) -> Any:
    if key not in mapping:
        raise ParseError(f"{what} is missing the '{key}' field")
    return mapping[key]


def _check_version(mapping: dict[str, Any], what: str) -> int:
    version = _require(mapping, "schema_version", what)
    if version != SCHEMA_VERSION:
        raise ParseError(
            f"unknown {what} schema_version {version!r}; this build reads {SCHEMA_VERSION}"
        )
    return version


@dataclass(frozen=True)
class SystemDocument:
    """A Fuchsian system in its serialized shape.

    Holds plain lists, not arrays, so two documents compare by value and
    printing is trivially deterministic.  ``labels`` optionally names
    the poles; ``branch`` is a free-form mapping for fixture sampling
    parameters.
    """

    m: int
    poles: list[list[float]]
    residues: list[list[list[list[float]]]]
    labels: list[str] | None = None
    branch: dict[str, Any] | None = None
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_system(
        cls,
        system: FuchsianSystem,
        labels: list[str] | None = None,
        branch: dict[str, Any] | None = None,
    ) -> "SystemDocument":
        return cls(
            m=system.m,
            poles=[_pair(u) for u in system.poles],
            residues=[_matrix_data(a) for a in system.residues],
            labels=list(labels) if labels is not None else None,
            branch=dict(branch) if branch is not None else None,
        )

    def to_system(self, tol: ToleranceConfig | None = None) -> FuchsianSystem:
        poles = [_read_pair(u, f"pole {k}") for k, u in enumerate(self.poles)]
        mats = [
            _read_matrix(a, self.m, f"residue {k}") for k, a in enumerate(self.residues)
        ]
        if self.labels is not None and len(self.labels) != len(poles):
            raise ParseError(
                f"{len(self.labels)} labels for {len(poles)} poles"
            )
        return build_system(poles, mats, tol=tol)

    def to_payload(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "schema_version": self.schema_version,
            "m": self.m,
            "poles": self.poles,
            "residues": self.residues,
        }
        if self.labels is not None:
            payload["labels"] = self.labels
        if self.branch is not None:
            payload["branch"] = self.branch
        return payload

    @classmethod
    def from_payload(cls, payload: Any) -> "SystemDocument":
        if not isinstance(payload, dict):
            raise ParseError("system document must be a JSON object")
        _check_version(payload, "system document")
        m = _require(payload, "m", "system document")
        if not isinstance(m, int) or isinstance(m, bool) or m < 1:
            raise ParseError(f"rank m must be a positive integer, got {m!r}")
        poles = _require(payload, "poles", "system document")
        residues = _require(payload, "residues", "system document")
        if not isinstance(poles, list) or not isinstance(residues, list):
            raise ParseError("poles and residues must be arrays")
        labels = payload.get("labels")
        if labels is not None and not (
            isinstance(labels, list) and all(isinstance(s, str) for s in labels)
        ):
            raise ParseError("labels must be an array of strings")
        branch = payload.get("branch")
        if branch is not None and not isinstance(branch, dict):
            raise ParseError("branch must be an object")
        return cls(m=m, poles=poles, residues=residues, labels=labels, branch=branch)

    def to_text(self) -> str:
        return json.dumps(self.to_payload(), indent=2) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SystemDocument":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"not valid JSON: {exc}") from exc
        return cls.from_payload(payload)


def document_from_system(
    system: FuchsianSystem,
    labels: list[str] | None = None,
    branch: dict[str, Any] | None = None,
) -> SystemDocument:
    """Convenience spelling of :meth:`SystemDocument.from_system`."""
    return SystemDocument.from_system(system, labels=labels, branch=branch)


# ----------------------------------------------------------------------
# gauge chains
# ----------------------------------------------------------------------

def _gauge_to_payload(gauge: ElementaryGauge) -> dict[str, Any]:
    payload: dict[str, Any] = {"kind": gauge.kind}
    if gauge.matrix is not None:
        payload["matrix"] = _matrix_data(gauge.matrix)
    if gauge.center is not None:
        payload["center"] = _pair(gauge.center)
    if gauge.kind == "conformal":
        payload["invert"] = gauge.invert
    if gauge.index is not None:
        payload["index"] = gauge.index
    if gauge.block is not None:
        payload["block"] = gauge.block
    if gauge.audit:
        payload["audit"] = gauge.audit
    return payload


def _gauge_from_payload(payload: Any, pos: int) -> ElementaryGauge:
    what = f"chain element {pos}"
    if not isinstance(payload, dict):
        raise ParseError(f"{what} must be a JSON object")
    kind = _require(payload, "kind", what)
    audit = payload.get("audit", 0.0)
    if not isinstance(audit, (int, float)) or isinstance(audit, bool):
        raise ParseError(f"{what} audit must be a number")
    matrix = None
    center = None
    invert = False
    index = None
    block = None
    if kind in ("constant", "up-shift", "down-shift"):
        raw = _require(payload, "matrix", what)
        if not isinstance(raw, list) or not raw:
            raise ParseError(f"{what} matrix must be a nested array")
        matrix = _read_matrix(raw, len(raw), f"{what} matrix")
    elif kind == "conformal":
        center = _read_pair(_require(payload, "center", what), f"{what} center")
        invert = payload.get("invert", False)
        if not isinstance(invert, bool):
            raise ParseError(f"{what} invert must be a boolean")
    elif kind == "discard":
        index = _require(payload, "index", what)
        if not isinstance(index, int) or isinstance(index, bool):
            raise ParseError(f"{what} index must be an integer")
    elif kind == "project":
        block = _require(payload, "block", what)
        if not isinstance(block, int) or isinstance(block, bool):
            raise ParseError(f"{what} block must be an integer")
    else:
        raise ParseError(f"{what} has unknown kind {kind!r}")
    return ElementaryGauge(
        kind=kind,
        matrix=matrix,
        center=center,
        invert=invert,
        index=index,
        block=block,
        audit=float(audit),
    )


def chain_to_text(chain: GaugeChain) -> str:
    """Serialize a chain with its endpoint systems embedded."""
    shift = list(chain.infinity_shift) if chain.infinity_shift is not None else None
    payload = {
        "schema_version": SCHEMA_VERSION,
        "elements": [_gauge_to_payload(g) for g in chain.elements],
        "infinity_shift": shift,
        "source": SystemDocument.from_system(chain.source).to_payload(),
        "target": SystemDocument.from_system(chain.target).to_payload(),
    }
    return json.dumps(payload, indent=2) + "\n"


def chain_from_text(text: str) -> GaugeChain:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ParseError("chain document must be a JSON object")
    _check_version(payload, "chain document")
    raw = _require(payload, "elements", "chain document")
    if not isinstance(raw, list):
        raise ParseError("chain elements must be an array")
    elements = tuple(_gauge_from_payload(g, k) for k, g in enumerate(raw))
    shift = payload.get("infinity_shift")
    if shift is not None:
        ok = isinstance(shift, list) and all(
            isinstance(s, int) and not isinstance(s, bool) for s in shift
        )
        if not ok:
            raise ParseError("infinity_shift must be an array of integers")
        shift = tuple(shift)
    source = SystemDocument.from_payload(
        _require(payload, "source", "chain document")
    ).to_system()
    target = SystemDocument.from_payload(
        _require(payload, "target", "chain document")
    ).to_system()
    return GaugeChain(
        elements=elements, source=source, target=target, infinity_shift=shift
    )
