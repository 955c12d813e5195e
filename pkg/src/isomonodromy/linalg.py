"""Small dense linear algebra helpers used throughout the package.

Everything works on ``complex128`` arrays.  The conventions that matter
globally live here: the canonical eigenvalue order (real part
descending, imaginary part breaking ties descending) and the reporting
eigensolver wrapper, which turns silent LAPACK trouble into a
:class:`~isomonodromy.config.NumericError`.
"""

from __future__ import annotations

import numpy as np

from .config import NumericError

__all__ = [
    "as_matrix",
    "sorted_eig",
    "diagonalize",
    "is_nilpotent",
    "matrix_log_unipotent",
    "unipotent_exp",
    "intertwiner",
    "match_diagonal_conjugation",
    "permutation_matrix",
]


def as_matrix(a: object, m: int | None = None) -> np.ndarray:
    """Coerce ``a`` to a square ``complex128`` matrix."""
    arr = np.asarray(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    if m is not None and arr.shape[0] != m:
        raise ValueError(f"expected a {m}x{m} matrix, got {arr.shape[0]}x{arr.shape[0]}")
    return arr


def sorted_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors in the canonical order.

    The order is by real part descending, then imaginary part
    descending.  Raises :class:`NumericError` when LAPACK does not
    converge.
    """
    a = as_matrix(a)
    try:
        w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigensolver failed: {exc}") from exc
    order = np.lexsort((-w.imag, -w.real))
    return w[order], v[:, order]


def diagonalize(a: np.ndarray, eps: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(lam, t)`` with ``t^-1 a t = diag(lam)`` in canonical order.

    Raises :class:`NumericError` when the eigenvector matrix is too ill
    conditioned for the conjugation to be trusted, which catches the
    non-diagonalizable case instead of silently approximating it.
    """
    w, v = sorted_eig(a)
    cond = np.linalg.cond(v)
    if not np.isfinite(cond) or cond > 1.0 / eps:
        raise NumericError(
            "matrix is not reliably diagonalizable",
            condition_number=float(cond),
            eigenvalues=w,
        )
    return w, v


def is_nilpotent(a: np.ndarray, tol: float = 1e-7) -> bool:
    """True when every eigenvalue of ``a`` is within ``tol`` of zero."""
    a = as_matrix(a)
    w = np.linalg.eigvals(a)
    return bool(np.max(np.abs(w)) < tol) if w.size else True


def matrix_log_unipotent(g: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Logarithm of a unipotent matrix via the terminating Mercator series."""
    g = as_matrix(g)
    m = g.shape[0]
    n = g - np.eye(m)
    if not is_nilpotent(n, tol=max(tol, 1e-6)):
        raise NumericError("matrix is not unipotent", spectrum=np.linalg.eigvals(g))
    out = np.zeros_like(g)
    term = np.eye(m, dtype=complex)
    for k in range(1, m + 1):
        term = term @ n
        out += ((-1) ** (k + 1) / k) * term
    return out


def unipotent_exp(r: np.ndarray) -> np.ndarray:
    """Exponential of a nilpotent matrix by its terminating series."""
    r = as_matrix(r)
    m = r.shape[0]
    out = np.eye(m, dtype=complex)
    term = np.eye(m, dtype=complex)
    fact = 1.0
    for k in range(1, m + 1):
        term = term @ r
        fact *= k
        out += term / fact
    return out


def intertwiner(pairs: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, float]:
    """Least-squares solution of ``a_i x = x b_i`` for all pairs.

    Stacks the Kronecker systems and takes the singular vector of the
    smallest singular value.  Returns ``(x, residual)`` where the
    residual is the smallest singular value of the stacked system; an
    exact common intertwiner gives a residual at rounding level.  The
    witness is scaled to unit Frobenius norm and is not guaranteed to
    be invertible; callers check that themselves.
    """
    if not pairs:
        raise ValueError("need at least one matrix pair")
    m = as_matrix(pairs[0][0]).shape[0]
    eye = np.eye(m)
    blocks = []
    for a, b in pairs:
        a = as_matrix(a, m)
        b = as_matrix(b, m)
        blocks.append(np.kron(eye, a) - np.kron(b.T, eye))
    stacked = np.vstack(blocks)
    _, sing, vh = np.linalg.svd(stacked)
    x = vh[-1].conj().reshape(m, m, order="F")
    return x, float(sing[-1])


def match_diagonal_conjugation(
    sources: list[np.ndarray],
    targets: list[np.ndarray],
    floor: float = 1e-9,
) -> tuple[np.ndarray, float]:
    """Diagonal ``d`` with ``d^-1 a d`` closest to ``b`` pairwise.

    Solves for the entrywise scale pattern ``d_j / d_i`` in log space by
    least squares over all entries whose magnitude clears ``floor`` in
    both collections, then reports the worst relative mismatch after
    applying the best diagonal.  Useful for comparing systems that are
    only defined up to conjugation by constant diagonal matrices.
    """
    m = as_matrix(sources[0]).shape[0]
    rows = []
    rhs = []
    for a, b in zip(sources, targets):
        a = as_matrix(a, m)
        b = as_matrix(b, m)
        scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1.0)
        for i in range(m):
            for j in range(m):
                if i == j:
                    continue
                if abs(a[i, j]) > floor * scale and abs(b[i, j]) > floor * scale:
                    row = np.zeros(m)
                    row[j] = 1.0
                    row[i] = -1.0
                    rows.append(row)
                    rhs.append(np.log(b[i, j] / a[i, j]))
    if not rows:
        d = np.ones(m, dtype=complex)
    else:
        # Pin the overall scale: the pattern only depends on differences.
        rows.append(np.ones(m))
        rhs.append(0.0)
        sol, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs, dtype=complex), rcond=None)
        d = np.exp(sol)
    dm = np.diag(d)
    dinv = np.diag(1.0 / d)
    worst = 0.0
    for a, b in zip(sources, targets):
        a = as_matrix(a, m)
        b = as_matrix(b, m)
        scale = max(np.max(np.abs(b)), 1e-300)
        worst = max(worst, float(np.max(np.abs(dinv @ a @ dm - b)) / scale))
    return d, worst


def permutation_matrix(order: tuple[int, ...] | list[int]) -> np.ndarray:
    """Matrix ``p`` with ``(p^-1 a p)[i, j] = a[order[i], order[j]]``.

    ``order`` lists, for each new position, the old index placed there.
    """
    m = len(order)
    if sorted(order) != list(range(m)):
        raise ValueError(f"not a permutation of 0..{m - 1}: {order}")
    p = np.zeros((m, m), dtype=complex)
    for new, old in enumerate(order):
        p[old, new] = 1.0
    return p
