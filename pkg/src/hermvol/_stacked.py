"""Small batched linear algebra kernels for stacks of tiny SPD systems.

Every particle carries a (p, p) precision matrix with p <= 8, so the
filter works on arrays of shape (n, p, p). Looping over p in Python and
vectorizing over n is far cheaper than dispatching n separate LAPACK
calls, and a rank-1 Cholesky update has no batched library equivalent
anyway. All routines preserve lower-triangular factors with positive
diagonals.
"""

from __future__ import annotations

import numpy as np


def chol_update(L: np.ndarray, w: np.ndarray) -> None:
    """In-place rank-1 update: after the call, L L' == L0 L0' + w w'.

    Parameters
    ----------
    L : ndarray, shape (n, p, p)
        Stack of lower Cholesky factors, modified in place.
    w : ndarray, shape (n, p)
        Update vectors. Consumed as scratch (copied internally).
    """
    x = np.array(w, dtype=float, copy=True)
    p = L.shape[-1]
    for k in range(p):
        lkk = L[:, k, k]
        xk = x[:, k]
        r = np.hypot(lkk, xk)
        c = r / lkk
        s = xk / lkk
        L[:, k, k] = r
        if k + 1 < p:
            col = L[:, k + 1 :, k]
            tail = x[:, k + 1 :]
            col += s[:, None] * tail
            col /= c[:, None]
            tail *= c[:, None]
            tail -= s[:, None] * col


def solve_lower(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve L y = b by forward substitution for a stack of systems.

    L has shape (n, p, p) lower triangular, b has shape (n, p).
    """
    p = L.shape[-1]
    y = np.empty_like(b, dtype=float)
    for i in range(p):
        acc = np.array(b[:, i], dtype=float, copy=True)
        for j in range(i):
            acc -= L[:, i, j] * y[:, j]
        y[:, i] = acc / L[:, i, i]
    return y


def solve_upper_t(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve L' x = b (backward substitution against the transpose)."""
    p = L.shape[-1]
    x = np.empty_like(b, dtype=float)
    for i in range(p - 1, -1, -1):
        acc = np.array(b[:, i], dtype=float, copy=True)
        for j in range(i + 1, p):
            acc -= L[:, j, i] * x[:, j]
        x[:, i] = acc / L[:, i, i]
    return x


def spd_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve (L L') x = b for a stack of SPD systems given the factor."""
    return solve_upper_t(L, solve_lower(L, b))


def quad_form_inv(L: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Return w' (L L')^{-1} w per stack entry, shape (n,)."""
    v = solve_lower(L, w)
    return np.einsum("np,np->n", v, v)
