"""Symmetric eigendecomposition by cyclic Jacobi rotations and PSD square roots.

The sweep uses round-robin (tournament) ordering: each round rotates n/2
disjoint index pairs at once, which is exact because rotations on disjoint
planes commute, and lets numpy apply a whole round with a few fancy-indexed
row/column updates.
"""

from __future__ import annotations

import numpy as np

MAX_SWEEPS = 100
NEG_EIG_TOL = -1e-9
JITTER = 1e-10


class ConvergenceError(RuntimeError):
    pass


def _round_robin_layout(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Slot layout and per-round permutation for the circle-method tournament.

    Rows are kept in "slot" order so that round pairs are always
    ``(k, k + m/2)``; between rounds the matrix is re-indexed by ``tau``,
    which moves every player to its next seat. Over ``m - 1`` rounds each
    pair of indices meets exactly once.
    """
    h = m // 2
    pos_of_slot = np.concatenate([np.arange(h), np.arange(m - 1, h - 1, -1)])
    slot_of_pos = np.argsort(pos_of_slot)
    # seat i receives the player previously at seat sigma(i)
    sigma = np.concatenate([[0, m - 1], np.arange(1, m - 1)]) if m > 2 else np.arange(m)
    tau = slot_of_pos[sigma[pos_of_slot]]
    return pos_of_slot, tau


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def _rotation(app, aqq, apq):
    """cos/sin of the Jacobi angle that zeroes ``apq`` (vectorized)."""
    live = apq != 0.0
    denom = np.where(live, 2.0 * apq, 1.0)
    theta = (aqq - app) / denom
    # t = tan(phi) is the smaller root of t^2 + 2 theta t - 1 = 0
    big = np.abs(theta) > 1e150
    safe = np.where(big, 1.0, theta)
    t = np.where(safe >= 0, 1.0, -1.0) / (np.abs(safe) + np.sqrt(safe * safe + 1.0))
    t = np.where(big, 0.5 / np.where(big, theta, 1.0), t)
    t = np.where(live, t, 0.0)
    c = 1.0 / np.sqrt(t * t + 1.0)
    return c, t * c


def _rotate_halves(m: np.ndarray, c, s, out: np.ndarray) -> None:
    h = len(c)
    top, bot = m[:h], m[h:]
    np.subtract(c * top, s * bot, out=out[:h])
    np.add(s * top, c * bot, out=out[h:])


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of symmetric ``a``.

    Iterates until the off-diagonal Frobenius norm drops below
    ``tol * ||a||_F``; raises ``ConvergenceError`` after ``max_sweeps``.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"jacobi_eigh: expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    a = 0.5 * (a + a.T)
    scale = float(np.linalg.norm(a))
    if n < 2 or scale == 0.0:
        return np.diag(a).copy(), np.eye(n)
    target = tol * scale
    m = n + (n % 2)
    h = m // 2
    if m != n:  # an isolated dummy index is never rotated
        a = np.pad(a, ((0, 1), (0, 1)))
    player_of_slot, tau = _round_robin_layout(m)
    a = np.ascontiguousarray(a[np.ix_(player_of_slot, player_of_slot)])
    vt = np.eye(m)[player_of_slot]
    k = np.arange(h)
    buf = np.empty_like(a)
    vbuf = np.empty_like(vt)
    for _ in range(max_sweeps):
        if _off_norm(a) <= target:
            break
        for _ in range(m - 1):
            c, s = _rotation(a[k, k], a[k + h, k + h], a[k, k + h])
            cc, ss = c[:, None], s[:, None]
            # A <- J^T A J: rotate rows, then rows of the transpose (A is symmetric)
            _rotate_halves(a, cc, ss, buf)
            _rotate_halves(buf.T, cc, ss, a)
            a[k, k + h] = 0.0
            a[k + h, k] = 0.0
            _rotate_halves(vt, cc, ss, vbuf)
            a = a[np.ix_(tau, tau)]
            vt = vbuf[tau]
            player_of_slot = player_of_slot[tau]
    else:
        if _off_norm(a) > target:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps (n={n})")
    # undo the slot layout, drop the dummy index
    inv = np.argsort(player_of_slot)
    w = np.diag(a)[inv][:n]
    v = vt[inv][:n, :n].T
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def _eigh_psd(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    c = 0.5 * (c + c.T)
    w, v = jacobi_eigh(c)
    if w.size and w[0] < NEG_EIG_TOL:
        c = c + JITTER * np.eye(len(c))
        w, v = jacobi_eigh(c)
    return w, v


def psd_sqrt(c: np.ndarray) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix (negative eigenvalues clipped)."""
    w, v = _eigh_psd(np.asarray(c, dtype=np.float64))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def psd_sqrt_of_product(c_a: np.ndarray, c_b: np.ndarray) -> np.ndarray:
    """Symmetric square root ``S`` of ``C_a^{1/2} C_b C_a^{1/2}``.

    ``S`` is similar to the principal root of ``C_a C_b``, so ``trace(S)``
    equals ``Tr((C_a C_b)^{1/2})`` while staying in symmetric arithmetic.
    """
    c_a = np.asarray(c_a, dtype=np.float64)
    c_b = np.asarray(c_b, dtype=np.float64)
    if c_a.shape != c_b.shape or c_a.ndim != 2 or c_a.shape[0] != c_a.shape[1]:
        raise ValueError(f"psd_sqrt_of_product: incompatible shapes {c_a.shape} and {c_b.shape}")
    root_a = psd_sqrt(c_a)
    inner = root_a @ (0.5 * (c_b + c_b.T)) @ root_a
    return psd_sqrt(inner)


def trace_sqrt_product_lowrank(f_a: np.ndarray, f_b: np.ndarray) -> float:
    """``Tr((C_a C_b)^{1/2})`` for ``C_a = F_a^T F_a`` and ``C_b = F_b^T F_b``.

    The nonzero eigenvalues of ``C_a^{1/2} C_b C_a^{1/2}`` are those of
    ``X X^T`` with ``X = F_b F_a^T``, so the trace is the sum of the singular
    values of ``X``: one small Jacobi solve instead of two d x d ones when the
    sample counts are below the feature dimension.
    """
    x = np.asarray(f_b, dtype=np.float64) @ np.asarray(f_a, dtype=np.float64).T
    gram = x @ x.T if x.shape[0] <= x.shape[1] else x.T @ x
    w, _ = jacobi_eigh(gram)
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
