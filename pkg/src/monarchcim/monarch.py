"""Monarch matrices: block-diagonal factors interleaved with a fixed permutation.

A Monarch matrix M of dimension n = b*d is the product P @ L @ P @ R @ P where
L and R are block-diagonal (d blocks of size b x b) and P is the fixed
transpose-reshape permutation. In the square case b = d = sqrt(n), P is an
involution and the two outer P's can be folded into the factors, leaving a
single explicit permutation on the execution path.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceError, DimensionError

CONTIGUOUS = "contiguous"
INTERLEAVED = "interleaved"


class OpCounters:
    """Instrumentation for permutation applications and MAC-counted flops."""

    def __init__(self):
        self.reset()

    def reset(self):
        self.permutes = 0
        self.flops = 0


counters = OpCounters()


@dataclass(frozen=True)
class PermutationSpec:
    """The transpose of the d x b reshape: index q*b + r maps to r*d + q."""

    n: int
    b: int

    def __post_init__(self):
        if self.b <= 0 or self.n <= 0 or self.n % self.b:
            raise DimensionError(f"block size {self.b} must divide n={self.n}")

    @property
    def d(self) -> int:
        return self.n // self.b


def permute(x: np.ndarray, spec: PermutationSpec) -> np.ndarray:
    """Apply the fixed permutation: out[r*d + q] = x[q*b + r].

    Accepts a batch in the trailing axes (shape (n,) or (n, k)).
    """
    if x.shape[0] != spec.n:
        raise DimensionError(f"vector length {x.shape[0]} != n={spec.n}")
    counters.permutes += 1
    rest = x.shape[1:]
    out = x.reshape(spec.d, spec.b, *rest)
    return np.swapaxes(out, 0, 1).reshape(x.shape)


def permutation_indices(spec: PermutationSpec) -> np.ndarray:
    """Index array p with (P @ x)[i] = x[p[i]]."""
    k = np.arange(spec.n)
    q, r = k // spec.b, k % spec.b
    out = np.empty(spec.n, dtype=np.int64)
    out[r * spec.d + q] = k
    return out


@dataclass(frozen=True)
class BlockDiagonalFactor:
    """d dense b x b blocks; represents an n x n matrix with n = b*d.

    layout "contiguous": entry (q*b + r, q*b + r') = blocks[q][r, r'].
    layout "interleaved": entry (q*b + r, q'*b + r) = blocks[r][q, q'], i.e. the
    contiguous factor conjugated by the permutation (requires b == d).
    """

    blocks: np.ndarray  # shape (d, b, b)
    layout: str = CONTIGUOUS

    def __post_init__(self):
        if self.blocks.ndim != 3 or self.blocks.shape[1] != self.blocks.shape[2]:
            raise DimensionError(f"blocks must be (d, b, b), got {self.blocks.shape}")
        if self.layout == INTERLEAVED and self.d != self.b:
            raise DimensionError("interleaved layout requires b == d")
        if self.layout not in (CONTIGUOUS, INTERLEAVED):
            raise ValueError(f"unknown layout {self.layout!r}")

    @property
    def d(self) -> int:
        return self.blocks.shape[0]

    @property
    def b(self) -> int:
        return self.blocks.shape[1]

    @property
    def n(self) -> int:
        return self.d * self.b

    @property
    def nnz(self) -> int:
        return self.d * self.b * self.b

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for q in range(self.d):
            if self.layout == CONTIGUOUS:
                sl = slice(q * self.b, (q + 1) * self.b)
                out[sl, sl] = self.blocks[q]
            else:
                idx = np.arange(self.d) * self.b + q  # here q indexes residues
                out[np.ix_(idx, idx)] = self.blocks[q]
        return out


def block_diag_mvm(f: BlockDiagonalFactor, x: np.ndarray) -> np.ndarray:
    """Multiply the block-diagonal factor by x (or a batch of columns).

    Costs exactly 2*n*b MAC-counted flops per input vector.
    """
    if x.shape[0] != f.n:
        raise DimensionError(f"vector length {x.shape[0]} != n={f.n}")
    counters.flops += 2 * f.n * f.b
    rest = x.shape[1:]
    if f.layout == CONTIGUOUS:
        seg = x.reshape(f.d, f.b, *rest)
        out = np.einsum("qrs,qs...->qr...", f.blocks, seg)
    else:
        seg = x.reshape(f.d, f.b, *rest)  # seg[q, r] = x[q*b + r]
        out = np.einsum("rqp,pr...->qr...", f.blocks, seg)
    return out.reshape(x.shape)


@dataclass(frozen=True)
class MonarchMatrix:
    """M = P @ L @ P @ R @ P, or folded (PLP) @ P @ (PRP) with one runtime P."""

    L: BlockDiagonalFactor
    R: BlockDiagonalFactor
    perm: PermutationSpec
    folded: bool = False

    def __post_init__(self):
        if self.L.n != self.perm.n or self.R.n != self.perm.n:
            raise DimensionError("factor dimension does not match permutation")
        if (self.L.b, self.L.d) != (self.R.b, self.R.d):
            raise DimensionError("L and R must share (b, d)")

    @property
    def n(self) -> int:
        return self.perm.n

    @property
    def b(self) -> int:
        return self.L.b


def monarch_mvm(m: MonarchMatrix, x: np.ndarray) -> np.ndarray:
    """Monarch matvec; folded and unfolded semantics agree."""
    if x.shape[0] != m.n:
        raise DimensionError(f"vector length {x.shape[0]} != n={m.n}")
    if m.folded:
        y = block_diag_mvm(m.R, x)
        y = permute(y, m.perm)
        return block_diag_mvm(m.L, y)
    y = permute(x, m.perm)
    y = block_diag_mvm(m.R, y)
    y = permute(y, m.perm)
    y = block_diag_mvm(m.L, y)
    return permute(y, m.perm)


def fold_permutations(m: MonarchMatrix) -> MonarchMatrix:
    """Fold the outer permutations into the factors: M = (PLP) @ P @ (PRP).

    Since (P @ A @ P)[i, j] = A[perm(i), perm(j)], P @ L @ P holds the same
    b x b blocks as L at interleaved (stride-b) positions, so folding is a
    layout change only. Requires the square case b == d.
    """
    if m.folded:
        raise ValueError("matrix is already folded")
    if m.L.b != m.L.d:
        raise DimensionError("folding requires the square case b == d")
    return MonarchMatrix(
        L=replace(m.L, layout=INTERLEAVED),
        R=replace(m.R, layout=INTERLEAVED),
        perm=m.perm,
        folded=True,
    )


def expand_to_dense(m: MonarchMatrix) -> np.ndarray:
    """Reference dense n x n matrix whose matvec agrees with monarch_mvm."""
    p = permutation_indices(m.perm)
    pm = np.zeros((m.n, m.n))
    pm[np.arange(m.n), p] = 1.0  # (P @ x)[i] = x[p[i]]
    if m.folded:
        return m.L.to_dense() @ pm @ m.R.to_dense()
    return pm @ m.L.to_dense() @ pm @ m.R.to_dense() @ pm


def random_monarch(n: int, rng: np.random.Generator) -> MonarchMatrix:
    """Random square-case Monarch matrix (b = d = sqrt(n))."""
    b = int(round(np.sqrt(n)))
    if b * b != n:
        raise DimensionError(f"n={n} is not a perfect square")
    spec = PermutationSpec(n=n, b=b)
    mk = lambda: BlockDiagonalFactor(rng.standard_normal((b, b, b)))
    return MonarchMatrix(L=mk(), R=mk(), perm=spec)


def rank1_approx(a: np.ndarray, tol: float = 1e-12, max_iter: int = 2000):
    """Best rank-1 Frobenius approximation of a via power iteration on A^T A.

    Returns (u, v, residual) with a ~ outer(u, v) and residual = ||a - u v^T||_F.
    Deterministic all-ones start; fixed-seed random restart if the start vector
    is annihilated while a is nonzero.
    """
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains non-finite values")
    rows, cols = a.shape
    norm_a = np.linalg.norm(a)
    if norm_a == 0.0:
        return np.zeros(rows), np.zeros(cols), 0.0
    ata = a.T @ a
    v = np.ones(cols) / np.sqrt(cols)
    restarted = False
    for _ in range(max_iter):
        w = ata @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            if restarted:
                # a annihilates both start vectors: dominant pair unreachable,
                # fall back to the degenerate-slice convention.
                return np.zeros(rows), np.zeros(cols), norm_a
            v = np.random.default_rng(0).standard_normal(cols)
            v /= np.linalg.norm(v)
            restarted = True
            continue
        w /= nw
        if np.dot(w, v) < 0:
            w = -w
        if np.linalg.norm(w - v) < tol:
            v = w
            break
        v = w
    else:
        u = a @ v
        res = np.linalg.norm(a - np.outer(u, v))
        raise ConvergenceError(
            f"power iteration did not converge in {max_iter} iterations "
            f"(residual {res:.3e})"
        )
    u = a @ v
    residual = float(np.linalg.norm(a - np.outer(u, v)))
    return u, v, residual


def d2s_project(w: np.ndarray, b: int):
    """Project a dense n x n matrix onto the Monarch class (square case).

    Slice mapping, derived from M = P L P R P in the square case b = d:
    M[beta*b + alpha, rp*b + betap] = L_alpha[beta, betap] * R_betap[alpha, rp],
    so the (alpha, betap) slice W[b*arange(b)+alpha][:, b*arange(b)+betap] is
    rank-1 with u -> column betap of L-block alpha and v -> row alpha of
    R-block betap. Returns (MonarchMatrix, frobenius_error).
    """
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    if w.shape != (n, n):
        raise DimensionError(f"W must be square, got {w.shape}")
    if b * b != n:
        raise DimensionError(f"block size {b} must equal sqrt(n)={np.sqrt(n):g}")
    stride = b * np.arange(b)
    l_blocks = np.zeros((b, b, b))
    r_blocks = np.zeros((b, b, b))
    for alpha in range(b):
        rows = stride + alpha
        for betap in range(b):
            a_slice = w[np.ix_(rows, stride + betap)]
            u, v, _ = rank1_approx(a_slice)
            l_blocks[alpha][:, betap] = u
            r_blocks[betap][alpha, :] = v
    m = MonarchMatrix(
        L=BlockDiagonalFactor(l_blocks),
        R=BlockDiagonalFactor(r_blocks),
        perm=PermutationSpec(n=n, b=b),
    )
    error = float(np.linalg.norm(w - expand_to_dense(m)))
    return m, error


def pad_to_square(w: np.ndarray):
    """Zero-extend a rectangular matrix to the supermatrix convention.

    Returns (padded, n, b) where n is the next power-of-4 >= max(rows, cols),
    so b = sqrt(n) is a power of two. Square power-of-4 inputs pass through.
    """
    rows, cols = w.shape
    n = 1
    while n < max(rows, cols):
        n *= 4
    padded = np.zeros((n, n))
    padded[:rows, :cols] = w
    return padded, n, int(round(np.sqrt(n)))
