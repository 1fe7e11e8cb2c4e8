"""Arithmetic over GF(q), q = p², realised as ℤ[j]/pℤ[j].

An element is the pair ``(a, b)`` of residues standing for ``a + jb``.
Matrices keep their real and imaginary residues in two int64 arrays.
"""

from collections import namedtuple
import math

import numpy as np

from pcof.errors import (DimensionMismatch, DivisionByZero, NotGaussianPrime,
                         NotInRowSpace, NotPrime, SingularMatrix)
from pcof.lattice_reduce import GaussianIntMatrix

GfqElem = namedtuple("GfqElem", ["re", "im"])


def _is_prime(n):
    if n < 2:
        return False
    for d in range(2, math.isqrt(n) + 1):
        if n % d == 0:
            return False
    return True


class FieldCtx(object):
    """Immutable context for GF(p²)."""

    __slots__ = ("p", "q")

    def __init__(self, p):
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", p * p)

    def __setattr__(self, key, value):
        raise AttributeError("FieldCtx is immutable")

    def __eq__(self, other):
        return isinstance(other, FieldCtx) and other.p == self.p

    def __hash__(self):
        return hash(("FieldCtx", self.p))

    def __reduce__(self):
        return (FieldCtx, (self.p,))

    def __repr__(self):
        return "FieldCtx(p=%d)" % self.p

    @property
    def zero(self):
        return GfqElem(0, 0)

    @property
    def one(self):
        return GfqElem(1, 0)

    def elements(self):
        """All q field elements, ordered by (re, im)."""
        return [GfqElem(a, b) for a in range(self.p) for b in range(self.p)]

    def elem(self, re, im=0):
        return GfqElem(re % self.p, im % self.p)


def make_context(p):
    """Validate ``p`` and build the field context.

    :param int p: prime with p ≡ 3 (mod 4)
    :rtype: FieldCtx
    :raises NotPrime: if ``p`` is not prime
    :raises NotGaussianPrime: if ``p`` = 2 or p ≡ 1 (mod 4)
    """
    if not isinstance(p, (int, np.integer)) or isinstance(p, bool):
        raise NotPrime("p must be an integer, got %r" % (p,))
    p = int(p)
    if not _is_prime(p):
        raise NotPrime("%d is not prime" % p)
    if p % 4 != 3:
        raise NotGaussianPrime("ℤ[j]/%dℤ[j] is not a field (need p ≡ 3 mod 4)" % p)
    return FieldCtx(p)


def add(a, b, ctx):
    return GfqElem((a[0] + b[0]) % ctx.p, (a[1] + b[1]) % ctx.p)


def sub(a, b, ctx):
    return GfqElem((a[0] - b[0]) % ctx.p, (a[1] - b[1]) % ctx.p)


def mul(a, b, ctx):
    return GfqElem((a[0] * b[0] - a[1] * b[1]) % ctx.p, (a[0] * b[1] + a[1] * b[0]) % ctx.p)


def neg(a, ctx):
    return GfqElem(-a[0] % ctx.p, -a[1] % ctx.p)


def inv(a, ctx):
    """Multiplicative inverse: ``(a - jb) / (a² + b²)``.

    :raises DivisionByZero: for the zero element
    """
    p = ctx.p
    norm = int(a[0] * a[0] + a[1] * a[1]) % p
    if norm == 0:
        raise DivisionByZero("zero has no inverse in GF(%d)" % ctx.q)
    n_inv = pow(norm, -1, p)
    return GfqElem(a[0] * n_inv % p, -a[1] * n_inv % p)


class GfqMatrix(object):
    """Matrix over GF(q) with canonical residues in [0, p)."""

    __hash__ = None

    def __init__(self, re, im, ctx):
        re = np.mod(np.array(re, dtype=np.int64, ndmin=2), ctx.p)
        im = np.mod(np.array(im, dtype=np.int64, ndmin=2), ctx.p)
        if re.ndim != 2 or re.shape != im.shape:
            raise DimensionMismatch("real and imaginary parts differ in shape")
        self.re = re
        self.im = im
        self.ctx = ctx

    @classmethod
    def from_pairs(cls, rows, ctx):
        """Build from nested lists of ``(re, im)`` pairs.

        :rtype: GfqMatrix
        """
        arr = np.array(rows, dtype=np.int64)
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise DimensionMismatch("expected a rows × cols × 2 nested list")
        return cls(arr[:, :, 0], arr[:, :, 1], ctx)

    @classmethod
    def identity(cls, n, ctx):
        return cls(np.eye(n, dtype=np.int64), np.zeros((n, n), dtype=np.int64), ctx)

    @classmethod
    def zeros(cls, rows, cols, ctx):
        z = np.zeros((rows, cols), dtype=np.int64)
        return cls(z, z, ctx)

    @classmethod
    def random(cls, rows, cols, ctx, rng):
        """Uniform random matrix drawn from a ``numpy.random.Generator``."""
        return cls(rng.integers(0, ctx.p, size=(rows, cols)),
                   rng.integers(0, ctx.p, size=(rows, cols)), ctx)

    @property
    def shape(self):
        return self.re.shape

    @property
    def rows(self):
        return self.re.shape[0]

    @property
    def cols(self):
        return self.re.shape[1]

    def __getitem__(self, key):
        if isinstance(key, tuple) and all(isinstance(k, (int, np.integer)) for k in key):
            return GfqElem(int(self.re[key]), int(self.im[key]))
        return GfqMatrix(np.atleast_2d(self.re[key]), np.atleast_2d(self.im[key]), self.ctx)

    def __eq__(self, other):
        if not isinstance(other, GfqMatrix):
            return NotImplemented
        return (self.ctx == other.ctx and self.shape == other.shape
                and np.array_equal(self.re, other.re) and np.array_equal(self.im, other.im))

    def __repr__(self):
        return "GfqMatrix(p=%d, %r)" % (self.ctx.p, self.entries())

    def entries(self):
        return [[GfqElem(a, b) for a, b in zip(r, i)]
                for r, i in zip(self.re.tolist(), self.im.tolist())]

    def is_zero(self):
        return not (self.re.any() or self.im.any())


def _check_ctx(*mats):
    ctx = mats[0].ctx
    if any(m.ctx != ctx for m in mats[1:]):
        raise ValueError("matrices belong to different fields")


def mat_add(A, B, ctx):
    _check_ctx(A, B)
    if A.shape != B.shape:
        raise DimensionMismatch("cannot add %s and %s" % (A.shape, B.shape))
    return GfqMatrix(A.re + B.re, A.im + B.im, ctx)


def mat_neg(A, ctx):
    return GfqMatrix(-A.re, -A.im, ctx)


def mat_sub(A, B, ctx):
    return mat_add(A, mat_neg(B, ctx), ctx)


def mat_scale(c, A, ctx):
    """Multiply every entry of ``A`` by the field element ``c``."""
    return GfqMatrix(c[0] * A.re - c[1] * A.im, c[0] * A.im + c[1] * A.re, ctx)


def mat_mul(A, B, ctx):
    """Matrix product over GF(q).

    :raises DimensionMismatch: if ``A.cols != B.rows``
    """
    _check_ctx(A, B)
    if A.cols != B.rows:
        raise DimensionMismatch("cannot multiply %s by %s" % (A.shape, B.shape))
    p = ctx.p
    # Reduce each partial product before summing so int64 never overflows.
    rr = (A.re @ B.re) % p
    ii = (A.im @ B.im) % p
    ri = (A.re @ B.im) % p
    ir = (A.im @ B.re) % p
    return GfqMatrix(rr - ii, ri + ir, ctx)


def hstack(blocks, ctx):
    return GfqMatrix(np.hstack([b.re for b in blocks]), np.hstack([b.im for b in blocks]), ctx)


def vstack(blocks, ctx):
    return GfqMatrix(np.vstack([b.re for b in blocks]), np.vstack([b.im for b in blocks]), ctx)


def block_diag(blocks, ctx):
    rows = sum(b.rows for b in blocks)
    cols = sum(b.cols for b in blocks)
    re = np.zeros((rows, cols), dtype=np.int64)
    im = np.zeros((rows, cols), dtype=np.int64)
    r = c = 0
    for b in blocks:
        re[r:r + b.rows, c:c + b.cols] = b.re
        im[r:r + b.rows, c:c + b.cols] = b.im
        r += b.rows
        c += b.cols
    return GfqMatrix(re, im, ctx)


def _row_reduce(re, im, ctx, pivot_cols=None):
    """Reduced row echelon form in place.

    Only the first ``pivot_cols`` columns are used as pivot columns.

    :return: list of ``(row, col)`` pivot positions
    """
    p = ctx.p
    rows, cols = re.shape
    pivot_cols = cols if pivot_cols is None else pivot_cols
    pivots = []
    r = 0
    for c in range(pivot_cols):
        if r == rows:
            break
        nonzero = np.nonzero((re[r:, c] != 0) | (im[r:, c] != 0))[0]
        if nonzero.size == 0:
            continue
        i = r + nonzero[0]
        if i != r:
            re[[r, i]] = re[[i, r]]
            im[[r, i]] = im[[i, r]]
        s = inv((int(re[r, c]), int(im[r, c])), ctx)
        re[r], im[r] = (s[0] * re[r] - s[1] * im[r]) % p, (s[0] * im[r] + s[1] * re[r]) % p
        fr = re[:, c].copy()
        fi = im[:, c].copy()
        fr[r] = fi[r] = 0
        re -= np.outer(fr, re[r]) - np.outer(fi, im[r])
        im -= np.outer(fr, im[r]) + np.outer(fi, re[r])
        np.mod(re, p, out=re)
        np.mod(im, p, out=im)
        pivots.append((r, c))
        r += 1
    return pivots


def rank(A, ctx):
    """Rank of ``A`` over GF(q).

    :rtype: int
    """
    return len(_row_reduce(A.re.copy(), A.im.copy(), ctx))


def mat_inverse(A, ctx):
    """Gauss-Jordan inverse over GF(q).

    :param GfqMatrix A: square matrix
    :rtype: GfqMatrix
    :raises SingularMatrix: if ``A`` is not square or not invertible
    """
    n = A.rows
    if A.rows != A.cols:
        raise SingularMatrix("a %dx%d matrix has no inverse" % A.shape)
    re = np.hstack([A.re, np.eye(n, dtype=np.int64)])
    im = np.hstack([A.im, np.zeros((n, n), dtype=np.int64)])
    pivots = _row_reduce(re, im, ctx, pivot_cols=n)
    if len(pivots) < n:
        raise SingularMatrix("matrix is singular over GF(%d)" % ctx.q)
    return GfqMatrix(re[:, n:], im[:, n:], ctx)


def solve_left(A, v, ctx):
    """Solve ``u · A = v`` for the row vector ``u``.

    Free variables are set to zero.

    :param GfqMatrix A: k×n matrix
    :param GfqMatrix v: 1×n row vector
    :rtype: GfqMatrix
    :raises NotInRowSpace: if ``v`` is not in the row space of ``A``
    """
    if v.rows != 1 or v.cols != A.cols:
        raise DimensionMismatch("cannot solve u·A = v for A %s, v %s" % (A.shape, v.shape))
    k = A.rows
    re = np.hstack([A.re.T, v.re.T])
    im = np.hstack([A.im.T, v.im.T])
    pivots = _row_reduce(re, im, ctx, pivot_cols=k)
    rank_a = len(pivots)
    if re[rank_a:, k].any() or im[rank_a:, k].any():
        raise NotInRowSpace("vector is not a combination of the generator rows")
    u_re = np.zeros((1, k), dtype=np.int64)
    u_im = np.zeros((1, k), dtype=np.int64)
    for r, c in pivots:
        u_re[0, c] = re[r, k]
        u_im[0, c] = im[r, k]
    return GfqMatrix(u_re, u_im, ctx)


def reduce_mod_p(A, ctx):
    """``[A]_q``: componentwise reduction of a Gaussian-integer matrix.

    :param GaussianIntMatrix A: exact matrix over ℤ[j]
    :rtype: GfqMatrix
    """
    return GfqMatrix(A.re, A.im, ctx)


def lift(A):
    """The natural mapping ``g``: GfqMatrix to GaussianIntMatrix, entries in [0, p).

    :rtype: GaussianIntMatrix
    """
    return GaussianIntMatrix(A.re.copy(), A.im.copy())
