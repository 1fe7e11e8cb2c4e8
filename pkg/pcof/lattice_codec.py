"""Desk-scale Construction-A nested lattice codec.

The coarse lattice is ``scale·ℤ[j]ⁿ`` and the fine lattice is
``p⁻¹·g(𝒞)·scale + scale·ℤ[j]ⁿ`` for a linear code 𝒞 over GF(p²) with
generator ``gen``.  Every vector the codec produces lives on the grid
``δ·ℤ[j]ⁿ`` with ``δ = scale / (p·resolution)``; arithmetic runs on the
integer grid coordinates, so modulo reduction and membership tests are exact.
"""

from dataclasses import dataclass
import logging

import numpy as np

from pcof.alignment import coefficient_structure
from pcof.errors import DimensionMismatch, NotInFineLattice, SingularMatrix
from pcof.ff_network import (MessageBlock, recover_messages, relay_precoders,
                             source_precode)
from pcof.field_gfq import GfqMatrix, mat_mul, mat_neg, rank, solve_left, vstack
from pcof.lattice_reduce import GaussianIntMatrix

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 2 ** 16
GRID_TOLERANCE = 1e-6


@dataclass(frozen=True)
class NestedLatticeCode:
    """Construction-A code parameters.

    :param FieldCtx ctx: field context
    :param int n: block length
    :param int r: message dimension
    :param GfqMatrix gen: r×n generator of rank r
    :param float scale: side of the coarse lattice cell (``T = scale·I``)
    :param int resolution: even number of dither grid steps per fine step
    """

    ctx: object
    n: int
    r: int
    gen: GfqMatrix
    scale: float = None
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        if self.scale is None:
            object.__setattr__(self, "scale", float(self.ctx.p))
        if not self.scale > 0:
            raise ValueError("scale must be positive, got %r" % (self.scale,))
        if self.resolution < 2 or self.resolution % 2:
            raise ValueError("resolution must be an even integer ≥ 2")
        if self.gen.shape != (self.r, self.n):
            raise DimensionMismatch("generator must be %dx%d, got %s"
                                    % (self.r, self.n, self.gen.shape))
        if rank(self.gen, self.ctx) != self.r:
            raise SingularMatrix("generator does not have rank %d" % self.r)

    @property
    def step(self):
        """Grid spacing δ."""
        return self.scale / (self.ctx.p * self.resolution)

    @property
    def coarse_period(self):
        """Coarse lattice spacing in grid units."""
        return self.ctx.p * self.resolution


@dataclass(frozen=True)
class Codeword:
    vector: np.ndarray


@dataclass(frozen=True)
class Dither:
    vector: np.ndarray
    seed: object = None


def random_generator(ctx, n, r, seed):
    """Seeded uniformly random r×n generator of full rank r.

    :rtype: GfqMatrix
    """
    if r > n:
        raise DimensionMismatch("message dimension %d exceeds block length %d" % (r, n))
    rng = np.random.default_rng(seed)
    while True:
        gen = GfqMatrix.random(r, n, ctx, rng)
        if rank(gen, ctx) == r:
            return gen


def make_code(ctx, n=8, r=4, seed=0, scale=None):
    """Code with a seeded random generator; defaults ``n=8``, ``r=4``, ``scale=p``."""
    return NestedLatticeCode(ctx, n, r, random_generator(ctx, n, r, seed), scale)


def mod_lattice(x, code):
    """``x − Q_Λ(x)`` componentwise, landing in ``[−scale/2, scale/2)``.

    :param x: complex array
    :rtype: numpy.ndarray
    """
    x = np.asarray(x, dtype=complex)
    s = code.scale

    def reduce(v):
        return v - s * np.floor(v / s + 0.5)

    return reduce(x.real) + 1j * reduce(x.imag)


def _to_grid(x, code):
    x = np.asarray(x, dtype=complex)
    re, im = x.real / code.step, x.imag / code.step
    re_i, im_i = np.rint(re), np.rint(im)
    if np.any(np.abs(re - re_i) > GRID_TOLERANCE) or np.any(np.abs(im - im_i) > GRID_TOLERANCE):
        raise NotInFineLattice("vector is off the codec grid")
    return GaussianIntMatrix(re_i.astype(np.int64), im_i.astype(np.int64))


def _from_grid(g, code):
    return g.to_complex() * code.step


def _mod_grid(g, code):
    period = code.coarse_period
    half = period // 2
    return GaussianIntMatrix((g.re + half) % period - half, (g.im + half) % period - half)


def encode(w, code):
    """Natural labeling ``f(w) = [p⁻¹ g(wG) T] mod Λ``.

    :param GfqMatrix w: 1×r message row
    :rtype: Codeword
    """
    if w.shape != (1, code.r):
        raise DimensionMismatch("message must be 1x%d, got %s" % (code.r, w.shape))
    c = mat_mul(w, code.gen, code.ctx)
    g = GaussianIntMatrix(c.re * code.resolution, c.im * code.resolution)
    return Codeword(_from_grid(_mod_grid(g, code), code).reshape(-1))


def make_dither(code, seed):
    """Dither uniform on the grid points of the fundamental cell.

    :rtype: Dither
    """
    rng = np.random.default_rng(seed)
    half = code.coarse_period // 2
    g = GaussianIntMatrix(rng.integers(-half, half, size=(1, code.n)),
                          rng.integers(-half, half, size=(1, code.n)))
    return Dither(_from_grid(g, code).reshape(-1), seed)


def _vector(d):
    return d.vector if isinstance(d, (Dither, Codeword)) else np.asarray(d, dtype=complex)


def dither_encode(w, d, code):
    """``x = [f(w) + d] mod Λ``.

    :rtype: numpy.ndarray
    """
    t = _to_grid(encode(w, code).vector, code)
    return _from_grid(_mod_grid(t + _to_grid(_vector(d), code), code), code).reshape(-1)


def _as_column(v, length):
    if isinstance(v, GaussianIntMatrix):
        v = v.to_complex()
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.size != length:
        raise DimensionMismatch("vector has %d entries, expected %d" % (v.size, length))
    return v


def cof_receiver_map(Y, alpha, b, C, dithers, code):
    """CoF receiver mapping ``ŷ = [αᴴY − bᴴC·D] mod Λ``.

    Runs on exact grid coordinates when ``alpha`` has Gaussian-integer
    entries and ``Y`` lies on the grid; otherwise in floating point.

    :param Y: M×n observation
    :param alpha: receiver scaling, M entries
    :param b: Gaussian-integer coefficient vector, M entries
    :param GaussianIntMatrix C: M×K integer structure
    :param dithers: K dithers (or a K×n array)
    :rtype: numpy.ndarray
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=complex))
    M = C.rows
    if Y.shape != (M, code.n):
        raise DimensionMismatch("observation must be %dx%d, got %s" % (M, code.n, Y.shape))
    alpha = _as_column(alpha, M)
    b_row = GaussianIntMatrix.from_complex(_as_column(b, M).reshape(-1, 1)).H
    D = np.atleast_2d(np.array([_vector(d) for d in dithers], dtype=complex))
    if D.shape != (C.cols, code.n):
        raise DimensionMismatch("expected %d dithers of length %d" % (C.cols, code.n))
    weights = b_row @ C

    try:
        alpha_row = GaussianIntMatrix.from_complex(alpha.reshape(-1, 1)).H
        observed = alpha_row @ _to_grid(Y, code)
        y_hat = _mod_grid(observed - weights @ _to_grid(D, code), code)
        return _from_grid(y_hat, code).reshape(-1)
    except ValueError:
        pass
    y = alpha.conj() @ Y - weights.to_complex() @ D
    return mod_lattice(y.reshape(-1), code)


def decode_combination(y_hat, code):
    """Invert the natural labeling on a point of the fine lattice.

    :param y_hat: complex n-vector in Λ₁
    :rtype: GfqMatrix
    :raises NotInFineLattice: if ``y_hat`` is not in the fine lattice
    :raises NotInRowSpace: if its coset is not a codeword
    """
    g = _to_grid(np.asarray(y_hat).reshape(1, -1), code)
    if g.cols != code.n:
        raise DimensionMismatch("expected a vector of length %d" % code.n)
    if np.any(g.re % code.resolution) or np.any(g.im % code.resolution):
        raise NotInFineLattice("vector is not in the fine lattice")
    v = GfqMatrix(g.re // code.resolution, g.im // code.resolution, code.ctx)
    return solve_left(code.gen, v, code.ctx)


def codebook(code):
    """Every codeword of ``Λ₁ ∩ 𝒱_Λ``, one per message in GF(q)^r.

    :rtype: list[Codeword]
    """
    ctx = code.ctx
    words = []
    for index in range(ctx.q ** code.r):
        digits = []
        for _ in range(code.r):
            index, digit = divmod(index, ctx.q)
            digits.append(divmod(digit, ctx.p))
        w = GfqMatrix([[d[0] for d in digits]], [[d[1] for d in digits]], ctx)
        words.append(encode(w, code))
    return words


@dataclass(frozen=True)
class ChainResult:
    """Blocks decoded along the two-hop codec run.

    ``destination_2`` is what destination 2 decodes, i.e. ``−W2``.
    """

    relay_1: GfqMatrix
    relay_2: GfqMatrix
    destination_1: GfqMatrix
    destination_2: GfqMatrix

    def delivered(self, ctx):
        return self.destination_1, mat_neg(self.destination_2, ctx)


def _transmit(block, code, rng):
    """Dithered codewords of every row of ``block``."""
    X, D = [], []
    for row in range(block.rows):
        d = make_dither(code, int(rng.integers(2 ** 32)))
        X.append(dither_encode(block[row], d, code))
        D.append(d)
    return np.array(X), D


def _receive(C, B, X, D, code):
    """Noiseless integer channel ``Y = C·X`` followed by one CoF map per row of ``B``."""
    Y = _from_grid(C @ _to_grid(X, code), code)
    rows = []
    for row in range(B.rows):
        b = B.row(row).H
        rows.append(decode_combination(cof_receiver_map(Y, b, b, C, D, code), code))
    return vstack(rows, code.ctx)


def run_cof_chain(W, mats, code, seed=0):
    """Run the full two-hop network through the lattice codec.

    Sources precode over GF(q), transmit dithered codewords over the
    aligned integer channels, the relays decode and forward
    ``M_k·Ŵ_k``, and the destinations decode their combinations.

    :param MessageBlock W: M×r and (M−1)×r message blocks
    :param NetworkMatrices mats: integer matrices of both hops
    :param NestedLatticeCode code: desk-scale code with ``r`` matching ``W``
    :param seed: seed for the dithers
    :rtype: ChainResult
    """
    ctx = code.ctx
    M = W.M
    if W.W1.cols != code.r:
        raise DimensionMismatch("messages have %d symbols, code expects %d" % (W.W1.cols, code.r))
    rng = np.random.default_rng(seed)
    pre = relay_precoders(M, ctx)
    first = coefficient_structure(M, mats.A1, mats.A2)
    second = coefficient_structure(M, mats.A_R1, mats.A_R2)

    X, D = _transmit(source_precode(W, mats.A1, mats.A2, ctx).stacked(ctx), code, rng)
    relay_1 = recover_messages(_receive(first.C_R1, mats.B_R1, X, D, code), mats.B_R1, ctx)
    relay_2 = recover_messages(_receive(first.C_R2, mats.B_R2, X, D, code), mats.B_R2, ctx)[:M - 1]

    relayed = MessageBlock(mat_mul(pre.M1, relay_1, ctx), mat_mul(pre.M2, relay_2, ctx))
    X, D = _transmit(source_precode(relayed, mats.A_R1, mats.A_R2, ctx).stacked(ctx), code, rng)
    dest_1 = recover_messages(_receive(second.C_R1, mats.B_D1, X, D, code), mats.B_D1, ctx)
    dest_2 = recover_messages(_receive(second.C_R2, mats.B_D2, X, D, code), mats.B_D2, ctx)[:M - 1]
    logger.debug("codec chain finished for M=%d, r=%d", M, code.r)
    return ChainResult(relay_1, relay_2, dest_1, dest_2)
