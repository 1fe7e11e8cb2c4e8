"""Deterministic finite-field network induced by alignment.

After alignment and compute-and-forward decoding, each hop acts on message
blocks as the fixed system matrix

    Q = [[I_M,  Q12],
         [Q21,  I_{M-1}]]

over GF(q).  Relays precode with ``M1``/``M2`` so the two hops compose to
``diag(I, −I)``.
"""

from dataclasses import dataclass
import logging

import numpy as np

from pcof.alignment import coefficient_structure
from pcof.errors import DimensionMismatch, InvalidAntennaCount, SingularMatrix
from pcof.field_gfq import (GfqMatrix, block_diag, mat_inverse, mat_mul, mat_neg, mat_sub,
                            reduce_mod_p, vstack)
from pcof.lattice_reduce import GaussianIntMatrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SystemMatrix:
    M: int
    Q: GfqMatrix
    Q12: GfqMatrix
    Q21: GfqMatrix


@dataclass(frozen=True)
class RelayPrecoders:
    M1: GfqMatrix
    M2: GfqMatrix


@dataclass(frozen=True)
class MessageBlock:
    """Messages of both transmitters: ``W1`` is M×r, ``W2`` is (M−1)×r."""

    W1: GfqMatrix
    W2: GfqMatrix

    def __post_init__(self):
        if self.W2.rows != self.W1.rows - 1 or self.W1.cols != self.W2.cols:
            raise DimensionMismatch("message blocks must be M×r and (M−1)×r, got %s and %s"
                                    % (self.W1.shape, self.W2.shape))

    @property
    def M(self):
        return self.W1.rows

    def stacked(self, ctx):
        return vstack([self.W1, self.W2], ctx)


def _patterns(M, ctx):
    if M < 2:
        raise InvalidAntennaCount("need at least 2 antennas, got %d" % M)
    eye = np.eye(M - 1, dtype=np.int64)
    q12 = np.vstack([np.zeros((1, M - 1), dtype=np.int64), eye])
    q21 = np.hstack([eye, np.zeros((M - 1, 1), dtype=np.int64)])
    return (GfqMatrix(q12, np.zeros_like(q12), ctx),
            GfqMatrix(q21, np.zeros_like(q21), ctx))


def system_matrix(M, ctx):
    """The (2M−1)×(2M−1) system matrix; independent of the channel draw.

    :rtype: SystemMatrix
    :raises InvalidAntennaCount: if ``M < 2``
    """
    Q12, Q21 = _patterns(M, ctx)
    re = np.eye(2 * M - 1, dtype=np.int64)
    re[:M, M:] = Q12.re
    re[M:, :M] = Q21.re
    return SystemMatrix(M, GfqMatrix(re, np.zeros_like(re), ctx), Q12, Q21)


def relay_precoders(M, ctx):
    """``M1 = (I − Q12·Q21)⁻¹`` and ``M2 = −(I − Q21·Q12)⁻¹`` over GF(q).

    :rtype: RelayPrecoders
    """
    Q12, Q21 = _patterns(M, ctx)
    M1 = mat_inverse(mat_sub(GfqMatrix.identity(M, ctx), mat_mul(Q12, Q21, ctx), ctx), ctx)
    M2 = mat_neg(mat_inverse(mat_sub(GfqMatrix.identity(M - 1, ctx),
                                     mat_mul(Q21, Q12, ctx), ctx), ctx), ctx)
    return RelayPrecoders(M1, M2)


def end_to_end_matrix(sys, pre, ctx):
    """``Q · diag(M1, M2) · Q``; equals ``diag(I, −I)``.

    :rtype: GfqMatrix
    """
    if pre.M1.rows != sys.M or pre.M2.rows != sys.M - 1:
        raise DimensionMismatch("relay precoders do not match M=%d" % sys.M)
    relay = block_diag([pre.M1, pre.M2], ctx)
    return mat_mul(mat_mul(sys.Q, relay, ctx), sys.Q, ctx)


def source_precode(W, A1, A2, ctx):
    """``W'_k = [A_k]_q⁻¹ W_k`` for both transmitters.

    :param MessageBlock W: messages
    :param GaussianIntMatrix A1: M×M beamforming integer matrix
    :param GaussianIntMatrix A2: (M−1)×(M−1) beamforming integer matrix
    :rtype: MessageBlock
    :raises SingularMatrix: if ``[A_k]_q`` is singular
    """
    return MessageBlock(mat_mul(mat_inverse(reduce_mod_p(A1, ctx), ctx), W.W1, ctx),
                        mat_mul(mat_inverse(reduce_mod_p(A2, ctx), ctx), W.W2, ctx))


def recover_messages(U, B, ctx):
    """``[B]_q⁻¹ · U``.

    :param GfqMatrix U: decoded linear combinations, one per row
    :param GaussianIntMatrix B: receiver integer matrix
    :rtype: GfqMatrix
    :raises SingularMatrix: if ``[B]_q`` is singular
    """
    return mat_mul(mat_inverse(reduce_mod_p(B, ctx), ctx), U, ctx)


def select_invertible(candidates, ctx):
    """First integer matrix among ``candidates`` whose ``[·]_q`` is invertible.

    :param list[GaussianIntMatrix] candidates: ordered best first
    :rtype: GaussianIntMatrix
    :raises SingularMatrix: if every candidate is singular over GF(q)
    """
    for position, candidate in enumerate(candidates):
        try:
            mat_inverse(reduce_mod_p(candidate, ctx), ctx)
        except SingularMatrix:
            logger.debug("integer matrix %d singular over GF(%d), trying next", position, ctx.q)
            continue
        return candidate
    raise SingularMatrix("no candidate integer matrix is invertible over GF(%d)" % ctx.q)


def deterministic_hop(sys, block, ctx):
    """Message-level action of one hop: the receivers get ``Q · [W1; W2]``.

    Receiver 2 keeps the first M−1 rows of its M combinations.

    :rtype: tuple[GfqMatrix, GfqMatrix]
    """
    out = mat_mul(sys.Q, block.stacked(ctx), ctx)
    return out[:sys.M], out[sys.M:]


@dataclass(frozen=True)
class NetworkMatrices:
    """Integer matrices of the two hops.

    ``A_*`` are beamforming matrices of the transmitters, ``B_*`` the
    receiver matrices of the relays (``R1``, ``R2``) and destinations
    (``D1``, ``D2``).
    """

    A1: GaussianIntMatrix
    A2: GaussianIntMatrix
    A_R1: GaussianIntMatrix
    A_R2: GaussianIntMatrix
    B_R1: GaussianIntMatrix
    B_R2: GaussianIntMatrix
    B_D1: GaussianIntMatrix
    B_D2: GaussianIntMatrix

    @classmethod
    def identity(cls, M):
        I, J = GaussianIntMatrix.identity(M), GaussianIntMatrix.identity(M - 1)
        return cls(I, J, I, J, I, I, I, I)


def receiver_combinations(C, B, sources, ctx):
    """What a receiver decodes: ``[B]_q [C]_q`` applied to the stacked sources.

    :param GaussianIntMatrix C: M×(2M−1) aligned integer structure
    :param GaussianIntMatrix B: M×M receiver integer matrix
    :param GfqMatrix sources: (2M−1)×r stacked precoded messages
    :rtype: GfqMatrix
    """
    BC = mat_mul(reduce_mod_p(B, ctx), reduce_mod_p(C, ctx), ctx)
    return mat_mul(BC, sources, ctx)


def run_deterministic_network(W, mats, ctx, structures=None):
    """Drive both hops at message level and return what the destinations deliver.

    Receivers decode ``[B]_q[C]_q`` times the stacked precoded messages,
    invert ``[B]_q``, and the relays forward ``M_k·Ŵ_k`` precoded by their
    own ``[A]_q⁻¹``.  Destination 2 flips the sign back, so both outputs
    equal the sent messages.

    :param MessageBlock W: source messages
    :param NetworkMatrices mats: integer matrices of both hops
    :param structures: optional ``(first_hop, second_hop)`` pair of
        :class:`pcof.alignment.CoefficientStructure`; built from ``mats``
        when omitted
    :rtype: tuple[GfqMatrix, GfqMatrix]
    """
    M = W.M
    pre = relay_precoders(M, ctx)
    if structures is None:
        structures = (coefficient_structure(M, mats.A1, mats.A2),
                      coefficient_structure(M, mats.A_R1, mats.A_R2))
    first, second = structures

    sent = source_precode(W, mats.A1, mats.A2, ctx).stacked(ctx)
    W_hat_1 = recover_messages(receiver_combinations(first.C_R1, mats.B_R1, sent, ctx),
                               mats.B_R1, ctx)
    W_hat_2 = recover_messages(receiver_combinations(first.C_R2, mats.B_R2, sent, ctx),
                               mats.B_R2, ctx)[:M - 1]

    relayed = MessageBlock(mat_mul(pre.M1, W_hat_1, ctx), mat_mul(pre.M2, W_hat_2, ctx))
    sent = source_precode(relayed, mats.A_R1, mats.A_R2, ctx).stacked(ctx)
    out_1 = recover_messages(receiver_combinations(second.C_R1, mats.B_D1, sent, ctx),
                             mats.B_D1, ctx)
    out_2 = recover_messages(receiver_combinations(second.C_R2, mats.B_D2, sent, ctx),
                             mats.B_D2, ctx)[:M - 1]
    return out_1, mat_neg(out_2, ctx)
