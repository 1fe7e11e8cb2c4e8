"""Signal-alignment precoders for one hop of the 2×2×2 network.

Transmitter 1 sends M streams through ``V1`` and transmitter 2 sends M−1
streams through ``V2``.  The columns are chained so that

    F11 v1[k+1] = F12 v2[k]    and    F21 v1[k] = F22 v2[k],

which makes both receivers see integer combinations of the streams.
"""

from dataclasses import dataclass
import logging

import numpy as np

from pcof.cof_core import CONDITION_LIMIT, power_penalty
from pcof.errors import (AlignmentDegenerate, DimensionMismatch, InvalidAntennaCount,
                         SingularChannel, ZeroTrace)
from pcof.lattice_reduce import RANK_TOLERANCE, GaussianIntMatrix

logger = logging.getLogger(__name__)

ALIGNMENT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class HopChannel:
    """Four M×M channels of one hop; ``Fjk`` goes from transmitter k to receiver j."""

    F11: np.ndarray
    F12: np.ndarray
    F21: np.ndarray
    F22: np.ndarray

    def __post_init__(self):
        shapes = set()
        for name in ("F11", "F12", "F21", "F22"):
            value = np.atleast_2d(np.asarray(getattr(self, name), dtype=complex))
            object.__setattr__(self, name, value)
            shapes.add(value.shape)
        if len(shapes) != 1:
            raise DimensionMismatch("hop channels differ in shape: %s" % sorted(shapes))
        (rows, cols), = shapes
        if rows != cols:
            raise DimensionMismatch("hop channels must be square, got %dx%d" % (rows, cols))

    @property
    def M(self):
        return self.F11.shape[0]

    def channel(self, receiver, transmitter):
        return getattr(self, "F%d%d" % (receiver, transmitter))


@dataclass(frozen=True)
class AlignmentSet:
    V1: np.ndarray
    V2: np.ndarray
    H_R1: np.ndarray
    H_R2: np.ndarray
    residual: float

    def H_R(self, relay_index):
        return self.H_R1 if relay_index == 1 else self.H_R2


@dataclass(frozen=True)
class CoefficientStructure:
    """Integer structure seen by the two receivers of a hop."""

    C12: GaussianIntMatrix
    C22: GaussianIntMatrix
    C_R1: GaussianIntMatrix
    C_R2: GaussianIntMatrix

    def C_R(self, relay_index):
        return self.C_R1 if relay_index == 1 else self.C_R2


def coefficient_patterns(M):
    """``C12 = [0; I]`` and ``C22 = [I; 0]``, both M×(M−1).

    :rtype: tuple[GaussianIntMatrix, GaussianIntMatrix]
    """
    if M < 2:
        raise InvalidAntennaCount("need at least 2 antennas, got %d" % M)
    eye = np.eye(M - 1, dtype=np.int64)
    zero_row = np.zeros((1, M - 1), dtype=np.int64)
    return (GaussianIntMatrix(np.vstack([zero_row, eye])),
            GaussianIntMatrix(np.vstack([eye, zero_row])))


def coefficient_structure(M, A1, A2):
    """``C_R1 = [A1 | C12·A2]`` and ``C_R2 = [A1 | C22·A2]``.

    :rtype: CoefficientStructure
    """
    if A1.shape != (M, M) or A2.shape != (M - 1, M - 1):
        raise DimensionMismatch("A1 must be %dx%d and A2 %dx%d, got %s and %s"
                                % (M, M, M - 1, M - 1, A1.shape, A2.shape))
    C12, C22 = coefficient_patterns(M)
    return CoefficientStructure(C12, C22,
                                GaussianIntMatrix.hstack([A1, C12 @ A2]),
                                GaussianIntMatrix.hstack([A1, C22 @ A2]))


def _check_conditioning(hop):
    for name in ("F11", "F12", "F21", "F22"):
        if np.linalg.cond(getattr(hop, name)) > CONDITION_LIMIT:
            raise SingularChannel("%s condition number exceeds %g" % (name, CONDITION_LIMIT))


def alignment_residual(hop, V1, V2):
    """Largest violation of the two alignment conditions, relative to the signal size."""
    violations = [0.0]
    scale = 0.0
    for k in range(V2.shape[1]):
        lhs, rhs = hop.F11 @ V1[:, k + 1], hop.F12 @ V2[:, k]
        violations.append(np.linalg.norm(lhs - rhs))
        scale = max(scale, np.linalg.norm(lhs), np.linalg.norm(rhs))
        lhs, rhs = hop.F21 @ V1[:, k], hop.F22 @ V2[:, k]
        violations.append(np.linalg.norm(lhs - rhs))
        scale = max(scale, np.linalg.norm(lhs), np.linalg.norm(rhs))
    return float(max(violations) / scale) if scale > 0 else 0.0


def build_precoders(hop, seed_vector=None):
    """Chain construction of the aligned precoders.

    Starting from ``v2[0] = seed_vector`` and ``v1[0] = F21⁻¹ F22 v2[0]``, alternately
    ``v1[k+1] = F11⁻¹ F12 v2[k]`` and ``v2[k+1] = F22⁻¹ F21 v1[k+1]``.  Every column of
    ``V1`` is then one channel ratio away from a column of ``V2``.

    :param HopChannel hop: channels of the hop
    :param seed_vector: nonzero complex M-vector, all-ones by default
    :rtype: AlignmentSet
    :raises AlignmentDegenerate: if ``V1`` or ``V2`` loses rank
    :raises SingularChannel: if a channel is singular within the guard
    """
    M = hop.M
    if M < 2:
        raise InvalidAntennaCount("need at least 2 antennas, got %d" % M)
    seed = np.ones(M, dtype=complex) if seed_vector is None \
        else np.asarray(seed_vector, dtype=complex).reshape(-1)
    if seed.size != M:
        raise DimensionMismatch("seed vector has %d entries, expected %d" % (seed.size, M))
    if not seed.any():
        raise AlignmentDegenerate("seed vector is zero")
    _check_conditioning(hop)

    v2 = [seed]
    v1 = [np.linalg.solve(hop.F21, hop.F22 @ seed)]
    while True:
        v1.append(np.linalg.solve(hop.F11, hop.F12 @ v2[-1]))
        if len(v1) == M:
            break
        v2.append(np.linalg.solve(hop.F22, hop.F21 @ v1[-1]))
    V1 = np.column_stack(v1)
    V2 = np.column_stack(v2)

    for name, V in (("V1", V1), ("V2", V2)):
        s = np.linalg.svd(V, compute_uv=False)
        if not np.all(np.isfinite(s)) or s[0] == 0 or s[-1] / s[0] < RANK_TOLERANCE:
            raise AlignmentDegenerate("%s is rank deficient" % name)

    residual = alignment_residual(hop, V1, V2)
    if residual >= ALIGNMENT_TOLERANCE:
        raise AlignmentDegenerate("alignment residual %g exceeds tolerance" % residual)
    logger.debug("aligned precoders built, residual %.3g", residual)
    return AlignmentSet(V1, V2, hop.F11 @ V1, hop.F21 @ V1, residual)


def aligned_channel(hop, aset, A1, A2, relay_index):
    """Factorisation ``H_Rk · C_Rk`` of receiver ``relay_index``'s observation.

    :param HopChannel hop: channels of the hop
    :param AlignmentSet aset: precoders from :func:`build_precoders`
    :param GaussianIntMatrix A1: M×M beamforming integer matrix of transmitter 1
    :param GaussianIntMatrix A2: (M−1)×(M−1) integer matrix of transmitter 2
    :param int relay_index: 1 or 2
    :rtype: tuple[numpy.ndarray, GaussianIntMatrix]
    """
    if relay_index not in (1, 2):
        raise ValueError("relay_index must be 1 or 2, got %r" % (relay_index,))
    structure = coefficient_structure(hop.M, A1, A2)
    return aset.H_R(relay_index), structure.C_R(relay_index)


def snr_eff(V, A, snr, M):
    """``M·snr / tr(V A Aᴴ Vᴴ)``: the lattice second moment meeting the power limit.

    :raises ZeroTrace: if the power penalty vanishes
    """
    trace = power_penalty(V, A)
    if not trace > 0 or not np.isfinite(trace):
        raise ZeroTrace("precoder power penalty is %r" % (trace,))
    return M * snr / trace


def shared_snr_eff(penalties, snr, M):
    """Common lattice second moment when the two transmitters swap roles between slots.

    ``penalties`` holds one ``(tr(V1 A1 A1ᴴ V1ᴴ), tr(V2 A2 A2ᴴ V2ᴴ))`` pair per
    labelling.  In the second labelling physical transmitter 2 carries the M
    streams, so each transmitter meets the power limit on its average over the
    slots.  With a single labelling this is ``min_k snr_eff(V_k, A_k)``.

    :param penalties: one or two pairs of power penalties
    :param float snr: linear SNR
    :param int M: antennas per node
    :rtype: float
    :raises ZeroTrace: if a power penalty vanishes
    """
    penalties = np.asarray(penalties, dtype=float).reshape(-1, 2)
    if len(penalties) not in (1, 2):
        raise ValueError("expected one or two labellings, got %d" % len(penalties))
    if not np.all(penalties > 0) or not np.all(np.isfinite(penalties)):
        raise ZeroTrace("precoder power penalties are %r" % (penalties.tolist(),))
    # Column j is physical transmitter j; the second labelling swaps roles.
    physical = penalties[0].copy()
    if len(penalties) == 2:
        physical = 0.5 * (physical + penalties[1][::-1])
    return M * snr / physical.max()
