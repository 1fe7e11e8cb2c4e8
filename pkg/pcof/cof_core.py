"""Compute-and-forward rate engine.

For a receiver observing ``H @ C @ T`` (codewords ``T``, integer matrix
``C``) the decoder of the combination ``bᴴC·T`` sees effective noise of
variance

    σ²(b) = bᴴ C (S⁻¹ I + Cᴴ Hᴴ H C)⁻¹ Cᴴ b

with ``S`` the lattice second moment ``snr_eff``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from pcof.errors import DimensionMismatch, SingularChannel
from pcof.lattice_reduce import GaussianIntMatrix, check_full_column_rank, reduce_basis

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class CofChannel:
    """Channel ``H`` (M×M), integer structure ``C`` (M×K) and ``snr_eff``."""

    H: np.ndarray
    C: GaussianIntMatrix
    snr_eff: float

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=complex))
        object.__setattr__(self, "H", H)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise DimensionMismatch("H must be square, got shape %s" % (H.shape,))
        if self.C.rows != H.shape[1]:
            raise DimensionMismatch("C has %d rows, H has %d columns" % (self.C.rows, H.shape[1]))
        if not self.snr_eff > 0:
            raise ValueError("snr_eff must be positive, got %r" % (self.snr_eff,))

    @property
    def M(self):
        return self.H.shape[0]

    @property
    def G(self):
        """Composite channel ``H @ C``."""
        return self.H @ self.C.to_complex()


@dataclass(frozen=True)
class CofResult:
    b: np.ndarray
    alpha: np.ndarray
    sigma_sq: float
    rate: float


def _as_vector(b, length):
    if isinstance(b, GaussianIntMatrix):
        b = b.to_complex()
    b = np.asarray(b, dtype=complex).reshape(-1)
    if b.size != length:
        raise DimensionMismatch("coefficient vector has %d entries, expected %d"
                                % (b.size, length))
    return b


def _inner_factor(ch):
    """Cholesky factor of ``S⁻¹I + GᴴG`` with the condition-number guard."""
    G = ch.G
    inner = np.eye(G.shape[1]) / ch.snr_eff + G.conj().T @ G
    if np.linalg.cond(inner) > CONDITION_LIMIT:
        raise SingularChannel("inner matrix condition number exceeds %g" % CONDITION_LIMIT)
    return linalg.cho_factor(inner, lower=True)


def effective_noise_variance(ch, b):
    """Effective-noise variance σ²(HC, b) at the MMSE scaling.

    :param CofChannel ch: channel
    :param b: Gaussian-integer coefficient vector with M entries
    :rtype: float
    """
    b = _as_vector(b, ch.M)
    if not b.any():
        return 0.0
    c = ch.C.H.to_complex() @ b
    value = np.real(np.vdot(c, linalg.cho_solve(_inner_factor(ch), c)))
    return max(float(value), 0.0)


def optimal_alpha(ch, b):
    """MMSE scaling vector ``α = H C (S⁻¹I + CᴴHᴴHC)⁻¹ Cᴴ b``.

    :rtype: numpy.ndarray
    """
    b = _as_vector(b, ch.M)
    if not b.any():
        return np.zeros(ch.M, dtype=complex)
    c = ch.C.H.to_complex() @ b
    return ch.G @ linalg.cho_solve(_inner_factor(ch), c)


def variance_at(ch, b, alpha):
    """Effective-noise variance for an arbitrary scaling ``alpha``.

    ``S·‖Cᴴb − Cᴴ Hᴴ α‖² + ‖α‖²``: self-interference plus scaled noise.
    """
    b = _as_vector(b, ch.M)
    alpha = _as_vector(alpha, ch.M)
    residual = ch.C.H.to_complex() @ b - ch.G.conj().T @ alpha
    return float(ch.snr_eff * np.vdot(residual, residual).real + np.vdot(alpha, alpha).real)


def exact_ifr_variance(H, b):
    """Noise amplification ``‖(H⁻¹)ᴴ b‖²`` of exact integer forcing.

    :raises SingularChannel: if ``H`` is singular within the guard
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    if H.shape[0] != H.shape[1]:
        raise DimensionMismatch("H must be square, got shape %s" % (H.shape,))
    if np.linalg.cond(H) > CONDITION_LIMIT:
        raise SingularChannel("channel condition number exceeds %g" % CONDITION_LIMIT)
    b = _as_vector(b, H.shape[0])
    x = np.linalg.solve(H.conj().T, b)
    return float(np.vdot(x, x).real)


def rate_from_variance(snr_eff, sigma_sq):
    if sigma_sq <= 0:
        return np.inf
    return max(float(np.log2(snr_eff / sigma_sq)), 0.0)


def computation_rate(ch, b):
    """``log⁺₂(snr_eff / σ²)`` in bits per complex channel use.

    A zero coefficient vector has zero effective noise and rate ``inf``.
    """
    return rate_from_variance(ch.snr_eff, effective_noise_variance(ch, b))


def computation_result(ch, b):
    """Every quantity of one computation in a :class:`CofResult`."""
    sigma_sq = effective_noise_variance(ch, b)
    return CofResult(_as_vector(b, ch.M), optimal_alpha(ch, b), sigma_sq,
                     rate_from_variance(ch.snr_eff, sigma_sq))


def computation_rate_matrix(ch, B):
    """Smallest computation rate over the rows ``b_ℓᴴ`` of ``B``.

    :param GaussianIntMatrix B: coefficient matrix with M columns
    :rtype: float
    """
    if B.cols != ch.M:
        raise DimensionMismatch("B has %d columns, channel has %d antennas" % (B.cols, ch.M))
    rows = B.H.to_complex()
    return min(computation_rate(ch, rows[:, k]) for k in range(B.rows))


def noise_gram(ch):
    """``Φ = C (S⁻¹I + GᴴG)⁻¹ Cᴴ`` so that σ²(b) = bᴴΦb."""
    Ch = ch.C.H.to_complex()
    phi = Ch.conj().T @ linalg.cho_solve(_inner_factor(ch), Ch)
    return (phi + phi.conj().T) / 2


def _sorted_rows(transform, basis):
    """``Uᴴ`` with rows ordered by increasing ``‖basis @ u‖²``."""
    norms = np.sum(np.abs(basis @ transform.to_complex()) ** 2, axis=0)
    order = np.argsort(norms, kind="stable")
    return transform[:, order].H


def _ranked(basis, transforms, objective):
    """Distinct transforms ordered by the score of ``basis @ U``, best first."""
    scored = []
    for position, U in enumerate(transforms):
        if any(U == other for _, _, other in scored):
            continue
        norms = np.sum(np.abs(basis @ U.to_complex()) ** 2, axis=0)
        if objective == "sum":
            score = (float(np.sum(norms)), float(np.max(norms)))
        else:
            score = (float(np.max(norms)), float(np.sum(norms)))
        scored.append((score, position, U))
    scored.sort(key=lambda item: item[:2])
    return [U for _, _, U in scored]


def candidate_B_matrices(ch, strategy="schnorr_euchner"):
    """Receiver integer matrices from refined, LLL-only and identity bases, best first.

    Each candidate is unimodular, so its rows are linearly independent.

    :rtype: list[GaussianIntMatrix]
    """
    phi = noise_gram(ch)
    try:
        L = linalg.cholesky(phi, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularChannel("noise Gram matrix is not positive definite") from exc
    basis = L.conj().T
    lll, refined = reduce_basis(basis, objective="max", strategy=strategy)
    transforms = [refined.transform, lll.transform, GaussianIntMatrix.identity(ch.M)]
    return [_sorted_rows(U, basis) for U in _ranked(basis, transforms, "max")]


def optimize_B(ch, strategy="schnorr_euchner"):
    """Full-rank receiver matrix minimising the largest effective noise.

    :param CofChannel ch: channel
    :rtype: GaussianIntMatrix
    """
    return candidate_B_matrices(ch, strategy)[0]


def candidate_A_matrices(V, strategy="schnorr_euchner"):
    """Beamforming integer matrices from refined, LLL-only and identity bases, best first.

    :rtype: list[GaussianIntMatrix]
    """
    V = check_full_column_rank(V)
    lll, refined = reduce_basis(V, objective="sum", strategy=strategy)
    transforms = [refined.transform, lll.transform, GaussianIntMatrix.identity(V.shape[1])]
    return _ranked(V, transforms, "sum")


def optimize_A(V, strategy="schnorr_euchner"):
    """Unimodular ``A`` minimising the power penalty ``tr(V A Aᴴ Vᴴ)``.

    :param numpy.ndarray V: precoder with independent columns
    :rtype: GaussianIntMatrix
    :raises RankDeficient: if the columns of ``V`` are dependent
    """
    return candidate_A_matrices(V, strategy)[0]


def power_penalty(V, A):
    """``tr(V A Aᴴ Vᴴ)``."""
    VA = np.asarray(V) @ A.to_complex()
    return float(np.sum(np.abs(VA) ** 2))
