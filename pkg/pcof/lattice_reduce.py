"""Basis reduction for lattices over the Gaussian integers.

Lattices are generated by the columns of a complex matrix ``V`` and
their points are ``V @ z`` with ``z`` a vector of Gaussian integers.
Reduction returns an exact unimodular transform ``U`` next to the
floating-point reduced basis ``V @ U``.
"""

from dataclasses import dataclass
from itertools import combinations
import logging
import math

import numpy as np

from pcof.errors import DimensionMismatch, NonSquare, RankDeficient

logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-9
UNITS = ((1, 0), (0, 1), (-1, 0), (0, -1))
ENUMERATION_STRATEGIES = ("schnorr_euchner", "pohst")


class GaussianIntMatrix(object):
    """Matrix over ℤ[j], stored as two exact int64 arrays."""

    __hash__ = None

    def __init__(self, re, im=None):
        re = np.array(re, dtype=np.int64, ndmin=2)
        im = np.zeros_like(re) if im is None else np.array(im, dtype=np.int64, ndmin=2)
        if re.ndim != 2 or re.shape != im.shape:
            raise DimensionMismatch("real and imaginary parts differ in shape: %s, %s"
                                    % (re.shape, im.shape))
        self.re = re
        self.im = im

    @classmethod
    def from_complex(cls, values):
        """Build from (nested lists of) integral complex numbers.

        :param values: array-like of complex numbers with integer parts
        :rtype: GaussianIntMatrix
        :raises ValueError: if an entry is not a Gaussian integer
        """
        arr = np.array(values, dtype=complex, ndmin=2)
        re, im = np.rint(arr.real), np.rint(arr.imag)
        if not (np.array_equal(re, arr.real) and np.array_equal(im, arr.imag)):
            raise ValueError("entries are not Gaussian integers")
        return cls(re.astype(np.int64), im.astype(np.int64))

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n, dtype=np.int64))

    @classmethod
    def zeros(cls, rows, cols):
        return cls(np.zeros((rows, cols), dtype=np.int64))

    @classmethod
    def hstack(cls, blocks):
        return cls(np.hstack([b.re for b in blocks]), np.hstack([b.im for b in blocks]))

    @classmethod
    def vstack(cls, blocks):
        return cls(np.vstack([b.re for b in blocks]), np.vstack([b.im for b in blocks]))

    @property
    def shape(self):
        return self.re.shape

    @property
    def rows(self):
        return self.re.shape[0]

    @property
    def cols(self):
        return self.re.shape[1]

    @property
    def H(self):
        """Conjugate transpose."""
        return GaussianIntMatrix(self.re.T.copy(), -self.im.T)

    @property
    def T(self):
        return GaussianIntMatrix(self.re.T.copy(), self.im.T.copy())

    def to_complex(self):
        return self.re.astype(float) + 1j * self.im.astype(float)

    def column(self, k):
        return GaussianIntMatrix(self.re[:, [k]], self.im[:, [k]])

    def row(self, k):
        return GaussianIntMatrix(self.re[[k], :], self.im[[k], :])

    def __getitem__(self, key):
        return GaussianIntMatrix(np.atleast_2d(self.re[key]), np.atleast_2d(self.im[key]))

    def __eq__(self, other):
        if not isinstance(other, GaussianIntMatrix):
            return NotImplemented
        return (self.shape == other.shape and np.array_equal(self.re, other.re)
                and np.array_equal(self.im, other.im))

    def __neg__(self):
        return GaussianIntMatrix(-self.re, -self.im)

    def __add__(self, other):
        self._check_same_shape(other)
        return GaussianIntMatrix(self.re + other.re, self.im + other.im)

    def __sub__(self, other):
        self._check_same_shape(other)
        return GaussianIntMatrix(self.re - other.re, self.im - other.im)

    def __mul__(self, scalar):
        """Multiply by a Gaussian-integer scalar given as int or complex."""
        c = complex(scalar)
        cr, ci = int(round(c.real)), int(round(c.imag))
        if cr != c.real or ci != c.imag:
            raise ValueError("scalar %r is not a Gaussian integer" % (scalar,))
        return GaussianIntMatrix(cr * self.re - ci * self.im, cr * self.im + ci * self.re)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, GaussianIntMatrix):
            if self.cols != other.rows:
                raise DimensionMismatch("cannot multiply %s by %s" % (self.shape, other.shape))
            return GaussianIntMatrix(self.re @ other.re - self.im @ other.im,
                                     self.re @ other.im + self.im @ other.re)
        return self.to_complex() @ np.asarray(other)

    def __rmatmul__(self, other):
        return np.asarray(other) @ self.to_complex()

    def __repr__(self):
        return "GaussianIntMatrix(%r)" % (self.to_complex().tolist(),)

    def _check_same_shape(self, other):
        if self.shape != other.shape:
            raise DimensionMismatch("shape %s differs from %s" % (self.shape, other.shape))

    def entries(self):
        """Entries as nested lists of ``(re, im)`` Python-int pairs."""
        return [list(zip(r, i)) for r, i in zip(self.re.tolist(), self.im.tolist())]

    def determinant(self):
        """Exact determinant as an ``(re, im)`` pair of Python ints.

        Fraction-free Bareiss elimination; every division is exact in ℤ[j].

        :raises NonSquare: if the matrix is not square
        """
        if self.rows != self.cols:
            raise NonSquare("determinant of a %dx%d matrix" % self.shape)
        return _bareiss_determinant(self.entries())


def _g_mul(a, b):
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def _g_sub(a, b):
    return (a[0] - b[0], a[1] - b[1])


def _g_div_exact(a, b):
    norm = b[0] * b[0] + b[1] * b[1]
    num = _g_mul(a, (b[0], -b[1]))
    if num[0] % norm or num[1] % norm:
        raise ArithmeticError("inexact Gaussian-integer division")
    return (num[0] // norm, num[1] // norm)


def _g_div_round(a, b):
    norm = b[0] * b[0] + b[1] * b[1]
    num = _g_mul(a, (b[0], -b[1]))
    return ((2 * num[0] + norm) // (2 * norm), (2 * num[1] + norm) // (2 * norm))


def gaussian_gcd(a, b):
    """Greatest common divisor in ℤ[j], up to a unit."""
    while b != (0, 0):
        q = _g_div_round(a, b)
        a, b = b, _g_sub(a, _g_mul(q, b))
    return a


def _bareiss_determinant(m):
    n = len(m)
    if n == 0:
        return (1, 0)
    m = [list(row) for row in m]
    sign = 1
    prev = (1, 0)
    for k in range(n - 1):
        if m[k][k] == (0, 0):
            swap = next((i for i in range(k + 1, n) if m[i][k] != (0, 0)), None)
            if swap is None:
                return (0, 0)
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = _g_sub(_g_mul(m[i][j], m[k][k]), _g_mul(m[i][k], m[k][j]))
                m[i][j] = _g_div_exact(num, prev)
        prev = m[k][k]
    det = m[n - 1][n - 1]
    return (sign * det[0], sign * det[1])


def is_unimodular(U):
    """Whether ``det(U)`` is one of the units ±1, ±j.

    :param GaussianIntMatrix U: square matrix
    :rtype: bool
    :raises NonSquare: if ``U`` is not square
    """
    return U.determinant() in UNITS


def is_primitive(Z):
    """Whether the columns of ``Z`` extend to a basis of ℤ[j]ⁿ.

    True iff the gcd of all maximal minors is a unit.

    :param GaussianIntMatrix Z: n×k coefficient matrix, k ≤ n
    :rtype: bool
    """
    n, k = Z.shape
    if k > n:
        return False
    entries = Z.entries()
    g = (0, 0)
    for rows in combinations(range(n), k):
        minor = _bareiss_determinant([[entries[r][c] for c in range(k)] for r in rows])
        g = gaussian_gcd(minor, g)
        if g[0] * g[0] + g[1] * g[1] == 1:
            return True
    return False


@dataclass(frozen=True)
class ReductionResult:
    """A reduced basis and the exact transform that produced it.

    ``reduced_basis`` equals ``input_basis @ transform.to_complex()`` and
    ``objective`` is the sum of squared column norms of ``reduced_basis``.
    """

    reduced_basis: np.ndarray
    transform: GaussianIntMatrix
    objective: float

    @property
    def column_norms_sq(self):
        return np.sum(np.abs(self.reduced_basis) ** 2, axis=0)

    @property
    def max_norm_sq(self):
        return float(np.max(self.column_norms_sq))

    def score(self, objective="sum"):
        """Comparison key for ``"sum"`` or ``"max"`` objectives (lower is better)."""
        norms = self.column_norms_sq
        if objective == "sum":
            return (float(np.sum(norms)), float(np.max(norms)))
        if objective == "max":
            return (float(np.max(norms)), float(np.sum(norms)))
        raise ValueError("unknown objective %r" % (objective,))


def make_result(basis, transform):
    """Apply ``transform`` to ``basis`` and package the outcome.

    :param numpy.ndarray basis: complex lattice basis (columns)
    :param GaussianIntMatrix transform: unimodular transform
    :rtype: ReductionResult
    """
    reduced = np.asarray(basis, dtype=complex) @ transform.to_complex()
    return ReductionResult(reduced, transform, float(np.sum(np.abs(reduced) ** 2)))


def check_full_column_rank(basis, error=RankDeficient):
    basis = np.asarray(basis, dtype=complex)
    if basis.ndim != 2 or basis.shape[1] == 0 or basis.shape[0] < basis.shape[1]:
        raise error("basis of shape %s cannot have full column rank" % (basis.shape,))
    s = np.linalg.svd(basis, compute_uv=False)
    if not np.all(np.isfinite(s)) or s[0] == 0 or s[-1] / s[0] < RANK_TOLERANCE:
        raise error("basis columns are linearly dependent")
    return basis


def lll_reduce(basis, delta=0.75):
    """Complex LLL reduction of the columns of ``basis``.

    :param numpy.ndarray basis: complex m×n matrix with full column rank
    :param float delta: Lovász parameter in (0.25, 1]
    :rtype: ReductionResult
    :raises RankDeficient: if the columns are dependent within tolerance
    """
    if not 0.25 < delta <= 1:
        raise ValueError("delta must lie in (0.25, 1], got %r" % (delta,))
    basis = check_full_column_rank(basis)
    n = basis.shape[1]

    work = basis.copy()
    u_re = np.eye(n, dtype=np.int64)
    u_im = np.zeros((n, n), dtype=np.int64)
    _, r = np.linalg.qr(work)

    k = 1
    iterations = 0
    max_iterations = 10000 * n * n
    while k < n:
        iterations += 1
        if iterations > max_iterations:
            logger.warning("LLL stopped after %d iterations", iterations)
            break
        for j in range(k - 1, -1, -1):
            mu = r[j, k] / r[j, j]
            cr, ci = int(np.rint(mu.real)), int(np.rint(mu.imag))
            if cr == 0 and ci == 0:
                continue
            c = complex(cr, ci)
            work[:, k] -= c * work[:, j]
            r[:, k] -= c * r[:, j]
            new_re = u_re[:, k] - (cr * u_re[:, j] - ci * u_im[:, j])
            new_im = u_im[:, k] - (cr * u_im[:, j] + ci * u_re[:, j])
            u_re[:, k], u_im[:, k] = new_re, new_im

        lhs = abs(r[k, k]) ** 2 + abs(r[k - 1, k]) ** 2
        if lhs >= delta * abs(r[k - 1, k - 1]) ** 2:
            k += 1
        else:
            swap = [k, k - 1]
            work[:, [k - 1, k]] = work[:, swap]
            u_re[:, [k - 1, k]] = u_re[:, swap]
            u_im[:, [k - 1, k]] = u_im[:, swap]
            _, r = np.linalg.qr(work)
            k = max(k - 1, 1)

    return make_result(basis, GaussianIntMatrix(u_re, u_im))


def _real_embedding(basis):
    return np.block([[basis.real, -basis.imag], [basis.imag, basis.real]])


def _level_candidates(center, half_width, strategy):
    """Integer values within ``half_width`` of ``center`` in visit order."""
    lo = math.ceil(center - half_width)
    hi = math.floor(center + half_width)
    if lo > hi:
        return
    if strategy == "pohst":
        for x in range(lo, hi + 1):
            yield x
        return
    # Schnorr-Euchner zig-zag around the nearest integer.
    x0 = int(math.floor(center + 0.5))
    x0 = min(max(x0, lo), hi)
    yield x0
    step = 1
    up_first = center >= x0
    while x0 - step >= lo or x0 + step <= hi:
        order = (x0 + step, x0 - step) if up_first else (x0 - step, x0 + step)
        for x in order:
            if lo <= x <= hi:
                yield x
        step += 1


def enumerate_short_vectors(basis, radius_sq, strategy="schnorr_euchner", limit=4096):
    """All nonzero coefficient vectors ``z`` with ``‖basis @ z‖² ≤ radius_sq``.

    The search runs on the real embedding of the lattice.  When more than
    ``limit`` points are found the radius shrinks to keep the ``limit``
    shortest ones.

    :param numpy.ndarray basis: complex m×n basis with full column rank
    :param float radius_sq: squared search radius
    :param str strategy: ``"schnorr_euchner"`` or ``"pohst"``
    :param int limit: maximum number of points kept
    :return: list of ``(norm_sq, complex coefficient tuple)``
    :rtype: list[tuple[float, tuple[complex]]]
    """
    if strategy not in ENUMERATION_STRATEGIES:
        raise ValueError("unknown enumeration strategy %r" % (strategy,))
    basis = np.asarray(basis, dtype=complex)
    n = basis.shape[1]
    if radius_sq <= 0:
        return []
    _, r = np.linalg.qr(_real_embedding(basis))
    dim = 2 * n
    diag_sq = np.diag(r) ** 2
    x = np.zeros(dim)
    found = []
    state = {"radius_sq": radius_sq * (1 + 1e-12)}

    def shrink():
        found.sort(key=lambda item: item[0])
        del found[limit:]
        state["radius_sq"] = found[-1][0] * (1 + 1e-12)
        logger.debug("enumeration truncated to %d points", limit)

    def search(level, partial):
        center = -np.dot(r[level, level + 1:], x[level + 1:]) / r[level, level]
        half_width = math.sqrt(max(state["radius_sq"] - partial, 0.0) / diag_sq[level])
        for value in _level_candidates(center, half_width, strategy):
            dist = partial + diag_sq[level] * (value - center) ** 2
            if dist > state["radius_sq"]:
                continue
            x[level] = value
            if level == 0:
                if dist > 0 and np.any(x):
                    z = tuple(complex(a, b) for a, b in zip(x[:n], x[n:]))
                    found.append((float(dist), z))
                    if len(found) > 2 * limit:
                        shrink()
            else:
                search(level - 1, dist)
        x[level] = 0

    search(dim - 1, 0.0)
    if len(found) > limit:
        shrink()
    return found


def canonical_unit_multiple(z):
    """Representative of ``{u·z : u ∈ {±1, ±j}}``.

    The first nonzero coefficient is rotated to have positive real part
    and nonnegative imaginary part.
    """
    lead = next(c for c in z if c != 0)
    for unit in (1, 1j, -1, -1j):
        w = lead * unit
        if w.real > 0 and w.imag >= 0:
            return tuple(c * unit for c in z)
    raise ArithmeticError("no unit rotation found for %r" % (lead,))


def _candidate_key(norm_sq, z):
    return (float("%.12g" % norm_sq), tuple(c.real for c in z), tuple(c.imag for c in z))


def _score(norms, objective):
    if objective == "sum":
        return (sum(norms), max(norms))
    return (max(norms), sum(norms))


def _lower_bound(chosen_sum, next_norm, remaining, objective):
    total = chosen_sum + remaining * next_norm
    if objective == "sum":
        return (total, next_norm)
    return (next_norm, total)


def _select_basis(candidates, n, objective, incumbent, node_budget):
    """Best primitive n-subset of ``candidates`` (sorted by norm).

    Greedy first, then depth-first branch and bound seeded with the best
    of greedy and ``incumbent``.
    """
    norms = [c[0] for c in candidates]
    vectors = [c[1] for c in candidates]

    def matrix(indices):
        return GaussianIntMatrix.from_complex(np.array([vectors[i] for i in indices]).T)

    greedy = []
    for i in range(len(candidates)):
        if is_primitive(matrix(greedy + [i])):
            greedy.append(i)
            if len(greedy) == n:
                break

    best_score, best = incumbent, None
    if len(greedy) == n:
        greedy_score = _score([norms[i] for i in greedy], objective)
        if greedy_score < best_score:
            best_score, best = greedy_score, greedy

    budget = {"nodes": 0}

    def branch(chosen, chosen_sum, start):
        nonlocal best_score, best
        if len(chosen) == n:
            score = _score([norms[i] for i in chosen], objective)
            if score < best_score:
                best_score, best = score, list(chosen)
            return
        remaining = n - len(chosen)
        for i in range(start, len(candidates) - remaining + 1):
            budget["nodes"] += 1
            if budget["nodes"] > node_budget:
                return
            if _lower_bound(chosen_sum, norms[i], remaining, objective) >= best_score:
                return
            if is_primitive(matrix(chosen + [i])):
                branch(chosen + [i], chosen_sum + norms[i], i + 1)

    branch([], 0.0, 0)
    if budget["nodes"] > node_budget:
        logger.debug("basis selection stopped at node budget %d", node_budget)
    return None if best is None else matrix(best)


def refine_enumeration(result, radius_factor=None, objective="sum",
                       strategy="schnorr_euchner", max_candidates=4096,
                       node_budget=200000):
    """Improve a reduced basis with short vectors found by enumeration.

    Every lattice vector within ``radius_factor`` times the longest current
    basis vector is a candidate (the squared radius is also capped at the
    current ``"sum"`` objective, which always contains an optimal basis).
    Candidates are deduplicated up to units and sorted by
    ``(norm, real parts, imaginary parts)``; the best primitive selection
    replaces the basis only when it scores strictly better.

    :param ReductionResult result: output of :func:`lll_reduce`
    :param float radius_factor: search radius relative to the longest
        basis vector; defaults to √n for ``"sum"`` and 1 for ``"max"``
    :param str objective: ``"sum"`` of squared norms or ``"max"`` squared norm
    :param str strategy: enumeration visit order
    :rtype: ReductionResult
    """
    if objective not in ("sum", "max"):
        raise ValueError("unknown objective %r" % (objective,))
    basis = result.reduced_basis
    n = basis.shape[1]
    if radius_factor is None:
        radius_factor = math.sqrt(n) if objective == "sum" else 1.0
    if radius_factor <= 0:
        return result

    norms = result.column_norms_sq
    radius_sq = min(radius_factor ** 2 * float(np.max(norms)), float(np.sum(norms)))
    found = enumerate_short_vectors(basis, radius_sq, strategy, limit=max_candidates)
    if len(found) < n:
        return result

    unique = {}
    for norm_sq, z in found:
        z = canonical_unit_multiple(z)
        unique.setdefault(tuple((round(c.real), round(c.imag)) for c in z), (norm_sq, z))
    candidates = sorted(unique.values(), key=lambda item: _candidate_key(*item))

    incumbent = _score(list(norms), objective)
    selection = _select_basis(candidates, n, objective, incumbent, node_budget)
    if selection is None:
        return result
    transform = result.transform @ selection
    reduced = basis @ selection.to_complex()
    return ReductionResult(reduced, transform, float(np.sum(np.abs(reduced) ** 2)))


def reduce_basis(basis, objective="sum", delta=0.75, radius_factor=None,
                 strategy="schnorr_euchner"):
    """LLL followed by enumeration refinement.

    :rtype: tuple[ReductionResult, ReductionResult]
    :return: the LLL-only result and the refined result
    """
    lll = lll_reduce(basis, delta)
    return lll, refine_enumeration(lll, radius_factor, objective, strategy)
