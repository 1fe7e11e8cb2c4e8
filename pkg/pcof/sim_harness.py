"""Monte Carlo driver for ergodic symmetric sum rates.

Every trial draws one set of Rayleigh channels that all schemes and all
SNR points share.  Trials are seeded from ``(seed, trial, attempt)`` so the
sweep gives the same numbers whatever the execution order.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field
from functools import partial
import logging
import math

import numpy as np
from scipy.stats import norm

from pcof.alignment import HopChannel, aligned_channel, build_precoders, shared_snr_eff
from pcof.cof_core import (CofChannel, candidate_A_matrices, candidate_B_matrices,
                           computation_rate_matrix, optimize_B, power_penalty)
from pcof.errors import ConfigError, DegenerateDraw, TrialFailed
from pcof.ff_network import select_invertible
from pcof.field_gfq import make_context
from pcof.lattice_reduce import ENUMERATION_STRATEGIES, GaussianIntMatrix

logger = logging.getLogger(__name__)

SCHEMES = ("pcof_optimized", "pcof_identity", "time_sharing")
CSV_HEADER = ("snr_db", "scheme", "sum_rate_bits", "ci95")
SIGNIFICANT_DIGITS = 9


@dataclass
class SimConfig:
    M: int = 2
    snr_grid_db: tuple = tuple(float(s) for s in range(0, 55, 5))
    trials: int = 1000
    seed: int = 0
    schemes: tuple = SCHEMES
    prime: int = 7
    output_path: str = "pcof_rates.csv"
    workers: int = 1
    alternate_roles: bool = True
    random_seed_vector: bool = False
    enumeration: str = "schnorr_euchner"
    max_retries: int = 10

    def validate(self):
        """Raise :class:`ConfigError` on an unusable configuration.

        :rtype: SimConfig
        """
        if not isinstance(self.M, int) or self.M < 2:
            raise ConfigError("antennas must be an integer ≥ 2, got %r" % (self.M,))
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be a positive integer, got %r" % (self.trials,))
        if len(self.snr_grid_db) == 0:
            raise ConfigError("SNR grid is empty")
        if not all(math.isfinite(s) for s in self.snr_grid_db):
            raise ConfigError("SNR grid must be finite")
        if len(self.schemes) == 0:
            raise ConfigError("no schemes selected")
        unknown = sorted(set(self.schemes) - set(SCHEMES))
        if unknown:
            raise ConfigError("unknown schemes: %s" % ", ".join(unknown))
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError("workers must be a positive integer, got %r" % (self.workers,))
        if self.enumeration not in ENUMERATION_STRATEGIES:
            raise ConfigError("enumeration must be one of %s" % ", ".join(ENUMERATION_STRATEGIES))
        if not isinstance(self.max_retries, int) or self.max_retries < 0:
            raise ConfigError("max_retries must be a nonnegative integer")
        try:
            make_context(self.prime)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self


@dataclass(frozen=True)
class RatePoint:
    snr_db: float
    scheme: str
    sum_rate: float
    ci95: float


@dataclass
class TrialResult:
    """Per-scheme sum rates of one channel draw, one entry per SNR point."""

    trial_index: int
    rates: dict = field(default_factory=dict)
    attempts: int = 1


def db_to_linear(snr_db):
    return 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)


def sample_channel(M, seed):
    """Draw both hops with i.i.d. CN(0, 1) entries.

    Matrices are drawn in the order F11, F12, F21, F22, G11, G12, G21, G22.

    :param int M: antennas per node
    :param seed: anything ``numpy.random.default_rng`` accepts
    :rtype: tuple[HopChannel, HopChannel]
    """
    rng = np.random.default_rng(seed)
    draws = (rng.standard_normal((8, M, M)) + 1j * rng.standard_normal((8, M, M))) / np.sqrt(2)
    return HopChannel(*draws[:4]), HopChannel(*draws[4:])


def swap_roles(hop):
    """Exchange the labels of pair 1 and pair 2 on both ends of a hop."""
    return HopChannel(hop.F22, hop.F21, hop.F12, hop.F11)


@dataclass(frozen=True)
class PcofSetup:
    """SNR-independent part of the aligned scheme for one channel draw.

    ``A_choices`` lists ``(A1, A2, A_R1, A_R2)`` tuples to evaluate; the
    identity choice is always among them.
    """

    first_hop: HopChannel
    second_hop: HopChannel
    first: object
    second: object
    A_choices: tuple

    @property
    def M(self):
        return self.first_hop.M

    def hops(self):
        """``(hop, AlignmentSet, offset)`` per hop; ``offset`` indexes its pair in ``A_choices``."""
        return ((self.first_hop, self.first, 0), (self.second_hop, self.second, 2))


def prepare_pcof(first_hop, second_hop, optimize, ctx, seed_vector=None,
                 strategy="schnorr_euchner"):
    """Build precoders for both hops and the beamforming integer matrices.

    :rtype: PcofSetup
    """
    M = first_hop.M
    first = build_precoders(first_hop, seed_vector)
    second = build_precoders(second_hop, seed_vector)
    identity = (GaussianIntMatrix.identity(M), GaussianIntMatrix.identity(M - 1)) * 2
    choices = [identity]
    if optimize:
        reduced = tuple(select_invertible(candidate_A_matrices(V, strategy), ctx)
                        for V in (first.V1, first.V2, second.V1, second.V2))
        if any(a != b for a, b in zip(reduced, identity)):
            choices.insert(0, reduced)
    return PcofSetup(first_hop, second_hop, first, second, tuple(choices))


def prepare_labellings(first_hop, second_hop, optimize, ctx, seed_vector=None,
                       strategy="schnorr_euchner", alternate_roles=False):
    """One :class:`PcofSetup` per labelling of the pairs.

    With ``alternate_roles`` the second setup has pairs 1 and 2 swapped on
    both hops, so the other physical transmitter carries the extra stream.

    :rtype: tuple[PcofSetup, ...]
    """
    roles = [(first_hop, second_hop)]
    if alternate_roles:
        roles.append((swap_roles(first_hop), swap_roles(second_hop)))
    return tuple(prepare_pcof(f, g, optimize, ctx, seed_vector, strategy) for f, g in roles)


def _choice_combinations(setups):
    # Best choice in every labelling, then identity in every labelling.
    combos = []
    for pick in (0, -1):
        combo = tuple(setup.A_choices[pick] for setup in setups)
        if combo not in combos:
            combos.append(combo)
    return combos


def _shared_min_rate(setups, combo, snr, optimize, ctx, strategy):
    """Mean over labellings of the smallest computation rate over relays and destinations."""
    M = setups[0].M
    per_labelling = [[] for _ in setups]
    for hop_index in range(2):
        hops = [setup.hops()[hop_index] for setup in setups]
        penalties = [(power_penalty(aset.V1, A[offset]), power_penalty(aset.V2, A[offset + 1]))
                     for (_, aset, offset), A in zip(hops, combo)]
        s = shared_snr_eff(penalties, snr, M)
        for rates, (hop, aset, offset), A in zip(per_labelling, hops, combo):
            for k in (1, 2):
                H, C = aligned_channel(hop, aset, A[offset], A[offset + 1], k)
                ch = CofChannel(H, C, s)
                if optimize:
                    B = select_invertible(candidate_B_matrices(ch, strategy), ctx)
                else:
                    B = GaussianIntMatrix.identity(M)
                rates.append(computation_rate_matrix(ch, B))
    return float(np.mean([min(rates) for rates in per_labelling]))


def pcof_rate(setups, snr, optimize, ctx, strategy="schnorr_euchner"):
    """``(2M−1)·R`` for prepared draws at linear ``snr``.

    :param setups: a :class:`PcofSetup`, or one per labelling from
        :func:`prepare_labellings`
    """
    if isinstance(setups, PcofSetup):
        setups = (setups,)
    R = max(_shared_min_rate(setups, combo, snr, optimize, ctx, strategy)
            for combo in _choice_combinations(setups))
    return (2 * setups[0].M - 1) * R


def pcof_symmetric_rate(first_hop, second_hop, snr, optimize, ctx, seed_vector=None,
                        strategy="schnorr_euchner", alternate_roles=False):
    """Aligned PCoF symmetric sum rate for one channel draw.

    ``R`` is the smallest matrix computation rate over the two relays and the
    two destinations; the sum rate is ``(2M−1)·R``.  With ``optimize`` the
    integer matrices come from lattice reduction (falling back to the next
    candidate when singular over GF(q)), otherwise they are identities.
    With ``alternate_roles`` the pairs swap roles every other slot: each
    transmitter meets the power limit on average and ``R`` is averaged over
    the two slots.

    :param HopChannel first_hop: source-to-relay channels
    :param HopChannel second_hop: relay-to-destination channels
    :param float snr: linear SNR
    :param bool optimize: reduce the integer matrices
    :param FieldCtx ctx: field context for the GF(q) invertibility checks
    :param bool alternate_roles: swap the pair roles in alternate slots
    :rtype: float
    """
    setups = prepare_labellings(first_hop, second_hop, optimize, ctx, seed_vector, strategy,
                                alternate_roles)
    return pcof_rate(setups, snr, optimize, ctx, strategy)


def ts_symmetric_rate(first_hop, second_hop, snr, strategy="schnorr_euchner"):
    """Time-sharing IFR baseline sum rate ``½·M·(R1 + R2)``.

    Pair k runs M streams at per-stream SNR ``2·snr`` over ``F_kk`` then
    ``G_kk``; ``R_k`` is the smaller of the two integer-forcing rates.

    :rtype: float
    """
    M = first_hop.M
    identity = GaussianIntMatrix.identity(M)
    per_pair = []
    for k in (1, 2):
        hop_rates = []
        for hop in (first_hop, second_hop):
            ch = CofChannel(hop.channel(k, k), identity, 2 * snr)
            hop_rates.append(computation_rate_matrix(ch, optimize_B(ch, strategy)))
        per_pair.append(min(hop_rates))
    return 0.5 * M * sum(per_pair)


def _seed_vector(config, trial_index, attempt):
    if not config.random_seed_vector:
        return None
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, trial_index, attempt, 1]))
    return (rng.standard_normal(config.M) + 1j * rng.standard_normal(config.M)) / np.sqrt(2)


def _evaluate_draw(config, first_hop, second_hop, seed_vector, ctx):
    snrs = db_to_linear(config.snr_grid_db)
    rates = {}
    for scheme in config.schemes:
        if scheme == "time_sharing":
            rates[scheme] = np.array([ts_symmetric_rate(first_hop, second_hop, s,
                                                        config.enumeration) for s in snrs])
            continue
        optimize = scheme == "pcof_optimized"
        setups = prepare_labellings(first_hop, second_hop, optimize, ctx, seed_vector,
                                    config.enumeration, config.alternate_roles)
        rates[scheme] = np.array([pcof_rate(setups, s, optimize, ctx, config.enumeration)
                                  for s in snrs])
    return rates


def run_trial(config, trial_index, ctx=None):
    """Evaluate every scheme on one common channel draw, resampling degenerate draws.

    :param SimConfig config: sweep configuration
    :param int trial_index: index of the trial
    :rtype: TrialResult
    :raises TrialFailed: after ``config.max_retries`` resamples
    """
    ctx = ctx or make_context(config.prime)
    cause = None
    for attempt in range(config.max_retries + 1):
        seed = np.random.SeedSequence([config.seed, trial_index, attempt])
        first_hop, second_hop = sample_channel(config.M, seed)
        try:
            rates = _evaluate_draw(config, first_hop, second_hop,
                                   _seed_vector(config, trial_index, attempt), ctx)
        except DegenerateDraw as exc:
            logger.debug("trial %d attempt %d resampled: %s", trial_index, attempt, exc)
            cause = exc
            continue
        if attempt > config.max_retries / 2:
            logger.warning("trial %d needed %d resamples", trial_index, attempt)
        return TrialResult(trial_index, rates, attempt + 1)
    raise TrialFailed(trial_index, cause)


def confidence_halfwidth(samples):
    """95% normal-approximation half-width; 0 for a single sample."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        return 0.0
    return float(norm.ppf(0.975) * np.std(samples, ddof=1) / np.sqrt(samples.size))


def aggregate(config, results):
    """Mean and CI per (snr, scheme) over trial results in trial order.

    :rtype: list[RatePoint]
    """
    results = sorted(results, key=lambda r: r.trial_index)
    points = []
    for scheme in config.schemes:
        table = np.array([r.rates[scheme] for r in results])
        for column, snr_db in enumerate(config.snr_grid_db):
            samples = table[:, column]
            points.append(RatePoint(float(snr_db), scheme, float(np.mean(samples)),
                                    confidence_halfwidth(samples)))
    return sorted(points, key=lambda p: (p.snr_db, p.scheme))


def ergodic_sweep(config, ctx=None):
    """Ergodic sum rates for every SNR point and scheme.

    :param SimConfig config: sweep configuration
    :rtype: list[RatePoint]
    :raises TrialFailed: if a trial runs out of resamples
    """
    config.validate()
    ctx = ctx or make_context(config.prime)
    logger.info("sweeping %d SNR points x %d trials (M=%d, p=%d)",
                len(config.snr_grid_db), config.trials, config.M, ctx.p)
    indices = range(config.trials)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(partial(run_trial, config, ctx=ctx), indices))
    else:
        results = [run_trial(config, i, ctx) for i in indices]
    points = aggregate(config, results)
    for point in points:
        logger.info("%6.1f dB  %-15s %.4f ± %.4f", point.snr_db, point.scheme,
                    point.sum_rate, point.ci95)
    return points


def format_number(x):
    """Positional text with at least 9 significant digits that parses back to the same float."""
    return np.format_float_positional(float(x), unique=True, fractional=False,
                                      min_digits=SIGNIFICANT_DIGITS, trim="k")


def csv_metadata(config):
    """Comment lines describing a sweep, written ahead of the CSV header."""
    return ["common random numbers across schemes; per-trial seeds from (seed, trial, attempt)",
            "M=%d p=%d trials=%d seed=%d alternate_roles=%s enumeration=%s"
            % (config.M, config.prime, config.trials, config.seed, config.alternate_roles,
               config.enumeration)]


def emit_csv(points, path, metadata=None):
    """Write rate points sorted by (snr, scheme).

    :param list[RatePoint] points: results
    :param str path: output file
    :param list[str] metadata: optional lines written first, prefixed with ``#``
    :raises OSError: if ``path`` cannot be written
    """
    with open(path, "w", newline="") as fp:
        for line in metadata or []:
            fp.write("# %s\n" % line)
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for p in sorted(points, key=lambda p: (p.snr_db, p.scheme)):
            writer.writerow([format_number(p.snr_db), p.scheme, format_number(p.sum_rate),
                             format_number(p.ci95)])


def read_csv(path):
    """Parse a file written by :func:`emit_csv`, skipping ``#`` lines.

    :rtype: list[RatePoint]
    """
    with open(path, newline="") as fp:
        lines = [line for line in fp if not line.startswith("#")]
    reader = csv.DictReader(lines)
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ValueError("unexpected CSV header %r" % (reader.fieldnames,))
    return [RatePoint(float(row["snr_db"]), row["scheme"], float(row["sum_rate_bits"]),
                      float(row["ci95"])) for row in reader]


def _curve(points, scheme):
    curve = sorted((p.snr_db, p.sum_rate) for p in points if p.scheme == scheme)
    if not curve:
        raise ValueError("no points for scheme %r" % (scheme,))
    return np.array(curve)


def dof_slope(points, scheme, snr_lo_db, snr_hi_db):
    """``Δ(sum rate) / Δlog₂(snr)`` between two grid points."""
    curve = dict(map(tuple, _curve(points, scheme)))
    try:
        rise = curve[float(snr_hi_db)] - curve[float(snr_lo_db)]
    except KeyError as exc:
        raise ValueError("SNR %s dB is not on the %s curve" % (exc.args[0], scheme)) from exc
    return rise / ((snr_hi_db - snr_lo_db) / (10 * np.log10(2)))


def snr_at_rate(points, scheme, level):
    """SNR (dB) where a curve reaches ``level``, by linear interpolation."""
    curve = _curve(points, scheme)
    rates = np.maximum.accumulate(curve[:, 1])
    if not rates[0] <= level <= rates[-1]:
        raise ValueError("level %g outside the %s curve" % (level, scheme))
    return float(np.interp(level, rates, curve[:, 0]))


def snr_gap_db(points, reference, other, level):
    """How many dB earlier ``other`` reaches ``level`` than ``reference``."""
    return snr_at_rate(points, reference, level) - snr_at_rate(points, other, level)
