"""Tests the Monte Carlo harness."""

import os
import shutil
import tempfile
import unittest
from unittest import mock

import numpy as np

from pcof.alignment import HopChannel, build_precoders
from pcof.errors import AlignmentDegenerate, ConfigError, TrialFailed
from pcof.field_gfq import make_context
from pcof.lattice_reduce import GaussianIntMatrix, lll_reduce
import pcof.sim_harness as sim
from pcof.tests.oracles import SLOW_TESTS, brute_force_minimum, explicit_variance


def _identity_precoders(hop):
    v2_0 = np.ones(2)
    v1_0 = np.linalg.inv(hop.F21) @ hop.F22 @ v2_0
    v1_1 = np.linalg.inv(hop.F11) @ hop.F12 @ v2_0
    return np.column_stack([v1_0, v1_1]), v2_0


def _straight_line_identity_rate(first_hop, second_hop, snr, alternate_roles=False):
    """Aligned PCoF sum rate with identity integer matrices, M = 2, written out in full."""
    C_R1 = np.array([[1, 0, 0], [0, 1, 1]])
    C_R2 = np.array([[1, 0, 1], [0, 1, 0]])
    labellings = [(first_hop, second_hop)]
    if alternate_roles:
        labellings.append(tuple(HopChannel(h.F22, h.F21, h.F12, h.F11)
                                for h in (first_hop, second_hop)))
    per_labelling = [[] for _ in labellings]
    for hop_index in (0, 1):
        hops = [labelling[hop_index] for labelling in labellings]
        precoders = [_identity_precoders(hop) for hop in hops]
        # Transmitter 1 carries V1 in the first labelling and v2 in the second.
        tx1 = np.mean([np.sum(np.abs(P[n % 2]) ** 2) for n, P in enumerate(precoders)])
        tx2 = np.mean([np.sum(np.abs(P[1 - n % 2]) ** 2) for n, P in enumerate(precoders)])
        s = 2 * snr / max(tx1, tx2)
        for rates, hop, (V1, _) in zip(per_labelling, hops, precoders):
            for H, C in ((hop.F11 @ V1, C_R1), (hop.F21 @ V1, C_R2)):
                for b in np.eye(2):
                    sigma_sq = explicit_variance(H, C, b, s)
                    rates.append(max(np.log2(s / sigma_sq), 0.0))
    return 3 * np.mean([min(rates) for rates in per_labelling])


class TestChannels(unittest.TestCase):

    def test_seeded(self):
        """Tests sample_channel is reproducible and seed-sensitive."""
        first, second = sim.sample_channel(2, 7)
        again, _ = sim.sample_channel(2, 7)
        other, _ = sim.sample_channel(2, 8)
        np.testing.assert_array_equal(first.F11, again.F11)
        self.assertFalse(np.allclose(first.F11, other.F11))
        self.assertEqual(second.M, 2)

    def test_statistics(self):
        """Tests entries are unit-variance circularly symmetric Gaussians."""
        first, second = sim.sample_channel(112, 9)
        entries = np.concatenate([np.ravel([h.F11, h.F12, h.F21, h.F22]) for h in (first, second)])
        self.assertGreater(entries.size, 100000)
        self.assertAlmostEqual(np.mean(np.abs(entries) ** 2), 1.0, delta=0.02)
        self.assertAlmostEqual(np.mean(entries.real ** 2), 0.5, delta=0.02)
        self.assertAlmostEqual(np.corrcoef(entries.real, entries.imag)[0, 1], 0.0, delta=0.02)
        self.assertAlmostEqual(abs(np.mean(entries)), 0.0, delta=0.02)

    def test_swap_roles(self):
        """Tests swap_roles relabels the pairs and is an involution."""
        first, _ = sim.sample_channel(2, 10)
        swapped = sim.swap_roles(first)
        np.testing.assert_array_equal(swapped.F11, first.F22)
        np.testing.assert_array_equal(swapped.F12, first.F21)
        twice = sim.swap_roles(swapped)
        for name in ("F11", "F12", "F21", "F22"):
            np.testing.assert_array_equal(getattr(twice, name), getattr(first, name))

    def test_db_to_linear(self):
        """Tests db_to_linear."""
        np.testing.assert_allclose(sim.db_to_linear([0, 10, 30]), [1, 10, 1000])


class TestSchemeRates(unittest.TestCase):

    def setUp(self):
        self.ctx = make_context(7)

    def test_identity_rate_matches_direct_computation(self):
        """Tests pcof_symmetric_rate without optimisation against a straight-line version."""
        for seed in range(20):
            first, second = sim.sample_channel(2, seed)
            snr = sim.db_to_linear(20.0)
            expected = _straight_line_identity_rate(first, second, snr)
            rate = sim.pcof_symmetric_rate(first, second, snr, False, self.ctx)
            self.assertAlmostEqual(rate, expected, delta=1e-6)

    def test_alternating_roles_share_power(self):
        """Tests role alternation against a straight-line version with averaged transmit power."""
        for seed in range(20):
            first, second = sim.sample_channel(2, seed)
            snr = sim.db_to_linear(20.0)
            expected = _straight_line_identity_rate(first, second, snr, alternate_roles=True)
            rate = sim.pcof_symmetric_rate(first, second, snr, False, self.ctx,
                                           alternate_roles=True)
            self.assertAlmostEqual(rate, expected, delta=1e-6)

    def test_prepare_labellings(self):
        """Tests the second labelling swaps the pairs on both hops."""
        first, second = sim.sample_channel(2, 16)
        setups = sim.prepare_labellings(first, second, False, self.ctx, alternate_roles=True)
        self.assertEqual(len(setups), 2)
        np.testing.assert_array_equal(setups[1].first_hop.F11, first.F22)
        np.testing.assert_array_equal(setups[1].second_hop.F12, second.F21)
        self.assertEqual(len(sim.prepare_labellings(first, second, False, self.ctx)), 1)

    def test_optimized_dominates_identity(self):
        """Tests optimised integer matrices never lose to identities on the same draw."""
        for seed in range(20):
            first, second = sim.sample_channel(2, seed)
            for snr_db in (0.0, 20.0, 40.0):
                snr = sim.db_to_linear(snr_db)
                for alternate in (False, True):
                    optimized = sim.pcof_symmetric_rate(first, second, snr, True, self.ctx,
                                                        alternate_roles=alternate)
                    identity = sim.pcof_symmetric_rate(first, second, snr, False, self.ctx,
                                                       alternate_roles=alternate)
                    self.assertGreaterEqual(optimized, identity - 1e-9)

    def test_vanishing_snr(self):
        """Tests both schemes go to zero as snr vanishes."""
        first, second = sim.sample_channel(2, 11)
        self.assertAlmostEqual(sim.pcof_symmetric_rate(first, second, 1e-12, True, self.ctx),
                               0.0, places=6)
        self.assertAlmostEqual(sim.ts_symmetric_rate(first, second, 1e-12), 0.0, places=6)

    def test_time_sharing_unit_channels(self):
        """Tests time-sharing on identity direct channels gives M·log₂(1 + 2snr)."""
        rng = np.random.default_rng(70)
        for M in (2, 3):
            I = np.eye(M)
            cross = [rng.standard_normal((M, M)) for _ in range(4)]
            first = HopChannel(I, cross[0], cross[1], I)
            second = HopChannel(I, cross[2], cross[3], I)
            for snr in (1.0, 100.0):
                self.assertAlmostEqual(sim.ts_symmetric_rate(first, second, snr),
                                       M * np.log2(1 + 2 * snr), places=9)

    def test_time_sharing_exhaustive(self):
        """Tests time-sharing against exhaustive receiver matrices, M = 2."""
        evaluated = 0
        for seed in range(20):
            first, second = sim.sample_channel(2, seed)
            snr = sim.db_to_linear(25.0)
            per_pair = []
            for k in (1, 2):
                hop_rates = []
                for hop in (first, second):
                    F = hop.channel(k, k)
                    phi = np.linalg.inv(np.eye(2) / (2 * snr) + F.conj().T @ F)
                    basis = np.linalg.cholesky((phi + phi.conj().T) / 2).conj().T
                    best = brute_force_minimum(lll_reduce(basis).reduced_basis, "max")
                    if best is None:
                        break
                    hop_rates.append(max(np.log2(2 * snr / best), 0.0))
                per_pair.append(min(hop_rates) if len(hop_rates) == 2 else None)
            if None in per_pair:
                continue
            self.assertAlmostEqual(sim.ts_symmetric_rate(first, second, snr),
                                   sum(per_pair), delta=1e-6)
            evaluated += 1
        self.assertGreaterEqual(evaluated, 10)

    def test_monotone_in_snr(self):
        """Tests per-draw rates do not decrease with snr."""
        first, second = sim.sample_channel(2, 12)
        snrs = sim.db_to_linear([0.0, 10.0, 20.0, 30.0])
        for optimize in (False, True):
            setup = sim.prepare_pcof(first, second, optimize, self.ctx)
            rates = [sim.pcof_rate(setup, s, optimize, self.ctx) for s in snrs]
            self.assertTrue(all(b >= a - 1e-9 for a, b in zip(rates, rates[1:])))
        ts = [sim.ts_symmetric_rate(first, second, s) for s in snrs]
        self.assertTrue(all(b >= a - 1e-9 for a, b in zip(ts, ts[1:])))

    def test_setup_includes_identity(self):
        """Tests prepare_pcof keeps the identity choice."""
        first, second = sim.sample_channel(2, 13)
        setup = sim.prepare_pcof(first, second, True, self.ctx)
        identity = (GaussianIntMatrix.identity(2), GaussianIntMatrix.identity(1)) * 2
        self.assertTrue(any(all(a == b for a, b in zip(choice, identity))
                            for choice in setup.A_choices))
        aset = build_precoders(first)
        np.testing.assert_allclose(setup.first.V1, aset.V1)

    def test_random_seed_vector(self):
        """Tests the alignment seed vector reaches both hops."""
        first, second = sim.sample_channel(2, 14)
        setup = sim.prepare_pcof(first, second, False, self.ctx, seed_vector=np.array([1, -1j]))
        np.testing.assert_array_equal(setup.first.V2[:, 0], [1, -1j])
        np.testing.assert_array_equal(setup.second.V2[:, 0], [1, -1j])
        default = sim.prepare_pcof(first, second, False, self.ctx)
        self.assertFalse(np.allclose(setup.first.V1, default.first.V1))
        rate = sim.pcof_rate(setup, sim.db_to_linear(20.0), False, self.ctx)
        self.assertTrue(np.isfinite(rate))
        self.assertGreaterEqual(rate, 0.0)

    def test_strategies_agree(self):
        """Tests Pohst enumeration gives the same optimised rate."""
        first, second = sim.sample_channel(2, 15)
        snr = sim.db_to_linear(30.0)
        se = sim.pcof_symmetric_rate(first, second, snr, True, self.ctx,
                                     strategy="schnorr_euchner")
        pohst = sim.pcof_symmetric_rate(first, second, snr, True, self.ctx, strategy="pohst")
        self.assertAlmostEqual(se, pohst, places=9)


class TestSweep(unittest.TestCase):

    def setUp(self):
        self.tmp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp_dir)

    def _config(self, **kwargs):
        settings = dict(snr_grid_db=(0.0, 20.0), trials=3, seed=1)
        settings.update(kwargs)
        return sim.SimConfig(**settings)

    def test_validate(self):
        """Tests SimConfig.validate."""
        self.assertIsInstance(self._config().validate(), sim.SimConfig)
        bad = [dict(M=1), dict(trials=0), dict(snr_grid_db=()), dict(schemes=("fast",)),
               dict(schemes=()), dict(prime=5), dict(prime=9), dict(workers=0),
               dict(enumeration="spiral"), dict(max_retries=-1),
               dict(snr_grid_db=(float("nan"),))]
        for kwargs in bad:
            self.assertRaises(ConfigError, self._config(**kwargs).validate)

    def test_single_trial(self):
        """Tests a single trial has zero confidence half-width."""
        points = sim.ergodic_sweep(self._config(trials=1))
        self.assertEqual(len(points), 2 * 3)
        self.assertTrue(all(p.ci95 == 0.0 for p in points))

    def test_points_sorted_and_dominated(self):
        """Tests sweep output order and pcof_optimized ≥ pcof_identity."""
        points = sim.ergodic_sweep(self._config())
        keys = [(p.snr_db, p.scheme) for p in points]
        self.assertEqual(keys, sorted(keys))
        table = {(p.snr_db, p.scheme): p.sum_rate for p in points}
        for snr_db in (0.0, 20.0):
            self.assertGreaterEqual(table[(snr_db, "pcof_optimized")],
                                    table[(snr_db, "pcof_identity")] - 1e-9)
            for scheme in sim.SCHEMES:
                self.assertGreaterEqual(table[(snr_db, scheme)], 0.0)
                self.assertLessEqual(table[(0.0, scheme)], table[(20.0, scheme)] + 1e-9)

    def test_deterministic_csv(self):
        """Tests two runs with the same seed write byte-identical files."""
        config = self._config()
        paths = [os.path.join(self.tmp_dir, name) for name in ("a.csv", "b.csv")]
        for path in paths:
            sim.emit_csv(sim.ergodic_sweep(config), path, sim.csv_metadata(config))
        with open(paths[0], "rb") as a, open(paths[1], "rb") as b:
            self.assertEqual(a.read(), b.read())

    def test_workers_match_serial(self):
        """Tests a process pool gives the same points as a serial run."""
        config = self._config(schemes=("time_sharing", "pcof_identity"), trials=2)
        serial = sim.ergodic_sweep(config)
        config.workers = 2
        self.assertEqual(sim.ergodic_sweep(config), serial)

    def test_common_draws(self):
        """Tests every scheme sees the same channel draw within a trial."""
        config = self._config(schemes=("pcof_identity",), alternate_roles=False)
        result = sim.run_trial(config, 0)
        first, second = sim.sample_channel(2, np.random.SeedSequence([1, 0, 0]))
        ctx = make_context(7)
        expected = [sim.pcof_symmetric_rate(first, second, s, False, ctx)
                    for s in sim.db_to_linear(config.snr_grid_db)]
        np.testing.assert_allclose(result.rates["pcof_identity"], expected)
        self.assertEqual(result.attempts, 1)

    def test_role_alternation_shares_power(self):
        """Tests a trial with role alternation shares transmit power across the two labellings."""
        config = self._config(schemes=("pcof_identity",))
        result = sim.run_trial(config, 0)
        first, second = sim.sample_channel(2, np.random.SeedSequence([1, 0, 0]))
        snr = sim.db_to_linear(20.0)
        expected = _straight_line_identity_rate(first, second, snr, alternate_roles=True)
        self.assertAlmostEqual(result.rates["pcof_identity"][1], expected, delta=1e-6)

    def test_resampling(self):
        """Tests degenerate draws are resampled and reported after the budget."""
        config = self._config(max_retries=2)
        real = sim._evaluate_draw
        calls = []

        def flaky(*args):
            calls.append(1)
            if len(calls) == 1:
                raise AlignmentDegenerate("test draw")
            return real(*args)

        with mock.patch.object(sim, "_evaluate_draw", side_effect=flaky):
            result = sim.run_trial(config, 4)
        self.assertEqual(result.attempts, 2)

        with mock.patch.object(sim, "_evaluate_draw",
                               side_effect=AlignmentDegenerate("always")):
            with self.assertRaises(TrialFailed) as caught:
                sim.run_trial(config, 4)
        self.assertEqual(caught.exception.trial_index, 4)
        self.assertIsInstance(caught.exception.cause, AlignmentDegenerate)

    def test_confidence_shrinks(self):
        """Tests the half-width shrinks by about √2 when trials double."""
        narrow = sim.ergodic_sweep(self._config(schemes=("time_sharing",), trials=400,
                                                snr_grid_db=(20.0,)))[0]
        wide = sim.ergodic_sweep(self._config(schemes=("time_sharing",), trials=200,
                                              snr_grid_db=(20.0,)))[0]
        self.assertAlmostEqual(narrow.ci95 / wide.ci95, 1 / np.sqrt(2), delta=0.2 / np.sqrt(2))

    def test_confidence_halfwidth(self):
        """Tests confidence_halfwidth."""
        self.assertEqual(sim.confidence_halfwidth([3.0]), 0.0)
        self.assertAlmostEqual(sim.confidence_halfwidth([1.0, 3.0]),
                               1.959963984540054 * np.sqrt(2) / np.sqrt(2), places=9)


class TestCsv(unittest.TestCase):

    def setUp(self):
        self.tmp_dir = tempfile.mkdtemp()
        self.path = os.path.join(self.tmp_dir, "rates.csv")

    def tearDown(self):
        shutil.rmtree(self.tmp_dir)

    def test_header_only(self):
        """Tests emit_csv on an empty list."""
        sim.emit_csv([], self.path)
        with open(self.path) as fp:
            self.assertEqual(fp.read(), "snr_db,scheme,sum_rate_bits,ci95\n")

    def test_rows(self):
        """Tests rows are sorted and numbers keep full precision."""
        points = [sim.RatePoint(20.0, "time_sharing", 1 / 3, 0.0),
                  sim.RatePoint(0.0, "pcof_optimized", 2.5, 0.125)]
        sim.emit_csv(points, self.path, ["first line"])
        with open(self.path) as fp:
            lines = fp.read().splitlines()
        self.assertEqual(lines[0], "# first line")
        self.assertEqual(lines[1], "snr_db,scheme,sum_rate_bits,ci95")
        self.assertEqual(lines[2].split(",")[1:], ["pcof_optimized", "2.50000000", "0.125000000"])
        self.assertEqual(lines[3].split(",")[:3],
                         ["20.0000000", "time_sharing", "0.3333333333333333"])
        self.assertEqual(len(lines), 4)

    def test_significant_digits(self):
        """Tests format_number pads short values to nine significant digits without loss."""
        for x in (2.5, 12.75, 0.125, 1 / 3, 0.1 + 0.2, 123456.5, 4e-3):
            text = sim.format_number(x)
            self.assertEqual(float(text), x)
            digits = text.replace(".", "").lstrip("0")
            self.assertGreaterEqual(len(digits), 9, text)
        self.assertEqual(sim.format_number(12.75), "12.7500000")
        self.assertEqual(float(sim.format_number(0.0)), 0.0)

    def test_round_trip(self):
        """Tests read_csv returns the written points."""
        points = [sim.RatePoint(0.0, "pcof_identity", 0.1 + 0.2, 1e-3),
                  sim.RatePoint(5.0, "pcof_identity", 12.75, 0.5)]
        sim.emit_csv(points, self.path)
        self.assertEqual(sim.read_csv(self.path), points)

    def test_unexpected_header(self):
        """Tests read_csv rejects foreign files."""
        with open(self.path, "w") as fp:
            fp.write("a,b\n1,2\n")
        self.assertRaises(ValueError, sim.read_csv, self.path)


class TestCurves(unittest.TestCase):

    def setUp(self):
        # Slopes of 2 and 3 bits per doubling of snr.
        self.points = []
        for snr_db in (0.0, 10.0, 20.0, 30.0):
            doublings = snr_db / (10 * np.log10(2))
            self.points.append(sim.RatePoint(snr_db, "time_sharing", 2 * doublings, 0.0))
            self.points.append(sim.RatePoint(snr_db, "pcof_optimized", 3 * doublings, 0.0))

    def test_dof_slope(self):
        """Tests dof_slope."""
        self.assertAlmostEqual(sim.dof_slope(self.points, "time_sharing", 10.0, 30.0), 2.0)
        self.assertAlmostEqual(sim.dof_slope(self.points, "pcof_optimized", 0.0, 30.0), 3.0)
        self.assertRaises(ValueError, sim.dof_slope, self.points, "time_sharing", 5.0, 30.0)
        self.assertRaises(ValueError, sim.dof_slope, self.points, "pcof_identity", 0.0, 30.0)

    def test_snr_gap(self):
        """Tests snr_at_rate and snr_gap_db."""
        level = 2 * 20.0 / (10 * np.log10(2))
        self.assertAlmostEqual(sim.snr_at_rate(self.points, "time_sharing", level), 20.0)
        gap = sim.snr_gap_db(self.points, "time_sharing", "pcof_optimized", level)
        self.assertAlmostEqual(gap, 20.0 - 40.0 / 3, places=9)
        self.assertRaises(ValueError, sim.snr_at_rate, self.points, "time_sharing", 1e6)


@unittest.skipUnless(SLOW_TESTS, "set PCOF_SLOW_TESTS=1 to run the full-size sweeps")
class TestFullSweeps(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        config = sim.SimConfig(snr_grid_db=(0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0),
                               trials=1000, seed=0, workers=os.cpu_count() or 1)
        cls.points = sim.ergodic_sweep(config)
        cls.table = {(p.snr_db, p.scheme): p.sum_rate for p in cls.points}

    def test_crossover(self):
        """Tests time-sharing leads at 10 dB and aligned PCoF leads at 20 dB."""
        self.assertLessEqual(self.table[(10.0, "pcof_optimized")],
                             self.table[(10.0, "time_sharing")])
        self.assertGreaterEqual(self.table[(20.0, "pcof_optimized")],
                                self.table[(20.0, "time_sharing")])

    def test_reduction_gain(self):
        """Tests lattice reduction saves several dB against identity integer matrices."""
        level = self.table[(30.0, "pcof_identity")]
        gap = sim.snr_gap_db(self.points, "pcof_identity", "pcof_optimized", level)
        self.assertGreaterEqual(gap, 3.0)
        self.assertLessEqual(gap, 7.0)

    def test_degrees_of_freedom(self):
        """Tests high-SNR slopes of about 3 for aligned PCoF and 2 for time-sharing."""
        config = sim.SimConfig(snr_grid_db=(40.0, 50.0), trials=500, seed=1,
                               workers=os.cpu_count() or 1,
                               schemes=("pcof_optimized", "time_sharing"))
        points = sim.ergodic_sweep(config)
        slope = sim.dof_slope(points, "pcof_optimized", 40.0, 50.0)
        self.assertGreaterEqual(slope, 2.5)
        self.assertLessEqual(slope, 3.1)
        slope = sim.dof_slope(points, "time_sharing", 40.0, 50.0)
        self.assertGreaterEqual(slope, 1.6)
        self.assertLessEqual(slope, 2.2)


if __name__ == "__main__":
    unittest.main()
