"""
Unittest for codebooks, the basic scheme, the partition rule and the
variable-length simulation
"""
import io
import json
import os
import unittest
from unittest import mock

import numpy as np
from numpy.testing import assert_array_equal

from ..exponent_regions import (AuxiliarySolution, EpsilonPair, OptimizerConfig, RateBudget,
                                REGIME_CHANNELS, Regime, evaluate_channels, region_equal_eps)
from ..probability import ConditionalPmf, Pmf, compose_two_hop
from ..sim.bitstrings import DEGENERATE, string_encode
from ..sim.codebook import (MAX_ENTRIES_ENV, Codebook, CodebookTooLarge, UnknownIndex,
                            generate_codebook, joint_typical_indices)
from ..sim.scheme import (Branch, InfeasibleTarget, PartitionRule, SchemeParams, TrialOutcome,
                          build_codebooks, estimate_errors, length_bound, min_blocklength,
                          partition_assign, partition_rule_for, relay_step_basic,
                          run_trial, rx_decide_basic, scheme_rates, sweep_blocklengths,
                          tx_encode_basic, typical_set_probability)
from ..sim.stats import SimulationStats, fit_exponent, wilson_interval
from ..utils import derive_seed, seed_random_state


def dsbs():
    flip = ConditionalPmf(np.array([[0.2, 0.8], [0.8, 0.2]]))
    return compose_two_hop(Pmf.bernoulli(0.4), flip, flip)


def constant_solution(src, regime, eps):
    channels = {name: ConditionalPmf.constant(2, 2) for name in REGIME_CHANNELS[regime]}
    achieved, used, _ = evaluate_channels(src, channels, eps, regime)
    return AuxiliarySolution(channels, achieved, used, regime)


def scheme_params(eps, n=40, mu=0.2):
    src = dsbs()
    return SchemeParams(src, eps.regime, n, mu, eps, constant_solution(src, eps.regime, eps))


class TestCodebook(unittest.TestCase):
    def test_sizes(self):
        self.assertEqual(generate_codebook(Pmf.uniform(2), 0., 10, 0).size, 1)
        cb = generate_codebook(Pmf.uniform(2), 0.5, 10, 0)
        self.assertEqual(cb.entries.shape, (32, 10))
        with self.assertRaises(UnknownIndex):
            cb.codeword(0)
        with self.assertRaises(UnknownIndex):
            cb.codeword(33)
        assert_array_equal(cb.codeword(1), cb.entries[0])

    def test_letter_frequencies(self):
        cb = generate_codebook(Pmf.bernoulli(0.3), 1.0, 16, seed=3)
        self.assertEqual(cb.size, 2 ** 16)
        self.assertAlmostEqual(cb.entries.mean(), 0.3, delta=0.01)
        assert_array_equal(cb.entries, generate_codebook(Pmf.bernoulli(0.3), 1.0, 16, 3).entries)

    def test_entry_limit(self):
        with self.assertRaises(CodebookTooLarge):
            generate_codebook(Pmf.uniform(2), 0.5, 100, 0)
        with mock.patch.dict(os.environ, {MAX_ENTRIES_ENV: "16"}):
            self.assertEqual(generate_codebook(Pmf.uniform(2), 0.4, 10, 0).size, 16)
            with self.assertRaises(CodebookTooLarge):
                generate_codebook(Pmf.uniform(2), 0.5, 10, 0)

    def test_joint_typical_indices(self):
        entries = np.array([[0, 0, 1, 1], [1, 1, 0, 0], [0, 1, 0, 1]], dtype=np.uint8)
        cb = Codebook(entries, 4, np.array([0.5, 0.5]), 0, 0.5)
        joint = np.diag([0.5, 0.5])
        assert_array_equal(joint_typical_indices(cb, [0, 0, 1, 1], joint, 0.01), [1])
        assert_array_equal(joint_typical_indices(cb, [1, 0, 1, 0], joint, 0.01), [])
        assert_array_equal(joint_typical_indices(cb, [0, 1, 0, 1], joint, 0.3), [3])
        with self.assertRaises(ValueError):
            joint_typical_indices(cb, [0, 1, 1], joint, 0.01)


class TestBasicScheme(unittest.TestCase):
    def setUp(self):
        p = np.array([0.6, 0.4])
        self.x = np.array([0] * 12 + [1] * 8)
        self.cb = Codebook(self.x[None, :].astype(np.uint8), 20, p, 0, 0.,
                           enc_joint=np.diag(p), dec_joint=np.diag(p))

    def test_transmitter(self):
        self.assertEqual(tx_encode_basic(self.x, self.cb, 0.05, 0), string_encode(1))
        self.assertEqual(tx_encode_basic(np.ones(20, dtype=int), self.cb, 0.05, 0), DEGENERATE)

    def test_relay(self):
        self.assertEqual(relay_step_basic(self.x, string_encode(1), self.cb, self.cb, 0.05, 0),
                         (0, string_encode(1)))
        self.assertEqual(relay_step_basic(self.x, DEGENERATE, self.cb, self.cb, 0.05, 0),
                         (1, DEGENERATE))
        flipped = 1 - self.x
        self.assertEqual(relay_step_basic(flipped, string_encode(1), self.cb, self.cb, 0.05, 0),
                         (1, DEGENERATE))
        with self.assertRaises(UnknownIndex):
            relay_step_basic(self.x, string_encode(5), self.cb, self.cb, 0.05, 0)

    def test_receiver(self):
        self.assertEqual(rx_decide_basic(self.x, string_encode(1), self.cb, 0.05), 0)
        self.assertEqual(rx_decide_basic(1 - self.x, string_encode(1), self.cb, 0.05), 1)
        self.assertEqual(rx_decide_basic(self.x, DEGENERATE, self.cb, 0.05), 1)


class TestPartition(unittest.TestCase):
    def test_typical_set_probability(self):
        self.assertAlmostEqual(typical_set_probability(Pmf.uniform(2), 2, 0.25), 0.5, places=12)
        self.assertAlmostEqual(typical_set_probability(Pmf.uniform(3), 3, 0.01), 2. / 9.,
                               delta=0.01)

    def test_empty_rule(self):
        rs = seed_random_state(0)
        rule = PartitionRule(0., 0., seed=4)
        for _ in range(20):
            x = rs.binomial(1, 0.4, size=30)
            self.assertIs(partition_assign(x, rule, Pmf.bernoulli(0.4), 0.1), Branch.DPRIME)

    def test_deterministic(self):
        x = seed_random_state(1).binomial(1, 0.4, size=50)
        rule = PartitionRule(0.3, 0.3, seed=9)
        branches = {partition_assign(x, rule, Pmf.bernoulli(0.4), 0.1) for _ in range(5)}
        self.assertEqual(len(branches), 1)

    def test_branch_probabilities(self):
        n, mu, p_x = 100, 0.1, Pmf.bernoulli(0.4)
        typical_prob = typical_set_probability(p_x, n, mu)
        rule = PartitionRule(0.1, 0.15, seed=7)
        xs = seed_random_state(2).binomial(1, 0.4, size=(100_000, n))
        branches = [partition_assign(x, rule, p_x, mu, typical_prob) for x in xs]
        self.assertAlmostEqual(np.mean([b is Branch.S for b in branches]), 0.1, delta=0.005)
        self.assertAlmostEqual(np.mean([b is Branch.DDPRIME for b in branches]), 0.15,
                               delta=0.005)

    def test_unreachable_target(self):
        x = np.zeros(10, dtype=int)
        with self.assertWarns(InfeasibleTarget):
            partition_assign(x, PartitionRule(0.9, 0.), Pmf.bernoulli(0.4), 0.1,
                             typical_prob=0.4321)

    def test_rule_targets(self):
        rule = partition_rule_for(scheme_params(EpsilonPair(0.25, 0.4), mu=0.1))
        self.assertAlmostEqual(rule.s_prob, 0.15)
        self.assertAlmostEqual(rule.d2_prob, 0.15)
        rule = partition_rule_for(scheme_params(EpsilonPair(0.3, 0.1), mu=0.2))
        self.assertEqual(rule.s_prob, 0.)
        with self.assertRaises(ValueError):
            PartitionRule(0.6, 0.6)


class TestSimulation(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.params = scheme_params(EpsilonPair.equal(0.3))
        cls.rule = partition_rule_for(cls.params)
        cls.books = build_codebooks(cls.params)

    def test_codebooks(self):
        self.assertEqual(set(self.books), {"u1", "u2"})
        self.assertEqual(self.books["u1"].size, 256)

    def test_forced_degenerate_branch(self):
        outcome = run_trial(self.params, self.rule, self.books, 0, 5, branch=Branch.S)
        self.assertEqual(outcome, TrialOutcome(0, 1, 1, 1, 1, Branch.S, outcome.typical))

    def test_trial_is_deterministic(self):
        first = run_trial(self.params, self.rule, self.books, 1, 123)
        self.assertEqual(first, run_trial(self.params, self.rule, self.books, 1, 123))

    def test_single_trial_stats(self):
        tp = typical_set_probability(self.params.src.p_x, self.params.n, self.params.mu,
                                     seed=self.params.noise_seed)
        o0 = run_trial(self.params, self.rule, self.books, 0, derive_seed(11, 0, 0), tp)
        o1 = run_trial(self.params, self.rule, self.books, 1, derive_seed(11, 0, 1), tp)
        stats = estimate_errors(self.params, self.rule, 1, 11, self.books)
        self.assertEqual(stats.trials, 1)
        self.assertEqual(stats.alpha1_count, int(o0.h_hat_y == 1))
        self.assertEqual(stats.alpha2_count, int(o0.h_hat_z == 1))
        self.assertEqual(stats.beta1_count, int(o1.h_hat_y == 0))
        self.assertEqual(stats.beta2_count, int(o1.h_hat_z == 0))
        self.assertEqual(stats.mean_len1, o0.len_m1)
        with self.assertRaises(ValueError):
            estimate_errors(self.params, self.rule, 0, 11, self.books)

    def test_reproducible_and_parallel(self):
        first = estimate_errors(self.params, self.rule, 40, 3, self.books)
        self.assertEqual(first.to_dict(), estimate_errors(self.params, self.rule, 40, 3,
                                                          self.books).to_dict())
        parallel = estimate_errors(self.params, self.rule, 40, 3, self.books, n_jobs=2)
        self.assertEqual(first.to_dict(), parallel.to_dict())

    def test_transcript(self):
        out = io.StringIO()
        estimate_errors(self.params, self.rule, 5, 3, self.books, transcript=out)
        records = [json.loads(line) for line in out.getvalue().splitlines()]
        self.assertEqual(len(records), 10)
        self.assertEqual([r["hyp"] for r in records], [0] * 5 + [1] * 5)
        self.assertEqual(set(records[0]), {"hyp", "h_hat_y", "h_hat_z", "len_m1", "len_m2",
                                           "branch", "typical", "trial_index"})

    def test_rates_and_blocklength(self):
        rates = scheme_rates(self.params)
        self.assertAlmostEqual(rates.r1, (1 - 0.3 + 0.2) * 0.4, places=12)
        self.assertAlmostEqual(rates.r2, (1 - 0.3 + 0.2) * 0.4, places=12)
        self.assertEqual(min_blocklength(scheme_params(EpsilonPair.equal(0.05), mu=0.01)), 5)

    def test_parameter_checks(self):
        src = dsbs()
        eps = EpsilonPair.equal(0.3)
        sol = constant_solution(src, Regime.EQUAL, eps)
        with self.assertRaises(ValueError):
            SchemeParams(src, Regime.EQUAL, 40, 0., eps, sol)
        with self.assertRaises(ValueError):
            SchemeParams(src, Regime.EQUAL, 40, 0.2, EpsilonPair(0.1, 0.3), sol)
        with self.assertRaises(ValueError):
            SchemeParams(src, Regime.EPS2_GREATER, 40, 0.2, EpsilonPair(0.1, 0.3), sol)


class TestFlaggedSchemes(unittest.TestCase):
    def test_eps2_greater_double_primed_relay(self):
        params = scheme_params(EpsilonPair(0.1, 0.3))
        rule = partition_rule_for(params)
        books = build_codebooks(params)
        typical = 0
        for seed in range(20):
            outcome = run_trial(params, rule, books, 0, seed, branch=Branch.DDPRIME)
            self.assertIs(outcome.branch, Branch.DDPRIME)
            self.assertEqual(outcome.len_m2, 2)
            self.assertEqual(outcome.h_hat_z, 1)
            if outcome.typical:
                typical += 1
                self.assertGreaterEqual(outcome.len_m1, 3)
        self.assertGreater(typical, 0)

    def test_failed_double_primed_encoding_keeps_flag(self):
        for eps in (EpsilonPair(0.1, 0.3), EpsilonPair(0.3, 0.1)):
            params = scheme_params(eps, mu=0.01)
            rule = partition_rule_for(params)
            books = build_codebooks(params)
            atypical = 0
            for seed in range(20):
                outcome = run_trial(params, rule, books, 0, seed, branch=Branch.DDPRIME)
                self.assertIs(outcome.branch, Branch.DDPRIME)
                if not outcome.typical:
                    atypical += 1
                    self.assertEqual((outcome.len_m1, outcome.len_m2), (2, 2))
                    self.assertEqual((outcome.h_hat_y, outcome.h_hat_z), (1, 1))
            self.assertGreater(atypical, 0, msg=eps.regime.value)

    def test_eps2_greater_length_bound(self):
        params = scheme_params(EpsilonPair(0.1, 0.3))
        rule = partition_rule_for(params)
        stats = estimate_errors(params, rule, 200, 5)
        len1, _ = length_bound(params, rule)
        self.assertLessEqual(stats.mean_len1, len1 + 1e-12)

    def test_eps1_greater_relay_declares_one(self):
        params = scheme_params(EpsilonPair(0.3, 0.1))
        rule = partition_rule_for(params)
        books = build_codebooks(params)
        self.assertEqual(set(books), {"u1_prime", "u1_dprime", "u2_prime", "u2_dprime"})
        for hyp in (0, 1):
            for seed in range(20):
                outcome = run_trial(params, rule, books, hyp, seed, branch=Branch.DDPRIME)
                self.assertEqual(outcome.h_hat_y, 1)


class TestBranchFrequencies(unittest.TestCase):
    def assertBranchFrequencies(self, eps):
        params = scheme_params(eps, mu=0.1)
        stats = estimate_errors(params, partition_rule_for(params), 4000, 21)
        counts = stats.branch_counts
        self.assertEqual(sum(counts.values()), stats.trials)
        self.assertAlmostEqual(counts.get("S", 0) / stats.trials,
                               min(eps.eps1, eps.eps2) - params.mu, delta=0.03)
        self.assertAlmostEqual(counts.get("Ddprime", 0) / stats.trials,
                               abs(eps.eps2 - eps.eps1), delta=0.03)
        typical_prob = typical_set_probability(params.src.p_x, params.n, params.mu)
        self.assertGreater(stats.atypical_count, 0)
        self.assertAlmostEqual(stats.atypical_count / stats.trials, 1. - typical_prob,
                               delta=0.03)

    def test_eps2_greater(self):
        self.assertBranchFrequencies(EpsilonPair(0.2, 0.4))

    def test_eps1_greater(self):
        self.assertBranchFrequencies(EpsilonPair(0.4, 0.2))


def noiseless_source():
    return compose_two_hop(Pmf.uniform(2), ConditionalPmf.identity(2),
                           ConditionalPmf.identity(2))


class TestExponentSweep(unittest.TestCase):
    """Identity channel on the first hop, zero rate on the second.

    Under H=1 the relay accepts only when y^n equals x^n, so both type-II
    errors behave like 2^-n while the codebook covers every sequence.
    """

    @classmethod
    def setUpClass(cls):
        cls.src = noiseless_source()
        cls.eps = EpsilonPair.equal(0.05)
        cfg = OptimizerConfig(u_cardinality=2, refine_iterations=0)
        cls.achieved, cls.solution = region_equal_eps(cls.src, RateBudget(1., 0.), cls.eps, cfg)
        cls.params = SchemeParams(cls.src, Regime.EQUAL, 4, 1., cls.eps, cls.solution)
        cls.sweep = sweep_blocklengths(cls.params, (4, 6, 8), 8000, master_seed=5)

    def test_channels(self):
        self.assertAlmostEqual(self.achieved.theta1, 1., places=9)
        self.assertAlmostEqual(self.achieved.theta2, 1., places=9)
        rows = self.solution.channels["u1"].rows
        assert_array_equal(np.sort(rows, axis=1), [[0., 1.], [0., 1.]])
        self.assertNotEqual(np.argmax(rows[0]), np.argmax(rows[1]))

    def test_shrinking_mu(self):
        self.assertEqual(self.sweep.ns, (4, 6, 8))
        for n, mu in zip(self.sweep.ns, self.sweep.mus):
            self.assertAlmostEqual(mu, SchemeParams.default_mu(n))

    def test_type_one_errors(self):
        for stats in self.sweep.stats:
            self.assertLessEqual(stats.alpha1_hat, self.eps.eps1 + 0.05)
            self.assertLessEqual(stats.alpha2_hat, self.eps.eps2 + 0.05)
            self.assertGreaterEqual(stats.alpha2_count, stats.alpha1_count)

    def test_type_two_errors_decrease(self):
        betas = [s.beta2_hat for s in self.sweep.stats]
        for shorter, longer in zip(betas, betas[1:]):
            self.assertLess(longer, shorter)
        for stats in self.sweep.stats:
            self.assertLessEqual(stats.beta2_count, stats.beta1_count)

    def test_fitted_exponents(self):
        self.assertAlmostEqual(self.sweep.fitted_exponent("beta1"), self.achieved.theta1,
                               delta=0.3)
        self.assertAlmostEqual(self.sweep.fitted_exponent("beta2"), self.achieved.theta2,
                               delta=0.3)
        report = self.sweep.to_dict()
        self.assertEqual([p["n"] for p in report["points"]], [4, 6, 8])
        self.assertEqual(report["fitted_beta2"], self.sweep.fitted_exponent("beta2"))

    def test_expected_lengths(self):
        for n, mu, stats in zip(self.sweep.ns, self.sweep.mus, self.sweep.stats):
            point = SchemeParams(self.src, Regime.EQUAL, n, mu, self.eps, self.solution)
            rates = scheme_rates(point)
            self.assertLessEqual(stats.mean_len1, 1.10 * n * rates.r1)
            self.assertLessEqual(stats.mean_len2, 1.10 * n * rates.r2)

    def test_grid_checks(self):
        with self.assertRaises(ValueError):
            sweep_blocklengths(self.params, (4,), 10, 0)
        with self.assertRaises(ValueError):
            sweep_blocklengths(self.params, (6, 4), 10, 0)


class TestOptimizedChannels(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.src = dsbs()
        cls.eps = EpsilonPair.equal(0.05)
        _, cls.solution = region_equal_eps(cls.src, RateBudget(0.1, 0.1), cls.eps)
        params = SchemeParams(cls.src, Regime.EQUAL, 20, 1., cls.eps, cls.solution)
        cls.sweep = sweep_blocklengths(params, (20, 28), 1000, master_seed=9)

    def test_type_one_errors(self):
        for stats in self.sweep.stats:
            self.assertLessEqual(stats.alpha1_hat, self.eps.eps1 + 0.05)
            self.assertLessEqual(stats.alpha2_hat, self.eps.eps2 + 0.05)

    def test_relay_rejection_propagates(self):
        for stats in self.sweep.stats:
            self.assertGreaterEqual(stats.alpha2_count, stats.alpha1_count)
            self.assertLessEqual(stats.beta2_count, stats.beta1_count)

    def test_expected_lengths(self):
        for n, mu, stats in zip(self.sweep.ns, self.sweep.mus, self.sweep.stats):
            point = SchemeParams(self.src, Regime.EQUAL, n, mu, self.eps, self.solution)
            rates = scheme_rates(point)
            len1, len2 = length_bound(point)
            self.assertLessEqual(stats.mean_len1, min(len1, 1.10 * n * rates.r1) + 1e-12)
            self.assertLessEqual(stats.mean_len2, min(len2, 1.10 * n * rates.r2) + 1e-12)


class TestStats(unittest.TestCase):
    def test_wilson_interval(self):
        low, high = wilson_interval(0, 10)
        self.assertEqual(low, 0.)
        self.assertAlmostEqual(high, 0.277532, places=5)
        low, high = wilson_interval(5, 10)
        self.assertAlmostEqual(low + high, 1., places=12)
        with self.assertRaises(ValueError):
            wilson_interval(0, 0)

    def test_from_outcomes(self):
        h0 = [TrialOutcome(0, 1, 1, 1, 1, Branch.S),
              TrialOutcome(0, 0, 0, 5, 3, Branch.DPRIME, False)]
        h1 = [TrialOutcome(1, 0, 1, 4, 1, Branch.DPRIME), TrialOutcome(1, 1, 1, 1, 1, Branch.S)]
        stats = SimulationStats.from_outcomes(h0, h1)
        self.assertEqual((stats.alpha1_hat, stats.beta1_hat, stats.beta2_hat), (0.5, 0.5, 0.))
        self.assertEqual(stats.mean_len1, 3.)
        self.assertEqual(stats.branch_counts, {"Dprime": 1, "S": 1})
        self.assertEqual(stats.atypical_count, 1)
        self.assertEqual(stats.to_dict()["atypical_count"], 1)
        with self.assertRaises(ValueError):
            SimulationStats.from_outcomes(h0, h1[:1])

    def test_fit_exponent(self):
        ns = [10, 20, 40]
        self.assertAlmostEqual(fit_exponent(ns, [2. ** (-0.3 * n) for n in ns]), 0.3, places=9)
        self.assertAlmostEqual(fit_exponent(ns, [0.5 ** 3, 0.5 ** 6, 0.]), 0.3, places=9)
        with self.assertRaises(ValueError):
            fit_exponent(ns, [0.1, 0., 0.])


if __name__ == '__main__':
    unittest.main()
