# -*- coding: utf-8 -*-
from __future__ import absolute_import, division, print_function

import itertools
import unittest

from sdlab.core import FineCalibrationError
from sdlab.equilibrium import (all_nash_of_size, corrective_fine_interval,
                               enumerate_nash, fine_breakpoints,
                               hypothesis_report, nash_set_equals,
                               payoff_table, predicted_uptake,
                               social_optima, solve, welfare_vector)
from sdlab.network import ActionProfile, GameParams, make_environment


class EquilibriumTestCase(unittest.TestCase):
    """
    Test suite for equilibria and social optima of the two environments
    """
    def setUp(self):
        self.params = GameParams.lab_defaults()
        self.k5 = make_environment('complete', 5)
        self.star = make_environment('star', 5)

    def test_homogeneous_equilibria(self):
        nash = enumerate_nash(self.k5, self.params)
        expected = sorted(itertools.combinations(range(5), 3))
        self.assertEqual(sorted(p.members for p in nash), expected)
        self.assertAlmostEqual(predicted_uptake(self.k5, self.params), 0.6)

    def test_superspreader_equilibrium(self):
        nash = enumerate_nash(self.star, self.params)
        self.assertEqual([p.members for p in nash], [(0,)])
        self.assertAlmostEqual(predicted_uptake(self.star, self.params), 0.2)

    def test_social_optima(self):
        optima = social_optima(self.k5, self.params)
        self.assertEqual(sorted(p.members for p in optima),
                         sorted(itertools.combinations(range(5), 4)))
        self.assertEqual([p.members for p in
                          social_optima(self.star, self.params)], [(0,)])

    def test_welfare_ignores_fines(self):
        fined = self.params.replace(fine=15)
        self.assertEqual(list(welfare_vector(self.k5, self.params)),
                         list(welfare_vector(self.k5, fined)))
        self.assertNotEqual(
            list(welfare_vector(self.k5, fined, count_fines=True)),
            list(welfare_vector(self.k5, self.params)))

    def test_payoff_table(self):
        table = payoff_table(self.k5, self.params)
        self.assertEqual(table.shape, (32, 5))
        self.assertAlmostEqual(table[31, 0], 55.0)
        with self.assertRaises(ValueError):
            table[0, 0] = 1.0

    def test_fine_moves_homogeneous_equilibria(self):
        nash = enumerate_nash(self.k5, self.params.replace(fine=15))
        self.assertTrue(nash)
        self.assertTrue(all(p.size == 4 for p in nash))
        self.assertEqual(len(nash), 5)

    def test_nudge_changes_nothing(self):
        for net in (self.k5, self.star):
            for fine in (0.0, 15.0):
                base = self.params.replace(fine=fine)
                off = enumerate_nash(net, base)
                on = enumerate_nash(net, base.replace(nudge=True))
                self.assertEqual([p.bits for p in off], [p.bits for p in on])

    def test_solve_report(self):
        report = solve(self.k5, self.params)
        summary = report.summary()
        self.assertEqual(summary['nash_count'], 10)
        self.assertEqual(summary['optimum_size'], 4)
        self.assertAlmostEqual(summary['uptake'], 0.6)
        frame = report.to_frame()
        self.assertEqual(len(frame), 32)
        self.assertEqual(int(frame['is_nash'].sum()), 10)
        self.assertEqual(int(frame['is_optimal'].sum()), 5)
        self.assertEqual(frame.loc[0, 'profile_bits'], '00000')


class FineCalibrationTestCase(unittest.TestCase):
    """
    Test suite for corrective fines
    """
    def setUp(self):
        self.params = GameParams.lab_defaults()
        self.k5 = make_environment('complete', 5)
        self.star = make_environment('star', 5)

    def test_homogeneous_interval(self):
        intervals = corrective_fine_interval(self.k5, self.params,
                                             all_nash_of_size(4))
        self.assertEqual(len(intervals), 1)
        interval = intervals[0]
        self.assertAlmostEqual(interval.lower, 12.0, places=6)
        self.assertAlmostEqual(interval.upper, 25.0, places=6)
        self.assertTrue(interval.lower_closed)
        self.assertFalse(interval.upper_closed)
        self.assertIn(15.0, interval)
        self.assertNotIn(25.0, interval)

    def test_breakpoints_contain_interval_ends(self):
        points = fine_breakpoints(self.k5, self.params)
        self.assertTrue(any(abs(p - 12.0) < 1e-6 for p in points))
        self.assertTrue(any(abs(p - 25.0) < 1e-6 for p in points))
        self.assertEqual(points, sorted(points))

    def test_star_target_holds_at_fifteen(self):
        hub = [ActionProfile.from_members([0], 5)]
        intervals = corrective_fine_interval(self.star, self.params,
                                             nash_set_equals(hub))
        self.assertTrue(any(15.0 in x for x in intervals))
        self.assertTrue(any(0.0 in x for x in intervals))

    def test_unreachable_target(self):
        with self.assertRaises(FineCalibrationError):
            corrective_fine_interval(self.k5, self.params,
                                     all_nash_of_size(0), upper=5)


class HypothesisTestCase(unittest.TestCase):
    """
    Test suite for the model hypotheses
    """
    def test_report(self):
        results = hypothesis_report()
        self.assertEqual([r.name for r in results],
                         ['H1', 'H2', 'H3', 'H4', 'H5'])
        for result in results:
            self.assertTrue(result.passed, result.detail)


if __name__ == '__main__':
    unittest.main()
