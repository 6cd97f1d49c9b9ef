# -*- coding: utf-8 -*-
from __future__ import absolute_import, division, print_function

import unittest

import numpy as np

from sdlab.cohort import Calibration, gen_subjects
from sdlab.core import ValidationError
from sdlab.network import EnvironmentKind, GameParams, make_environment
from sdlab.policies import (Decision, DecisionContext, NashRole,
                            NoisyBestResponse, Part, Propensity, Scripted,
                            ScriptedAlternating, ScriptedConstant,
                            policy_decide)


def _context(global_round=1, position=0, env='complete', params=None,
             subject=None, part=Part.BASELINE, intervention='fine'):
    env = EnvironmentKind.parse(env)
    return DecisionContext(
        agent_id=0, part=part, round=global_round,
        global_round=global_round, position=position,
        network=make_environment(env, 5), environment=env,
        params=params or GameParams.lab_defaults(), history=(),
        subject=subject, intervention=intervention)


class ScriptedPolicyTestCase(unittest.TestCase):
    """
    Test suite for scripted bots
    """
    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_constant(self):
        policy = ScriptedConstant(action=False)
        self.assertIs(policy.decide(_context(), self.rng),
                      Decision.NO_DISTANCE)
        self.assertFalse(Decision.NO_DISTANCE.distanced)

    def test_alternating(self):
        policy = ScriptedAlternating(first=True)
        actions = [policy.decide(_context(r), self.rng).distanced
                   for r in range(1, 5)]
        self.assertEqual(actions, [True, False, True, False])

    def test_explicit_actions(self):
        policy = Scripted(actions=(True, False, False))
        actions = [policy.decide(_context(r), self.rng).distanced
                   for r in range(1, 6)]
        self.assertEqual(actions, [True, False, False, False, False])

    def test_timeouts(self):
        policy = ScriptedConstant(action=True, timeout_rounds=frozenset([2]))
        self.assertIs(policy_decide(policy, _context(2), self.rng),
                      Decision.TIMEOUT)
        self.assertIs(policy_decide(policy, _context(3), self.rng),
                      Decision.DISTANCE)
        self.assertFalse(Decision.TIMEOUT.distanced)


class StrategicPolicyTestCase(unittest.TestCase):
    """
    Test suite for equilibrium and best response bots
    """
    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_nash_role(self):
        # first homogeneous equilibrium in canonical order is {0, 1, 2}
        policy = NashRole(index=0)
        actions = [policy.decide(_context(position=k), self.rng).distanced
                   for k in range(5)]
        self.assertEqual(actions, [True, True, True, False, False])
        # the hub distances in the superspreader environment
        self.assertTrue(policy.decide(_context(env='star'),
                                      self.rng).distanced)
        self.assertFalse(policy.decide(_context(env='star', position=3),
                                       self.rng).distanced)

    def test_noisy_best_response_validation(self):
        with self.assertRaises(ValidationError):
            NoisyBestResponse(epsilon=1.5)

    def test_best_response_to_large_fine(self):
        params = GameParams.lab_defaults(fine=90)
        policy = NoisyBestResponse(epsilon=0.0)
        context = _context(params=params)
        np.testing.assert_allclose(policy.beliefs(context), [0.5] * 5)
        values = policy.expected_payoffs(context)
        self.assertAlmostEqual(values[True], 55.0)
        self.assertLess(values[False], values[True])
        self.assertIs(policy.decide(context, self.rng), Decision.DISTANCE)


class PropensityPolicyTestCase(unittest.TestCase):
    """
    Test suite for covariate driven bots
    """
    def setUp(self):
        self.rng = np.random.default_rng(0)
        self.subject = gen_subjects(1, seed=2)[0]

    def _calibration(self, intercept, fine=0.0):
        return Calibration.from_mapping({
            'intercept': intercept, 'fine': fine, 'nudge': 0.0,
            'superspreader_env': 0.0})

    def test_needs_subject(self):
        policy = Propensity(coefficients=self._calibration(0.5))
        with self.assertRaises(ValidationError):
            policy.decide(_context(), self.rng)

    def test_clipped_probabilities(self):
        always = Propensity(coefficients=self._calibration(1.4))
        never = Propensity(coefficients=self._calibration(-0.2))
        for r in range(1, 20):
            context = _context(r, subject=self.subject)
            self.assertTrue(always.decide(context, self.rng).distanced)
            self.assertFalse(never.decide(context, self.rng).distanced)

    def test_fine_enters_only_in_intervention(self):
        policy = Propensity(coefficients=self._calibration(0.0, fine=1.0))
        baseline = _context(subject=self.subject)
        treated = _context(subject=self.subject, part=Part.INTERVENTION)
        nudged = _context(subject=self.subject, part=Part.INTERVENTION,
                          intervention='nudge')
        self.assertFalse(policy.decide(baseline, self.rng).distanced)
        self.assertTrue(policy.decide(treated, self.rng).distanced)
        self.assertFalse(policy.decide(nudged, self.rng).distanced)


if __name__ == '__main__':
    unittest.main()
