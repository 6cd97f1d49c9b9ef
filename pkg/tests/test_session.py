# -*- coding: utf-8 -*-
from __future__ import absolute_import, division, print_function

import os
import shutil
import tempfile
import unittest

import numpy as np

from sdlab.core import IncompleteLogError, ValidationError
from sdlab.network import GameParams
from sdlab.policies import Part, ScriptedAlternating, ScriptedConstant
from sdlab.session import (BETWEEN_PARTS, AgentStatus, GroupState,
                           SessionConfig, apply_dropout, compute_payment,
                           points_to_yuan, read_session_log, run_groups,
                           run_session, waiting_compensation,
                           write_session_log)


def _policies(**special):
    """
    Six always-distancing bots; keyword ``a<k>`` replaces agent ``k``
    """
    policies = [ScriptedConstant(action=True) for _ in range(6)]
    for key, policy in special.items():
        policies[int(key[1:])] = policy
    return policies


def _factory(config):
    return _policies(a0=ScriptedAlternating())


class SessionConfigTestCase(unittest.TestCase):
    """
    Test suite for SessionConfig
    """
    def test_validation(self):
        with self.assertRaises(ValidationError):
            SessionConfig(intervention='tax')
        with self.assertRaises(ValidationError):
            SessionConfig(params=GameParams.lab_defaults(fine=15))
        with self.assertRaises(ValidationError):
            SessionConfig(subject_ids=('a', 'b'))
        with self.assertRaises(ValidationError):
            SessionConfig(rounds_per_part=0)

    def test_params_for_part(self):
        fine = SessionConfig(environment='star', intervention='fine')
        self.assertEqual(fine.params_for(Part.BASELINE).fine, 0.0)
        self.assertEqual(fine.params_for(Part.INTERVENTION).fine, 15.0)
        nudge = SessionConfig(intervention='nudge')
        self.assertTrue(nudge.params_for(Part.INTERVENTION).nudge)
        self.assertEqual(nudge.params_for(Part.INTERVENTION).fine, 0.0)

    def test_dict_round_trip(self):
        config = SessionConfig(environment='star', intervention='nudge',
                               seed=4, group_id=3,
                               subject_ids=tuple('abcdef'))
        self.assertEqual(SessionConfig.from_dict(config.to_dict()), config)


class RunSessionTestCase(unittest.TestCase):
    """
    Test suite for the session state machine
    """
    def setUp(self):
        self.config = SessionConfig(seed=3)

    def test_complete_session(self):
        log = run_session(self.config, _policies())
        self.assertTrue(log.complete)
        self.assertEqual(len(log.records), 40)
        self.assertEqual([r.global_round for r in log.records],
                         list(range(1, 41)))
        self.assertEqual(log.analysis_agents, [0, 1, 2, 3, 4])
        self.assertFalse(log.has_substitution)
        for record in log.records:
            self.assertEqual(sorted(record.agent_ids), [0, 1, 2, 3, 4])
            self.assertIsNotNone(record.ghost)
            self.assertEqual(record.ghost.agent_id, 5)

    def test_needs_six_policies(self):
        with self.assertRaises(ValidationError):
            run_session(self.config, _policies()[:5])

    def test_reproducible(self):
        a = run_session(self.config, _policies())
        b = run_session(self.config, _policies())
        self.assertEqual(a.records, b.records)

    def test_ghost_does_not_affect_group(self):
        a = run_session(self.config, _policies())
        b = run_session(self.config,
                        _policies(a5=ScriptedConstant(action=False)))
        self.assertEqual([(r.agent_ids, r.outcome) for r in a.records],
                         [(r.agent_ids, r.outcome) for r in b.records])
        self.assertNotEqual([r.ghost for r in a.records],
                            [r.ghost for r in b.records])

    def test_three_timeouts_disqualify(self):
        policy = ScriptedConstant(action=True,
                                  timeout_rounds=frozenset([3, 4, 5]))
        log = run_session(self.config, _policies(a1=policy))
        self.assertTrue(log.complete)
        self.assertIs(log.status[1], AgentStatus.DISQUALIFIED)
        self.assertEqual(log.analysis_agents, [0, 2, 3, 4, 5])
        event = log.events[0]
        self.assertEqual((event.global_round, event.dropout_id,
                          event.ghost_id, event.reason),
                         (5, 1, 5, 'timeout'))
        for record in log.records:
            if record.global_round <= 5:
                self.assertIn(1, record.agent_ids)
            else:
                self.assertNotIn(1, record.agent_ids)
                self.assertIn(5, record.agent_ids)
                self.assertIsNone(record.ghost)
        # timeouts count as not distancing and cost the penalty
        third = log.records[2]
        position, distanced, timed_out, points = third.decision_of(1)
        self.assertFalse(distanced)
        self.assertTrue(timed_out)
        self.assertIn(points, (50.0, -50.0))

    def test_scattered_timeouts_do_not_disqualify(self):
        policy = ScriptedConstant(action=True,
                                  timeout_rounds=frozenset([3, 5, 7, 9]))
        log = run_session(self.config, _policies(a2=policy))
        self.assertIs(log.status[2], AgentStatus.ACTIVE)
        self.assertFalse(log.events)

    def test_substitution_keeps_earlier_rounds(self):
        plain = run_session(self.config, _policies())
        left = run_session(self.config,
                           _policies(a2=ScriptedConstant(leave_round=10)))
        self.assertEqual(plain.records[:9], left.records[:9])
        self.assertEqual(left.analysis_agents, [0, 1, 3, 4, 5])
        self.assertIs(left.status[2], AgentStatus.DROPPED_OUT)
        self.assertEqual(left.promoted_ghosts, [5])
        self.assertTrue(left.complete)

    def test_leaving_before_intervention(self):
        log = run_session(self.config,
                          _policies(a0=ScriptedConstant(leave_round=21)))
        self.assertEqual(log.events[0].part, BETWEEN_PARTS)
        self.assertTrue(log.complete)

    def test_second_dropout_loses_group(self):
        log = run_session(self.config, _policies(
            a1=ScriptedConstant(leave_round=5),
            a2=ScriptedConstant(leave_round=8)))
        self.assertTrue(log.lost)
        self.assertFalse(log.complete)
        self.assertEqual(len(log.records), 7)
        with self.assertRaises(IncompleteLogError):
            compute_payment(log, 0)

    def test_ghost_leaving_first(self):
        log = run_session(self.config, _policies(
            a5=ScriptedConstant(leave_round=3),
            a4=ScriptedConstant(leave_round=6)))
        self.assertTrue(log.lost)
        self.assertIsNone(log.events[0].ghost_id)
        self.assertIsNone(log.records[2].ghost)

    def test_apply_dropout_rejects_active_status(self):
        state = GroupState.initial(_policies())
        with self.assertRaises(ValidationError):
            apply_dropout(state, 1, 'baseline', 1, 1,
                          status=AgentStatus.ACTIVE)
        # leaving twice changes nothing
        once = apply_dropout(state, 1, 'baseline', 1, 1)
        self.assertEqual(apply_dropout(once, 1, 'baseline', 2, 2), once)

    def test_sequences(self):
        log = run_session(self.config, _policies(a0=ScriptedAlternating()))
        sequence = log.sequences(Part.BASELINE)[0]
        self.assertEqual(len(sequence), 20)
        self.assertEqual([d for _, d in sequence], [True, False] * 10)

    def test_run_groups(self):
        configs = [SessionConfig(seed=s, group_id=s) for s in range(3)]
        logs = run_groups(configs, _factory, threads=1)
        self.assertEqual(len(logs), 3)
        self.assertEqual(logs[1].records,
                         run_session(configs[1], _factory(configs[1])).records)


class PaymentTestCase(unittest.TestCase):
    """
    Test suite for payments
    """
    def test_conversion(self):
        self.assertEqual(points_to_yuan(260), 5.2)
        self.assertEqual(points_to_yuan(300), 6.0)
        self.assertEqual(points_to_yuan(-35), -0.7)

    def test_waiting_compensation(self):
        self.assertEqual(waiting_compensation(0), 0.0)
        self.assertEqual(waiting_compensation(59), 0.4)
        self.assertEqual(waiting_compensation(600), 5.0)
        self.assertEqual(waiting_compensation(-10), 0.0)

    def test_compute_payment(self):
        policy = ScriptedConstant(action=True,
                                  timeout_rounds=frozenset([1, 2, 3]))
        log = run_session(SessionConfig(seed=8), _policies(a3=policy))
        payments = compute_payment(log, np.random.default_rng(1),
                                   waiting_seconds=(40,) * 6,
                                   bret={0: 3.3})
        self.assertEqual(len(payments), 6)
        rounds = payments[0].paid_rounds
        for part in ('baseline', 'intervention'):
            self.assertEqual(len(set(rounds[part])), 4)
        for payment in payments:
            self.assertEqual(payment.paid_rounds, rounds)
        # the disqualified agent receives nothing
        self.assertEqual(payments[3].total, 0.0)
        first = payments[0]
        self.assertEqual(first.fixed, 5.0)
        self.assertEqual(first.waiting, 0.4)
        self.assertEqual(first.bret, 3.3)
        for part, value in (('baseline', first.baseline),
                            ('intervention', first.intervention)):
            points = sum(r.decision_of(0)[3]
                         for r in log.part_records(Part(part))
                         if r.round in rounds[part])
            self.assertEqual(value, points_to_yuan(points))
        self.assertAlmostEqual(first.total, 5.0 + first.baseline +
                               first.intervention + 0.4 + 3.3)

    def test_fines_can_outweigh_earnings(self):
        # not distancing costs more than staying healthy earns
        config = SessionConfig(seed=3, fine_points=200.0)
        log = run_session(config, [ScriptedConstant(action=False)] * 6)
        payments = compute_payment(log, 2)
        for payment in payments:
            self.assertGreaterEqual(payment.baseline, 0.0)
            self.assertLess(payment.intervention, 0.0)
            self.assertAlmostEqual(payment.total, 5.0 + payment.baseline +
                                   payment.intervention + payment.waiting)


class SessionLogFileTestCase(unittest.TestCase):
    """
    Test suite for JSON-lines session logs
    """
    def setUp(self):
        self.path = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.path, ignore_errors=True)

    def test_write_and_read(self):
        log = run_session(SessionConfig(environment='star', seed=2),
                          _policies(a1=ScriptedConstant(leave_round=12)))
        payments = compute_payment(log, 4)
        path = os.path.join(self.path, 'group.jsonl')
        write_session_log(log, path, payments)
        back = read_session_log(path)
        self.assertEqual(back.config, log.config)
        self.assertEqual(back.records, log.records)
        self.assertEqual(back.events, log.events)
        self.assertEqual(back.status, log.status)
        self.assertEqual([p.total for p in back.payments],
                         [p.total for p in payments])

    def test_truncated_file(self):
        path = os.path.join(self.path, 'broken.jsonl')
        with open(path, 'w') as fh:
            fh.write('{"type": "note"}\n')
        with self.assertRaises(IncompleteLogError):
            read_session_log(path)


if __name__ == '__main__':
    unittest.main()
