# -*- coding: utf-8 -*-
"""
Detection of stable individual strategies

A subject converges to strategy ``s`` by round ``n`` when they followed
``s`` in rounds ``n-k+1 .. n`` and afterwards never deviated from it for
more than ``a`` consecutive rounds. A deviation run reaching the last
round counts against ``a`` like any other.

Three strategy families are considered: always the same action; in star
environments also one action as hub and the complement as recipient, or
one action as hub and alternation over the subject's own recipient
rounds.

:copyright:
    The sdlab Development Team
:license:
    GNU Lesser General Public License, Version 3
    (https://www.gnu.org/copyleft/lesser.html)
"""
from __future__ import absolute_import, division, print_function

from dataclasses import dataclass
import enum

import numpy as np
import pandas as pd

from .core import ConvergenceInputError, warn
from .network import EnvironmentKind
from .policies import Part
from .utils import debug


HUB = 0
THRESHOLD = 0.7
CUTOFF_ROUND = 11


class Family(enum.IntEnum):
    CONSTANT_ACTION = 0
    ROLE_CONSTANT = 1
    HUB_CONSTANT_RECIPIENT_ALTERNATING = 2


@dataclass(frozen=True, order=True)
class StrategySpec(object):
    """
    ``action`` is the constant action, or the hub action for the star
    families; ``recipient_first`` fixes the phase of the alternation.
    """
    family: Family
    action: bool
    recipient_first: bool = None

    def prescriptions(self, roles):
        """
        Prescribed action for every round given the sequence of positions
        """
        result = []
        recipient_rounds = 0
        for role in roles:
            if self.family is Family.CONSTANT_ACTION or role == HUB:
                result.append(self.action)
            elif self.family is Family.ROLE_CONSTANT:
                result.append(not self.action)
            else:
                phase = recipient_rounds % 2 == 0
                result.append(self.recipient_first == phase)
                recipient_rounds += 1
        return result

    def __str__(self):
        name = {
            Family.CONSTANT_ACTION: 'ConstantAction',
            Family.ROLE_CONSTANT: 'RoleConstant',
            Family.HUB_CONSTANT_RECIPIENT_ALTERNATING:
                'HubConstantRecipientAlternating',
        }[self.family]
        text = '%s(%s' % (name, 'distance' if self.action else 'no')
        if self.recipient_first is not None:
            text += ', recipient starts %s' % (
                'distance' if self.recipient_first else 'no')
        return text + ')'


@dataclass(frozen=True)
class ConvergenceResult(object):
    converged: bool
    round_n: int = None
    strategy: StrategySpec = None

    def converged_by(self, round_number):
        return self.converged and self.round_n <= round_number


def candidate_strategies(env):
    """
    Strategies in tie-break order
    """
    env = EnvironmentKind.parse(env)
    strategies = [StrategySpec(Family.CONSTANT_ACTION, True),
                  StrategySpec(Family.CONSTANT_ACTION, False)]
    if env is EnvironmentKind.SUPERSPREADER:
        strategies += [StrategySpec(Family.ROLE_CONSTANT, True),
                       StrategySpec(Family.ROLE_CONSTANT, False)]
        for hub in (True, False):
            for first in (True, False):
                strategies.append(StrategySpec(
                    Family.HUB_CONSTANT_RECIPIENT_ALTERNATING, hub, first))
    return strategies


def _qualifying_rounds(matches, k, a):
    """
    Rounds (1-based) at which a 0/1 match vector qualifies
    """
    length = len(matches)
    rounds = []
    for n in range(k, length + 1):
        if not all(matches[n - k:n]):
            continue
        run = longest = 0
        for hit in matches[n:]:
            run = 0 if hit else run + 1
            longest = max(longest, run)
        if longest <= a:
            rounds.append(n)
    return rounds


def _check(seq, k, a, env, length, strategies):
    if k < 1:
        raise ConvergenceInputError('k must be at least 1')
    if a < 0:
        raise ConvergenceInputError('a must not be negative')
    if length is not None and len(seq) != length:
        raise ConvergenceInputError('sequence has %d rounds, expected %d' % (
            len(seq), length))
    env = EnvironmentKind.parse(env)
    if strategies is None:
        return candidate_strategies(env)
    if env is EnvironmentKind.HOMOGENEOUS and any(
            s.family is not Family.CONSTANT_ACTION for s in strategies):
        raise ConvergenceInputError('role based strategies need a star '
                                    'environment')
    return sorted(strategies)


def all_qualifying(seq, k=4, a=2, env=EnvironmentKind.HOMOGENEOUS,
                   length=20, strategies=None):
    """
    Every (strategy, earliest round) pair under which ``seq`` converges

    ``seq`` holds one ``(position, distanced)`` pair per round.
    """
    strategies = _check(seq, k, a, env, length, strategies)
    roles = [int(role) for role, _ in seq]
    actions = [bool(action) for _, action in seq]
    result = []
    for strategy in strategies:
        prescribed = strategy.prescriptions(roles)
        matches = [p == x for p, x in zip(prescribed, actions)]
        rounds = _qualifying_rounds(matches, k, a)
        if rounds:
            result.append((strategy, rounds[0]))
    return result


def detect_convergence(seq, k=4, a=2, env=EnvironmentKind.HOMOGENEOUS,
                       length=20, strategies=None):
    """
    Earliest convergence round; ties go to the first strategy family

    >>> seq = [(0, True)] * 11 + [(0, False)] * 3 + [(0, True)] * 6
    >>> detect_convergence(seq, k=4, a=2).round_n
    18
    """
    found = all_qualifying(seq, k, a, env, length, strategies)
    if not found:
        return ConvergenceResult(False)
    strategy, round_n = min(found, key=lambda item: (item[1], item[0]))
    return ConvergenceResult(True, round_n, strategy)


def _subject_population(log, agent_id, subjects):
    if subjects is None or log.config.subject_ids is None:
        return None
    subject = subjects.get(log.config.subject_ids[agent_id])
    if subject is None:
        return None
    return 'Hubei' if subject.hubei else 'non-Hubei'


def convergence_records(logs, k=4, a=2, subjects=None,
                        exclude_ghosts=False):
    """
    One record per subject and part with the convergence round
    """
    records = []
    for log in logs:
        if not log.complete:
            warn('group %d is incomplete and skipped' % log.config.group_id)
            continue
        agents = log.analysis_agents
        if exclude_ghosts:
            promoted = set(log.promoted_ghosts)
            agents = [x for x in agents if x not in promoted]
        env = log.config.environment
        for part in Part:
            sequences = log.sequences(part, agents)
            for agent_id, seq in sequences.items():
                result = detect_convergence(
                    seq, k, a, env, length=log.config.rounds_per_part)
                records.append({
                    'group_id': log.config.group_id,
                    'agent_id': agent_id,
                    'part': part.value,
                    'network': env.value,
                    'intervention': log.config.intervention,
                    'population': _subject_population(log, agent_id,
                                                      subjects),
                    'round_n': result.round_n if result.converged
                    else np.nan,
                    'strategy': str(result.strategy) if result.converged
                    else '',
                    'rounds': log.config.rounds_per_part,
                })
    return pd.DataFrame(records, columns=[
        'group_id', 'agent_id', 'part', 'network', 'intervention',
        'population', 'round_n', 'strategy', 'rounds'])


def _shares(rounds, length):
    """
    Share converged by each round 1..length
    """
    rounds = np.asarray(rounds, dtype=float)
    return np.array([(rounds <= r).mean() for r in range(1, length + 1)])


def _row(part, network, intervention, population, frame, threshold, cutoff):
    length = int(frame['rounds'].max())
    shares = _shares(frame['round_n'], length)
    over = np.nonzero(shares > threshold)[0]
    return {
        'part': part,
        'network': network,
        'intervention': intervention,
        'population': population,
        'n': len(frame),
        'round_over_threshold': int(over[0]) + 1 if len(over) else np.nan,
        'pct_by_cutoff': round(100.0 * shares[min(cutoff, length) - 1], 1),
    }


def cohort_convergence_table(logs, k=4, a=2,
                             by=('network', 'population', 'intervention'),
                             subjects=None, exclude_ghosts=False,
                             threshold=THRESHOLD, cutoff=CUTOFF_ROUND):
    """
    Convergence summary per part and stratum

    Each part gets an overall row followed by one row per value of every
    stratifying column in ``by``. ``n`` counts subjects, the next column is
    the first round by which more than ``threshold`` of them converged and
    the last the percentage converged by round ``cutoff``.
    """
    logs = list(logs)
    if not logs:
        raise ConvergenceInputError('no session logs given')
    records = convergence_records(logs, k, a, subjects, exclude_ghosts)
    rows = []
    for part in Part:
        frame = records[records['part'] == part.value]
        if frame.empty:
            warn('no subjects in part %s' % part.value)
            continue
        rows.append(_row(part.value, 'all', 'all', 'all', frame, threshold,
                         cutoff))
        for column in by:
            if column == 'population' and frame[column].isna().all():
                warn('population rows need subjects and are omitted')
                continue
            values = sorted(v for v in frame[column].dropna().unique())
            for value in values:
                stratum = frame[frame[column] == value]
                labels = {'network': 'all', 'intervention': 'all',
                          'population': 'all'}
                labels[column] = value
                if stratum.empty:
                    warn('empty stratum %s=%s' % (column, value))
                    continue
                rows.append(_row(part.value, labels['network'],
                                 labels['intervention'],
                                 labels['population'], stratum, threshold,
                                 cutoff))
    debug('convergence table with', len(rows), 'rows')
    return pd.DataFrame(rows, columns=[
        'part', 'network', 'intervention', 'population', 'n',
        'round_over_threshold', 'pct_by_cutoff'])


def convergence_curve(logs, k=4, a_values=(1, 2, 3), subjects=None,
                      exclude_ghosts=False):
    """
    Share converged by every round from ``k`` on, per part and ``a``
    """
    logs = list(logs)
    rows = []
    for a in a_values:
        records = convergence_records(logs, k, a, subjects, exclude_ghosts)
        for part in Part:
            frame = records[records['part'] == part.value]
            if frame.empty:
                continue
            length = int(frame['rounds'].max())
            shares = _shares(frame['round_n'], length)
            for r in range(k, length + 1):
                rows.append({'part': part.value, 'a': a, 'round': r,
                             'share': shares[r - 1]})
    return pd.DataFrame(rows, columns=['part', 'a', 'round', 'share'])


def _position_role(environment, position):
    if environment is EnvironmentKind.HOMOGENEOUS:
        return 'homogeneous'
    return 'hub' if position == HUB else 'recipient'


def mean_distancing_series(logs, subjects=None):
    """
    Mean distancing per round, by part, intervention and population

    Every decision of the five active agents counts; timeouts count as not
    distancing. Further rows split by network and by the position's role in
    it (``hub``, ``recipient`` or ``homogeneous``); columns pooled in a
    layout read ``all``.
    """
    rows = []
    for log in logs:
        environment = log.config.environment
        for record in log.records:
            for position, agent_id in enumerate(record.agent_ids):
                rows.append({
                    'part': record.part.value,
                    'round': record.round,
                    'network': environment.value,
                    'position': _position_role(environment, position),
                    'intervention': log.config.intervention,
                    'population': _subject_population(log, agent_id,
                                                      subjects) or 'all',
                    'distanced': int(record.outcome.actions[position]),
                })
    keys = ['part', 'round', 'network', 'position', 'intervention',
            'population']
    columns = keys + ['mean_distancing', 'decisions']
    if not rows:
        return pd.DataFrame(columns=columns)
    frame = pd.DataFrame(rows)
    layouts = [(), ('intervention',),
               ('network', 'position'),
               ('network', 'position', 'intervention')]
    if subjects is not None:
        layouts += [('population',), ('intervention', 'population'),
                    ('network', 'position', 'population')]
    tables = []
    for split in layouts:
        pooled = {c: 'all' for c in keys[2:] if c not in split}
        tables.append(frame.assign(**pooled).groupby(keys)[
            'distanced'].agg(['mean', 'count']).reset_index())
    table = pd.concat(tables, ignore_index=True)
    table.columns = columns
    return table.sort_values(keys[2:] + ['part', 'round']).reset_index(
        drop=True)
