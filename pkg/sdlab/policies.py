# -*- coding: utf-8 -*-
"""
Bot policies standing in for human subjects

Every policy is a frozen value; its decision depends only on the decision
context and on draws from the random stream handed to it.

:copyright:
    The sdlab Development Team
:license:
    GNU Lesser General Public License, Version 3
    (https://www.gnu.org/copyleft/lesser.html)
"""
from __future__ import absolute_import, division, print_function

from dataclasses import dataclass, field
import enum

import numpy as np

from .core import NoPureEquilibriumError, ValidationError
from .equilibrium import enumerate_nash, payoff_table
from .network import EnvironmentKind


class Decision(enum.Enum):
    NO_DISTANCE = 0
    DISTANCE = 1
    TIMEOUT = 2

    @property
    def distanced(self):
        return self is Decision.DISTANCE

    @classmethod
    def of(cls, distancing):
        return cls.DISTANCE if distancing else cls.NO_DISTANCE


class Part(enum.Enum):
    BASELINE = 'baseline'
    INTERVENTION = 'intervention'


@dataclass(frozen=True)
class DecisionContext(object):
    """
    What a bot knows when it decides

    ``round`` counts within the part (1-based); ``global_round`` runs over
    both parts. ``history`` holds the group's resolved round records.
    """
    agent_id: int
    part: Part
    round: int
    global_round: int
    position: int
    network: object
    environment: EnvironmentKind
    params: object
    history: tuple = ()
    subject: object = None
    intervention: str = None


@dataclass(frozen=True)
class BotPolicy(object):
    """
    Base policy; scripted timeouts and departures apply to every subclass

    ``timeout_rounds`` : frozenset of int
        Global rounds in which the bot fails to submit a decision.
    ``leave_round`` : int or None
        Global round from which the bot is gone.
    """
    timeout_rounds: frozenset = field(default_factory=frozenset)
    leave_round: int = None

    def decide(self, context, rng):
        raise NotImplementedError


@dataclass(frozen=True)
class ScriptedConstant(BotPolicy):
    action: bool = True

    def decide(self, context, rng):
        return Decision.of(self.action)


@dataclass(frozen=True)
class ScriptedAlternating(BotPolicy):
    first: bool = True

    def decide(self, context, rng):
        return Decision.of(self.first == (context.global_round % 2 == 1))


@dataclass(frozen=True)
class Scripted(BotPolicy):
    """
    Explicit action per global round; the last entry repeats
    """
    actions: tuple = (True,)

    def decide(self, context, rng):
        index = min(context.global_round, len(self.actions)) - 1
        return Decision.of(self.actions[index])


@dataclass(frozen=True)
class NashRole(BotPolicy):
    """
    Play the prescription of one equilibrium for the current role

    Equilibria are taken in canonical order for the parameters of the
    current part; ``index`` selects one of them.
    """
    index: int = 0

    def decide(self, context, rng):
        profiles = enumerate_nash(context.network, context.params)
        if not profiles:
            raise NoPureEquilibriumError('no pure equilibrium to follow')
        profile = profiles[self.index % len(profiles)]
        return Decision.of(profile[context.position])


def _role_class(environment, position):
    if environment is EnvironmentKind.SUPERSPREADER:
        return 'hub' if position == 0 else 'recipient'
    return 'node'


@dataclass(frozen=True)
class NoisyBestResponse(BotPolicy):
    """
    Best respond to the empirical distancing rates of the others

    Others at a position of role type ``r`` are believed to distance
    independently with the frequency observed for role ``r`` among the
    other agents in the group history (0.5 without data). With probability
    ``epsilon`` a uniformly random action is taken instead.
    """
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise ValidationError('epsilon must lie in [0, 1]')

    def beliefs(self, context):
        counts = {}
        for record in context.history:
            for position, agent in enumerate(record.agent_ids):
                if agent == context.agent_id:
                    continue
                role = _role_class(context.environment, position)
                seen, distanced = counts.get(role, (0, 0))
                counts[role] = (seen + 1,
                                distanced + int(record.outcome.actions[
                                    position]))
        n = context.network.n
        q = np.empty(n)
        for position in range(n):
            seen, distanced = counts.get(
                _role_class(context.environment, position), (0, 0))
            q[position] = distanced / seen if seen else 0.5
        return q

    def expected_payoffs(self, context):
        n = context.network.n
        me = context.position
        table = payoff_table(context.network, context.params)
        q = self.beliefs(context)
        others = [j for j in range(n) if j != me]
        values = {True: 0.0, False: 0.0}
        for k in range(1 << len(others)):
            weight = 1.0
            bits = 0
            for slot, j in enumerate(others):
                if (k >> slot) & 1:
                    weight *= q[j]
                    bits |= 1 << j
                else:
                    weight *= 1.0 - q[j]
            if weight == 0.0:
                continue
            values[True] += weight * table[bits | (1 << me), me]
            values[False] += weight * table[bits, me]
        return values

    def decide(self, context, rng):
        if rng.random() < self.epsilon:
            return Decision.of(rng.random() < 0.5)
        values = self.expected_payoffs(context)
        return Decision.of(values[True] >= values[False])


@dataclass(frozen=True)
class Propensity(BotPolicy):
    """
    Distance with the probability given by the behavioural index model
    """
    coefficients: object = None

    def decide(self, context, rng):
        from .cohort import propensity, PropensityContext
        if context.subject is None:
            raise ValidationError('propensity bots need a subject')
        env = context.environment is EnvironmentKind.SUPERSPREADER
        treated = context.part is Part.INTERVENTION
        state = PropensityContext(
            fine=treated and context.intervention == 'fine',
            nudge=treated and context.intervention == 'nudge',
            superspreader_env=env,
            superspreader=env and context.position == 0,
            recipient=env and context.position != 0)
        prob = propensity(context.subject, state, self.coefficients)
        return Decision.of(rng.random() < prob)


def policy_decide(policy, context, rng):
    """
    Decision of ``policy``, honouring its scripted timeouts
    """
    if context.global_round in policy.timeout_rounds:
        return Decision.TIMEOUT
    return policy.decide(context, rng)
