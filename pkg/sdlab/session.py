# -*- coding: utf-8 -*-
"""
Experimental session with bot agents

A session runs a Baseline part and an Intervention part of
``rounds_per_part`` rounds each for a group of five active agents plus one
ghost. Positions are reassigned uniformly at random every round. An agent
who misses three decisions in a row is disqualified and the ghost takes
over the slot; a second departure loses the group.

The ghost plays a shadow version of every round at a random position; the
shadow outcome is resolved against the actions of the active agents at the
other positions. All ghost draws come from a separate random stream, so
the group's outcomes do not depend on the ghost at all until promotion.

Sessions are recorded as JSON-lines files: a header, one record per round
and a trailer holding substitution events and payments. Replaying a config
with the same seed and policies reproduces the log exactly.

:copyright:
    The sdlab Development Team
:license:
    GNU Lesser General Public License, Version 3
    (https://www.gnu.org/copyleft/lesser.html)
"""
from __future__ import absolute_import, division, print_function

from dataclasses import asdict, dataclass, field, replace
import enum
import functools
import io
import json
import math

import numpy as np

from .contagion import RoundOutcome, simulate_round
from .core import IncompleteLogError, ValidationError
from .network import (ActionProfile, EnvironmentKind, GameParams,
                      make_environment)
from .policies import Decision, DecisionContext, Part, policy_decide
from .utils import as_generator, debug, parallel_map


GROUP_SIZE = 5
MAX_CONSECUTIVE_TIMEOUTS = 3
POINTS_PER_YUAN = 50.0
FIXED_FEE = 5.0
PAID_ROUNDS_PER_PART = 4
WAITING_RATE = 0.2
WAITING_STEP_SECONDS = 20.0
WAITING_CAP = 5.0
INTERVENTIONS = ('fine', 'nudge')
BETWEEN_PARTS = 'between'


class AgentStatus(enum.Enum):
    ACTIVE = 'active'
    GHOST = 'ghost'
    DROPPED_OUT = 'dropped_out'
    DISQUALIFIED = 'disqualified'


@dataclass(frozen=True)
class SessionConfig(object):
    """
    One group's treatment cell and constants

    ``params`` holds the Baseline constants (no fine, no nudge); the
    Intervention part adds ``fine_points`` for fine sessions and sets the
    nudge flag for nudge sessions.
    """
    environment: EnvironmentKind = EnvironmentKind.HOMOGENEOUS
    intervention: str = 'fine'
    rounds_per_part: int = 20
    params: GameParams = field(default_factory=GameParams.lab_defaults)
    fine_points: float = 15.0
    seed: int = 0
    group_id: int = 0
    subject_ids: tuple = None
    waiting_seconds: tuple = None

    def __post_init__(self):
        object.__setattr__(self, 'environment',
                           EnvironmentKind.parse(self.environment))
        if self.intervention not in INTERVENTIONS:
            raise ValidationError(
                'intervention must be one of %s' % (INTERVENTIONS,))
        if self.rounds_per_part < 1:
            raise ValidationError('rounds_per_part must be positive')
        if self.params.n != GROUP_SIZE:
            raise ValidationError('sessions use groups of five positions')
        if self.params.fine != 0 or self.params.nudge:
            raise ValidationError('baseline parameters carry no treatment')
        if self.subject_ids is not None and \
                len(self.subject_ids) != GROUP_SIZE + 1:
            raise ValidationError('six subject ids are needed')

    @property
    def network(self):
        return make_environment(self.environment, GROUP_SIZE)

    def params_for(self, part):
        if part is Part.BASELINE:
            return self.params
        if self.intervention == 'fine':
            return self.params.replace(fine=float(self.fine_points))
        return self.params.replace(nudge=True)

    def to_dict(self):
        data = {
            'environment': self.environment.value,
            'intervention': self.intervention,
            'rounds_per_part': self.rounds_per_part,
            'params': asdict(self.params),
            'fine_points': self.fine_points,
            'seed': self.seed,
            'group_id': self.group_id,
            'subject_ids': None if self.subject_ids is None
            else list(self.subject_ids),
            'waiting_seconds': None if self.waiting_seconds is None
            else list(self.waiting_seconds),
        }
        return data

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data['params'] = GameParams(**data['params'])
        for key in ('subject_ids', 'waiting_seconds'):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass(frozen=True)
class AgentState(object):
    id: int
    policy: object
    status: AgentStatus
    consecutive_timeouts: int = 0
    role_this_round: int = None


@dataclass(frozen=True)
class SubstitutionEvent(object):
    part: str
    round: int
    global_round: int
    dropout_id: int
    ghost_id: int
    reason: str


@dataclass(frozen=True)
class GroupState(object):
    """
    Group composition; ``slots`` lists the five active agent ids
    """
    agents: tuple
    slots: tuple
    ghost_id: int = None
    lost: bool = False
    events: tuple = ()

    @classmethod
    def initial(cls, policies):
        agents = tuple(
            AgentState(k, policy, AgentStatus.ACTIVE if k < GROUP_SIZE
                       else AgentStatus.GHOST)
            for k, policy in enumerate(policies))
        return cls(agents, tuple(range(GROUP_SIZE)), GROUP_SIZE)

    def agent(self, agent_id):
        return self.agents[agent_id]

    def _set(self, agent_id, **changes):
        agents = list(self.agents)
        agents[agent_id] = replace(agents[agent_id], **changes)
        return replace(self, agents=tuple(agents))


def apply_dropout(state, agent_id, part, round_number, global_round,
                  reason='left', status=AgentStatus.DROPPED_OUT):
    """
    Remove ``agent_id`` and promote the ghost into the vacated slot

    A departing ghost just leaves the standby slot empty. Without a ghost
    left, losing an active agent marks the whole group as lost.
    """
    if status not in (AgentStatus.DROPPED_OUT, AgentStatus.DISQUALIFIED):
        raise ValidationError('a departure ends as dropout or '
                              'disqualification')
    agent = state.agent(agent_id)
    if agent.status not in (AgentStatus.ACTIVE, AgentStatus.GHOST):
        return state
    state = state._set(agent_id, status=status)
    if agent.status is AgentStatus.GHOST:
        event = SubstitutionEvent(part, round_number, global_round,
                                  agent_id, None, reason)
        return replace(state, ghost_id=None, events=state.events + (event,))
    ghost_id = state.ghost_id
    event = SubstitutionEvent(part, round_number, global_round, agent_id,
                              ghost_id, reason)
    if ghost_id is None:
        debug('group lost at', part, round_number, 'agent', agent_id)
        return replace(state, lost=True, events=state.events + (event,))
    slots = tuple(ghost_id if s == agent_id else s for s in state.slots)
    state = state._set(ghost_id, status=AgentStatus.ACTIVE)
    debug('ghost', ghost_id, 'replaces', agent_id, 'at', part, round_number)
    return replace(state, slots=slots, ghost_id=None,
                   events=state.events + (event,))


@dataclass(frozen=True)
class GhostRecord(object):
    agent_id: int
    position: int
    distanced: bool
    timed_out: bool
    infected: bool
    payoff: float


@dataclass(frozen=True)
class RoundRecord(object):
    part: Part
    round: int
    global_round: int
    agent_ids: tuple
    outcome: RoundOutcome
    ghost: GhostRecord = None

    def to_dict(self):
        data = json.loads(self.outcome.to_json())
        data.update({
            'type': 'round',
            'part': self.part.value,
            'global_round': self.global_round,
            'agent_ids': list(self.agent_ids),
            'ghost': None if self.ghost is None else asdict(self.ghost),
        })
        return data

    @classmethod
    def from_dict(cls, data):
        ghost = data.get('ghost')
        return cls(part=Part(data['part']),
                   round=int(data['round']),
                   global_round=int(data['global_round']),
                   agent_ids=tuple(data['agent_ids']),
                   outcome=RoundOutcome.from_dict(data),
                   ghost=None if ghost is None else GhostRecord(**ghost))

    def position_of(self, agent_id):
        """
        Position and shadow flag of ``agent_id`` in this round, or None
        """
        if agent_id in self.agent_ids:
            return self.agent_ids.index(agent_id), False
        if self.ghost is not None and self.ghost.agent_id == agent_id:
            return self.ghost.position, True
        return None

    def decision_of(self, agent_id):
        """
        (position, distanced, timed_out, points) of ``agent_id`` or None
        """
        where = self.position_of(agent_id)
        if where is None:
            return None
        position, shadow = where
        if shadow:
            return (position, self.ghost.distanced, self.ghost.timed_out,
                    self.ghost.payoff)
        return (position, self.outcome.actions[position],
                self.outcome.timed_out[position],
                self.outcome.payoffs[position])


@dataclass(frozen=True)
class Payment(object):
    agent_id: int
    fixed: float
    baseline: float
    intervention: float
    waiting: float
    bret: float
    total: float
    paid_rounds: dict = None


@dataclass(frozen=True)
class SessionLog(object):
    config: SessionConfig
    records: tuple
    events: tuple = ()
    lost: bool = False
    status: tuple = ()
    payments: tuple = None

    @property
    def complete(self):
        if self.lost:
            return False
        per_part = self.config.rounds_per_part
        return all(len(self.part_records(part)) == per_part
                   for part in Part)

    def part_records(self, part):
        return [r for r in self.records if r.part is part]

    @property
    def analysis_agents(self):
        """
        Agents who finish as active group members
        """
        return [k for k, s in enumerate(self.status)
                if s is AgentStatus.ACTIVE]

    @property
    def departed_agents(self):
        """
        Agents who played as group members and then left or were
        disqualified
        """
        played = set()
        for record in self.records:
            played.update(record.agent_ids)
        return [k for k, s in enumerate(self.status)
                if s in (AgentStatus.DROPPED_OUT, AgentStatus.DISQUALIFIED)
                and k in played]

    @property
    def has_substitution(self):
        return any(e.ghost_id is not None for e in self.events)

    @property
    def promoted_ghosts(self):
        return [e.ghost_id for e in self.events if e.ghost_id is not None]

    def sequences(self, part, agents=None):
        """
        Per agent list of (position, distanced) in round order; timeouts
        count as not distancing
        """
        agents = self.analysis_agents if agents is None else agents
        result = {}
        for agent_id in agents:
            sequence = []
            for record in self.part_records(part):
                decision = record.decision_of(agent_id)
                if decision is not None:
                    sequence.append((decision[0], bool(decision[1])))
            result[agent_id] = sequence
        return result


def _context(config, state, agent_id, part, round_number, global_round,
             position, params, history, subjects):
    subject = None
    if subjects is not None and config.subject_ids is not None:
        subject = subjects.get(config.subject_ids[agent_id])
    return DecisionContext(agent_id=agent_id, part=part, round=round_number,
                           global_round=global_round, position=position,
                           network=config.network,
                           environment=config.environment, params=params,
                           history=tuple(history), subject=subject,
                           intervention=config.intervention)


def _update_timeouts(state, agent_id, timed_out):
    agent = state.agent(agent_id)
    count = agent.consecutive_timeouts + 1 if timed_out else 0
    return state._set(agent_id, consecutive_timeouts=count)


def run_session(config, policies, rng=None, subjects=None):
    """
    Play both parts of a session and return its log

    ``policies`` holds six bot policies: agents 0-4 start active and agent
    5 is the ghost. ``subjects`` maps subject ids to
    :class:`sdlab.cohort.Subject` for covariate driven bots.
    """
    policies = tuple(policies)
    if len(policies) != GROUP_SIZE + 1:
        raise ValidationError('a session needs %d policies (%d active and '
                              'one ghost)' % (GROUP_SIZE + 1, GROUP_SIZE))
    rng = as_generator(config.seed if rng is None else rng)
    ghost_rng = np.random.default_rng(int(rng.integers(2 ** 62)))
    net = config.network
    per_part = config.rounds_per_part
    state = GroupState.initial(policies)
    records = []

    for part_index, part in enumerate((Part.BASELINE, Part.INTERVENTION)):
        params = config.params_for(part)
        for round_number in range(1, per_part + 1):
            global_round = part_index * per_part + round_number
            for agent in state.agents:
                if agent.policy.leave_round == global_round and \
                        agent.status in (AgentStatus.ACTIVE,
                                         AgentStatus.GHOST):
                    when = BETWEEN_PARTS if part_index == 1 and \
                        round_number == 1 else part.value
                    state = apply_dropout(state, agent.id, when,
                                          round_number, global_round)
            if state.lost:
                break

            order = rng.permutation(GROUP_SIZE)
            agent_ids = tuple(state.slots[k] for k in order)
            decisions = []
            for position, agent_id in enumerate(agent_ids):
                context = _context(config, state, agent_id, part,
                                   round_number, global_round, position,
                                   params, records, subjects)
                decisions.append(policy_decide(
                    state.agent(agent_id).policy, context, rng))
            timed_out = tuple(d is Decision.TIMEOUT for d in decisions)
            profile = ActionProfile(tuple(d is Decision.DISTANCE
                                          for d in decisions))
            outcome = simulate_round(net, profile, params, rng, timed_out,
                                     round_number=round_number)

            ghost = None
            if state.ghost_id is not None:
                ghost = _ghost_round(config, state, part, round_number,
                                     global_round, params, profile,
                                     timed_out, records, subjects,
                                     ghost_rng)
            records.append(RoundRecord(part, round_number, global_round,
                                       agent_ids, outcome, ghost))
            debug(part.value, round_number, 'agents', agent_ids, 'actions',
                  str(profile), 'infected', sorted(outcome.infected))

            for position, agent_id in enumerate(agent_ids):
                state = _update_timeouts(state, agent_id, timed_out[position])
            if ghost is not None:
                state = _update_timeouts(state, ghost.agent_id,
                                         ghost.timed_out)
            for agent in state.agents:
                if agent.consecutive_timeouts >= MAX_CONSECUTIVE_TIMEOUTS \
                        and agent.status in (AgentStatus.ACTIVE,
                                             AgentStatus.GHOST):
                    state = apply_dropout(state, agent.id, part.value,
                                          round_number, global_round,
                                          reason='timeout',
                                          status=AgentStatus.DISQUALIFIED)
            if state.lost:
                break
        if state.lost:
            break

    return SessionLog(config=config, records=tuple(records),
                      events=state.events, lost=state.lost,
                      status=tuple(a.status for a in state.agents))


def _ghost_round(config, state, part, round_number, global_round, params,
                 profile, timed_out, history, subjects, ghost_rng):
    ghost_id = state.ghost_id
    net = config.network
    position = int(ghost_rng.integers(GROUP_SIZE))
    context = _context(config, state, ghost_id, part, round_number,
                       global_round, position, params, history, subjects)
    decision = policy_decide(state.agent(ghost_id).policy, context,
                             ghost_rng)
    shadow_profile = profile.with_action(position,
                                         decision is Decision.DISTANCE)
    shadow_timeouts = list(timed_out)
    shadow_timeouts[position] = decision is Decision.TIMEOUT
    shadow = simulate_round(net, shadow_profile, params, ghost_rng,
                            tuple(shadow_timeouts))
    return GhostRecord(agent_id=ghost_id, position=position,
                       distanced=decision is Decision.DISTANCE,
                       timed_out=decision is Decision.TIMEOUT,
                       infected=position in shadow.infected,
                       payoff=shadow.payoffs[position])


def points_to_yuan(points):
    """
    Convert points at 50 points per yuan

    >>> points_to_yuan(260), points_to_yuan(300)
    (5.2, 6.0)
    """
    return round(points / POINTS_PER_YUAN, 2)


def waiting_compensation(seconds):
    """
    0.2 yuan per full 20 seconds of waiting, at most 5 yuan
    """
    steps = math.floor(max(0.0, seconds) / WAITING_STEP_SECONDS)
    return round(min(WAITING_CAP, WAITING_RATE * steps), 2)


def compute_payment(log, rng, waiting_seconds=None, bret=None):
    """
    Payment in yuan of every agent of a completed session

    Four rounds are drawn per part without replacement, the same for the
    whole group. The variable payment of a part is the converted sum of
    the paid rounds and turns negative when fines outweigh earnings.
    Disqualified and dropped out agents receive nothing.
    """
    if not log.complete:
        raise IncompleteLogError('session of group %d is incomplete' %
                                 log.config.group_id)
    rng = as_generator(rng)
    per_part = log.config.rounds_per_part
    draws = min(PAID_ROUNDS_PER_PART, per_part)
    paid = {}
    for part in Part:
        chosen = rng.choice(per_part, size=draws, replace=False) + 1
        paid[part] = tuple(sorted(int(r) for r in chosen))
    if waiting_seconds is None:
        waiting_seconds = log.config.waiting_seconds or \
            (0.0,) * (GROUP_SIZE + 1)
    bret = bret or {}

    payments = []
    for agent_id, status in enumerate(log.status):
        if status in (AgentStatus.DISQUALIFIED, AgentStatus.DROPPED_OUT):
            payments.append(Payment(agent_id, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                                    {p.value: paid[p] for p in Part}))
            continue
        variable = {}
        for part in Part:
            records = {r.round: r for r in log.part_records(part)}
            points = 0.0
            for round_number in paid[part]:
                decision = records[round_number].decision_of(agent_id)
                if decision is not None:
                    points += decision[3]
            variable[part] = points_to_yuan(points)
        waiting = waiting_compensation(waiting_seconds[agent_id])
        extra = float(bret.get(agent_id, 0.0))
        total = round(FIXED_FEE + variable[Part.BASELINE] +
                      variable[Part.INTERVENTION] + waiting + extra, 2)
        payments.append(Payment(agent_id, FIXED_FEE,
                                variable[Part.BASELINE],
                                variable[Part.INTERVENTION], waiting, extra,
                                total, {p.value: paid[p] for p in Part}))
    return tuple(payments)


def write_session_log(log, path, payments=None):
    """
    Write ``log`` as JSON-lines: header, one line per round, trailer
    """
    payments = log.payments if payments is None else payments
    with io.open(path, 'w', encoding='UTF-8', newline='\n') as fh:
        header = {'type': 'header', 'config': log.config.to_dict()}
        fh.write(json.dumps(header, sort_keys=True) + '\n')
        for record in log.records:
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + '\n')
        trailer = {
            'type': 'trailer',
            'lost': log.lost,
            'status': [s.value for s in log.status],
            'events': [asdict(e) for e in log.events],
            'payments': None if payments is None
            else [asdict(p) for p in payments],
        }
        fh.write(json.dumps(trailer, sort_keys=True) + '\n')


def read_session_log(path):
    records = []
    config = trailer = None
    with io.open(path, 'r', encoding='UTF-8') as fh:
        for line in fh:
            if not line.strip():
                continue
            data = json.loads(line)
            kind = data.get('type')
            if kind == 'header':
                config = SessionConfig.from_dict(data['config'])
            elif kind == 'round':
                records.append(RoundRecord.from_dict(data))
            elif kind == 'trailer':
                trailer = data
    if config is None or trailer is None:
        raise IncompleteLogError('%s lacks header or trailer' % path)
    payments = trailer.get('payments')
    if payments is not None:
        payments = tuple(Payment(**p) for p in payments)
    return SessionLog(config=config, records=tuple(records),
                      events=tuple(SubstitutionEvent(**e)
                                   for e in trailer['events']),
                      lost=trailer['lost'],
                      status=tuple(AgentStatus(s) for s in trailer['status']),
                      payments=payments)


def _run_one(config, policy_factory, subjects):
    return run_session(config, policy_factory(config), subjects=subjects)


def run_groups(configs, policy_factory, subjects=None, threads=None):
    """
    Run independent sessions, each from its own config seed

    ``policy_factory(config)`` returns the six policies of a group and must
    be picklable when ``threads > 1``.
    """
    worker = functools.partial(_run_one, policy_factory=policy_factory,
                               subjects=subjects)
    return parallel_map(worker, configs, threads)
