# -*- coding: utf-8 -*-
"""
Infection process and payoffs of one round

Contagion is realized as bond percolation: every link of the induced
contact graph (non-distancing positions only) is open with probability
``alpha`` and patient zero infects the whole open component. On undirected
graphs this is equal in distribution to letting every newly infected agent
try each healthy non-distancing neighbour once, which
:func:`simulate_round_cascade` implements for comparison.

:copyright:
    The sdlab Development Team
:license:
    GNU Lesser General Public License, Version 3
    (https://www.gnu.org/copyleft/lesser.html)
"""
from __future__ import absolute_import, division, print_function

from collections import deque
from dataclasses import dataclass
import functools
import json

import numpy as np

from .core import LabSystem, ValidationError, EnumerationGuardError
from .network import (ActionProfile, check_position, check_profile,
                      induced_contact_graph, neighbors)
from .utils import as_generator


TIMEOUT_PENALTY = 50.0

# number of edge states reduced per batch
_CHUNK = 1 << 14


@dataclass(frozen=True)
class InfectionProbabilities(object):
    """
    Infection probability per position, optionally with standard errors
    """
    p: tuple
    se: tuple = None
    reps: int = None

    def __getitem__(self, i):
        return self.p[i]

    def __len__(self):
        return len(self.p)


@dataclass(frozen=True)
class RoundOutcome(object):
    """
    Resolved round: patient zero, infections and realized payoffs
    """
    patient_zero: int
    actions: tuple
    infected: frozenset
    payoffs: tuple
    timed_out: tuple
    round: int = None

    def to_json(self):
        return json.dumps({
            'round': self.round,
            'patient_zero': self.patient_zero,
            'actions': [bool(a) for a in self.actions],
            'infected': sorted(self.infected),
            'payoffs': [float(x) for x in self.payoffs],
            'timed_out': [bool(t) for t in self.timed_out],
        }, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        return cls(patient_zero=int(data['patient_zero']),
                   actions=tuple(bool(a) for a in data['actions']),
                   infected=frozenset(int(i) for i in data['infected']),
                   payoffs=tuple(float(x) for x in data['payoffs']),
                   timed_out=tuple(bool(t) for t in data['timed_out']),
                   round=data.get('round'))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def round_payoff(params, distanced, infected, timed_out=False):
    """
    Realized points of one position

    >>> from sdlab.network import GameParams
    >>> params = GameParams.lab_defaults()
    >>> [round_payoff(params, d, i) for d in (False, True)
    ...  for i in (False, True)]
    [100.0, 0.0, 65.0, -35.0]
    >>> round_payoff(params.replace(fine=15), False, False)
    85.0
    """
    points = 0.0 if infected else float(params.b)
    if distanced:
        points -= params.c
    else:
        points -= params.fine
    if timed_out:
        points -= TIMEOUT_PENALTY
    return points


def _reachability(n, edge_array, open_mask):
    """
    Batched connectivity of the open subgraphs

    ``open_mask`` has one row per realization and one column per edge;
    the result is a boolean array (batch, n, n).
    """
    batch = open_mask.shape[0]
    reach = np.zeros((batch, n, n), dtype=np.int32)
    reach[:, np.arange(n), np.arange(n)] = 1
    if len(edge_array):
        rows = np.nonzero(open_mask)
        i = edge_array[rows[1], 0]
        j = edge_array[rows[1], 1]
        reach[rows[0], i, j] = 1
        reach[rows[0], j, i] = 1
    steps = max(1, int(np.ceil(np.log2(max(n, 2)))))
    for _ in range(steps):
        reach = (np.matmul(reach, reach) > 0).astype(np.int32)
    return reach.astype(bool)


def _edge_array(net):
    return np.array(net.edge_list, dtype=np.intp).reshape(-1, 2)


@functools.lru_cache(maxsize=4096)
def _connectivity(net, profile, alpha):
    contact = induced_contact_graph(net, profile)
    edges = _edge_array(contact)
    m = len(edges)
    if m > LabSystem.edge_guard:
        raise EnumerationGuardError(
            '%d contact edges exceed the enumeration guard of %d' % (
                m, LabSystem.edge_guard))
    n = net.n
    total = np.zeros((n, n))
    shifts = np.arange(m)
    for start in range(0, 1 << m, _CHUNK):
        states = np.arange(start, min(start + _CHUNK, 1 << m))
        open_mask = ((states[:, None] >> shifts) & 1).astype(bool)
        k = open_mask.sum(axis=1)
        weights = alpha ** k * (1.0 - alpha) ** (m - k)
        reach = _reachability(n, edges, open_mask)
        total += np.tensordot(weights, reach, axes=1)
    total.setflags(write=False)
    return total


def connectivity_matrix(net, profile, alpha):
    """
    Exact probability that two positions are joined by open links

    Sums over all ``2^|E'|`` open/closed states of the induced contact
    graph. Distancing positions are isolated, so their rows are unit
    vectors.
    """
    check_profile(net, profile)
    return _connectivity(net, ActionProfile(tuple(profile)), float(alpha))


def _check_params(net, params):
    if params.n != net.n:
        raise ValidationError(
            'parameters are set for %d positions, network has %d' % (
                params.n, net.n))


def infection_probability_exact(net, profile, params):
    """
    Exact infection probability of every position

    >>> from sdlab.network import (GameParams, make_environment,
    ...                            EnvironmentKind)
    >>> star = make_environment(EnvironmentKind.SUPERSPREADER, 5)
    >>> p = infection_probability_exact(star, ActionProfile.none(5),
    ...                                 GameParams.lab_defaults())
    >>> round(p[1], 6)
    0.5835
    """
    check_profile(net, profile)
    _check_params(net, params)
    n = net.n
    conn = connectivity_matrix(net, profile, params.alpha)
    outside = np.array([not d for d in profile])
    values = []
    for i in range(n):
        if profile[i]:
            values.append(params.gamma / n)
        else:
            # patient zero anywhere outside S, i included
            values.append(float(conn[outside, i].sum()) / n)
    return InfectionProbabilities(tuple(values))


def infection_probability_given_seed(net, profile, params, i, z):
    """
    Infection probability of ``i`` when ``z`` is patient zero
    """
    check_profile(net, profile)
    check_position(net, i)
    check_position(net, z)
    if profile[z]:
        return params.gamma if i == z else 0.0
    if i == z:
        return 1.0
    if profile[i]:
        return 0.0
    return float(connectivity_matrix(net, profile, params.alpha)[z, i])


def expected_payoff(net, profile, params, i):
    """
    Expected points of position ``i``; the fine enters only outside S
    """
    check_position(net, i)
    if profile[i]:
        return (1.0 - params.gamma / net.n) * params.b - params.c
    p = infection_probability_exact(net, profile, params)[i]
    return (1.0 - p) * params.b - params.fine


def _resolve(net, profile, params, patient_zero, coin, open_mask, edges):
    if profile[patient_zero]:
        return frozenset([patient_zero]) if coin < params.gamma \
            else frozenset()
    if len(edges):
        reach = _reachability(net.n, edges, open_mask[None, :])[0]
    else:
        reach = np.eye(net.n, dtype=bool)
    return frozenset(int(j) for j in np.nonzero(reach[patient_zero])[0])


def simulate_round(net, profile, params, rng, timed_out=None,
                   round_number=None):
    """
    Draw patient zero, realize contagion and compute payoffs

    Timed out positions must already be recorded as not distancing in
    ``profile``; ``timed_out`` only adds the penalty.
    """
    check_profile(net, profile)
    _check_params(net, params)
    rng = as_generator(rng)
    timed_out = tuple(bool(t) for t in (timed_out or (False,) * net.n))
    if len(timed_out) != net.n:
        raise ValidationError('timeout flags do not match the positions')
    edges = _edge_array(induced_contact_graph(net, profile))
    patient_zero = int(rng.integers(net.n))
    if profile[patient_zero]:
        coin = rng.random()
        open_mask = np.zeros(len(edges), dtype=bool)
    else:
        coin = None
        open_mask = rng.random(len(edges)) < params.alpha
    infected = _resolve(net, profile, params, patient_zero, coin,
                        open_mask, edges)
    payoffs = tuple(round_payoff(params, profile[i], i in infected,
                                 timed_out[i]) for i in range(net.n))
    return RoundOutcome(patient_zero=patient_zero,
                        actions=tuple(profile),
                        infected=infected,
                        payoffs=payoffs,
                        timed_out=timed_out,
                        round=round_number)


def simulate_round_cascade(net, profile, params, rng):
    """
    Contagion as iterated per-contact transmission, returns infected set
    """
    check_profile(net, profile)
    rng = as_generator(rng)
    patient_zero = int(rng.integers(net.n))
    if profile[patient_zero]:
        return frozenset([patient_zero]) if rng.random() < params.gamma \
            else frozenset()
    infected = {patient_zero}
    queue = deque([patient_zero])
    while queue:
        j = queue.popleft()
        for k in sorted(neighbors(net, j)):
            if k in infected or profile[k]:
                continue
            if rng.random() < params.alpha:
                infected.add(k)
                queue.append(k)
    return frozenset(infected)


def infection_probability_mc(net, profile, params, reps, rng):
    """
    Monte Carlo infection frequencies with binomial standard errors
    """
    check_profile(net, profile)
    _check_params(net, params)
    if reps < 1:
        raise ValidationError('reps must be at least 1')
    rng = as_generator(rng)
    n = net.n
    edges = _edge_array(induced_contact_graph(net, profile))
    distancing = np.array(list(profile), dtype=bool)
    counts = np.zeros(n)
    for start in range(0, reps, _CHUNK):
        size = min(_CHUNK, reps - start)
        patient_zero = rng.integers(n, size=size)
        coin = rng.random(size) < params.gamma
        open_mask = rng.random((size, len(edges))) < params.alpha
        reach = _reachability(n, edges, open_mask)
        hit = reach[np.arange(size), patient_zero, :]
        seed_distancing = distancing[patient_zero]
        # a distancing patient zero infects only itself, with prob gamma
        hit[seed_distancing] = False
        rows = np.nonzero(seed_distancing & coin)[0]
        hit[rows, patient_zero[rows]] = True
        counts += hit.sum(axis=0)
    p = counts / reps
    se = np.sqrt(p * (1.0 - p) / reps)
    return InfectionProbabilities(tuple(float(x) for x in p),
                                  tuple(float(x) for x in se), reps)
