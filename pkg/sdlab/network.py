# -*- coding: utf-8 -*-
"""
Interaction environments, action profiles and game parameters

Positions are labelled 0..n-1. In star environments the hub is position 0.
The five-letter labels used in the experiment instructions map as
P, E, C, M, Q -> 0, 1, 2, 3, 4.

:copyright:
    The sdlab Development Team
:license:
    GNU Lesser General Public License, Version 3
    (https://www.gnu.org/copyleft/lesser.html)
"""
from __future__ import absolute_import, division, print_function

from dataclasses import dataclass, field, replace
import enum

import networkx as nx
import numpy as np

from .core import LabSystem, ValidationError, EnumerationGuardError


LETTERS = ('P', 'E', 'C', 'M', 'Q')


class EnvironmentKind(enum.Enum):
    HOMOGENEOUS = 'complete'
    SUPERSPREADER = 'star'

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        value = str(value).lower()
        for kind in cls:
            if value in (kind.value, kind.name.lower()):
                return kind
        raise ValidationError('unknown environment: {}'.format(value))


@dataclass(frozen=True)
class Network(object):
    """
    Undirected unweighted graph over ``n`` positions

    ``n`` : int
        Number of positions.
    ``edges`` : frozenset of (int, int)
        Links as ordered pairs ``(i, j)`` with ``i < j``.
    """
    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not 1 <= self.n <= LabSystem.enumeration_guard:
            raise EnumerationGuardError(
                'number of positions must be within [1, {}], got {}'.format(
                    LabSystem.enumeration_guard, self.n))
        normalized = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValidationError('self-link at position %d' % i)
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValidationError('edge (%d, %d) out of range' % (i, j))
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, 'edges', frozenset(normalized))

    @property
    def edge_list(self):
        return sorted(self.edges)

    @property
    def adjacency(self):
        matrix = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            matrix[i, j] = matrix[j, i] = True
        return matrix

    def degree(self, i):
        return len(neighbors(self, i))

    def to_networkx(self):
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edge_list)
        return graph

    @classmethod
    def from_networkx(cls, graph):
        mapping = {node: k for k, node in enumerate(sorted(graph.nodes))}
        return cls(len(mapping),
                   frozenset((mapping[u], mapping[v])
                             for u, v in graph.edges))

    def is_connected(self):
        return nx.is_connected(self.to_networkx())

    def relabel(self, permutation):
        """
        Move position ``i`` to ``permutation[i]``
        """
        permutation = list(permutation)
        if sorted(permutation) != list(range(self.n)):
            raise ValidationError('not a permutation of the positions')
        return Network(self.n, frozenset(
            (permutation[i], permutation[j]) for i, j in self.edges))

    def edge_list_text(self):
        """
        Serialize as edge-list text block

        >>> print(make_environment(EnvironmentKind.SUPERSPREADER, 3)
        ...       .edge_list_text())
        n=3
        0 1
        0 2
        """
        lines = ['n=%d' % self.n]
        lines.extend('%d %d' % edge for edge in self.edge_list)
        return '\n'.join(lines)

    @classmethod
    def from_edge_list_text(cls, text):
        lines = [line.strip() for line in text.strip().splitlines()
                 if line.strip()]
        if not lines or not lines[0].startswith('n='):
            raise ValidationError('edge list must start with "n=<int>"')
        n = int(lines[0][2:])
        edges = []
        for line in lines[1:]:
            parts = line.split()
            if len(parts) != 2:
                raise ValidationError('malformed edge line: %r' % line)
            edges.append((int(parts[0]), int(parts[1])))
        return cls(n, frozenset(edges))


@dataclass(frozen=True)
class ActionProfile(object):
    """
    Distancing decision per position, read as the distancing subset S

    >>> p = ActionProfile.from_bits(0b00101, 5)
    >>> p.members
    (0, 2)
    >>> p.bits
    5
    """
    distancing: tuple

    def __post_init__(self):
        object.__setattr__(self, 'distancing',
                           tuple(bool(x) for x in self.distancing))

    def __len__(self):
        return len(self.distancing)

    def __getitem__(self, i):
        return self.distancing[i]

    def __iter__(self):
        return iter(self.distancing)

    @classmethod
    def from_bits(cls, bits, n):
        return cls(tuple(bool((bits >> i) & 1) for i in range(n)))

    @classmethod
    def from_members(cls, members, n):
        members = set(members)
        return cls(tuple(i in members for i in range(n)))

    @classmethod
    def none(cls, n):
        return cls((False,) * n)

    @classmethod
    def everyone(cls, n):
        return cls((True,) * n)

    @property
    def n(self):
        return len(self.distancing)

    @property
    def bits(self):
        return sum(1 << i for i, d in enumerate(self.distancing) if d)

    @property
    def members(self):
        return tuple(i for i, d in enumerate(self.distancing) if d)

    @property
    def outsiders(self):
        return tuple(i for i, d in enumerate(self.distancing) if not d)

    @property
    def size(self):
        return sum(self.distancing)

    def toggle(self, i):
        return self.with_action(i, not self.distancing[i])

    def with_action(self, i, value):
        values = list(self.distancing)
        values[i] = bool(value)
        return ActionProfile(tuple(values))

    def permute(self, permutation):
        values = [False] * self.n
        for i, d in enumerate(self.distancing):
            values[permutation[i]] = d
        return ActionProfile(tuple(values))

    def __str__(self):
        return ''.join('1' if d else '0' for d in self.distancing)


def all_profiles(n):
    """
    Every profile over ``n`` positions in canonical (ascending bits) order
    """
    if n > LabSystem.enumeration_guard:
        raise EnumerationGuardError(
            'cannot enumerate 2^%d profiles' % n)
    for bits in range(1 << n):
        yield ActionProfile.from_bits(bits, n)


@dataclass(frozen=True)
class GameParams(object):
    """
    Payoff and contagion constants

    ``n`` : int
        Number of positions.
    ``b`` : float
        Benefit of staying healthy (points).
    ``c`` : float
        Cost of distancing (points).
    ``gamma`` : float
        Infection probability of a distancing patient zero.
    ``alpha`` : float
        Per-contact transmission probability.
    ``fine`` : float
        Fine deducted in every round an agent does not distance.
    ``nudge`` : bool
        Informational treatment flag; never enters payoffs.
    """
    n: int = 5
    b: float = 100.0
    c: float = 35.0
    gamma: float = 0.5
    alpha: float = 0.65
    fine: float = 0.0
    nudge: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError('n must be positive')
        if not self.b > self.c > 0:
            raise ValidationError('parameters must satisfy b > c > 0')
        if not 0 <= self.gamma < 1:
            raise ValidationError('gamma must lie in [0, 1)')
        if not 0 <= self.alpha <= 1:
            raise ValidationError('alpha must lie in [0, 1]')
        if self.fine < 0:
            raise ValidationError('fine must not be negative')

    def replace(self, **changes):
        return replace(self, **changes)

    @classmethod
    def lab_defaults(cls, fine=0.0, nudge=False):
        return cls(n=5, b=100.0, c=35.0, gamma=0.5, alpha=0.65,
                   fine=float(fine), nudge=nudge)


def make_environment(kind, n):
    """
    Complete graph (homogeneous) or star with hub 0 (superspreader)

    >>> len(make_environment(EnvironmentKind.HOMOGENEOUS, 5).edges)
    10
    """
    kind = EnvironmentKind.parse(kind)
    if not 1 <= n <= LabSystem.enumeration_guard:
        raise EnumerationGuardError(
            'number of positions must be within [1, {}], got {}'.format(
                LabSystem.enumeration_guard, n))
    if kind is EnvironmentKind.HOMOGENEOUS:
        graph = nx.complete_graph(n)
    else:
        if n < 2:
            raise ValidationError('a star needs at least two positions')
        graph = nx.star_graph(n - 1)
    return Network(n, frozenset(graph.edges))


def instructions_network():
    """
    The example network of the instructions: M-P, M-E and P-C
    """
    index = {letter: k for k, letter in enumerate(LETTERS)}
    pairs = [('M', 'P'), ('M', 'E'), ('P', 'C')]
    return Network(5, frozenset((index[a], index[b]) for a, b in pairs))


def check_profile(net, profile):
    if len(profile) != net.n:
        raise ValidationError(
            'profile has %d entries for %d positions' % (len(profile), net.n))


def check_position(net, i):
    if not 0 <= i < net.n:
        raise ValidationError('position %r out of range' % (i,))


def neighbors(net, i):
    """
    All positions linked to ``i``

    >>> sorted(neighbors(make_environment(EnvironmentKind.SUPERSPREADER, 5),
    ...                  3))
    [0]
    """
    check_position(net, i)
    return {j for edge in net.edges for j in edge
            if i in edge and j != i}


def induced_contact_graph(net, profile):
    """
    Restrict links to non-distancing positions, keeping all indices
    """
    check_profile(net, profile)
    return Network(net.n, frozenset(
        (i, j) for i, j in net.edges
        if not profile[i] and not profile[j]))
