# -*- coding: utf-8 -*-
"""
Pure-strategy Nash equilibria, social optima and fine calibration

Everything is decided by brute force over the ``2^n`` distancing subsets
with exact expected payoffs. The fine only shifts the payoff of agents
outside the subset, so every threshold at which the equilibrium set can
change is known in closed form: it is the payoff difference between
staying out and joining at a zero fine.

:copyright:
    The sdlab Development Team
:license:
    GNU Lesser General Public License, Version 3
    (https://www.gnu.org/copyleft/lesser.html)
"""
from __future__ import absolute_import, division, print_function

from dataclasses import dataclass
import functools

import numpy as np
import pandas as pd

from .contagion import infection_probability_exact
from .core import (LabSystem, EnumerationGuardError, FineCalibrationError,
                   NoPureEquilibriumError, ValidationError)
from .network import (ActionProfile, EnvironmentKind, GameParams,
                      make_environment)
from .utils import debug


@functools.lru_cache(maxsize=256)
def _base_table(net, n, b, c, gamma, alpha):
    params = GameParams(n=n, b=b, c=c, gamma=gamma, alpha=alpha)
    table = np.empty((1 << n, n))
    inside = (1.0 - gamma / n) * b - c
    for bits in range(1 << n):
        profile = ActionProfile.from_bits(bits, n)
        p = infection_probability_exact(net, profile, params)
        for i in range(n):
            table[bits, i] = inside if profile[i] else (1.0 - p[i]) * b
    table.setflags(write=False)
    return table


def _guard(net, params):
    if net.n > LabSystem.enumeration_guard:
        raise EnumerationGuardError(
            '%d positions exceed the enumeration guard' % net.n)
    if params.n != net.n:
        raise ValidationError(
            'parameters are set for %d positions, network has %d' % (
                params.n, net.n))


def payoff_table(net, params, fines=True):
    """
    Expected payoff of every position under every profile

    Row ``bits`` holds the payoffs of ``ActionProfile.from_bits(bits, n)``.
    With ``fines=False`` the fine is left out (gross payoffs).
    """
    _guard(net, params)
    table = _base_table(net, params.n, float(params.b), float(params.c),
                        float(params.gamma), float(params.alpha))
    if not fines or params.fine == 0:
        return table
    outside = _outside_mask(net.n)
    return table - params.fine * outside


@functools.lru_cache(maxsize=32)
def _outside_mask(n):
    bits = np.arange(1 << n)[:, None]
    mask = ((bits >> np.arange(n)) & 1) == 0
    return mask.astype(float)


def _is_nash(table, bits, n, weak_out, tol):
    for i in range(n):
        other = bits ^ (1 << i)
        here, there = table[bits, i], table[other, i]
        if (bits >> i) & 1:
            if here < there - tol:
                return False
        elif weak_out:
            if here < there - tol:
                return False
        elif here <= there + tol:
            return False
    return True


def enumerate_nash(net, params, weak_out=False, tol=None):
    """
    All pure-strategy Nash distancing subsets

    Members must weakly prefer to stay in; non-members must strictly
    prefer to stay out unless ``weak_out`` is set.

    >>> from sdlab.network import make_environment, EnvironmentKind
    >>> star = make_environment(EnvironmentKind.SUPERSPREADER, 5)
    >>> [p.members for p in enumerate_nash(star,
    ...                                    GameParams.lab_defaults())]
    [(0,)]
    """
    tol = LabSystem.tolerance if tol is None else tol
    table = payoff_table(net, params)
    n = net.n
    return [ActionProfile.from_bits(bits, n) for bits in range(1 << n)
            if _is_nash(table, bits, n, weak_out, tol)]


def welfare_vector(net, params, count_fines=False):
    """
    Total expected payoff of every profile

    Fines are transfers and are left out unless ``count_fines`` is set.
    """
    return payoff_table(net, params, fines=count_fines).sum(axis=1)


def social_optima(net, params, count_fines=False, tol=None):
    """
    Welfare maximizing subsets after the inclusion tie-break

    A maximizing subset is dropped when adding some outsider keeps welfare
    maximal and leaves their own expected payoff unchanged.
    """
    tol = LabSystem.tolerance if tol is None else tol
    n = net.n
    table = payoff_table(net, params, fines=count_fines)
    welfare = table.sum(axis=1)
    best = welfare.max()
    maximal = set(int(b) for b in np.nonzero(welfare >= best - tol)[0])
    kept = []
    for bits in sorted(maximal):
        dominated = False
        for i in range(n):
            if (bits >> i) & 1:
                continue
            bigger = bits | (1 << i)
            if bigger in maximal and \
                    abs(table[bigger, i] - table[bits, i]) <= tol:
                dominated = True
                break
        if not dominated:
            kept.append(ActionProfile.from_bits(bits, n))
    return kept


def predicted_uptake(net, params, weak_out=False):
    """
    Mean distancing share over all pure equilibria
    """
    profiles = enumerate_nash(net, params, weak_out=weak_out)
    if not profiles:
        raise NoPureEquilibriumError(
            'no pure-strategy Nash equilibrium for fine=%g' % params.fine)
    return float(np.mean([p.size for p in profiles])) / net.n


@dataclass(frozen=True)
class EquilibriumReport(object):
    nash_profiles: tuple
    optimal_profiles: tuple
    predicted_uptake: float
    welfare: tuple

    def to_frame(self):
        nash = set(p.bits for p in self.nash_profiles)
        optimal = set(p.bits for p in self.optimal_profiles)
        n = (self.nash_profiles + self.optimal_profiles)[0].n
        rows = []
        for bits, value in enumerate(self.welfare):
            rows.append({
                'profile_bits': format(bits, '0%db' % n)[::-1],
                'size': bin(bits).count('1'),
                'is_nash': int(bits in nash),
                'is_optimal': int(bits in optimal),
                'welfare': round(float(value), 10),
            })
        return pd.DataFrame(rows, columns=['profile_bits', 'size', 'is_nash',
                                           'is_optimal', 'welfare'])

    def summary(self):
        sizes = sorted(set(p.size for p in self.optimal_profiles))
        return {
            'nash_count': len(self.nash_profiles),
            'nash_profiles': [list(p.members) for p in self.nash_profiles],
            'uptake': self.predicted_uptake,
            'optimum_size': sizes[0] if len(sizes) == 1 else sizes,
            'optimal_profiles': [list(p.members)
                                 for p in self.optimal_profiles],
        }


def solve(net, params, weak_out=False, count_fines=False):
    nash = enumerate_nash(net, params, weak_out=weak_out)
    if not nash:
        raise NoPureEquilibriumError(
            'no pure-strategy Nash equilibrium for fine=%g' % params.fine)
    optimal = social_optima(net, params, count_fines=count_fines)
    welfare = welfare_vector(net, params, count_fines=count_fines)
    uptake = float(np.mean([p.size for p in nash])) / net.n
    debug('solve', net.edge_list, params, 'nash', [p.members for p in nash])
    return EquilibriumReport(tuple(nash), tuple(optimal), uptake,
                             tuple(float(w) for w in welfare))


def all_nash_of_size(k):
    def predicate(profiles):
        return bool(profiles) and all(p.size == k for p in profiles)
    predicate.__name__ = 'all_nash_of_size_%d' % k
    return predicate


def nash_set_equals(expected):
    expected = frozenset(p.bits for p in expected)

    def predicate(profiles):
        return frozenset(p.bits for p in profiles) == expected
    return predicate


@dataclass(frozen=True)
class FineInterval(object):
    lower: float
    upper: float
    lower_closed: bool = True
    upper_closed: bool = False

    def __contains__(self, value):
        above = value >= self.lower if self.lower_closed \
            else value > self.lower
        below = value <= self.upper if self.upper_closed \
            else value < self.upper
        return above and below

    def __str__(self):
        return '%s%g, %g%s' % ('[' if self.lower_closed else '(',
                               self.lower, self.upper,
                               ']' if self.upper_closed else ')')


def fine_breakpoints(net, params, upper=None):
    """
    Fines at which some agent is indifferent between joining and not
    """
    upper = params.b if upper is None else upper
    table = payoff_table(net, params.replace(fine=0.0))
    n = net.n
    points = {0.0, float(upper)}
    for bits in range(1 << n):
        for i in range(n):
            if (bits >> i) & 1:
                continue
            # gross payoff outside minus payoff after joining
            t = table[bits, i] - table[bits | (1 << i), i]
            if 0.0 <= t <= upper:
                points.add(float(t))
    merged = []
    for value in sorted(points):
        if merged and value - merged[-1] <= 1e-9:
            continue
        merged.append(value)
    return merged


def corrective_fine_interval(net, params, target, upper=None,
                             weak_out=False):
    """
    Fine values in ``[0, upper]`` for which ``target`` holds on the
    equilibrium set

    ``target`` is a callable receiving the list of Nash profiles. The
    predicate is evaluated on every breakpoint and on every open segment
    between consecutive breakpoints, so the returned intervals are exact.

    >>> from sdlab.network import make_environment, EnvironmentKind
    >>> k5 = make_environment(EnvironmentKind.HOMOGENEOUS, 5)
    >>> [str(x) for x in corrective_fine_interval(
    ...     k5, GameParams.lab_defaults(), all_nash_of_size(4))]
    ['[12, 25)']
    """
    upper = params.b if upper is None else float(upper)
    points = fine_breakpoints(net, params, upper)

    def holds(fine):
        profiles = enumerate_nash(net, params.replace(fine=fine),
                                  weak_out=weak_out)
        return bool(target(profiles))

    # alternating breakpoints and segment midpoints
    pieces = []
    for k, value in enumerate(points):
        pieces.append(('point', value, value, holds(value)))
        if k + 1 < len(points):
            mid = 0.5 * (value + points[k + 1])
            pieces.append(('open', value, points[k + 1], holds(mid)))

    intervals = []
    current = None
    for kind, lo, hi, ok in pieces:
        if not ok:
            if current is not None:
                intervals.append(current)
                current = None
            continue
        if current is None:
            current = FineInterval(lo, hi, lower_closed=(kind == 'point'),
                                   upper_closed=(kind == 'point'))
        else:
            current = FineInterval(current.lower, hi, current.lower_closed,
                                   upper_closed=(kind == 'point'))
    if current is not None:
        intervals.append(current)
    if not intervals:
        raise FineCalibrationError(
            'target never holds for fines in [0, %g]' % upper)
    debug('fine intervals', [str(x) for x in intervals])
    return intervals


@dataclass(frozen=True)
class HypothesisResult(object):
    name: str
    passed: bool
    detail: str


def _uptake_curve(net, params, fines):
    curve = []
    for fine in fines:
        try:
            curve.append((fine, predicted_uptake(
                net, params.replace(fine=fine))))
        except NoPureEquilibriumError:
            continue
    return curve


def hypothesis_report(params=None, fine=15.0):
    """
    Evaluate the five model hypotheses on the homogeneous and superspreader
    environments
    """
    params = GameParams.lab_defaults() if params is None \
        else params.replace(fine=0.0, nudge=False)
    complete = make_environment(EnvironmentKind.HOMOGENEOUS, params.n)
    star = make_environment(EnvironmentKind.SUPERSPREADER, params.n)
    results = []

    uptake_complete = predicted_uptake(complete, params)
    uptake_star = predicted_uptake(star, params)
    results.append(HypothesisResult(
        'H1', uptake_complete > uptake_star,
        'uptake complete %.4g vs star %.4g' % (uptake_complete,
                                               uptake_star)))

    nash_complete = enumerate_nash(complete, params)
    optima_complete = social_optima(complete, params)
    nash_star = enumerate_nash(star, params)
    optima_star = social_optima(star, params)
    under = max(p.size for p in nash_complete) < \
        min(p.size for p in optima_complete)
    same = set(p.bits for p in nash_star) == \
        set(p.bits for p in optima_star)
    results.append(HypothesisResult(
        'H2', under and same,
        'complete NE sizes %s vs optimum sizes %s; star NE equals optimum: %s'
        % (sorted(set(p.size for p in nash_complete)),
           sorted(set(p.size for p in optima_complete)), same)))

    monotone = True
    for net in (complete, star):
        grid = fine_breakpoints(net, params)
        grid = sorted(set(grid) | set(
            0.5 * (a + b) for a, b in zip(grid[:-1], grid[1:])))
        values = [u for _, u in _uptake_curve(net, params, grid)]
        monotone &= all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
    results.append(HypothesisResult(
        'H3', monotone, 'uptake weakly increasing in the fine on [0, b]'))

    identical = True
    for net in (complete, star):
        for f in (0.0, fine):
            off = enumerate_nash(net, params.replace(fine=f, nudge=False))
            on = enumerate_nash(net, params.replace(fine=f, nudge=True))
            identical &= [p.bits for p in off] == [p.bits for p in on]
    results.append(HypothesisResult(
        'H4', identical, 'nudge leaves every equilibrium set unchanged'))

    weakly_more = True
    details = []
    for label, net in (('complete', complete), ('star', star)):
        with_fine = predicted_uptake(net, params.replace(fine=fine))
        with_nudge = predicted_uptake(net, params.replace(nudge=True))
        weakly_more &= with_fine >= with_nudge
        details.append('%s fine %.4g vs nudge %.4g' % (label, with_fine,
                                                       with_nudge))
    results.append(HypothesisResult('H5', weakly_more, '; '.join(details)))
    return results
