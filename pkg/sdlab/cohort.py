# -*- coding: utf-8 -*-
"""
Synthetic subject pools, preference elicitation and behavioural propensity

:copyright:
    The sdlab Development Team
:license:
    GNU Lesser General Public License, Version 3
    (https://www.gnu.org/copyleft/lesser.html)
"""
from __future__ import absolute_import, division, print_function

from dataclasses import asdict, dataclass, fields, replace
import io
import math
import os

import numpy as np
import pandas as pd
from scipy import stats
from scipy.stats import qmc

from .core import (DegenerateInputError, InfeasibleTargetError,
                   MissingCoefficientError, MissingColumnsError,
                   ValidationError, warn)
from .utils import as_generator, debug, spawn_seeds


DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data')

BRET_BOXES = 100
BRET_BOX_VALUE = 0.1

SVO_ALTRUIST = 57.15
SVO_PROSOCIAL = 22.45
SVO_INDIVIDUALIST = -12.04

# covariates of a subject entering regressions and the propensity index
SUBJECT_COVARIATES = ('female', 'age', 'education', 'employed', 'religious',
                      'bret_score', 'svo_prosocial', 'hubei',
                      'distance_wuhan', 'oxcgrt_avg')
EXTRA_COVARIATES = ('svo_angle', 'ip_distance_wuhan', 'oxcgrt_2021')
CONTEXT_COVARIATES = ('fine', 'nudge', 'superspreader_env', 'superspreader',
                      'recipient')

# six primary slider items, nine options each: (self, other)
_SVO_ITEMS = (
    ((85, 85, 85, 85, 85, 85, 85, 85, 85),
     (85, 76, 68, 59, 50, 41, 33, 24, 15)),
    ((85, 87, 89, 91, 93, 94, 96, 98, 100),
     (15, 19, 24, 28, 33, 37, 41, 46, 50)),
    ((50, 54, 59, 63, 68, 72, 76, 81, 85),
     (100, 98, 96, 94, 93, 91, 89, 87, 85)),
    ((50, 54, 59, 63, 68, 72, 76, 81, 85),
     (100, 89, 79, 68, 58, 47, 36, 26, 15)),
    ((100, 94, 88, 81, 75, 69, 63, 56, 50),
     (50, 56, 63, 69, 75, 81, 88, 94, 100)),
    ((100, 98, 96, 94, 93, 91, 89, 87, 85),
     (50, 54, 59, 63, 68, 72, 76, 81, 85)),
)


@dataclass(frozen=True)
class Subject(object):
    """
    One participant with every covariate of the analysis

    Missing answers are NaN. ``ip_distance_wuhan`` is NaN for subjects
    located abroad.
    """
    id: str
    age: float
    female: int
    education: float
    employed: int
    religious: int
    bret_score: float
    svo_angle: float
    svo_prosocial: int
    hubei: int
    distance_wuhan: float
    oxcgrt_avg: float
    city: str = ''
    province: str = ''
    ip_distance_wuhan: float = float('nan')
    oxcgrt_2021: float = float('nan')

    def __post_init__(self):
        if self.distance_wuhan < 0:
            raise ValidationError('distance from Wuhan must not be negative')
        if not (math.isnan(self.bret_score) or
                0 <= self.bret_score <= BRET_BOXES):
            raise ValidationError('BRET score must lie in [0, 100]')

    @property
    def complete(self):
        return not any(math.isnan(float(getattr(self, name)))
                       for name in SUBJECT_COVARIATES)

    def covariates(self):
        return {name: getattr(self, name)
                for name in SUBJECT_COVARIATES + EXTRA_COVARIATES}


@dataclass(frozen=True)
class MomentTargets(object):
    """
    Target means and standard deviations of the generated pool
    """
    age_mean: float = 35.13
    age_sd: float = 10.23
    age_range: tuple = (18, 70)
    female: float = 0.47
    education_mean: float = 18.7
    education_sd: float = 1.48
    education_range: tuple = (9, 22)
    employed: float = 0.76
    religious: float = 0.14
    bret_mean: float = 41.76
    bret_sd: float = 33.14
    bret_neutral_share: float = 0.15
    prosocial: float = 0.49
    hubei: float = 0.49
    foreign_ip: float = 4 / 414
    moved_ip: float = 37 / 414

    def __post_init__(self):
        for name in ('female', 'employed', 'religious', 'prosocial', 'hubei',
                     'foreign_ip', 'moved_ip', 'bret_neutral_share'):
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise InfeasibleTargetError(
                    '%s must be a proportion, got %r' % (name, value))
        for name in ('age_sd', 'education_sd', 'bret_sd'):
            if getattr(self, name) <= 0:
                raise InfeasibleTargetError('%s must be positive' % name)
        if not 0 < self.bret_mean < BRET_BOXES:
            raise InfeasibleTargetError('BRET mean must lie in (0, 100)')
        low, high = self.age_range
        if not low < self.age_mean < high:
            raise InfeasibleTargetError('age mean outside its range')
        low, high = self.education_range
        if not low < self.education_mean < high:
            raise InfeasibleTargetError('education mean outside its range')

    def bret_beta(self):
        """
        Beta shape of the non risk-neutral BRET choices

        A share ``bret_neutral_share`` opens exactly 50 boxes; the rest
        follows a scaled beta law fitted so the mixture hits the targets.
        """
        h = self.bret_neutral_share
        m = self.bret_mean / BRET_BOXES
        s = self.bret_sd / BRET_BOXES
        mean_b = (m - 0.5 * h) / (1.0 - h)
        second_b = (s * s + m * m - 0.25 * h) / (1.0 - h)
        var_b = second_b - mean_b ** 2
        if not 0 < mean_b < 1 or var_b <= 0 or \
                var_b >= mean_b * (1.0 - mean_b):
            raise InfeasibleTargetError('BRET moments cannot be matched')
        total = mean_b * (1.0 - mean_b) / var_b - 1.0
        return mean_b * total, (1.0 - mean_b) * total


def _truncnorm_ppf(u, mean, sd, bounds):
    low, high = bounds
    return stats.truncnorm.ppf(u, (low - mean) / sd, (high - mean) / sd,
                               loc=mean, scale=sd)


def gen_subjects(n, targets=None, seed=0, incomplete=0, cities=None):
    """
    Draw a pool of ``n`` subjects matching ``targets``

    Marginals are sampled on a Latin hypercube, which keeps the sample
    moments close to the targets already for a few hundred subjects.
    Residence is drawn from the city table: Hubei residents from Hubei
    cities, everyone else from the remaining ones, so distance and the
    government response index are negatively correlated.

    ``incomplete`` subjects (the last ones) lack the post experimental
    answers, leaving their demographics and BRET score missing.
    """
    from .geo import load_cities
    if n < 1:
        raise ValidationError('n must be at least 1')
    if not 0 <= incomplete <= n:
        raise ValidationError('incomplete must lie in [0, n]')
    targets = targets or MomentTargets()
    cities = load_cities() if cities is None else cities
    hubei_cities = cities[cities['hubei'] == 1].reset_index(drop=True)
    other_cities = cities[cities['hubei'] == 0].reset_index(drop=True)
    if hubei_cities.empty or other_cities.empty:
        raise InfeasibleTargetError('city table needs Hubei and other cities')

    lhs_seed, aux_seed = spawn_seeds(seed, 2)
    sampler = qmc.LatinHypercube(d=12, seed=np.random.default_rng(lhs_seed))
    u = sampler.random(n)
    rng = np.random.default_rng(aux_seed)

    age = np.rint(_truncnorm_ppf(u[:, 0], targets.age_mean, targets.age_sd,
                                 targets.age_range))
    education = np.rint(_truncnorm_ppf(
        u[:, 1], targets.education_mean, targets.education_sd,
        targets.education_range))
    female = (u[:, 2] < targets.female).astype(int)
    employed = (u[:, 3] < targets.employed).astype(int)
    religious = (u[:, 4] < targets.religious).astype(int)
    a, b = targets.bret_beta()
    bret = np.where(u[:, 5] < targets.bret_neutral_share, 50.0,
                    np.rint(BRET_BOXES * stats.beta.ppf(u[:, 6], a, b)))
    prosocial = (u[:, 7] < targets.prosocial).astype(int)
    # angles are rounded to two decimals and must keep their category
    angle = np.where(
        prosocial == 1,
        SVO_PROSOCIAL + u[:, 8] * (SVO_ALTRUIST - SVO_PROSOCIAL - 0.01),
        SVO_INDIVIDUALIST +
        u[:, 8] * (SVO_PROSOCIAL - SVO_INDIVIDUALIST - 0.01))
    hubei = (u[:, 9] < targets.hubei).astype(int)

    subjects = []
    for k in range(n):
        pool = hubei_cities if hubei[k] else other_cities
        city = pool.iloc[min(int(u[k, 10] * len(pool)), len(pool) - 1)]
        distance = float(city['distance'])
        if u[k, 11] < targets.foreign_ip:
            ip_distance = float('nan')
        elif u[k, 11] < targets.foreign_ip + targets.moved_ip:
            other = cities.iloc[int(rng.integers(len(cities)))]
            ip_distance = float(other['distance'])
        else:
            ip_distance = distance
        missing = k >= n - incomplete
        nan = float('nan')
        subjects.append(Subject(
            id='S%04d' % (k + 1),
            age=nan if missing else float(age[k]),
            female=int(female[k]),
            education=nan if missing else float(education[k]),
            employed=int(employed[k]),
            religious=int(religious[k]),
            bret_score=nan if missing else float(bret[k]),
            svo_angle=round(float(angle[k]), 2),
            svo_prosocial=int(prosocial[k]),
            hubei=int(hubei[k]),
            distance_wuhan=distance,
            oxcgrt_avg=float(city['index_2020']),
            city=str(city['name']),
            province=str(city['province']),
            ip_distance_wuhan=ip_distance,
            oxcgrt_2021=float(city['index_2021'])))
    debug('generated', n, 'subjects from seed', seed)
    return subjects


def subject_moments(subjects):
    """
    Mean and standard deviation of every covariate, missing values skipped
    """
    frame = subjects_frame(subjects)
    columns = list(SUBJECT_COVARIATES)
    return frame[columns].agg(['mean', 'std']).T


def subjects_frame(subjects):
    return pd.DataFrame([asdict(s) for s in subjects],
                        columns=[f.name for f in fields(Subject)])


def write_subjects_csv(subjects, path):
    subjects_frame(subjects).to_csv(path, index=False, float_format='%.10g')


def read_subjects_csv(path):
    frame = pd.read_csv(path, dtype={'id': str, 'city': str,
                                     'province': str},
                        keep_default_na=False, na_values=[''])
    names = [f.name for f in fields(Subject)]
    missing = [name for name in names[:12] if name not in frame.columns]
    if missing:
        raise MissingColumnsError('subjects file lacks columns: %s' %
                                  ', '.join(missing))
    subjects = []
    for record in frame.to_dict('records'):
        values = {}
        for name in names:
            if name not in record:
                continue
            value = record[name]
            if name in ('id', 'city', 'province'):
                value = '' if pd.isna(value) else str(value)
            elif name in ('female', 'employed', 'religious',
                          'svo_prosocial', 'hubei'):
                value = int(value)
            else:
                value = float(value)
            values[name] = value
        subjects.append(Subject(**values))
    return subjects


def bret_optimal_boxes(r):
    """
    Boxes maximizing expected power utility ``x ** r`` in the bomb task

    >>> bret_optimal_boxes(1), bret_optimal_boxes(0.5), bret_optimal_boxes(3)
    (50, 33, 75)
    """
    if not r > 0:
        raise ValidationError('risk coefficient must be positive')
    m = np.arange(BRET_BOXES + 1)
    with np.errstate(divide='ignore'):
        # logs keep large exponents finite; m = 0 and m = 100 are -inf
        log_value = np.log1p(-m / BRET_BOXES) + \
            r * np.log(BRET_BOX_VALUE * m)
    best = log_value.max()
    # argmax returns the first, i.e. smallest, maximizer
    return int(np.argmax(log_value >= best - 1e-12 * abs(best)))


def bret_risk_coefficient(boxes):
    """
    Risk coefficient whose continuous optimum is ``boxes``

    >>> bret_risk_coefficient(50)
    1.0
    """
    if not 0 < boxes < BRET_BOXES:
        raise ValidationError('boxes must lie strictly between 0 and 100')
    return boxes / (BRET_BOXES - boxes)


def bret_simulate(m, rng):
    """
    Yuan earned when collecting ``m`` boxes with one hidden bomb
    """
    if not 0 <= m <= BRET_BOXES or int(m) != m:
        raise ValidationError('boxes collected must be an integer in '
                              '[0, 100]')
    rng = as_generator(rng)
    bomb = int(rng.integers(BRET_BOXES))
    # boxes 0..m-1 are collected
    return 0.0 if bomb < m else round(BRET_BOX_VALUE * m, 2)


def svo_classify(mean_self, mean_other):
    """
    SVO angle in degrees and type

    >>> svo_classify(70, 70)
    (45.0, 'prosocial')
    >>> svo_classify(85, 50)
    (0.0, 'individualist')
    """
    dx = mean_self - 50.0
    dy = mean_other - 50.0
    if dx == 0 and dy == 0:
        raise DegenerateInputError('angle undefined for mean allocations '
                                   'of 50/50')
    angle = math.degrees(math.atan2(dy, dx))
    return angle, svo_category(angle)


def svo_category(angle):
    if angle >= SVO_ALTRUIST:
        return 'altruist'
    if angle >= SVO_PROSOCIAL:
        return 'prosocial'
    if angle >= SVO_INDIVIDUALIST:
        return 'individualist'
    return 'competitive'


def svo_slider_items():
    """
    The six primary slider items as (self, other) option tuples
    """
    return _SVO_ITEMS


def svo_from_choices(choices):
    """
    Classify from the option index (0-8) chosen in each primary item

    >>> svo_from_choices([0] * 6)[1]
    'prosocial'
    """
    choices = list(choices)
    if len(choices) != len(_SVO_ITEMS):
        raise ValidationError('six slider choices are needed')
    own, other = [], []
    for (selves, others), k in zip(_SVO_ITEMS, choices):
        if not 0 <= k < len(selves):
            raise ValidationError('slider choice %r out of range' % (k,))
        own.append(selves[k])
        other.append(others[k])
    return svo_classify(float(np.mean(own)), float(np.mean(other)))


@dataclass(frozen=True)
class PropensityContext(object):
    fine: bool = False
    nudge: bool = False
    superspreader_env: bool = False
    superspreader: bool = False
    recipient: bool = False


@dataclass(frozen=True)
class Calibration(object):
    """
    Named coefficients of the linear distancing index
    """
    name: str
    items: tuple

    def __getitem__(self, key):
        for name, value in self.items:
            if name == key:
                return value
        raise MissingCoefficientError(key)

    def __contains__(self, key):
        return any(name == key for name, _ in self.items)

    def keys(self):
        return [name for name, _ in self.items]

    def get(self, key, default=None):
        return self[key] if key in self else default

    def as_dict(self):
        return dict(self.items)

    @classmethod
    def from_mapping(cls, mapping, name='custom'):
        return cls(name, tuple((str(k), float(v))
                               for k, v in mapping.items()))


_CALIBRATIONS = {}


def parse_calibration(text, name='custom'):
    """
    Parse ``key=value`` lines; ``#`` starts a comment

    >>> parse_calibration('# M0\\nintercept = 0.5\\nfine=0.1')['fine']
    0.1
    """
    items = []
    for number, line in enumerate(io.StringIO(text), 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ValidationError('line %d: expected key=value' % number)
        key, value = (part.strip() for part in line.split('=', 1))
        try:
            items.append((key, float(value)))
        except ValueError:
            raise ValidationError('line %d: %r is not a number' %
                                  (number, value))
    return Calibration(name, tuple(items))


def load_calibration(name_or_path='m2'):
    """
    Shipped calibration ``m1`` (distance), ``m2`` (Hubei), ``m3``
    (government response index) or a path to a calibration file
    """
    key = str(name_or_path).lower()
    if key in _CALIBRATIONS:
        return _CALIBRATIONS[key]
    if key in ('m1', 'm2', 'm3'):
        path = os.path.join(DATA_DIR, 'calibration_%s.txt' % key)
    else:
        path = name_or_path
    with io.open(path, 'r', encoding='UTF-8') as fh:
        calibration = parse_calibration(fh.read(), name=key)
    if key in ('m1', 'm2', 'm3'):
        _CALIBRATIONS[key] = calibration
    return calibration


def linear_index(subject, context, coefficients=None):
    """
    Unclipped distancing index of ``subject`` in ``context``
    """
    coefficients = load_calibration() if coefficients is None \
        else coefficients
    for required in ('intercept',) + CONTEXT_COVARIATES[:3]:
        if required not in coefficients:
            raise MissingCoefficientError(
                'calibration %s lacks %r' % (
                    getattr(coefficients, 'name', ''), required))
    value = coefficients['intercept']
    for name in coefficients.keys():
        if name == 'intercept':
            continue
        if name in CONTEXT_COVARIATES:
            x = float(getattr(context, name))
        elif hasattr(subject, name):
            x = float(getattr(subject, name))
        else:
            raise ValidationError('unknown covariate %r in calibration' %
                                  name)
        if math.isnan(x):
            raise ValidationError('subject %s lacks %s' % (subject.id, name))
        value += coefficients[name] * x
    return value


def propensity(subject, context, coefficients=None):
    """
    Distancing probability: the linear index clipped to [0, 1]
    """
    return min(1.0, max(0.0, linear_index(subject, context, coefficients)))


def _fill_missing(subject, means):
    values = {}
    for name in SUBJECT_COVARIATES:
        value = getattr(subject, name)
        if math.isnan(float(value)):
            values[name] = means[name]
    if not values:
        return subject
    return replace(subject, **values)


def impute_means(subjects):
    """
    Replace missing covariates by the pool mean
    """
    means = subjects_frame(subjects)[list(SUBJECT_COVARIATES)].mean()
    return [_fill_missing(s, means) for s in subjects]


def synthetic_panel(n_groups=83, rounds_per_part=20, drop_first=10,
                    coefficients=None, group_sd=0.05, subject_sd=0.05,
                    seed=0, subjects=None):
    """
    Panel drawn directly from the linear index with group and subject shocks

    Five subjects form a group; environments and interventions rotate over
    groups, positions are reassigned every round. The outcome is Bernoulli
    with the clipped index plus shocks as success probability.
    """
    from .econometrics import PanelDataset
    coefficients = load_calibration() if coefficients is None \
        else coefficients
    rng = as_generator(seed)
    if subjects is None:
        subjects = gen_subjects(5 * n_groups, seed=seed)
    if len(subjects) < 5 * n_groups:
        raise ValidationError('%d subjects cannot fill %d groups' % (
            len(subjects), n_groups))
    subjects = impute_means(subjects)

    rows = []
    for g in range(n_groups):
        star = g % 2 == 1
        intervention = 'fine' if (g // 2) % 2 == 0 else 'nudge'
        group_shock = rng.normal(0.0, group_sd)
        members = subjects[5 * g:5 * g + 5]
        subject_shock = rng.normal(0.0, subject_sd, size=5)
        for part_index, part in enumerate(('baseline', 'intervention')):
            treated = part_index == 1
            for rnd in range(1, rounds_per_part + 1):
                positions = rng.permutation(5)
                for k, subject in enumerate(members):
                    position = int(positions[k])
                    context = PropensityContext(
                        fine=treated and intervention == 'fine',
                        nudge=treated and intervention == 'nudge',
                        superspreader_env=star,
                        superspreader=star and position == 0,
                        recipient=star and position != 0)
                    p = linear_index(subject, context, coefficients) + \
                        group_shock + subject_shock[k]
                    p = min(1.0, max(0.0, p))
                    if rnd <= drop_first:
                        continue
                    row = {
                        'subject_id': subject.id, 'group_id': g,
                        'round': rnd,
                        'global_round': part_index * rounds_per_part + rnd,
                        'part': part, 'position': position,
                        'y': int(rng.random() < p),
                        'fine': int(context.fine),
                        'nudge': int(context.nudge),
                        'superspreader_env': int(star),
                        'superspreader': int(context.superspreader),
                        'recipient': int(context.recipient),
                        'intervention_part': int(treated),
                        'substituted_group': 0, 'ghost': 0,
                        'departed': 0,
                    }
                    row.update(subject.covariates())
                    rows.append(row)
    if not rows:
        warn('synthetic panel is empty')
    return PanelDataset(pd.DataFrame(rows))
