# -*- coding: utf-8 -*-
"""
Regression analysis of distancing decisions

Estimators work on a long panel with one row per subject, part and round.
Standard errors are clustered at the group level throughout; p-values use
a Student t law with one degree of freedom less than the number of
clusters.

:copyright:
    The sdlab Development Team
:license:
    GNU Lesser General Public License, Version 3
    (https://www.gnu.org/copyleft/lesser.html)
"""
from __future__ import absolute_import, division, print_function

from dataclasses import dataclass, field, replace
import math

import numpy as np
import pandas as pd
from scipy import linalg, special, stats

from .cohort import EXTRA_COVARIATES, SUBJECT_COVARIATES
from .core import (MissingColumnsError, NonConvergenceError,
                   RankDeficiencyError, SeparationError, ValidationError,
                   warn)
from .network import EnvironmentKind
from .policies import Part
from .utils import debug


INTERCEPT = 'const'
MODELS = ('lpm', 're', 'logit', 'probit')
BINARY_MODELS = ('logit', 'probit')
PANEL_COLUMNS = ('subject_id', 'group_id', 'round', 'global_round', 'part',
                 'position', 'y', 'fine', 'nudge', 'superspreader_env',
                 'superspreader', 'recipient', 'intervention_part',
                 'substituted_group', 'ghost', 'departed')
REQUIRED_COLUMNS = ('subject_id', 'group_id', 'round', 'part', 'y')

# a fit is declared separated when the linear index diverges or fitted
# probabilities come this close to 0 or 1
_SEPARATION_INDEX = 30.0
_SEPARATION_TOL = 1e-7


class PanelDataset(object):
    """
    Long-format decision panel

    ``frame`` must hold ``subject_id``, ``group_id``, ``round``, ``part``
    and the binary outcome ``y``; every other column is a covariate.
    """

    def __init__(self, frame):
        frame = pd.DataFrame(frame)
        if frame.empty and not len(frame.columns):
            frame = pd.DataFrame(columns=list(PANEL_COLUMNS))
        missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
        if missing:
            raise MissingColumnsError('panel lacks columns: %s' %
                                      ', '.join(missing))
        if len(frame) and not frame['y'].isin([0, 1]).all():
            raise ValidationError('outcome must be 0 or 1')
        per_subject = frame.groupby('subject_id')['group_id'].nunique()
        if (per_subject > 1).any():
            raise ValidationError('subject %s appears in several groups' %
                                  per_subject[per_subject > 1].index[0])
        self.frame = frame.reset_index(drop=True)

    def __len__(self):
        return len(self.frame)

    def __repr__(self):
        return 'PanelDataset(%d rows, %d subjects, %d groups)' % (
            len(self), self.n_subjects, self.n_groups)

    @property
    def n_subjects(self):
        return int(self.frame['subject_id'].nunique())

    @property
    def n_groups(self):
        return int(self.frame['group_id'].nunique())

    @property
    def columns(self):
        return list(self.frame.columns)

    def subset(self, mask):
        return PanelDataset(self.frame[np.asarray(mask, dtype=bool)])

    def keep_rounds_after(self, drop_first):
        return self.subset(self.frame['round'] > drop_first)

    def without_departed(self):
        if 'departed' not in self.frame.columns:
            return self
        return self.subset(self.frame['departed'] != 1)

    def to_csv(self, path):
        self.frame.to_csv(path, index=False, float_format='%.10g')

    @classmethod
    def from_csv(cls, path):
        return cls(pd.read_csv(path, dtype={'subject_id': str}))


def build_panel(logs, subjects=None, drop_first=10, drop_incomplete=True,
                include_departed=False):
    """
    Long panel of the decisions of all analysed agents

    ``subjects`` maps subject ids to :class:`sdlab.cohort.Subject`; without
    it the panel carries only treatment columns. Subjects with missing
    covariates are dropped with a warning unless ``drop_incomplete`` is
    false, in which case they stay with NaN covariates and are removed by
    listwise deletion at fitting time.

    With ``include_departed`` the rounds agents played before leaving or
    being disqualified are kept too, flagged by ``departed``.
    """
    rows = []
    dropped = set()
    for log in logs:
        config = log.config
        if not log.complete:
            warn('group %d is incomplete and left out of the panel' %
                 config.group_id)
            continue
        star = config.environment is EnvironmentKind.SUPERSPREADER
        promoted = set(log.promoted_ghosts)
        departed = set(log.departed_agents) if include_departed else set()
        for agent_id in log.analysis_agents + sorted(departed):
            if config.subject_ids is None:
                subject_id = 'g%d_a%d' % (config.group_id, agent_id)
            else:
                subject_id = str(config.subject_ids[agent_id])
            subject = None
            if subjects is not None:
                if subject_id not in subjects:
                    raise ValidationError('subject %s of group %d is '
                                          'unknown' % (subject_id,
                                                       config.group_id))
                subject = subjects[subject_id]
                if drop_incomplete and not subject.complete:
                    dropped.add(subject_id)
                    continue
            for record in log.records:
                if record.round <= drop_first:
                    continue
                decision = record.decision_of(agent_id)
                if decision is None:
                    continue
                position = decision[0]
                treated = record.part is Part.INTERVENTION
                row = {
                    'subject_id': subject_id,
                    'group_id': config.group_id,
                    'round': record.round,
                    'global_round': record.global_round,
                    'part': record.part.value,
                    'position': position,
                    'y': int(decision[1]),
                    'fine': int(treated and config.intervention == 'fine'),
                    'nudge': int(treated and config.intervention == 'nudge'),
                    'superspreader_env': int(star),
                    'superspreader': int(star and position == 0),
                    'recipient': int(star and position != 0),
                    'intervention_part': int(treated),
                    'substituted_group': int(log.has_substitution),
                    'ghost': int(agent_id in promoted),
                    'departed': int(agent_id in departed),
                }
                if subject is not None:
                    row.update(subject.covariates())
                rows.append(row)
    for subject_id in sorted(dropped):
        warn('subject %s lacks covariates and is dropped' % subject_id)
    columns = list(PANEL_COLUMNS)
    if subjects is not None:
        columns += list(SUBJECT_COVARIATES + EXTRA_COVARIATES)
    debug('panel with', len(rows), 'rows')
    return PanelDataset(pd.DataFrame(rows, columns=columns))


@dataclass(frozen=True)
class FitResult(object):
    """
    Estimated coefficients with their cluster-robust covariance
    """
    names: tuple
    beta: np.ndarray
    vcov: np.ndarray
    n_obs: int
    n_subjects: int
    n_clusters: int
    model: str
    covariates: tuple = ()
    intercept: bool = True
    extra: dict = field(default_factory=dict)
    marginal_effects: pd.DataFrame = None

    @property
    def se(self):
        return np.sqrt(np.clip(np.diag(self.vcov), 0.0, None))

    @property
    def params(self):
        return pd.Series(self.beta, index=list(self.names))

    @property
    def tvalues(self):
        with np.errstate(divide='ignore', invalid='ignore'):
            return self.beta / self.se

    @property
    def pvalues(self):
        return student_pvalues(self.tvalues, self.n_clusters)

    def __getitem__(self, name):
        return self.params[name]

    def summary_frame(self):
        frame = pd.DataFrame({'coef': self.beta, 'se': self.se,
                              't': self.tvalues, 'p': self.pvalues},
                             index=list(self.names))
        frame['stars'] = [stars(p) for p in frame['p']]
        return frame


def student_pvalues(t, n_clusters):
    df = max(1, n_clusters - 1)
    return 2.0 * stats.t.sf(np.abs(np.asarray(t, dtype=float)), df)


def stars(p):
    if not p < 0.1:
        return ''
    if p < 0.01:
        return '***'
    if p < 0.05:
        return '**'
    return '*'


@dataclass(frozen=True)
class _Design(object):
    X: np.ndarray
    y: np.ndarray
    names: tuple
    clusters: np.ndarray
    n_clusters: int
    subjects: np.ndarray
    frame: pd.DataFrame


def _design(data, covariates, intercept=True, cluster='group_id'):
    frame = data.frame
    covariates = list(covariates)
    missing = [c for c in covariates + [cluster] if c not in frame.columns]
    if missing:
        raise MissingColumnsError('panel lacks columns: %s' %
                                  ', '.join(missing))
    used = frame[covariates + ['y', cluster, 'subject_id']]
    complete = used.notna().all(axis=1)
    if not complete.all():
        warn('%d rows with missing values are dropped' %
             int((~complete).sum()))
        frame = frame[complete.values]
    if frame.empty:
        raise ValidationError('no observations left to fit')
    X = frame[covariates].to_numpy(dtype=float)
    names = list(covariates)
    if intercept:
        X = np.column_stack([np.ones(len(frame)), X])
        names = [INTERCEPT] + names
    codes, uniques = pd.factorize(frame[cluster])
    _check_rank(X, names)
    return _Design(X=X, y=frame['y'].to_numpy(dtype=float),
                   names=tuple(names), clusters=codes,
                   n_clusters=len(uniques),
                   subjects=frame['subject_id'].to_numpy(), frame=frame)


def _check_rank(X, names):
    """
    Raise naming the columns that pivoted QR finds dependent
    """
    if X.shape[1] == 0:
        return
    _, R, pivot = linalg.qr(X, mode='economic', pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(X.shape) * np.finfo(float).eps * (diag[0] if len(diag) else 0)
    rank = int((diag > max(tol, 1e-10 * diag[0])).sum())
    if rank < X.shape[1]:
        raise RankDeficiencyError([names[i] for i in sorted(pivot[rank:])])


def _cluster_meat(scores, clusters, n_clusters):
    sums = np.zeros((n_clusters, scores.shape[1]))
    np.add.at(sums, clusters, scores)
    return sums.T @ sums


def _sandwich(bread, scores, clusters, n_clusters, factor):
    vcov = factor * bread @ _cluster_meat(scores, clusters, n_clusters) @ bread
    return (vcov + vcov.T) / 2.0


def _ols_cluster(X, y, clusters, n_clusters, small_sample=True):
    if n_clusters < 2:
        raise ValidationError('clustered errors need at least two clusters')
    n, k = X.shape
    XtX_inv = np.linalg.inv(X.T @ X)
    beta = XtX_inv @ (X.T @ y)
    resid = y - X @ beta
    factor = 1.0
    if small_sample:
        factor = n_clusters / (n_clusters - 1.0) * (n - 1.0) / max(n - k, 1)
    vcov = _sandwich(XtX_inv, X * resid[:, None], clusters, n_clusters,
                     factor)
    return beta, vcov, resid


def fit_lpm_cluster(data, covariates, intercept=True, cluster='group_id',
                    small_sample=True):
    """
    Linear probability model by OLS with cluster-robust covariance

    The covariance carries the factor ``G/(G-1) * (N-1)/(N-K)`` unless
    ``small_sample`` is false. Fitted probabilities are not clipped.
    """
    design = _design(data, covariates, intercept, cluster)
    beta, vcov, _ = _ols_cluster(design.X, design.y, design.clusters,
                                 design.n_clusters, small_sample)
    return FitResult(names=design.names, beta=beta, vcov=vcov,
                     n_obs=len(design.y),
                     n_subjects=len(set(design.subjects)),
                     n_clusters=design.n_clusters, model='lpm',
                     covariates=tuple(covariates), intercept=intercept,
                     extra={'cluster': cluster,
                            'small_sample': small_sample})


def _entity_means(values, codes, counts):
    sums = np.zeros((len(counts),) + values.shape[1:])
    np.add.at(sums, codes, values)
    return sums / counts.reshape((-1,) + (1,) * (values.ndim - 1))


def fit_re_lpm(data, covariates, cluster='group_id', small_sample=True):
    """
    Random effects linear probability model

    Variance components follow Swamy and Arora: the idiosyncratic variance
    comes from the within regression, the subject variance from the
    regression on subject means. Data are quasi-demeaned with
    ``theta_i = 1 - sqrt(s2_e / (T_i * s2_u + s2_e))`` and fitted by OLS
    with clustered errors. A negative subject variance is set to zero,
    which reduces the fit to pooled OLS.
    """
    design = _design(data, covariates, True, cluster)
    X, y = design.X, design.y
    codes, uniques = pd.factorize(design.subjects)
    counts = np.bincount(codes).astype(float)
    n, k = X.shape
    n_entities = len(uniques)

    xbar = _entity_means(X, codes, counts)
    ybar = _entity_means(y, codes, counts)
    sigma2_u = sigma2_e = 0.0
    # time invariant columns vanish after demeaning and cost no within df
    demeaned = X - xbar[codes]
    tol = np.linalg.norm(X, 2) * max(n, k) * np.finfo(float).eps
    within_df = n - n_entities - np.linalg.matrix_rank(demeaned, tol=tol)
    between_df = n_entities - k
    if within_df > 0 and between_df > 0:
        # within fit with the grand mean added back
        xw = demeaned + X.mean(axis=0)
        yw = y - ybar[codes] + y.mean()
        params = np.linalg.lstsq(xw, yw, rcond=None)[0]
        weps = yw - xw @ params
        sigma2_e = float(weps @ weps) / within_df
        params = np.linalg.lstsq(xbar, ybar, rcond=None)[0]
        wu = ybar - xbar @ params
        t_bar = n_entities / (1.0 / counts).sum()
        sigma2_u = float(wu @ wu) / between_df - sigma2_e / t_bar
        if sigma2_u < 0:
            warn('negative subject variance %.3g set to zero' % sigma2_u)
            sigma2_u = 0.0
    if sigma2_u > 0:
        theta = 1.0 - np.sqrt(sigma2_e / (counts * sigma2_u + sigma2_e))
    else:
        theta = np.zeros(n_entities)
    debug('random effects: s2_u', sigma2_u, 's2_e', sigma2_e)
    Xt = X - theta[codes, None] * xbar[codes]
    yt = y - theta[codes] * ybar[codes]
    beta, vcov, _ = _ols_cluster(Xt, yt, design.clusters, design.n_clusters,
                                 small_sample)
    rho = sigma2_u / (sigma2_u + sigma2_e) if sigma2_u + sigma2_e > 0 \
        else 0.0
    return FitResult(names=design.names, beta=beta, vcov=vcov, n_obs=n,
                     n_subjects=n_entities, n_clusters=design.n_clusters,
                     model='re', covariates=tuple(covariates),
                     extra={'cluster': cluster, 'sigma2_u': sigma2_u,
                            'sigma2_e': sigma2_e, 'rho': rho,
                            'theta': pd.Series(theta, index=uniques)})


class _Link(object):
    """
    Probability, density and score weights of a binary link
    """

    def __init__(self, name):
        if name not in BINARY_MODELS:
            raise ValidationError('link must be logit or probit')
        self.name = name

    def cdf(self, eta):
        if self.name == 'logit':
            return special.expit(eta)
        return special.ndtr(eta)

    def pdf(self, eta):
        if self.name == 'logit':
            p = special.expit(eta)
            return p * (1.0 - p)
        return stats.norm.pdf(eta)

    def pdf_slope(self, eta):
        if self.name == 'logit':
            p = special.expit(eta)
            return p * (1.0 - p) * (1.0 - 2.0 * p)
        return -eta * stats.norm.pdf(eta)

    def loglik(self, y, eta):
        if self.name == 'logit':
            return float(np.sum(y * eta - np.logaddexp(0.0, eta)))
        return float(np.sum(y * special.log_ndtr(eta) +
                            (1.0 - y) * special.log_ndtr(-eta)))

    def residual(self, y, eta):
        """
        Score per row divided by the regressors
        """
        if self.name == 'logit':
            return y - special.expit(eta)
        p = special.ndtr(eta)
        return stats.norm.pdf(eta) * (y - p) / np.clip(p * (1.0 - p),
                                                       1e-300, None)

    def weight(self, eta):
        """
        Information weight; expected information for probit
        """
        if self.name == 'logit':
            p = special.expit(eta)
            return p * (1.0 - p)
        p = special.ndtr(eta)
        return stats.norm.pdf(eta) ** 2 / np.clip(p * (1.0 - p), 1e-300,
                                                  None)


def _separated(link, eta):
    p = link.cdf(eta)
    return bool(np.any(p < _SEPARATION_TOL) or
                np.any(p > 1.0 - _SEPARATION_TOL) or
                np.abs(eta).max() > _SEPARATION_INDEX)


def _newton(X, y, link, max_iter, tol):
    n, k = X.shape
    beta = np.zeros(k)
    eta = X @ beta
    loglik = link.loglik(y, eta)
    for iteration in range(1, max_iter + 1):
        score = X.T @ link.residual(y, eta)
        if np.linalg.norm(score) / n < tol:
            if _separated(link, eta):
                raise SeparationError('fitted probabilities reach 0 or 1; '
                                      'the outcome is separated')
            return beta, eta, loglik, iteration
        info = (X * link.weight(eta)[:, None]).T @ X
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            raise SeparationError('information matrix is singular')
        for _ in range(40):
            candidate = beta + step
            new_eta = X @ candidate
            new_loglik = link.loglik(y, new_eta)
            if new_loglik >= loglik - 1e-12 * abs(loglik):
                break
            step = step / 2.0
        beta, eta, loglik = candidate, new_eta, new_loglik
        debug('newton', iteration, 'loglik', loglik)
        if np.abs(eta).max() > _SEPARATION_INDEX:
            raise SeparationError('linear index diverges; the outcome is '
                                  'separated')
    if _separated(link, eta):
        raise SeparationError('fitted probabilities reach 0 or 1; the '
                              'outcome is separated')
    raise NonConvergenceError('no convergence in %d iterations' % max_iter)


def fit_binary_mle(data, covariates, link='logit', cluster='group_id',
                   intercept=True, max_iter=100, tol=1e-8):
    """
    Logit or probit by damped Newton iterations

    Iterates until the norm of the mean score falls below ``tol``; the
    step is halved while it does not raise the likelihood. Probit uses the
    expected information. The covariance is the cluster-robust sandwich
    with factor ``G/(G-1)``.
    """
    link = _Link(link)
    design = _design(data, covariates, intercept, cluster)
    X, y = design.X, design.y
    if design.n_clusters < 2:
        raise ValidationError('clustered errors need at least two clusters')
    if y.min() == y.max():
        raise SeparationError('outcome is constant, the likelihood has no '
                              'maximum')
    beta, eta, loglik, iterations = _newton(X, y, link, max_iter, tol)
    info = (X * link.weight(eta)[:, None]).T @ X
    bread = np.linalg.inv(info)
    scores = X * link.residual(y, eta)[:, None]
    G = design.n_clusters
    vcov = _sandwich(bread, scores, design.clusters, G, G / (G - 1.0))
    return FitResult(names=design.names, beta=beta, vcov=vcov,
                     n_obs=len(y), n_subjects=len(set(design.subjects)),
                     n_clusters=G, model=link.name,
                     covariates=tuple(covariates), intercept=intercept,
                     extra={'cluster': cluster, 'loglik': loglik,
                            'iterations': iterations})


def _binary_ame(link, X, beta, vcov):
    eta = X @ beta
    dens = link.pdf(eta)
    slope = link.pdf_slope(eta)
    mean_dens = dens.mean()
    ame = mean_dens * beta
    # d ame_j / d beta_l = delta_jl * mean(f) + beta_j * mean(f' x_l)
    jac = np.diag(np.full(len(beta), mean_dens)) + \
        np.outer(beta, (slope[:, None] * X).mean(axis=0))
    cov = jac @ vcov @ jac.T
    return ame, np.sqrt(np.clip(np.diag(cov), 0.0, None))


def _ame_frame(names, ame, se, n_clusters):
    frame = pd.DataFrame({'ame': ame, 'se': se}, index=list(names))
    with np.errstate(divide='ignore', invalid='ignore'):
        frame['p'] = student_pvalues(frame['ame'] / frame['se'], n_clusters)
    return frame.drop(index=INTERCEPT, errors='ignore')


def average_marginal_effects(fit, data=None):
    """
    Average marginal effect of every covariate with delta-method errors

    Linear models return their coefficients. For logit and probit the
    effect of covariate ``k`` is the sample mean of ``beta_k f(x beta)``.
    """
    if fit.model in ('lpm', 're'):
        return _ame_frame(fit.names, fit.beta, fit.se, fit.n_clusters)
    if data is None:
        raise ValidationError('marginal effects of %s need the data' %
                              fit.model)
    design = _design(data, fit.covariates, fit.intercept,
                     fit.extra.get('cluster', 'group_id'))
    ame, se = _binary_ame(_Link(fit.model), design.X, fit.beta, fit.vcov)
    return _ame_frame(fit.names, ame, se, fit.n_clusters)


def subgroup_effects(data, covariates, split, model='lpm',
                     cluster='group_id'):
    """
    Marginal effects separately for ``split == 0`` and ``split == 1``

    Every covariate and the intercept are interacted with both values of
    the split dummy in one model, so the point estimates coincide with
    fitting the two subsamples on their own while the covariance is joint.
    """
    frame = data.frame
    if split not in frame.columns:
        raise MissingColumnsError('panel lacks column %s' % split)
    values = set(frame[split].dropna().unique())
    if not values <= {0, 1}:
        raise ValidationError('%s is not a 0/1 dummy' % split)
    if values != {0, 1}:
        raise ValidationError('%s takes a single value' % split)
    covariates = [c for c in covariates if c != split]
    interacted = frame.copy()
    names = []
    for level in (0, 1):
        indicator = (frame[split] == level).astype(float)
        interacted['%s@%d' % (INTERCEPT, level)] = indicator
        names.append('%s@%d' % (INTERCEPT, level))
        for c in covariates:
            interacted['%s@%d' % (c, level)] = frame[c] * indicator
            names.append('%s@%d' % (c, level))
    interacted = interacted[frame[split].notna()]
    panel = PanelDataset(interacted)
    if model == 'lpm':
        fit = fit_lpm_cluster(panel, names, intercept=False, cluster=cluster)
    elif model in BINARY_MODELS:
        fit = fit_binary_mle(panel, names, model, cluster, intercept=False)
    else:
        raise ValidationError('subgroup effects support lpm, logit and '
                              'probit')
    design = _design(panel, names, False, cluster)
    rows = []
    width = len(covariates) + 1
    for level in (0, 1):
        block = slice(level * width, (level + 1) * width)
        beta = fit.beta[block]
        vcov = fit.vcov[block, block]
        mask = design.frame[split].to_numpy() == level
        block_names = [INTERCEPT] + covariates
        if model == 'lpm':
            ame, se = beta, np.sqrt(np.clip(np.diag(vcov), 0.0, None))
        else:
            X = design.X[mask][:, block]
            ame, se = _binary_ame(_Link(model), X, beta, vcov)
        for name, value, error in zip(block_names, ame, se):
            if name == INTERCEPT:
                continue
            rows.append({'group': level, 'covariate': name, 'ame': value,
                         'se': error, 'n_obs': int(mask.sum())})
    result = pd.DataFrame(rows, columns=['group', 'covariate', 'ame', 'se',
                                         'n_obs'])
    with np.errstate(divide='ignore', invalid='ignore'):
        result['p'] = student_pvalues(result['ame'] / result['se'],
                                      fit.n_clusters)
    result.attrs['fit'] = fit
    return result


TREATMENTS = ('fine', 'nudge', 'superspreader_env')
CONTROLS = ('female', 'age', 'education', 'employed', 'religious',
            'bret_score', 'svo_prosocial')

LABELS = {
    'fine': 'Fine treatment',
    'nudge': 'Nudge treatment',
    'superspreader_env': 'Superspreader environment',
    'superspreader': 'Superspreader',
    'recipient': 'Recipient',
    'female': 'Gender (1 = female)',
    'age': 'Age',
    'education': 'Years of education',
    'employed': 'Employed or entrepreneur (1 = yes)',
    'religious': 'Religious (1 = yes)',
    'bret_score': 'Risk score',
    'svo_prosocial': 'Prosocial values (1 = yes)',
    'distance_wuhan': "Distance from Wuhan (100's km)",
    'hubei': 'Hubei residence (1 = yes)',
    'oxcgrt_avg': 'OxCGRT index',
    'ip_distance_wuhan': "Distance from Wuhan by IP (100's km)",
    'oxcgrt_2021': 'OxCGRT index for 2021',
    INTERCEPT: 'Constant',
}


@dataclass(frozen=True)
class Specification(object):
    name: str
    covariates: tuple
    model: str = 'lpm'
    drop_first: int = 10
    sample: str = None
    description: str = ''


SPECIFICATIONS = dict((spec.name, spec) for spec in (
    Specification('F1', TREATMENTS, description='treatments only'),
    Specification('F2', TREATMENTS + CONTROLS,
                  description='demographic and preference controls'),
    Specification('F3', TREATMENTS + CONTROLS + ('distance_wuhan',),
                  description='distance from Wuhan'),
    Specification('F4', TREATMENTS + CONTROLS + ('hubei',),
                  description='Hubei residence'),
    Specification('F5', TREATMENTS + CONTROLS + ('oxcgrt_avg',),
                  description='government response index'),
    Specification('F6', ('fine', 'nudge', 'superspreader', 'recipient') +
                  CONTROLS + ('distance_wuhan',),
                  description='positions instead of environment'),
    Specification('R1', TREATMENTS + CONTROLS + ('hubei',), drop_first=0,
                  description='F4 on all rounds'),
    Specification('R2', TREATMENTS + CONTROLS + ('hubei',), model='logit',
                  description='F4 as logit, marginal effects'),
    Specification('R3', TREATMENTS + CONTROLS + ('hubei',), model='probit',
                  description='F4 as probit, marginal effects'),
    Specification('R4', TREATMENTS + CONTROLS + ('hubei',),
                  sample='no_substitution',
                  description='F4 without groups that used the ghost'),
    Specification('R5', TREATMENTS + CONTROLS + ('ip_distance_wuhan',),
                  description='F3 with residence from IP address'),
    Specification('R6', TREATMENTS + CONTROLS + ('oxcgrt_2021',),
                  description='index averaged up to 2021'),
    Specification('R7', TREATMENTS + CONTROLS + ('hubei',),
                  sample='with_departed',
                  description='F4 with rounds played by later dropouts'),
))
MAIN_SPECIFICATIONS = ('F1', 'F2', 'F3', 'F4', 'F5', 'F6')
ROBUSTNESS_SPECIFICATIONS = ('R1', 'R2', 'R3', 'R4', 'R5', 'R6', 'R7')


def run_specification(name, panel, specifications=None):
    """
    Fit a registered specification on a panel holding all rounds

    Rows of departed agents are used only by the ``with_departed`` sample.
    """
    specifications = specifications or SPECIFICATIONS
    try:
        spec = specifications[name]
    except KeyError:
        raise ValidationError('unknown specification %r' % (name,))
    data = panel.keep_rounds_after(spec.drop_first)
    if spec.sample != 'with_departed':
        data = data.without_departed()
    if spec.sample == 'no_substitution':
        data = data.subset(data.frame['substituted_group'] == 0)
    elif spec.sample not in (None, 'with_departed'):
        raise ValidationError('unknown sample restriction %r' % spec.sample)
    debug('fitting', name, 'on', len(data), 'rows')
    if spec.model == 'lpm':
        return fit_lpm_cluster(data, spec.covariates)
    if spec.model == 're':
        return fit_re_lpm(data, spec.covariates)
    fit = fit_binary_mle(data, spec.covariates, link=spec.model)
    return replace(fit, marginal_effects=average_marginal_effects(fit, data))


def _format(value, digits=4):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ''
    return '%.*f' % (digits, value)


def regression_table(fits, digits=4):
    """
    Coefficients with stars and standard errors in parentheses

    ``fits`` maps column names to :class:`FitResult`. Binary models show
    average marginal effects and no constant.
    """
    columns = list(fits)
    order = []
    for fit in fits.values():
        for name in fit.names:
            if name != INTERCEPT and name not in order:
                order.append(name)
    order.append(INTERCEPT)
    rows = []
    for name in order:
        coef_row = {'variable': LABELS.get(name, name)}
        se_row = {'variable': ''}
        for column in columns:
            fit = fits[column]
            if fit.model in BINARY_MODELS:
                effects = fit.marginal_effects
                if effects is None or name not in effects.index:
                    coef_row[column] = '-' if name == INTERCEPT else ''
                    se_row[column] = '-' if name == INTERCEPT else ''
                    continue
                value, error, p = effects.loc[name, ['ame', 'se', 'p']]
            elif name in fit.names:
                k = list(fit.names).index(name)
                value, error, p = fit.beta[k], fit.se[k], fit.pvalues[k]
            else:
                coef_row[column] = se_row[column] = ''
                continue
            coef_row[column] = _format(value, digits) + stars(p)
            se_row[column] = '(%s)' % _format(error, digits)
        rows.extend([coef_row, se_row])
    rows.append(dict({'variable': 'No of observations'},
                     **{c: str(fits[c].n_obs) for c in columns}))
    rows.append(dict({'variable': 'No of subjects'},
                     **{c: str(fits[c].n_subjects) for c in columns}))
    rows.append(dict({'variable': 'Model'},
                     **{c: fits[c].model for c in columns}))
    return pd.DataFrame(rows, columns=['variable'] + columns)


def write_regression_table(fits, path, digits=4):
    regression_table(fits, digits).to_csv(path, index=False)


def subgroup_table(effects, labels=('rest', 'split'), digits=4):
    """
    Side by side layout of :func:`subgroup_effects` output
    """
    rows = []
    for name in effects['covariate'].drop_duplicates():
        row = {'variable': LABELS.get(name, name)}
        for level, label in zip((0, 1), labels):
            item = effects[(effects['covariate'] == name) &
                           (effects['group'] == level)].iloc[0]
            row[label] = _format(item['ame'], digits) + stars(item['p'])
            row[label + '_se'] = '(%s)' % _format(item['se'], digits)
        rows.append(row)
    columns = ['variable']
    for label in labels:
        columns += [label, label + '_se']
    return pd.DataFrame(rows, columns=columns)


def coverage(true_beta, fits, width=2.0):
    """
    Share of fits whose interval ``beta +- width * se`` covers the truth
    """
    hits = {}
    for name, value in true_beta.items():
        inside = [abs(fit[name] - value) <= width *
                  fit.se[list(fit.names).index(name)] for fit in fits]
        hits[name] = float(np.mean(inside)) if inside else float('nan')
    return hits
