# -*- coding: utf-8 -*-
from __future__ import absolute_import, division, print_function

import io
import os
import tempfile
import unittest
import warnings

import numpy as np
import pandas as pd
from scipy import special, stats

from sdlab.cohort import gen_subjects, synthetic_panel
from sdlab.core import (MissingColumnsError, RankDeficiencyError,
                        SeparationError, ValidationError)
from sdlab.econometrics import (INTERCEPT, SPECIFICATIONS, PanelDataset,
                                Specification,
                                average_marginal_effects, build_panel,
                                coverage, fit_binary_mle, fit_lpm_cluster,
                                fit_re_lpm, regression_table,
                                run_specification, stars, student_pvalues,
                                subgroup_effects, subgroup_table)
from sdlab.policies import ScriptedConstant
from sdlab.session import SessionConfig, run_session


def _frame(y, groups=None, **columns):
    n = len(y)
    groups = list(range(n)) if groups is None else groups
    data = {'subject_id': ['s%d' % g for g in groups],
            'group_id': groups, 'round': [11] * n,
            'part': ['baseline'] * n, 'y': y}
    data.update(columns)
    return PanelDataset(pd.DataFrame(data))


def _random_panel(seed=3, n_groups=30, per_group=20, slope=0.3):
    rng = np.random.default_rng(seed)
    groups = np.repeat(np.arange(n_groups), per_group)
    x = rng.normal(size=len(groups))
    z = rng.integers(0, 2, size=len(groups))
    eta = -0.2 + slope * x + 0.4 * z
    y = (rng.random(len(groups)) < special.expit(eta)).astype(int)
    return _frame(list(y), list(groups), x=x, z=z)


class PanelDatasetTestCase(unittest.TestCase):
    """
    Test suite for PanelDataset and build_panel
    """
    def test_validation(self):
        with self.assertRaises(MissingColumnsError):
            PanelDataset(pd.DataFrame({'subject_id': ['a'], 'y': [1]}))
        with self.assertRaises(ValidationError):
            _frame([0, 2])
        with self.assertRaises(ValidationError):
            PanelDataset(pd.DataFrame({
                'subject_id': ['a', 'a'], 'group_id': [1, 2],
                'round': [11, 12], 'part': ['baseline'] * 2, 'y': [0, 1]}))

    def test_subset_and_rounds(self):
        panel = _frame([0, 1, 1], [1, 1, 2], x=[1.0, 2.0, 3.0])
        self.assertEqual(len(panel.subset([True, False, True])), 2)
        self.assertEqual(panel.n_groups, 2)
        self.assertEqual(len(panel.keep_rounds_after(11)), 0)

    def test_csv(self):
        panel = _frame([0, 1], x=[0.5, 1.5])
        path = os.path.join(tempfile.mkdtemp(), 'panel.csv')
        panel.to_csv(path)
        again = PanelDataset.from_csv(path)
        self.assertEqual(list(again.frame['subject_id']), ['s0', 's1'])
        self.assertEqual(list(again.frame['x']), [0.5, 1.5])

    def test_build_from_logs(self):
        logs = [run_session(SessionConfig(
            environment=env, intervention=intervention, group_id=g, seed=g),
            [ScriptedConstant(action=True)] * 6)
            for g, (env, intervention) in enumerate(
                [('complete', 'fine'), ('star', 'nudge')])]
        panel = build_panel(logs)
        self.assertEqual(len(panel), 2 * 5 * 2 * 10)
        self.assertEqual(panel.n_subjects, 10)
        frame = panel.frame
        self.assertTrue((frame['round'] > 10).all())
        self.assertEqual(int(frame['fine'].sum()), 5 * 10)
        self.assertEqual(int(frame['nudge'].sum()), 5 * 10)
        star = frame[frame['superspreader_env'] == 1]
        self.assertTrue(((star['superspreader'] + star['recipient']) ==
                         1).all())
        self.assertEqual(int(star['superspreader'].sum()), 20)

    def test_build_with_subjects(self):
        subjects = {s.id: s for s in gen_subjects(12, seed=2, incomplete=1)}
        ids = [tuple('S%04d' % k for k in range(1, 7)),
               ('S0012',) + tuple('S%04d' % k for k in range(7, 12))]
        logs = [run_session(SessionConfig(group_id=g, seed=g,
                                          subject_ids=ids[g]),
                            [ScriptedConstant(action=False)] * 6)
                for g in range(2)]
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter('always')
            panel = build_panel(logs, subjects)
        self.assertTrue(any('S0012' in str(x.message) for x in w))
        self.assertEqual(len(panel), 9 * 20)
        self.assertIn('hubei', panel.columns)
        self.assertFalse(panel.frame['age'].isna().any())

        del subjects['S0003']
        with self.assertRaises(ValidationError):
            build_panel(logs, subjects)

    def test_build_with_departed(self):
        policies = [ScriptedConstant(action=True)] * 6
        policies[1] = ScriptedConstant(action=False, leave_round=5)
        log = run_session(SessionConfig(group_id=0, seed=0), policies)
        self.assertEqual(log.departed_agents, [1])
        panel = build_panel([log], drop_first=0)
        self.assertEqual(len(panel), 5 * 40)
        self.assertFalse(panel.frame['departed'].any())
        full = build_panel([log], drop_first=0, include_departed=True)
        left = full.frame[full.frame['departed'] == 1]
        self.assertEqual(list(left['global_round']), [1, 2, 3, 4])
        self.assertEqual(set(left['subject_id']), {'g0_a1'})
        self.assertEqual(len(full.without_departed()), len(panel))
        later = build_panel([log], drop_first=10, include_departed=True)
        self.assertFalse(later.frame['departed'].any())


class LinearModelTestCase(unittest.TestCase):
    """
    Test suite for the linear probability models
    """
    def test_constant_outcome(self):
        panel = _frame([1] * 6, [0, 0, 1, 1, 2, 2],
                       fine=[0, 1, 0, 1, 0, 1])
        fit = fit_lpm_cluster(panel, ['fine'])
        self.assertAlmostEqual(fit[INTERCEPT], 1.0)
        self.assertAlmostEqual(fit['fine'], 0.0)
        np.testing.assert_allclose(fit.se, 0.0, atol=1e-12)

    def test_singleton_clusters_equal_hc1(self):
        rng = np.random.default_rng(5)
        n = 40
        x = rng.normal(size=n)
        y = (rng.random(n) < 0.5).astype(int)
        fit = fit_lpm_cluster(_frame(list(y), x=x), ['x'])
        X = np.column_stack([np.ones(n), x])
        bread = np.linalg.inv(X.T @ X)
        e = y - X @ (bread @ X.T @ y)
        hc1 = n / (n - 2.0) * bread @ (X.T * e ** 2) @ X @ bread
        np.testing.assert_allclose(fit.vcov, hc1, rtol=1e-10)
        self.assertEqual(fit.n_clusters, n)

    def test_rank_deficiency(self):
        panel = _frame([0, 1, 1, 0], fine=[0, 1, 0, 1], dup=[0, 2, 0, 2])
        with self.assertRaises(RankDeficiencyError) as e:
            fit_lpm_cluster(panel, ['fine', 'dup'])
        self.assertEqual(len(e.exception.columns), 1)
        self.assertIn(e.exception.columns[0], ('fine', 'dup'))

    def test_listwise_deletion(self):
        panel = _frame([0, 1, 1, 0, 1], x=[0.1, 0.5, np.nan, 0.2, 0.9])
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter('always')
            fit = fit_lpm_cluster(panel, ['x'])
        self.assertEqual(fit.n_obs, 4)
        self.assertTrue(any('missing' in str(x.message) for x in w))

    def test_single_cluster(self):
        panel = _frame([0, 1, 1], [4, 4, 4], x=[0.0, 1.0, 2.0])
        with self.assertRaises(ValidationError):
            fit_lpm_cluster(panel, ['x'])

    def test_random_effects_single_round_is_pooled(self):
        panel = _random_panel(per_group=1, n_groups=50)
        pooled = fit_lpm_cluster(panel, ['x', 'z'])
        re = fit_re_lpm(panel, ['x', 'z'])
        np.testing.assert_allclose(re.beta, pooled.beta, atol=1e-10)
        self.assertEqual(re.extra['sigma2_u'], 0.0)
        self.assertEqual(re.model, 're')

    def test_random_effects_components(self):
        panel = synthetic_panel(n_groups=16, subject_sd=0.15, seed=4)
        fit = fit_re_lpm(panel, ['fine', 'nudge', 'superspreader_env'])
        self.assertGreater(fit.extra['sigma2_e'], 0.0)
        self.assertTrue(0.0 <= fit.extra['rho'] < 1.0)
        theta = fit.extra['theta']
        self.assertEqual(len(theta), panel.n_subjects)
        self.assertTrue(((theta >= 0) & (theta < 1)).all())

    def test_random_effects_time_invariant_covariate(self):
        rng = np.random.default_rng(11)
        subjects = np.repeat(np.arange(60), 8)
        effect = rng.normal(scale=0.2, size=60)[subjects]
        x = rng.normal(size=len(subjects))
        z = rng.integers(0, 2, size=60)[subjects]
        y = (rng.random(len(subjects)) <
             np.clip(0.4 + 0.1 * x + 0.1 * z + effect, 0, 1)).astype(int)
        panel = PanelDataset(pd.DataFrame({
            'subject_id': ['s%d' % s for s in subjects],
            'group_id': subjects // 3,
            'round': np.tile(np.arange(11, 19), 60),
            'part': 'baseline', 'y': y, 'x': x, 'z': z}))
        alone = fit_re_lpm(panel, ['x'])
        both = fit_re_lpm(panel, ['x', 'z'])
        # z is constant within subjects and leaves the within fit unchanged
        self.assertGreater(alone.extra['sigma2_e'], 0.0)
        self.assertAlmostEqual(both.extra['sigma2_e'],
                               alone.extra['sigma2_e'], places=10)

    def test_cluster_errors_ignore_row_order(self):
        panel = _random_panel(seed=8)
        order = np.random.default_rng(2).permutation(len(panel))
        shuffled = PanelDataset(panel.frame.iloc[order])
        first = fit_lpm_cluster(panel, ['x', 'z'])
        second = fit_lpm_cluster(shuffled, ['x', 'z'])
        np.testing.assert_allclose(second.beta, first.beta, atol=1e-12)
        np.testing.assert_allclose(second.se, first.se, rtol=1e-10)

    def test_interval_coverage(self):
        truth = {'treated': 0.1, 'x': 0.1}
        n_groups = 40
        groups = np.repeat(np.arange(n_groups), 50)
        fits = []
        for seed in range(100):
            rng = np.random.default_rng(seed)
            treated = groups % 2
            x = rng.uniform(-1.0, 1.0, size=len(groups))
            shock = np.clip(rng.normal(0.0, 0.05, size=n_groups), -0.1, 0.1)
            p = 0.4 + 0.1 * treated + 0.1 * x + shock[groups]
            y = (rng.random(len(groups)) < p).astype(int)
            panel = _frame(list(y), list(groups), treated=treated, x=x)
            fits.append(fit_lpm_cluster(panel, ['treated', 'x']))
        width = stats.t.ppf(0.975, n_groups - 1)
        for name, share in coverage(truth, fits, width=width).items():
            self.assertGreaterEqual(share, 0.88, name)


class BinaryModelTestCase(unittest.TestCase):
    """
    Test suite for logit and probit fits
    """
    def test_intercept_only(self):
        y = [1] * 30 + [0] * 70
        panel = _frame(y, [k % 10 for k in range(100)])
        logit = fit_binary_mle(panel, [], 'logit')
        self.assertAlmostEqual(logit[INTERCEPT], special.logit(0.3),
                               places=6)
        probit = fit_binary_mle(panel, [], 'probit')
        self.assertAlmostEqual(probit[INTERCEPT], special.ndtri(0.3),
                               places=6)

    def test_constant_outcome(self):
        panel = _frame([1] * 10, [k % 5 for k in range(10)],
                       x=np.arange(10.0))
        with self.assertRaises(SeparationError):
            fit_binary_mle(panel, ['x'])

    def test_perfect_separation(self):
        x = np.linspace(-1, 1, 40)
        panel = _frame(list((x > 0).astype(int)), [k % 8 for k in range(40)],
                       x=x)
        for link in ('logit', 'probit'):
            with self.assertRaises(SeparationError):
                fit_binary_mle(panel, ['x'], link)

    def test_unknown_link(self):
        with self.assertRaises(ValidationError):
            fit_binary_mle(_random_panel(), ['x'], 'cloglog')

    def test_recovery(self):
        panel = _random_panel(n_groups=100, per_group=30, slope=0.8)
        fit = fit_binary_mle(panel, ['x', 'z'])
        self.assertLess(abs(fit['x'] - 0.8), 4 * fit.se[1])
        self.assertLess(fit.extra['iterations'], 20)
        probit = fit_binary_mle(panel, ['x', 'z'], 'probit')
        # probit coefficients are about logit ones over 1.65
        self.assertAlmostEqual(probit['x'] / fit['x'], 1 / 1.65, delta=0.06)

    def test_marginal_effects(self):
        panel = _random_panel(n_groups=60, per_group=20)
        lpm = fit_lpm_cluster(panel, ['x', 'z'])
        effects = average_marginal_effects(lpm)
        np.testing.assert_allclose(effects['ame'], lpm.beta[1:])
        self.assertNotIn(INTERCEPT, effects.index)

        logit = fit_binary_mle(panel, ['x', 'z'])
        with self.assertRaises(ValidationError):
            average_marginal_effects(logit)
        effects = average_marginal_effects(logit, panel)
        # logit and linear effects agree closely near p = 0.5
        np.testing.assert_allclose(effects['ame'], lpm.beta[1:], atol=0.02)
        self.assertTrue((effects['se'] > 0).all())


class SubgroupTestCase(unittest.TestCase):
    """
    Test suite for interacted subgroup effects
    """
    covariates = ['fine', 'nudge', 'female']

    @classmethod
    def setUpClass(cls):
        cls.panel = synthetic_panel(n_groups=24, seed=11)

    def test_lpm_equals_split_samples(self):
        effects = subgroup_effects(self.panel, self.covariates, 'hubei')
        for level in (0, 1):
            part = self.panel.subset(self.panel.frame['hubei'] == level)
            fit = fit_lpm_cluster(part, self.covariates)
            rows = effects[effects['group'] == level].set_index('covariate')
            for name in self.covariates:
                self.assertAlmostEqual(rows.loc[name, 'ame'], fit[name],
                                       delta=1e-8)
            self.assertEqual(int(rows['n_obs'].iloc[0]), len(part))

    def test_logit_equals_split_samples(self):
        effects = subgroup_effects(self.panel, self.covariates, 'hubei',
                                   model='logit')
        for level in (0, 1):
            part = self.panel.subset(self.panel.frame['hubei'] == level)
            fit = fit_binary_mle(part, self.covariates)
            ame = average_marginal_effects(fit, part)
            rows = effects[effects['group'] == level].set_index('covariate')
            for name in self.covariates:
                self.assertAlmostEqual(rows.loc[name, 'ame'],
                                       ame.loc[name, 'ame'], delta=1e-6)

    def test_invalid_split(self):
        with self.assertRaises(MissingColumnsError):
            subgroup_effects(self.panel, self.covariates, 'nothing')
        with self.assertRaises(ValidationError):
            subgroup_effects(self.panel, self.covariates, 'age')
        only = self.panel.subset(self.panel.frame['hubei'] == 1)
        with self.assertRaises(ValidationError):
            subgroup_effects(only, self.covariates, 'hubei')

    def test_table(self):
        effects = subgroup_effects(self.panel, self.covariates, 'hubei')
        table = subgroup_table(effects, labels=('Outside Hubei', 'Hubei'))
        self.assertEqual(list(table.columns),
                         ['variable', 'Outside Hubei', 'Outside Hubei_se',
                          'Hubei', 'Hubei_se'])
        self.assertEqual(len(table), 3)
        self.assertTrue(table['Hubei_se'].str.startswith('(').all())


class SpecificationTestCase(unittest.TestCase):
    """
    Test suite for registered specifications and tables
    """
    @classmethod
    def setUpClass(cls):
        cls.panel = synthetic_panel(n_groups=83, seed=1)

    def test_recovers_calibration(self):
        fit = run_specification('F4', self.panel)
        truth = {'fine': 0.0343, 'nudge': 0.0603,
                 'superspreader_env': -0.0494, 'hubei': 0.0852}
        for name, value in truth.items():
            self.assertAlmostEqual(fit[name], value, delta=0.05)
        self.assertEqual(fit.n_clusters, 83)
        self.assertEqual(fit.n_subjects, 415)
        hits = coverage(truth, [fit], width=4)
        self.assertGreaterEqual(np.mean(list(hits.values())), 0.75)

    def test_binary_specification(self):
        fit = run_specification('R2', self.panel)
        self.assertEqual(fit.model, 'logit')
        self.assertIn('hubei', fit.marginal_effects.index)

    def test_unknown_specification(self):
        with self.assertRaises(ValidationError):
            run_specification('F9', self.panel)

    def test_departed_sample(self):
        policies = [ScriptedConstant(action=True)] * 6
        policies[1] = ScriptedConstant(action=False, leave_round=5)
        logs = [run_session(SessionConfig(group_id=0, seed=0), policies),
                run_session(SessionConfig(group_id=1, seed=1),
                            [ScriptedConstant(action=True)] * 6)]
        panel = build_panel(logs, drop_first=0, include_departed=True)
        specs = {
            'kept': Specification('kept', ('fine',), drop_first=0),
            'all': Specification('all', ('fine',), drop_first=0,
                                 sample='with_departed'),
        }
        kept = run_specification('kept', panel, specs)
        everyone = run_specification('all', panel, specs)
        self.assertEqual(kept.n_obs, 400)
        self.assertEqual(everyone.n_obs, 404)
        self.assertEqual(everyone.n_subjects, 11)
        self.assertLess(everyone[INTERCEPT], 1.0)
        self.assertEqual(SPECIFICATIONS['R7'].sample, 'with_departed')

    def test_regression_table(self):
        fits = {'F1': run_specification('F1', self.panel),
                'R2': run_specification('R2', self.panel)}
        table = regression_table(fits)
        self.assertEqual(list(table.columns), ['variable', 'F1', 'R2'])
        self.assertEqual(table['variable'].iloc[0], 'Fine treatment')
        self.assertTrue(table['F1'].iloc[1].startswith('('))
        constant = table[table['variable'] == 'Constant'].index[0]
        self.assertEqual(table.loc[constant, 'R2'], '-')
        self.assertEqual(list(table['variable'].iloc[-3:]),
                         ['No of observations', 'No of subjects', 'Model'])
        self.assertEqual(table['R2'].iloc[-1], 'logit')
        out = io.StringIO()
        table.to_csv(out, index=False)
        self.assertIn('Hubei residence', out.getvalue())


class InferenceTestCase(unittest.TestCase):
    def test_stars(self):
        self.assertEqual(stars(0.005), '***')
        self.assertEqual(stars(0.03), '**')
        self.assertEqual(stars(0.07), '*')
        self.assertEqual(stars(0.5), '')
        self.assertEqual(stars(float('nan')), '')

    def test_student_pvalues(self):
        # one cluster less than the cluster count as degrees of freedom
        p = student_pvalues([2.0], 11)
        self.assertAlmostEqual(float(p[0]), 0.07339, places=4)


if __name__ == '__main__':
    unittest.main()
