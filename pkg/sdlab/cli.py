# -*- coding: utf-8 -*-
"""
Command line interface

Every command writes into its ``--out`` directory and leaves a
``manifest.json`` recording the command, its flags, the seed and the
sha256 hashes of inputs and outputs. Exit codes: 0 success, 2 usage or
guard error, 3 domain error, 4 I/O error.

:copyright:
    The sdlab Development Team
:license:
    GNU Lesser General Public License, Version 3
    (https://www.gnu.org/copyleft/lesser.html)
"""
from __future__ import absolute_import, division, print_function

import argparse
from dataclasses import asdict, dataclass, field, replace
import functools
import glob
import io
import json
import os
import sys

import numpy as np
import pandas as pd

from . import __version__
from .cohort import (gen_subjects, impute_means, load_calibration,
                     read_subjects_csv, subject_moments, write_subjects_csv)
from .convergence import (cohort_convergence_table, convergence_curve,
                          mean_distancing_series)
from .core import EnumerationGuardError, LabSystem, SdlabError
from .econometrics import (BINARY_MODELS, MAIN_SPECIFICATIONS,
                           ROBUSTNESS_SPECIFICATIONS, SPECIFICATIONS,
                           PanelDataset, average_marginal_effects,
                           build_panel, fit_binary_mle, fit_lpm_cluster,
                           fit_re_lpm, regression_table, run_specification,
                           subgroup_effects, subgroup_table)
from .equilibrium import hypothesis_report, solve
from .geo import (WINDOW_2020, load_cities, pearson, province_index_table,
                  read_oxcgrt)
from .network import EnvironmentKind, GameParams, make_environment
from .policies import NashRole, NoisyBestResponse, Propensity, \
    ScriptedConstant
from .session import (GROUP_SIZE, SessionConfig, compute_payment,
                      read_session_log, run_groups, write_session_log)
from .utils import debug, sha256_file, spawn_seeds


EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_IO = 4

POLICIES = ('propensity', 'nash', 'noisy', 'distance', 'no')
CLUSTERS = {'group': 'group_id', 'subject': 'subject_id'}
# share of groups in which one active subject leaves during the session
DROPOUT_SHARE = 18 / 83.0


@dataclass
class RunManifest(object):
    command: str
    flags: dict
    seed: int = None
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    version: str = __version__

    def write(self, out):
        path = os.path.join(out, 'manifest.json')
        with io.open(path, 'w', encoding='UTF-8', newline='\n') as fh:
            fh.write(json.dumps(asdict(self), indent=2, sort_keys=True))
            fh.write('\n')
        return path


class _Run(object):
    """
    Output directory bookkeeping of one command
    """

    def __init__(self, args):
        self.args = args
        self.out = args.out
        flags = {k: v for k, v in sorted(vars(args).items())
                 if k not in ('func', 'out')}
        self.manifest = RunManifest(command=args.command, flags=flags,
                                    seed=getattr(args, 'seed', None))
        if self.out is not None:
            os.makedirs(self.out, exist_ok=True)

    def path(self, *names):
        path = os.path.join(self.out, *names)
        directory = os.path.dirname(path)
        if not os.path.isdir(directory):
            os.makedirs(directory)
        return path

    def add_input(self, path):
        self.manifest.inputs[os.path.basename(path)] = sha256_file(path)

    def csv(self, frame, *names):
        path = self.path(*names)
        frame.to_csv(path, index=False, float_format='%.10g',
                     lineterminator='\n')
        return path

    def json(self, data, *names):
        path = self.path(*names)
        with io.open(path, 'w', encoding='UTF-8', newline='\n') as fh:
            fh.write(json.dumps(data, indent=2, sort_keys=True))
            fh.write('\n')
        return path

    def finish(self):
        if self.out is None:
            return
        outputs = {}
        for root, _, files in os.walk(self.out):
            for name in files:
                path = os.path.join(root, name)
                rel = os.path.relpath(path, self.out).replace(os.sep, '/')
                if rel != 'manifest.json':
                    outputs[rel] = sha256_file(path)
        self.manifest.outputs = dict(sorted(outputs.items()))
        self.manifest.write(self.out)


def _params(args):
    params = GameParams.lab_defaults()
    if getattr(args, 'n', None) is not None:
        params = params.replace(n=args.n)
    return params


def cmd_solve(args):
    params = _params(args).replace(fine=args.fine, nudge=args.nudge)
    net = make_environment(args.env, params.n)
    report = solve(net, params)
    summary = report.summary()
    summary['environment'] = EnvironmentKind.parse(args.env).value
    summary['fine'] = params.fine
    hypotheses = [asdict(h) for h in hypothesis_report(_params(args),
                                                       fine=args.fine or 15)]
    print(json.dumps(summary, sort_keys=True))
    run = _Run(args)
    if run.out is not None:
        run.csv(report.to_frame(), 'equilibrium.csv')
        run.json({'summary': summary, 'hypotheses': hypotheses},
                 'hypotheses.json')
        run.finish()
    return EXIT_OK


def _make_policies(config, kind, epsilon=0.0, calibration=None,
                   leave=None):
    """
    Six policies of a group; ``leave`` maps agent ids to leave rounds
    """
    policies = []
    for agent_id in range(GROUP_SIZE + 1):
        extra = {}
        if leave and agent_id in leave:
            extra['leave_round'] = leave[agent_id]
        if kind == 'propensity':
            policies.append(Propensity(coefficients=calibration, **extra))
        elif kind == 'nash':
            policies.append(NashRole(index=config.group_id, **extra))
        elif kind == 'noisy':
            policies.append(NoisyBestResponse(epsilon=epsilon, **extra))
        else:
            policies.append(ScriptedConstant(action=kind == 'distance',
                                             **extra))
    return tuple(policies)


def _group_policies(config, kind, epsilon, calibration, leaves):
    return _make_policies(config, kind, epsilon, calibration,
                          leaves.get(config.group_id))


def _session_configs(n_groups, seed, env=None, intervention=None,
                     fine=15.0, rounds=20, subjects=None):
    """
    One config per group with its own seed; without a fixed environment
    and intervention the groups rotate over the four treatment cells
    """
    configs = []
    for g, seq in enumerate(spawn_seeds(seed, n_groups)):
        group_env = env or (EnvironmentKind.HOMOGENEOUS if g % 2 == 0
                            else EnvironmentKind.SUPERSPREADER)
        group_intervention = intervention or \
            ('fine' if (g // 2) % 2 == 0 else 'nudge')
        ids = None
        if subjects is not None:
            ids = tuple(s.id for s in subjects[6 * g:6 * g + 6])
        configs.append(SessionConfig(
            environment=group_env, intervention=group_intervention,
            rounds_per_part=rounds, fine_points=fine,
            seed=int(seq.generate_state(1)[0]),
            group_id=g, subject_ids=ids))
    return configs


def _write_sessions(run, logs, seed):
    payment_seeds = spawn_seeds(seed + 1, len(logs))
    for log, seq in zip(logs, payment_seeds):
        payments = compute_payment(log, np.random.default_rng(seq)) \
            if log.complete else None
        write_session_log(log, run.path('sessions', 'group_%03d.jsonl' %
                                        log.config.group_id), payments)


def _pool(n_groups, seed, incomplete=0):
    subjects = gen_subjects(6 * n_groups, seed=seed, incomplete=incomplete)
    return subjects, {s.id: s for s in impute_means(subjects)}


def cmd_simulate(args):
    run = _Run(args)
    calibration = load_calibration(args.calibration) \
        if args.policy == 'propensity' else None
    subjects = played = None
    if args.policy == 'propensity':
        subjects, played = _pool(args.groups, args.seed)
        write_subjects_csv(subjects, run.path('subjects.csv'))
    configs = _session_configs(args.groups, args.seed, args.env,
                               args.intervention, args.fine, args.rounds,
                               subjects)
    factory = functools.partial(_group_policies, kind=args.policy,
                                epsilon=args.epsilon,
                                calibration=calibration, leaves={})
    logs = run_groups(configs, factory, subjects=played)
    _write_sessions(run, logs, args.seed)
    print('%d sessions written to %s' % (len(logs), run.out))
    run.finish()
    return EXIT_OK


def _read_logs(run, directory):
    paths = sorted(glob.glob(os.path.join(directory, '*.jsonl')))
    if not paths:
        raise IOError('no session logs in %s' % directory)
    for path in paths:
        run.add_input(path)
    return [read_session_log(path) for path in paths]


def _read_subjects(run, path):
    if path is None:
        return None
    run.add_input(path)
    return {s.id: s for s in read_subjects_csv(path)}


def cmd_converge(args):
    run = _Run(args)
    logs = _read_logs(run, args.logs)
    subjects = _read_subjects(run, args.subjects)
    by = tuple(args.by.split(','))
    table = cohort_convergence_table(logs, args.k, args.a, by=by,
                                     subjects=subjects,
                                     exclude_ghosts=args.exclude_ghosts)
    run.csv(table, 'table_convergence.csv')
    run.csv(convergence_curve(logs, args.k, subjects=subjects,
                              exclude_ghosts=args.exclude_ghosts),
            'convergence_curve.csv')
    print(table.to_string(index=False))
    run.finish()
    return EXIT_OK


def _fit(panel, args):
    cluster = CLUSTERS[args.cluster]
    if args.spec is not None:
        return run_specification(args.spec, panel)
    covariates = args.covariates.split(',')
    data = panel.keep_rounds_after(args.drop_first).without_departed()
    if args.model == 'lpm':
        return fit_lpm_cluster(data, covariates, cluster=cluster)
    if args.model == 're':
        return fit_re_lpm(data, covariates, cluster=cluster)
    fit = fit_binary_mle(data, covariates, link=args.model, cluster=cluster)
    return replace(fit, marginal_effects=average_marginal_effects(fit,
                                                                  data))


def cmd_estimate(args):
    run = _Run(args)
    run.add_input(args.panel)
    panel = PanelDataset.from_csv(args.panel)
    fit = _fit(panel, args)
    frame = fit.summary_frame().reset_index().rename(
        columns={'index': 'variable'})
    path = run.path('fit.csv')
    frame.to_csv(path, index=False, float_format='%.17g',
                 lineterminator='\n')
    if fit.model in BINARY_MODELS:
        run.csv(fit.marginal_effects.reset_index().rename(
            columns={'index': 'variable'}), 'marginal_effects.csv')
    run.csv(regression_table({args.spec or fit.model: fit}), 'table.csv')
    print(frame.to_string(index=False))
    run.finish()
    return EXIT_OK


def cmd_cohort(args):
    run = _Run(args)
    subjects = gen_subjects(args.n, seed=args.seed,
                            incomplete=args.incomplete)
    write_subjects_csv(subjects, run.path('subjects.csv'))
    moments = subject_moments(subjects).reset_index().rename(
        columns={'index': 'covariate'})
    run.csv(moments, 'moments.csv')
    print(moments.to_string(index=False))
    run.finish()
    return EXIT_OK


def cmd_geo(args):
    run = _Run(args)
    cities = load_cities(args.cities)
    if args.cities:
        run.add_input(args.cities)
    run.csv(cities, 'cities.csv')
    if args.oxcgrt is None:
        run.finish()
        return EXIT_OK
    run.add_input(args.oxcgrt)
    report = read_oxcgrt(args.oxcgrt)
    table = province_index_table(report.series, args.start, args.end)
    run.csv(table, 'province_index.csv')
    run.csv(pd.DataFrame(report.rejected, columns=['line', 'reason']),
            'rejected.csv')
    summary = {'regions': len(table), 'rejected': len(report.rejected)}
    merged = cities.merge(table, left_on='province', right_on='region')
    if len(merged) >= 2:
        summary['pearson_distance_index'] = pearson(
            merged['distance'], merged['average_index'])
    run.json(summary, 'geo_summary.json')
    print(json.dumps(summary, sort_keys=True))
    run.finish()
    return EXIT_OK


def _leave_schedule(n_groups, rounds, seed):
    """
    Groups with one scheduled departure and the round it happens
    """
    rng = np.random.default_rng(spawn_seeds(seed + 2, 1)[0])
    leaves = {}
    for g in range(n_groups):
        if rng.random() < DROPOUT_SHARE:
            agent = int(rng.integers(GROUP_SIZE))
            leaves[g] = {agent: int(rng.integers(2, 2 * rounds + 1))}
    return leaves


def _equilibrium_frame(fine):
    frames = []
    params = GameParams.lab_defaults()
    for env in EnvironmentKind:
        net = make_environment(env, params.n)
        for f in (0.0, fine):
            frame = solve(net, params.replace(fine=f)).to_frame()
            frame.insert(0, 'fine', f)
            frame.insert(0, 'environment', env.value)
            frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def cmd_reproduce(args):
    """
    Whole pipeline from a synthetic cohort to every result table
    """
    run = _Run(args)
    calibration = load_calibration(args.calibration)
    subjects, played = _pool(args.groups, args.seed, incomplete=1)
    write_subjects_csv(subjects, run.path('subjects.csv'))
    debug('reproduce: sessions')
    configs = _session_configs(args.groups, args.seed, fine=args.fine,
                               rounds=args.rounds, subjects=subjects)
    factory = functools.partial(
        _group_policies, kind='propensity', epsilon=0.0,
        calibration=calibration,
        leaves=_leave_schedule(args.groups, args.rounds, args.seed))
    logs = run_groups(configs, factory, subjects=played)
    _write_sessions(run, logs, args.seed)

    debug('reproduce: panel')
    raw = {s.id: s for s in subjects}
    panel = build_panel(logs, raw, drop_first=0, include_departed=True)
    panel.to_csv(run.path('panel.csv'))

    debug('reproduce: regressions')
    analysed = panel.keep_rounds_after(args.drop_first).without_departed()
    fits = {}
    for name in MAIN_SPECIFICATIONS:
        fits[name] = fit_lpm_cluster(analysed,
                                     SPECIFICATIONS[name].covariates)
    run.csv(regression_table(fits), 'table_main.csv')
    robust = {name: run_specification(name, panel)
              for name in ROBUSTNESS_SPECIFICATIONS}
    run.csv(regression_table(robust), 'table_robustness.csv')
    effects = subgroup_effects(analysed,
                               SPECIFICATIONS['F2'].covariates, 'hubei')
    run.csv(subgroup_table(effects, labels=('non_hubei', 'hubei')),
            'table_subgroups.csv')

    debug('reproduce: convergence')
    run.csv(cohort_convergence_table(logs, args.k, args.a, subjects=raw),
            'table_convergence.csv')
    run.csv(cohort_convergence_table(logs, args.k, args.a, subjects=raw,
                                     exclude_ghosts=True),
            'table_convergence_noghost.csv')
    run.csv(convergence_curve(logs, args.k, subjects=raw),
            'convergence_curve.csv')
    run.csv(mean_distancing_series(logs, raw), 'mean_distancing.csv')

    debug('reproduce: theory')
    run.csv(_equilibrium_frame(args.fine), 'equilibrium.csv')
    run.json([asdict(h) for h in hypothesis_report(fine=args.fine)],
             'hypotheses.json')

    hubei = fits['F4']
    k = list(hubei.names).index('hubei')
    print('F4 Hubei coefficient %.4f (se %.4f), %d observations, '
          '%d subjects' % (hubei.beta[k], hubei.se[k], hubei.n_obs,
                           hubei.n_subjects))
    run.finish()
    return EXIT_OK


def _add_common(parser, out_required=True):
    parser.add_argument('--out', required=out_required,
                        help='output directory')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--debug', action='store_true',
                        help='print trace lines')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='sdlab', description='Social distancing game laboratory')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True
    envs = [e.value for e in EnvironmentKind]

    p = commands.add_parser('solve', help='equilibria and social optima')
    _add_common(p, out_required=False)
    p.add_argument('--env', choices=envs, default='complete')
    p.add_argument('--fine', type=float, default=0.0)
    p.add_argument('--nudge', action='store_true')
    p.add_argument('--n', type=int, default=GROUP_SIZE,
                   help='number of positions')
    p.set_defaults(func=cmd_solve)

    p = commands.add_parser('simulate', help='run bot sessions')
    _add_common(p)
    p.add_argument('--groups', type=int, default=10)
    p.add_argument('--env', choices=envs, default=None)
    p.add_argument('--intervention', choices=('fine', 'nudge'),
                   default=None)
    p.add_argument('--fine', type=float, default=15.0)
    p.add_argument('--rounds', type=int, default=20,
                   help='rounds per part')
    p.add_argument('--policy', choices=POLICIES, default='propensity')
    p.add_argument('--epsilon', type=float, default=0.1)
    p.add_argument('--calibration', default='m2')
    p.set_defaults(func=cmd_simulate)

    p = commands.add_parser('converge', help='convergence tables')
    _add_common(p)
    p.add_argument('--logs', required=True,
                   help='directory of session logs')
    p.add_argument('--subjects', help='subjects CSV')
    p.add_argument('--k', type=int, default=4)
    p.add_argument('--a', type=int, default=2)
    p.add_argument('--by', default='network,population,intervention')
    p.add_argument('--exclude-ghosts', action='store_true')
    p.set_defaults(func=cmd_converge)

    p = commands.add_parser('estimate', help='fit a regression on a panel')
    _add_common(p)
    p.add_argument('--panel', required=True, help='panel CSV')
    p.add_argument('--model', choices=('lpm', 're') + BINARY_MODELS,
                   default='lpm')
    p.add_argument('--cluster', choices=sorted(CLUSTERS), default='group')
    p.add_argument('--spec', choices=sorted(SPECIFICATIONS), default=None,
                   help='registered specification')
    p.add_argument('--covariates',
                   default=','.join(SPECIFICATIONS['F4'].covariates))
    p.add_argument('--drop-first', type=int, default=10)
    p.set_defaults(func=cmd_estimate)

    p = commands.add_parser('cohort', help='generate a subject pool')
    _add_common(p)
    p.add_argument('--n', type=int, default=415)
    p.add_argument('--incomplete', type=int, default=0)
    p.set_defaults(func=cmd_cohort)

    p = commands.add_parser('geo', help='distances and response indices')
    _add_common(p)
    p.add_argument('--cities', help='city table CSV')
    p.add_argument('--oxcgrt', help='government response index CSV')
    p.add_argument('--start', default=WINDOW_2020[0].strftime('%Y%m%d'))
    p.add_argument('--end', default=WINDOW_2020[1].strftime('%Y%m%d'))
    p.set_defaults(func=cmd_geo)

    p = commands.add_parser('reproduce', help='run the whole pipeline')
    _add_common(p)
    p.add_argument('--groups', type=int, default=83)
    p.add_argument('--rounds', type=int, default=20,
                   help='rounds per part')
    p.add_argument('--fine', type=float, default=15.0)
    p.add_argument('--calibration', default='m2')
    p.add_argument('--drop-first', type=int, default=10)
    p.add_argument('--k', type=int, default=4)
    p.add_argument('--a', type=int, default=2)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code
    try:
        with LabSystem(debug=args.debug):
            return args.func(args)
    except EnumerationGuardError as e:
        print('error: %s' % e, file=sys.stderr)
        return EXIT_USAGE
    except SdlabError as e:
        print('error: %s' % e, file=sys.stderr)
        return EXIT_DOMAIN
    except (IOError, OSError) as e:
        print('error: %s' % e, file=sys.stderr)
        return EXIT_IO


if __name__ == '__main__':
    sys.exit(main())
