# -----------------------------------------------------------------------------
# MIT License
#
# Copyright (c) 2024 SMTP-CPS Team
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.
# -----------------------------------------------------------------------------

"""Command line entry point: ``smtpcps {precompute,run,sweep,verify}``.

Exit codes: 0 ok, 1 runtime or protocol error (or a failed check), 2 configuration or cache error.
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

import pandas as pd

from ..config import RunConfig, load_config
from ..controller import ControllableFamily, build_family, check_family_matches, load_family, save_family
from ..errors import CacheError, ConfigError, SMTPCPSError
from ..harness import (RESULT_COLUMNS, SUMMARY_COLUMNS, EpisodeConfig, SweepConfig, initial_conditions, result_row,
                       run_episode, run_sweep_results, summarize)
from ..utils import setup_logging
from ..utils.oplogging import TRACE
from ..utils.static_funcs import bits_to_str, plot_rate_vs_alpha
from ..verification import run_checks

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
DEFAULT_FAMILY = 'family.ctrlfam'


def get_default_arguments(argv: Optional[List[str]] = None):
    parser = argparse.ArgumentParser(prog='smtpcps', description='Secret message transfer through the feedback '
                                                                 'loop of a networked control system.')
    parser.add_argument('--log_config', type=str, default='smtpcps/logging.conf', help='logging.config file.')
    parser.add_argument('--verbose', type=int, default=0, help='Progress bars when > 0, TRACE logging when > 1.')
    sub = parser.add_subparsers(dest='command', required=True)

    def common(p, family=True):
        p.add_argument('--config', type=str, default=None, help='Run configuration (INI); defaults if omitted.')
        if family:
            p.add_argument('--family', type=str, default=None,
                           help='Family cache file; the family is built from the configuration if omitted.')
        return p

    pre = common(sub.add_parser('precompute', help='Build the controllable family and write the cache file.'),
                 family=False)
    pre.add_argument('--out', type=str, default=DEFAULT_FAMILY, help='Cache file to write.')

    run = common(sub.add_parser('run', help='Run one episode.'))
    run.add_argument('--out', type=str, default='.', help='Output directory for episode.csv and trace.csv.')
    run.add_argument('--seed', type=int, default=None, help='Episode seed (overrides sim.base_seed).')
    run.add_argument('--trace', action='store_true', default=None, help='Write the per-step protocol trace.')

    sweep = common(sub.add_parser('sweep', help='Run the alpha sweep.'))
    sweep.add_argument('--out', type=str, default='.', help='Output directory.')
    sweep.add_argument('--seed', type=int, default=None, help='Base seed (overrides sim.base_seed).')
    sweep.add_argument('--jobs', type=int, default=None, help='Worker processes (overrides sweep.jobs).')

    verify = common(sub.add_parser('verify', help='Run the invariant suites.'))
    verify.add_argument('--seed', type=int, default=None, help='Base seed of the protocol episodes.')
    verify.add_argument('--jobs', type=int, default=None, help='Worker processes.')
    return parser.parse_args(argv)


def _family(cfg: RunConfig, path: Optional[str], verbose: int) -> ControllableFamily:
    if path is None:
        return build_family(cfg.controller_model(), cfg.gain(), cfg.input_set(), cfg.N, cfg.alpha_max,
                            cfg.tolerance(), verbose)
    try:
        fam = load_family(path, cfg.controller_model())
    except OSError as e:
        raise CacheError(f'cannot read family cache: {e}') from e
    try:
        check_family_matches(fam, cfg.gain(), cfg.input_set(), cfg.N, cfg.alpha_max, cfg.tolerance())
    except CacheError as e:
        raise CacheError(f'{path}: {e}') from e
    return fam


def _template(cfg: RunConfig, x0) -> EpisodeConfig:
    message, length = cfg.message_spec()
    return EpisodeConfig(model=cfg.linear_model(), d_true=cfg.d_true(), d_c=cfg.d_c(), alpha=cfg.alpha,
                         x0=tuple(x0), steps=cfg.steps, seed=cfg.base_seed, message=message, message_bits=length,
                         bit_costs=cfg.costs(), tol=cfg.tolerance(), trace=cfg.trace)


def _x0_list(cfg: RunConfig, fam: ControllableFamily):
    return cfg.initial_states() or initial_conditions(fam)


def cmd_precompute(cfg: RunConfig, out: str, verbose: int = 0) -> int:
    fam = _family(cfg, None, verbose)
    save_family(fam, out)
    counts = fam.vertex_counts()
    print(f'N={fam.N} sets={len(fam.sets)} vertices(T_0)={counts[0]} vertices(T_N)={counts[-1]} '
          f'max_vertices={max(counts)} build_time={fam.build_seconds:.2f}s')
    print(f'wrote {out}')
    return EXIT_OK


def cmd_run(cfg: RunConfig, family: Optional[str], out: str, verbose: int = 0) -> int:
    fam = _family(cfg, family, verbose)
    x0 = _x0_list(cfg, fam)[0]
    result = run_episode(_template(cfg, x0), fam)
    os.makedirs(out, exist_ok=True)
    pd.DataFrame([result_row(cfg.alpha, 0, 0, result)], columns=RESULT_COLUMNS).to_csv(
        os.path.join(out, 'episode.csv'), index=False)
    if result.trace is not None:
        result.trace.to_csv(os.path.join(out, 'trace.csv'), index=False)
    print(f'alpha={cfg.alpha} seed={result.seed} key_events={result.key_events} decoded_bits={result.decoded_bits} '
          f'bit_errors={result.bit_errors} rate_bps={result.rate_bps:.3f}')
    print(f'sent    {bits_to_str(result.message[:result.decoded_bits])}')
    print(f'decoded {bits_to_str(result.decoded[:result.decoded_bits])}')
    if result.error is not None:
        print(f'episode aborted: {result.error}', file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, family: Optional[str], out: str, verbose: int = 0) -> int:
    fam = _family(cfg, family, verbose)
    x0_list = _x0_list(cfg, fam)
    sweep = SweepConfig(template=_template(cfg, x0_list[0]), alphas=cfg.alphas,
                        x0_list=tuple(tuple(x) for x in x0_list), reps=cfg.reps, base_seed=cfg.base_seed,
                        jobs=cfg.jobs)
    results = run_sweep_results(sweep, fam, verbose)
    rows = pd.DataFrame([result_row(*item) for item in results], columns=RESULT_COLUMNS)
    aborted = [res for *_, res in results if res.error is not None]
    for res in aborted:
        print(f'episode seed={res.seed} aborted: {res.error}', file=sys.stderr)
    os.makedirs(out, exist_ok=True)
    rows.to_csv(os.path.join(out, 'results.csv'), index=False)
    print(f'{len(rows)} episodes, {int(rows["decoded_bits"].sum())} decoded bits, '
          f'{int(rows["bit_errors"].sum())} bit errors, {int(rows["desyncs"].sum())} desyncs, '
          f'{len(aborted)} aborted')
    if rows['alpha'].nunique() >= 2:
        summary = summarize(rows)
        summary.table.to_csv(os.path.join(out, 'summary.csv'), index=False, columns=SUMMARY_COLUMNS)
        plot_rate_vs_alpha(summary.table['alpha'], summary.table['mean_rate_bps'], summary.table['std_rate_bps'],
                           os.path.join(out, 'rate_vs_alpha.svg'), rate_bound=0.5 / cfg.Ts)
        print(summary.table.to_string(index=False))
        print(f'spearman={summary.spearman:.4f}' + (' (undefined, constant rates)' if summary.degenerate else ''))
    clean = not aborted and int(rows["bit_errors"].sum()) == 0 and int(rows["desyncs"].sum()) == 0
    return EXIT_OK if clean else EXIT_RUNTIME


def cmd_verify(cfg: RunConfig, family: Optional[str], verbose: int = 0) -> int:
    fam = _family(cfg, family, verbose)
    results = run_checks(cfg, fam, verbose)
    for r in results:
        print(r)
    failed = [r.name for r in results if not r.passed]
    print(f'{len(results) - len(failed)}/{len(results)} checks passed')
    return EXIT_OK if not failed else EXIT_RUNTIME


def main(argv: Optional[List[str]] = None) -> int:
    args = get_default_arguments(argv)
    setup_logging(args.log_config, level=TRACE if args.verbose > 1 else None)
    try:
        cfg = load_config(args.config).with_overrides(seed=getattr(args, 'seed', None),
                                                      jobs=getattr(args, 'jobs', None),
                                                      trace=getattr(args, 'trace', None))
        if args.command == 'precompute':
            return cmd_precompute(cfg, args.out, args.verbose)
        if args.command == 'run':
            return cmd_run(cfg, args.family, args.out, args.verbose)
        if args.command == 'sweep':
            return cmd_sweep(cfg, args.family, args.out, args.verbose)
        return cmd_verify(cfg, args.family, args.verbose)
    except (ConfigError, CacheError) as e:
        print(f'error: {e}', file=sys.stderr)
        return EXIT_CONFIG
    except SMTPCPSError as e:
        print(f'error: {type(e).__name__}: {e}', file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == '__main__':
    sys.exit(main())
