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

"""Invariant suites run by ``smtpcps verify``."""
import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .config import RunConfig
from .controller import ControllableFamily, SwitchingPolicy, set_index, verify_family
from .dynamics import TrueSystem, UncertainModel, check_model_chain
from .errors import SMTPCPSError
from .harness import EpisodeConfig, SweepConfig, initial_conditions, run_sweep_results
from .metrics import pooled_accuracy
from .utils.static_funcs import make_iterable_verbose

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ''

    def __str__(self):
        return f'{"PASS" if self.passed else "FAIL"} {self.name}' + (f': {self.detail}' if self.detail else '')


def check_model_chain_all(cfg: RunConfig) -> CheckResult:
    """``D ⊆ D_c ⊂ D_e`` for the configured alpha and every sweep alpha."""
    try:
        check_model_chain(cfg.d_true(), cfg.d_c(), cfg.d_e(), strict=False, tol=cfg.tolerance())
        for alpha in cfg.alphas:
            check_model_chain(cfg.d_true(), cfg.d_c(), cfg.d_e(alpha), strict=True, tol=cfg.tolerance())
    except SMTPCPSError as e:
        return CheckResult('model_chain', False, str(e))
    return CheckResult('model_chain', True, f'{len(cfg.alphas)} sweep scales')


def check_reach_inclusion(cfg: RunConfig, fam: ControllableFamily, samples: int = 1000, seed: int = 0) -> CheckResult:
    """Controller reach sets lie inside eavesdropper reach sets for random ``(x, u)``."""
    rng = np.random.default_rng(seed)
    mc = fam.model
    box_lo, box_hi = fam.sets[-1].vertices.min(axis=0), fam.sets[-1].vertices.max(axis=0)
    xs = rng.uniform(box_lo, box_hi, size=(samples, mc.model.n))
    us = rng.uniform(-fam.u_max, fam.u_max, size=samples)
    tol = cfg.tolerance()
    failures = 0
    for alpha in cfg.alphas:
        me = UncertainModel(mc.model, mc.disturbance.scale(alpha))
        failures += sum(not mc.reach(x, u).is_subset(me.reach(x, u), tol) for x, u in zip(xs, us))
    return CheckResult('reach_inclusion', failures == 0, f'{failures} failures in {samples * len(cfg.alphas)} pairs')


def check_family(cfg: RunConfig, fam: ControllableFamily) -> List[CheckResult]:
    return [CheckResult(name, ok) for name, ok in verify_family(fam, cfg.tolerance()).items()]


def check_eroded_consistency(cfg: RunConfig, fam: ControllableFamily, atol: float = 1e-9) -> CheckResult:
    """Stored ``T~_i`` equal ``T_i ⊖ D_c`` recomputed from ``T_i``."""
    tol = cfg.tolerance()
    bad = [i for i, (t, e) in enumerate(zip(fam.sets, fam.eroded))
           if not t.pontryagin_diff(fam.model.disturbance, tol).same_vertices(e, atol)]
    return CheckResult('eroded_consistency', not bad, f'mismatch at {bad[:5]}' if bad else '')


def _bit_patterns(rng: np.random.Generator, steps: int) -> List[np.ndarray]:
    return [np.zeros(steps, dtype=int), np.ones(steps, dtype=int), np.arange(steps) % 2,
            rng.integers(2, size=steps)]


def check_closed_loop(cfg: RunConfig, fam: ControllableFamily, x0_list: Sequence[np.ndarray], seeds: int = 20,
                      verbose: int = 0) -> List[CheckResult]:
    """Index descent, terminal trap, input bounds and reality containment under arbitrary bit sequences."""
    tol = cfg.tolerance()
    policy = SwitchingPolicy(fam, cfg.costs(), tol)
    mc = fam.model
    descent, trap, bounds, contained, runs = 0, 0, 0, 0, 0
    for seed in make_iterable_verbose(range(seeds), verbose, desc='Closed loop'):
        rng = np.random.default_rng(seed)
        bits = _bit_patterns(rng, cfg.steps)[seed % 4]
        for x0 in x0_list:
            runs += 1
            system = TrueSystem(mc.model, cfg.d_true(), np.random.default_rng([seed, runs]))
            x = np.asarray(x0, dtype=float)
            index = set_index(x, fam, tol)
            for b in bits:
                u = policy(x, int(b))
                bounds += abs(u) > fam.u_max + tol.geom_eps
                x_next, _ = system.step(x, u)
                contained += not mc.in_reach(x_next, x, u, tol)
                nxt = set_index(x_next, fam, tol)
                descent += nxt > max(index - 1, 0)
                trap += index == 0 and nxt != 0
                x, index = x_next, nxt
    return [CheckResult('index_descent', descent == 0, f'{descent} violations over {runs} trajectories'),
            CheckResult('terminal_trap', trap == 0, f'{trap} violations'),
            CheckResult('input_bounds', bounds == 0, f'{bounds} violations'),
            CheckResult('reality_containment', contained == 0, f'{contained} violations')]


def check_protocol(cfg: RunConfig, fam: ControllableFamily, x0_list: Sequence[np.ndarray], reps: int = 2,
                   verbose: int = 0) -> List[CheckResult]:
    """Seeded episodes over the sweep scales: message integrity, lockstep, concealment and the scoring path."""
    message, length = cfg.message_spec()
    template = EpisodeConfig(model=cfg.linear_model(), d_true=cfg.d_true(), d_c=cfg.d_c(), alpha=cfg.alpha,
                             x0=tuple(x0_list[0]), steps=cfg.steps, message=message, message_bits=length,
                             bit_costs=cfg.costs(), tol=cfg.tolerance(), known_model_attack=True)
    sweep = SweepConfig(template=template, alphas=cfg.alphas, x0_list=tuple(tuple(x) for x in x0_list),
                        reps=reps, base_seed=cfg.base_seed, jobs=cfg.jobs)
    results = [r for *_, r in run_sweep_results(sweep, fam, verbose)]
    errors = sum(r.bit_errors for r in results)
    desyncs = sum(r.desyncs for r in results)
    aborted = sum(r.error is not None for r in results)
    decoded = sum(r.decoded_bits for r in results)
    exposed = sum(r.exposed_key_events for r in results)
    events = sum(r.key_events for r in results)
    known = pooled_accuracy((r.attacker_matches['known_dc'], r.decoded_bits) for r in results)
    return [CheckResult('message_integrity', errors == 0 and aborted == 0,
                        f'{decoded} bits, {errors} errors, {aborted} aborted episodes'),
            CheckResult('lockstep', desyncs == 0, f'{desyncs} desyncs'),
            CheckResult('key_event_concealment', exposed == 0, f'{exposed} of {events} key events exposed'),
            CheckResult('sanity_inversion', decoded == 0 or known == 1.0, f'accuracy {known:.4f}')]


def run_checks(cfg: RunConfig, fam: ControllableFamily, verbose: int = 0) -> List[CheckResult]:
    """Every suite, in order; a suite that raises is reported as a failure."""
    x0_list = cfg.initial_states() or initial_conditions(fam)
    suites: List[Tuple[str, Callable[[], object]]] = [
        ('model_chain', lambda: check_model_chain_all(cfg)),
        ('reach_inclusion', lambda: check_reach_inclusion(cfg, fam)),
        ('family', lambda: check_family(cfg, fam)),
        ('eroded_consistency', lambda: check_eroded_consistency(cfg, fam)),
        ('closed_loop', lambda: check_closed_loop(cfg, fam, x0_list, verbose=verbose)),
        ('protocol', lambda: check_protocol(cfg, fam, x0_list, verbose=verbose)),
    ]
    results: List[CheckResult] = []
    for name, suite in suites:
        try:
            out = suite()
        except SMTPCPSError as e:
            logger.warning('Check suite %s raised %s', name, e)
            results.append(CheckResult(name, False, f'{type(e).__name__}: {e}'))
            continue
        results.extend(out if isinstance(out, list) else [out])
    return results
