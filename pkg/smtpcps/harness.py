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

"""Episode orchestration and the eavesdropper-scale sweep."""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .abstracts import AbstractAttack
from .adversary import (EavesdropperView, KnownModelAttack, RandomGuessAttack, ReachabilityAttack, evaluate,
                        exposes_key_event)
from .controller import DEFAULT_BIT_COSTS, ControllableFamily, CostId, SwitchingPolicy
from .dynamics import LinearModel, TrueSystem, UncertainModel, in_diff, step_true
from .errors import ContractViolation, InfeasibleStateError, InternalInconsistencyError, ProtocolDesyncError
from .geometry import DEFAULT_TOL, Polytope, Tolerance
from .metrics import rank_trend
from .protocol import ReceiverState, SenderState, receiver_act, receiver_observe, sender_step
from .utils.static_funcs import make_iterable_verbose

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ['alpha', 'x0_id', 'rep', 'seed', 'steps', 'key_events', 'decoded_bits', 'bit_errors', 'desyncs',
                  'rate_bps', 'acc_random', 'acc_reach_025', 'acc_reach_050', 'acc_reach_075']
SUMMARY_COLUMNS = ['alpha', 'mean_rate_bps', 'std_rate_bps', 'n']
TRACE_COLUMNS = ['k', 'x', 'u0', 'u1', 'b_r', 'b_c', 'in_diff', 'sender_s', 'receiver_s', 'key_event',
                 'decoded_bit']
ATTACK_SCALES = (0.25, 0.5, 0.75)
DEFAULT_FRACTIONS = (0.8, 0.4, 0.2)

# order of the streams spawned from an episode seed
_STREAMS = ('disturbance', 'receiver', 'sender', 'attacker', 'message')


@dataclass(frozen=True)
class EpisodeConfig:
    """Everything one episode needs besides the controllable family.

    Attributes:
        model: Plant matrices, shared by all three models.
        d_true: Set the true disturbance is drawn from.
        d_c: Controller disturbance set.
        alpha: Eavesdropper scale, ``D_e = alpha * D_c``.
        x0: Initial state.
        steps: Number of simulated steps.
        seed: Episode seed; every random stream is derived from it.
        message: Bits to send; None draws ``message_bits`` random bits from the episode's message stream.
        message_bits: Length of the random message.
        bit_costs: Cost used for bit 0 and bit 1.
        tol: Membership tolerance.
        attack_scales: Guessed-``D_c`` scales of the replay attacks.
        known_model_attack: Also run the replay attack that is given the true ``D_c``.
        trace: Keep the per-step protocol trace.
    """
    model: LinearModel
    d_true: Polytope
    d_c: Polytope
    alpha: float
    x0: Tuple[float, ...]
    steps: int = 50
    seed: int = 0
    message: Optional[Tuple[int, ...]] = None
    message_bits: int = 64
    bit_costs: Tuple[CostId, CostId] = DEFAULT_BIT_COSTS
    tol: Tolerance = DEFAULT_TOL
    attack_scales: Tuple[float, ...] = ATTACK_SCALES
    known_model_attack: bool = False
    trace: bool = False

    def __post_init__(self):
        if self.steps < 1:
            raise ContractViolation(f'steps must be at least 1, got {self.steps}')
        if self.alpha < 1:
            raise ContractViolation(f'alpha must be at least 1, got {self.alpha}')

    @property
    def controller_model(self) -> UncertainModel:
        return UncertainModel(self.model, self.d_c)

    @property
    def eavesdropper_model(self) -> UncertainModel:
        return UncertainModel(self.model, self.d_c.scale(self.alpha))


@dataclass
class EpisodeResult:
    """Metrics of one episode.

    ``decoded_bits`` counts decoded message bits (decryptions past the end of the message are not counted);
    attacker accuracies are taken over those bits, each guess aligned to the step that carried the bit.
    ``attacker_decryptions`` holds, per attack, how many of those bits it decrypted rather than guessed and how
    many of the decryptions were right.
    """
    seed: int
    steps: int
    key_events: int = 0
    decoded_bits: int = 0
    bit_errors: int = 0
    desyncs: int = 0
    rate_bps: float = 0.0
    attacker_accuracies: Dict[str, float] = field(default_factory=dict)
    attacker_matches: Dict[str, int] = field(default_factory=dict)
    attacker_flags: Dict[str, List[int]] = field(default_factory=dict)
    attacker_decryptions: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    key_event_steps: List[int] = field(default_factory=list)
    decode_steps: List[int] = field(default_factory=list)
    exposed_key_events: int = 0
    completed_at: Optional[int] = None
    error: Optional[str] = None
    message: Tuple[int, ...] = ()
    decoded: Tuple[int, ...] = ()
    trace: Optional[pd.DataFrame] = None


def episode_seed(base_seed: int, alpha_index: int, x0_index: int, rep: int) -> int:
    """64-bit seed of one sweep cell."""
    ss = np.random.SeedSequence([base_seed, alpha_index, x0_index, rep])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def episode_streams(seed: int) -> Dict[str, np.random.Generator]:
    """Independent generators for every consumer of randomness in an episode."""
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(_STREAMS, children)}


def default_attacks(cfg: EpisodeConfig) -> List[AbstractAttack]:
    attacks: List[AbstractAttack] = [RandomGuessAttack()]
    attacks.extend(ReachabilityAttack(scale, cfg.tol) for scale in cfg.attack_scales)
    if cfg.known_model_attack:
        attacks.append(KnownModelAttack(cfg.controller_model, cfg.tol))
    return attacks


def _fmt_state(x: np.ndarray) -> str:
    return ' '.join(f'{v:.17g}' for v in x)


def run_episode(cfg: EpisodeConfig, fam: ControllableFamily) -> EpisodeResult:
    """Simulate the closed loop with both protocol endpoints and score the eavesdroppers.

    Per step: the sender offers two inputs, the receiver applies one, the plant moves, the receiver observes.
    Infeasible states and lost lockstep end the episode early; the partial counts and the error are kept.
    """
    rngs = episode_streams(cfg.seed)
    mc, me = cfg.controller_model, cfg.eavesdropper_model
    if cfg.message is None:
        message = tuple(int(b) for b in rngs['message'].integers(2, size=cfg.message_bits))
    else:
        message = tuple(int(b) for b in cfg.message)
    system = TrueSystem(cfg.model, cfg.d_true, rngs['disturbance'])
    policy = SwitchingPolicy(fam, cfg.bit_costs, cfg.tol)
    sender, receiver = SenderState(message=message), ReceiverState()
    view = EavesdropperView(me)
    result = EpisodeResult(seed=cfg.seed, steps=cfg.steps, message=message)
    rows = []
    x = np.asarray(cfg.x0, dtype=float)
    try:
        for k in range(cfg.steps):
            wire, sender = sender_step(sender, x, policy, mc, me, rngs['sender'], cfg.tol)
            if sender.s != receiver.s or (sender.s == 2 and sender.key != receiver.key):
                raise ProtocolDesyncError(f'step {k}: sender phase/key {sender.s}/{sender.key} but receiver '
                                          f'{receiver.s}/{receiver.key}')
            u, receiver = receiver_act(receiver, x, wire, rngs['receiver'])
            b_r = receiver.pending.b_r
            view.record(k, x, wire)
            x_next, _ = step_true(system, x, u)
            before_s, before_len = receiver.s, len(receiver.decoded)
            receiver = receiver_observe(receiver, x_next, mc, me, cfg.tol)
            key_event = before_s == 1 and receiver.s == 2
            if key_event:
                result.key_event_steps.append(k)
            decoded_bit = receiver.decoded[-1] if len(receiver.decoded) > before_len else None
            if decoded_bit is not None:
                result.decode_steps.append(k)
            if cfg.trace:
                rows.append((k, _fmt_state(x), wire.u0, wire.u1, b_r, wire.b_c,
                             int(in_diff(x_next, x, wire.u0, wire.u1, mc, me, cfg.tol)), sender.s, receiver.s,
                             int(key_event), '' if decoded_bit is None else decoded_bit))
            x = x_next
    except ProtocolDesyncError as e:
        result.desyncs += 1
        result.error = f'ProtocolDesyncError: {e}'
        logger.warning('Episode seed=%d aborted: %s', cfg.seed, e)
    except (InfeasibleStateError, InternalInconsistencyError) as e:
        result.error = f'{type(e).__name__}: {e}'
        logger.warning('Episode seed=%d aborted: %s', cfg.seed, e)
    view.close(x)

    result.decoded = receiver.decoded
    result.key_events = len(result.key_event_steps)
    result.decoded_bits = min(len(receiver.decoded), len(message))
    truth = message[:result.decoded_bits]
    # i-th decryption of the receiver carries message bit i
    send_steps = result.decode_steps[:result.decoded_bits]
    result.bit_errors = sum(a != b for a, b in zip(receiver.decoded, truth))
    result.rate_bps = result.decoded_bits / (cfg.steps * cfg.model.Ts)
    result.completed_at = sender.completed_at
    result.exposed_key_events = sum(exposes_key_event(view, k, cfg.tol) for k in result.key_event_steps)

    for attack in default_attacks(cfg):
        outcome = attack.guess(view, send_steps, rngs['attacker'])
        report = evaluate(outcome.guesses, truth, outcome.flagged_events)
        result.attacker_decryptions[attack.name] = (
            len(outcome.decrypted), sum(outcome.guesses[i] == truth[i] for i in outcome.decrypted))
        result.attacker_accuracies[attack.name] = report.accuracy
        result.attacker_matches[attack.name] = report.matches
        result.attacker_flags[attack.name] = list(report.flagged_events)
    if cfg.trace:
        result.trace = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    logger.debug('Episode seed=%d: key_events=%d decoded=%d errors=%d rate=%.3f', cfg.seed, result.key_events,
                 result.decoded_bits, result.bit_errors, result.rate_bps)
    return result


def result_row(alpha: float, x0_id: int, rep: int, result: EpisodeResult) -> dict:
    """One results-CSV row."""
    acc = result.attacker_accuracies
    return {'alpha': alpha, 'x0_id': x0_id, 'rep': rep, 'seed': result.seed, 'steps': result.steps,
            'key_events': result.key_events, 'decoded_bits': result.decoded_bits, 'bit_errors': result.bit_errors,
            'desyncs': result.desyncs, 'rate_bps': result.rate_bps, 'acc_random': acc.get('random', np.nan),
            'acc_reach_025': acc.get('reach_025', np.nan), 'acc_reach_050': acc.get('reach_050', np.nan),
            'acc_reach_075': acc.get('reach_075', np.nan)}


def initial_conditions(fam: ControllableFamily, fractions: Sequence[float] = DEFAULT_FRACTIONS,
                       shrink: float = 0.99) -> List[np.ndarray]:
    """Initial states on the outer shells of ``T_j`` for ``j = round(f * N)``.

    Each state is moved from the Chebyshev centre of ``T_j`` towards its farthest vertex, stopping at ``shrink``
    of the way.
    """
    states = []
    for f in fractions:
        j = min(max(int(round(f * fam.N)), 1), fam.N)
        target = fam.sets[j]
        center, _ = target.chebyshev_center()
        far = target.vertices[np.argmax(np.linalg.norm(target.vertices - center, axis=1))]
        states.append(center + shrink * (far - center))
    return states


@dataclass(frozen=True)
class SweepConfig:
    """Grid of episodes over eavesdropper scales, initial states and repetitions.

    Attributes:
        template: Episode settings shared by all cells; ``alpha``, ``x0`` and ``seed`` are replaced per cell.
        alphas: Eavesdropper scales, each > 1.
        x0_list: Initial states.
        reps: Repetitions per (alpha, x0).
        base_seed: Root of all episode seeds.
        jobs: Worker processes; 1 runs in-process.
    """
    template: EpisodeConfig
    alphas: Tuple[float, ...] = (1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    x0_list: Tuple[Tuple[float, ...], ...] = ()
    reps: int = 20
    base_seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if not self.alphas:
            raise ContractViolation('the sweep needs at least one alpha')
        if any(not a > 1 for a in self.alphas):
            raise ContractViolation('all sweep alphas must be greater than 1')
        if self.reps < 1:
            raise ContractViolation('reps must be at least 1')
        if not self.x0_list:
            raise ContractViolation('the sweep needs at least one initial state')

    def cells(self):
        """``(alpha, x0_id, rep, episode config)`` in deterministic order."""
        for a_idx, alpha in enumerate(self.alphas):
            for x_idx, x0 in enumerate(self.x0_list):
                for rep in range(self.reps):
                    seed = episode_seed(self.base_seed, a_idx, x_idx, rep)
                    yield alpha, x_idx, rep, replace(self.template, alpha=alpha, x0=tuple(x0), seed=seed)


_worker_family: Optional[ControllableFamily] = None


def _init_worker(fam: ControllableFamily):
    global _worker_family
    _worker_family = fam


def _run_cell(cfg: EpisodeConfig) -> EpisodeResult:
    return run_episode(cfg, _worker_family)


def run_sweep_results(cfg: SweepConfig, fam: ControllableFamily,
                      verbose: int = 0) -> List[Tuple[float, int, int, EpisodeResult]]:
    """Run every cell and return ``(alpha, x0_id, rep, result)`` in cell order."""
    cells = list(cfg.cells())
    start = time.time()
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs, initializer=_init_worker, initargs=(fam,)) as pool:
            results = list(make_iterable_verbose(pool.map(_run_cell, [c[3] for c in cells], chunksize=8),
                                                 verbose, desc='Episodes'))
    else:
        results = [run_episode(c[3], fam) for c in make_iterable_verbose(cells, verbose, desc='Episodes')]
    logger.info('Sweep finished: %d episodes in %.2fs', len(cells), time.time() - start)
    return [(alpha, x_idx, rep, res) for (alpha, x_idx, rep, _), res in zip(cells, results)]


def run_sweep(cfg: SweepConfig, fam: ControllableFamily, verbose: int = 0) -> pd.DataFrame:
    """Results table of the sweep, one row per episode, columns :data:`RESULT_COLUMNS`."""
    rows = [result_row(alpha, x_idx, rep, res) for alpha, x_idx, rep, res in run_sweep_results(cfg, fam, verbose)]
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


@dataclass
class SweepSummary:
    """Per-alpha rate statistics and the rank correlation between alpha and the mean rate."""
    table: pd.DataFrame
    spearman: float
    degenerate: bool

    def mean_rate(self, alpha: float) -> float:
        return float(self.table.loc[np.isclose(self.table['alpha'], alpha), 'mean_rate_bps'].iloc[0])


def summarize(rows: pd.DataFrame) -> SweepSummary:
    """Mean, standard deviation and count of ``rate_bps`` per alpha, plus the trend statistic.

    A constant mean rate makes the rank correlation undefined; it is reported as 0 with ``degenerate`` set.
    """
    if rows['alpha'].nunique() < 2:
        raise ContractViolation('the trend needs at least two alpha levels')
    grouped = rows.groupby('alpha', sort=True)['rate_bps']
    table = pd.DataFrame({'alpha': grouped.mean().index.to_numpy(),
                          'mean_rate_bps': grouped.mean().to_numpy(),
                          'std_rate_bps': grouped.std(ddof=1).fillna(0.0).to_numpy(),
                          'n': grouped.count().to_numpy()}, columns=SUMMARY_COLUMNS)
    spearman, degenerate = rank_trend(table['alpha'].tolist(), table['mean_rate_bps'].tolist())
    if degenerate:
        logger.warning('Rate trend is undefined (constant mean rates); reported as 0')
    return SweepSummary(table, spearman, degenerate)
