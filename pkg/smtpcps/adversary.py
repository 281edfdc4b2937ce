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

"""Passive eavesdroppers.

An attacker reads everything on the wire and measures the plant state, but only knows the coarse disturbance
set ``D_e``. The strongest strategy implemented here replays the defender's automaton with a guessed
controller set in place of ``D_c``.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .abstracts import AbstractAttack, AttackOutcome
from .dynamics import UncertainModel
from .errors import ContractViolation
from .geometry import DEFAULT_TOL, Tolerance
from .metrics import BitAccuracy, count_matches
from .protocol import StepContext, WireMessage, detect_key_event, infer_key

logger = logging.getLogger(__name__)


@dataclass
class EavesdropperView:
    """Append-only record of what the eavesdropper observes.

    Attributes:
        model: The eavesdropper's model (disturbance ``D_e``); the only model reachable from the view.
        history: ``(k, x_k, wire message)`` per step.
        final_state: State after the last step, set by :meth:`close`.
    """
    model: UncertainModel
    history: List[Tuple[int, np.ndarray, WireMessage]] = field(default_factory=list)
    final_state: Optional[np.ndarray] = None

    def record(self, k: int, x_k, msg: WireMessage):
        if self.final_state is not None:
            raise ContractViolation('the view is closed')
        self.history.append((k, np.asarray(x_k, dtype=float).reshape(-1), msg))

    def close(self, x_final):
        self.final_state = np.asarray(x_final, dtype=float).reshape(-1)

    def transitions(self):
        """Yield ``(k, context, wire message, x_next)`` for every step whose successor was observed."""
        states = [x for _, x, _ in self.history]
        if self.final_state is not None:
            states.append(self.final_state)
        for j, (k, x, msg) in enumerate(self.history):
            if j + 1 < len(states):
                yield k, StepContext(x, msg.u0, msg.u1), msg, states[j + 1]

    def transition(self, k: int):
        for item in self.transitions():
            if item[0] == k:
                return item
        raise KeyError(k)


@dataclass(frozen=True)
class AttackReport:
    """Score of one attack against the transmitted bits."""
    guesses: Tuple[int, ...]
    accuracy: float
    flagged_events: Tuple[int, ...] = ()
    matches: int = 0

    @property
    def n_bits(self) -> int:
        return len(self.guesses)


def decode_with_surrogate(view: EavesdropperView, surrogate: UncertainModel,
                          tol: Tolerance = DEFAULT_TOL) -> Tuple[Dict[int, int], List[int]]:
    """Replay the receiver's automaton with ``surrogate`` standing in for the controller model.

    Keys are inferred from exclusive membership in the surrogate's reach sets, since ``b_r`` is never on the wire.

    Returns:
        Decoded bits keyed by the step whose wire ``b_c`` they decrypt, and the steps flagged as key events.
    """
    decoded, flagged = {}, []
    s, key = 1, None
    for k, ctx, msg, x_next in view.transitions():
        if s == 2:
            decoded[k] = key ^ msg.b_c
            s, key = 1, None
        elif detect_key_event(x_next, ctx, surrogate, view.model, tol):
            s, key = 2, infer_key(x_next, ctx, surrogate, tol)
            flagged.append(k)
    return decoded, flagged


def align_guesses(decoded: Mapping[int, int], send_steps: Sequence[int], rng: np.random.Generator) -> List[int]:
    """One guess per message bit: the decryption of the step that carried the bit, else a coin flip.

    Decryptions of steps that carried no message bit are dropped.
    """
    coins = rng.integers(2, size=len(send_steps))
    return [int(decoded[k]) if k in decoded else int(c) for k, c in zip(send_steps, coins)]


def decrypted_positions(decoded: Mapping[int, int], send_steps: Sequence[int]) -> List[int]:
    """Message positions whose carrying step the attacker decrypted."""
    return [i for i, k in enumerate(send_steps) if k in decoded]


def attack_random(view: EavesdropperView, n_bits: int, rng: np.random.Generator) -> List[int]:
    """One fair coin flip per message bit."""
    return [int(b) for b in rng.integers(2, size=n_bits)]


def attack_reachability(view: EavesdropperView, guessed_dc_scale: float, send_steps: Sequence[int],
                        rng: np.random.Generator, tol: Tolerance = DEFAULT_TOL) -> Tuple[List[int], List[int]]:
    """Replay with ``scale(D_e, guessed_dc_scale)`` as the guessed controller set.

    Args:
        send_steps: Step that carried each transmitted message bit, in message order.

    Returns:
        Guesses aligned to the message bits and the flagged key-event steps.
    """
    if not 0 < guessed_dc_scale <= 1:
        raise ContractViolation(f'guessed_dc_scale must lie in (0, 1], got {guessed_dc_scale}')
    decoded, flagged = decode_with_surrogate(view, view.model.scaled(guessed_dc_scale), tol)
    return align_guesses(decoded, send_steps, rng), flagged


def exposes_key_event(view: EavesdropperView, k: int, tol: Tolerance = DEFAULT_TOL) -> bool:
    """Whether the eavesdropper's own reach sets separate the two inputs at the transition out of step ``k``."""
    _, ctx, _, x_next = view.transition(k)
    in0 = view.model.in_reach(x_next, ctx.x, ctx.u0, tol)
    in1 = view.model.in_reach(x_next, ctx.x, ctx.u1, tol)
    return in0 != in1


def evaluate(guesses: Sequence[int], truth: Sequence[int], flagged_events: Sequence[int] = ()) -> AttackReport:
    """Score guesses against the transmitted bits.

    Raises:
        ContractViolation: The sequences differ in length.
    """
    if len(guesses) != len(truth):
        raise ContractViolation(f'{len(guesses)} guesses for {len(truth)} bits')
    matches = count_matches(guesses, truth)
    _, accuracy = BitAccuracy().score2(matches, len(truth))
    return AttackReport(tuple(int(g) for g in guesses), accuracy, tuple(flagged_events), matches)


class RandomGuessAttack(AbstractAttack):
    """Coin-flip baseline."""
    __slots__ = ()

    name = 'random'

    def guess(self, view, send_steps, rng):
        return AttackOutcome(attack_random(view, len(send_steps), rng), [])


class ReachabilityAttack(AbstractAttack):
    """Replay attack with the controller set guessed as a scaled copy of ``D_e``."""
    __slots__ = 'scale', 'tol'

    def __init__(self, scale: float, tol: Tolerance = DEFAULT_TOL):
        self.scale = scale
        self.tol = tol

    @property
    def name(self) -> str:
        return f'reach_{round(self.scale * 100):03d}'

    def guess(self, view, send_steps, rng):
        if not 0 < self.scale <= 1:
            raise ContractViolation(f'guessed_dc_scale must lie in (0, 1], got {self.scale}')
        decoded, flagged = decode_with_surrogate(view, view.model.scaled(self.scale), self.tol)
        return AttackOutcome(align_guesses(decoded, send_steps, rng), flagged,
                             decrypted_positions(decoded, send_steps))


class KnownModelAttack(AbstractAttack):
    """Replay with the true controller model.

    Not a legal attack; it decodes exactly what the receiver decodes and serves as a check of the scoring path.
    """
    __slots__ = 'controller_model', 'tol'

    name = 'known_dc'

    def __init__(self, controller_model: UncertainModel, tol: Tolerance = DEFAULT_TOL):
        self.controller_model = controller_model
        self.tol = tol

    def guess(self, view, send_steps, rng):
        decoded, flagged = decode_with_surrogate(view, self.controller_model, self.tol)
        return AttackOutcome(align_guesses(decoded, send_steps, rng), flagged,
                             decrypted_positions(decoded, send_steps))
