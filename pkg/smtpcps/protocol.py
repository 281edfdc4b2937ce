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

"""Sender and receiver automata of the secret message transfer protocol.

The controller (sender) offers two inputs per step, one per bit value, and the plant (receiver) applies the
one selected by a private random bit ``b_r``. When the next state lands in the one-step reachable
set-difference, the controller can tell from its sharper model which input was applied; that bit becomes a
one-time-pad key for the next wire bit ``b_c``. The eavesdropper's coarser model cannot make the same
inference.

All functions here are pure: they take a state and return a new one.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union

import numpy as np

from .controller import ControllableFamily, SwitchingPolicy
from .dynamics import UncertainModel, in_diff
from .errors import ContractViolation, ProtocolDesyncError
from .geometry import DEFAULT_TOL, Tolerance
from .utils.oplogging import trace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WireMessage:
    """What the controller sends over the network in one step."""
    u0: float
    u1: float
    b_c: int


@dataclass(frozen=True)
class StepContext:
    """State and both offered inputs of one step; the transition out of it is tested for a key event."""
    x: np.ndarray
    u0: float
    u1: float


@dataclass(frozen=True)
class SenderState:
    """Controller + encoder automaton.

    Attributes:
        message: Bits to transmit.
        s: Phase, 1 (waiting for a key event) or 2 (key agreed, next wire bit is encrypted).
        key: Agreed key bit while ``s == 2``.
        p: 1-based index of the next message bit.
        prev: Context of the previous step, absent before the first step.
        k: Number of steps taken.
        completed_at: Step at which the last message bit was sent.
    """
    message: Tuple[int, ...] = ()
    s: int = 1
    key: Optional[int] = None
    p: int = 1
    prev: Optional[StepContext] = None
    k: int = 0
    completed_at: Optional[int] = None

    @property
    def exhausted(self) -> bool:
        return self.p > len(self.message)


@dataclass(frozen=True)
class PendingObservation:
    x: np.ndarray
    u0: float
    u1: float
    b_r: int
    b_c: int

    @property
    def context(self) -> StepContext:
        return StepContext(self.x, self.u0, self.u1)


@dataclass(frozen=True)
class ReceiverState:
    """Plant + decoder automaton."""
    s: int = 1
    key: Optional[int] = None
    decoded: Tuple[int, ...] = field(default_factory=tuple)
    p: int = 1
    pending: Optional[PendingObservation] = None


def _controller_memberships(x_next, ctx: StepContext, mc: UncertainModel, tol: Tolerance) -> Tuple[bool, bool]:
    return mc.in_reach(x_next, ctx.x, ctx.u0, tol), mc.in_reach(x_next, ctx.x, ctx.u1, tol)


def detect_key_event(x_next, ctx: StepContext, mc: UncertainModel, me: UncertainModel,
                     tol: Tolerance = DEFAULT_TOL) -> bool:
    """Key-event rule shared by both endpoints.

    ``x_next`` must lie in the set-difference and in exactly one controller reach set. Transitions where the
    exclusive membership is ambiguous under the tolerance are not key events for either party.
    """
    if not in_diff(x_next, ctx.x, ctx.u0, ctx.u1, mc, me, tol):
        return False
    in0, in1 = _controller_memberships(x_next, ctx, mc, tol)
    return in0 != in1


def infer_key(x_k, prev: StepContext, mc: UncertainModel, tol: Tolerance = DEFAULT_TOL) -> int:
    """0 if ``x_k`` is reachable under ``u0`` only, 1 if under ``u1`` only.

    Raises:
        ProtocolDesyncError: ``x_k`` lies in both or in neither controller reach set.
    """
    in0, in1 = _controller_memberships(x_k, prev, mc, tol)
    if in0 == in1:
        raise ProtocolDesyncError(f'key is ambiguous: state is in {"both" if in0 else "neither"} controller '
                                  'reach sets')
    return 0 if in0 else 1


def _as_policy(policy: Union[ControllableFamily, SwitchingPolicy], tol: Tolerance) -> SwitchingPolicy:
    if isinstance(policy, SwitchingPolicy):
        return policy
    return SwitchingPolicy(policy, tol=tol)


def _random_bit(rng: np.random.Generator) -> int:
    return int(rng.integers(2))


def sender_step(st: SenderState, x_k, policy: Union[ControllableFamily, SwitchingPolicy], mc: UncertainModel,
                me: UncertainModel, rng: np.random.Generator,
                tol: Tolerance = DEFAULT_TOL) -> Tuple[WireMessage, SenderState]:
    """One step of the sender.

    Args:
        st: Current automaton state.
        x_k: Measured plant state.
        policy: Switching policy (or a bare family, used with the default bit-to-cost mapping).
        mc: Controller model.
        me: Eavesdropper model, shared by both defender endpoints.
        rng: Sender's private bit source.
        tol: Membership tolerance.

    Returns:
        The wire message and the next state.

    Raises:
        InfeasibleStateError: ``x_k`` is outside the controllable region.
    """
    x_k = np.asarray(x_k, dtype=float).reshape(-1)
    policy = _as_policy(policy, tol)
    s, key = 1, None
    if st.s == 1 and st.prev is not None and detect_key_event(x_k, st.prev, mc, me, tol):
        s, key = 2, infer_key(x_k, st.prev, mc, tol)
    p, completed_at = st.p, st.completed_at
    if s == 2 and not st.exhausted:
        b_c = st.message[p - 1] ^ key
        p += 1
        if p > len(st.message):
            completed_at = st.k
        trace(logger, 'k=%d sender encrypts bit %d with key %d', st.k, p - 1, key)
    else:
        b_c = _random_bit(rng)
    u0, u1 = policy.inputs(x_k)
    nxt = replace(st, s=s, key=key, p=p, prev=StepContext(x_k, u0, u1), k=st.k + 1, completed_at=completed_at)
    return WireMessage(u0, u1, b_c), nxt


def receiver_act(st: ReceiverState, x_k, msg: WireMessage, rng: np.random.Generator) -> Tuple[float, ReceiverState]:
    """Pick the applied input with a private random bit and remember the step for :func:`receiver_observe`."""
    b_r = _random_bit(rng)
    u = msg.u0 if b_r == 0 else msg.u1
    pending = PendingObservation(np.asarray(x_k, dtype=float).reshape(-1), msg.u0, msg.u1, b_r, msg.b_c)
    return u, replace(st, pending=pending)


def receiver_observe(st: ReceiverState, x_next, mc: UncertainModel, me: UncertainModel,
                     tol: Tolerance = DEFAULT_TOL) -> ReceiverState:
    """Advance the receiver after the plant moved to ``x_next``.

    In phase 1 a key event stores ``b_r`` as key. In phase 2 the pending wire bit is decrypted.
    """
    pend = st.pending
    if pend is None:
        raise ContractViolation('receiver_observe called without a pending step')
    if st.s == 2:
        bit = st.key ^ pend.b_c
        return replace(st, s=1, key=None, decoded=st.decoded + (bit,), p=st.p + 1, pending=None)
    if detect_key_event(np.asarray(x_next, dtype=float).reshape(-1), pend.context, mc, me, tol):
        return replace(st, s=2, key=pend.b_r, pending=None)
    return replace(st, s=1, pending=None)
