import unittest

import numpy as np
import pytest

from smtpcps.config import RunConfig
from smtpcps.controller import SwitchingPolicy
from smtpcps.errors import ContractViolation, ProtocolDesyncError
from smtpcps.harness import run_episode
from smtpcps.protocol import (PendingObservation, ReceiverState, SenderState, StepContext, WireMessage,
                              detect_key_event, infer_key, receiver_act, receiver_observe, sender_step)
from tests.conftest import make_episode

CFG = RunConfig()
MC = CFG.controller_model()
ME = CFG.controller_model().scaled(4.0)
ORIGIN = np.zeros(2)
CTX = StepContext(ORIGIN, 0.0, 0.6)


class KeyInferenceTest(unittest.TestCase):

    def test_exclusive_memberships(self):
        self.assertEqual(infer_key([0, 0], CTX, MC), 0)
        self.assertEqual(infer_key(MC.nominal_next(ORIGIN, 0.6), CTX, MC), 1)

    def test_both_sets_is_a_desync(self):
        with self.assertRaises(ProtocolDesyncError):
            infer_key([0, 0], StepContext(ORIGIN, 0.0, 0.1), MC)

    def test_neither_set_is_a_desync(self):
        with self.assertRaises(ProtocolDesyncError):
            infer_key([1, 1], CTX, MC)

    def test_key_event_requires_set_difference(self):
        self.assertTrue(detect_key_event([0, 0.1], CTX, MC, ME))
        # inside both controller reach sets
        self.assertFalse(detect_key_event([0, 0], StepContext(ORIGIN, 0.0, 0.1), MC, ME))
        # outside the eavesdropper reach set of u1
        self.assertFalse(detect_key_event([0, -0.4], CTX, MC, ME))


@pytest.fixture
def policy(reference_family):
    return SwitchingPolicy(reference_family)


def test_first_step_sends_random_bit(policy, rng):
    st = SenderState(message=(1, 0, 1))
    msg, nxt = sender_step(st, [0.5, 0.0], policy, MC, ME, rng)
    assert msg.b_c in (0, 1)
    assert (msg.u0, msg.u1) == policy.inputs([0.5, 0.0])
    assert nxt.s == 1 and nxt.p == 1 and nxt.k == 1
    np.testing.assert_array_equal(nxt.prev.x, [0.5, 0.0])


def test_key_event_encrypts_next_bit(policy, rng):
    st = SenderState(message=(1, 0, 1), prev=CTX, k=4)
    msg, nxt = sender_step(st, [0, 0.1], policy, MC, ME, rng)
    assert nxt.s == 2 and nxt.key == 0
    assert msg.b_c == 1
    assert nxt.p == 2
    assert st.p == 1


def test_encrypted_step_returns_to_phase_one(policy, rng):
    st = SenderState(message=(1, 0, 1), s=2, key=1, p=2, prev=CTX, k=5)
    # a key event right after an encryption is not used
    _, nxt = sender_step(st, [0, 0.1], policy, MC, ME, rng)
    assert nxt.s == 1 and nxt.key is None and nxt.p == 2


def test_last_bit_sets_completion(policy, rng):
    st = SenderState(message=(1,), prev=CTX, k=7)
    msg, nxt = sender_step(st, [0, 0.1], policy, MC, ME, rng)
    assert msg.b_c == 1 and nxt.exhausted and nxt.completed_at == 7


def test_receiver_act_selects_by_private_bit():
    msg = WireMessage(-1.0, 2.0, 1)
    rng = np.random.default_rng(3)
    picks = []
    st = ReceiverState()
    for _ in range(2000):
        u, st = receiver_act(st, ORIGIN, msg, rng)
        assert u == (msg.u0 if st.pending.b_r == 0 else msg.u1)
        assert st.pending.b_c == 1
        picks.append(st.pending.b_r)
    assert abs(np.mean(picks) - 0.5) < 0.05


def test_receiver_observe_stores_key_on_event():
    st = ReceiverState(pending=PendingObservation(ORIGIN, 0.0, 0.6, b_r=0, b_c=1))
    nxt = receiver_observe(st, [0, 0.1], MC, ME)
    assert nxt.s == 2 and nxt.key == 0 and nxt.pending is None and nxt.decoded == ()


def test_receiver_observe_without_event():
    st = ReceiverState(pending=PendingObservation(ORIGIN, 0.0, 0.6, b_r=1, b_c=0))
    nxt = receiver_observe(st, [0, 0.7], MC, ME)
    assert nxt.s == 1 and nxt.key is None and nxt.decoded == ()


def test_receiver_decrypts_in_phase_two():
    st = ReceiverState(s=2, key=1, pending=PendingObservation(ORIGIN, 0.0, 0.6, b_r=1, b_c=0))
    nxt = receiver_observe(st, [0, 0.1], MC, ME)
    assert nxt.decoded == (1,) and nxt.s == 1 and nxt.p == 2


def test_receiver_observe_needs_pending_step():
    with pytest.raises(ContractViolation):
        receiver_observe(ReceiverState(), ORIGIN, MC, ME)


def test_inputs_are_not_mutated(policy, rng):
    st = SenderState(message=(1, 0), prev=CTX)
    before = (st.s, st.key, st.p, st.k)
    sender_step(st, [0, 0.1], policy, MC, ME, rng)
    assert (st.s, st.key, st.p, st.k) == before


@pytest.mark.parametrize("alpha", [2.0, 4.0, 8.0])
def test_full_episode_decodes_without_errors(reference_config, reference_family, reference_x0, alpha):
    for seed in range(5):
        result = run_episode(make_episode(reference_config, reference_x0[0], alpha=alpha, seed=seed),
                             reference_family)
        assert result.error is None
        assert result.desyncs == 0 and result.bit_errors == 0
        assert result.decoded[:result.decoded_bits] == result.message[:result.decoded_bits]


def test_wire_bit_is_balanced(reference_config, reference_family, reference_x0):
    # plain random bits and key-encrypted message bits must look alike on the wire
    wire = []
    for i, x0 in enumerate(reference_x0):
        for seed in range(20):
            cfg = make_episode(reference_config, x0, alpha=4.0, seed=1000 + 100 * i + seed, trace=True)
            wire.extend(run_episode(cfg, reference_family).trace['b_c'].tolist())
    n = len(wire)
    assert n == 3000
    assert abs(np.mean(wire) - 0.5) <= 3 * np.sqrt(0.25 / n)
