import math
import unittest

import numpy as np
import pytest

from smtpcps.adversary import (EavesdropperView, KnownModelAttack, RandomGuessAttack, ReachabilityAttack,
                               align_guesses, attack_random, attack_reachability, decode_with_surrogate,
                               decrypted_positions, evaluate)
from smtpcps.config import RunConfig
from smtpcps.errors import ContractViolation
from smtpcps.harness import run_episode
from smtpcps.metrics import pooled_accuracy
from smtpcps.protocol import WireMessage
from tests.conftest import make_episode


def small_view():
    view = EavesdropperView(RunConfig().controller_model().scaled(4.0))
    view.record(0, [0, 0], WireMessage(0.0, 0.6, 1))
    view.record(1, [0, 0.1], WireMessage(-0.2, 0.3, 0))
    view.close([0.01, 0.05])
    return view


class EvaluateTest(unittest.TestCase):

    def test_partial_match(self):
        report = evaluate([1, 0, 1, 1], [1, 1, 1, 0])
        self.assertEqual(report.matches, 2)
        self.assertEqual(report.accuracy, 0.5)
        self.assertEqual(report.n_bits, 4)

    def test_exact_match(self):
        self.assertEqual(evaluate([0, 1], [0, 1], flagged_events=[3]).accuracy, 1.0)
        self.assertEqual(evaluate([0, 1], [0, 1], flagged_events=[3]).flagged_events, (3,))

    def test_nothing_to_guess(self):
        self.assertTrue(math.isnan(evaluate([], []).accuracy))

    def test_length_mismatch(self):
        with self.assertRaises(ContractViolation):
            evaluate([1], [1, 0])


class ViewTest(unittest.TestCase):

    def test_transitions_pair_states(self):
        view = small_view()
        items = list(view.transitions())
        self.assertEqual([k for k, *_ in items], [0, 1])
        np.testing.assert_array_equal(items[0][3], [0, 0.1])
        np.testing.assert_array_equal(items[1][3], [0.01, 0.05])
        self.assertEqual(items[1][1].u0, -0.2)

    def test_missing_transition(self):
        with self.assertRaises(KeyError):
            small_view().transition(5)

    def test_closed_view_rejects_records(self):
        with self.assertRaises(ContractViolation):
            small_view().record(2, [0, 0], WireMessage(0.0, 0.0, 0))

    def test_replay_with_controller_model(self):
        decoded, flagged = decode_with_surrogate(small_view(), RunConfig().controller_model())
        # step 0 is a key event with key 0; step 1 carries b_c = 0
        self.assertEqual(flagged, [0])
        self.assertEqual(decoded, {1: 0})


class AlignmentTest(unittest.TestCase):

    def test_decryptions_land_on_their_carrying_step(self):
        # the attacker missed the event before step 3 but decrypted steps 5 and 9
        decoded = {5: 1, 9: 0}
        guesses = align_guesses(decoded, [3, 5, 9], np.random.default_rng(0))
        self.assertEqual(len(guesses), 3)
        self.assertEqual(guesses[1:], [1, 0])
        self.assertEqual(decrypted_positions(decoded, [3, 5, 9]), [1, 2])

    def test_stray_decryptions_are_dropped(self):
        decoded = {2: 1, 7: 1}
        self.assertEqual(decrypted_positions(decoded, [4, 7]), [1])
        self.assertEqual(align_guesses(decoded, [4, 7], np.random.default_rng(3))[1], 1)

    def test_no_bits_sent(self):
        self.assertEqual(align_guesses({4: 1}, [], np.random.default_rng(0)), [])

    def test_unguessed_positions_are_coin_flips(self):
        guesses = align_guesses({}, list(range(2000)), np.random.default_rng(5))
        self.assertLessEqual(abs(np.mean(guesses) - 0.5), 0.034)


def test_random_attack_is_chance_level():
    rng = np.random.default_rng(11)
    assert attack_random(small_view(), 0, rng) == []
    truth = np.random.default_rng(12).integers(2, size=2000)
    guesses = attack_random(small_view(), 2000, rng)
    assert abs(evaluate(guesses, truth).accuracy - 0.5) <= 0.034


def test_random_attack_is_seeded():
    a = attack_random(small_view(), 50, np.random.default_rng(1))
    b = attack_random(small_view(), 50, np.random.default_rng(1))
    assert a == b


def test_reach_attack_scale_range():
    with pytest.raises(ContractViolation):
        attack_reachability(small_view(), 1.5, [1], np.random.default_rng(0))


def test_reach_attack_guesses_every_sent_bit():
    guesses, flagged = attack_reachability(small_view(), 0.25, [0, 1, 4], np.random.default_rng(0))
    assert len(guesses) == 3 and set(guesses) <= {0, 1}


def test_known_model_attack_reports_decrypted_positions():
    outcome = KnownModelAttack(RunConfig().controller_model()).guess(small_view(), [1], np.random.default_rng(0))
    assert outcome.guesses == [0]
    assert list(outcome.decrypted) == [0]
    assert outcome.flagged_events == [0]


def test_attack_names():
    assert RandomGuessAttack().name == 'random'
    assert [ReachabilityAttack(s).name for s in (0.25, 0.5, 0.75, 1.0)] == \
        ['reach_025', 'reach_050', 'reach_075', 'reach_100']
    assert KnownModelAttack(RunConfig().controller_model()).name == 'known_dc'


@pytest.fixture(scope="module")
def attacked_episodes(reference_config, reference_family, reference_x0):
    results = []
    for alpha in (2.0, 8.0):
        for i, x0 in enumerate(reference_x0):
            for seed in range(4):
                cfg = make_episode(reference_config, x0, alpha=alpha, seed=100 * i + seed,
                                   attack_scales=(0.25, 0.5, 0.75, 1.0), known_model_attack=True)
                results.append((alpha, run_episode(cfg, reference_family)))
    return results


def test_full_scale_guess_flags_nothing(attacked_episodes):
    for _, result in attacked_episodes:
        assert result.attacker_flags['reach_100'] == []
        assert result.attacker_decryptions['reach_100'] == (0, 0)


def test_known_model_replay_matches_receiver(attacked_episodes):
    decoded = [r for _, r in attacked_episodes if r.decoded_bits]
    assert decoded
    assert pooled_accuracy((r.attacker_matches['known_dc'], r.decoded_bits) for r in decoded) == 1.0
    for r in decoded:
        assert r.attacker_flags['known_dc'] == r.key_event_steps
        assert r.attacker_decryptions['known_dc'] == (r.decoded_bits, r.decoded_bits)


def test_key_events_are_concealed(attacked_episodes):
    assert sum(r.key_events for _, r in attacked_episodes) > 0
    assert all(r.exposed_key_events == 0 for _, r in attacked_episodes)


def test_nested_guesses_never_decrypt_a_wrong_bit(attacked_episodes):
    # a scaled D_e shares its centre with D_c, so a replay that flags a real key event infers the right key
    for _, r in attacked_episodes:
        for name in ('reach_025', 'reach_050', 'reach_075'):
            decrypted, correct = r.attacker_decryptions[name]
            assert decrypted == correct
            assert decrypted <= r.decoded_bits


def test_guessing_d_c_exactly_equals_knowing_it(attacked_episodes):
    for alpha, r in attacked_episodes:
        if alpha == 2.0:
            assert r.attacker_flags['reach_050'] == r.attacker_flags['known_dc']
            assert r.attacker_decryptions['reach_050'] == (r.decoded_bits, r.decoded_bits)
