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

"""The main abstract classes."""

import logging
from abc import ABCMeta, abstractmethod
from typing import ClassVar, List, NamedTuple, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class AttackOutcome(NamedTuple):
    """Guessed message bits, the steps an attacker treated as key events and the positions it decrypted."""
    guesses: List[int]
    flagged_events: List[int]
    decrypted: Sequence[int] = ()


class AbstractAttack(metaclass=ABCMeta):
    """
    An abstract class for passive eavesdroppers.

    An attack sees only an :class:`~smtpcps.adversary.EavesdropperView` and returns one guess per transmitted
    message bit.
    """
    __slots__ = ()

    name: ClassVar[str]

    @abstractmethod
    def guess(self, view, send_steps: Sequence[int], rng: np.random.Generator) -> AttackOutcome:
        """Guess every transmitted message bit.

        Args:
            view: The wire history and the eavesdropper's own model.
            send_steps: Step whose wire bit carried each transmitted message bit, in message order. Only the
                harness knows these; an attack uses them to align its decryptions to message positions.
            rng: Attacker's random source, used wherever it has nothing better than a coin flip.

        Returns:
            One guess per entry of ``send_steps``, the flagged key-event steps and the decrypted positions.
        """
        pass


class AbstractScorer(metaclass=ABCMeta):
    """
    An abstract class for guess-quality functions.
    """
    __slots__ = ()

    name: ClassVar[str]

    @abstractmethod
    def score2(self, matches: int, total: int) -> Tuple[bool, float]:
        """Quality score for a match count.

        Args:
            matches: Correctly guessed bits.
            total: Bits compared.

        Returns:
             Tuple, first position indicating if the function could be applied, second position the quality value
                in the range 0.0--1.0.
        """
        pass
