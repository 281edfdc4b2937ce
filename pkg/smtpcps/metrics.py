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

"""Quality metrics for eavesdroppers and the rate trend."""
import math
from typing import Final, Iterable, Sequence, Tuple

import numpy as np
from scipy.stats import spearmanr

from .abstracts import AbstractScorer


class BitAccuracy(AbstractScorer):
    """Fraction of correctly guessed bits.

    Attribute:
        name: name of the metric = 'Accuracy'.
    """
    __slots__ = ()

    name: Final = 'Accuracy'

    def score2(self, matches: int, total: int) -> Tuple[bool, float]:
        try:
            return True, matches / total
        except ZeroDivisionError:
            return False, float('nan')


def count_matches(guesses: Sequence[int], truth: Sequence[int]) -> int:
    return int(np.sum(np.asarray(guesses, dtype=int) == np.asarray(truth, dtype=int))) if len(truth) else 0


def pooled_accuracy(pairs: Iterable[Tuple[int, int]]) -> float:
    """Accuracy over several episodes given ``(matches, total)`` pairs."""
    matches, total = 0, 0
    for m, t in pairs:
        matches += m
        total += t
    return BitAccuracy().score2(matches, total)[1]


def rank_trend(x: Sequence[float], y: Sequence[float]) -> Tuple[float, bool]:
    """Spearman rank correlation of ``y`` against ``x``.

    Returns:
        The correlation and a flag that is True when it is undefined (constant input); the correlation is 0 then.
    """
    if len(x) < 2:
        return 0.0, True
    y = np.asarray(y, dtype=float)
    if np.all(y == y[0]) or len(set(x)) < 2:
        return 0.0, True
    rho, _ = spearmanr(x, y)
    if math.isnan(rho):
        return 0.0, True
    return float(rho), False
