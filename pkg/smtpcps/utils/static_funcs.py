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

"""Small helpers shared by the harness and the command line."""
from typing import Iterable, Sequence

import matplotlib

matplotlib.use("Agg")
from matplotlib import pyplot as plt  # noqa: E402
from tqdm import tqdm  # noqa: E402


def make_iterable_verbose(iterable_object, verbose, desc="Default", position=None, leave=True) -> Iterable:
    if verbose > 0:
        return tqdm(iterable_object, desc=desc, position=position, leave=leave)
    else:
        return iterable_object


def parse_bits(text: str) -> list:
    """``'0110'`` -> ``[0, 1, 1, 0]``; raises ``ValueError`` on any other character."""
    text = text.strip()
    if any(c not in "01" for c in text):
        raise ValueError(f"not a bit string: {text!r}")
    return [int(c) for c in text]


def bits_to_str(bits: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in bits)


def plot_rate_vs_alpha(alphas: Sequence[float], means: Sequence[float], stds: Sequence[float],
                       path: str = "rate_vs_alpha.svg", rate_bound: float = None) -> None:
    """Line chart of the mean transmission rate per eavesdropper scale, with one-std error bars."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(alphas, means, yerr=stds, marker="o", capsize=3, label="mean rate")
    if rate_bound is not None:
        ax.axhline(rate_bound, linestyle="--", color="grey", label="throughput bound")
    ax.set_xlabel("alpha (D_e = alpha * D_c)")
    ax.set_ylabel("rate (bits/s)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
