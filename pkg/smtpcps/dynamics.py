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

"""Plant models: the true system, the controller's uncertain model and the eavesdropper's model."""
import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from .errors import ContractViolation, UnsupportedError
from .geometry import DEFAULT_TOL, Polytope, Tolerance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearModel:
    """Discrete-time LTI model ``x(k+1) = A x(k) + B u(k)``.

    Attributes:
        A: (n, n) state matrix.
        B: (n, m) input matrix.
        Ts: Sampling period in seconds.
    """
    A: np.ndarray
    B: np.ndarray
    Ts: float = 0.1

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.B, dtype=float)
        if b.ndim == 1:
            b = b.reshape(-1, 1)
        if a.shape[0] != a.shape[1] or b.shape[0] != a.shape[0]:
            raise ContractViolation(f'incompatible model shapes A{a.shape} B{b.shape}')
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ContractViolation('model matrices must be finite')
        if not self.Ts > 0:
            raise ContractViolation(f'sampling period must be positive, got {self.Ts}')
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, 'A', a)
        object.__setattr__(self, 'B', b)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def nominal_next(self, x, u) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        u = np.asarray(u, dtype=float).reshape(-1)
        if x.shape[0] != self.n or u.shape[0] != self.m:
            raise ContractViolation(f'state/input dimension mismatch: {x.shape[0]}/{u.shape[0]}')
        return self.A @ x + self.B @ u


@dataclass(frozen=True)
class UncertainModel:
    """A :class:`LinearModel` with an additive disturbance set containing the origin.

    Used three times: the controller's model (``D_c``), the eavesdropper's model (``D_e``) and, through
    :class:`TrueSystem`, the plant itself.
    """
    model: LinearModel
    disturbance: Polytope

    def __post_init__(self):
        if self.disturbance.dim != self.model.n:
            raise ContractViolation('disturbance set dimension does not match the state dimension')
        if not self.disturbance.contains(np.zeros(self.model.n)):
            raise ContractViolation('disturbance set must contain the origin')

    def nominal_next(self, x, u) -> np.ndarray:
        return self.model.nominal_next(x, u)

    def reach(self, x, u) -> Polytope:
        """One-step reachable set: the disturbance set translated to the nominal successor."""
        return self.disturbance.translate(self.nominal_next(x, u))

    def in_reach(self, x_next, x, u, tol: Tolerance = DEFAULT_TOL) -> bool:
        """``x_next in reach(x, u)`` without building the translated set."""
        return self.disturbance.contains(np.asarray(x_next, dtype=float) - self.nominal_next(x, u), tol)

    def scaled(self, alpha: float) -> 'UncertainModel':
        """The same plant with the disturbance set dilated by ``alpha``."""
        return UncertainModel(self.model, self.disturbance.scale(alpha))


def in_diff(x_next, x, u0, u1, mc: UncertainModel, me: UncertainModel, tol: Tolerance = DEFAULT_TOL) -> bool:
    """Membership of ``x_next`` in the one-step reachable set-difference.

    True iff ``x_next`` lies in both eavesdropper reach sets and not in both controller reach sets. Four
    membership tests, the difference set itself is never built.
    """
    in_e = me.in_reach(x_next, x, u0, tol) and me.in_reach(x_next, x, u1, tol)
    if not in_e:
        return False
    return not (mc.in_reach(x_next, x, u0, tol) and mc.in_reach(x_next, x, u1, tol))


def check_model_chain(d_true: Polytope, d_c: Polytope, d_e: Polytope, strict: bool = True,
                      tol: Tolerance = DEFAULT_TOL) -> None:
    """Validate ``D ⊆ D_c ⊆ D_e`` (and ``D_c ≠ D_e`` when ``strict``).

    Raises:
        ContractViolation: An inclusion fails.
    """
    if not d_true.is_subset(d_c, tol):
        raise ContractViolation('true disturbance set is not contained in the controller disturbance set')
    if not d_c.is_subset(d_e, tol):
        raise ContractViolation('controller disturbance set is not contained in the eavesdropper set')
    if strict and d_e.is_subset(d_c, tol):
        raise ContractViolation('eavesdropper and controller disturbance sets coincide; no key event can occur')


@dataclass
class TrueSystem:
    """The simulated plant with its own seeded disturbance source.

    Attributes:
        model: Plant matrices.
        disturbance_true: Set ``D`` the disturbance is drawn from; sampling supports axis-aligned boxes only.
        rng: Generator owned by one episode.
    """
    model: LinearModel
    disturbance_true: Polytope
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def __post_init__(self):
        self._bounds = self.disturbance_true.as_box()

    def sample_disturbance(self) -> np.ndarray:
        """Uniform draw from the box ``D``, independent across components and calls.

        Raises:
            UnsupportedError: ``D`` is not an axis-aligned box.
        """
        if self._bounds is None:
            raise UnsupportedError('disturbance sampling is implemented for axis-aligned boxes only')
        lower, upper = self._bounds
        return self.rng.uniform(lower, upper)

    def step(self, x, u) -> Tuple[np.ndarray, np.ndarray]:
        """Advance one sample; returns the successor and the drawn disturbance."""
        d = self.sample_disturbance()
        return self.model.nominal_next(x, u) + d, d


def step_true(system: TrueSystem, x, u) -> Tuple[np.ndarray, np.ndarray]:
    return system.step(x, u)
