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

"""Set-theoretic receding-horizon control.

The offline part computes a robust positively invariant terminal set ``T_0`` and the nested family of robust
one-step controllable sets ``T_1 ... T_N``. The online part finds the smallest ``i`` with ``x in T_i`` and picks
an input that steers the state into ``T_{i-1}`` for every admissible disturbance, minimizing one of two costs.
Which cost is used encodes one bit (see :class:`SwitchingPolicy`).
"""
import hashlib
import logging
import time
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import UncertainModel
from .errors import (CacheError, ContractViolation, ErosionEmptyError, FamilyConstructionError,
                     InfeasibleStateError, InternalInconsistencyError, InvarianceCheckError, NonContractiveError)
from .geometry import DEFAULT_TOL, Polytope, Tolerance
from .utils.oplogging import TRACE
from .utils.static_funcs import make_iterable_verbose

logger = logging.getLogger(__name__)

CACHE_HEADER = 'ctrlfam v1'
_PIVOT_TOL = 1e-14


class CostId(Enum):
    """Online cost minimized over the feasible input interval."""
    MIN_DISTANCE = 'min_distance'  #: J0 = ||A x + B u||^2
    MIN_EFFORT = 'min_effort'  #: J1 = ||u||^2

    def evaluate(self, model: UncertainModel, x, u: float) -> float:
        if self is CostId.MIN_DISTANCE:
            return float(np.sum(model.nominal_next(x, u) ** 2))
        return float(u * u)


DEFAULT_BIT_COSTS: Tuple[CostId, CostId] = (CostId.MIN_DISTANCE, CostId.MIN_EFFORT)


@dataclass(frozen=True)
class TerminalGain:
    """State feedback ``u = K x`` used inside the terminal set."""
    K: np.ndarray

    def __post_init__(self):
        k = np.atleast_2d(np.asarray(self.K, dtype=float))
        k.setflags(write=False)
        object.__setattr__(self, 'K', k)

    def closed_loop(self, model: UncertainModel) -> np.ndarray:
        """``A + B K``."""
        if self.K.shape != (model.model.m, model.model.n):
            raise ContractViolation(f'gain of shape {self.K.shape} does not fit the model')
        return model.model.A + model.model.B @ self.K

    def spectral_radius(self, model: UncertainModel) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.closed_loop(model)))))

    def check(self, model: UncertainModel):
        """Raise :class:`NonContractiveError` unless ``A + B K`` is Schur stable."""
        rho = self.spectral_radius(model)
        if rho >= 1.0:
            raise NonContractiveError(f'A + BK is not Schur stable (spectral radius {rho:.6g})')

    def __call__(self, x) -> float:
        return float((self.K @ np.asarray(x, dtype=float).reshape(-1))[0])


@dataclass(frozen=True)
class ControllableFamily:
    """The offline part of the controller.

    Attributes:
        sets: ``T_0 ... T_N``, nested.
        eroded: ``T~_0 ... T~_{N-1}`` with ``T~_i = T_i ⊖ D_c``.
        gain: Terminal gain.
        input_set: Scalar input interval ``U = [-u_max, u_max]``.
        model: The controller's uncertain model.
        alpha_max: Stopping threshold the terminal set was computed with.
        build_seconds: Wall time of the offline computation (0 when loaded from a cache file).
    """
    sets: Tuple[Polytope, ...]
    eroded: Tuple[Polytope, ...]
    gain: TerminalGain
    input_set: Polytope
    model: UncertainModel
    alpha_max: float
    build_seconds: float = 0.0

    @property
    def N(self) -> int:
        return len(self.sets) - 1

    @property
    def u_max(self) -> float:
        return float(self.input_set.vertices[-1, 0])

    @property
    def u_bounds(self) -> Tuple[float, float]:
        return float(self.input_set.vertices[0, 0]), float(self.input_set.vertices[-1, 0])

    def vertex_counts(self) -> List[int]:
        return [len(t.vertices) for t in self.sets]


def mrpi(A_K, D_c: Polytope, alpha_max: float, max_iter: int = 200, tol: Tolerance = DEFAULT_TOL) -> Polytope:
    """Outer approximation of the minimal robust positively invariant set of ``x+ = A_K x + d``, ``d in D_c``.

    Finds the first ``s`` with ``A_K^s D_c ⊆ alpha D_c`` for some ``alpha <= alpha_max`` and returns
    ``(1 - alpha)^-1 (D_c ⊕ A_K D_c ⊕ ... ⊕ A_K^{s-1} D_c)``.

    Args:
        A_K: Closed-loop matrix, Schur stable.
        D_c: Disturbance set with the origin in its interior.
        alpha_max: Stopping threshold in (0, 1).
        max_iter: Cap on ``s``.
        tol: The invariance certificate is checked with ``tol.cert_eps``.

    Returns:
        The invariant set.

    Raises:
        NonContractiveError: ``s`` exceeds ``max_iter``.
        InvarianceCheckError: The result fails the invariance check; retry with a smaller ``alpha_max``.
    """
    a_k = np.atleast_2d(np.asarray(A_K, dtype=float))
    if not 0 < alpha_max < 1:
        raise ContractViolation(f'alpha_max must lie in (0, 1), got {alpha_max}')
    if D_c.is_empty or np.any(D_c.offsets <= 0):
        raise ContractViolation('the disturbance set must contain the origin in its interior')
    power = np.eye(a_k.shape[0])
    alpha = None
    s = 0
    for s in range(1, max_iter + 1):
        power = a_k @ power
        alpha = float(np.max(D_c.support_many(D_c.normals @ power) / D_c.offsets))
        if alpha <= alpha_max:
            break
    else:
        raise NonContractiveError(f'no contraction below alpha_max={alpha_max} within {max_iter} iterations')
    logger.debug('mrpi stopped at s=%d with alpha=%.6g', s, alpha)

    total = D_c
    power = np.eye(a_k.shape[0])
    for _ in range(1, s):
        power = a_k @ power
        total = total.minkowski_sum(D_c.linear_map(power, tol), tol)
    result = total.scale(1.0 / (1.0 - alpha))

    if not is_robust_invariant(result, a_k, D_c, tol):
        raise InvarianceCheckError(f'invariance check failed for alpha_max={alpha_max}; use a smaller value')
    return result


def is_robust_invariant(T: Polytope, A_K, D_c: Polytope, tol: Tolerance = DEFAULT_TOL) -> bool:
    """``A_K T ⊕ D_c ⊆ T`` within ``tol.cert_eps``."""
    image = T.linear_map(A_K, tol).minkowski_sum(D_c, tol)
    return image.is_subset(T, tol.certificate)


def erode(T_prev: Polytope, disturbance: Polytope, tol: Tolerance = DEFAULT_TOL) -> Polytope:
    """``T_prev ⊖ D_c``; raises :class:`ErosionEmptyError` when nothing is left."""
    eroded = T_prev.pontryagin_diff(disturbance, tol)
    if eroded.is_empty:
        raise ErosionEmptyError('target set is too small relative to the disturbance set')
    return eroded


def _preimage_of_eroded(eroded: Polytope, mc: UncertainModel, U: Polytope, tol: Tolerance) -> Polytope:
    pushed = eroded.minkowski_sum(U.linear_map(-mc.model.B, tol), tol)
    return pushed.linear_preimage(mc.model.A, tol)


def one_step_controllable(T_prev: Polytope, mc: UncertainModel, U: Polytope, tol: Tolerance = DEFAULT_TOL) -> Polytope:
    """Robust one-step controllable set: states ``x`` with some ``u in U`` such that ``A x + B u + d in T_prev``
    for every ``d in D_c``."""
    if T_prev.is_empty:
        raise ContractViolation('target set is empty')
    return _preimage_of_eroded(erode(T_prev, mc.disturbance, tol), mc, U, tol)


def build_family(mc: UncertainModel, gain: TerminalGain, U: Polytope, N: int, alpha_max: float = 0.05,
                 tol: Tolerance = DEFAULT_TOL, verbose: int = 0) -> ControllableFamily:
    """Compute ``T_0 ... T_N`` and verify the family certificates.

    Raises:
        FamilyConstructionError: Nesting or input admissibility fails.
    """
    if N < 1:
        raise ContractViolation(f'N must be at least 1, got {N}')
    if U.dim != 1 or U.is_empty:
        raise ContractViolation('the input set must be a non-empty interval')
    gain.check(mc)
    start = time.time()
    a_k = gain.closed_loop(mc)
    sets = [mrpi(a_k, mc.disturbance, alpha_max, tol=tol)]
    if not _admissible(sets[0], gain, U, tol):
        raise FamilyConstructionError('terminal gain violates the input bounds on T_0')
    eroded = []
    for i in make_iterable_verbose(range(1, N + 1), verbose, desc='Controllable sets'):
        eroded.append(erode(sets[-1], mc.disturbance, tol))
        sets.append(_preimage_of_eroded(eroded[-1], mc, U, tol))
        if not sets[i - 1].is_subset(sets[i], tol.certificate):
            raise FamilyConstructionError(f'T_{i - 1} is not contained in T_{i}')
    family = ControllableFamily(sets=tuple(sets), eroded=tuple(eroded), gain=gain, input_set=U, model=mc,
                                alpha_max=alpha_max, build_seconds=time.time() - start)
    logger.info('Built controllable family: N=%d, |V(T_0)|=%d, |V(T_N)|=%d, %.2fs', N, len(sets[0].vertices),
                len(sets[-1].vertices), family.build_seconds)
    return family


def _admissible(T0: Polytope, gain: TerminalGain, U: Polytope, tol: Tolerance) -> bool:
    lo, hi = U.vertices[0, 0], U.vertices[-1, 0]
    k = gain.K[0]
    return T0.support(k) <= hi + tol.cert_eps and -T0.support(-k) >= lo - tol.cert_eps


def failed_nesting(fam: ControllableFamily, tol: Tolerance = DEFAULT_TOL) -> List[int]:
    """Indices ``i`` with ``T_{i-1} ⊄ T_i``."""
    return [i for i in range(1, len(fam.sets)) if not fam.sets[i - 1].is_subset(fam.sets[i], tol.certificate)]


def verify_family(fam: ControllableFamily, tol: Tolerance = DEFAULT_TOL) -> Dict[str, bool]:
    """Re-check terminal invariance, input admissibility and nesting on a built or loaded family."""
    return {'terminal_invariance': is_robust_invariant(fam.sets[0], fam.gain.closed_loop(fam.model),
                                                       fam.model.disturbance, tol),
            'input_admissibility': _admissible(fam.sets[0], fam.gain, fam.input_set, tol),
            'nesting': not failed_nesting(fam, tol)}


def set_index(x, fam: ControllableFamily, tol: Tolerance = DEFAULT_TOL) -> int:
    """Smallest ``i`` with ``x in T_i`` by binary search over the nested family.

    Raises:
        InfeasibleStateError: ``x`` lies outside ``T_N``.
    """
    sets = fam.sets
    if not sets[-1].contains(x, tol):
        raise InfeasibleStateError(f'state {np.asarray(x).tolist()} is outside the controllable region T_{fam.N}')
    lo, hi = 0, fam.N
    while lo < hi:
        mid = (lo + hi) // 2
        if sets[mid].contains(x, tol):
            hi = mid
        else:
            lo = mid + 1
    if logger.isEnabledFor(TRACE):
        linear = next(i for i, t in enumerate(sets) if t.contains(x, tol))
        if linear != lo:
            raise InternalInconsistencyError(f'binary search index {lo} differs from linear scan index {linear}')
    return lo


def feasible_interval(x, fam: ControllableFamily, index: int,
                      tol: Tolerance = DEFAULT_TOL) -> Tuple[float, float]:
    """Inputs ``u in U`` with ``A x + B u in T~_{index-1}``; ``lo > hi`` means empty."""
    target = fam.eroded[index - 1]
    model = fam.model.model
    x = np.asarray(x, dtype=float).reshape(-1)
    coeff = target.normals @ model.B[:, 0]
    rhs = target.offsets - target.normals @ (model.A @ x)
    lo, hi = fam.u_bounds
    upper = coeff > _PIVOT_TOL
    lower = coeff < -_PIVOT_TOL
    if np.any(upper):
        hi = min(hi, float(np.min(rhs[upper] / coeff[upper])))
    if np.any(lower):
        lo = max(lo, float(np.max(rhs[lower] / coeff[lower])))
    flat = ~(upper | lower)
    if np.any(rhs[flat] < -tol.cert_eps):
        return float('inf'), float('-inf')
    return lo, hi


def unconstrained_minimizer(x, model: UncertainModel, cost: CostId) -> float:
    if cost is CostId.MIN_EFFORT:
        return 0.0
    b = model.model.B[:, 0]
    return float(-(b @ (model.model.A @ np.asarray(x, dtype=float).reshape(-1))) / (b @ b))


def solve_control(x, fam: ControllableFamily, cost: CostId, tol: Tolerance = DEFAULT_TOL,
                  index: Optional[int] = None) -> float:
    """Online control law.

    Inside ``T_0`` the terminal gain is applied. Otherwise the scalar quadratic cost is minimized in closed form
    and clamped to the interval of inputs that keep ``A x + B u`` in ``T~_{i-1}``.

    Raises:
        InfeasibleStateError: ``x`` lies outside ``T_N``.
        InternalInconsistencyError: The feasible interval is empty although ``x in T_i``.
    """
    if index is None:
        index = set_index(x, fam, tol)
    lo_u, hi_u = fam.u_bounds
    if index == 0:
        return float(np.clip(fam.gain(x), lo_u, hi_u))
    lo, hi = feasible_interval(x, fam, index, tol)
    if lo > hi:
        if lo - hi > tol.cert_eps:
            raise InternalInconsistencyError(f'empty input interval [{lo:.6g}, {hi:.6g}] at index {index}')
        return 0.5 * (lo + hi)
    return float(np.clip(unconstrained_minimizer(x, fam.model, cost), lo, hi))


def phi(x, bit: int, fam: ControllableFamily, bit_costs: Sequence[CostId] = DEFAULT_BIT_COSTS,
        tol: Tolerance = DEFAULT_TOL) -> float:
    """Switching policy: the input the sender offers for ``bit``."""
    return solve_control(x, fam, bit_costs[bit], tol)


class SwitchingPolicy:
    """Both candidate inputs for a state with a single set-index lookup.

    Args:
        family: Offline controller data.
        bit_costs: Cost used for bit 0 and bit 1.
        tol: Membership tolerance.
    """
    __slots__ = 'family', 'bit_costs', 'tol'

    def __init__(self, family: ControllableFamily, bit_costs: Sequence[CostId] = DEFAULT_BIT_COSTS,
                 tol: Tolerance = DEFAULT_TOL):
        if len(bit_costs) != 2:
            raise ContractViolation('exactly one cost per bit value is required')
        self.family = family
        self.bit_costs = tuple(bit_costs)
        self.tol = tol

    def index(self, x) -> int:
        return set_index(x, self.family, self.tol)

    def inputs(self, x) -> Tuple[float, float]:
        index = self.index(x)
        u0, u1 = (solve_control(x, self.family, cost, self.tol, index=index) for cost in self.bit_costs)
        return u0, u1

    def __call__(self, x, bit: int) -> float:
        return solve_control(x, self.family, self.bit_costs[bit], self.tol)


def _fmt(values) -> str:
    return ' '.join(f'{float(v):.17g}' for v in np.asarray(values).reshape(-1))


def family_lines(fam: ControllableFamily) -> List[str]:
    lines = [f'{CACHE_HEADER} N={fam.N} umax={fam.u_max:.17g} alphamax={fam.alpha_max:.17g}',
             f'K {_fmt(fam.gain.K)}']
    for i, t in enumerate(fam.sets):
        lines.extend(t.to_lines())
        if i < fam.N:
            lines.extend(fam.eroded[i].to_lines())
    return lines


def save_family(fam: ControllableFamily, path: str) -> str:
    """Write the ``ctrlfam v1`` cache file and return its checksum."""
    body = '\n'.join(family_lines(fam)) + '\n'
    digest = hashlib.sha256(body.encode('utf-8')).hexdigest()
    with open(path, 'w', encoding='utf-8') as f:
        f.write(body)
        f.write(f'sha256 {digest}\n')
    logger.info('Saved controllable family (N=%d) to %s', fam.N, path)
    return digest


def load_family(path: str, mc: UncertainModel) -> ControllableFamily:
    """Read a ``ctrlfam v1`` cache file written by :func:`save_family`.

    The sets are restored bit-exactly; ``mc`` supplies the model the family was built for.

    Raises:
        CacheError: The checksum does not match or the file is malformed.
    """
    with open(path, 'r', encoding='utf-8') as f:
        text = f.read()
    body, sep, trailer = text.rstrip('\n').rpartition('\n')
    if not sep or not trailer.startswith('sha256 '):
        raise CacheError(f'{path}: missing checksum line')
    body += '\n'
    if hashlib.sha256(body.encode('utf-8')).hexdigest() != trailer.split()[1]:
        raise CacheError(f'{path}: checksum mismatch, the cache file was modified')
    lines = body.splitlines()
    try:
        header = lines[0].split()
        if ' '.join(header[:2]) != CACHE_HEADER:
            raise CacheError(f'{path}: not a {CACHE_HEADER} file')
        fields = dict(item.split('=', 1) for item in header[2:])
        n, u_max, alpha_max = int(fields['N']), float(fields['umax']), float(fields['alphamax'])
        k_row = lines[1].split()
        if k_row[0] != 'K':
            raise CacheError(f'{path}: expected the gain row on line 2')
        gain = TerminalGain(np.array(k_row[1:], dtype=float).reshape(1, -1))
        sets, eroded = [], []
        pos = 2
        for i in range(n + 1):
            t, pos = Polytope.from_lines(lines, pos)
            sets.append(t)
            if i < n:
                t, pos = Polytope.from_lines(lines, pos)
                eroded.append(t)
    except (KeyError, IndexError, ValueError) as e:
        if isinstance(e, CacheError):
            raise
        raise CacheError(f'{path}: malformed cache file ({e})') from e
    if pos != len(lines):
        raise CacheError(f'{path}: trailing content after T_{n}')
    logger.info('Loaded controllable family (N=%d) from %s', n, path)
    return ControllableFamily(sets=tuple(sets), eroded=tuple(eroded), gain=gain,
                              input_set=Polytope.interval(-u_max, u_max), model=mc, alpha_max=alpha_max)


def check_family_matches(fam: ControllableFamily, gain: TerminalGain, U: Polytope, N: int, alpha_max: float,
                         tol: Tolerance = DEFAULT_TOL):
    """Confirm that a loaded family was built for this configuration.

    The scalar settings are compared directly. ``D_c`` is checked by eroding the stored ``T_0`` again, the plant
    matrices by recomputing ``T_1`` from the stored ``T~_0``.

    Raises:
        CacheError: Any setting differs.
    """
    differs = []
    if fam.N != N:
        differs.append(f'N={fam.N} (configured {N})')
    if not np.isclose(fam.u_max, U.vertices[-1, 0]):
        differs.append(f'umax={fam.u_max} (configured {U.vertices[-1, 0]})')
    if not np.isclose(fam.alpha_max, alpha_max):
        differs.append(f'alphamax={fam.alpha_max} (configured {alpha_max})')
    if fam.gain.K.shape != gain.K.shape or not np.allclose(fam.gain.K, gain.K):
        differs.append(f'K={fam.gain.K.ravel().tolist()} (configured {gain.K.ravel().tolist()})')
    if not differs:
        try:
            if not erode(fam.sets[0], fam.model.disturbance, tol).same_vertices(fam.eroded[0], tol.cert_eps):
                differs.append('T_0 eroded by the configured D_c differs from the stored T~_0')
            elif not _preimage_of_eroded(fam.eroded[0], fam.model, U, tol).same_vertices(fam.sets[1], tol.cert_eps):
                differs.append('T_1 recomputed with the configured A and B differs from the stored T_1')
        except ErosionEmptyError:
            differs.append('the configured D_c does not fit into the stored T_0')
    if differs:
        raise CacheError('cache was built for another configuration: ' + '; '.join(differs))
