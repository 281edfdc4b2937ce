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

"""Convex polytopes in one and two dimensions.

A :class:`Polytope` keeps both descriptions of a bounded convex set: the halfspace form
``normals @ x <= offsets`` with unit-length rows, and the vertex form (counterclockwise in 2-D).
Membership, erosion and preimages read the halfspaces; support functions, subset tests and
Minkowski sums read the vertices. Every factory returns a reduced polytope, i.e. the halfspaces
are exactly the edges of the vertex polygon.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .errors import ContractViolation, EmptySetError, UnboundedSetError, UnsupportedError

logger = logging.getLogger(__name__)

_NORM_TOL = 1e-12
_COND_MAX = 1e12

HEADER = 'polytope v1'


@dataclass(frozen=True)
class Tolerance:
    """Slack of the closed-set membership semantics.

    Attributes:
        geom_eps: Added to every halfspace offset in membership and subset tests (state units).
        cert_eps: Slack of the certificates checked on constructed sets (nesting, invariance).
    """
    geom_eps: float = 1e-9
    cert_eps: float = 1e-7

    def __post_init__(self):
        if not self.geom_eps > 0:
            raise ContractViolation(f'geom_eps must be positive, got {self.geom_eps}')
        if not self.cert_eps > 0:
            raise ContractViolation(f'cert_eps must be positive, got {self.cert_eps}')

    @property
    def certificate(self) -> 'Tolerance':
        """The same tolerance with ``geom_eps`` widened to ``cert_eps``."""
        return Tolerance(geom_eps=max(self.geom_eps, self.cert_eps), cert_eps=self.cert_eps)


DEFAULT_TOL = Tolerance()


def _as_points(points, dim: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if dim is None or arr.size == dim else arr.reshape(-1, dim)
    if arr.ndim != 2 or (dim is not None and arr.shape[1] != dim):
        raise ContractViolation(f'expected points of dimension {dim}, got shape {np.shape(points)}')
    return arr


def _check_supported(dim: int):
    if dim not in (1, 2):
        raise UnsupportedError(f'polytopes of dimension {dim} are not supported (1-D and 2-D only)')


def _canonical_start(vertices: np.ndarray) -> np.ndarray:
    """Rotate a cyclic vertex list so that it starts at the lexicographically smallest vertex."""
    start = np.lexsort((vertices[:, 1], vertices[:, 0]))[0]
    return np.roll(vertices, -start, axis=0)


def _prune_collinear(vertices: np.ndarray, eps: float) -> np.ndarray:
    """Drop polygon vertices lying within ``eps`` of the chord joining their neighbours."""
    v = vertices
    while len(v) > 3:
        prev, nxt = np.roll(v, 1, axis=0), np.roll(v, -1, axis=0)
        chord = nxt - prev
        length = np.linalg.norm(chord, axis=1)
        rel = v - prev
        cross = np.abs(chord[:, 0] * rel[:, 1] - chord[:, 1] * rel[:, 0])
        dist = np.where(length > 0, cross / np.where(length > 0, length, 1.0), np.linalg.norm(rel, axis=1))
        worst = int(np.argmin(dist))
        if dist[worst] > eps:
            break
        v = np.delete(v, worst, axis=0)
    return v


def _segment_or_point(points: np.ndarray, direction: np.ndarray, eps: float) -> np.ndarray:
    proj = points @ direction
    lo, hi = int(np.argmin(proj)), int(np.argmax(proj))
    if proj[hi] - proj[lo] <= eps:
        return points[lo:lo + 1].copy()
    return points[[lo, hi]].copy()


def hull_vertices(points, eps: float = DEFAULT_TOL.geom_eps) -> np.ndarray:
    """Extreme points of a finite point set.

    Args:
        points: Array of shape (k, n) with n in {1, 2}.
        eps: Points closer than this to a hull edge are not kept as vertices.

    Returns:
        The ordered vertices: ``[lo, hi]`` in 1-D, a counterclockwise polygon starting at the
        lexicographically smallest vertex in 2-D, two endpoints for a segment, one row for a point.
    """
    pts = _as_points(points)
    dim = pts.shape[1]
    _check_supported(dim)
    if len(pts) == 0:
        return pts
    if dim == 1:
        return _segment_or_point(pts, np.ones(1), eps)
    center = pts.mean(axis=0)
    centered = pts - center
    if np.abs(centered).max() <= eps:
        return pts[:1].copy()
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    if len(vt) < 2 or np.abs(centered @ vt[1]).max() <= eps:
        return _canonical_order_segment(_segment_or_point(pts, vt[0], eps))
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return _canonical_order_segment(_segment_or_point(pts, vt[0], eps))
    # qhull lists 2-D hull vertices counterclockwise
    ordered = _prune_collinear(pts[hull.vertices], eps)
    return _canonical_start(ordered)


def _canonical_order_segment(v: np.ndarray) -> np.ndarray:
    if len(v) == 2 and tuple(v[1]) < tuple(v[0]):
        return v[::-1].copy()
    return v


def facets_of(vertices: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Unit-normal halfspace description of the hull of ordered vertices (output of :func:`hull_vertices`)."""
    k, dim = vertices.shape
    if dim == 1:
        lo, hi = vertices[0, 0], vertices[-1, 0]
        return np.array([[1.0], [-1.0]]), np.array([hi, -lo])
    if k == 1:
        x, y = vertices[0]
        return np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]), np.array([x, y, -x, -y])
    if k == 2:
        p0, p1 = vertices
        d = (p1 - p0) / np.linalg.norm(p1 - p0)
        n = np.array([d[1], -d[0]])
        normals = np.array([n, -n, d, -d])
        offsets = np.array([n @ p0, -(n @ p0), d @ p1, -(d @ p0)])
        return normals, offsets
    edges = np.roll(vertices, -1, axis=0) - vertices
    normals = np.column_stack([edges[:, 1], -edges[:, 0]])
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    offsets = np.einsum('ij,ij->i', normals, vertices)
    return normals, offsets


def _normalize_rows(normals: np.ndarray, offsets: np.ndarray, eps: float) -> Tuple[np.ndarray, np.ndarray, bool]:
    """Scale rows to unit length and drop vanishing ones; the flag reports an infeasible vanishing row."""
    norms = np.linalg.norm(normals, axis=1)
    zero = norms <= _NORM_TOL
    infeasible = bool(np.any(offsets[zero] < -eps))
    keep = ~zero
    return normals[keep] / norms[keep, None], offsets[keep] / norms[keep], infeasible


def check_bounded(normals: np.ndarray):
    """Raise :class:`UnboundedSetError` unless the row directions positively span the space."""
    dim = normals.shape[1]
    _check_supported(dim)
    if dim == 1:
        if not (np.any(normals[:, 0] > 0) and np.any(normals[:, 0] < 0)):
            raise UnboundedSetError('interval is unbounded on one side')
        return
    if len(normals) < 3:
        raise UnboundedSetError('fewer than three halfspaces cannot bound a planar set')
    angles = np.sort(np.arctan2(normals[:, 1], normals[:, 0]))
    gaps = np.diff(np.append(angles, angles[0] + 2 * np.pi))
    if gaps.max() >= np.pi - 1e-12:
        raise UnboundedSetError('halfspace normals leave an open direction; support is infinite there')


def chebyshev_ball(normals: np.ndarray, offsets: np.ndarray) -> Tuple[np.ndarray, float]:
    """Centre and radius of the largest ball inside ``normals @ x <= offsets`` (unit rows).

    The radius is negative when the system is infeasible.
    """
    n = normals.shape[1]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([normals, np.ones((len(normals), 1))])
    res = linprog(c, A_ub=a_ub, b_ub=offsets, bounds=[(None, None)] * (n + 1), method='highs')
    if res.status == 3:
        raise UnboundedSetError('Chebyshev problem is unbounded')
    if res.status != 0:
        raise RuntimeError(f'Chebyshev centre LP failed: {res.message}')
    return res.x[:n], float(res.x[-1])


def _flat_extremes(normals: np.ndarray, offsets: np.ndarray, eps: float) -> np.ndarray:
    """Extreme points of a (nearly) flat planar set, found by LPs along eight directions."""
    points = []
    for angle in np.arange(8) * np.pi / 4:
        direction = np.array([np.cos(angle), np.sin(angle)])
        res = linprog(-direction, A_ub=normals, b_ub=offsets + eps, bounds=[(None, None)] * 2, method='highs')
        if res.status == 0:
            points.append(res.x)
    return np.array(points)


def vertices_of(normals: np.ndarray, offsets: np.ndarray, eps: float) -> Optional[np.ndarray]:
    """Enumerate the vertices of ``normals @ x <= offsets`` (unit rows); ``None`` when empty."""
    dim = normals.shape[1]
    check_bounded(normals)
    if dim == 1:
        pos = normals[:, 0] > 0
        hi = np.min(offsets[pos] / normals[pos, 0])
        lo = np.max(offsets[~pos] / normals[~pos, 0])
        if lo > hi + eps:
            return None
        if lo > hi:
            lo = hi = 0.5 * (lo + hi)
        return hull_vertices(np.array([[lo], [hi]]), eps)
    center, radius = chebyshev_ball(normals, offsets)
    if radius < -eps:
        return None
    if radius <= eps:
        points = _flat_extremes(normals, offsets, eps)
        return hull_vertices(points, eps) if len(points) else None
    halfspaces = np.hstack([normals, -offsets[:, None]])
    try:
        intersections = HalfspaceIntersection(halfspaces, center).intersections
    except QhullError:
        logger.debug('qhull failed on a thin set (radius %.3g), using LP extremes', radius)
        intersections = _flat_extremes(normals, offsets, eps)
    return hull_vertices(intersections, eps)


class Polytope:
    """A bounded convex polytope with dual halfspace / vertex description.

    Instances are immutable. Use the factories (:meth:`from_vertices`, :meth:`from_halfspaces`,
    :meth:`box`, :meth:`interval`, :meth:`singleton`, :meth:`empty`) rather than the constructor.

    Attributes:
        normals: (m, n) unit-length row directions.
        offsets: (m,) row bounds.
        vertices: (k, n) ordered vertices; k = 0 marks the empty set.
    """
    __slots__ = '_normals', '_offsets', '_vertices'

    def __init__(self, normals: np.ndarray, offsets: np.ndarray, vertices: np.ndarray):
        self._normals = np.array(normals, dtype=float).reshape(-1, vertices.shape[1])
        self._offsets = np.array(offsets, dtype=float).reshape(-1)
        self._vertices = np.array(vertices, dtype=float)
        for arr in (self._normals, self._offsets, self._vertices):
            arr.setflags(write=False)

    # ------------------------------------------------------------------ factories
    @classmethod
    def empty(cls, dim: int) -> 'Polytope':
        _check_supported(dim)
        return cls(np.zeros((0, dim)), np.zeros(0), np.zeros((0, dim)))

    @classmethod
    def from_vertices(cls, points, tol: Tolerance = DEFAULT_TOL, dim: Optional[int] = None) -> 'Polytope':
        """Convex hull of a finite point set."""
        pts = _as_points(points, dim)
        if len(pts) == 0:
            return cls.empty(pts.shape[1] if dim is None else dim)
        vertices = hull_vertices(pts, tol.geom_eps)
        normals, offsets = facets_of(vertices)
        return cls(normals, offsets, vertices)

    @classmethod
    def from_halfspaces(cls, normals, offsets, tol: Tolerance = DEFAULT_TOL) -> 'Polytope':
        """The set ``{x : normals @ x <= offsets}``, reduced.

        Raises:
            UnboundedSetError: The rows do not bound the set.
        """
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        offsets = np.asarray(offsets, dtype=float).reshape(-1)
        if len(normals) != len(offsets):
            raise ContractViolation(f'{len(normals)} normals but {len(offsets)} offsets')
        dim = normals.shape[1]
        normals, offsets, infeasible = _normalize_rows(normals, offsets, tol.geom_eps)
        if infeasible:
            return cls.empty(dim)
        vertices = vertices_of(normals, offsets, tol.geom_eps)
        if vertices is None:
            return cls.empty(dim)
        return cls.from_vertices(vertices, tol)

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> 'Polytope':
        """Axis-aligned box ``lower <= x <= upper``."""
        lower = np.asarray(lower, dtype=float).reshape(-1)
        upper = np.asarray(upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape or np.any(lower > upper):
            raise ContractViolation(f'invalid box bounds {lower} / {upper}')
        corners = np.array(list(itertools.product(*zip(lower, upper))))
        return cls.from_vertices(corners)

    @classmethod
    def symmetric_box(cls, bound: float, dim: int = 2) -> 'Polytope':
        """The box ``[-bound, bound]^dim``."""
        return cls.box([-bound] * dim, [bound] * dim)

    @classmethod
    def interval(cls, lo: float, hi: float) -> 'Polytope':
        return cls.box([lo], [hi])

    @classmethod
    def singleton(cls, point: Sequence[float]) -> 'Polytope':
        return cls.from_vertices(np.asarray(point, dtype=float).reshape(1, -1))

    # ------------------------------------------------------------------ accessors
    @property
    def dim(self) -> int:
        return self._vertices.shape[1]

    @property
    def normals(self) -> np.ndarray:
        return self._normals

    @property
    def offsets(self) -> np.ndarray:
        return self._offsets

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    @property
    def is_empty(self) -> bool:
        return len(self._vertices) == 0

    def _point(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=float).reshape(-1)
        if arr.shape[0] != self.dim:
            raise ContractViolation(f'point of dimension {arr.shape[0]} tested against a {self.dim}-D polytope')
        return arr

    def _same_dim(self, other: 'Polytope'):
        if other.dim != self.dim:
            raise ContractViolation(f'dimension mismatch: {self.dim} vs {other.dim}')

    # ------------------------------------------------------------------ queries
    def contains(self, x, tol: Tolerance = DEFAULT_TOL) -> bool:
        """Closed-set membership with ``geom_eps`` slack; always False for the empty set."""
        x = self._point(x)
        if self.is_empty:
            return False
        return bool(np.all(self._normals @ x <= self._offsets + tol.geom_eps))

    def support(self, direction) -> float:
        """``max a @ x`` over the set.

        Raises:
            EmptySetError: The polytope is empty.
        """
        a = self._point(direction)
        if self.is_empty:
            raise EmptySetError('support of the empty set')
        return float(np.max(self._vertices @ a))

    def support_many(self, directions) -> np.ndarray:
        """Support values for each row of ``directions``."""
        d = _as_points(directions, self.dim)
        if self.is_empty:
            raise EmptySetError('support of the empty set')
        return np.max(d @ self._vertices.T, axis=1)

    def is_subset(self, other: 'Polytope', tol: Tolerance = DEFAULT_TOL) -> bool:
        """Every vertex of ``self`` satisfies the halfspaces of ``other`` within ``geom_eps``."""
        self._same_dim(other)
        if self.is_empty:
            return True
        if other.is_empty:
            return False
        return bool(np.all(other._normals @ self._vertices.T <= other._offsets[:, None] + tol.geom_eps))

    def as_box(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """``(lower, upper)`` if the polytope is an axis-aligned box, else ``None``."""
        if self.is_empty:
            return None
        normals = self._normals
        axis = np.argmax(np.abs(normals), axis=1)
        if not np.all(np.abs(np.abs(normals[np.arange(len(normals)), axis]) - 1.0) <= _NORM_TOL):
            return None
        lower = np.full(self.dim, -np.inf)
        upper = np.full(self.dim, np.inf)
        for row, j in enumerate(axis):
            if normals[row, j] > 0:
                upper[j] = min(upper[j], self._offsets[row])
            else:
                lower[j] = max(lower[j], -self._offsets[row])
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            return None
        return lower, upper

    def chebyshev_center(self) -> Tuple[np.ndarray, float]:
        if self.is_empty:
            raise EmptySetError('Chebyshev centre of the empty set')
        if self.dim == 1:
            lo, hi = self._vertices[0, 0], self._vertices[-1, 0]
            return np.array([0.5 * (lo + hi)]), 0.5 * (hi - lo)
        return chebyshev_ball(self._normals, self._offsets)

    def same_vertices(self, other: 'Polytope', atol: float = 1e-12) -> bool:
        """True when both vertex lists have equal length and agree within ``atol``."""
        if self.dim != other.dim or len(self._vertices) != len(other._vertices):
            return False
        return bool(np.all(np.abs(self._vertices - other._vertices) <= atol))

    # ------------------------------------------------------------------ set arithmetic
    def minkowski_sum(self, other: 'Polytope', tol: Tolerance = DEFAULT_TOL) -> 'Polytope':
        """``self ⊕ other`` as the hull of all pairwise vertex sums."""
        self._same_dim(other)
        if self.is_empty or other.is_empty:
            return Polytope.empty(self.dim)
        sums = (self._vertices[:, None, :] + other._vertices[None, :, :]).reshape(-1, self.dim)
        return Polytope.from_vertices(sums, tol)

    def pontryagin_diff(self, other: 'Polytope', tol: Tolerance = DEFAULT_TOL) -> 'Polytope':
        """``self ⊖ other``: each offset is tightened by the support of ``other`` along its row; may be empty."""
        self._same_dim(other)
        if other.is_empty:
            raise EmptySetError('erosion by the empty set')
        if self.is_empty:
            return Polytope.empty(self.dim)
        offsets = self._offsets - other.support_many(self._normals)
        return Polytope.from_halfspaces(self._normals, offsets, tol)

    def linear_map(self, matrix, tol: Tolerance = DEFAULT_TOL) -> 'Polytope':
        """Image ``{M x : x in self}``."""
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        if m.shape[1] != self.dim:
            raise ContractViolation(f'matrix of shape {m.shape} cannot act on a {self.dim}-D polytope')
        if self.is_empty:
            return Polytope.empty(m.shape[0])
        return Polytope.from_vertices(self._vertices @ m.T, tol, dim=m.shape[0])

    def linear_preimage(self, matrix, tol: Tolerance = DEFAULT_TOL) -> 'Polytope':
        """Preimage ``{x : M x in self}``.

        Raises:
            UnboundedSetError: The preimage is unbounded (M singular along an unconstrained direction).
        """
        m = np.atleast_2d(np.asarray(matrix, dtype=float))
        if m.shape[0] != self.dim:
            raise ContractViolation(f'matrix of shape {m.shape} does not map into a {self.dim}-D space')
        if self.is_empty:
            return Polytope.empty(m.shape[1])
        normals, offsets, infeasible = _normalize_rows(self._normals @ m, self._offsets, tol.geom_eps)
        if infeasible:
            return Polytope.empty(m.shape[1])
        if m.shape[0] == m.shape[1] and np.linalg.cond(m) < _COND_MAX:
            return Polytope.from_vertices(np.linalg.solve(m, self._vertices.T).T, tol)
        check_bounded(normals)
        return Polytope.from_halfspaces(normals, offsets, tol)

    def translate(self, v) -> 'Polytope':
        v = self._point(v)
        if self.is_empty:
            return self
        return Polytope(self._normals, self._offsets + self._normals @ v, self._vertices + v)

    def scale(self, alpha: float) -> 'Polytope':
        """Dilation about the origin by ``alpha > 0``."""
        if not alpha > 0:
            raise ContractViolation(f'scale factor must be positive, got {alpha}')
        return Polytope(self._normals, self._offsets * alpha, self._vertices * alpha)

    def reduce(self, tol: Tolerance = DEFAULT_TOL) -> 'Polytope':
        """Recompute the halfspaces from the hull of the vertices."""
        if self.is_empty:
            return self
        return Polytope.from_vertices(self._vertices, tol)

    # ------------------------------------------------------------------ text form
    def to_lines(self) -> List[str]:
        """Serialize as a ``polytope v1`` block: halfspace rows, then vertex rows (17 significant digits)."""
        lines = [f'{HEADER} dim={self.dim} rows={len(self._offsets)} vertices={len(self._vertices)}']
        for n, b in zip(self._normals, self._offsets):
            lines.append(' '.join(f'{v:.17g}' for v in (*n, b)))
        for v in self._vertices:
            lines.append(' '.join(f'{c:.17g}' for c in v))
        return lines

    @classmethod
    def from_lines(cls, lines: Sequence[str], start: int = 0) -> Tuple['Polytope', int]:
        """Parse the block starting at ``lines[start]``; returns the polytope and the index after the block."""
        header = lines[start].split()
        if ' '.join(header[:2]) != HEADER:
            raise ValueError(f'expected "{HEADER}" header, got {lines[start]!r}')
        fields = dict(item.split('=', 1) for item in header[2:])
        dim, rows, nverts = int(fields['dim']), int(fields['rows']), int(fields['vertices'])
        body = [np.array(line.split(), dtype=float) for line in lines[start + 1:start + 1 + rows + nverts]]
        if len(body) != rows + nverts:
            raise ValueError('truncated polytope block')
        hs = np.array(body[:rows]).reshape(rows, dim + 1)
        vertices = np.array(body[rows:]).reshape(nverts, dim)
        return cls(hs[:, :dim], hs[:, dim], vertices), start + 1 + rows + nverts

    def __repr__(self):
        if self.is_empty:
            return f'Polytope(empty, dim={self.dim})'
        return f'Polytope(dim={self.dim}, rows={len(self._offsets)}, vertices={len(self._vertices)})'


def hull_of(polytopes: Iterable[Polytope], tol: Tolerance = DEFAULT_TOL) -> Polytope:
    """Convex hull of the union of several polytopes."""
    polytopes = [p for p in polytopes if not p.is_empty]
    if not polytopes:
        raise EmptySetError('hull of no non-empty polytopes')
    return Polytope.from_vertices(np.vstack([p.vertices for p in polytopes]), tol)
