"""Numerical check for an embedded horseshoe near the saddle at (1, 1).

A region ``A`` is drawn beside the primary unstable manifold, advected
``n`` periods, and ``P^n(A) ∩ A`` is split into connected pieces.  Pieces
that reach from the top edge of ``A`` to its bottom edge are strips; two
or more of them means ``A`` has been folded back across itself.

Region shape, in coordinates that follow the manifold
(``xi = x1 - m(x2)`` with ``m`` the manifold's ``x1`` at height ``x2``,
``y = 1 - x2``):

* left edge ``xi = -xi0``, parallel to the manifold;
* top edge along ``x2 = 1`` up to the anchor, then the diagonal ``y = xi``,
  which crosses the hyperbolic streamlines ``xi * y = const`` at right
  angles;
* bottom edge ``y = sqrt(c + xi^2)``, also orthogonal to those streamlines;
* right edge ``xi = xi_r <= delta``, pulled in until it misses the lobes.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import LineString, MultiPolygon, Polygon

from .flow import FlowParams, PhasePoint
from .integrator import IntegratorSettings, RefinementPolicy, VertexBudgetExceeded, advect_polyline
from .manifold_numeric import graph_segment, grow_unstable_manifold
from .polyline import PolylineCurve, is_simple

__all__ = [
    "GeometryFailure",
    "RegionA",
    "StripResult",
    "SweepReport",
    "build_region_A",
    "strip_count",
    "count_strips",
    "horseshoe_sweep",
]

log = logging.getLogger(__name__)

DEFAULT_DEPTH = 0.4
EDGE_POINTS = 200
TOUCH_TOL = 1e-9
# half-width used to keep sub-resolution filaments of P^n(A) connected
FILAMENT_WIDTH = 1e-6


class GeometryFailure(RuntimeError):
    pass


@dataclass
class RegionA:
    boundary: PolylineCurve
    t: float
    delta: float
    anchor: PhasePoint
    top: np.ndarray
    bottom: np.ndarray
    construction: dict = field(default_factory=dict)

    @property
    def polygon(self) -> Polygon:
        return Polygon(self.boundary.vertices)

    @property
    def area(self) -> float:
        return abs(self.boundary.area())


@dataclass(frozen=True)
class StripResult:
    n: int
    strips: int
    components: int
    area_A: float
    area_image: float
    area_overlap: float
    vertices: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SweepReport:
    delta: float
    rows: list
    max_vertices: int
    largest_n: int
    budget_error: str | None = None

    @property
    def first_n(self) -> int | None:
        for r in self.rows:
            if r.strips >= 2:
                return r.n
        return None

    @property
    def verdict(self) -> bool:
        return self.first_n is not None

    def to_dict(self) -> dict:
        return dict(
            delta=self.delta,
            max_vertices=self.max_vertices,
            largest_n=self.largest_n,
            budget_error=self.budget_error,
            verdict=self.verdict,
            first_n=self.first_n,
            rows=[r.to_dict() for r in self.rows],
        )


def _manifold_graph(curve: PolylineCurve, depth: float):
    ys, xs = graph_segment(curve, (1.0 - depth - 0.02, 1.0))
    return lambda x2: np.interp(x2, ys, xs)


def _crosses(edge: np.ndarray, curves, exclude_x1=None) -> bool:
    line = LineString(edge)
    for c in curves:
        if line.intersects(LineString(c.vertices)):
            return True
    return False


def build_region_A(
    t: float,
    delta: float,
    params: FlowParams,
    numeric_manifolds=None,
    depth: float = DEFAULT_DEPTH,
    left_offset: float | None = None,
    settings: IntegratorSettings | None = None,
    shrink_steps: int = 20,
) -> RegionA:
    """Region beside the primary unstable manifold of width ``delta``.

    Parameters
    ----------
    numeric_manifolds : sequence of PolylineCurve, optional
        The first entry is the primary unstable manifold starting at its
        anchor; any further entries are other pieces of the manifold
        (e.g. returned lobes) that the right edge has to avoid.  Grown
        here when omitted.
    depth : float
        Depth ``sqrt(c)`` of the bottom edge below ``x2 = 1`` at the manifold.
    left_offset : float, optional
        ``xi0``; defaults to ``delta / 5``.
    """
    if delta <= 0 or depth <= delta:
        raise ValueError("need 0 < delta < depth")
    xi0 = delta / 5.0 if left_offset is None else float(left_offset)
    if numeric_manifolds is None:
        numeric_manifolds = [grow_unstable_manifold(t, 1.2, params, settings)]
    primary = numeric_manifolds[0]
    anchor = PhasePoint(float(primary.vertices[0, 0]), float(primary.vertices[0, 1]))
    m = _manifold_graph(primary, depth)
    c = depth**2
    others = list(numeric_manifolds[1:])

    def to_xy(xi, y):
        y = np.asarray(y, dtype=float)
        x2 = 1.0 - y
        x1 = np.where(y == 0.0, anchor.x1 + xi, m(x2) + xi)
        return np.column_stack([x1, x2])

    xi_r = delta
    for _ in range(shrink_steps):
        yr = np.linspace(xi_r, math.sqrt(c + xi_r**2), EDGE_POINTS)
        right = to_xy(np.full_like(yr, xi_r), yr)
        if not _crosses(right, others):
            break
        xi_r *= 0.9
    else:
        raise GeometryFailure(f"right edge meets a lobe for every xi_r down to {xi_r:.3g}")

    u = np.linspace(0.0, 1.0, EDGE_POINTS)
    top_flat = to_xy(-xi0 + xi0 * u[:-1], np.zeros(EDGE_POINTS - 1))
    xi_d = xi_r * u
    top_diag = to_xy(xi_d, xi_d)
    right = to_xy(np.full(EDGE_POINTS, xi_r), np.linspace(xi_r, math.sqrt(c + xi_r**2), EDGE_POINTS))
    xi_b = xi_r - (xi_r + xi0) * u
    bottom = to_xy(xi_b, np.sqrt(c + xi_b**2))
    yl = np.linspace(math.sqrt(c + xi0**2), 0.0, EDGE_POINTS)
    left = to_xy(np.full(EDGE_POINTS, -xi0), yl)
    top = np.vstack([top_flat, top_diag])
    ring = np.vstack([top, right[1:], bottom[1:], left[1:-1]])
    # clockwise as built; store counter-clockwise
    ring = ring[::-1]
    if not is_simple(ring, closed=True):
        raise GeometryFailure("region boundary self-intersects")
    construction = dict(depth=depth, left_offset=xi0, right_offset=xi_r, delta=delta, c=c, anchor=list(anchor))
    log.info("region A built: %s", construction)
    return RegionA(PolylineCurve(ring, t, True), t, delta, anchor, top, bottom, construction)


def _polygonal(geom):
    if geom.is_empty:
        return []
    if isinstance(geom, Polygon):
        return [geom]
    if isinstance(geom, MultiPolygon):
        return list(geom.geoms)
    if hasattr(geom, "geoms"):
        out = []
        for g in geom.geoms:
            out.extend(_polygonal(g))
        return out
    return []


def _image_polygon(vertices: np.ndarray, seed: int):
    poly = Polygon(vertices)
    if poly.is_valid:
        return poly
    # thin filaments can make the traced boundary touch itself; repair and log it
    fixed = shapely.make_valid(poly)
    log.info("image polygon repaired with make_valid (seed %d)", seed)
    return shapely.unary_union(_polygonal(fixed))


def count_strips(region: RegionA, image: PolylineCurve, seed: int = 0, n: int = 0,
                 filament_width: float = FILAMENT_WIDTH) -> StripResult:
    """Connected pieces of ``image ∩ A`` touching both top and bottom edges of ``A``.

    After many periods ``P^n(A)`` contains filaments thinner than the
    chord error of its traced boundary, so the two sides of a filament may
    cross and the traced polygon falls apart into slivers.  The boundary
    inside ``A`` is therefore thickened by ``filament_width`` and merged
    with the filled polygon before splitting into components.  Thickening
    can merge neighbouring strips but never creates a traversal.
    """
    A = region.polygon
    img = _image_polygon(image.vertices, seed)
    ring = LineString(np.vstack([image.vertices, image.vertices[:1]]))
    try:
        filled = A.intersection(img)
        lines = ring.intersection(A)
    except shapely.errors.GEOSException:
        rng = np.random.default_rng(seed)
        jittered = image.vertices + 1e-12 * rng.standard_normal(image.vertices.shape)
        log.info("clipping retried with 1e-12 jitter (seed %d)", seed)
        img = _image_polygon(jittered, seed)
        filled = A.intersection(img)
        lines = LineString(np.vstack([jittered, jittered[:1]])).intersection(A)
    overlap = filled.area
    if filament_width > 0 and not lines.is_empty:
        thick = lines.buffer(filament_width, quad_segs=2).intersection(A)
        merged = shapely.unary_union([filled, thick])
    else:
        merged = filled
    pieces = _polygonal(merged)
    top = LineString(region.top)
    bottom = LineString(region.bottom)
    strips = sum(1 for q in pieces if q.distance(top) <= TOUCH_TOL and q.distance(bottom) <= TOUCH_TOL)
    return StripResult(n, strips, len(pieces), A.area, img.area, overlap, len(image))


def horseshoe_sweep(
    region: RegionA,
    n_max: int,
    params: FlowParams,
    settings: IntegratorSettings | None = None,
    refine: RefinementPolicy | None = None,
    seed: int = 0,
    stop_at: int | None = None,
) -> SweepReport:
    """Strip counts of ``P^n(A) ∩ A`` for ``n = 1 .. n_max``.

    The boundary is advected one period at a time, so each image reuses
    the previous one.  A vertex-budget overrun ends the sweep and is
    recorded in the report.  ``stop_at`` ends the sweep once that many
    strips are found.
    """
    refine = refine or RefinementPolicy()
    settings = settings or IntegratorSettings()
    T = params.period
    curve = region.boundary
    rows = []
    err = None
    for n in range(1, n_max + 1):
        try:
            curve = advect_polyline(curve, region.t + (n - 1) * T, region.t + n * T, params, settings, refine)
        except VertexBudgetExceeded as exc:
            err = str(exc)
            break
        rows.append(count_strips(region, curve, seed, n))
        if stop_at is not None and rows[-1].strips >= stop_at:
            break
    return SweepReport(region.delta, rows, refine.max_vertices, rows[-1].n if rows else 0, err)


def strip_count(
    region: RegionA,
    n: int,
    params: FlowParams,
    settings: IntegratorSettings | None = None,
    refine: RefinementPolicy | None = None,
    seed: int = 0,
) -> int:
    """Number of full top-to-bottom strips of ``P^n(A) ∩ A``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rep = horseshoe_sweep(region, n, params, settings, refine, seed)
    if rep.budget_error is not None:
        raise VertexBudgetExceeded(f"{rep.budget_error} (largest n reached: {rep.largest_n})")
    return rep.rows[-1].strips
