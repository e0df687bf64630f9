"""Ordered discrete curves and the planar geometry used on them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PolylineCurve",
    "chord_arclength",
    "shoelace_area",
    "horizontal_crossings",
    "is_simple",
]


def chord_arclength(vertices, closed: bool = False) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    if len(v) == 0:
        return np.zeros(0)
    seg = np.hypot(*np.diff(v, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if closed and len(v) > 1:
        s = np.append(s, s[-1] + np.hypot(*(v[0] - v[-1])))
    return s


@dataclass
class PolylineCurve:
    """Vertices in order, with cumulative chord arclength.

    ``params`` optionally carries a source parameter per vertex (for grown
    manifolds, the position along the seed segment); refinement keeps it
    sorted.  For closed curves ``arclengths`` has one extra entry: the
    perimeter.
    """

    vertices: np.ndarray
    t: float = 0.0
    closed: bool = False
    params: np.ndarray | None = None
    arclengths: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        if self.params is not None:
            self.params = np.asarray(self.params, dtype=float)
            if self.params.shape != (len(self.vertices),):
                raise ValueError("params must have one entry per vertex")
        self.arclengths = chord_arclength(self.vertices, self.closed)

    def __len__(self):
        return len(self.vertices)

    @property
    def length(self) -> float:
        return float(self.arclengths[-1]) if len(self.arclengths) else 0.0

    @property
    def x1(self) -> np.ndarray:
        return self.vertices[:, 0]

    @property
    def x2(self) -> np.ndarray:
        return self.vertices[:, 1]

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.vertices
        if self.closed:
            return v, np.roll(v, -1, axis=0)
        return v[:-1], v[1:]

    def area(self) -> float:
        return shoelace_area(self.vertices)

    def dedup(self, tol: float = 0.0) -> "PolylineCurve":
        """Drop vertices that repeat their predecessor (within ``tol``)."""
        v = self.vertices
        if len(v) < 2:
            return self
        keep = np.ones(len(v), dtype=bool)
        keep[1:] = np.hypot(*np.diff(v, axis=0).T) > tol
        params = None if self.params is None else self.params[keep]
        return PolylineCurve(v[keep], self.t, self.closed, params)


def shoelace_area(vertices) -> float:
    """Signed area of the closed polygon through ``vertices`` (CCW positive)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    # shifted to the centroid to limit cancellation
    x = x - x.mean()
    y = y - y.mean()
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def horizontal_crossings(vertices, level: float, closed: bool = False) -> np.ndarray:
    """x1 positions where the polyline crosses the line ``x2 = level``."""
    v = np.asarray(vertices, dtype=float)
    a = v if closed else v[:-1]
    b = np.roll(v, -1, axis=0) if closed else v[1:]
    da = a[:, 1] - level
    db = b[:, 1] - level
    hit = ((da < 0) & (db >= 0)) | ((da >= 0) & (db < 0))
    frac = da[hit] / (da[hit] - db[hit])
    return a[hit, 0] + frac * (b[hit, 0] - a[hit, 0])


def is_simple(vertices, closed: bool = True) -> bool:
    """True when no two non-adjacent segments intersect."""
    from shapely.geometry import LinearRing, LineString

    v = np.asarray(vertices, dtype=float)
    geom = LinearRing(v) if closed else LineString(v)
    return bool(geom.is_simple)
