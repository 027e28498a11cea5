"""Closed (or open) curves in a model's parameter space.

A LoopPath maps an arc parameter t in [0, 1] to parameter points and is
defined for all real t so that frame continuation can step slightly past
the endpoints when forming centered differences.  Coordinates are never
reduced mod 2pi: a coordinate loop ends at start + period, which is how
the multiple-valuedness of frames enters the bookkeeping.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import PreconditionError
from .models import ParamPoint, stack_coords

__all__ = ["LoopPath", "coordinate_loop", "point_loop", "berry_polygon"]

TWO_PI = 2.0 * math.pi


class LoopPath:
    """A parameterized curve t -> ParamPoint with a closedness flag."""

    def __init__(
        self,
        kind: str,
        point_fn: Callable[[float], ParamPoint],
        closed: bool = True,
        samples: int = 1024,
        describe: dict | None = None,
    ):
        self.kind = kind
        self._fn = point_fn
        self.closed = closed
        self.samples = int(samples)
        self.describe = describe or {}

    def point_at(self, t: float) -> ParamPoint:
        return self._fn(float(t))

    def sample(self, n: int) -> list[ParamPoint]:
        """n+1 points at t = l/n, l = 0..n (both endpoints included)."""
        if n < 1:
            raise PreconditionError("need at least one segment")
        return [self._fn(l / n) for l in range(n + 1)]

    def coords(self, n: int, pad: int = 0) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        """Coordinate arrays on the t-grid l/n, l = -pad..n+pad."""
        ts = np.arange(-pad, n + pad + 1) / n
        pts = [self._fn(t) for t in ts]
        return ts, stack_coords(pts)

    @property
    def start(self) -> ParamPoint:
        return self._fn(0.0)

    def __repr__(self) -> str:
        return f"LoopPath({self.kind!r}, closed={self.closed})"


def coordinate_loop(
    base: ParamPoint,
    coord: str,
    start: float = 0.0,
    end: float = TWO_PI,
    closed: bool = True,
    samples: int = 1024,
) -> LoopPath:
    """Drive one coordinate linearly from start to end, others fixed.

    The linear law extends to all real t, so padding steps continue the
    sweep past the nominal endpoints.
    """

    def fn(t: float) -> ParamPoint:
        return base.replace(**{coord: start + (end - start) * t})

    return LoopPath(
        kind=f"C_{coord}",
        point_fn=fn,
        closed=closed,
        samples=samples,
        describe={"coord": coord, "start": start, "end": end},
    )


def point_loop(base: ParamPoint, samples: int = 16) -> LoopPath:
    """The trivial loop: a single point repeated."""
    return LoopPath("point", lambda t: base, closed=True, samples=samples)


def _sphere_vec(theta: float, phi: float) -> np.ndarray:
    return np.array(
        [math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)]
    )


def _slerp(u: np.ndarray, v: np.ndarray, f: float) -> np.ndarray:
    dot = float(np.clip(np.dot(u, v), -1.0, 1.0))
    omega = math.acos(dot)
    if omega < 1e-12:
        w = (1.0 - f) * u + f * v
        return w / np.linalg.norm(w)
    return (math.sin((1.0 - f) * omega) * u + math.sin(f * omega) * v) / math.sin(omega)


def berry_polygon(
    vertices: list[tuple[float, float]], B: float = 1.0, samples: int = 1024
) -> LoopPath:
    """Closed geodesic polygon on the Berry sphere, vertices as (theta, phi).

    Edges are great-circle arcs; the arc parameter is proportional to arc
    length.  Consecutive vertices must span less than pi in azimuth so the
    azimuth can be continued unambiguously along each edge.
    """
    if len(vertices) < 3:
        raise PreconditionError("a polygon needs at least three vertices")
    vecs = [_sphere_vec(th, ph) for th, ph in vertices]
    # continued azimuths: each vertex azimuth picked nearest the previous one
    azim = [float(vertices[0][1])]
    for th, ph in vertices[1:]:
        azim.append(ph + TWO_PI * round((azim[-1] - ph) / TWO_PI))
    closing = vertices[0][1] + TWO_PI * round((azim[-1] - vertices[0][1]) / TWO_PI)
    azim.append(closing)
    vecs.append(vecs[0])
    arcs = [
        math.acos(float(np.clip(np.dot(vecs[i], vecs[i + 1]), -1.0, 1.0)))
        for i in range(len(vertices))
    ]
    total = sum(arcs)
    if total <= 0:
        raise PreconditionError("polygon has zero perimeter")
    cuts = np.concatenate([[0.0], np.cumsum(arcs)]) / total

    def fn(t: float) -> ParamPoint:
        t = t % 1.0
        seg = min(int(np.searchsorted(cuts, t, side="right")) - 1, len(arcs) - 1)
        seg = max(seg, 0)
        f = (t - cuts[seg]) / (cuts[seg + 1] - cuts[seg])
        w = _slerp(vecs[seg], vecs[seg + 1], f)
        theta = math.acos(float(np.clip(w[2], -1.0, 1.0)))
        phi_raw = math.atan2(w[1], w[0])
        phi_ref = azim[seg] + f * (azim[seg + 1] - azim[seg])
        phi = phi_raw + TWO_PI * round((phi_ref - phi_raw) / TWO_PI)
        return ParamPoint(theta=theta, phi=phi, B=B)

    return LoopPath(
        "polygon",
        fn,
        closed=True,
        samples=samples,
        describe={"vertices": [tuple(map(float, v)) for v in vertices], "B": B},
    )
