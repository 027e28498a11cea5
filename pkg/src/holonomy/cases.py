"""Bundled (model, loop) cases with closed-form references.

These are the standard loops exercised by the verification suite and the
`verify` CLI job.  Fixed coordinates keep a margin of at least 0.05 pi
from every degeneracy set in (B_mu, B_lambda)/pi units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import UnsupportedError
from .models import ModelSpec, ParamPoint, berry_spin_half, map_spin_half, map_spin_threehalf
from .paths import LoopPath, berry_polygon, coordinate_loop

__all__ = ["BundledCase", "bundled_cases", "make_loop"]

PI = math.pi


@dataclass(frozen=True)
class BundledCase:
    name: str
    model: ModelSpec
    loop: LoopPath
    kind: str          # oracle loop kind


def make_loop(model: ModelSpec, kind: str, base: ParamPoint, samples: int = 1024) -> LoopPath:
    """A full-turn coordinate loop of the given kind starting at ``base``."""
    coord = kind[2:] if kind.startswith("C_") else kind
    if coord == "lambda":
        coord = "lam"
    if coord not in model.coord_names:
        raise UnsupportedError(f"{model.name} has no coordinate {coord!r}")
    start = base.get(coord)
    return coordinate_loop(base, coord, start, start + 2 * PI, samples=samples)


def bundled_cases() -> list[BundledCase]:
    cases: list[BundledCase] = []
    berry = berry_spin_half()
    b_point = ParamPoint(theta=0.0, phi=0.7, B=1.0)
    cases.append(
        BundledCase("berry_meridian", berry, make_loop(berry, "C_theta", b_point), "C_theta")
    )
    lat_point = ParamPoint(theta=1.1, phi=0.0, B=1.0)
    cases.append(
        BundledCase("berry_latitude", berry, make_loop(berry, "C_phi", lat_point), "C_phi")
    )
    triangle = berry_polygon([(0.9, 0.8), (1.5, 1.7), (0.7, 2.6)], B=1.0)
    cases.append(BundledCase("berry_triangle", berry, triangle, "polygon"))

    half = map_spin_half(q=0, p=1)
    pt = ParamPoint(mu=0.6 * PI, lam=0.55 * PI, theta=0.4 * PI, phi=0.3)
    cases.append(
        BundledCase(
            "half_meridian", half, make_loop(half, "C_theta", pt.replace(theta=0.0)), "C_theta"
        )
    )
    cases.append(
        BundledCase("half_latitude", half, make_loop(half, "C_phi", pt), "C_phi")
    )
    cases.append(
        BundledCase(
            "half_lambda_swap", half, make_loop(half, "C_lam", pt.replace(lam=0.0)), "C_lam"
        )
    )
    half_mu = map_spin_half(q=1, p=0)
    cases.append(
        BundledCase(
            "half_mu_swap", half_mu, make_loop(half_mu, "C_mu", pt.replace(mu=0.0)), "C_mu"
        )
    )

    three = map_spin_threehalf(q=1, p=1)
    pt32 = ParamPoint(mu=0.55 * PI, lam=0.6 * PI, theta=0.4 * PI, eta=0.8, chi=0.5, phi=0.9)
    cases.append(
        BundledCase(
            "threehalf_meridian", three, make_loop(three, "C_theta", pt32.replace(theta=0.0)), "C_theta"
        )
    )
    cases.append(
        BundledCase(
            "threehalf_mu", three, make_loop(three, "C_mu", pt32.replace(mu=0.0)), "C_mu"
        )
    )
    cases.append(
        BundledCase(
            "threehalf_lambda", three, make_loop(three, "C_lam", pt32.replace(lam=0.0)), "C_lam"
        )
    )
    for kind in ("C_eta", "C_phi", "C_chi"):
        coord = kind[2:]
        cases.append(
            BundledCase(
                f"threehalf_{coord}", three, make_loop(three, kind, pt32.replace(**{coord: 0.0})), kind
            )
        )
    return cases
