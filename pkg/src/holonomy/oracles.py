"""Closed-form holonomy predictions, used as ground truth for the integrator.

Everything here is assembled from elementary functions of the loop's fixed
coordinates: solid angles for the field model, the floor-function index r
for meridian loops, and the closed-form matrices for the strength-torus and
Wilczek-Zee loops.  Two conventions resolved against the integrator are
documented inline: the mirrored composition behind loops over mu, and the
axis angle entering the chi-loop blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import models
from .errors import DegeneracyError, UnsupportedError
from .models import SX, SY, SZ, ModelSpec, ParamPoint

__all__ = ["Prediction", "solid_angle", "index_r", "theta_winding", "predict"]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Prediction:
    M_expected: np.ndarray
    formula_id: str
    inputs: dict


# ---------------------------------------------------------------------------
# solid angle

def _sphere_vec(theta: float, phi: float) -> np.ndarray:
    return np.array(
        [math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)]
    )


def _triangle_excess(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
    """Signed solid angle of a spherical triangle (Van Oosterom-Strackee)."""
    num = float(np.dot(a, np.cross(b, c)))
    den = 1.0 + float(np.dot(a, b)) + float(np.dot(b, c)) + float(np.dot(c, a))
    return 2.0 * math.atan2(num, den)


def solid_angle(points) -> float:
    """Signed solid angle of a closed spherical polygon given as (theta, phi).

    Vertices are joined by geodesic arcs; the sign follows the traversal
    orientation (a latitude circle walked with increasing phi encloses the
    north cap, 2pi(1-cos theta)).  Degenerate segments are dropped; fewer
    than three distinct vertices enclose nothing.
    """
    vecs = [_sphere_vec(float(t), float(p)) for t, p in points]
    dedup: list[np.ndarray] = []
    for v in vecs:
        if not dedup or np.linalg.norm(v - dedup[-1]) > 1e-12:
            dedup.append(v)
    if len(dedup) > 1 and np.linalg.norm(dedup[0] - dedup[-1]) <= 1e-12:
        dedup.pop()
    if len(dedup) < 3:
        return 0.0
    apex = np.array([0.0, 0.0, 1.0])
    if any(np.linalg.norm(v - apex) < 1e-9 for v in dedup):
        apex = np.array([0.0, 0.0, -1.0])
        if any(np.linalg.norm(v - apex) < 1e-9 for v in dedup):
            raise UnsupportedError("polygon passes through both poles")
    total = 0.0
    for i in range(len(dedup)):
        total += _triangle_excess(apex, dedup[i], dedup[(i + 1) % len(dedup)])
    return total


# ---------------------------------------------------------------------------
# floor-function indices

def _guarded_floor(x: float, guard: float = 1e-12) -> int:
    if abs(x - round(x)) <= guard:
        raise DegeneracyError(f"index argument {x} sits on a degeneracy line")
    return math.floor(x)


def index_r(B_lam: float, B_mu: float) -> int:
    """floor((B_lam+B_mu)/pi) - floor((B_lam-B_mu)/pi); the meridian sign index."""
    return _guarded_floor((B_lam + B_mu) / math.pi) - _guarded_floor(
        (B_lam - B_mu) / math.pi
    )


def _strengths(model: ModelSpec, point: ParamPoint) -> tuple[float, float]:
    return 0.5 * (2 - model.q) * point["mu"], 0.5 * (2 - model.p) * point["lam"]


def theta_winding(model: ModelSpec, kind: str, at: ParamPoint) -> float:
    """Increment of the zenith angle over one loop, by the case analysis.

    Meridian loops wind by +-2pi or 0 according to the parity of r;
    strength loops by +-pi(2-p) (over lambda) or +-pi(2-q) (over mu, in
    the mirrored composition); the remaining coordinates leave the zenith
    untouched.
    """
    if not model.is_map:
        raise UnsupportedError("the zenith winding is defined for the map models")
    bmu, blam = _strengths(model, at)
    if kind == "C_theta":
        r = index_r(blam, bmu)
        if r % 2 == 0:
            return TWO_PI * (-1) ** (r // 2)
        return 0.0
    if kind in ("C_lam", "C_lambda"):
        k = _guarded_floor(at["mu"] * (2 - model.q) / TWO_PI)
        return (-1) ** k * math.pi * (2 - model.p)
    if kind == "C_mu":
        k = _guarded_floor(at["lam"] * (2 - model.p) / TWO_PI)
        return (-1) ** k * math.pi * (2 - model.q)
    if kind in ("C_phi", "C_eta", "C_chi"):
        return 0.0
    raise UnsupportedError(f"no zenith winding for loop kind {kind!r}")


# ---------------------------------------------------------------------------
# holonomy matrices

def _rot_block(delta_theta: float, dim: int) -> np.ndarray:
    """exp(-i/2 * g1 * delta_theta): the frame rotation of a zenith sweep."""
    c, s = math.cos(delta_theta / 2.0), math.sin(delta_theta / 2.0)
    eye = np.eye(dim // 2)
    return np.block([[c * eye, -s * eye], [s * eye, c * eye]]).astype(complex)


def _diag_phase(phase: float) -> np.ndarray:
    return np.diag([np.exp(-1j * phase), np.exp(1j * phase)])


def _blockdiag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    z = np.zeros((2, 2), dtype=complex)
    return np.block([[a, z], [z, b]])


def _su2_exp(axis_z: float, axis_x: float, angle: float) -> np.ndarray:
    """exp(-i (sigma_z axis_z + sigma_x axis_x) angle / 2) for a unit axis."""
    u = SZ * axis_z + SX * axis_x
    return np.cos(angle / 2.0) * np.eye(2) - 1j * math.sin(angle / 2.0) * u


def predict(model: ModelSpec, kind: str, at: ParamPoint, loop=None) -> Prediction:
    """The closed-form holonomy matrix of a bundled loop."""
    if model.name == "berry_spin_half":
        theta = at.get("theta")
        if kind == "C_theta":
            return Prediction(-np.eye(2, dtype=complex), "meridian_sign_flip", {})
        if kind == "C_phi":
            omega = TWO_PI * (1.0 - math.cos(theta))
            return Prediction(
                _diag_phase(omega / 2.0), "latitude_solid_angle", {"theta": theta}
            )
        if kind in ("polygon", "generic"):
            if loop is None:
                raise UnsupportedError("a generic loop prediction needs the loop")
            verts = loop.describe.get("vertices")
            if verts is None:
                verts = [
                    (pt["theta"], pt["phi"]) for pt in loop.sample(4096)
                ]
            omega = solid_angle(verts)
            return Prediction(
                _diag_phase(omega / 2.0), "solid_angle_law", {"solid_angle": omega}
            )
        raise UnsupportedError(f"no closed form for berry loop {kind!r}")

    if not model.is_map:
        raise UnsupportedError(f"unknown model {model.name!r}")
    bmu, blam = _strengths(model, at)
    dim = model.dim
    if kind == "C_theta":
        r = index_r(blam, bmu)
        return Prediction(
            float((-1) ** (1 + r)) * np.eye(dim, dtype=complex),
            "meridian_parity",
            {"r": r},
        )
    if kind in ("C_lam", "C_lambda", "C_mu"):
        winding = theta_winding(model, kind, at)
        coupling = model.p if kind != "C_mu" else model.q
        k = (
            _guarded_floor(at["mu"] * (2 - model.q) / TWO_PI)
            if kind != "C_mu"
            else _guarded_floor(at["lam"] * (2 - model.p) / TWO_PI)
        )
        return Prediction(
            _rot_block(winding, dim),
            "strength_loop_rotation",
            {"k": k, "coupling": coupling, "winding": winding},
        )
    if kind == "C_phi" and dim == 2:
        zen = models.spectral_data(model, at).zenith
        omega = TWO_PI * (1.0 - math.cos(zen))
        return Prediction(
            _diag_phase(omega / 2.0), "latitude_solid_angle", {"zenith": zen}
        )
    if dim == 4 and kind in ("C_eta", "C_phi", "C_chi"):
        zen = models.spectral_data(model, at).zenith
        eta = at["eta"]
        if kind == "C_eta":
            omega = TWO_PI * (1.0 - math.cos(zen))
            top = np.cos(omega / 2.0) * np.eye(2) + 1j * math.sin(omega / 2.0) * SY
            bot = np.cos(omega / 2.0) * np.eye(2) - 1j * math.sin(omega / 2.0) * SY
            return Prediction(
                _blockdiag(top, bot), "wz_eta_rotation", {"omega": omega}
            )
        if kind == "C_phi":
            beta = math.sqrt(1.0 - (math.sin(zen) * math.cos(eta)) ** 2)
            ax = math.atan2(math.sin(eta), math.cos(zen) * math.cos(eta))
            omega = TWO_PI * (1.0 - beta)
            top = _su2_exp(math.cos(ax), math.sin(ax), omega)
            bot = _su2_exp(math.cos(ax), -math.sin(ax), -omega)
            return Prediction(
                _blockdiag(top, bot),
                "wz_azimuth_cone",
                {"beta": beta, "axis_angle": ax, "omega": omega},
            )
        # chi loop: the block axis angle pairs cos(eta) with cos(zen) sin(eta);
        # the sin/cos roles swap relative to the phi loop
        beta = math.sqrt(1.0 - (math.sin(zen) * math.sin(eta)) ** 2)
        ax = math.atan2(math.cos(zen) * math.sin(eta), math.cos(eta))
        omega = TWO_PI * (1.0 - beta)
        top = _su2_exp(math.cos(ax), math.sin(ax), omega)
        bot = _su2_exp(math.cos(ax), -math.sin(ax), omega)
        return Prediction(
            _blockdiag(top, bot),
            "wz_twist_cone",
            {"beta": beta, "axis_angle": ax, "omega": omega},
        )
    raise UnsupportedError(f"no closed form for loop kind {kind!r} on {model.name}")
