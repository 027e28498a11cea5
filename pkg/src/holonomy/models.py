"""The bundled parameterized systems and their closed-form spectral data.

Three systems are provided:

* ``berry_spin_half``      -- a spin-1/2 in a static magnetic field,
  H = B (n . sigma), parameterized by spherical angles (theta, phi) and
  the field strength B.
* ``map_spin_half``        -- a kicked spin-1/2 quantum map, a symmetric
  three-factor product of exponentials with integer couplings (q, p) and
  torus strengths (mu, lambda).
* ``map_spin_threehalf``   -- the spin-3/2 extension built on a rank-5
  Clifford algebra; time-reversal invariance makes every level doubly
  (Kramers) degenerate.

The two map models share the same gap Delta and zenith angle Theta as
functions of (mu, lambda, theta); both are computed here, together with
analytic eigenframes in the gauge used throughout for reference values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, PreconditionError, UnsupportedError
from .matcore import mat_exp

__all__ = [
    "SX", "SY", "SZ", "ID2",
    "ModelSpec", "ParamPoint", "SpectralData", "TauAlgebra",
    "berry_spin_half", "map_spin_half", "map_spin_threehalf", "model_from_name",
    "unitary_at", "hamiltonian_at", "unitary_stack", "hamiltonian_stack",
    "spectral_data", "zenith_series", "eigenvectors_at", "frame_stack",
    "time_reversal_K", "tau_matrices", "tau_combination", "quaternionic_eigs",
    "degeneracy_predicate", "degeneracy_flags", "zenith_partials",
    "eigensystem_stack", "stack_coords", "berry_um_gauge_fn",
]

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)

# ---------------------------------------------------------------------------
# parameter points and model specs

class ParamPoint:
    """An immutable named point in a model's parameter space (radians).

    Periodic coordinates are kept as given; they are never reduced mod 2pi,
    so a point can faithfully represent "lambda = 2pi" as distinct from
    "lambda = 0" during continuation.
    """

    __slots__ = ("_coords",)

    def __init__(self, **coords: float):
        object.__setattr__(self, "_coords", {k: float(v) for k, v in coords.items()})

    def __getitem__(self, name: str) -> float:
        return self._coords[name]

    def get(self, name: str, default: float = 0.0) -> float:
        return self._coords.get(name, default)

    def keys(self):
        return self._coords.keys()

    def as_dict(self) -> dict[str, float]:
        return dict(self._coords)

    def replace(self, **updates: float) -> "ParamPoint":
        merged = dict(self._coords)
        merged.update({k: float(v) for k, v in updates.items()})
        return ParamPoint(**merged)

    def __eq__(self, other) -> bool:
        return isinstance(other, ParamPoint) and self._coords == other._coords

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}={v:.6g}" for k, v in self._coords.items())
        return f"ParamPoint({inner})"


@dataclass(frozen=True)
class ModelSpec:
    """A named parameterized system with fixed integer couplings."""

    name: str
    dim: int
    q: int = 0
    p: int = 0
    coord_names: tuple[str, ...] = ()
    param_topology: tuple[tuple[str, str], ...] = ()

    @property
    def is_map(self) -> bool:
        return self.name.startswith("map_")

    @property
    def kramers(self) -> bool:
        return self.name == "map_spin_threehalf"

    def clusters(self) -> tuple[tuple[int, ...], ...]:
        """Index clusters of the eigenframe (Kramers pairs for spin-3/2)."""
        if self.kramers:
            return ((0, 1), (2, 3))
        return tuple((i,) for i in range(self.dim))

    def labels(self) -> tuple[str, ...]:
        if self.kramers:
            return ("+", "K+", "-", "K-")
        return ("+", "-")


def berry_spin_half() -> ModelSpec:
    return ModelSpec(
        name="berry_spin_half", dim=2,
        coord_names=("theta", "phi", "B"),
        param_topology=(("theta", "sphere-zenith"), ("phi", "sphere-azimuth"), ("B", "ray")),
    )


def map_spin_half(q: int, p: int) -> ModelSpec:
    if q != int(q) or p != int(p):
        raise PreconditionError("couplings q, p must be integers")
    return ModelSpec(
        name="map_spin_half", dim=2, q=int(q), p=int(p),
        coord_names=("mu", "lam", "theta", "phi"),
        param_topology=(("mu", "circle"), ("lam", "circle"),
                        ("theta", "sphere-zenith"), ("phi", "sphere-azimuth")),
    )


def map_spin_threehalf(q: int, p: int) -> ModelSpec:
    if q != int(q) or p != int(p):
        raise PreconditionError("couplings q, p must be integers")
    return ModelSpec(
        name="map_spin_threehalf", dim=4, q=int(q), p=int(p),
        coord_names=("mu", "lam", "theta", "eta", "chi", "phi"),
        param_topology=(("mu", "circle"), ("lam", "circle"),
                        ("theta", "sphere-zenith"), ("eta", "sphere-zenith"),
                        ("chi", "sphere-azimuth"), ("phi", "sphere-azimuth")),
    )


def model_from_name(name: str, q: int = 0, p: int = 0) -> ModelSpec:
    if name == "berry_spin_half":
        return berry_spin_half()
    if name == "map_spin_half":
        return map_spin_half(q, p)
    if name == "map_spin_threehalf":
        return map_spin_threehalf(q, p)
    raise UnsupportedError(f"unknown model {name!r}")


def stack_coords(points: list[ParamPoint]) -> dict[str, np.ndarray]:
    """Column arrays of coordinate values for a list of points."""
    if not points:
        return {}
    names = list(points[0].keys())
    return {n: np.array([pt.get(n) for pt in points], dtype=float) for n in names}


# ---------------------------------------------------------------------------
# Clifford / quaternionic kernel for the spin-3/2 system

def _build_tau() -> np.ndarray:
    zero = np.zeros((2, 2), dtype=complex)
    tau = np.empty((5, 4, 4), dtype=complex)
    tau[0] = np.block([[ID2, zero], [zero, -ID2]])
    tau[1] = np.block([[zero, 1j * SY], [-1j * SY, zero]])
    tau[2] = np.block([[zero, -1j * SX], [1j * SX, zero]])
    tau[3] = np.block([[zero, ID2], [ID2, zero]])
    tau[4] = np.block([[zero, -1j * SZ], [1j * SZ, zero]])
    return tau


_TAU = _build_tau()
_G = np.stack([
    -1j * _TAU[0] @ _TAU[3],
    1j * _TAU[1] @ _TAU[3],
    -1j * _TAU[3] @ _TAU[4],
    -1j * _TAU[1] @ _TAU[2],
])
# antiunitary time reversal in the ordered basis (e1, Ke1, e2, Ke2):
# K e = Ke, K(Ke) = -e on each pair
_K_MAT = np.zeros((4, 4), dtype=complex)
_K_MAT[1, 0] = _K_MAT[3, 2] = 1.0
_K_MAT[0, 1] = _K_MAT[2, 3] = -1.0


@dataclass(frozen=True)
class TauAlgebra:
    """The five traceless Hermitian Clifford generators and the g matrices."""

    generators: np.ndarray   # (5, 4, 4)
    g_matrices: np.ndarray   # (4, 4, 4)
    basis_labels: tuple[str, str, str, str]


def tau_matrices() -> TauAlgebra:
    return TauAlgebra(
        generators=_TAU.copy(),
        g_matrices=_G.copy(),
        basis_labels=("e1", "Ke1", "e2", "Ke2"),
    )


def tau_combination(n: np.ndarray) -> np.ndarray:
    """sum_a n_a tau_a for a real 5-vector n; squares to |n|^2 I."""
    n = np.asarray(n, dtype=float)
    if n.shape != (5,):
        raise PreconditionError(f"n must be a real 5-vector, got shape {n.shape}")
    return np.einsum("a,aij->ij", n, _TAU)


def time_reversal_K(v: np.ndarray) -> np.ndarray:
    """Antiunitary time reversal K on a 4-vector in the (e1,Ke1,e2,Ke2) basis.

    K is antilinear with K^2 = -1 (fermionic), K e_j = Ke_j.
    """
    v = np.asarray(v, dtype=complex)
    if v.shape != (4,):
        raise PreconditionError(f"expected a 4-vector, got shape {v.shape}")
    return _K_MAT @ v.conj()


def _d_vectors(eta: float, chi: float, phi: float) -> np.ndarray:
    """Columns (d1, Kd1, d2, Kd2) spanning the two Kramers planes."""
    ce, se = math.cos(eta / 2.0), math.sin(eta / 2.0)
    a = np.exp(-0.5j * (phi + chi))   # phase on e1 in d1
    b = np.exp(0.5j * (phi - chi))    # phase on e2 in d2
    d = np.zeros((4, 4), dtype=complex)
    d[:, 0] = [a * ce, -np.conj(a) * se, 0.0, 0.0]          # d1
    d[:, 1] = [a * se, np.conj(a) * ce, 0.0, 0.0]           # Kd1
    d[:, 2] = [0.0, 0.0, b * ce, np.conj(b) * se]           # d2
    d[:, 3] = [0.0, 0.0, -b * se, np.conj(b) * ce]          # Kd2
    return d


def _spin32_frame(zenith: float, eta: float, chi: float, phi: float) -> np.ndarray:
    """Analytic eigenframe (xi+, K xi+, xi-, K xi-) of tau(l).

    K xi- is obtained by applying K to xi-; it equals
    -sin(zenith/2) Kd1 + cos(zenith/2) Kd2, the closed form consistent with
    antilinearity (the variant with a -cos coefficient is not normalized).
    """
    d = _d_vectors(eta, chi, phi)
    c, s = math.cos(zenith / 2.0), math.sin(zenith / 2.0)
    f = np.zeros((4, 4), dtype=complex)
    f[:, 0] = c * d[:, 0] + s * d[:, 2]      # xi+
    f[:, 1] = c * d[:, 1] + s * d[:, 3]      # K xi+
    f[:, 2] = -s * d[:, 0] + c * d[:, 2]     # xi-
    f[:, 3] = -s * d[:, 1] + c * d[:, 3]     # K xi-
    return f


def quaternionic_eigs(n: np.ndarray):
    """Eigenframe of tau(n) for a unit 5-vector n, eigenvalues (+1,+1,-1,-1).

    Uses the quaternionic 2x2 reduction: spherical angles are read off n,
    the Kramers partners are generated by the time-reversal operation, and
    the convention phase exp(-i(phi+chi)/2) is attached to xi+-.
    """
    from .framegauge import Frame

    n = np.asarray(n, dtype=float)
    if n.shape != (5,):
        raise PreconditionError(f"n must be a real 5-vector, got shape {n.shape}")
    if abs(np.linalg.norm(n) - 1.0) > 1e-10:
        raise PreconditionError("n must be a unit vector")
    r12 = math.hypot(n[1], n[2])
    r34 = math.hypot(n[3], n[4])
    zen = math.atan2(math.hypot(r12, r34), n[0])
    eta = math.atan2(r12, r34)
    chi = math.atan2(n[2], n[1]) if r12 > 1e-15 else 0.0
    phi = math.atan2(n[4], n[3]) if r34 > 1e-15 else 0.0
    f = _spin32_frame(zen, eta, chi, phi)
    return Frame(
        columns=f,
        labels=("+", "K+", "-", "K-"),
        clusters=((0, 1), (2, 3)),
        param=ParamPoint(theta=zen, eta=eta, chi=chi, phi=phi),
    )


# ---------------------------------------------------------------------------
# spectral data shared by the two map models

@dataclass(frozen=True)
class SpectralData:
    """Closed-form spectrum of a map model at one parameter point."""

    z_plus: complex
    z_minus: complex
    gap: float        # Delta in [0, 2pi]
    zenith: float     # Theta = atan2 branch, not unwrapped
    Bmu: float
    Blam: float


def _field_strengths(model: ModelSpec, mu: float, lam: float) -> tuple[float, float]:
    return 0.5 * (2 - model.q) * mu, 0.5 * (2 - model.p) * lam


def _gap_ingredients(bmu, blam, theta, sandwich: str = "mu"):
    """cos(Delta/2) and the (unnormalized) zenith cosine/sine of l.

    sandwich="mu" is the product with half kicks of the mu factor; its
    rotation axis l is referenced to the mu-axis and the zenith is Theta.
    sandwich="lam" mirrors the roles of the two factors (half lambda
    kicks); that composition is 2pi-periodic in mu for every q, which is
    what closes loops over mu, and its zenith is the mirrored angle.
    """
    cos_half = np.cos(bmu) * np.cos(blam) - np.cos(theta) * np.sin(bmu) * np.sin(blam)
    if sandwich == "mu":
        zen_cos = np.sin(bmu) * np.cos(blam) + np.cos(theta) * np.cos(bmu) * np.sin(blam)
        zen_sin = np.sin(theta) * np.sin(blam)
    elif sandwich == "lam":
        zen_cos = np.sin(blam) * np.cos(bmu) + np.cos(theta) * np.cos(blam) * np.sin(bmu)
        zen_sin = np.sin(theta) * np.sin(bmu)
    else:
        raise PreconditionError(f"sandwich must be 'mu' or 'lam', got {sandwich!r}")
    return cos_half, zen_cos, zen_sin


def spectral_data(model: ModelSpec, point: ParamPoint, sandwich: str = "mu") -> SpectralData:
    """Gap, zenith angle and unimodular eigenvalues of a map model.

    Raises DegeneracyError on the known degeneracy sets, naming the
    violated condition.
    """
    if not model.is_map:
        raise UnsupportedError("spectral_data is defined for the map models")
    verdict = degeneracy_predicate(model, point)
    if verdict != "clear":
        raise DegeneracyError(f"point sits on a degeneracy set ({verdict})")
    mu, lam, theta = point["mu"], point["lam"], point["theta"]
    bmu, blam = _field_strengths(model, mu, lam)
    cos_half, zen_cos, zen_sin = _gap_ingredients(bmu, blam, theta, sandwich)
    if abs(cos_half) >= 1.0 - 1e-15:
        raise DegeneracyError("gap closed: |cos(Delta/2)| = 1")
    delta = 2.0 * math.acos(float(np.clip(cos_half, -1.0, 1.0)))
    zenith = math.atan2(zen_sin, zen_cos)
    phase = -0.5 * (mu * model.q + lam * model.p)
    return SpectralData(
        z_plus=complex(np.exp(1j * (phase - delta / 2.0))),
        z_minus=complex(np.exp(1j * (phase + delta / 2.0))),
        gap=delta,
        zenith=zenith,
        Bmu=bmu,
        Blam=blam,
    )


def zenith_series(
    model: ModelSpec, coords: dict[str, np.ndarray], sandwich: str = "mu"
) -> np.ndarray:
    """The zenith angle along a sampled path, unwrapped (never mod 2pi)."""
    bmu, blam = _field_strengths(model, coords["mu"], coords["lam"])
    _, zen_cos, zen_sin = _gap_ingredients(bmu, blam, coords["theta"], sandwich)
    return np.unwrap(np.arctan2(zen_sin, zen_cos))


def degeneracy_flags(
    model: ModelSpec, coords: dict[str, np.ndarray], tol: float = 1e-9
) -> np.ndarray:
    """Vectorized degeneracy-set membership for sampled coordinates."""
    if not model.is_map:
        return np.abs(coords["B"]) <= tol
    bmu, blam = _field_strengths(model, coords["mu"], coords["lam"])
    rmu, rlam = bmu / math.pi, blam / math.pi

    def near_int(x):
        return np.abs(x - np.round(x)) <= tol

    lattice = near_int(rmu) & near_int(rlam)
    t = coords["theta"] / math.pi
    sign = np.where(np.round(t) % 2 == 0, 1.0, -1.0)
    lines = near_int(t) & near_int(rlam + sign * rmu)
    return lattice | lines


def zenith_partials(
    model: ModelSpec, point: ParamPoint, sandwich: str = "mu"
) -> dict[str, float]:
    """Partial derivatives of the zenith angle wrt theta, mu, lambda.

    Obtained by differentiating atan2 of the zenith sine/cosine pair; the
    shared 1/sin(Delta/2) normalization cancels into the denominator.
    """
    if not model.is_map:
        raise UnsupportedError("zenith_partials is defined for the map models")
    mu, lam, theta = point["mu"], point["lam"], point["theta"]
    bmu, blam = _field_strengths(model, mu, lam)
    cos_half, zc, zs = _gap_ingredients(bmu, blam, theta, sandwich)
    g2 = zc * zc + zs * zs  # = sin^2(Delta/2)
    if g2 < 1e-24:
        raise DegeneracyError("zenith angle undefined at closed gap")
    if sandwich == "lam":
        bmu, blam = blam, bmu  # the mirror swaps the two strengths
    dmu = 0.5 * (2 - model.q)
    dlam = 0.5 * (2 - model.p)
    ds_dtheta = math.cos(theta) * math.sin(blam)
    dc_dtheta = -math.sin(theta) * math.cos(bmu) * math.sin(blam)
    d_inner = dmu if sandwich == "lam" else dlam   # drives the "blam" slot
    d_outer = dlam if sandwich == "lam" else dmu   # drives the "bmu" slot
    ds_dinner = math.sin(theta) * math.cos(blam) * d_inner
    dc_dinner = (
        -math.sin(bmu) * math.sin(blam) + math.cos(theta) * math.cos(bmu) * math.cos(blam)
    ) * d_inner
    ds_douter = 0.0
    dc_douter = cos_half * d_outer
    out = {"theta": (zc * ds_dtheta - zs * dc_dtheta) / g2}
    if sandwich == "lam":
        out["mu"] = (zc * ds_dinner - zs * dc_dinner) / g2
        out["lam"] = (zc * ds_douter - zs * dc_douter) / g2
    else:
        out["lam"] = (zc * ds_dinner - zs * dc_dinner) / g2
        out["mu"] = (zc * ds_douter - zs * dc_douter) / g2
    return out


def degeneracy_predicate(model: ModelSpec, point: ParamPoint, tol: float = 1e-9) -> str:
    """Classify a point against the model's degeneracy sets.

    Map models: lattice points have both B_mu/pi and B_lambda/pi integer;
    lines require theta at a multiple of pi together with
    (B_lambda +- B_mu)/pi integer (sign tied to cos(theta) = +-1).
    The Berry model is degenerate only at vanishing field strength.
    """
    if not model.is_map:
        return "on_lattice_point" if abs(point["B"]) <= tol else "clear"

    bmu, blam = _field_strengths(model, point["mu"], point["lam"])
    rmu, rlam = bmu / math.pi, blam / math.pi

    def near_int(x: float) -> bool:
        return abs(x - round(x)) <= tol

    if near_int(rmu) and near_int(rlam):
        return "on_lattice_point"
    t = point["theta"] / math.pi
    if near_int(t):
        sign = 1.0 if round(t) % 2 == 0 else -1.0
        if near_int(rlam + sign * rmu):
            return "on_line"
    return "clear"


# ---------------------------------------------------------------------------
# unitaries / Hamiltonians

def _unit_vector(theta, phi) -> np.ndarray:
    st = np.sin(theta)
    return np.stack(
        [np.cos(phi) * st, np.sin(phi) * st, np.cos(theta) * np.ones_like(phi)], axis=-1
    )


def _n5(theta, eta, chi, phi) -> np.ndarray:
    """Unit 5-vector of the spin-3/2 map from its spherical angles."""
    st = np.sin(theta)
    return np.stack(
        [
            np.cos(theta) * np.ones_like(eta),
            np.cos(chi) * np.sin(eta) * st,
            np.sin(chi) * np.sin(eta) * st,
            np.cos(phi) * np.cos(eta) * st,
            np.sin(phi) * np.cos(eta) * st,
        ],
        axis=-1,
    )


def hamiltonian_at(model: ModelSpec, point: ParamPoint) -> np.ndarray:
    """H = B (n . sigma) for the Berry model."""
    if model.name != "berry_spin_half":
        raise UnsupportedError("hamiltonian_at is defined for berry_spin_half")
    n = _unit_vector(point["theta"], point["phi"])
    return point["B"] * (n[0] * SX + n[1] * SY + n[2] * SZ)


def hamiltonian_stack(model: ModelSpec, coords: dict[str, np.ndarray]) -> np.ndarray:
    if model.name != "berry_spin_half":
        raise UnsupportedError("hamiltonian_stack is defined for berry_spin_half")
    n = _unit_vector(coords["theta"], coords["phi"])
    h = np.einsum("p,pk,kij->pij", coords["B"], n, np.stack([SX, SY, SZ]))
    return h


def unitary_at(model: ModelSpec, point: ParamPoint, sandwich: str = "mu") -> np.ndarray:
    """The quantum map at one point: the symmetric three-factor product.

    Each factor is exponentiated literally from its Hermitian generator.
    sandwich="mu" splits the mu factor in halves around the lambda kick
    (the reference form); sandwich="lam" is the mirrored composition,
    needed to close loops over mu for odd q.  The Berry model has no
    canonical unit-time map; use dynamics.hamiltonian_flow instead.
    """
    if not model.is_map:
        raise UnsupportedError(
            "unitary_at is defined for the map models; "
            "the Hamiltonian model evolves via dynamics.hamiltonian_flow"
        )
    q, p = model.q, model.p
    mu, lam = point["mu"], point["lam"]
    if model.dim == 2:
        op_mu = SZ  # m = e_z
        nvec = _unit_vector(point["theta"], point["phi"])
        op_lam = nvec[0] * SX + nvec[1] * SY + nvec[2] * SZ
        ident = ID2
    else:
        op_mu = _TAU[0]
        op_lam = tau_combination(
            _n5(point["theta"], point["eta"], point["chi"], point["phi"])
        )
        ident = np.eye(4, dtype=complex)
    g_mu = 0.5 * q * ident + 0.5 * (2 - q) * op_mu
    g_lam = 0.5 * p * ident + 0.5 * (2 - p) * op_lam
    if sandwich == "mu":
        half = mat_exp(g_mu, -0.5j * mu)
        return half @ mat_exp(g_lam, -1j * lam) @ half
    if sandwich == "lam":
        half = mat_exp(g_lam, -0.5j * lam)
        return half @ mat_exp(g_mu, -1j * mu) @ half
    raise PreconditionError(f"sandwich must be 'mu' or 'lam', got {sandwich!r}")


def unitary_stack(
    model: ModelSpec, coords: dict[str, np.ndarray], sandwich: str = "mu"
) -> np.ndarray:
    """Vectorized map construction over sampled coordinates.

    Uses the closed form exp(-i x (c/2 + ((2-c)/2) V)) =
    e^{-i x c/2} (cos(B) - i sin(B) V) for V^2 = I, B = (2-c)x/2, which is
    exact and keeps each factor unitary to machine precision.
    """
    if not model.is_map:
        raise UnsupportedError("unitary_stack is defined for the map models")
    mu, lam = coords["mu"], coords["lam"]
    bmu, blam = _field_strengths(model, mu, lam)
    n_dim = model.dim
    ident = np.eye(n_dim, dtype=complex)
    if n_dim == 2:
        nvec = _unit_vector(coords["theta"], coords["phi"])
        v_lam = np.einsum("pk,kij->pij", nvec, np.stack([SX, SY, SZ]))
        v_mu = np.broadcast_to(SZ, v_lam.shape)
    else:
        n5 = _n5(coords["theta"], coords["eta"], coords["chi"], coords["phi"])
        v_lam = np.einsum("pa,aij->pij", n5, _TAU)
        v_mu = np.broadcast_to(_TAU[0], v_lam.shape)

    def factor(x, coupling, b, v):
        ph = np.exp(-0.5j * coupling * x)
        return ph[:, None, None] * (
            np.cos(b)[:, None, None] * ident - 1j * np.sin(b)[:, None, None] * v
        )

    if sandwich == "mu":
        half = factor(0.5 * mu, model.q, 0.5 * bmu, v_mu)
        mid = factor(lam, model.p, blam, v_lam)
    elif sandwich == "lam":
        half = factor(0.5 * lam, model.p, 0.5 * blam, v_lam)
        mid = factor(mu, model.q, bmu, v_mu)
    else:
        raise PreconditionError(f"sandwich must be 'mu' or 'lam', got {sandwich!r}")
    return half @ mid @ half


# ---------------------------------------------------------------------------
# analytic eigenframes

def _spin_half_frame(zenith, phi) -> np.ndarray:
    """Columns (xi+, xi-) for a spin-1/2 with the e^{-+ i phi/2} gauge."""
    c, s = np.cos(zenith / 2.0), np.sin(zenith / 2.0)
    em, ep = np.exp(-0.5j * phi), np.exp(0.5j * phi)
    f = np.empty(np.shape(c) + (2, 2), dtype=complex)
    f[..., 0, 0] = em * c
    f[..., 1, 0] = ep * s
    f[..., 0, 1] = -em * s
    f[..., 1, 1] = ep * c
    return f


def _mirror_d_columns(model: ModelSpec, point: ParamPoint) -> np.ndarray:
    """Rotation-plane basis for the mirrored (half-lambda) composition.

    d1 is a +1 eigenvector of the lambda-axis generator V_n; d2 = V_u d1
    where u is the unit component of the mu axis perpendicular to n.  The
    mirrored eigenvectors are zenith rotations inside span(d1, d2) and
    their time-reversal partners.
    """
    theta = point["theta"]
    st = math.sin(theta)
    if abs(st) < 1e-12:
        raise DegeneracyError("mirrored frame undefined at theta multiple of pi")
    if model.dim == 2:
        d1 = _spin_half_frame(theta, point["phi"])[:, 0]
        nvec = _unit_vector(theta, point["phi"])
        u3 = (np.array([0.0, 0.0, 1.0]) - math.cos(theta) * nvec) / st
        d2 = (u3[0] * SX + u3[1] * SY + u3[2] * SZ) @ d1
        d = np.stack([d1, d2], axis=1)
        return d
    f = _spin32_frame(theta, point["eta"], point["chi"], point["phi"])
    n5 = _n5(theta, point["eta"], point["chi"], point["phi"])
    e0 = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    u5 = (e0 - math.cos(theta) * n5) / st
    v_u = tau_combination(u5)
    d1, kd1 = f[:, 0], f[:, 1]
    d2, kd2 = v_u @ d1, v_u @ kd1
    return np.stack([d1, kd1, d2, kd2], axis=1)


def _zenith_rotation(d: np.ndarray, zenith, dim: int) -> np.ndarray:
    """Frame columns from the rotation-plane basis and a zenith angle."""
    c, s = np.cos(np.asarray(zenith) / 2.0), np.sin(np.asarray(zenith) / 2.0)
    if dim == 2:
        f = np.empty(np.shape(c) + (2, 2), dtype=complex)
        f[..., :, 0] = np.multiply.outer(c, d[:, 0]) + np.multiply.outer(s, d[:, 1])
        f[..., :, 1] = np.multiply.outer(-s, d[:, 0]) + np.multiply.outer(c, d[:, 1])
        return f
    f = np.empty(np.shape(c) + (4, 4), dtype=complex)
    f[..., :, 0] = np.multiply.outer(c, d[:, 0]) + np.multiply.outer(s, d[:, 2])
    f[..., :, 1] = np.multiply.outer(c, d[:, 1]) + np.multiply.outer(s, d[:, 3])
    f[..., :, 2] = np.multiply.outer(-s, d[:, 0]) + np.multiply.outer(c, d[:, 2])
    f[..., :, 3] = np.multiply.outer(-s, d[:, 1]) + np.multiply.outer(c, d[:, 3])
    return f


def eigenvectors_at(model: ModelSpec, point: ParamPoint, sandwich: str = "mu"):
    """Analytic eigenframe at a point, in the reference gauge.

    Columns are ordered (xi+, xi-) for the two-level systems and
    (xi+, K xi+, xi-, K xi-) for the spin-3/2 map; both orderings put the
    eigenvalue branch z_+ (or energy +B) first.
    """
    from .framegauge import Frame

    if model.name == "berry_spin_half":
        if abs(point["B"]) <= 1e-12:
            raise DegeneracyError("B = 0 is the diabolic point of the Berry model")
        cols = _spin_half_frame(point["theta"], point["phi"])
    else:
        sd = spectral_data(model, point, sandwich)
        if sandwich == "lam":
            cols = _zenith_rotation(_mirror_d_columns(model, point), sd.zenith, model.dim)
        elif model.dim == 2:
            cols = _spin_half_frame(sd.zenith, point["phi"])
        else:
            cols = _spin32_frame(sd.zenith, point["eta"], point["chi"], point["phi"])
    return Frame(
        columns=cols,
        labels=model.labels(),
        clusters=model.clusters(),
        param=point,
    )


def frame_stack(
    model: ModelSpec,
    coords: dict[str, np.ndarray],
    zenith: np.ndarray | None = None,
    sandwich: str = "mu",
) -> np.ndarray:
    """Analytic frames along a sampled path, shape (P, N, N).

    For map models the zenith must be the unwrapped series so the frames
    stay continuous where the angle leaves its principal branch.
    """
    if model.name == "berry_spin_half":
        return _spin_half_frame(coords["theta"], coords["phi"])
    if zenith is None:
        zenith = zenith_series(model, coords, sandwich)
    P = len(zenith)
    if sandwich == "lam":
        out = np.empty((P, model.dim, model.dim), dtype=complex)
        names = model.coord_names
        for i in range(P):
            pt = ParamPoint(**{nm: coords[nm][i] for nm in names})
            d = _mirror_d_columns(model, pt)
            out[i] = _zenith_rotation(d, zenith[i], model.dim)
        return out
    if model.dim == 2:
        return _spin_half_frame(zenith, coords["phi"])
    out = np.empty((P, 4, 4), dtype=complex)
    for i in range(P):
        out[i] = _spin32_frame(
            zenith[i], coords["eta"][i], coords["chi"][i], coords["phi"][i]
        )
    return out


def eigensystem_stack(
    model: ModelSpec, coords: dict[str, np.ndarray], sandwich: str = "mu"
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Raw eigendecompositions along a path, for frame continuation.

    Returns (values, vectors, is_unitary_spectrum).  Values are eigenvalues
    of the map (unimodular) or of the Hamiltonian (real); vectors are the
    backend's columns with arbitrary phase/order, orthonormal only where the
    spectrum is simple.
    """
    if model.is_map:
        u = unitary_stack(model, coords, sandwich)
        vals, vecs = np.linalg.eig(u)
        return vals, vecs, True
    h = hamiltonian_stack(model, coords)
    vals, vecs = np.linalg.eigh(h)
    return vals.astype(complex), vecs, False


def berry_um_gauge_fn(loop):
    """Gauge function making the Berry frame single-valued on the chart U_M.

    Returns t -> diag(e^{i phi(t)/2}, e^{-i phi(t)/2}) along the loop; the
    transformed frame columns carry (1, e^{i phi}) phases that are periodic
    in phi.
    """

    def g(t: float) -> np.ndarray:
        phi = loop.point_at(t)["phi"]
        return np.diag([np.exp(0.5j * phi), np.exp(-0.5j * phi)])

    return g
