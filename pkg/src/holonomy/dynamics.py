"""Direct time evolution and its comparison with the adiabatic holonomy.

A Schedule drives a loop's arc parameter through L map iterations (or L
short Hamiltonian steps).  The adiabatic prediction factorizes the whole
evolution as  f(s') M(C) D f(s')^dag, where M is the holonomy matrix and
D collects the dynamical phases of the continuously tracked levels; the
deviation from the exact product measures nonadiabaticity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import framegauge, models
from .errors import PreconditionError, UnsupportedError
from .matcore import chain_product
from .models import ModelSpec, ParamPoint

__all__ = [
    "Schedule",
    "EvolutionReport",
    "stroboscopic_evolve",
    "adiabatic_predict",
    "hamiltonian_flow",
    "fujikawa_F",
    "eigenvalue_paths",
]

_CHUNK = 1 << 15


@dataclass(frozen=True)
class Schedule:
    """L kicks (or steps) along a path; s_0 at the start, s_{L-1} at the end."""

    loop: object
    L: int
    T: float | None = None   # total time for Hamiltonian flows; maps kick at unit time

    def __post_init__(self):
        if self.L < 1:
            raise PreconditionError("a schedule needs at least one step")

    def kick_fractions(self) -> np.ndarray:
        if self.L == 1:
            return np.zeros(1)
        return np.arange(self.L) / (self.L - 1)

    def kick_coords(self) -> dict[str, np.ndarray]:
        pts = [self.loop.point_at(t) for t in self.kick_fractions()]
        return models.stack_coords(pts)


@dataclass(frozen=True)
class EvolutionReport:
    U_whole: np.ndarray
    adiabatic_prediction: np.ndarray
    deviation: float
    dynamical_factor: np.ndarray
    holonomy: framegauge.HolonomyResult
    L: int


def _chunked_ordered_product(stack: np.ndarray, ordering: str) -> np.ndarray:
    """Tree-multiply a long stack of small matrices in bounded memory."""
    n = stack.shape[0]
    if n <= _CHUNK:
        return chain_product(stack, ordering)
    partials = [
        chain_product(stack[i : i + _CHUNK], ordering) for i in range(0, n, _CHUNK)
    ]
    return chain_product(np.stack(partials), ordering)


def stroboscopic_evolve(model: ModelSpec, schedule: Schedule, sandwich: str | None = None) -> np.ndarray:
    """Ordered product of the quantum map over the schedule (latest leftmost)."""
    if not model.is_map:
        raise UnsupportedError(
            "stroboscopic evolution applies to the map models; "
            "use hamiltonian_flow for the Hamiltonian model"
        )
    if sandwich is None:
        sandwich = framegauge.sandwich_for(model, schedule.loop)
    u = models.unitary_stack(model, schedule.kick_coords(), sandwich)
    return _chunked_ordered_product(u, "left")


def hamiltonian_flow(model: ModelSpec, path, T: float, L: int) -> np.ndarray:
    """Discretized flow: product of exp(-i H(s_mid) T/L) over L steps.

    The parameter is evaluated at the midpoint of each step, so the error
    against the exact time-ordered evolution is first order in T/L.
    """
    if model.is_map:
        raise UnsupportedError("hamiltonian_flow applies to the Hamiltonian model")
    if L < 1:
        raise PreconditionError("need at least one time step")
    eps = T / L
    mids = (np.arange(L) + 0.5) / L
    pts = [path.point_at(t) for t in mids]
    h = models.hamiltonian_stack(model, models.stack_coords(pts))
    w, v = np.linalg.eigh(h)
    factors = np.einsum("lij,lj,lkj->lik", v, np.exp(-1j * eps * w), v.conj())
    return _chunked_ordered_product(factors, "left")


def eigenvalue_paths(
    model: ModelSpec, loop, samples: int, sandwich: str | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Continuously tracked eigenvalues along a loop.

    Returns (t grid, values (P, N)); column n follows the level that
    started as level n of the analytic frame, through any eigenvalue
    exchange the loop induces.
    """
    ts, _, tracked = framegauge.frame_columns_along(
        model, loop, samples, sandwich=sandwich
    )
    return ts, tracked


def adiabatic_predict(
    model: ModelSpec,
    schedule: Schedule,
    holonomy: framegauge.HolonomyResult | None = None,
    steps: int | None = None,
) -> EvolutionReport:
    """Exact evolution vs f(s') M(C) D f(s')^dag over one closed sweep.

    D multiplies the tracked eigenvalue of each level over the schedule
    (eigenphase integral for flows); the deviation is the operator norm
    of the difference after aligning one global phase.
    """
    loop = schedule.loop
    if not loop.closed:
        raise PreconditionError("adiabatic prediction requires a closed loop")
    sandwich = framegauge.sandwich_for(model, loop) if model.is_map else "mu"
    if holonomy is None:
        holonomy = framegauge.holonomy_matrix(model, loop, steps=steps)
    f0 = holonomy.frame_start.columns
    L = schedule.L
    if model.is_map:
        u_whole = stroboscopic_evolve(model, schedule, sandwich)
        n_grid = max(L - 1, 1)
        _, tracked = eigenvalue_paths(model, loop, n_grid, sandwich)
        d_diag = np.prod(tracked[:L], axis=0)
        d_diag /= np.abs(d_diag)
    else:
        T = schedule.T if schedule.T is not None else float(L)
        u_whole = hamiltonian_flow(model, loop, T, L)
        eps = T / L
        _, tracked = eigenvalue_paths(model, loop, L)
        energies = tracked.real
        mid = 0.5 * (energies[:-1] + energies[1:])
        d_diag = np.exp(-1j * eps * mid.sum(axis=0))
    prediction = f0 @ (holonomy.M * d_diag[None, :]) @ f0.conj().T
    gamma = np.angle(np.trace(prediction.conj().T @ u_whole))
    deviation = float(
        np.linalg.norm(u_whole - np.exp(1j * gamma) * prediction, ord=2)
    )
    return EvolutionReport(
        U_whole=u_whole,
        adiabatic_prediction=prediction,
        deviation=deviation,
        dynamical_factor=np.diag(d_diag),
        holonomy=holonomy,
        L=L,
    )


def fujikawa_F(
    model: ModelSpec, point: ParamPoint, direction: str, sdot: float = 1.0
) -> np.ndarray:
    """Frame-representation generator  f^dag H f - A sdot  (hbar = 1).

    Its diagonal part is the eigenvalue matrix minus the diagonal
    connection times the parameter velocity; the off-diagonal part carries
    the nonadiabatic couplings.
    """
    if model.is_map:
        raise UnsupportedError("the Hamiltonian-flow generator needs a Hamiltonian model")
    f = models.eigenvectors_at(model, point).columns
    h = models.hamiltonian_at(model, point)
    a = framegauge.analytic_connection(model, point, direction).A
    return f.conj().T @ h @ f - a * sdot
