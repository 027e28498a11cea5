"""Frames along paths, gauge connections, and the holonomy factors.

The pipeline implemented here: continue an ordered eigenframe along a
closed path (handling its multiple-valuedness), sample the gauge
connection A = i f^dag df/ds by centered differences, and form

    W = anti-ordered exp of -i * integral A ds      (frame transport)
    B = ordered exp of +i * integral A^D ds         (geometric factor)
    M = W B                                         (holonomy matrix)

M depends only on the frame chosen at the base point; the gauge used
along the interior of the path cancels between W and B.  Discrete
parallel transport (successive overlaps rotated positive-Hermitian)
makes A^D vanish identically, so in that gauge B = I and M = W.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import scipy.optimize

from . import models
from .errors import ContinuationError, DegeneracyError, PreconditionError, UnsupportedError
from .matcore import SampledCurve, ordered_exp, unitarity_defect
from .models import SX, SY, SZ, ModelSpec, ParamPoint

__all__ = [
    "Frame", "ConnectionSample", "GaugeMap", "HolonomyResult",
    "continue_frame", "connection_at", "analytic_connection",
    "wilson_line", "geometric_factor", "holonomy_matrix", "apply_gauge",
    "block_diag_part", "frame_columns_along",
]

PATTERN_THRESHOLD = 0.99
GAUGES = ("parallel_transport", "max_overlap", "analytic")


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class Frame:
    """An ordered orthonormal basis attached to a parameter point."""

    columns: np.ndarray
    labels: tuple[str, ...]
    clusters: tuple[tuple[int, ...], ...]
    param: ParamPoint | None = None
    s: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.columns, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise PreconditionError(f"frame must be square, got {c.shape}")
        if unitarity_defect(c) > 1e-10:
            raise PreconditionError("frame columns are not orthonormal")
        object.__setattr__(self, "columns", c)

    @property
    def dim(self) -> int:
        return self.columns.shape[0]


@dataclass(frozen=True)
class ConnectionSample:
    """The gauge connection and its block-diagonal part at one sample."""

    s: float
    A: np.ndarray
    A_diag: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.A, dtype=complex)
        if np.linalg.norm(a - a.conj().T) > 1e-8 * max(1.0, np.linalg.norm(a)):
            raise PreconditionError("connection sample is not Hermitian")

    @classmethod
    def from_matrix(cls, s: float, a: np.ndarray, clusters) -> "ConnectionSample":
        return cls(s=s, A=a, A_diag=block_diag_part(a, clusters))


@dataclass(frozen=True)
class GaugeMap:
    """A unitary-valued function of the path parameter t in [0, 1]."""

    fn: Callable[[float], np.ndarray]
    form: str = "general"   # or "diag-times-permutation"

    def __call__(self, t: float) -> np.ndarray:
        g = np.asarray(self.fn(t), dtype=complex)
        if unitarity_defect(g) > 1e-10:
            raise PreconditionError(f"gauge map is not unitary at t={t}")
        return g


@dataclass(frozen=True)
class HolonomyResult:
    """W, B, M for one loop plus the extracted permutation pattern."""

    W: np.ndarray
    B: np.ndarray
    M: np.ndarray
    permutation: tuple[int, ...] | None
    block_permutation: tuple[int, ...] | None
    level_phases: tuple[complex | None, ...]
    residual: float
    pattern_ok: bool
    steps: int
    converged: bool
    clusters: tuple[tuple[int, ...], ...]
    frame_start: Frame
    frame_end: Frame
    warnings: tuple[str, ...] = ()


def block_diag_part(a: np.ndarray, clusters) -> np.ndarray:
    """Restriction of a matrix (stack) to the diagonal cluster blocks."""
    out = np.zeros_like(a)
    for c in clusters:
        idx = np.ix_(list(c), list(c))
        out[(...,) + idx] = a[(...,) + idx]
    return out


# ---------------------------------------------------------------------------
# frame continuation

def _group_eigenvalues(vals: np.ndarray, unitary: bool, tol: float = 1e-8) -> list[list[int]]:
    from .matcore import _cluster_phases

    if unitary:
        return _cluster_phases(np.angle(vals), tol)
    order = np.argsort(vals.real)
    groups = [[int(order[0])]]
    for i in range(1, len(order)):
        if vals.real[order[i]] - vals.real[order[i - 1]] < tol:
            groups[-1].append(int(order[i]))
        else:
            groups.append([int(order[i])])
    return groups


def _lowdin(q: np.ndarray) -> np.ndarray:
    """Orthonormalize columns without leaving their span."""
    s = q.conj().T @ q
    w, u = np.linalg.eigh(s)
    return q @ (u * (w ** -0.5)) @ u.conj().T


def _align_to_previous(
    prev: np.ndarray,
    vals: np.ndarray,
    vecs: np.ndarray,
    clusters,
    unitary: bool,
    step: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Match, orthonormalize and parallel-transport one sample's eigenbasis.

    Cluster assignment is by largest block overlap with the previous frame
    (never by eigenvalue sorting); inside each matched block the basis is
    rotated so the block overlap is positive Hermitian, which is discrete
    parallel transport and reduces to a positive-real phase for simple
    levels.
    """
    groups = _group_eigenvalues(vals, unitary)
    if len(groups) != len(clusters) or sorted(map(len, groups)) != sorted(
        map(len, clusters)
    ):
        raise ContinuationError(
            f"eigenvalue cluster structure changed at step {step}", step=step
        )
    blocks = []
    for g in groups:
        q = vecs[:, g]
        blocks.append(_lowdin(q) if len(g) > 1 else q / np.linalg.norm(q, axis=0))
    k = len(clusters)
    weight = np.zeros((k, k))
    for a, ca in enumerate(clusters):
        pa = prev[:, list(ca)]
        for b in range(k):
            if len(groups[b]) != len(ca):
                weight[a, b] = -1.0
                continue
            weight[a, b] = np.linalg.norm(pa.conj().T @ blocks[b]) ** 2 / len(ca)
    rows, cols_idx = scipy.optimize.linear_sum_assignment(-weight)
    assign = dict(zip(rows.tolist(), cols_idx.tolist()))
    new_cols = np.empty_like(prev)
    tracked = np.empty(prev.shape[0], dtype=complex)
    for a, ca in enumerate(clusters):
        b = assign[a]
        if weight[a, b] < 0.25:
            raise ContinuationError(
                f"ambiguous eigenvector matching at step {step} "
                f"(best block overlap {weight[a, b]:.3f})",
                step=step,
            )
        q = blocks[b]
        p = prev[:, list(ca)].conj().T @ q
        u, _, vh = np.linalg.svd(p)
        aligned = q @ (vh.conj().T @ u.conj().T)
        zv = vals[groups[b]]
        z = zv.mean()
        if unitary:
            z /= abs(z)
        for j, col in enumerate(ca):
            new_cols[:, col] = aligned[:, j]
            tracked[col] = z if len(ca) > 1 else zv[j]
    return new_cols, tracked


def _polar_unitary(x: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(x)
    return u @ vh


def _chain_kramers(
    seed: np.ndarray,
    vals: np.ndarray,
    vecs: np.ndarray,
    clusters,
    base_idx: int,
) -> tuple[np.ndarray, np.ndarray] | None:
    """Vectorized continuation for a spectrum of two equal-size clusters.

    Grouping, orthonormalization and inter-sample block overlaps are
    batched; only the per-step polar rotations (discrete parallel
    transport inside each degenerate block) remain sequential.
    """
    P, N = vals.shape
    k = len(clusters)
    d = len(clusters[0])
    if k != 2 or any(len(c) != d for c in clusters):
        return None
    ph = np.angle(vals)
    order = np.argsort(ph, axis=1)
    ph_sorted = np.take_along_axis(ph, order, axis=1)
    gaps = np.diff(
        np.concatenate([ph_sorted, ph_sorted[:, :1] + 2.0 * np.pi], axis=1), axis=1
    )
    bnd = np.sort(np.argsort(gaps, axis=1)[:, -k:], axis=1)  # (P, 2)
    if not np.all(bnd[:, 1] - bnd[:, 0] == d):
        bad = int(np.argwhere(bnd[:, 1] - bnd[:, 0] != d)[0][0])
        raise ContinuationError(
            f"eigenvalue cluster structure changed at step {bad}", step=bad
        )
    pos = np.arange(N)[None, :]
    mask1 = (pos > bnd[:, :1]) & (pos <= bnd[:, 1:])
    idx = np.empty((P, 2, d), dtype=int)
    idx[:, 0] = order[mask1].reshape(P, d)
    idx[:, 1] = order[~mask1].reshape(P, d)
    # cluster representative eigenvalues (unimodular mean per group)
    zg = np.take_along_axis(vals, idx.reshape(P, -1), axis=1).reshape(P, 2, d)
    zrep = zg.mean(axis=2)
    zrep /= np.abs(zrep)
    # orthonormal bases per group, batched Lowdin
    q = np.take_along_axis(vecs[:, None, :, :], idx[:, :, None, :], axis=3)  # (P,2,N,d)
    s = np.einsum("pgji,pgjk->pgik", q.conj(), q)
    w, u = np.linalg.eigh(s)
    q = q @ (u * (w[..., None, :] ** -0.5)) @ np.conj(np.swapaxes(u, -1, -2))
    # pairwise block weights between consecutive samples
    ov = np.einsum("pgji,phjk->pghik", q[:-1].conj(), q[1:])  # (P-1,2,2,d,d)
    wt = np.einsum("pghik,pghik->pgh", ov, ov.conj()).real / d
    straight = wt[:, 0, 0] + wt[:, 1, 1]
    crossed = wt[:, 0, 1] + wt[:, 1, 0]
    swap = crossed > straight
    chosen_min = np.where(swap, np.minimum(wt[:, 0, 1], wt[:, 1, 0]),
                          np.minimum(wt[:, 0, 0], wt[:, 1, 1]))
    if chosen_min.min() < 0.25:
        bad = int(np.argwhere(chosen_min < 0.25)[0][0]) + 1
        raise ContinuationError(
            f"successive eigenvector overlap below 0.5 at step {bad}", step=bad
        )
    parity = np.zeros(P, dtype=int)
    parity[1:] = np.cumsum(swap.astype(int)) % 2
    # seed cluster -> group at the base sample
    seed_blocks = [seed[:, list(c)] for c in clusters]
    wt0 = np.array(
        [
            [np.linalg.norm(sb.conj().T @ q[base_idx, g]) ** 2 / d for g in range(2)]
            for sb in seed_blocks
        ]
    )
    base_group = [int(np.argmax(wt0[c])) for c in range(2)]
    if (
        base_group[0] == base_group[1]
        or wt0[0, base_group[0]] < 0.25
        or wt0[1, base_group[1]] < 0.25
    ):
        raise ContinuationError("seed frame does not match the eigenbasis", step=0)
    cols = np.empty_like(vecs)
    tracked = np.empty_like(vals)
    for c, cl in enumerate(clusters):
        grp = (base_group[c] + parity - parity[base_idx]) % 2  # group of cluster c per sample
        qc = q[np.arange(P), grp]                              # (P, N, d)
        o = np.einsum("pji,pjk->pik", qc[:-1].conj(), qc[1:])  # step overlaps
        g = np.empty((P, d, d), dtype=complex)
        g[base_idx] = _polar_unitary(
            qc[base_idx].conj().T @ seed_blocks[c]
        )
        for l in range(base_idx, P - 1):
            g[l + 1] = _polar_unitary(o[l].conj().T @ g[l])
        for l in range(base_idx - 1, -1, -1):
            g[l] = _polar_unitary(o[l] @ g[l + 1])
        aligned = qc @ g
        for j, col in enumerate(cl):
            cols[:, :, col] = aligned[:, :, j]
            tracked[:, col] = zrep[np.arange(P), grp]
    return cols, tracked


def _chain_simple(
    seed: np.ndarray, vals: np.ndarray, vecs: np.ndarray, base_idx: int
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized continuation for all-simple spectra.

    Pairwise column matching between consecutive samples is independent of
    any phase convention, so permutations and transport phases can be
    composed after one batched overlap pass.
    """
    P, N = vals.shape
    ov = np.einsum("lji,ljk->lik", vecs[:-1].conj(), vecs[1:])
    w = np.abs(ov) ** 2
    rows = np.argmax(w, axis=1)  # (P-1, N): for each new column, best old row
    for l in range(P - 1):
        if len(set(rows[l].tolist())) != N:
            raise ContinuationError(
                f"ambiguous eigenvector matching at step {l + 1}", step=l + 1
            )
    picked = np.take_along_axis(w, rows[:, None, :], axis=1)[:, 0, :]
    if picked.min() < 0.25:
        bad = int(np.argwhere(picked < 0.25)[0][0]) + 1
        raise ContinuationError(
            f"successive eigenvector overlap below 0.5 at step {bad}", step=bad
        )
    # sigma[l][n] = raw column at sample l continuing raw column n of sample 0
    sigma = np.empty((P, N), dtype=int)
    sigma[0] = np.arange(N)
    for l in range(P - 1):
        fwd = np.empty(N, dtype=int)  # old raw column -> new raw column
        fwd[rows[l]] = np.arange(N)
        sigma[l + 1] = fwd[sigma[l]]
    # transport phases: arg of the overlap along each matched pair
    args = np.angle(np.take_along_axis(ov, rows[:, None, :], axis=1)[:, 0, :])
    # args[l][new_col]; map to tracked label order and accumulate
    step_phase = np.zeros((P, N))
    for l in range(P - 1):
        step_phase[l + 1] = args[l][sigma[l + 1]]
    cum = np.cumsum(step_phase, axis=0)
    cum -= cum[base_idx]  # anchor at the base sample
    # seed alignment at the base sample
    ov0 = seed.conj().T @ vecs[base_idx]
    w0 = np.abs(ov0) ** 2
    raw_for_label = np.argmax(w0, axis=1)
    if len(set(raw_for_label.tolist())) != N or w0.max(axis=1).min() < 0.25:
        raise ContinuationError("seed frame does not match the eigenbasis", step=0)
    phase0 = np.angle(np.take_along_axis(ov0, raw_for_label[:, None], axis=1)[:, 0])
    # base raw column carrying label n: raw_for_label[n]; propagate by sigma
    rel = np.empty(N, dtype=int)
    rel[sigma[base_idx]] = np.arange(N)  # raw col -> chain slot at base
    slot_for_label = rel[raw_for_label]
    cols_idx = sigma[:, slot_for_label]              # (P, N) raw column per label
    phases = cum[:, slot_for_label] + phase0[None, :]
    gathered = np.take_along_axis(vecs, cols_idx[:, None, :], axis=2)
    nrm = np.linalg.norm(gathered, axis=1, keepdims=True)
    cols = gathered / nrm * np.exp(-1j * phases)[:, None, :]
    tracked = np.take_along_axis(vals, cols_idx, axis=1)
    return cols, tracked


def sandwich_for(model: ModelSpec, loop) -> str:
    """Composition variant that closes the given loop in operator space.

    Loops driving mu need the half-lambda (mirrored) product: the
    half-mu product is mu-periodic only up to conjugation for odd q.
    """
    if model.is_map and loop.describe.get("coord") == "mu":
        return "lam"
    return "mu"


def frame_columns_along(
    model: ModelSpec,
    loop,
    n: int,
    gauge: str = "parallel_transport",
    pad: int = 0,
    sandwich: str | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Continued frame columns on the grid t = l/n, l = -pad..n+pad.

    Returns (t values, columns (P,N,N), tracked eigenvalues (P,N)).  The
    base frame at t=0 is the model's analytic eigenframe, so holonomy
    matrices come out in the reference gauge.  ``parallel_transport`` and
    ``max_overlap`` share the discrete transport rule (positive overlaps);
    they differ only in continuum-limit guarantees, not in this algebra.
    """
    if gauge not in ("parallel_transport", "max_overlap"):
        raise PreconditionError(f"gauge must be one of {GAUGES[:2]}, got {gauge!r}")
    if sandwich is None:
        sandwich = sandwich_for(model, loop)
    ts, coords = loop.coords(n, pad=pad)
    vals, vecs, unitary = models.eigensystem_stack(model, coords, sandwich) \
        if model.is_map else models.eigensystem_stack(model, coords)
    base_idx = pad
    seed = models.eigenvectors_at(model, loop.point_at(0.0), sandwich) \
        if model.is_map else models.eigenvectors_at(model, loop.point_at(0.0))
    clusters = seed.clusters
    if all(len(c) == 1 for c in clusters):
        cols, tracked = _chain_simple(seed.columns, vals, vecs, base_idx)
        return ts, cols, tracked
    if unitary:
        chained = _chain_kramers(seed.columns, vals, vecs, clusters, base_idx)
        if chained is not None:
            return ts, chained[0], chained[1]
    P = len(ts)
    cols = np.empty_like(vecs)
    tracked = np.empty_like(vals)
    cols[base_idx], tracked[base_idx] = _align_to_previous(
        seed.columns, vals[base_idx], vecs[base_idx], clusters, unitary, base_idx
    )
    for i in range(base_idx + 1, P):
        cols[i], tracked[i] = _align_to_previous(
            cols[i - 1], vals[i], vecs[i], clusters, unitary, i
        )
    for i in range(base_idx - 1, -1, -1):
        cols[i], tracked[i] = _align_to_previous(
            cols[i + 1], vals[i], vecs[i], clusters, unitary, i
        )
    return ts, cols, tracked


def continue_frame(
    model: ModelSpec, path, gauge: str = "parallel_transport", steps: int | None = None
) -> list[Frame]:
    """One Frame per path sample, continued from the analytic base frame.

    Ordering is fixed by maximal-overlap matching with the previous sample;
    phases (blocks, for degenerate clusters) by discrete parallel transport.
    """
    n = steps or path.samples
    ts, cols, _ = frame_columns_along(model, path, n, gauge=gauge)
    labels, clusters = model.labels(), model.clusters()
    return [
        Frame(
            columns=cols[i],
            labels=labels,
            clusters=clusters,
            param=path.point_at(ts[i]),
            s=float(ts[i]),
        )
        for i in range(len(ts))
    ]


# ---------------------------------------------------------------------------
# connections

def _hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _connection_stack(cols: np.ndarray, h: float, clusters) -> tuple[np.ndarray, np.ndarray]:
    """Centered-difference connection at interior samples of a frame stack."""
    if h <= 0:
        raise PreconditionError("sample spacing must be positive")
    diff = (cols[2:] - cols[:-2]) / (2.0 * h)
    a = _hermitize(1j * np.einsum("lji,ljk->lik", cols[1:-1].conj(), diff))
    return a, block_diag_part(a, clusters)


def connection_at(frames: Sequence[Frame]) -> ConnectionSample:
    """Connection from three consecutive frames by centered differences.

    A_nm = i <xi_n(s) | (xi_m(s+h) - xi_m(s-h)) / 2h>, then symmetrized;
    the sampling must be uniform in s.
    """
    if len(frames) != 3:
        raise PreconditionError("connection_at needs exactly three frames")
    f0, f1, f2 = frames
    h1, h2 = f1.s - f0.s, f2.s - f1.s
    if h1 <= 0 or h2 <= 0:
        raise PreconditionError("frame samples must be strictly increasing in s")
    if abs(h1 - h2) > 1e-9 * max(h1, h2):
        raise PreconditionError("connection_at requires uniform spacing")
    a = _hermitize(1j * f1.columns.conj().T @ (f2.columns - f0.columns) / (2.0 * h1))
    return ConnectionSample.from_matrix(f1.s, a, f1.clusters)


def analytic_connection(model: ModelSpec, point: ParamPoint, direction: str) -> ConnectionSample:
    """The closed-form connection of a bundled model along one coordinate."""
    clusters = model.clusters()
    if model.name == "berry_spin_half":
        theta = point["theta"]
        if direction == "theta":
            a = 0.5 * SY
        elif direction == "phi":
            a = 0.5 * (SZ * np.cos(theta) - SX * np.sin(theta))
        elif direction == "B":
            a = np.zeros((2, 2), dtype=complex)
        else:
            raise UnsupportedError(f"no analytic connection along {direction!r}")
        return ConnectionSample.from_matrix(point.get(direction), a, clusters)

    if model.name == "map_spin_half":
        if direction in ("theta", "lam", "mu"):
            a = 0.5 * SY * models.zenith_partials(model, point)[direction]
        elif direction == "phi":
            zen = models.spectral_data(model, point).zenith
            a = 0.5 * (SZ * np.cos(zen) - SX * np.sin(zen))
        else:
            raise UnsupportedError(f"no analytic connection along {direction!r}")
        return ConnectionSample.from_matrix(point.get(direction), a, clusters)

    if model.name == "map_spin_threehalf":
        zen = models.spectral_data(model, point).zenith
        ct, st = np.cos(zen), np.sin(zen)
        g1 = np.block([[np.zeros((2, 2)), -1j * np.eye(2)], [1j * np.eye(2), np.zeros((2, 2))]])
        if direction in ("theta", "lam", "mu"):
            a = 0.5 * g1 * models.zenith_partials(model, point)[direction]
        elif direction == "eta":
            a = 0.5 * np.block([[-SY * ct, SY * st], [SY * st, SY * ct]])
        elif direction == "phi":
            eta = point["eta"]
            a = 0.5 * np.cos(eta) * np.block([[SZ * ct, -SZ * st], [-SZ * st, -SZ * ct]])
            a = a + 0.5 * np.sin(eta) * np.block([[SX, np.zeros((2, 2))], [np.zeros((2, 2)), SX]])
        elif direction == "chi":
            eta = point["eta"]
            a = 0.5 * np.cos(eta) * np.block([[SZ, np.zeros((2, 2))], [np.zeros((2, 2)), SZ]])
            a = a + 0.5 * np.sin(eta) * np.block([[SX * ct, -SX * st], [-SX * st, -SX * ct]])
        else:
            raise UnsupportedError(f"no analytic connection along {direction!r}")
        return ConnectionSample.from_matrix(point.get(direction), a, clusters)

    raise UnsupportedError(f"model {model.name!r} has no analytic connections")


def wilson_line(connection: SampledCurve) -> np.ndarray:
    """Anti-ordered exponential of -i * integral A ds over the curve."""
    return ordered_exp(connection, "right", -1j)


def geometric_factor(connection_diag: SampledCurve) -> np.ndarray:
    """Ordered exponential of +i * integral A^D ds over the curve."""
    return ordered_exp(connection_diag, "left", +1j)


# ---------------------------------------------------------------------------
# holonomy assembly

def _check_loop_clear(model: ModelSpec, loop, n: int):
    ts, coords = loop.coords(n, pad=1)
    bad = models.degeneracy_flags(model, coords)
    if bad.any():
        i = int(np.argmax(bad))
        raise DegeneracyError(
            f"loop touches a degeneracy set at t={ts[i]:.6f} ({loop.point_at(ts[i])})"
        )


def _analytic_columns(model: ModelSpec, loop, n: int, pad: int) -> tuple[np.ndarray, np.ndarray]:
    ts, coords = loop.coords(n, pad=pad)
    if model.is_map:
        sandwich = sandwich_for(model, loop)
        zen = models.zenith_series(model, coords, sandwich)
        cols = models.frame_stack(model, coords, zen, sandwich)
    else:
        cols = models.frame_stack(model, coords)
    return ts, cols


def _extract_pattern(m: np.ndarray, clusters, thresh: float = PATTERN_THRESHOLD):
    """Permutation / phase content of a holonomy matrix.

    Entries with |M_nm| > thresh form the pattern; the residual is the
    Frobenius norm of everything else.  The index permutation follows the
    cluster-block assignment (order preserved inside degenerate blocks),
    which stays well defined even when the blocks are generic unitaries.
    """
    N = m.shape[0]
    k = len(clusters)
    weight = np.full((k, k), -1.0)
    for a, ca in enumerate(clusters):
        for b, cb in enumerate(clusters):
            if len(ca) != len(cb):
                continue
            weight[a, b] = np.linalg.norm(m[np.ix_(list(ca), list(cb))]) ** 2 / len(cb)
    rows, cols_idx = scipy.optimize.linear_sum_assignment(-weight)
    block_perm: list[int] = [0] * k
    block_ok = True
    for a, b in zip(rows.tolist(), cols_idx.tolist()):
        block_perm[b] = a
        if weight[a, b] < thresh**2:
            block_ok = False
    permutation: list[int] | None = [0] * N
    for b, cb in enumerate(clusters):
        ca = clusters[block_perm[b]]
        for j, col in enumerate(cb):
            permutation[col] = ca[j]
    mask = np.abs(m) > thresh
    residual = float(np.linalg.norm(m[~mask]))
    level_phases: list[complex | None] = []
    pattern_ok = block_ok
    for col in range(N):
        v = m[permutation[col], col]
        if abs(v) > thresh:
            level_phases.append(v / abs(v))
        else:
            level_phases.append(None)
            pattern_ok = False
    if not block_ok:
        permutation = None
    return (
        tuple(permutation) if permutation is not None else None,
        tuple(block_perm) if block_ok else None,
        tuple(level_phases),
        residual,
        pattern_ok,
    )


def _evaluate_holonomy(model: ModelSpec, loop, n: int, gauge: str):
    if gauge == "analytic":
        ts, cols = _analytic_columns(model, loop, n, pad=1)
    else:
        ts, cols, _ = frame_columns_along(model, loop, n, gauge=gauge, pad=1)
    clusters = model.clusters()
    a, ad = _connection_stack(cols, 1.0 / n, clusters)
    grid = ts[1:-1]
    w = wilson_line(SampledCurve(grid, a))
    b = geometric_factor(SampledCurve(grid, ad))
    return w, b, w @ b, cols, ts


def holonomy_matrix(
    model: ModelSpec,
    loop,
    steps: int | None = None,
    gauge: str = "parallel_transport",
    auto_refine: bool = True,
    refine_tol: float = 1e-6,
    max_steps: int = 2**20,
) -> HolonomyResult:
    """Path-ordered holonomy of a closed loop, with automatic refinement.

    The sample count doubles until the holonomy matrix moves by less than
    ``refine_tol`` in Frobenius norm (capped at ``max_steps``).  The loop
    is rejected if any sample sits on the model's degeneracy sets.
    """
    if not loop.closed:
        raise PreconditionError("holonomy_matrix requires a closed loop")
    if gauge not in GAUGES:
        raise PreconditionError(f"gauge must be one of {GAUGES}, got {gauge!r}")
    n = int(steps or loop.samples)
    _check_loop_clear(model, loop, max(n, 256))
    warnings: list[str] = []
    w, b, m, cols, ts = _evaluate_holonomy(model, loop, n, gauge)
    converged = not auto_refine
    while auto_refine:
        if 2 * n > max_steps:
            warnings.append(
                f"refinement capped at {n} samples without reaching {refine_tol:g}"
            )
            break
        w2, b2, m2, cols2, ts2 = _evaluate_holonomy(model, loop, 2 * n, gauge)
        drift = float(np.linalg.norm(m2 - m))
        n, w, b, m, cols, ts = 2 * n, w2, b2, m2, cols2, ts2
        if drift < refine_tol:
            converged = True
            break
    defect = unitarity_defect(m)
    if defect > 1e-6:
        warnings.append(f"holonomy matrix unitarity defect {defect:.2e}")
    permutation, block_perm, phases, residual, pattern_ok = _extract_pattern(
        m, model.clusters()
    )
    if not pattern_ok:
        warnings.append(
            f"pattern extraction incomplete (residual {residual:.3f}); "
            "holonomy blocks are not permutation-times-phase"
        )
    labels, clusters = model.labels(), model.clusters()
    frame_start = Frame(
        columns=cols[1], labels=labels, clusters=clusters,
        param=loop.point_at(0.0), s=0.0,
    )
    frame_end = Frame(
        columns=cols[-2], labels=labels, clusters=clusters,
        param=loop.point_at(1.0), s=1.0,
    )
    return HolonomyResult(
        W=w, B=b, M=m,
        permutation=permutation,
        block_permutation=block_perm,
        level_phases=phases,
        residual=residual,
        pattern_ok=pattern_ok,
        steps=n,
        converged=converged,
        clusters=clusters,
        frame_start=frame_start,
        frame_end=frame_end,
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# gauge transformations

def _permuted_clusters(g0: np.ndarray, clusters) -> tuple[tuple[int, ...], ...]:
    """Cluster structure after a diag-times-permutation gauge."""
    n = g0.shape[0]
    source = np.argmax(np.abs(g0), axis=0)  # new column j draws from old row
    new = []
    for c in clusters:
        new.append(tuple(sorted(int(j) for j in range(n) if source[j] in c)))
    return tuple(new)


def apply_gauge(
    frames: Sequence[Frame],
    connections: Sequence[ConnectionSample],
    holonomy: HolonomyResult,
    gauge: GaugeMap,
):
    """Transform frames, connection samples and holonomy factors by G(s).

    f -> f G,  A -> G^dag A G + i G^dag dG/ds  (dG by centered differences),
    W -> G(s')^dag W G(s''),  B -> G(s'')^dag B G(s'),  M -> G(s')^dag M G(s').
    The permutation pattern is re-extracted from the transformed M.
    """
    if not frames:
        raise PreconditionError("apply_gauge needs at least one frame")
    new_frames = []
    g_start = gauge(frames[0].s)
    perm_form = gauge.form == "diag-times-permutation"
    for f in frames:
        g = gauge(f.s)
        clusters = _permuted_clusters(g, f.clusters) if perm_form else f.clusters
        labels = (
            tuple(f.labels[int(i)] for i in np.argmax(np.abs(g), axis=0))
            if perm_form
            else f.labels
        )
        new_frames.append(
            replace(f, columns=f.columns @ g, clusters=clusters, labels=labels)
        )
    new_connections = []
    if connections:
        svals = [c.s for c in connections]
        h = svals[1] - svals[0] if len(svals) > 1 else 1e-6
        for c in connections:
            g = gauge(c.s)
            dg = (gauge(c.s + h) - gauge(c.s - h)) / (2.0 * h)
            a = _hermitize(g.conj().T @ c.A @ g + 1j * g.conj().T @ dg)
            clusters = (
                _permuted_clusters(g, holonomy.clusters) if perm_form else holonomy.clusters
            )
            new_connections.append(ConnectionSample.from_matrix(c.s, a, clusters))
    g_end = gauge(holonomy.frame_end.s)
    w = g_start.conj().T @ holonomy.W @ g_end
    b = g_end.conj().T @ holonomy.B @ g_start
    m = g_start.conj().T @ holonomy.M @ g_start
    clusters = _permuted_clusters(g_start, holonomy.clusters) if perm_form else holonomy.clusters
    permutation, block_perm, phases, residual, pattern_ok = _extract_pattern(m, clusters)
    new_holonomy = replace(
        holonomy,
        W=w, B=b, M=m,
        permutation=permutation,
        block_permutation=block_perm,
        level_phases=phases,
        residual=residual,
        pattern_ok=pattern_ok,
        clusters=clusters,
        frame_start=new_frames[0] if new_frames else holonomy.frame_start,
        frame_end=new_frames[-1] if new_frames else holonomy.frame_end,
    )
    return new_frames, new_connections, new_holonomy
