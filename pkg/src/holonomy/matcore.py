"""Dense complex linear algebra for small matrices.

Everything here acts on plain complex ndarrays.  The only structured type
is :class:`SampledCurve`, a matrix-valued function of one real parameter
sampled on a grid, which is what the ordered exponentials consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError

__all__ = [
    "SampledCurve",
    "mat_exp",
    "eig_unitary",
    "ordered_exp",
    "chain_product",
    "is_hermitian",
    "is_unitary",
    "unitarity_defect",
]

_HERM_TOL = 1e-12
_UNITARY_TOL = 1e-10


def _check_square_finite(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise PreconditionError(f"{name} must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise PreconditionError(f"{name} contains NaN/Inf entries")
    return m


def is_hermitian(m: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.linalg.norm(m - m.conj().T) <= tol * max(1.0, np.linalg.norm(m)))


def unitarity_defect(u: np.ndarray) -> float:
    """Frobenius norm of U^dag U - I."""
    u = np.asarray(u, dtype=complex)
    return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[-1])))


def is_unitary(u: np.ndarray, tol: float = _UNITARY_TOL) -> bool:
    return unitarity_defect(u) <= tol


def mat_exp(h: np.ndarray, scale: complex = 1.0) -> np.ndarray:
    """exp(scale * H) for a square complex matrix.

    Hermitian input goes through an eigendecomposition, which keeps
    exp(-it H) unitary to machine precision; anything else falls back to
    scipy's scaling-and-squaring Pade code.
    """
    h = _check_square_finite(h, "H")
    if not np.isfinite(scale):
        raise PreconditionError("scale must be finite")
    if is_hermitian(h, tol=_HERM_TOL):
        w, v = np.linalg.eigh(h)
        return (v * np.exp(scale * w)) @ v.conj().T
    import scipy.linalg

    return scipy.linalg.expm(scale * h)


def _cluster_phases(phases: np.ndarray, tol: float) -> list[list[int]]:
    """Group indices whose phases (mod 2pi) differ by less than tol.

    Clustering is circular: the gap across the +-pi seam counts too.
    """
    n = len(phases)
    order = np.argsort(phases)
    sorted_ph = phases[order]
    groups = [[int(order[0])]]
    for i in range(1, n):
        if sorted_ph[i] - sorted_ph[i - 1] < tol:
            groups[-1].append(int(order[i]))
        else:
            groups.append([int(order[i])])
    # seam: highest and lowest phases may belong together
    if len(groups) > 1 and sorted_ph[0] + 2.0 * np.pi - sorted_ph[-1] < tol:
        groups[0] = groups.pop() + groups[0]
    return [sorted(g) for g in groups]


def eig_unitary(
    u: np.ndarray, degeneracy_tol: float = 1e-8
) -> tuple[np.ndarray, np.ndarray, list[list[int]]]:
    """Eigendecomposition of a unitary matrix with degeneracy clustering.

    Returns (eigenvalues, eigenvector matrix, clusters).  Eigenvectors are
    orthonormal columns (complex Schur of a normal matrix), eigenvalues
    unimodular.  Indices whose eigenphases differ by less than
    ``degeneracy_tol`` end up in one cluster; phase/order conventions of
    the backend are arbitrary and left to the caller to fix.
    """
    import scipy.linalg

    u = _check_square_finite(u, "U")
    defect = unitarity_defect(u)
    if defect > _UNITARY_TOL:
        raise PreconditionError(f"input is not unitary (defect {defect:.2e})")
    t, z = scipy.linalg.schur(u, output="complex")
    vals = np.diag(t).copy()
    vals /= np.abs(vals)  # snap onto the unit circle
    clusters = _cluster_phases(np.angle(vals), degeneracy_tol)
    return vals, z, clusters


@dataclass(frozen=True)
class SampledCurve:
    """A matrix-valued curve sampled on a strictly increasing grid."""

    s: np.ndarray          # shape (L,), strictly monotone
    matrices: np.ndarray   # shape (L, N, N)
    closed: bool = False

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        m = np.asarray(self.matrices, dtype=complex)
        if m.ndim != 3 or m.shape[1] != m.shape[2]:
            raise PreconditionError(f"matrices must be (L, N, N), got {m.shape}")
        if s.ndim != 1 or len(s) != m.shape[0]:
            raise PreconditionError("curve parameter and matrix counts differ")
        if len(s) >= 2 and not np.all(np.diff(s) > 0):
            raise PreconditionError("curve parameter must be strictly increasing")
        if not np.all(np.isfinite(m)):
            raise PreconditionError("curve contains NaN/Inf entries")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "matrices", m)

    @property
    def dim(self) -> int:
        return self.matrices.shape[-1]

    def __len__(self) -> int:
        return len(self.s)


def _segment_exponentials(curve: SampledCurve, scale: complex) -> np.ndarray:
    """exp(scale * A_mid * ds) for every segment, batched.

    A_mid is the average of the segment's endpoint samples (midpoint rule,
    second order).  Hermitian samples go through a batched eigh so each
    factor is exactly unitary for imaginary scale.
    """
    a = curve.matrices
    mids = 0.5 * (a[:-1] + a[1:])
    ds = np.diff(curve.s)
    herm_defect = np.linalg.norm(mids - np.conj(np.swapaxes(mids, -1, -2)), axis=(1, 2))
    if np.all(herm_defect <= 1e-10 * (1.0 + np.linalg.norm(mids, axis=(1, 2)))):
        w, v = np.linalg.eigh(mids)
        phase = np.exp(scale * w * ds[:, None])
        return np.einsum("lij,lj,lkj->lik", v, phase, v.conj())
    import scipy.linalg

    return np.stack(
        [scipy.linalg.expm(scale * mids[l] * ds[l]) for l in range(len(ds))]
    )


def chain_product(factors: np.ndarray, ordering: str) -> np.ndarray:
    """Multiply a stack of matrices keeping curve order.

    ordering="right": later factors on the right (anti-ordered, exp_->).
    ordering="left":  later factors on the left  (ordered, exp_<-).
    Uses pairwise tree reduction; adjacent products preserve the order.
    """
    if ordering == "left":
        factors = factors[::-1]
    elif ordering != "right":
        raise PreconditionError(f"ordering must be 'left' or 'right', got {ordering!r}")
    prod = factors
    while prod.shape[0] > 1:
        if prod.shape[0] % 2:
            head, prod = prod[:1], prod[1:]
            prod = np.concatenate([head @ prod[:1], prod[1:]])
        else:
            prod = prod[0::2] @ prod[1::2]
    return prod[0]


def ordered_exp(curve: SampledCurve, ordering: str, scale: complex) -> np.ndarray:
    """Path-ordered exponential of ``scale * A(s)`` over a sampled curve.

    With ordering="right" this is the anti-ordered exponential (new factors
    compose on the right, as for a frame transported by its own connection);
    ordering="left" gives the usual time-ordered product.
    """
    if len(curve) < 2:
        raise PreconditionError("ordered_exp needs at least two samples")
    return chain_product(_segment_exponentials(curve, scale), ordering)
