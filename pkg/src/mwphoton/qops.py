"""Finite-dimensional operator plumbing for open-network simulations.

Conventions used throughout the package: hbar = 1, all rates are expressed in
units of the reference relaxation rate of the first monitored transition, and
time in inverse rate units.  Subsystem 0 of a layout is the *leftmost* factor
in Kronecker products.  Density matrices are plain complex ndarrays with unit
trace; superoperators are never materialised here — the functions below map
(operators, rho) -> d(rho) directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "SpaceLayout",
    "Operator",
    "DensityMatrix",
    "identity",
    "lowering",
    "transition",
    "number_op",
    "basis_ket",
    "pure_dm",
    "embed",
    "dissipator",
    "coupling_super",
    "measurement_super",
    "expectation",
    "partial_trace",
]

MatrixLike = Union["Operator", "DensityMatrix", np.ndarray]


def _as_matrix(x: MatrixLike) -> np.ndarray:
    """Return the underlying complex matrix of an Operator/DensityMatrix/ndarray."""
    if isinstance(x, (Operator, DensityMatrix)):
        return x.mat
    return np.asarray(x, dtype=complex)


@dataclass(frozen=True)
class SpaceLayout:
    """Ordered tensor-product structure: subsystem dimensions plus labels.

    Parameters
    ----------
    dims : tuple of int
        Dimension of each subsystem, all >= 1.
    labels : tuple of str
        One unique label per subsystem (e.g. ``("src", "t1", "t2")``).
    """

    dims: tuple
    labels: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        labels = tuple(str(s) for s in self.labels)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "labels", labels)
        if len(dims) == 0:
            raise ValueError("layout needs at least one subsystem")
        if any(d < 1 for d in dims):
            raise ValueError(f"subsystem dimensions must be positive, got {dims}")
        if len(labels) != len(dims):
            raise ValueError("labels and dims must have equal length")
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate subsystem labels in {labels}")

    @property
    def dim(self) -> int:
        """Total Hilbert-space dimension (product of subsystem dims)."""
        return int(np.prod(self.dims))

    def index(self, subsystem: Union[int, str]) -> int:
        """Resolve a subsystem given by position or label to its position."""
        if isinstance(subsystem, str):
            try:
                return self.labels.index(subsystem)
            except ValueError:
                raise KeyError(f"no subsystem labelled {subsystem!r} in {self.labels}") from None
        i = int(subsystem)
        if not 0 <= i < len(self.dims):
            raise IndexError(f"subsystem index {i} out of range for {len(self.dims)} subsystems")
        return i


def _check_square(mat: np.ndarray, what: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got shape {mat.shape}")
    return mat


@dataclass(frozen=True, eq=False)
class Operator:
    """A linear operator tied to a SpaceLayout.

    Thin wrapper over a complex matrix; arithmetic returns new Operators and
    checks layout compatibility.  ``mat`` is stored read-only.
    """

    layout: SpaceLayout
    mat: np.ndarray

    def __post_init__(self):
        mat = _check_square(self.mat, "Operator.mat").copy()
        if mat.shape[0] != self.layout.dim:
            raise ValueError(
                f"operator dimension {mat.shape[0]} does not match layout dim {self.layout.dim}"
            )
        mat.flags.writeable = False
        object.__setattr__(self, "mat", mat)

    def dag(self) -> "Operator":
        return Operator(self.layout, self.mat.conj().T)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.mat - self.mat.conj().T)) <= tol)

    def _coerce(self, other: MatrixLike) -> np.ndarray:
        if isinstance(other, Operator) and other.layout != self.layout:
            raise ValueError("operators live on different layouts")
        return _as_matrix(other)

    def __add__(self, other: MatrixLike) -> "Operator":
        return Operator(self.layout, self.mat + self._coerce(other))

    def __sub__(self, other: MatrixLike) -> "Operator":
        return Operator(self.layout, self.mat - self._coerce(other))

    def __neg__(self) -> "Operator":
        return Operator(self.layout, -self.mat)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.layout, self.mat * complex(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other: MatrixLike) -> "Operator":
        return Operator(self.layout, self.mat @ self._coerce(other))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density matrix on a SpaceLayout (unit trace, Hermitian, PSD)."""

    layout: SpaceLayout
    mat: np.ndarray

    def __post_init__(self):
        mat = _check_square(self.mat, "DensityMatrix.mat").copy()
        if mat.shape[0] != self.layout.dim:
            raise ValueError(
                f"state dimension {mat.shape[0]} does not match layout dim {self.layout.dim}"
            )
        mat.flags.writeable = False
        object.__setattr__(self, "mat", mat)

    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def validate(self, trace_tol: float = 1e-8, herm_tol: float = 1e-10,
                 psd_tol: float = None) -> None:
        """Raise ValueError if trace/Hermiticity (and optionally positivity) fail."""
        tr = np.trace(self.mat)
        if abs(tr - 1.0) > trace_tol:
            raise ValueError(f"trace deviates from 1 by {abs(tr - 1.0):.3e}")
        herm = np.max(np.abs(self.mat - self.mat.conj().T))
        if herm > herm_tol:
            raise ValueError(f"Hermiticity violated by {herm:.3e}")
        if psd_tol is not None:
            lo = float(np.linalg.eigvalsh(self.mat)[0])
            if lo < -psd_tol:
                raise ValueError(f"negative eigenvalue {lo:.3e}")


# ---------------------------------------------------------------------------
# local operator builders
# ---------------------------------------------------------------------------

def identity(dim: int) -> np.ndarray:
    """Identity matrix of size dim."""
    return np.eye(int(dim), dtype=complex)


def lowering(dim: int) -> np.ndarray:
    """Bosonic lowering operator truncated to ``dim`` levels: a|n> = sqrt(n)|n-1>."""
    return np.diag(np.sqrt(np.arange(1, int(dim), dtype=float)), 1).astype(complex)


def transition(dim: int, i: int, j: int) -> np.ndarray:
    """Matrix unit |i><j| in a ``dim``-level system."""
    if not (0 <= i < dim and 0 <= j < dim):
        raise ValueError(f"levels ({i},{j}) out of range for dim {dim}")
    m = np.zeros((dim, dim), dtype=complex)
    m[i, j] = 1.0
    return m


def number_op(dim: int) -> np.ndarray:
    """Number operator diag(0, 1, ..., dim-1)."""
    return np.diag(np.arange(int(dim), dtype=float)).astype(complex)


def basis_ket(layout: SpaceLayout, occupations: Sequence[int]) -> np.ndarray:
    """Product basis ket |n_0, n_1, ...> as a flat complex vector."""
    if len(occupations) != len(layout.dims):
        raise ValueError("need one occupation per subsystem")
    idx = 0
    for n, d in zip(occupations, layout.dims):
        if not 0 <= n < d:
            raise ValueError(f"occupation {n} out of range for dim-{d} subsystem")
        idx = idx * d + int(n)
    v = np.zeros(layout.dim, dtype=complex)
    v[idx] = 1.0
    return v


def pure_dm(ket: np.ndarray) -> np.ndarray:
    """|psi><psi| from a (not necessarily normalised) ket."""
    v = np.asarray(ket, dtype=complex).ravel()
    n = np.vdot(v, v).real
    if n <= 0:
        raise ValueError("zero ket")
    return np.outer(v, v.conj()) / n


# ---------------------------------------------------------------------------
# embedding
# ---------------------------------------------------------------------------

def embed(op: MatrixLike, subsystem: Union[int, str], layout: SpaceLayout) -> Operator:
    """Embed a local operator into the full tensor-product space.

    Parameters
    ----------
    op : matrix or Operator
        Local operator whose dimension must match the target subsystem.
    subsystem : int or str
        Position or label of the subsystem the operator acts on.
    layout : SpaceLayout
        Target layout; subsystem 0 is the leftmost Kronecker factor.

    Returns
    -------
    Operator
        ``I (x) ... (x) op (x) ... (x) I`` on ``layout``.
    """
    k = layout.index(subsystem)
    mat = _as_matrix(op)
    if mat.shape != (layout.dims[k], layout.dims[k]):
        raise ValueError(
            f"operator shape {mat.shape} does not match subsystem dim {layout.dims[k]}"
        )
    left = int(np.prod(layout.dims[:k], initial=1))
    right = int(np.prod(layout.dims[k + 1:], initial=1))
    full = np.kron(np.kron(np.eye(left), mat), np.eye(right))
    return Operator(layout, full)


# ---------------------------------------------------------------------------
# superoperator applications (rho -> d rho)
# ---------------------------------------------------------------------------

def dissipator(c: MatrixLike, rho: MatrixLike) -> np.ndarray:
    """Lindblad dissipator D[c]rho = c rho c† - (c†c rho + rho c†c)/2."""
    c = _as_matrix(c)
    rho = _as_matrix(rho)
    cdc = c.conj().T @ c
    return c @ rho @ c.conj().T - 0.5 * (cdc @ rho + rho @ cdc)


def coupling_super(c1: MatrixLike, c2: MatrixLike, rho: MatrixLike) -> np.ndarray:
    """Cascade coupling superoperator S[c1, c2]rho = [c2†, c1 rho] + [rho c1†, c2].

    c1 is the upstream (source) operator, c2 the downstream (absorber) one; the
    unidirectional master-equation terms enter with a minus sign in front of S.
    """
    c1 = _as_matrix(c1)
    c2 = _as_matrix(c2)
    rho = _as_matrix(rho)
    c2d = c2.conj().T
    c1d = c1.conj().T
    a = c1 @ rho
    b = rho @ c1d
    return (c2d @ a - a @ c2d) + (b @ c2 - c2 @ b)


def measurement_super(c: MatrixLike, phi: float, rho: MatrixLike) -> np.ndarray:
    """Homodyne measurement superoperator at local-oscillator phase phi.

    M[c]rho = e^{i phi} c rho + e^{-i phi} rho c† - <e^{i phi} c + e^{-i phi} c†> rho.

    ``rho`` must have unit trace for the mean subtraction to make M traceless.
    """
    c = _as_matrix(c)
    rho = _as_matrix(rho)
    p = np.exp(1j * phi)
    lin = p * (c @ rho) + np.conj(p) * (rho @ c.conj().T)
    return lin - np.trace(lin) * rho


def expectation(a: MatrixLike, rho: MatrixLike) -> complex:
    """Expectation value tr(a rho)."""
    a = _as_matrix(a)
    rho = _as_matrix(rho)
    # tr(a rho) = sum_ij a_ij rho_ji
    return complex(np.sum(a * rho.T))


def partial_trace(rho: MatrixLike, layout: SpaceLayout,
                  keep: Iterable[Union[int, str]]) -> tuple:
    """Trace out all subsystems not in ``keep``.

    Returns ``(reduced_matrix, reduced_layout)`` with subsystems in their
    original order.
    """
    rho = _as_matrix(rho)
    keep_idx = sorted(layout.index(s) for s in keep)
    if not keep_idx:
        raise ValueError("must keep at least one subsystem")
    ndims = len(layout.dims)
    resh = rho.reshape(layout.dims + layout.dims)
    # trace out, from the highest index down so axis numbers stay valid
    out = resh
    removed = 0
    for k in range(ndims - 1, -1, -1):
        if k in keep_idx:
            continue
        nleft = ndims - removed
        out = np.trace(out, axis1=k, axis2=k + nleft)
        removed += 1
    kept_dims = tuple(layout.dims[k] for k in keep_idx)
    kept_labels = tuple(layout.labels[k] for k in keep_idx)
    d = int(np.prod(kept_dims))
    return out.reshape(d, d), SpaceLayout(kept_dims, kept_labels)
