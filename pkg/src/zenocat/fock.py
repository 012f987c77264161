"""Operators and states on truncated bosonic Hilbert spaces.

Every object carries a :class:`HilbertSpace` describing the Fock truncation
of each mode, and objects only combine when their spaces match.  Multi-mode
spaces are ordered storage-first: ``tensor(A_storage, B_reservoir)`` puts the
storage factor on the left of the Kronecker product, and all builders in the
package follow that single convention.

All values are immutable after construction (backing arrays are marked
read-only) and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.linalg

from .errors import (
    InvalidDimensionError,
    InvalidParameterError,
    SpaceMismatchError,
    TruncationError,
)

__all__ = [
    "HilbertSpace",
    "Operator",
    "StateVector",
    "DensityMatrix",
    "annihilation",
    "creation",
    "number",
    "identity",
    "parity",
    "displacement",
    "fock_state",
    "coherent_state",
    "cat_state",
    "thermal_state",
    "tensor",
    "expect",
    "partial_trace",
    "pad_fock",
    "require_truncation",
]


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered Fock truncations, one entry per mode (storage first)."""

    mode_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.mode_dims)
        if not dims:
            raise InvalidDimensionError("a Hilbert space needs at least one mode")
        for d in dims:
            if d < 2:
                raise InvalidDimensionError(f"every mode dimension must be >= 2, got {d}")
        object.__setattr__(self, "mode_dims", dims)

    @property
    def total_dim(self) -> int:
        return math.prod(self.mode_dims)

    @property
    def n_modes(self) -> int:
        return len(self.mode_dims)


def _as_space(space_or_dim) -> HilbertSpace:
    if isinstance(space_or_dim, HilbertSpace):
        return space_or_dim
    return HilbertSpace((int(space_or_dim),))


def _check_same_space(a, b):
    if a.space != b.space:
        raise SpaceMismatchError(
            f"objects live on different spaces: {a.space.mode_dims} vs {b.space.mode_dims}"
        )


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


class Operator:
    """A complex matrix acting on a truncated Fock/tensor space.

    Supports the small algebra the builders need: ``+``, ``-``, scalar
    multiplication, ``@`` composition and :meth:`dag`.  Operators with
    different spaces refuse to combine.
    """

    __slots__ = ("space", "matrix")

    def __init__(self, space, matrix):
        space = _as_space(space)
        matrix = np.asarray(matrix)
        d = space.total_dim
        if matrix.shape != (d, d):
            raise InvalidDimensionError(
                f"matrix shape {matrix.shape} inconsistent with total dimension {d}"
            )
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "matrix", _frozen(matrix))

    def __setattr__(self, name, value):
        raise AttributeError("Operator is immutable")

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def __add__(self, other: "Operator") -> "Operator":
        _check_same_space(self, other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        _check_same_space(self, other)
        return Operator(self.space, self.matrix - other.matrix)

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.space, self.matrix * complex(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            _check_same_space(self, other)
            return Operator(self.space, self.matrix @ other.matrix)
        if isinstance(other, StateVector):
            _check_same_space(self, other)
            return StateVector(self.space, self.matrix @ other.amplitudes, normalize=False)
        return NotImplemented

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return bool(np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol)

    def __repr__(self):
        return f"Operator(dims={self.space.mode_dims})"


class StateVector:
    """A pure state; unit norm within 1e-12 after construction."""

    __slots__ = ("space", "amplitudes")

    def __init__(self, space, amplitudes, *, normalize: bool = False):
        space = _as_space(space)
        amplitudes = np.asarray(amplitudes, dtype=np.complex128).ravel()
        if amplitudes.size != space.total_dim:
            raise InvalidDimensionError(
                f"amplitude vector length {amplitudes.size} != total dimension {space.total_dim}"
            )
        if normalize:
            nrm = np.linalg.norm(amplitudes)
            if nrm < 1e-300:
                raise InvalidParameterError("cannot normalize a zero state vector")
            amplitudes = amplitudes / nrm
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "amplitudes", _frozen(amplitudes))

    def __setattr__(self, name, value):
        raise AttributeError("StateVector is immutable")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        """<self|other>."""
        _check_same_space(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(self.space, np.outer(self.amplitudes, self.amplitudes.conj()))

    def __repr__(self):
        return f"StateVector(dims={self.space.mode_dims})"


class DensityMatrix:
    """A Hermitian, unit-trace state.

    Hermiticity and trace are checked cheaply on construction; the positivity
    check costs an eigendecomposition and lives in :meth:`validate`.
    """

    __slots__ = ("space", "matrix")

    def __init__(self, space, matrix, *, check: bool = True):
        space = _as_space(space)
        matrix = np.asarray(matrix, dtype=np.complex128)
        d = space.total_dim
        if matrix.shape != (d, d):
            raise InvalidDimensionError(
                f"matrix shape {matrix.shape} inconsistent with total dimension {d}"
            )
        if check:
            if np.max(np.abs(matrix - matrix.conj().T)) > 1e-9:
                raise InvalidParameterError("density matrix is not Hermitian")
            if abs(np.trace(matrix).real - 1.0) > 1e-9 or abs(np.trace(matrix).imag) > 1e-12:
                raise InvalidParameterError(
                    f"density matrix trace {np.trace(matrix)} != 1"
                )
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "matrix", _frozen(matrix))

    def __setattr__(self, name, value):
        raise AttributeError("DensityMatrix is immutable")

    def validate(self, herm_tol=1e-12, trace_tol=1e-12, eig_floor=-1e-10):
        """Full physicality check; raises InvalidParameterError on failure."""
        m = self.matrix
        herm = float(np.max(np.abs(m - m.conj().T)))
        if herm > herm_tol:
            raise InvalidParameterError(f"Hermiticity violated by {herm:.3g}")
        tr = complex(np.trace(m))
        if abs(tr - 1.0) > trace_tol:
            raise InvalidParameterError(f"trace {tr} deviates from 1")
        emin = float(np.linalg.eigvalsh((m + m.conj().T) / 2.0).min())
        if emin < eig_floor:
            raise InvalidParameterError(f"negative eigenvalue {emin:.3g}")
        return self

    def min_eigenvalue(self) -> float:
        m = self.matrix
        return float(np.linalg.eigvalsh((m + m.conj().T) / 2.0).min())

    def __repr__(self):
        return f"DensityMatrix(dims={self.space.mode_dims})"


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def require_truncation(alpha: complex, dim: int) -> None:
    """Enforce the truncation guard |alpha|^2 <= dim / 4.

    The quarter-dimension margin keeps the Poisson tail of any coherent
    amplitude the package manipulates below ~1e-8.  Violations raise
    :class:`TruncationError` carrying the smallest acceptable dimension.
    """
    nbar = abs(alpha) ** 2
    if nbar > (dim / 4.0) * (1.0 + 1e-9):  # slack so exact-boundary cases survive roundoff
        raise TruncationError(
            f"|alpha|^2 = {nbar:.4g} exceeds dim/4 = {dim / 4.0:.4g}; "
            f"increase the truncation",
            required_dim=int(math.ceil(4.0 * nbar)),
        )


def annihilation(dim: int) -> Operator:
    """Ladder operator a with entries a[n-1, n] = sqrt(n).

    Parameters
    ----------
    dim : int
        Fock truncation, must be >= 2.
    """
    if dim < 2:
        raise InvalidDimensionError(f"annihilation needs dim >= 2, got {dim}")
    m = np.zeros((dim, dim), dtype=np.complex128)
    ns = np.arange(1, dim)
    m[ns - 1, ns] = np.sqrt(ns)
    return Operator(dim, m)


def creation(dim: int) -> Operator:
    return annihilation(dim).dag()


def number(dim: int) -> Operator:
    if dim < 2:
        raise InvalidDimensionError(f"number needs dim >= 2, got {dim}")
    return Operator(dim, np.diag(np.arange(dim, dtype=np.complex128)))


def identity(space_or_dim) -> Operator:
    space = _as_space(space_or_dim)
    return Operator(space, np.eye(space.total_dim, dtype=np.complex128))


def parity(dim: int) -> Operator:
    """Photon-number parity (-1)^n, diagonal in the Fock basis."""
    if dim < 2:
        raise InvalidDimensionError(f"parity needs dim >= 2, got {dim}")
    diag = (-1.0) ** np.arange(dim)
    return Operator(dim, np.diag(diag.astype(np.complex128)))


def displacement(alpha: complex, dim: int) -> Operator:
    """Displacement operator D(alpha) = exp(alpha a^dag - alpha* a).

    Computed by scaling-and-squaring Pade matrix exponential of the exactly
    anti-Hermitian truncated generator, so the result is unitary to machine
    precision at any truncation.  The truncation guard protects accuracy
    against the infinite-dimensional ideal, not unitarity.
    """
    require_truncation(alpha, dim)
    a = annihilation(dim).matrix
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return Operator(dim, scipy.linalg.expm(gen))


def fock_state(n: int, dim: int) -> StateVector:
    if not 0 <= n < dim:
        raise InvalidDimensionError(f"Fock index {n} outside [0, {dim})")
    amps = np.zeros(dim, dtype=np.complex128)
    amps[n] = 1.0
    return StateVector(dim, amps)


def _coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    # c_n = e^{-|a|^2/2} a^n / sqrt(n!), built recursively for stability
    amps = np.empty(dim, dtype=np.complex128)
    amps[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, dim):
        amps[n] = amps[n - 1] * alpha / math.sqrt(n)
    return amps


def coherent_state(alpha: complex, dim: int) -> StateVector:
    """Truncated coherent state |alpha>, renormalized after truncation."""
    require_truncation(alpha, dim)
    return StateVector(dim, _coherent_amplitudes(alpha, dim), normalize=True)


def cat_state(alpha: complex, phi: float, dim: int) -> StateVector:
    """Normalized N(|alpha> + e^{i phi} |-alpha>).

    phi = 0 gives the even cat, phi = pi the odd cat.  The amplitudes are
    assembled as (1 + e^{i phi} (-1)^n) c_n(alpha), which avoids cancellation
    error in the parity sector the phase suppresses, so the norm survives
    alpha -> 0.  The exactly degenerate combination (alpha = 0, phi = pi) has
    no limit and raises.
    """
    require_truncation(alpha, dim)
    weights = 1.0 + np.exp(1j * phi) * (-1.0) ** np.arange(dim)
    amps = _coherent_amplitudes(alpha, dim) * weights
    nrm = np.linalg.norm(amps)
    if nrm < 1e-12:
        raise InvalidParameterError(
            "degenerate cat: the superposition cancels to numerical zero "
            "(alpha ~ 0 with phi ~ pi)"
        )
    return StateVector(dim, amps, normalize=True)


def thermal_state(n_th: float, dim: int) -> DensityMatrix:
    """Thermal state with Boltzmann populations ~ (n_th/(1+n_th))^n, renormalized."""
    if n_th < 0:
        raise InvalidParameterError(f"thermal occupation must be >= 0, got {n_th}")
    if dim < 2:
        raise InvalidDimensionError(f"thermal_state needs dim >= 2, got {dim}")
    r = n_th / (1.0 + n_th)
    pops = np.power(r, np.arange(dim))
    pops = pops / pops.sum()
    m = np.diag(pops.astype(np.complex128))
    for _ in range(4):  # absorb renormalization residual: trace exactly 1
        resid = 1.0 - np.trace(m).real
        if resid == 0.0:
            break
        m[0, 0] += resid
    return DensityMatrix(dim, m)


# ---------------------------------------------------------------------------
# combinators
# ---------------------------------------------------------------------------

def tensor(a, b):
    """Kronecker product of two operators or states (storage-first ordering).

    The left factor's modes come first in the combined space, i.e.
    ``tensor(X_S, Y_R)`` acts as X on the storage indices and Y on the
    reservoir indices.
    """
    space = HilbertSpace(a.space.mode_dims + b.space.mode_dims)
    if isinstance(a, Operator) and isinstance(b, Operator):
        return Operator(space, np.kron(a.matrix, b.matrix))
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(space, np.kron(a.amplitudes, b.amplitudes))
    # any mix involving a density matrix promotes both sides
    am = a.to_density_matrix() if isinstance(a, StateVector) else a
    bm = b.to_density_matrix() if isinstance(b, StateVector) else b
    if isinstance(am, DensityMatrix) and isinstance(bm, DensityMatrix):
        return DensityMatrix(space, np.kron(am.matrix, bm.matrix))
    raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def expect(op: Operator, state) -> complex:
    """Tr[A rho] for density matrices, <psi|A|psi> for state vectors."""
    _check_same_space(op, state)
    if isinstance(state, DensityMatrix):
        return complex(np.einsum("ij,ji->", op.matrix, state.matrix))
    if isinstance(state, StateVector):
        return complex(np.vdot(state.amplitudes, op.matrix @ state.amplitudes))
    raise TypeError(f"expect() takes a DensityMatrix or StateVector, got {type(state).__name__}")


def partial_trace(rho: DensityMatrix, keep: int) -> DensityMatrix:
    """Trace out all modes except ``keep`` (0-based mode index)."""
    dims = rho.space.mode_dims
    if not 0 <= keep < len(dims):
        raise InvalidDimensionError(f"mode index {keep} outside 0..{len(dims) - 1}")
    n = len(dims)
    t = rho.matrix.reshape(dims + dims)
    # contract bra/ket indices of every traced mode
    letters = "abcdefghijkl"
    row = list(letters[:n])
    col = [letters[i] if i != keep else letters[n] for i in range(n)]
    sub = "".join(row) + "".join(col) + "->" + letters[keep] + letters[n]
    reduced = np.einsum(sub, t)
    return DensityMatrix(dims[keep], reduced)


def pad_fock(obj, dim: int):
    """Embed a single-mode state into a larger truncation, padding with zeros."""
    if obj.space.n_modes != 1:
        raise SpaceMismatchError("pad_fock handles single-mode objects only")
    old = obj.space.total_dim
    if dim < old:
        raise InvalidDimensionError(f"target dim {dim} smaller than current {old}")
    if dim == old:
        return obj
    if isinstance(obj, StateVector):
        amps = np.zeros(dim, dtype=np.complex128)
        amps[:old] = obj.amplitudes
        return StateVector(dim, amps)
    if isinstance(obj, DensityMatrix):
        m = np.zeros((dim, dim), dtype=np.complex128)
        m[:old, :old] = obj.matrix
        return DensityMatrix(dim, m)
    if isinstance(obj, Operator):
        raise TypeError("pad_fock is for states; rebuild operators at the target dim")
    raise TypeError(f"cannot pad {type(obj).__name__}")
