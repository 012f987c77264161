"""Wigner functions, the cat-qubit logical basis, and Bloch-sphere readout.

The Wigner function is computed as a displaced-parity expectation,

    W(alpha) = (2/pi) Tr[D(alpha) P D(alpha)^dag rho],

optionally without the 2/pi prefactor ("parity" normalization, values in
[-1, 1]).  Displacements obey the truncation guard, so evaluating a grid
that extends past sqrt(dim)/2 requires padding the state first (pad_fock).

Logical basis convention: the qubit poles are the exact truncated cat
states, Z_L = |C+><C+| - |C-><C-| (equivalently parity restricted to the
manifold), X_L/Y_L the corresponding equatorial operators.  The rotation
drive with amplitude phase equal to the cat phase generates a right-handed
rotation about +X_L, taking the Z pole toward -Y.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InvalidParameterError, SpaceMismatchError, UndefinedLeakageError
from .fock import (
    DensityMatrix,
    Operator,
    StateVector,
    cat_state,
    displacement,
    expect,
    parity,
    require_truncation,
)

__all__ = [
    "WignerGrid",
    "LogicalBasis",
    "BlochVector",
    "wigner_point",
    "wigner_grid",
    "displaced_parity",
    "pad_dim_for_grid",
    "logical_basis",
    "cardinal_state",
    "bloch_vector",
    "phase_flip_leakage",
]

Normalization = Literal["quasi_probability", "parity"]
_PREFACTOR = {"quasi_probability": 2.0 / np.pi, "parity": 1.0}


@dataclass(frozen=True)
class WignerGrid:
    """W sampled on a rectangular phase-space grid.

    ``values[i, j]`` corresponds to alpha = re_axis[i] + 1j * im_axis[j]
    (row index scans the real axis).
    """

    re_axis: np.ndarray
    im_axis: np.ndarray
    values: np.ndarray
    normalization: Normalization

    def __post_init__(self):
        if self.values.shape != (len(self.re_axis), len(self.im_axis)):
            raise InvalidParameterError("grid shape mismatch")
        bound = _PREFACTOR[self.normalization] + 1e-9
        if np.max(np.abs(self.values)) > bound:
            raise InvalidParameterError("Wigner values exceed the physical bound")

    def at(self, alpha: complex) -> float:
        """Value at the grid node nearest alpha."""
        i = int(np.argmin(np.abs(self.re_axis - alpha.real)))
        j = int(np.argmin(np.abs(self.im_axis - alpha.imag)))
        return float(self.values[i, j])

    def cut_re_zero(self) -> tuple[np.ndarray, np.ndarray]:
        """The Im(alpha) cut along Re(alpha) = 0 (nearest column)."""
        i = int(np.argmin(np.abs(self.re_axis)))
        return self.im_axis.copy(), self.values[i].copy()


def displaced_parity(alpha: complex, dim: int) -> Operator:
    """D(alpha) P D(alpha)^dag; its expectation is the parity-normalized W."""
    d = displacement(alpha, dim)
    return d @ parity(dim) @ d.dag()


def pad_dim_for_grid(re_axis, im_axis, min_dim: int) -> int:
    """Smallest Fock dimension whose truncation guard admits the whole grid."""
    corner2 = float(np.max(np.abs(re_axis)) ** 2 + np.max(np.abs(im_axis)) ** 2)
    return max(int(min_dim), int(np.ceil(4.0 * corner2)))


def _check_single_mode(rho):
    if rho.space.n_modes != 1:
        raise SpaceMismatchError(
            "Wigner tomography works on a single storage mode; trace out the "
            "other modes first (partial_trace)"
        )


def wigner_point(
    rho: DensityMatrix, alpha: complex, normalization: Normalization = "quasi_probability"
) -> float:
    """W(alpha) of a single-mode state."""
    _check_single_mode(rho)
    dim = rho.space.total_dim
    op = displaced_parity(alpha, dim)
    val = expect(op, rho)
    return _PREFACTOR[normalization] * val.real


def wigner_grid(
    rho: DensityMatrix,
    re_axis,
    im_axis,
    normalization: Normalization = "quasi_probability",
) -> WignerGrid:
    """W on a rectangular grid.

    Uses the factorization D(x + iy) = e^{ixy} D(x) D(iy), whose phase
    cancels in the parity conjugation, so the grid costs one displacement
    exponential per axis node instead of one per grid point.
    """
    _check_single_mode(rho)
    dim = rho.space.total_dim
    re_axis = np.asarray(re_axis, dtype=float)
    im_axis = np.asarray(im_axis, dtype=float)
    corner = np.sqrt(np.max(np.abs(re_axis)) ** 2 + np.max(np.abs(im_axis)) ** 2)
    require_truncation(corner, dim)

    pmat = parity(dim).matrix
    d_im = [displacement(1j * y, dim).matrix for y in im_axis]
    # M_y = D(iy) P D(iy)^dag, flattened for one dot product per grid point
    m_rows = np.stack([(dm @ pmat @ dm.conj().T).ravel(order="C") for dm in d_im])

    pref = _PREFACTOR[normalization]
    values = np.empty((len(re_axis), len(im_axis)))
    for i, x in enumerate(re_axis):
        dx = displacement(x, dim).matrix
        rho_x = dx.conj().T @ rho.matrix @ dx
        values[i] = pref * (m_rows @ rho_x.ravel(order="F")).real
    return WignerGrid(re_axis, im_axis, values, normalization)


@dataclass(frozen=True)
class LogicalBasis:
    """Cat-qubit logical operators at amplitude alpha."""

    alpha: complex
    c_plus: StateVector
    c_minus: StateVector
    projector: Operator
    x_l: Operator
    y_l: Operator
    z_l: Operator


def logical_basis(alpha: complex, dim: int) -> LogicalBasis:
    """Exact truncated cat basis: orthonormal by parity at any amplitude."""
    cp = cat_state(alpha, 0.0, dim)
    cm = cat_state(alpha, np.pi, dim)
    space = cp.space
    outer_pp = np.outer(cp.amplitudes, cp.amplitudes.conj())
    outer_mm = np.outer(cm.amplitudes, cm.amplitudes.conj())
    outer_pm = np.outer(cp.amplitudes, cm.amplitudes.conj())
    return LogicalBasis(
        alpha=complex(alpha),
        c_plus=cp,
        c_minus=cm,
        projector=Operator(space, outer_pp + outer_mm),
        x_l=Operator(space, outer_pm + outer_pm.conj().T),
        y_l=Operator(space, -1j * outer_pm + 1j * outer_pm.conj().T),
        z_l=Operator(space, outer_pp - outer_mm),
    )


def cardinal_state(basis: LogicalBasis, theta: float, phi: float) -> StateVector:
    """cos(theta/2) |C+> + e^{i phi} sin(theta/2) |C->."""
    amps = (
        np.cos(theta / 2) * basis.c_plus.amplitudes
        + np.exp(1j * phi) * np.sin(theta / 2) * basis.c_minus.amplitudes
    )
    return StateVector(basis.c_plus.space, amps, normalize=True)


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float
    leakage: float

    def __post_init__(self):
        if not -1e-6 <= self.leakage <= 1.0 + 1e-6:
            raise InvalidParameterError(f"leakage {self.leakage} outside [0, 1]")

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.x**2 + self.y**2 + self.z**2))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def bloch_vector(rho: DensityMatrix, basis: LogicalBasis) -> BlochVector:
    """Logical Pauli expectations and out-of-manifold leakage of rho."""
    if rho.space != basis.projector.space:
        raise SpaceMismatchError("state and logical basis live on different spaces")
    x = expect(basis.x_l, rho).real
    y = expect(basis.y_l, rho).real
    z = expect(basis.z_l, rho).real
    leak = 1.0 - expect(basis.projector, rho).real
    return BlochVector(x=x, y=y, z=z, leakage=min(max(leak, 0.0), 1.0))


def phase_flip_leakage(rho: DensityMatrix, alpha: complex) -> float:
    """Population ratio W(-alpha) / (W(alpha) + W(-alpha)).

    Parity-normalized Wigner values clipped below at zero; insensitive to an
    overall amplitude calibration of the Wigner measurement.  Raises when
    both lobes are non-positive (no population at either coherent lobe).
    """
    w_plus = max(wigner_point(rho, alpha, "parity"), 0.0)
    w_minus = max(wigner_point(rho, -alpha, "parity"), 0.0)
    if w_plus + w_minus <= 0.0:
        raise UndefinedLeakageError(
            f"both Wigner lobes at +-{alpha} are non-positive; leakage undefined"
        )
    return w_minus / (w_plus + w_minus)
