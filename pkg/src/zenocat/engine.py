"""Lindblad evolution: superoperators, adaptive integration, steady states.

Vectorization convention (fixed, shared with the oracle): column stacking,
vec(rho) = rho.ravel(order="F"), under which

    vec(A rho B) = (B^T kron A) vec(rho)

so the generator of d rho/dt = -i[H, rho] + sum_k kappa_k D[L_k] rho is

    L = -i (I kron H - H^T kron I)
        + sum_k kappa_k [ conj(L_k) kron L_k
                          - 1/2 I kron (L_k^dag L_k)
                          - 1/2 (L_k^dag L_k)^T kron I ].

Observables sample as plain dot products: Tr[A rho] = vec_C(A) . vec_F(rho)
where vec_C is row-major raveling.

The integrator is an explicit embedded Dormand-Prince 5(4) pair with PI step
control and cubic-Hermite dense output, run by either a compiled Cython
kernel or its pure-Python twin (see ``_backend``).  A single evolve call is
sequential and deterministic: identical inputs give bitwise-identical output
on the same platform and backend.  Positivity is monitored by callers, never
enforced.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import _backend
from .envelopes import PiecewisePoly
from .errors import (
    DegenerateSteadyStateError,
    InvalidParameterError,
    SpaceMismatchError,
    ZenocatError,
)
from .fock import DensityMatrix, HilbertSpace, Operator
from .model import DissipatorTerm, LindbladModel

__all__ = [
    "SolverConfig",
    "SuperoperatorMatrix",
    "EvolutionResult",
    "liouvillian",
    "compile_model",
    "evolve",
    "evolve_expm",
    "steady_state",
]


@dataclass(frozen=True)
class SolverConfig:
    rtol: float = 1e-8
    atol: float = 1e-11
    max_step: float = math.inf
    store_states: bool = False

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise InvalidParameterError("rtol and atol must be > 0")


@dataclass(frozen=True)
class SuperoperatorMatrix:
    """Dense Liouvillian snapshot under column-stacking vectorization."""

    space: HilbertSpace
    matrix: np.ndarray

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = self.space.total_dim
        return (self.matrix @ rho.ravel(order="F")).reshape((d, d), order="F")


@dataclass(frozen=True)
class EvolutionResult:
    times: np.ndarray
    expectations: dict[str, np.ndarray]
    states: list[DensityMatrix] | None = None
    stats: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# superoperator assembly
# ---------------------------------------------------------------------------

def _csr(op: Operator) -> sp.csr_matrix:
    m = sp.csr_matrix(op.matrix)
    m.eliminate_zeros()
    return m


def _ham_super(h: sp.spmatrix, d: int) -> sp.csr_matrix:
    eye = sp.identity(d, dtype=np.complex128, format="csr")
    return (-1j * (sp.kron(eye, h, "csr") - sp.kron(h.T, eye, "csr"))).tocsr()


def _gksl_bilinear(a: sp.spmatrix, b: sp.spmatrix, d: int) -> sp.csr_matrix:
    """G(A, B) = conj(A) kron B - 1/2 I kron A+B - 1/2 (A+B)^T kron I.

    D[L] = G(L, L); for L = A + u B the dissipator expands to
    G(A,A) + u [G(A,B) + G(B,A)] + u^2 G(B,B) for real u.
    """
    eye = sp.identity(d, dtype=np.complex128, format="csr")
    ab = (a.getH() @ b).tocsr()
    return (
        sp.kron(a.conj(), b, "csr")
        - 0.5 * sp.kron(eye, ab, "csr")
        - 0.5 * sp.kron(ab.T, eye, "csr")
    ).tocsr()


def _canonical(m: sp.spmatrix) -> sp.csr_matrix:
    m = m.tocsr()
    m.sum_duplicates()
    m.sort_indices()
    m.eliminate_zeros()
    return m


def _term_coeff(env, power: int):
    if isinstance(env, PiecewisePoly):
        return env if power == 1 else env.power(power)
    if power == 1:
        return env
    return lambda t, _env=env, _p=power: float(_env(t)) ** _p


@dataclass
class CompiledLindblad:
    """Sparse split L(t) = static + sum_j c_j(t) M_j ready for the stepper."""

    dim: int
    static: sp.csr_matrix
    term_coeffs: list
    term_mats: list[sp.csr_matrix]
    breakpoints: np.ndarray


def compile_model(model: LindbladModel) -> CompiledLindblad:
    d = model.space.total_dim
    shape = (d * d, d * d)
    static = sp.csr_matrix(shape, dtype=np.complex128)
    dyn: dict[tuple[str, int], sp.spmatrix] = {}

    def add_dyn(channel: str, power: int, mat: sp.spmatrix):
        key = (channel, power)
        dyn[key] = mat if key not in dyn else dyn[key] + mat

    for term in model.h_terms:
        sup = _ham_super(_csr(term.op), d)
        if term.channel is not None and term.channel in model.envelopes:
            add_dyn(term.channel, 1, sup)
        else:
            static = static + sup

    for dt in model.dissipators:
        active = dt.channel is not None and dt.channel in model.envelopes
        if not active:
            ell = _csr(dt.collapse)
            static = static + dt.rate * _gksl_bilinear(ell, ell, d)
        else:
            a = _csr(dt.static_part)
            b = _csr(dt.modulated)
            static = static + dt.rate * _gksl_bilinear(a, a, d)
            cross = _gksl_bilinear(a, b, d) + _gksl_bilinear(b, a, d)
            add_dyn(dt.channel, 1, dt.rate * cross)
            add_dyn(dt.channel, 2, dt.rate * _gksl_bilinear(b, b, d))

    coeffs, mats = [], []
    for (channel, power), mat in dyn.items():
        coeffs.append(_term_coeff(model.envelopes[channel], power))
        mats.append(_canonical(mat))

    breaks: list[float] = []
    used = {t.channel for t in model.h_terms} | {dt.channel for dt in model.dissipators}
    for channel, env in model.envelopes.items():
        if channel in used and isinstance(env, PiecewisePoly):
            breaks.extend(env.breaks.tolist())
    return CompiledLindblad(
        dim=d,
        static=_canonical(static),
        term_coeffs=coeffs,
        term_mats=mats,
        breakpoints=np.unique(np.asarray(breaks, dtype=float)),
    )


def liouvillian(model: LindbladModel, t: float = 0.0) -> SuperoperatorMatrix:
    """Dense Liouvillian at time t (envelopes evaluated, then frozen)."""
    d = model.space.total_dim
    h = model.hamiltonian_at(t)
    total = _ham_super(_csr(h), d)
    for dt in model.dissipators:
        ell = _csr(model.collapse_at(dt, t))
        total = total + dt.rate * _gksl_bilinear(ell, ell, d)
    return SuperoperatorMatrix(model.space, np.asarray(total.todense()))


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------

def _observable_rows(observables, space) -> tuple[list[str], np.ndarray]:
    if observables is None:
        observables = {}
    if isinstance(observables, Mapping):
        items = list(observables.items())
    else:
        items = [(f"obs{i}", op) for i, op in enumerate(observables)]
    names = []
    rows = np.zeros((len(items), space.total_dim ** 2), dtype=np.complex128)
    for i, (name, op) in enumerate(items):
        if op.space != space:
            raise SpaceMismatchError(f"observable {name!r} lives on a different space")
        rows[i] = op.matrix.ravel(order="C")
        names.append(str(name))
    return names, rows


def evolve(
    model: LindbladModel,
    rho0: DensityMatrix,
    times,
    cfg: SolverConfig | None = None,
    observables: Mapping[str, Operator] | Sequence[Operator] | None = None,
) -> EvolutionResult:
    """Integrate the master equation, sampling observables at ``times``.

    ``times`` must be strictly increasing and start at 0.  Expectations are
    evaluated by dense output at exactly the requested times.
    """
    if cfg is None:
        cfg = SolverConfig()
    if rho0.space != model.space:
        raise SpaceMismatchError("initial state does not live on the model space")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1:
        raise InvalidParameterError("times must be a 1-d array")
    if times[0] != 0.0:
        raise InvalidParameterError("times must start at 0")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise InvalidParameterError("times must be strictly increasing")

    comp = compile_model(model)
    names, rows = _observable_rows(observables, model.space)
    y0 = rho0.matrix.ravel(order="F")
    exps, states_raw, stats = _backend.solve(
        comp.dim,
        comp.static,
        comp.term_coeffs,
        comp.term_mats,
        comp.breakpoints,
        y0,
        times,
        cfg.rtol,
        cfg.atol,
        cfg.max_step,
        rows,
        cfg.store_states,
    )
    stats = dict(stats)
    stats["backend"] = _backend.backend_name()

    states = None
    if cfg.store_states:
        d = comp.dim
        states = [
            DensityMatrix(model.space, states_raw[k].reshape((d, d), order="F"), check=False)
            for k in range(times.size)
        ]
    expectations = {name: exps[i] for i, name in enumerate(names)}
    return EvolutionResult(times=times.copy(), expectations=expectations, states=states, stats=stats)


def evolve_expm(model: LindbladModel, rho0: DensityMatrix, t: float) -> DensityMatrix:
    """Brute-force oracle: apply expm(t L) to vec(rho0).

    Only for small systems (total dim <= 16, dense d^4 cost) and
    time-independent models.
    """
    d = model.space.total_dim
    if d > 16:
        raise InvalidParameterError(f"evolve_expm guards total_dim <= 16, got {d}")
    if model.is_time_dependent:
        raise InvalidParameterError("evolve_expm requires a time-independent model")
    if rho0.space != model.space:
        raise SpaceMismatchError("initial state does not live on the model space")
    if t == 0.0:
        return rho0
    lmat = liouvillian(model).matrix
    propagator = scipy.linalg.expm(t * lmat)
    y = propagator @ rho0.matrix.ravel(order="F")
    return DensityMatrix(model.space, y.reshape((d, d), order="F"), check=False)


# ---------------------------------------------------------------------------
# steady states
# ---------------------------------------------------------------------------

def _hermitize_unit_trace(m: np.ndarray, space) -> DensityMatrix:
    m = 0.5 * (m + m.conj().T)
    tr = np.trace(m)
    if abs(tr) < 1e-12:
        raise ZenocatError("steady-state candidate has vanishing trace")
    return DensityMatrix(space, m / tr, check=False)


def steady_state(
    model: LindbladModel,
    initial: DensityMatrix | None = None,
    max_chunks: int = 400,
) -> DensityMatrix:
    """Stationary state of a time-independent model.

    For total dim <= 24 the Liouvillian kernel is extracted densely by SVD.
    A one-dimensional kernel returns directly.  A degenerate kernel needs the
    caller-supplied ``initial`` state: the result is its projection onto the
    steady subspace through the conserved quantities (left kernel); without
    ``initial`` a DegenerateSteadyStateError lists a vec-orthonormal basis.

    Above total dim 24 the method is long-time integration from ``initial``
    until ||d rho / dt||_max < 1e-9.
    """
    if model.is_time_dependent:
        raise InvalidParameterError("steady_state requires a time-independent model")
    d = model.space.total_dim

    if d <= 24:
        lmat = liouvillian(model).matrix
        u, s, vh = np.linalg.svd(lmat)
        # 1e-7 relative separates the truncation-induced quasi-kernel of a
        # stabilized manifold (tail^2 level) from genuine slow modes, which
        # sit at rate-ratio level (>= 1e-5 relative for the device regime)
        tol = max(1e-7 * (s[0] if s.size else 0.0), 1e-12)
        null_idx = np.where(s < tol)[0]
        if null_idx.size == 0:
            raise ZenocatError("no Liouvillian null vector found (not a GKSL generator?)")
        right = vh.conj().T[:, null_idx]
        if null_idx.size == 1:
            return _hermitize_unit_trace(right[:, 0].reshape((d, d), order="F"), model.space)
        if initial is None:
            basis = [right[:, k].reshape((d, d), order="F") for k in range(null_idx.size)]
            raise DegenerateSteadyStateError(
                f"steady space is {null_idx.size}-dimensional; pass an initial state "
                "to project, or inspect .basis",
                basis=basis,
            )
        left = u[:, null_idx]  # kernel of L^dag: conserved quantities
        gram = left.conj().T @ right
        coords = np.linalg.solve(gram, left.conj().T @ initial.matrix.ravel(order="F"))
        y = right @ coords
        return _hermitize_unit_trace(y.reshape((d, d), order="F"), model.space)

    # large system: integrate from the supplied state until the flow stalls
    if initial is None:
        raise InvalidParameterError(
            f"total dim {d} > 24: steady_state needs an initial state to integrate from"
        )
    comp = compile_model(model)
    rate_scale = max((dt.rate for dt in model.dissipators), default=0.0)
    if rate_scale <= 0:
        raise InvalidParameterError("steady_state by integration needs dissipation")
    chunk = 5.0 / rate_scale
    rho = initial
    # tolerances one decade below the 1e-9 convergence criterion, so the
    # integrator's own noise floor cannot mask a stalled flow
    cfg = SolverConfig(rtol=1e-10, atol=1e-13, store_states=True)
    best = math.inf
    no_progress = 0
    for _ in range(max_chunks):
        deriv = comp.static.dot(rho.matrix.ravel(order="F"))
        resid = float(np.max(np.abs(deriv)))
        if resid < 1e-9:
            return rho
        if resid > 0.999 * best:
            no_progress += 1
        else:
            no_progress = 0
        if resid > 0.5 * best:
            chunk *= 2.0  # slow mode: make more progress between checks
        best = min(best, resid)
        if no_progress >= 3:
            raise ZenocatError(
                f"steady-state residual stalled at {best:.3g} (> 1e-9); likely a "
                "truncation floor, increase the Fock dimension"
            )
        res = evolve(model, rho, np.array([0.0, chunk]), cfg)
        rho = res.states[-1]
    raise ZenocatError(
        f"steady_state did not converge after {max_chunks} chunks of {chunk:.3g} us"
    )
