"""Lindblad models for a cat qubit stabilized by two-photon dissipation.

Two model families are provided.  The reduced single-mode model keeps only
the storage cavity and expresses the engineered reservoir as a two-photon
collapse operator a^2 - alpha_inf^2 with rate kappa2.  The full two-mode
model retains the lossy reservoir explicitly, with a two-photon exchange
g a_S^2 a_R^dag + h.c., a reservoir drive, all Kerr terms and a thermal bath.

Dissipator convention
---------------------
Rates stored here are GKSL rates: a term (L, kappa) contributes

    kappa * (L rho L^dag - 1/2 {L^dag L, rho}).

Device papers often write (kappa/2) * D[L] with D[L] rho = 2 L rho L^dag
- L^dag L rho - rho L^dag L; that is the same superoperator, so a quoted
"kappa/2 D[L]" enters here simply as rate = kappa.  The identity is covered
by a dedicated test.

Units are angular throughout: rad/us for every rate and drive amplitude,
us for every duration.  A tabulated ordinary frequency f in MHz enters as
2 pi f (see :mod:`zenocat.units`).
"""

from __future__ import annotations

import cmath
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .envelopes import PiecewisePoly, piecewise_linear
from .errors import AdiabaticityWarning, CalibrationError, InvalidParameterError
from .fock import (
    HilbertSpace,
    Operator,
    annihilation,
    identity,
    require_truncation,
    tensor,
)

__all__ = [
    "STAB_CHANNEL",
    "ZENO_CHANNEL",
    "HamiltonianTerm",
    "DissipatorTerm",
    "LindbladModel",
    "ReducedParams",
    "FullParams",
    "Protocol",
    "CalibrationResult",
    "alpha_inf",
    "build_reduced",
    "build_full",
    "effective_params",
    "calibrate_full_to_reduced",
    "stark_chi",
    "apply_protocol",
]

# Envelope channel ids.  "stab" scales the stabilization drive amplitudes
# (eps2 in the reduced model, g and eps_R in the full one); "zeno" gates the
# weak rotation drive eps.
STAB_CHANNEL = "stab"
ZENO_CHANNEL = "zeno"

Envelope = PiecewisePoly | Callable[[float], float]


@dataclass(frozen=True)
class HamiltonianTerm:
    """One Hermitian contribution to H(t); ``channel`` names its envelope."""

    op: Operator
    channel: str | None = None

    def __post_init__(self):
        if not self.op.is_hermitian(1e-10):
            raise InvalidParameterError("Hamiltonian terms must be Hermitian")


@dataclass(frozen=True)
class DissipatorTerm:
    """A GKSL dissipation channel with rate in rad/us.

    The collapse operator may carry an envelope on part of itself:

        L(t) = (collapse - modulated) + env(t) * modulated

    so at full envelope L == ``collapse``.  ``modulated`` is None for
    time-independent channels.
    """

    collapse: Operator
    rate: float
    modulated: Operator | None = None
    channel: str | None = None

    def __post_init__(self):
        if self.rate < 0:
            raise InvalidParameterError(f"dissipator rate must be >= 0, got {self.rate}")
        if (self.modulated is None) != (self.channel is None):
            raise InvalidParameterError("modulated part and channel come together")
        if self.modulated is not None and self.modulated.space != self.collapse.space:
            raise InvalidParameterError("modulated part must share the collapse space")

    @property
    def static_part(self) -> Operator:
        if self.modulated is None:
            return self.collapse
        return self.collapse - self.modulated


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian terms + dissipators + optional envelopes, all immutable."""

    space: HilbertSpace
    h_terms: tuple[HamiltonianTerm, ...]
    dissipators: tuple[DissipatorTerm, ...]
    envelopes: Mapping[str, Envelope] = field(default_factory=dict)

    def __post_init__(self):
        for t in self.h_terms:
            if t.op.space != self.space:
                raise InvalidParameterError("all Hamiltonian terms must share the model space")
        for d in self.dissipators:
            if d.collapse.space != self.space:
                raise InvalidParameterError("all dissipators must share the model space")
        object.__setattr__(self, "envelopes", dict(self.envelopes))

    def envelope_value(self, channel: str | None, t: float) -> float:
        if channel is None:
            return 1.0
        env = self.envelopes.get(channel)
        return 1.0 if env is None else float(env(t))

    @property
    def hamiltonian(self) -> Operator:
        """H with every envelope at full strength."""
        return self.hamiltonian_at(None)

    def hamiltonian_at(self, t: float | None) -> Operator:
        h = np.zeros((self.space.total_dim,) * 2, dtype=np.complex128)
        for term in self.h_terms:
            scale = 1.0 if t is None else self.envelope_value(term.channel, t)
            h = h + scale * term.op.matrix
        return Operator(self.space, h)

    def collapse_at(self, term: DissipatorTerm, t: float | None) -> Operator:
        if term.modulated is None or t is None:
            return term.collapse
        u = self.envelope_value(term.channel, t)
        return term.static_part + u * term.modulated

    @property
    def is_time_dependent(self) -> bool:
        channels = {t.channel for t in self.h_terms if t.channel is not None}
        channels |= {d.channel for d in self.dissipators if d.channel is not None}
        return any(c in self.envelopes for c in channels)

    def with_envelopes(self, envelopes: Mapping[str, Envelope]) -> "LindbladModel":
        return replace(self, envelopes=dict(envelopes))


# ---------------------------------------------------------------------------
# parameter sets (all angular rad/us; durations us)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedParams:
    """Single-mode storage model parameters."""

    eps2: complex          # two-photon pump amplitude
    kappa2: float          # two-photon loss rate
    kappa1: float = 0.0    # single-photon loss rate
    chi_ss: float = 0.0    # storage self-Kerr
    eps: complex = 0.0     # rotation (Zeno) drive amplitude
    dim_s: int = 30

    def __post_init__(self):
        if self.kappa2 < 0 or self.kappa1 < 0:
            raise InvalidParameterError("rates must be >= 0")
        if self.eps2 != 0 and self.kappa2 <= 0:
            raise InvalidParameterError("kappa2 must be > 0 when eps2 is nonzero")

    @property
    def alpha_inf(self) -> complex:
        if self.eps2 == 0:
            return 0j
        return alpha_inf(self.eps2, self.kappa2)

    @property
    def nbar(self) -> float:
        return abs(self.alpha_inf) ** 2


@dataclass(frozen=True)
class FullParams:
    """Two-mode storage + reservoir model parameters."""

    g: complex             # two-photon exchange amplitude
    eps_r: complex         # reservoir drive
    eps: complex = 0.0     # rotation drive on the storage
    chi_rr: float = 0.0    # reservoir self-Kerr
    chi_ss: float = 0.0    # storage self-Kerr
    chi_rs: float = 0.0    # cross-Kerr
    delta_r: float = 0.0   # reservoir detuning
    delta_p: float = 0.0   # pump detuning
    kappa_r: float = 1.0   # reservoir loss rate = 1 / T_1R
    n_th: float = 0.0      # reservoir thermal occupation
    kappa1: float = 0.0    # storage single-photon loss
    dim_s: int = 30
    dim_r: int = 3

    def __post_init__(self):
        if self.kappa_r <= 0:
            raise InvalidParameterError("kappa_r must be > 0")
        if self.n_th < 0 or self.kappa1 < 0:
            raise InvalidParameterError("n_th and kappa1 must be >= 0")

    @property
    def alpha_inf(self) -> complex:
        """Stabilized amplitude implied by adiabatic elimination, sqrt(-eps_r/g)."""
        if self.g == 0:
            return 0j
        return _principal_sqrt(-self.eps_r / self.g)


@dataclass(frozen=True)
class Protocol:
    """Drive timing: linear ramp on, hold, stabilized tail, linear ramp off."""

    ramp_on: float = 0.024
    hold: float = 0.0
    tail: float = 0.5
    ramp_off: float = 0.024

    def __post_init__(self):
        for name in ("ramp_on", "hold", "tail", "ramp_off"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")

    @property
    def total(self) -> float:
        return self.ramp_on + self.hold + self.tail + self.ramp_off


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------

def _principal_sqrt(z: complex) -> complex:
    z = complex(z)
    if z.imag == 0.0:
        z = complex(z.real, 0.0)  # strip -0.0 so the principal branch is stable
    return cmath.sqrt(z)


def alpha_inf(eps2: complex, kappa2: float) -> complex:
    """Stabilized coherent amplitude, principal sqrt of 2 eps2 / kappa2."""
    if kappa2 <= 0:
        raise InvalidParameterError(f"kappa2 must be > 0, got {kappa2}")
    return _principal_sqrt(2.0 * complex(eps2) / kappa2)


def effective_params(g: complex, eps_r: complex, kappa_r: float) -> tuple[float, complex]:
    """Adiabatic-elimination seeds (kappa2, eps2) for the reduced model.

    kappa2 = 4|g|^2 / kappa_r and eps2 = -2 g* eps_r / kappa_r, which places
    the stabilized amplitude at alpha_inf^2 = -eps_r / g.  These are seed
    values only; calibrate_full_to_reduced measures the ground truth from the
    simulated full model.  Warns when kappa_r / |g| < 10, where the
    elimination starts to lose accuracy.
    """
    if kappa_r <= 0:
        raise InvalidParameterError(f"kappa_r must be > 0, got {kappa_r}")
    if g != 0 and kappa_r / abs(g) < 10.0:
        warnings.warn(
            f"kappa_r/|g| = {kappa_r / abs(g):.2f} < 10: adiabatic elimination "
            "is marginal, validate with calibrate_full_to_reduced",
            AdiabaticityWarning,
            stacklevel=2,
        )
    kappa2 = 4.0 * abs(g) ** 2 / kappa_r
    eps2 = -2.0 * complex(g).conjugate() * complex(eps_r) / kappa_r
    return kappa2, eps2


def stark_chi(chi_rr: float, delta_s: float, delta_r: float) -> float:
    """Cross-Kerr from the Stark-shift ratio: 2 chi_rr delta_s / delta_r."""
    if delta_r == 0:
        raise InvalidParameterError("delta_r must be nonzero")
    return 2.0 * chi_rr * delta_s / delta_r


# ---------------------------------------------------------------------------
# model builders
# ---------------------------------------------------------------------------

def build_reduced(p: ReducedParams) -> LindbladModel:
    """Reduced storage-only model.

    H = -(chi_ss/2) a+^2 a^2 + (eps a+ + eps* a), two-photon dissipator
    (a^2 - alpha_inf^2, kappa2) and single-photon loss (a, kappa1).  The
    alpha_inf^2 offset is tagged with the stabilization channel so protocol
    envelopes scale eps2 (equivalently alpha_inf^2) rather than kappa2.
    """
    d = p.dim_s
    a = annihilation(d)
    adag = a.dag()
    one = identity(d)

    h_terms = []
    if p.chi_ss != 0.0:
        kerr = adag @ adag @ a @ a
        h_terms.append(HamiltonianTerm(-0.5 * p.chi_ss * kerr))
    if p.eps != 0:
        h_terms.append(HamiltonianTerm(p.eps * adag + np.conj(p.eps) * a, channel=ZENO_CHANNEL))

    dissipators = []
    if p.kappa2 > 0:
        a2_inf = 2.0 * complex(p.eps2) / p.kappa2
        require_truncation(_principal_sqrt(a2_inf), d)
        offset = -a2_inf * one
        dissipators.append(
            DissipatorTerm(
                collapse=a @ a + offset,
                rate=p.kappa2,
                modulated=offset if a2_inf != 0 else None,
                channel=STAB_CHANNEL if a2_inf != 0 else None,
            )
        )
    if p.kappa1 > 0:
        dissipators.append(DissipatorTerm(collapse=a, rate=p.kappa1))

    return LindbladModel(HilbertSpace((d,)), tuple(h_terms), tuple(dissipators))


def build_full(p: FullParams) -> LindbladModel:
    """Full storage (x) reservoir model.

    H = (g a_S^2 a_R+ + h.c.) + (eps_R a_R+ + h.c.) + (eps a_S+ + h.c.)
        - (chi_RR/2) a_R+^2 a_R^2 - (chi_SS/2) a_S+^2 a_S^2
        - chi_RS n_R n_S + Delta_R n_R + (Delta_R + Delta_P)/2 n_S

    with GKSL dissipators (a_S, kappa1), (a_R, (1+n_th) kappa_r) and
    (a_R+, n_th kappa_r).  g and eps_R share the stabilization envelope
    channel; eps is on the rotation channel.
    """
    if p.g != 0 and p.eps_r != 0:
        require_truncation(p.alpha_inf, p.dim_s)

    space = HilbertSpace((p.dim_s, p.dim_r))
    a_s = tensor(annihilation(p.dim_s), identity(p.dim_r))
    a_r = tensor(identity(p.dim_s), annihilation(p.dim_r))
    n_s = a_s.dag() @ a_s
    n_r = a_r.dag() @ a_r

    h_terms = []
    if p.g != 0:
        conv = p.g * (a_s @ a_s @ a_r.dag())
        h_terms.append(HamiltonianTerm(conv + conv.dag(), channel=STAB_CHANNEL))
    if p.eps_r != 0:
        h_terms.append(
            HamiltonianTerm(p.eps_r * a_r.dag() + np.conj(p.eps_r) * a_r, channel=STAB_CHANNEL)
        )
    if p.eps != 0:
        h_terms.append(
            HamiltonianTerm(p.eps * a_s.dag() + np.conj(p.eps) * a_s, channel=ZENO_CHANNEL)
        )
    if p.chi_rr != 0.0:
        h_terms.append(HamiltonianTerm(-0.5 * p.chi_rr * (a_r.dag() @ a_r.dag() @ a_r @ a_r)))
    if p.chi_ss != 0.0:
        h_terms.append(HamiltonianTerm(-0.5 * p.chi_ss * (a_s.dag() @ a_s.dag() @ a_s @ a_s)))
    if p.chi_rs != 0.0:
        h_terms.append(HamiltonianTerm(-p.chi_rs * (n_r @ n_s)))
    if p.delta_r != 0.0:
        h_terms.append(HamiltonianTerm(p.delta_r * n_r))
    if p.delta_r + p.delta_p != 0.0:
        h_terms.append(HamiltonianTerm(0.5 * (p.delta_r + p.delta_p) * n_s))

    dissipators = []
    if p.kappa1 > 0:
        dissipators.append(DissipatorTerm(collapse=a_s, rate=p.kappa1))
    dissipators.append(DissipatorTerm(collapse=a_r, rate=(1.0 + p.n_th) * p.kappa_r))
    if p.n_th > 0:
        dissipators.append(DissipatorTerm(collapse=a_r.dag(), rate=p.n_th * p.kappa_r))

    return LindbladModel(space, tuple(h_terms), tuple(dissipators))


def apply_protocol(model: LindbladModel, proto: Protocol) -> LindbladModel:
    """Attach the pulse-sequence envelopes to a model.

    Stabilization channel: linear ramp over ramp_on, flat through hold and
    tail, linear ramp down over ramp_off.  Rotation channel: rectangular
    window covering exactly the hold.  Zero-duration segments degenerate to
    steps; a protocol with all durations zero yields identically-off drives.
    """
    t1 = proto.ramp_on
    t2 = t1 + proto.hold
    t3 = t2 + proto.tail
    t4 = t3 + proto.ramp_off
    t_end = t4 + 1.0  # closing knot; envelopes clamp constant beyond it
    stab = piecewise_linear([(0, 0), (t1, 1), (t3, 1), (t4, 0), (t_end, 0)])
    zeno = piecewise_linear([(0, 0), (t1, 0), (t1, 1), (t2, 1), (t2, 0), (t_end, 0)])
    return model.with_envelopes({**model.envelopes, STAB_CHANNEL: stab, ZENO_CHANNEL: zeno})


# ---------------------------------------------------------------------------
# numerical calibration of the reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationResult:
    kappa2_eff: float
    alpha_inf_eff: complex
    rate_full: float       # fitted <a_S^2> convergence rate of the full model
    rate_reference: float  # same fit on the seeded reduced model
    kappa2_seed: float
    eps2_seed: complex


def _convergence_rate(times, values, asymptote) -> float:
    """Log-linear rate of |asymptote - values| through its mid decade."""
    resid = np.abs(asymptote - values)
    scale = max(np.max(resid), 1e-300)
    mask = (resid > 0.02 * scale) & (resid < 0.7 * scale)
    if mask.sum() < 6:
        raise CalibrationError(
            "not enough points in the exponential window to fit a rate",
            diagnostics={"n_window": int(mask.sum()), "residual_scale": float(scale)},
        )
    slope = np.polyfit(times[mask], np.log(resid[mask]), 1)[0]
    if slope >= 0:
        raise CalibrationError(
            "residual is not decaying; model did not converge over the horizon",
            diagnostics={"slope": float(slope)},
        )
    return -float(slope)


def calibrate_full_to_reduced(
    p: FullParams, horizon: float, cfg=None, samples: int = 400
) -> CalibrationResult:
    """Measure the effective (kappa2, alpha_inf) of a full two-mode model.

    Simulates the full model from vacuum (x) thermal and fits the complex
    storage <a_S^2> trajectory: the fitted asymptote gives alpha_inf_eff^2
    and the convergence rate, compared against a seeded reduced model run
    with the same amplitude, rescales the seed kappa2.  The returned values
    are the ground truth the adiabatic-elimination formulas are checked
    against.
    """
    from .engine import SolverConfig, evolve
    from .fock import coherent_state, fock_state, thermal_state

    if cfg is None:
        cfg = SolverConfig(rtol=1e-6, atol=1e-9)
    kappa2_seed, eps2_seed = effective_params(p.g, p.eps_r, p.kappa_r)
    if p.g == 0:
        return CalibrationResult(0.0, 0j, 0.0, 0.0, 0.0, 0j)

    driven = p.eps_r != 0
    if driven:
        psi_s = fock_state(0, p.dim_s)
    else:
        psi_s = coherent_state(1.0, p.dim_s)  # probe so <a^2> has a signal to decay
    rho0 = tensor(psi_s.to_density_matrix(), thermal_state(p.n_th, p.dim_r))

    a_s = annihilation(p.dim_s)
    a2_full = tensor(a_s @ a_s, identity(p.dim_r))
    times = np.linspace(0.0, horizon, samples)
    res = evolve(build_full(p), rho0, times, cfg, {"a2": a2_full})
    z = res.expectations["a2"]

    tail = z[int(0.85 * samples):]
    asymptote = complex(np.mean(tail))
    if driven and abs(asymptote) < 1e-6:
        raise CalibrationError(
            "driven model produced no stabilized amplitude",
            diagnostics={"asymptote": asymptote},
        )
    if not driven:
        asymptote = 0j
    settle = abs(z[-1] - asymptote)
    if settle > 0.05 * max(abs(asymptote), abs(z[0]), 1e-12):
        raise CalibrationError(
            "storage <a^2> did not settle within the horizon",
            diagnostics={"residual": float(settle), "asymptote": asymptote},
        )
    rate_full = _convergence_rate(times, z, asymptote)

    # reference: reduced model at the seed kappa2 and the *measured* amplitude
    eps2_ref = 0.5 * kappa2_seed * asymptote
    p_ref = ReducedParams(
        eps2=eps2_ref, kappa2=kappa2_seed, kappa1=p.kappa1, chi_ss=p.chi_ss, dim_s=p.dim_s
    )
    rho0_ref = psi_s.to_density_matrix()
    res_ref = evolve(build_reduced(p_ref), rho0_ref, times, cfg, {"a2": a_s @ a_s})
    rate_ref = _convergence_rate(times, res_ref.expectations["a2"], asymptote)

    kappa2_eff = kappa2_seed * rate_full / rate_ref
    return CalibrationResult(
        kappa2_eff=float(kappa2_eff),
        alpha_inf_eff=_principal_sqrt(asymptote),
        rate_full=rate_full,
        rate_reference=rate_ref,
        kappa2_seed=kappa2_seed,
        eps2_seed=eps2_seed,
    )
