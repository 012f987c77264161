"""Self-check suite behind the ``validate`` CLI subcommand.

Quick versions of the package's core correctness properties: convention
bridges, the Liouvillian identity, oracle equivalence of the adaptive
integrator against the dense exponential, and basic physicality of a short
stabilization run.  Each check returns (name, passed, detail).
"""

from __future__ import annotations

import numpy as np

from .engine import SolverConfig, evolve, evolve_expm, liouvillian
from .fock import (
    DensityMatrix,
    HilbertSpace,
    Operator,
    annihilation,
    displacement,
    fock_state,
    parity,
)
from .model import DissipatorTerm, HamiltonianTerm, LindbladModel, ReducedParams, build_reduced
from .units import angular_to_mhz, mhz_to_angular


def _random_model(dim, rng, rate_scale=1.0):
    h = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = Operator(dim, (h + h.conj().T) / 2)
    diss = []
    for _ in range(2):
        ell = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        diss.append(Operator(dim, ell / np.linalg.norm(ell)))
    return LindbladModel(
        HilbertSpace((dim,)),
        (HamiltonianTerm(h),),
        tuple(DissipatorTerm(d, rng.uniform(0.3, 1.0) * rate_scale) for d in diss),
    )


def _random_density(dim, rng):
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = m @ m.conj().T
    return DensityMatrix(dim, m / np.trace(m))


def check_unit_bridge():
    rng = np.random.default_rng(0)
    worst = max(
        abs(angular_to_mhz(mhz_to_angular(f)) - f) / f for f in rng.uniform(1e-4, 1e3, 200)
    )
    return worst <= 1e-15, f"max relative round-trip error {worst:.2e} (tol 1e-15)"


def check_dissipator_convention():
    rng = np.random.default_rng(1)
    dim = 6
    ell = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    kappa = 0.8
    rho = _random_density(dim, rng).matrix
    model = LindbladModel(
        HilbertSpace((dim,)), (), (DissipatorTerm(Operator(dim, ell), kappa),)
    )
    lhs = liouvillian(model).apply(rho)
    ld = ell.conj().T
    rhs = 0.5 * kappa * (2 * ell @ rho @ ld - ld @ ell @ rho - rho @ ld @ ell)
    err = np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(rhs)))
    return err <= 1e-13, f"GKSL vs kappa/2 bridge residual {err:.2e} (tol 1e-13)"


def check_liouvillian_vs_rhs():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(5):
        model = _random_model(5, rng)
        rho = _random_density(5, rng).matrix
        h = model.hamiltonian.matrix
        direct = -1j * (h @ rho - rho @ h)
        for term in model.dissipators:
            ell = term.collapse.matrix
            ld = ell.conj().T
            direct += term.rate * (ell @ rho @ ld - 0.5 * (ld @ ell @ rho + rho @ ld @ ell))
        err = np.max(np.abs(liouvillian(model).apply(rho) - direct))
        worst = max(worst, err / max(1.0, np.max(np.abs(direct))))
    return worst <= 1e-12, f"max residual {worst:.2e} (tol 1e-12)"


def check_oracle_equivalence(n_models=5):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(n_models):
        dim = int(rng.integers(2, 13))
        model = _random_model(dim, rng)
        rho0 = _random_density(dim, rng)
        t = 1.0 / max(term.rate for term in model.dissipators)
        res = evolve(
            model, rho0, np.array([0.0, t]),
            SolverConfig(rtol=1e-10, atol=1e-13, store_states=True),
        )
        ref = evolve_expm(model, rho0, t)
        diff = res.states[-1].matrix - ref.matrix
        td = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))
        worst = max(worst, td)
    return worst <= 1e-7, f"max trace distance vs expm {worst:.2e} (tol 1e-7)"


def check_displacement_unitarity():
    rng = np.random.default_rng(4)
    dim = 30
    worst = 0.0
    for _ in range(5):
        alpha = np.sqrt(rng.uniform(0, 7.0)) * np.exp(2j * np.pi * rng.uniform())
        d = displacement(alpha, dim).matrix
        worst = max(worst, float(np.max(np.abs(d.conj().T @ d - np.eye(dim)))))
    return worst <= 1e-8, f"max |D+D - I| {worst:.2e} (tol 1e-8)"


def check_stabilization_physicality():
    kappa2 = mhz_to_angular(0.176)
    p = ReducedParams(eps2=kappa2, kappa2=kappa2, dim_s=24)
    model = build_reduced(p)
    rho0 = fock_state(0, 24).to_density_matrix()
    times = np.linspace(0.0, 10.0, 11)
    res = evolve(
        model, rho0, times, SolverConfig(store_states=True),
        {"parity": parity(24)},
    )
    tr = max(abs(np.trace(s.matrix) - 1.0) for s in res.states)
    herm = max(np.max(np.abs(s.matrix - s.matrix.conj().T)) for s in res.states)
    emin = min(s.min_eigenvalue() for s in res.states)
    pdrift = float(np.max(np.abs(res.expectations["parity"].real - 1.0)))
    ok = tr <= 1e-9 and herm <= 1e-9 and emin >= -1e-7 and pdrift <= 1e-6
    return ok, (
        f"trace {tr:.1e} (1e-9), herm {herm:.1e} (1e-9), "
        f"min eig {emin:.1e} (-1e-7), parity drift {pdrift:.1e} (1e-6)"
    )


CHECKS = [
    ("unit-bridge", check_unit_bridge),
    ("dissipator-convention", check_dissipator_convention),
    ("liouvillian-vs-rhs", check_liouvillian_vs_rhs),
    ("oracle-equivalence", check_oracle_equivalence),
    ("displacement-unitarity", check_displacement_unitarity),
    ("stabilization-physicality", check_stabilization_physicality),
]


def run_validation_suite() -> list[tuple[str, bool, str]]:
    return [(name, *fn()) for name, fn in CHECKS]
