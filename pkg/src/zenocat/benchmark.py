"""Benchmark the compiled stepper against the pure-Python twin.

Run as ``python -m zenocat.benchmark``.  Times representative workloads
(a reduced-model stabilization run and a full two-mode run) on both
backends and reports the speedup.  The two backends implement the same
algorithm, so the step counts should match almost exactly.
"""

from __future__ import annotations

import math
import time

import numpy as np

from . import _backend
from .engine import SolverConfig, compile_model
from .fock import cat_state, coherent_state, parity, tensor, thermal_state, identity
from .model import FullParams, Protocol, ReducedParams, apply_protocol, build_full, build_reduced
from .units import mhz_to_angular

KAPPA2 = mhz_to_angular(0.176)
KAPPA1 = mhz_to_angular(0.0017)
EPS0 = mhz_to_angular(0.007)


def _reduced_case(horizon=10.0):
    p = ReducedParams(
        eps2=KAPPA2, kappa2=KAPPA2, kappa1=KAPPA1,
        chi_ss=mhz_to_angular(0.003), eps=2.0 * EPS0, dim_s=30,
    )
    model = apply_protocol(build_reduced(p), Protocol(0.024, horizon, 0.5, 0.024))
    rho0 = cat_state(math.sqrt(2.0), 0.0, 30).to_density_matrix()
    obs = parity(30)
    return "reduced dim 30, driven, 10 us", model, rho0, obs, horizon

def _full_case(horizon=1.0):
    kappa_r = 1.0 / 0.317
    g = math.sqrt(KAPPA2 * kappa_r) / 2.0
    p = FullParams(
        g=g, eps_r=-2.0 * g, chi_rr=mhz_to_angular(86.0),
        chi_ss=mhz_to_angular(0.003), chi_rs=mhz_to_angular(0.471),
        kappa_r=kappa_r, n_th=0.015, kappa1=KAPPA1, dim_s=30, dim_r=3,
    )
    model = apply_protocol(build_full(p), Protocol(0.024, horizon, 0.5, 0.024))
    rho0 = tensor(coherent_state(math.sqrt(2.0), 30).to_density_matrix(), thermal_state(0.015, 3))
    obs = tensor(parity(30), identity(3))
    return "full dim 30x3, 1 us", model, rho0, obs, horizon


def _time_backend(backend, model, rho0, obs, horizon):
    comp = compile_model(model)
    cfg = SolverConfig(rtol=1e-6, atol=1e-9)
    times = np.linspace(0.0, horizon, 51)
    rows = obs.matrix.ravel(order="C")[None, :].astype(np.complex128)
    args = (
        comp.dim, comp.static, comp.term_coeffs, comp.term_mats, comp.breakpoints,
        rho0.matrix.ravel(order="F"), times, cfg.rtol, cfg.atol, cfg.max_step,
        rows, False,
    )
    start = time.perf_counter()
    _, _, stats = backend.solve(*args)
    elapsed = time.perf_counter() - start
    return elapsed, stats


def run(cases=None):
    from . import _stepper_py

    backends = [("python", _stepper_py)]
    try:
        from . import _stepper

        backends.append(("compiled", _stepper))
    except ImportError:
        print("compiled stepper not built; timing the python backend only")

    for make_case in cases or (_reduced_case, _full_case):
        label, model, rho0, obs, horizon = make_case()
        print(f"\n{label}")
        timings = {}
        for name, backend in backends:
            elapsed, stats = _time_backend(backend, model, rho0, obs, horizon)
            timings[name] = elapsed
            print(
                f"  {name:>8}: {elapsed:8.3f} s   "
                f"({stats['naccepted']} steps, {stats['nrejected']} rejected, "
                f"{stats['nfev']} rhs evals)"
            )
        if len(timings) == 2:
            print(f"  speedup: {timings['python'] / timings['compiled']:.1f}x")


if __name__ == "__main__":
    print(f"active backend: {_backend.backend_name()}")
    run()
