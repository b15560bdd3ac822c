"""Oracle suite behind the ``validate`` subcommand.

Every check compares two independent computations and reports the measured
discrepancy next to its tolerance.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from . import expsum as es_mod
from .config import SimConfig
from .errors import ParameterError
from .dynamics import SpinModel, density_matrix, evolve, propagate
from .expsum import ExpSum, kernel_table
from .fock import assemble_if_tensor, build_basis, contract_amplitude
from .kernel import BathSpec, Discretization, build_kernel_table, eta_discrete, eta_discrete_quad
from .oracle import (
    amplitude_bound_check,
    brute_force_rho,
    channel_equivalence,
    exact_if,
    heom_integrate,
    pure_dephasing_rho,
)

log = logging.getLogger(__name__)

__all__ = ["CheckResult", "run_validation", "tensor_decomposition"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    tolerance: float
    seconds: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<28s} {self.value:11.3e} <= {self.tolerance:9.1e}  ({self.seconds:.2f} s)"


def tensor_decomposition(cfg: SimConfig) -> Tuple[ExpSum, ExpSum]:
    """Full certified decomposition and the subset used for tensors."""
    full = es_mod.build(cfg.bath, cfg.total_time, cfg.epsilon, n_eps=cfg.n_eps, m_eps=cfg.m_eps)
    es_mod.certify_l1(full, cfg.bath, cfg.total_time)
    used = full if cfg.mode_window is None else full.window(*cfg.mode_window)
    return full, used


def _caps(cfg: SimConfig, used: ExpSum) -> Tuple[int, int]:
    per_mode = 4 if cfg.per_mode_cap is None else cfg.per_mode_cap
    return per_mode, per_mode if cfg.global_cap is None else cfg.global_cap


def _random_unitaries(rng, n):
    z = rng.normal(size=(n, 2, 2)) + 1j * rng.normal(size=(n, 2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r, axis1=1, axis2=2) / np.abs(np.diagonal(r, axis1=1, axis2=2)))[:, None, :]


def run_validation(cfg: SimConfig, seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    bath, dt = cfg.bath, cfg.delta_t
    full, used = tensor_decomposition(cfg)
    if used.n_modes == 0:
        raise ParameterError("validation needs a non-empty decomposition (alpha > 0)")
    per_mode, gcap = _caps(cfg, used)
    basis = build_basis(2 * used.n_modes, per_mode, gcap)
    eta00 = eta_discrete(bath, dt, 0).real
    results: List[CheckResult] = []

    def check(name: str, tol: float, fn: Callable[[], float]) -> None:
        t0 = time.perf_counter()
        value = float(fn())
        results.append(CheckResult(name, value, tol, time.perf_counter() - t0))
        log.info(results[-1].line())

    def kernel_closed_form():
        m = np.array([0, 1, 5, 40])
        closed = eta_discrete(bath, dt, m)
        quad = np.array([eta_discrete_quad(lambda w: bath.alpha * w * np.exp(-w / bath.omega_c),
                                           dt, int(k), omega_scale=bath.omega_c) for k in m])
        return np.max(np.abs(closed - quad) / np.abs(quad))

    check("kernel closed form", 1e-9, kernel_closed_form)
    check("expsum certified L1", full.target_l1, lambda: full.certified_l1)

    def zero_coupling():
        free_bath = BathSpec(0.0, bath.omega_c)
        empty = es_mod.build(free_bath, cfg.total_time, cfg.epsilon)
        tensor = assemble_if_tensor(empty, dt, build_basis(0, 0, 0), 0.0)
        rhos = evolve(tensor, SpinModel.rabi(1.0), density_matrix("up"), 1000)
        sz = np.array([(r[0, 0] - r[1, 1]).real for r in rhos])
        return np.max(np.abs(sz - np.cos(dt * np.arange(1001))))

    check("zero coupling Rabi", 1e-10, zero_coupling)

    n_traj = 20
    disc = Discretization(dt, max(cfg.n_steps, n_traj))
    tensor = assemble_if_tensor(used, disc, basis, eta00, shift="finite-step")
    table = kernel_table(used, disc, same_step=eta00)

    def diagonal_identity():
        worst = 0.0
        for _ in range(200):
            s = rng.choice([-1, 1], size=n_traj)
            worst = max(worst, abs(contract_amplitude(tensor, np.stack([s, s], 1)) - 1))
        return worst

    check("diagonal trajectories", 1e-12, diagonal_identity)

    def same_kernel():
        n = 8
        us = _random_unitaries(rng, n)
        rho = evolve(tensor, SpinModel(unitaries=us), density_matrix("plus"), n)[-1]
        return np.max(np.abs(rho - brute_force_rho(table, us, density_matrix("plus"), n)))

    check("same-kernel brute force", 1e-6, same_kernel)

    def dephasing():
        n = cfg.n_steps
        rho = evolve(tensor, SpinModel.free(), density_matrix("plus"), n)[-1]
        return np.max(np.abs(rho - pure_dephasing_rho(table, density_matrix("plus"), n)))

    check("pure dephasing", 1e-6, dephasing)

    def if_symmetry():
        exact = build_kernel_table(bath, Discretization(dt, 12))
        worst = 0.0
        for _ in range(1000):
            traj = rng.choice([-1, 1], size=(12, 2))
            val = exact_if(exact, traj)
            worst = max(worst, abs(val - np.conj(exact_if(exact, traj[:, ::-1]))), abs(val) - 1)
        return worst

    check("IF symmetry and |IF| <= 1", 1e-12, if_symmetry)

    def channel():
        worst = 0.0
        for _ in range(20):
            lam, gam = rng.uniform(0.05, 0.5), rng.uniform(0.1, 1.0)
            om, step = rng.uniform(-1, 1), rng.uniform(0.02, 0.2)
            traj = rng.choice([-1, 1], size=(4, 2))
            c, m = channel_equivalence(lam, gam, om, step, 4, 12, traj)
            worst = max(worst, abs(c - m))
        return worst

    check("channel equivalence", 1e-8, channel)

    def amplitude_bound():
        nu_star = es_mod.nu_values(used).nu_star
        model = cfg.spin_model()
        worst = 0.0

        def scan(state):
            nonlocal worst
            worst = max(worst, amplitude_bound_check(state, nu_star, basis).max_ratio)

        n = min(cfg.n_steps, len(model.unitaries)) if model.is_explicit else cfg.n_steps
        propagate(tensor, model, cfg.rho0, min(n, 200), callback=scan)
        return worst

    check("amplitude bound ratio", 1.0, amplitude_bound)

    def hierarchy():
        single = used.select([0])
        b1 = build_basis(2, 8, 8)
        n = min(cfg.n_steps, 40)
        dt_ode = min(dt / 10, 0.1 / single.omega_cplx.real.max())
        rho = heom_integrate(single, SpinModel.free(), density_matrix("plus"), n * dt, b1, dt_ode)
        tab = kernel_table(single, Discretization(dt, n))
        return np.max(np.abs(rho - pure_dephasing_rho(tab, density_matrix("plus"), n)))

    check("hierarchy pure dephasing", 1e-8, hierarchy)
    return results
