"""Acceptance criteria 1-11, each at its stated tolerance.

Every criterion prints one ``PASS``/``FAIL`` line with the measured quantities; the
lines are repeated in the pytest terminal summary.  Run directly with
``python3 tests/test_acceptance.py`` to get only the table.
"""

import logging
import math
import time

import numpy as np
import pytest

from ohmic_if.dynamics import SpinModel, density_matrix, evolve, propagate
from ohmic_if.expsum import (
    build,
    build_range,
    certify_l1,
    discretization_step,
    kernel_table,
    mode_counts,
    nu_values,
    same_step_kernel,
)
from ohmic_if.fock import (
    assemble_if_tensor,
    binomial_state_count,
    build_basis,
    contract_amplitude,
    lambda_shift,
)
from ohmic_if.kernel import BathSpec, Discretization, build_kernel_table, eta_discrete
from ohmic_if.oracle import (
    amplitude_bound_check,
    brute_force_rho,
    channel_equivalence,
    heom_integrate,
    pure_dephasing_rho,
)

RESULTS = []
SEED = 42
WEAK = BathSpec(0.1, 1.0)
# three-node toy decomposition whose Fock truncation error is visible at caps 4..8
TOY_BATH = BathSpec(3.0, 1.0)
TOY_CHI, TOY_K = 1.0, (-1, 1)


def report(number, passed, detail):
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    return passed


def random_unitaries(rng, n):
    z = rng.normal(size=(n, 2, 2)) + 1j * rng.normal(size=(n, 2, 2))
    return np.array([np.linalg.qr(m)[0] for m in z])


_cache = {}


def same_kernel_run():
    """Criterion 4 data, shared with criterion 5."""
    if "c4" in _cache:
        return _cache["c4"]
    n, dt = 8, 0.05
    es = build_range(TOY_BATH, TOY_CHI, *TOY_K)
    eta00 = eta_discrete(TOY_BATH, dt, 0).real
    disc = Discretization(dt, n)
    table = kernel_table(es, disc, same_step=eta00)
    us = random_unitaries(np.random.default_rng(SEED), n)
    rho0 = density_matrix("plus")
    ref = brute_force_rho(table, us, rho0, n)
    t0 = time.perf_counter()
    rhos, errs = {}, {}
    for cap in (4, 6, 8):
        tensor = assemble_if_tensor(es, disc, build_basis(2 * es.n_modes, cap, cap), eta00)
        rhos[cap] = evolve(tensor, SpinModel(unitaries=us), rho0, n)[-1]
        errs[cap] = float(np.abs(rhos[cap] - ref).max())
        del tensor
    elapsed = time.perf_counter() - t0
    _cache["c4"] = dict(es=es, us=us, rho0=rho0, n=n, dt=dt, rhos=rhos, errs=errs, elapsed=elapsed)
    return _cache["c4"]


def criterion_1():
    t0 = time.perf_counter()
    es = build(WEAK, 20.0, 1e-3)
    l1 = certify_l1(es, WEAK, 20.0)
    elapsed = time.perf_counter() - t0
    chi = (math.pi**2 / 8) / math.log(4 * 0.1 * 20 / (1e-3 * math.sin(math.pi / 16) ** 2))
    n_eps, m_eps = mode_counts(0.1, 1.0, 1e-3 / 80, es.chi)
    finer = build(WEAK, 20.0, 1e-4)
    l1_fine = certify_l1(finer, WEAK, 20.0)
    ok = (abs(es.chi - chi) <= 1e-15 * chi and es.chi == discretization_step(0.1, 1.0, 20.0, 1e-3)
          and (es.n_eps, es.m_eps) == (n_eps, m_eps) and es.n_modes == n_eps + m_eps + 1
          and l1 <= 1.25e-5 and elapsed < 5.0 and l1_fine < l1)
    return report(1, ok, f"chi={es.chi:.6f} N={es.n_eps} M={es.m_eps} L1={l1:.3e} <= 1.25e-05 "
                         f"in {elapsed:.2f} s; eps=1e-4 L1={l1_fine:.3e}")


def criterion_2():
    dt, delta = 0.05, 1.0
    empty = build(BathSpec(0.0, 1.0), 50.0, 1e-3)
    tensor = assemble_if_tensor(empty, dt, build_basis(0, 0, 0), lambda_shift(empty, 0.0, dt))
    rhos = evolve(tensor, SpinModel.rabi(delta), density_matrix("up"), 1000)
    sz = np.array([(r[0, 0] - r[1, 1]).real for r in rhos])
    dev = float(np.max(np.abs(sz - np.cos(delta * dt * np.arange(1001)))))
    return report(2, dev <= 1e-10, f"max |<sz> - cos(Delta dt i)| = {dev:.2e} <= 1e-10 over 1000 steps")


def criterion_3():
    dt = 0.05
    es = build_range(TOY_BATH, TOY_CHI, *TOY_K)
    tensor = assemble_if_tensor(es, dt, build_basis(6, 4, 4), eta_discrete(TOY_BATH, dt, 0).real)
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for _ in range(1000):
        s = rng.choice([-1, 1], size=20)
        worst = max(worst, abs(contract_amplitude(tensor, np.stack([s, s], 1)) - 1))
    return report(3, worst <= 1e-12, f"max |amplitude - 1| = {worst:.2e} <= 1e-12 (1000 trajectories, N=20)")


def criterion_4():
    run = same_kernel_run()
    e = run["errs"]
    ok = e[4] > e[6] > e[8] and e[8] <= 1e-6 and run["elapsed"] < 60
    return report(4, ok, f"|rho_MPS - rho_bf| caps 4/6/8 = {e[4]:.2e}/{e[6]:.2e}/{e[8]:.2e} "
                         f"(monotone, <= 1e-6) in {run['elapsed']:.1f} s")


def criterion_5():
    run = same_kernel_run()
    total_time = run["n"] * run["dt"]
    exact = build_kernel_table(TOY_BATH, Discretization(run["dt"], run["n"]))
    ref = brute_force_rho(exact, run["us"], run["rho0"], run["n"])
    l1 = certify_l1(run["es"], TOY_BATH, total_time, abs_tol=1e-8)
    err = float(np.abs(run["rhos"][8] - ref).max())
    budget = 4 * total_time * l1 + run["errs"][8]
    return report(5, err <= budget, f"|rho_MPS - rho_exact| = {err:.3e} <= 4T L1 + trunc = {budget:.3e}")


def criterion_6():
    n, dt = 200, 0.05
    es = build_range(WEAK, TOY_CHI, *TOY_K)
    eta00 = eta_discrete(WEAK, dt, 0).real
    disc = Discretization(dt, n)
    tensor = assemble_if_tensor(es, disc, build_basis(6, 6, 6), eta00)
    rhos = evolve(tensor, SpinModel.free(), density_matrix("plus"), n)
    pd_exact = pure_dephasing_rho(build_kernel_table(WEAK, disc), density_matrix("plus"), n)
    pd_modes = pure_dephasing_rho(kernel_table(es, disc, same_step=eta00), density_matrix("plus"), n)
    l1 = certify_l1(es, WEAK, n * dt, abs_tol=1e-8)
    trunc = abs(rhos[-1][0, 1] - pd_modes[0, 1])
    err = abs(rhos[-1][0, 1] - pd_exact[0, 1])
    budget = 4 * n * dt * l1 + trunc
    pop = max(max(abs(r[0, 0] - 0.5), abs(r[1, 1] - 0.5)) for r in rhos)
    ok = err <= budget and pop <= 1e-10
    return report(6, ok, f"|coherence - closed form| = {err:.3e} <= {budget:.3e}; population drift {pop:.1e}")


def criterion_7():
    full = build(WEAK, 20.0, 1e-3)
    es = full.window(10, 11)
    basis = build_basis(4, 3, 12)
    model, rho0, total = SpinModel.rabi(1.0), density_matrix("up"), 1.0
    gamma_max = es.omega_cplx.real.max()
    ref = heom_integrate(es, model, rho0, total, basis, dt_ode=min(0.025 / 40, 0.1 / gamma_max))
    errs = []
    for dt in (0.1, 0.05, 0.025):
        n = int(round(total / dt))
        # same-step weight of the continuous modes, as generated by the hierarchy
        tensor = assemble_if_tensor(es, dt, basis, same_step_kernel(es, dt).real)
        errs.append(float(np.abs(evolve(tensor, model, rho0, n)[-1] - ref).max()))
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    return report(7, r1 >= 1.8 and r2 >= 1.8,
                  f"|rho_MPS - rho_HEOM| = {errs[0]:.2e}/{errs[1]:.2e}/{errs[2]:.2e}, ratios {r1:.2f}, {r2:.2f} >= 1.8")


def criterion_8():
    full = build(WEAK, 20.0, 1e-3)
    es = full.window(-1, 1)
    dt = 0.05
    tensor = assemble_if_tensor(es, dt, build_basis(6, 5, 5), eta_discrete(WEAK, dt, 0).real)
    rng = np.random.default_rng(SEED)
    v = rng.normal(size=(tensor.dimension, 1000)) + 1j * rng.normal(size=(tensor.dimension, 1000))
    v /= np.linalg.norm(v, axis=0)
    worst = max(float(np.linalg.norm(m @ v, axis=0).max()) for m in tensor.m_ss.values())
    sigma = max(tensor.max_singular_values().values())
    return report(8, worst <= 1 + 1e-9,
                  f"max |Mv|/|v| = {worst:.6f} <= 1 + 1e-9 (D={tensor.dimension}); "
                  f"largest singular value {sigma:.9f} (information)")


def criterion_9():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    draws = [(0.3, 0.5, 0.7, 0.1)] + [
        (rng.uniform(0.05, 0.5), rng.uniform(0.1, 1.0), rng.uniform(-1, 1), rng.uniform(0.02, 0.2))
        for _ in range(20)
    ]
    for lam, gam, om, dt in draws:
        traj = rng.choice([-1, 1], size=(4, 2))
        chan, mps = channel_equivalence(lam, gam, om, dt, 4, 12, traj)
        worst = max(worst, abs(chan - mps))
    return report(9, worst <= 1e-8, f"max |channel - MPS| = {worst:.2e} <= 1e-8 over {len(draws)} draws")


def criterion_10():
    full = build(WEAK, 20.0, 1e-3)
    dt, n = 0.05, 200
    basis = build_basis(4, 5, 5)
    eta00 = eta_discrete(WEAK, dt, 0).real
    worst, worst_k = 0.0, None
    for i in range(full.n_modes - 1):
        es = full.select([i, i + 1])
        nu_star = nu_values(es).nu_star
        tensor = assemble_if_tensor(es, dt, basis, eta00)
        peak = 0.0

        def scan(state):
            nonlocal peak
            peak = max(peak, amplitude_bound_check(state, nu_star, basis).max_ratio)

        propagate(tensor, SpinModel.rabi(1.0), density_matrix("up"), n, callback=scan)
        if peak > worst:
            worst, worst_k = peak, tuple(int(k) for k in es.ks)
    return report(10, worst <= 1.0,
                  f"max |psi| / (4 nu*^(n/2)) = {worst:.3f} <= 1 over all {full.n_modes - 1} adjacent "
                  f"K=2 windows (worst at k={worst_k})")


def criterion_11():
    exact = {(3, 2): 4 + 10, (5, 3): 6 + 21 + 56, (10, 4): 11 + 66 + 286 + 1001}
    counts_ok = all(binomial_state_count(k, n) == v for (k, n), v in exact.items())
    es = build(WEAK, 20.0, 1e-3)
    dt, eps = 0.02, 1e-3
    lam = lambda_shift(es, eta_discrete(WEAK, dt, 0).real, dt)
    lam_fs = lambda_shift(es, eta_discrete(WEAK, dt, 0).real, dt, finite_step=True)
    ok = counts_ok and 0 < lam <= eps
    return report(11, ok, f"binomial sums {'exact' if counts_ok else 'WRONG'}; Lambda = {lam:.3e} in (0, {eps:g}]"
                          f" (finite-step shift {lam_fs:.3e})")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 12)])
def test_acceptance(criterion):
    assert criterion()


if __name__ == "__main__":
    logging.basicConfig(level=logging.ERROR)
    results = [c() for c in CRITERIA]
    print(f"{sum(results)}/{len(results)} criteria passed")
