"""Independent reference computations for the IF tensor and the spin dynamics.

Trajectories are arrays of shape ``(N, 2)`` holding ``(s_i, sbar_i)`` with
``s = +-1``; row 0 is the earliest step.  The IF of a trajectory is
``exp(-E)`` with

    E = sum_{i <= j} (s_j - sbar_j) (s_i eta_{j-i} - conj(eta_{j-i}) sbar_i),

so the later time of each pair carries the spin difference.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
import scipy.linalg

from .dynamics import SpinModel, as_density_matrix, spin_step_unitary
from .errors import ContractError, NumericalError, ParameterError, ResourceError
from .expsum import ExpSum
from .fock import FockBasis, SPIN_PAIRS, build_basis, generic_mps_operator, ladder
from .kernel import KernelTable

log = logging.getLogger(__name__)

__all__ = [
    "BRUTE_FORCE_MAX_STEPS",
    "HeomState",
    "AmplitudeReport",
    "exact_if",
    "if_exponent",
    "toeplitz_kernel",
    "brute_force_rho",
    "pure_dephasing_rho",
    "heom_generators",
    "heom_integrate",
    "amplitude_bound_check",
    "kraus_kappa",
    "channel_equivalence",
]

BRUTE_FORCE_MAX_STEPS = 10


def _as_trajectory(trajectory) -> np.ndarray:
    traj = np.asarray(trajectory)
    if traj.ndim != 2 or traj.shape[1] != 2:
        raise ContractError("trajectory must have shape (N, 2)")
    if not np.all(np.isin(traj, (-1, 1))):
        raise ContractError("spin labels must be +1 or -1")
    return traj.astype(float)


def toeplitz_kernel(kernel: KernelTable, n: int) -> np.ndarray:
    """Lower-triangular ``L[j, i] = eta_{j-i}`` for ``i <= j < n``."""
    if n > len(kernel):
        raise ContractError(f"kernel table has {len(kernel)} entries, {n} needed")
    eta = np.asarray(kernel.eta[:n])
    col = np.concatenate([eta, np.zeros(0)])
    return np.tril(scipy.linalg.toeplitz(col, np.zeros(n)))


def if_exponent(kernel: KernelTable, s, s_bar) -> np.ndarray:
    """Exponent ``E`` for a batch of trajectories, ``s`` and ``s_bar`` of shape ``(..., N)``."""
    s = np.asarray(s, dtype=float)
    s_bar = np.asarray(s_bar, dtype=float)
    n = s.shape[-1]
    if n == 0:
        return np.zeros(s.shape[:-1], dtype=complex)
    low = toeplitz_kernel(kernel, n)
    x = s - s_bar
    return np.sum(x * (s @ low.T - s_bar @ low.conj().T), axis=-1)


def exact_if(kernel: KernelTable, trajectory) -> complex:
    """Direct evaluation of the discrete influence functional."""
    traj = _as_trajectory(trajectory)
    return complex(np.exp(-if_exponent(kernel, traj[:, 0], traj[:, 1])))


def _spin_paths(n: int) -> np.ndarray:
    """All ``2^n`` index paths, shape ``(2^n, n)``, index 0 = spin up."""
    return ((np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.intp)


def brute_force_rho(
    kernel: KernelTable,
    unitaries: Sequence[np.ndarray],
    rho0,
    n_steps: int,
    *,
    max_steps: int = BRUTE_FORCE_MAX_STEPS,
) -> np.ndarray:
    """Exact sum over all ``4^N`` trajectories.

    ``rho[f, fb] = sum I(s, sbar) prod_i U_i[s_{i+1}, s_i] conj(U_i[sbar_{i+1}, sbar_i]) rho0[s_1, sbar_1]``
    with ``s_{N+1} = f`` and ``sbar_{N+1} = fb``.
    """
    if n_steps < 0:
        raise ParameterError("n_steps must be >= 0")
    if n_steps > max_steps:
        raise ResourceError(f"brute force over 4^{n_steps} trajectories exceeds max_steps={max_steps}")
    rho0 = as_density_matrix(rho0)
    if n_steps == 0:
        return rho0.copy()
    us = np.asarray(unitaries, dtype=complex)[:n_steps]
    if len(us) < n_steps:
        raise ContractError("not enough unitaries")
    paths = _spin_paths(n_steps)
    spins = 1.0 - 2.0 * paths
    low = toeplitz_kernel(kernel, n_steps)
    # E[p, q] for forward path p and backward path q, expanded into matrix products
    a = spins @ low.T
    b = spins @ low.conj().T
    ea = np.sum(spins * a, axis=1)
    eb = np.sum(spins * b, axis=1)
    weight = np.exp(-(ea[:, None] + eb[None, :] - spins @ b.T - a @ spins.T))
    weight *= rho0[paths[:, 0][:, None], paths[:, 0][None, :]]
    # amplitude of each path ending in spin f
    amp = np.ones((2, len(paths)), dtype=complex)
    for f in range(2):
        nxt = np.concatenate([paths[:, 1:], np.full((len(paths), 1), f)], axis=1)
        for i in range(n_steps):
            amp[f] *= us[i][nxt[:, i], paths[:, i]]
    return amp @ weight @ amp.conj().T


def pure_dephasing_rho(kernel: KernelTable, rho0, n_steps: int) -> np.ndarray:
    """Trajectory sum with identity spin unitaries: only constant trajectories survive."""
    rho0 = as_density_matrix(rho0)
    out = rho0.copy()
    if n_steps == 0:
        return out
    up = np.ones(n_steps)
    out[0, 1] *= np.exp(-if_exponent(kernel, up, -up))
    out[1, 0] *= np.exp(-if_exponent(kernel, -up, up))
    return out


@dataclass
class HeomState:
    """Amplitudes ``psi[n, a, b]`` over the occupation basis and spin pair at time ``t``."""

    psi: np.ndarray
    t: float
    basis: FockBasis

    @property
    def rho(self) -> np.ndarray:
        return self.psi[0].copy()


def heom_generators(expsum: ExpSum, basis: FockBasis) -> Dict[tuple, np.ndarray]:
    """Bath generators ``G_{s,sbar}`` of the hierarchy, one dense matrix per spin pair.

    ``G = sum_k [-Omega_k n_k - conj(Omega_k) nbar_k + sqrt2 s lam_k a_k^+ + sqrt2 sbar conj(lam_k) abar_k^+
    - x lam_k a_k / sqrt2 + x conj(lam_k) abar_k / sqrt2]`` with ``x = s - sbar``.
    """
    if basis.n_modes != 2 * expsum.n_modes:
        raise ContractError("basis does not match the decomposition")
    d = basis.dimension
    r2 = math.sqrt(2.0)
    lows = [basis.lowering(m) for m in range(basis.n_modes)]
    diag = np.zeros(d, dtype=complex)
    for k, mode in enumerate(expsum.modes):
        diag -= mode.omega_cplx * basis.number(2 * k) + np.conj(mode.omega_cplx) * basis.number(2 * k + 1)
    out = {}
    for s, sb in SPIN_PAIRS:
        x = s - sb
        g = np.diag(diag)
        for k, mode in enumerate(expsum.modes):
            lam, lamc = mode.lam, np.conj(mode.lam)
            a, abar = lows[2 * k], lows[2 * k + 1]
            op = (r2 * s * lam) * a.conj().T + (r2 * sb * lamc) * abar.conj().T
            op = op - (x * lam / r2) * a + (x * lamc / r2) * abar
            g = g + op.toarray()
        out[(s, sb)] = g
    return out


def heom_integrate(
    expsum: ExpSum,
    model: SpinModel,
    rho0,
    total_time: float,
    basis: FockBasis,
    dt_ode: Optional[float] = None,
    *,
    return_state: bool = False,
):
    """Classical RK4 for ``dpsi_{s,sbar}/dt = G_{s,sbar} psi + i (h psi - psi h)``.

    Starts from ``rho0`` in the vacuum sector and returns the vacuum-sector spin
    density matrix at ``total_time`` (or the full :class:`HeomState`).
    """
    if model.is_explicit:
        raise ContractError("the hierarchy needs a Hamiltonian, not explicit unitaries")
    if total_time < 0:
        raise ParameterError("total_time must be >= 0")
    gamma_max = float(expsum.omega_cplx.real.max()) if expsum.n_modes else 0.0
    if dt_ode is None:
        dt_ode = min(0.1 / gamma_max if gamma_max > 0 else np.inf, max(total_time, 1e-300) / 10)
    if dt_ode <= 0:
        raise ParameterError("dt_ode must be > 0")
    if gamma_max * dt_ode > 2.5:
        raise NumericalError(
            f"dt_ode = {dt_ode:.3g} is too large for gamma_max = {gamma_max:.3g} (RK4 unstable)"
        )
    gens = heom_generators(expsum, basis)
    blocks = [gens[pair] for pair in SPIN_PAIRS]

    def rhs(t, psi):
        h = model.h(t)
        out = np.empty_like(psi)
        for idx, g in enumerate(blocks):
            a, b = divmod(idx, 2)
            out[:, a, b] = g @ psi[:, a, b]
        return out + 1j * (h @ psi - psi @ h)

    psi = np.zeros((basis.dimension, 2, 2), dtype=complex)
    psi[0] = as_density_matrix(rho0)
    n_ode = int(math.ceil(total_time / dt_ode - 1e-12)) if total_time > 0 else 0
    dt = total_time / n_ode if n_ode else 0.0
    scale = max(1.0, np.linalg.norm(psi))
    for i in range(n_ode):
        t = i * dt
        k1 = rhs(t, psi)
        k2 = rhs(t + dt / 2, psi + dt / 2 * k1)
        k3 = rhs(t + dt / 2, psi + dt / 2 * k2)
        k4 = rhs(t + dt, psi + dt * k3)
        psi = psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        nrm = np.linalg.norm(psi)
        if not np.isfinite(nrm) or nrm > 1e8 * scale:
            raise NumericalError(f"hierarchy integration blew up at t = {t + dt:.4g}; reduce dt_ode")
    state = HeomState(psi, total_time, basis)
    return state if return_state else state.rho


@dataclass
class AmplitudeReport:
    """Per-sector ``max |psi| / (4 nu_star^(n/2))``."""

    ratios: Dict[int, float]
    nu_star: float

    @property
    def max_ratio(self) -> float:
        return max(self.ratios.values(), default=0.0)

    @property
    def violations(self) -> list:
        return [n for n, r in sorted(self.ratios.items()) if r > 1.0]

    @property
    def ok(self) -> bool:
        return not self.violations


def amplitude_bound_check(state, nu_star: float, basis: Optional[FockBasis] = None) -> AmplitudeReport:
    """Compare every occupation sector of ``state`` with ``4 nu_star^(n_tot/2)``.

    ``state`` is an :class:`EvolutionState`, a :class:`HeomState` or a raw
    ``(D, 2, 2)`` array; ``basis`` is needed unless the state carries one.
    """
    if not 0 <= nu_star < 1:
        raise ParameterError("nu_star must lie in [0, 1)")
    basis = basis if basis is not None else getattr(state, "basis", None)
    if basis is None:
        raise ContractError("a basis is needed to group amplitudes by sector")
    psi = np.asarray(getattr(state, "psi", state))
    if psi.shape[0] != basis.dimension:
        raise ContractError("state and basis dimensions differ")
    mags = np.abs(psi.reshape(len(psi), -1)).max(axis=1)
    totals = basis.totals
    ratios = {}
    for n in np.unique(totals):
        peak = float(mags[totals == n].max())
        bound = 4.0 * nu_star ** (n / 2.0)
        ratios[int(n)] = peak / bound if bound > 0 else (0.0 if peak == 0 else np.inf)
    return AmplitudeReport(ratios, nu_star)


def kraus_kappa(gamma: float, delta_t: float) -> float:
    """Normalisation ``kappa = exp(2 gamma dt) - 1`` of the damping Kraus operators."""
    return math.expm1(2.0 * gamma * delta_t)


def _channel_amplitude(lam, gamma, omega, delta_t, cap, traj) -> complex:
    a = ladder(cap)
    n_op = np.arange(cap + 1)
    kappa = kraus_kappa(gamma, delta_t)
    damp = np.exp(-(gamma + 1j * omega) * delta_t * n_op)
    kraus = {}
    for s in (1, -1):
        beta = -lam * delta_t * s
        disp = scipy.linalg.expm(beta * a.conj().T - np.conj(beta) * a)
        ops = []
        an = np.eye(cap + 1, dtype=complex)
        for n in range(cap + 1):
            ops.append(math.sqrt(kappa**n / math.factorial(n)) * (an * damp[None, :]) @ disp)
            an = an @ a
        kraus[s] = ops
    rho = np.zeros((cap + 1, cap + 1), dtype=complex)
    rho[0, 0] = 1.0
    for s, sb in traj:
        rho = sum(e @ rho @ f.conj().T for e, f in zip(kraus[int(s)], kraus[int(sb)]))
    return complex(np.trace(rho))


def channel_equivalence(lam: float, gamma: float, omega: float, delta_t: float, n_steps: int, cap: int, trajectory):
    """IF amplitude of a single real-``lam`` mode computed two ways.

    Returns ``(channel, mps)``.  The channel side evolves ``|0><0|`` through
    ``rho -> sum_n E_n(s) rho E_n(sbar)^+`` with
    ``E_n(s) = sqrt(kappa^n / n!) a^n exp(-Omega dt n) D(-lam dt s)`` and takes the trace.
    The MPS side contracts ``e^D e^{a^+ B} A^n e^{C a}`` operators on a two-boson
    basis.  A cap that changes the channel value by more than ``1e-10`` when raised
    by 4 triggers a warning.
    """
    if not (lam > 0 and np.isreal(lam)):
        raise ParameterError("lam must be real and positive")
    if gamma <= 0 or delta_t <= 0:
        raise ParameterError("gamma and delta_t must be > 0")
    traj = _as_trajectory(trajectory).astype(int)
    if len(traj) != n_steps:
        raise ContractError("trajectory length differs from n_steps")
    channel = _channel_amplitude(lam, gamma, omega, delta_t, cap, traj)
    wider = _channel_amplitude(lam, gamma, omega, delta_t, cap + 4, traj)
    if abs(wider - channel) > 1e-10:
        log.warning("Kraus sum not converged at cap %d (change %.2e)", cap, abs(wider - channel))

    basis = build_basis(2, cap, 2 * cap)
    om = gamma + 1j * omega
    decay = np.array([np.exp(-om * delta_t), np.exp(-np.conj(om) * delta_t)])
    mats = {}
    for s, sb in SPIN_PAIRS:
        x = s - sb
        b_vec = -lam * delta_t * np.array([s, sb]) * decay
        c_vec = lam * delta_t * x * np.array([1.0, -1.0])
        d_val = -0.5 * (lam * delta_t * x) ** 2
        mats[(s, sb)] = generic_mps_operator(decay, b_vec, c_vec, d_val, basis)
    v = np.zeros(basis.dimension, dtype=complex)
    v[0] = 1.0
    for s, sb in traj:
        v = mats[(int(s), int(sb))] @ v
    return channel, complex(v[0])
