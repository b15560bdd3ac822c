"""Exponential-sum decomposition of the Ohmic continuum kernel.

The continuum kernel is written as a log-scale trapezoidal sum on the contour
``w = omega_c exp(x - i pi/4)``; each node becomes one damped mode

    eta0(t) ~ sum_k lambda_k^2 exp(-Omega_k t),
    lambda_k^2 = i alpha omega_c^2 chi exp(-(1+i)/sqrt(2) e^{y_k}) e^{2 y_k},
    Omega_k    = omega_c e^{y_k} (1 - i) / sqrt(2),        y_k = (k + 1/2) chi,

for ``k = -N .. M``.  The step ``chi`` and the truncation ``(N, M)`` follow from the
target L1 accuracy; the achieved accuracy is always measured by quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import NumericalError, ParameterError
from .kernel import BathSpec, Discretization, KernelTable, eta_continuum

__all__ = [
    "Mode",
    "ExpSum",
    "NuReport",
    "DELTA",
    "discretization_step",
    "mode_counts",
    "build",
    "build_range",
    "evaluate",
    "certify_l1",
    "nu_values",
    "cell_kernel",
    "same_step_kernel",
    "kernel_table",
]

#: angle of the Gamma-function majorisation; fixed, not optimised
DELTA = math.pi / 16
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Mode:
    k: int
    lambda_sq: complex
    lam: complex
    omega_cplx: complex

    @property
    def gamma(self) -> float:
        return self.omega_cplx.real

    @property
    def omega(self) -> float:
        return self.omega_cplx.imag


@dataclass
class ExpSum:
    """Finite set of damped modes approximating ``eta0``.

    Only ``certified_l1`` is filled after construction (by :func:`certify_l1`).
    """

    modes: tuple
    chi: float
    n_eps: int
    m_eps: int
    target_l1: Optional[float] = None
    certified_l1: Optional[float] = None
    bath: Optional[BathSpec] = field(default=None, compare=False)

    def __post_init__(self):
        self.modes = tuple(self.modes)
        for mode in self.modes:
            if not mode.gamma > 0:
                raise ParameterError(f"mode k={mode.k} has non-positive damping {mode.gamma}")

    def __len__(self) -> int:
        return len(self.modes)

    @property
    def ks(self) -> np.ndarray:
        return np.array([m.k for m in self.modes], dtype=int)

    @property
    def lambda_sq(self) -> np.ndarray:
        return np.array([m.lambda_sq for m in self.modes], dtype=complex)

    @property
    def lam(self) -> np.ndarray:
        return np.array([m.lam for m in self.modes], dtype=complex)

    @property
    def omega_cplx(self) -> np.ndarray:
        return np.array([m.omega_cplx for m in self.modes], dtype=complex)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def select(self, indices: Sequence[int]) -> "ExpSum":
        """Sub-decomposition made of the modes at the given positions."""
        modes = tuple(self.modes[i] for i in indices)
        ks = [m.k for m in modes]
        n_eps, m_eps = (-min(ks), max(ks)) if ks else (0, -1)
        return ExpSum(modes, self.chi, n_eps, m_eps, None, None, self.bath)

    def window(self, k_min: int, k_max: int) -> "ExpSum":
        """Sub-decomposition of the nodes with ``k_min <= k <= k_max``."""
        idx = [i for i, m in enumerate(self.modes) if k_min <= m.k <= k_max]
        if not idx:
            raise ParameterError(f"no nodes with {k_min} <= k <= {k_max}")
        return self.select(idx)

    def with_lambda(self, lam: Sequence[complex]) -> "ExpSum":
        """Same decomposition with the square-root branch of each coupling replaced."""
        lam = np.asarray(lam, dtype=complex)
        modes = tuple(
            Mode(m.k, m.lambda_sq, complex(l), m.omega_cplx) for m, l in zip(self.modes, lam)
        )
        return ExpSum(modes, self.chi, self.n_eps, self.m_eps, self.target_l1,
                      self.certified_l1, self.bath)


@dataclass(frozen=True)
class NuReport:
    nu: np.ndarray
    nu_star: float


def discretization_step(alpha: float, omega_c: float, total_time: float, epsilon: float) -> float:
    """Trapezoidal step ``chi`` on the log-frequency axis (``delta = pi/16``)."""
    for name, val in (("alpha", alpha), ("omega_c", omega_c),
                      ("total_time", total_time), ("epsilon", epsilon)):
        if not val > 0:
            raise ParameterError(f"{name} must be > 0, got {val}")
    arg = 4.0 * alpha * omega_c * total_time / (epsilon * math.sin(DELTA) ** 2)
    if arg <= 1.0:
        raise ParameterError(
            f"epsilon={epsilon} too large: log argument {arg:.6g} <= 1 gives no valid step"
        )
    return (math.pi**2 / 8.0) / math.log(arg)


def mode_counts(alpha: float, omega_c: float, epsilon1: float, chi: float) -> tuple:
    """Numbers ``(N, M)`` of retained nodes below and above ``k = 0``."""
    if not chi > 0:
        raise ParameterError(f"chi must be > 0, got {chi}")
    if not (alpha > 0 and omega_c > 0 and epsilon1 > 0):
        raise ParameterError("alpha, omega_c and epsilon1 must be > 0")
    big_l = math.log(alpha * omega_c / epsilon1)
    if big_l <= 0 or math.sqrt(2.0) * big_l <= 1.0:
        raise ParameterError(
            f"epsilon1={epsilon1} too large relative to alpha*omega_c={alpha * omega_c}: "
            "log(alpha*omega_c/epsilon1) must exceed 1/sqrt(2)"
        )
    n_eps = math.ceil(big_l / chi)
    m_eps = math.ceil(math.log(math.sqrt(2.0) * big_l) / chi)
    return n_eps, m_eps


def _make_modes(bath: BathSpec, chi: float, ks) -> tuple:
    modes = []
    for k in ks:
        y = (k + 0.5) * chi
        ey = math.exp(y)
        lam_sq = (1j * bath.alpha * bath.omega_c**2 * chi
                  * np.exp(-(1 + 1j) / _SQRT2 * ey) * math.exp(2 * y))
        omega = bath.omega_c * ey * (1 - 1j) / _SQRT2
        lam = complex(np.sqrt(lam_sq))
        # store lam * lam so that the square relation holds bit for bit
        sq = np.array([lam]) * np.array([lam])
        modes.append(Mode(int(k), complex(sq[0]), lam, complex(omega)))
    return tuple(modes)


def build(
    bath: BathSpec,
    total_time: float,
    epsilon: float,
    *,
    n_eps: Optional[int] = None,
    m_eps: Optional[int] = None,
) -> ExpSum:
    """Decomposition certified (after :func:`certify_l1`) against ``epsilon / (4 T)``.

    ``n_eps`` / ``m_eps`` override the analytic mode counts for small test runs.
    """
    eps1 = epsilon / (4.0 * total_time)
    if bath.alpha == 0:
        return ExpSum((), 0.0, 0, -1, eps1, None, bath)
    chi = discretization_step(bath.alpha, bath.omega_c, total_time, epsilon)
    n_auto, m_auto = mode_counts(bath.alpha, bath.omega_c, eps1, chi)
    n = n_auto if n_eps is None else int(n_eps)
    m = m_auto if m_eps is None else int(m_eps)
    return ExpSum(_make_modes(bath, chi, range(-n, m + 1)), chi, n, m, eps1, None, bath)


def build_range(bath: BathSpec, chi: float, k_min: int, k_max: int) -> ExpSum:
    """Toy decomposition with an explicit step and node range ``k_min .. k_max``."""
    if not chi > 0:
        raise ParameterError("chi must be > 0")
    if k_max < k_min:
        raise ParameterError("empty node range")
    return ExpSum(_make_modes(bath, chi, range(k_min, k_max + 1)), chi, -k_min, k_max,
                  None, None, bath)


def evaluate(expsum: ExpSum, t):
    """``sum_k lambda_k^2 exp(-Omega_k t)``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ParameterError("t must be >= 0")
    if expsum.n_modes == 0:
        out = np.zeros_like(t_arr, dtype=complex)
    else:
        out = np.exp(-np.multiply.outer(t_arr, expsum.omega_cplx)) @ expsum.lambda_sq
    return out if out.ndim else complex(out)


def certify_l1(
    expsum: ExpSum,
    bath: BathSpec,
    total_time: float,
    *,
    abs_tol: Optional[float] = None,
    limit: int = 5000,
) -> float:
    """Measure ``int_0^T |eta0(t) - evaluate(t)| dt`` and store it on ``expsum``."""
    if bath.alpha == 0 and expsum.n_modes == 0:
        expsum.certified_l1 = 0.0
        return 0.0
    if abs_tol is None:
        abs_tol = 0.01 * expsum.target_l1 if expsum.target_l1 else 1e-10
    lam_sq, om = expsum.lambda_sq, expsum.omega_cplx

    def err(t):
        return abs(eta_continuum(bath, t) - np.dot(lam_sq, np.exp(-om * t)))

    # the discrepancy varies on the scale 1/omega_c near t = 0 and slowly afterwards
    edges = [0.0]
    step = 1.0 / bath.omega_c
    while edges[-1] + step < total_time:
        edges.append(edges[-1] + step)
        step *= 2.0
    edges.append(total_time)
    total, tol_each = 0.0, abs_tol / (len(edges) - 1)
    for a, b in zip(edges[:-1], edges[1:]):
        val, est, info = integrate.quad(err, a, b, epsabs=tol_each, epsrel=0.0,
                                        limit=limit, full_output=True)[:3]
        if info.get("last", 0) >= limit or est > tol_each:
            raise NumericalError(
                f"L1 quadrature on [{a:.4g}, {b:.4g}] not converged: "
                f"value={val:.3e}, error estimate={est:.3e}, requested={tol_each:.3e}"
            )
        total += val
    expsum.certified_l1 = float(total)
    return float(total)


def nu_values(expsum: ExpSum) -> NuReport:
    """Mean-occupation parameters ``nu_k = 32 |lambda_k^2| / gamma_k^2``."""
    if expsum.n_modes == 0:
        return NuReport(np.zeros(0), 0.0)
    nu = 32.0 * np.abs(expsum.lambda_sq) / expsum.omega_cplx.real**2
    return NuReport(nu, float(nu.max()))


def _phi1(x):
    """(1 - exp(-x)) / x, accurate for small complex x."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 0.25
    xs = np.where(small, x, 1.0)
    series = np.zeros_like(xs)
    term = np.ones_like(xs)
    for n in range(1, 25):
        series = series + term
        term = term * (-xs) / (n + 1)
    xl = np.where(small, 1.0, x)
    direct = (1.0 - np.exp(-xl)) / xl
    return np.where(small, series, direct)


def _phi2(x):
    """(x - 1 + exp(-x)) / x^2, accurate for small complex x."""
    x = np.asarray(x, dtype=complex)
    small = np.abs(x) < 0.25
    xs = np.where(small, x, 1.0)
    series = np.zeros_like(xs)
    term = np.full_like(xs, 0.5)
    for n in range(2, 26):
        series = series + term
        term = term * (-xs) / (n + 1)
    xl = np.where(small, 1.0, x)
    direct = (xl - 1.0 + np.exp(-xl)) / xl**2
    return np.where(small, series, direct)


def cell_kernel(expsum: ExpSum, delta_t: float, m):
    """Kernel between steps ``m >= 1`` apart, integrated over both time cells.

    Equals ``delta_t^2 sum_k lambda_k^2 phi1(Omega_k dt)^2 exp(-Omega_k (m-1) dt)``,
    i.e. the discrete kernel generated exactly by the continuous-time modes.
    """
    m = np.asarray(m)
    if np.any(m < 1):
        raise ParameterError("cell_kernel needs m >= 1")
    if expsum.n_modes == 0:
        out = np.zeros(m.shape, dtype=complex)
        return out if out.ndim else 0j
    om = expsum.omega_cplx
    weights = expsum.lambda_sq * (delta_t * _phi1(om * delta_t)) ** 2
    out = np.exp(-np.multiply.outer(m - 1.0, om) * delta_t) @ weights
    return out if out.ndim else complex(out)


def same_step_kernel(expsum: ExpSum, delta_t: float) -> complex:
    """Within-step double integral ``int_0^dt (dt - u) sum_k lambda_k^2 e^{-Omega_k u} du``."""
    if expsum.n_modes == 0:
        return 0j
    om = expsum.omega_cplx
    return complex(np.sum(expsum.lambda_sq * delta_t**2 * _phi2(om * delta_t)))


def kernel_table(expsum: ExpSum, disc: Discretization, same_step: Optional[float] = None) -> KernelTable:
    """Discrete kernel generated by the modes on the grid ``disc``.

    ``same_step`` replaces the within-step value (real part of
    :func:`same_step_kernel` by default).  Tensors assembled with the finite-step
    shift reproduce the exact ``eta_0`` of the bath, see ``fock.assemble_if_tensor``.
    """
    n = disc.n_steps
    if n == 0:
        raise ParameterError("cannot tabulate zero steps")
    eta = np.zeros(n, dtype=complex)
    eta[0] = same_step_kernel(expsum, disc.delta_t).real if same_step is None else same_step
    if n > 1:
        eta[1:] = cell_kernel(expsum, disc.delta_t, np.arange(1, n))
    return KernelTable(eta, disc.delta_t)
