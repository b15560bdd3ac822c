"""Ohmic memory kernel of the zero-temperature spin-boson influence functional.

The bath is characterised by the spectral density ``J(w) = alpha * w * exp(-w / omega_c)``.
Two kernels are provided:

* the continuum kernel ``eta0(t) = alpha * int_0^inf w exp(-w/omega_c) exp(i w t) dw``,
  available in closed form ``alpha * omega_c**2 / (1 - i omega_c t)**2``;
* the discrete kernel ``eta_m`` entering the Trotterised influence functional.  For an
  Ohmic bath the Frullani integral gives, with ``z = omega_c * delta_t``,

  ``eta_m = alpha * log(1 + z**2 / (1 - i z m)**2)``   (m >= 1)
  ``eta_0 = alpha / 2 * log(1 + z**2)``

  which is the second difference of ``alpha * log(1 - i omega_c t)`` written in a form
  free of cancellation at large ``m``.

Adaptive quadrature of the defining integrals is kept alongside as a validation oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import ContractError, NumericalError, ParameterError

__all__ = [
    "BathSpec",
    "Discretization",
    "KernelTable",
    "spectral_density",
    "eta_continuum",
    "eta_continuum_quad",
    "eta_discrete",
    "eta_discrete_quad",
    "build_kernel_table",
]


@dataclass(frozen=True)
class BathSpec:
    """Ohmic bath at zero temperature."""

    alpha: float
    omega_c: float

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")
        if not np.isfinite(self.omega_c) or self.omega_c <= 0:
            raise ParameterError(f"omega_c must be > 0, got {self.omega_c}")


@dataclass(frozen=True)
class Discretization:
    """Uniform time grid with ``n_steps`` steps of length ``delta_t``."""

    delta_t: float
    n_steps: int

    def __post_init__(self):
        if not np.isfinite(self.delta_t) or self.delta_t <= 0:
            raise ParameterError(f"delta_t must be > 0, got {self.delta_t}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ParameterError(f"n_steps must be a nonnegative integer, got {self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_total_time(cls, total_time: float, n_steps: int) -> "Discretization":
        if n_steps <= 0:
            raise ParameterError("n_steps must be positive")
        return cls(total_time / n_steps, n_steps)

    @property
    def total_time(self) -> float:
        return self.n_steps * self.delta_t

    def times(self) -> np.ndarray:
        return self.delta_t * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class KernelTable:
    """Tabulated discrete kernel ``eta_m`` for ``m = 0 .. n-1``.

    ``eta[0]`` is the same-step value and is real for physical kernels.
    """

    eta: np.ndarray
    delta_t: float

    def __post_init__(self):
        eta = np.array(self.eta, dtype=complex)
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)

    def __len__(self) -> int:
        return len(self.eta)

    def __getitem__(self, m):
        return self.eta[m]

    @property
    def kappa(self) -> np.ndarray:
        return self.eta.real

    @property
    def phi(self) -> np.ndarray:
        return self.eta.imag


def spectral_density(bath: BathSpec, omega):
    """``J(w) = alpha w exp(-w / omega_c)`` for ``w >= 0``."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ParameterError("spectral density is defined for omega >= 0 only")
    out = bath.alpha * omega * np.exp(-omega / bath.omega_c)
    return out if out.ndim else float(out)


def eta_continuum(bath: BathSpec, t):
    """Closed-form continuum kernel ``alpha omega_c^2 / (1 - i omega_c t)^2``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ParameterError("eta_continuum requires t >= 0")
    out = bath.alpha * bath.omega_c**2 / (1.0 - 1j * bath.omega_c * t) ** 2
    return out if out.ndim else complex(out)


def _clog1p(w):
    # numpy's complex log1p loses ~1e-9 relative accuracy for small arguments
    w = np.asarray(w, dtype=complex)
    x, y = w.real, w.imag
    re = 0.5 * np.log1p(2.0 * x + x * x + y * y)
    im = np.arctan2(y, 1.0 + x)
    return re + 1j * im


def eta_discrete(bath: BathSpec, delta_t: float, m):
    """Discrete kernel ``eta_m`` from the Frullani closed form.

    ``m`` may be an integer or an integer array.
    """
    if delta_t <= 0:
        raise ParameterError("delta_t must be > 0")
    m = np.asarray(m)
    if np.any(m < 0):
        raise ParameterError("m must be nonnegative")
    z = bath.omega_c * delta_t
    md = m.astype(float)
    off = bath.alpha * _clog1p(z * z / (1.0 - 1j * z * md) ** 2)
    same = 0.5 * bath.alpha * np.log1p(z * z)
    out = np.where(m == 0, same + 0j, off)
    return out if out.ndim else complex(out)


def _mapped_quad(func: Callable[[float], complex], omega_c: float, rtol: float, limit: int):
    """Integrate ``func`` over [0, inf) with ``w = omega_c u / (1 - u)``."""

    def mapped(u, part):
        if u >= 1.0:
            return 0.0
        w = omega_c * u / (1.0 - u)
        jac = omega_c / (1.0 - u) ** 2
        val = func(w) * jac
        return val.real if part == 0 else val.imag

    out = []
    for part in (0, 1):
        val, err, info = integrate.quad(
            mapped, 0.0, 1.0, args=(part,), epsabs=0.0, epsrel=rtol, limit=limit,
            full_output=True,
        )[:3]
        if info.get("last", 0) >= limit:
            raise NumericalError(
                f"quadrature did not converge (part={'re' if part == 0 else 'im'}, "
                f"value={val:.6e}, error estimate={err:.3e}, subintervals={limit})"
            )
        out.append(val)
    return complex(out[0], out[1])


def eta_continuum_quad(bath: BathSpec, t: float, *, rtol: float = 1e-12, limit: int = 2000) -> complex:
    """Adaptive quadrature of the defining integral of ``eta0(t)``."""
    if t < 0:
        raise ParameterError("t must be >= 0")
    if bath.alpha == 0:
        return 0j
    f = lambda w: spectral_density(bath, w) * np.exp(1j * w * t)
    return _mapped_quad(f, bath.omega_c, rtol, limit)


def eta_discrete_quad(
    J: Callable[[float], float],
    delta_t: float,
    m: int,
    *,
    omega_scale: float = 1.0,
    rtol: float = 1e-12,
    limit: int = 2000,
) -> complex:
    """Quadrature of the discrete kernel for an arbitrary spectral density ``J``.

    ``omega_scale`` sets the scale of the ``w = s u / (1 - u)`` map.
    """
    if delta_t <= 0:
        raise ParameterError("delta_t must be > 0")
    if m < 0:
        raise ParameterError("m must be nonnegative")

    def f(w):
        if w == 0.0:
            # sin^2(w dt / 2) / w^2 -> dt^2 / 4 and J(0) = 0 for physical baths
            return 0j
        base = J(w) * np.sin(0.5 * w * delta_t) ** 2 / w**2
        if m == 0:
            return 2.0 * base + 0j
        return 4.0 * base * np.exp(1j * w * m * delta_t)

    return _mapped_quad(f, omega_scale, rtol, limit)


def build_kernel_table(bath: BathSpec, disc: Discretization) -> KernelTable:
    """Table of ``eta_m`` for ``m = 0 .. n_steps - 1``."""
    if disc.n_steps == 0:
        raise ContractError("cannot build a kernel table for zero steps")
    eta = eta_discrete(bath, disc.delta_t, np.arange(disc.n_steps))
    return KernelTable(np.atleast_1d(eta), disc.delta_t)
