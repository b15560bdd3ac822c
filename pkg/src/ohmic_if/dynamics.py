"""Reduced spin dynamics through the influence-functional MPS.

Spin index 0 is ``s = +1`` (spin up, sigma_z eigenvalue +1) and index 1 is
``s = -1``.  A step applies the IF matrix ``M_{s,sbar}`` to every spin-pair block of
the boson vector and then the spin unitary ``U = exp(+i dt h(t_k))`` as
``rho -> U rho U^+``, with ``h`` sampled at the left end of the step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import ContractError, NumericalError, ParameterError
from .fock import SPIN_PAIRS, IfTensor

log = logging.getLogger(__name__)

__all__ = [
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "SpinModel",
    "EvolutionState",
    "EvolutionResult",
    "Observables",
    "density_matrix",
    "as_density_matrix",
    "spin_step_unitary",
    "initial_state",
    "propagate",
    "evolve",
    "observables",
]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_HERM_TOL = 1e-12


class SpinModel:
    """Spin Hamiltonian ``h(t)`` or an explicit per-step list of unitaries."""

    def __init__(
        self,
        hamiltonian: Optional[Callable[[float], np.ndarray]] = None,
        unitaries: Optional[Sequence[np.ndarray]] = None,
        name: str = "custom",
    ):
        if (hamiltonian is None) == (unitaries is None):
            raise ContractError("give exactly one of hamiltonian and unitaries")
        self.name = name
        self.hamiltonian = hamiltonian
        self.unitaries = None
        if unitaries is not None:
            us = np.array(unitaries, dtype=complex)
            if us.ndim != 3 or us.shape[1:] != (2, 2):
                raise ContractError("unitaries must have shape (n, 2, 2)")
            dev = np.abs(np.conj(np.swapaxes(us, 1, 2)) @ us - np.eye(2)).max(initial=0.0)
            if dev > _HERM_TOL:
                raise ContractError(f"supplied matrices are not unitary (deviation {dev:.2e})")
            us.setflags(write=False)
            self.unitaries = us

    @classmethod
    def free(cls) -> "SpinModel":
        return cls(lambda t: np.zeros((2, 2), dtype=complex), name="free")

    @classmethod
    def rabi(cls, delta: float) -> "SpinModel":
        """``h = (delta / 2) sigma_x``."""
        h = 0.5 * delta * SIGMA_X
        return cls(lambda t: h, name=f"rabi {delta:g}")

    @classmethod
    def biased_rabi(cls, delta: float, eps_z: float) -> "SpinModel":
        """``h = (delta / 2) sigma_x + (eps_z / 2) sigma_z``."""
        h = 0.5 * delta * SIGMA_X + 0.5 * eps_z * SIGMA_Z
        return cls(lambda t: h, name=f"biased-rabi {delta:g} {eps_z:g}")

    @property
    def is_explicit(self) -> bool:
        return self.unitaries is not None

    def h(self, t: float) -> np.ndarray:
        if self.hamiltonian is None:
            raise ContractError("model is defined by explicit unitaries and has no Hamiltonian")
        h = np.asarray(self.hamiltonian(t), dtype=complex)
        if h.shape != (2, 2):
            raise ContractError("h(t) must be 2x2")
        if np.abs(h - h.conj().T).max() > _HERM_TOL:
            raise ContractError(f"h({t}) is not Hermitian")
        return h

    def __repr__(self) -> str:
        return f"SpinModel({self.name!r})"


def spin_step_unitary(model: SpinModel, t: float, delta_t: float) -> np.ndarray:
    """``exp(+i delta_t h(t))`` in closed form.

    For explicit models the unitary of step ``round(t / delta_t)`` is returned.
    """
    if delta_t <= 0:
        raise ParameterError("delta_t must be > 0")
    if model.is_explicit:
        k = int(round(t / delta_t))
        if not 0 <= k < len(model.unitaries):
            raise ContractError(f"no unitary supplied for step {k}")
        return np.array(model.unitaries[k])
    h = model.h(t)
    h0 = 0.5 * np.trace(h).real
    v = np.array([h[0, 1].real, -h[0, 1].imag, 0.5 * (h[0, 0] - h[1, 1]).real])
    r = float(np.linalg.norm(v))
    angle = r * delta_t
    # sin(angle)/r, finite as r -> 0
    sinc = delta_t * np.sinc(angle / np.pi)
    vs = v[0] * SIGMA_X + v[1] * SIGMA_Y + v[2] * SIGMA_Z
    return np.exp(1j * h0 * delta_t) * (np.cos(angle) * np.eye(2) + 1j * sinc * vs)


def density_matrix(name: str) -> np.ndarray:
    """Named spin states: ``up``, ``down``, ``plus``, ``minus``, ``mixed``."""
    states = {
        "up": [[1, 0], [0, 0]],
        "down": [[0, 0], [0, 1]],
        "plus": [[0.5, 0.5], [0.5, 0.5]],
        "minus": [[0.5, -0.5], [-0.5, 0.5]],
        "mixed": [[0.5, 0], [0, 0.5]],
    }
    try:
        return np.array(states[name], dtype=complex)
    except KeyError:
        raise ParameterError(f"unknown state {name!r}; choose from {sorted(states)}") from None


def as_density_matrix(rho, tol: float = _HERM_TOL) -> np.ndarray:
    rho = np.array(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ContractError("density matrix must be 2x2")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise ContractError("density matrix is not Hermitian")
    return rho


@dataclass
class EvolutionState:
    """Boson x spin-pair vector ``psi[n, a, b]``; ``psi[0]`` is the spin density matrix."""

    psi: np.ndarray
    step: int = 0
    norm_history: List[float] = field(default_factory=list)

    @property
    def rho(self) -> np.ndarray:
        return self.psi[0].copy()

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.psi))


def initial_state(rho0, dimension: int) -> EvolutionState:
    psi = np.zeros((dimension, 2, 2), dtype=complex)
    psi[0] = as_density_matrix(rho0)
    st = EvolutionState(psi)
    st.norm_history.append(st.norm)
    return st


@dataclass
class EvolutionResult:
    rhos: List[np.ndarray]
    state_norms: np.ndarray
    max_norm_growth: float
    state: EvolutionState


def propagate(
    tensor: IfTensor,
    model: SpinModel,
    rho0,
    n_steps: int,
    *,
    norm_slack: float = 1e-9,
    strict: bool = False,
    callback: Optional[Callable[[EvolutionState], None]] = None,
) -> EvolutionResult:
    """Run ``n_steps`` steps and keep norm diagnostics.

    ``max_norm_growth`` is the largest ratio of the state norm after and before an
    IF-matrix application.  Growth beyond ``1 + norm_slack`` is logged, and raises
    :class:`NumericalError` when ``strict`` is set.  ``callback`` sees the state after
    every full step (and once before the first).
    """
    if n_steps < 0:
        raise ParameterError("n_steps must be >= 0")
    if model.is_explicit and len(model.unitaries) < n_steps:
        raise ContractError(f"model supplies {len(model.unitaries)} unitaries, {n_steps} steps requested")
    dt = tensor.delta_t
    state = initial_state(rho0, tensor.dimension)
    rhos = [state.rho]
    growth = 1.0
    warned = False
    if callback is not None:
        callback(state)
    mats = [tensor[pair] for pair in SPIN_PAIRS]
    for k in range(n_steps):
        psi = state.psi
        before = np.linalg.norm(psi)
        for idx, m in enumerate(mats):
            a, b = divmod(idx, 2)
            psi[:, a, b] = m @ psi[:, a, b]
        after = np.linalg.norm(psi)
        if not np.isfinite(after):
            raise NumericalError(f"state became non-finite at step {k + 1}")
        if before > 0:
            ratio = after / before
            growth = max(growth, ratio)
            if ratio > 1 + norm_slack and not warned:
                warned = True
                msg = f"IF step {k + 1} increased the state norm by a factor {ratio:.12g}"
                if strict:
                    raise NumericalError(msg)
                log.warning(msg)
        u = spin_step_unitary(model, k * dt, dt)
        state.psi = u @ psi @ u.conj().T
        state.step = k + 1
        state.norm_history.append(state.norm)
        rhos.append(state.rho)
        if callback is not None:
            callback(state)
    return EvolutionResult(rhos, np.array(state.norm_history), growth, state)


def evolve(tensor: IfTensor, model: SpinModel, rho0, n_steps: int, **kwargs) -> List[np.ndarray]:
    """``[rho(t_0), ..., rho(t_N)]`` obtained by vacuum projection after each step."""
    return propagate(tensor, model, rho0, n_steps, **kwargs).rhos


@dataclass(frozen=True)
class Observables:
    sz: float
    sx: float
    sy: float
    trace: complex
    purity: float


def observables(rho) -> Observables:
    rho = np.asarray(rho, dtype=complex)
    return Observables(
        sz=float(np.trace(rho @ SIGMA_Z).real),
        sx=float(np.trace(rho @ SIGMA_X).real),
        sy=float(np.trace(rho @ SIGMA_Y).real),
        trace=complex(np.trace(rho)),
        purity=float(np.trace(rho @ rho).real),
    )
