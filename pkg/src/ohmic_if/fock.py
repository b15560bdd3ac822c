"""Truncated auxiliary-boson Fock space and the MPS matrices of the influence functional.

Each exponential-sum mode ``k`` carries two bosons, ``a_k`` (forward branch) and
``abar_k`` (backward branch).  Basis modes are ordered by ascending ``k`` with
``a_k`` before ``abar_k``.  For a step with spin labels ``(s, sbar)`` the per-mode
generator is

    G_k = -Omega_k (a^+ + x lam/(sqrt2 Omega_k)) (a - sqrt2 s lam/Omega_k)
          - Omega_k^* (abar^+ - x lam^*/(sqrt2 Omega_k^*)) (abar - sqrt2 sbar lam^*/Omega_k^*)

with ``x = s - sbar``, and the MPS matrix is
``M_{s,sbar} = exp(-Lambda x^2) prod_k exp(G_k dt)`` restricted to the truncated basis.

Propagation runs forward in time: the matrix of the earliest step acts first on the
vacuum, and ``<0| M_N ... M_1 |0>`` is the influence functional of the trajectory.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import ContractError, NumericalError, ParameterError, ResourceError
from .expsum import ExpSum, _phi1, nu_values
from .kernel import Discretization

log = logging.getLogger(__name__)

__all__ = [
    "SPIN_PAIRS",
    "DEFAULT_MEMORY_BUDGET",
    "TruncationPlan",
    "FockBasis",
    "IfTensor",
    "ladder",
    "count_states",
    "binomial_state_count",
    "plan_truncation",
    "build_basis",
    "mode_generator",
    "mode_propagator",
    "lambda_shift",
    "assemble_if_tensor",
    "generic_mps_operator",
    "contract_amplitude",
]

#: (s, sbar) blocks in storage order; spin index 0 <-> s = +1, index 1 <-> s = -1
SPIN_PAIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
#: bytes allowed for the four dense D x D complex matrices
DEFAULT_MEMORY_BUDGET = 2 * 1024**3


def ladder(cap: int) -> np.ndarray:
    """Annihilation operator on ``{|0>, ..., |cap>}``."""
    return np.diag(np.sqrt(np.arange(1, cap + 1, dtype=float)), 1).astype(complex)


def count_states(n_modes: int, per_mode_cap: int, global_cap: int) -> int:
    """Number of occupation vectors with ``n_i <= per_mode_cap`` and ``sum n_i <= global_cap``."""
    if n_modes < 0 or per_mode_cap < 0 or global_cap < 0:
        raise ParameterError("mode count and caps must be nonnegative")
    ways = [1] + [0] * global_cap
    for _ in range(n_modes):
        new = [0] * (global_cap + 1)
        for total, w in enumerate(ways):
            if w:
                for n in range(min(per_mode_cap, global_cap - total) + 1):
                    new[total + n] += w
        ways = new
    return sum(ways)


def binomial_state_count(n_modes: int, n_star: int) -> int:
    """``sum_{n=1}^{n_star} C(n + K, K)`` with ``K = n_modes``."""
    return sum(math.comb(n + n_modes, n_modes) for n in range(1, n_star + 1))


@dataclass(frozen=True)
class TruncationPlan:
    n_star: int
    per_mode_cap: int
    global_cap: int
    nu_star: float
    d_estimate: int
    d_actual: int
    n_mode_pairs: int
    k_count: int
    chi: float

    @property
    def memory_bytes(self) -> int:
        """Storage of the four dense complex MPS matrices."""
        return 4 * 16 * self.d_actual**2


def plan_truncation(
    expsum: ExpSum,
    omega_c: float,
    total_time: float,
    epsilon: float,
    *,
    per_mode_ceiling: Optional[int] = None,
    global_cap: Optional[int] = None,
) -> TruncationPlan:
    """Excitation cap ``n_star`` and basis-size accounting for a decomposition.

    ``n_star = ceil(log((omega_c T)^2 / epsilon) / log(1 / nu_star))``; the binomial
    estimate uses the node count ``K = N + M``.  ``d_actual`` counts the basis that
    would actually be enumerated with the chosen caps.
    """
    nu_star = nu_values(expsum).nu_star
    if nu_star >= 1.0:
        raise ParameterError(
            f"nu_star = {nu_star:.4g} >= 1: the excitation bound needs a smaller "
            "alpha * chi (reduce epsilon or alpha)"
        )
    if nu_star == 0.0:
        n_star = 1
    else:
        ratio = math.log((omega_c * total_time) ** 2 / epsilon) / math.log(1.0 / nu_star)
        n_star = max(1, math.ceil(ratio))
    per_mode = n_star if per_mode_ceiling is None else min(n_star, per_mode_ceiling)
    gcap = n_star if global_cap is None else global_cap
    k_count = expsum.n_eps + expsum.m_eps
    return TruncationPlan(
        n_star=n_star,
        per_mode_cap=per_mode,
        global_cap=gcap,
        nu_star=nu_star,
        d_estimate=binomial_state_count(k_count, n_star),
        d_actual=count_states(2 * expsum.n_modes, per_mode, gcap),
        n_mode_pairs=expsum.n_modes,
        k_count=k_count,
        chi=expsum.chi,
    )


class FockBasis:
    """Occupation basis of ``n_modes`` bosons under a per-mode and a global cap.

    States are in graded lexicographic order: by total occupation, then
    lexicographically descending, so the vacuum has index 0 and ``(1,0)`` precedes
    ``(0,1)``.
    """

    def __init__(self, n_modes: int, per_mode_cap: int, global_cap: int, states: np.ndarray):
        self.n_modes = n_modes
        self.per_mode_cap = per_mode_cap
        self.global_cap = global_cap
        self.states = states
        self.states.setflags(write=False)
        self._index = {tuple(row): i for i, row in enumerate(states.tolist())}

    @property
    def dimension(self) -> int:
        return len(self.states)

    def __len__(self) -> int:
        return self.dimension

    def index(self, occupation: Sequence[int]) -> int:
        return self._index[tuple(int(n) for n in occupation)]

    def get(self, occupation: Sequence[int], default=None):
        return self._index.get(tuple(int(n) for n in occupation), default)

    @property
    def totals(self) -> np.ndarray:
        return self.states.sum(axis=1)

    def lowering(self, mode: int) -> sp.csr_matrix:
        """Sparse annihilation operator of ``mode`` restricted to the basis."""
        rows, cols, vals = [], [], []
        for j, occ in enumerate(self.states):
            n = occ[mode]
            if n == 0:
                continue
            tgt = occ.copy()
            tgt[mode] -= 1
            rows.append(self.index(tgt))
            cols.append(j)
            vals.append(math.sqrt(n))
        d = self.dimension
        return sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(d, d))

    def number(self, mode: int) -> np.ndarray:
        return self.states[:, mode].astype(float)

    def swap_permutation(self) -> np.ndarray:
        """``perm[i]`` is the index of state ``i`` with every ``a_k <-> abar_k`` exchanged."""
        if self.n_modes % 2:
            raise ContractError("swap needs an even number of modes")
        swapped = self.states.reshape(-1, self.n_modes // 2, 2)[:, :, ::-1].reshape(-1, self.n_modes)
        return np.array([self.index(row) for row in swapped])

    def __repr__(self) -> str:
        return (f"FockBasis(n_modes={self.n_modes}, per_mode_cap={self.per_mode_cap}, "
                f"global_cap={self.global_cap}, dimension={self.dimension})")


def _enumerate(n_modes: int, per_mode_cap: int, global_cap: int) -> np.ndarray:
    out = []
    for total in range(global_cap + 1):
        level = []
        # states with sum exactly `total`, descending lexicographic
        def rec_exact(prefix, remaining, modes_left):
            if modes_left == 0:
                if remaining == 0:
                    level.append(prefix)
                return
            if remaining > per_mode_cap * modes_left:
                return
            for n in range(min(per_mode_cap, remaining), -1, -1):
                rec_exact(prefix + (n,), remaining - n, modes_left - 1)

        rec_exact((), total, n_modes)
        out.extend(level)
    return np.array(out, dtype=np.int64).reshape(len(out), n_modes)


def build_basis(
    n_modes: int,
    per_mode_cap: int,
    global_cap: int,
    *,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> FockBasis:
    """Enumerate the truncated basis; refuses bases whose MPS would not fit in memory."""
    if per_mode_cap < 0 or global_cap < 0 or n_modes < 0:
        raise ParameterError("caps and mode count must be nonnegative")
    d = count_states(n_modes, per_mode_cap, global_cap)
    need = 4 * 16 * d * d
    if need > memory_budget:
        raise ResourceError(
            f"basis dimension D={d} needs {need / 1024**3:.2f} GiB for the MPS matrices "
            f"(budget {memory_budget / 1024**3:.2f} GiB)"
        )
    return FockBasis(n_modes, per_mode_cap, global_cap, _enumerate(n_modes, per_mode_cap, global_cap))


def mode_generator(lam: complex, omega_cplx: complex, s: int, s_bar: int, cap: int) -> np.ndarray:
    """Dense generator of one mode pair on ``{n_a, n_abar <= cap}``.

    Index of ``|n_a, n_abar>`` is ``n_a * (cap + 1) + n_abar``.
    """
    if cap < 0:
        raise ParameterError("cap must be nonnegative")
    if s not in (1, -1) or s_bar not in (1, -1):
        raise ContractError("spin labels must be +1 or -1")
    a1 = ladder(cap)
    eye = np.eye(cap + 1)
    a = np.kron(a1, eye)
    abar = np.kron(eye, a1)
    ad, abard = a.conj().T, abar.conj().T
    one = np.eye((cap + 1) ** 2)
    x = s - s_bar
    om, omc, lamc = omega_cplx, np.conj(omega_cplx), np.conj(lam)
    r2 = math.sqrt(2.0)
    fwd = -om * (ad + x * lam / (r2 * om) * one) @ (a - r2 * s * lam / om * one)
    bwd = -omc * (abard - x * lamc / (r2 * omc) * one) @ (abar - r2 * s_bar * lamc / omc * one)
    return fwd + bwd


def mode_propagator(generator: np.ndarray, delta_t: float) -> np.ndarray:
    """``exp(generator * delta_t)`` by scaling and squaring with a Pade core."""
    if delta_t <= 0:
        raise ParameterError("delta_t must be > 0")
    if not np.all(np.isfinite(generator)):
        raise NumericalError("generator has non-finite entries")
    out = scipy.linalg.expm(generator * delta_t)
    if not np.all(np.isfinite(out)):
        raise NumericalError("matrix exponential overflowed")
    return out


def lambda_shift(expsum: ExpSum, eta_00: float, delta_t: float, *, finite_step: bool = False) -> float:
    """Scalar shift ``Lambda`` multiplying ``-(s - sbar)^2``.

    The default is ``eta_00 + sum_k Re(lambda_k^2 / Omega_k) dt``.  With
    ``finite_step=True`` the mode term is ``Re(lambda_k^2 (1 - exp(-Omega_k dt)) / Omega_k^2)``,
    which cancels the within-step contribution of the exponentials exactly; the two
    agree to first order in ``dt``.
    """
    if expsum.n_modes == 0:
        value = float(eta_00)
    else:
        lam_sq, om = expsum.lambda_sq, expsum.omega_cplx
        if finite_step:
            term = lam_sq * delta_t * _phi1(om * delta_t) / om
        else:
            term = lam_sq / om * delta_t
        value = float(eta_00 + np.sum(term.real))
    if value < 0:
        log.warning("Lambda = %.3e is negative", value)
    return value


@dataclass(frozen=True)
class IfTensor:
    """The four MPS matrices ``M_{s,sbar}`` on a truncated basis."""

    m_ss: Dict[Tuple[int, int], np.ndarray]
    lambda_shift: float
    basis: FockBasis
    delta_t: float

    def __getitem__(self, key: Tuple[int, int]) -> np.ndarray:
        return self.m_ss[key]

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    def max_singular_values(self) -> Dict[Tuple[int, int], float]:
        return {key: float(np.linalg.norm(m, 2)) for key, m in self.m_ss.items()}


def _pair_indices(basis: FockBasis, pair: int, cap: int) -> np.ndarray:
    st = basis.states
    return st[:, 2 * pair] * (cap + 1) + st[:, 2 * pair + 1]


def assemble_if_tensor(
    expsum: ExpSum,
    disc,
    basis: FockBasis,
    eta_00: float,
    *,
    shift: str = "finite-step",
) -> IfTensor:
    """Assemble ``M_{s,sbar}`` for all four spin pairs.

    ``disc`` is a :class:`Discretization` or a bare time step.  ``shift`` selects the
    scalar shift: ``"finite-step"`` (default) makes the same-step weight equal to
    ``eta_00`` exactly, ``"first-order"`` uses the first-order expression of
    :func:`lambda_shift`.
    """
    delta_t = disc.delta_t if isinstance(disc, Discretization) else float(disc)
    if basis.n_modes != 2 * expsum.n_modes:
        raise ContractError(
            f"basis has {basis.n_modes} modes, decomposition needs {2 * expsum.n_modes}"
        )
    if shift not in ("finite-step", "first-order"):
        raise ParameterError(f"unknown shift {shift!r}")
    lam_shift = lambda_shift(expsum, eta_00, delta_t, finite_step=(shift == "finite-step"))
    cap = basis.per_mode_cap
    idx = [_pair_indices(basis, k, cap) for k in range(expsum.n_modes)]
    d = basis.dimension
    m_ss = {}
    for s, sb in SPIN_PAIRS:
        mat = np.full((d, d), math.exp(-lam_shift * (s - sb) ** 2), dtype=complex)
        for k, mode in enumerate(expsum.modes):
            prop = mode_propagator(mode_generator(mode.lam, mode.omega_cplx, s, sb, cap), delta_t)
            mat *= prop[np.ix_(idx[k], idx[k])]
        mat.setflags(write=False)
        m_ss[(s, sb)] = mat
    return IfTensor(m_ss, lam_shift, basis, delta_t)


def _nilpotent_exp(op: sp.spmatrix, order: int) -> np.ndarray:
    d = op.shape[0]
    out = np.eye(d, dtype=complex)
    term = sp.identity(d, dtype=complex, format="csr")
    for n in range(1, order + 1):
        term = (term @ op) / n
        if term.nnz == 0:
            break
        out += term.toarray()
    return out


def generic_mps_operator(A, B, C, D: complex, basis: FockBasis) -> np.ndarray:
    """Dense matrix of ``e^D e^{a^+ . B} e^{a^+ log(A) a} e^{C . a}`` on ``basis``.

    ``A`` is the diagonal of a diagonal matrix.  The raising and lowering exponentials
    are exact on a capped basis since every intermediate state stays inside it.
    """
    A = np.asarray(np.diag(A) if np.ndim(A) == 2 else A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    C = np.asarray(C, dtype=complex)
    nm = basis.n_modes
    if not (A.shape == B.shape == C.shape == (nm,)):
        raise ContractError(f"A, B, C must have length {nm}")
    if np.any(np.abs(A) > 1 + 1e-12):
        raise ParameterError("|A_kk| must not exceed 1")
    d = basis.dimension
    raise_op = sp.csr_matrix((d, d), dtype=complex)
    lower_op = sp.csr_matrix((d, d), dtype=complex)
    for m in range(nm):
        low = basis.lowering(m)
        if B[m] != 0:
            raise_op = raise_op + B[m] * low.conj().T.tocsr()
        if C[m] != 0:
            lower_op = lower_op + C[m] * low
    order = basis.global_cap
    diag = np.prod(A[None, :] ** basis.states, axis=1)
    e_raise = _nilpotent_exp(raise_op, order)
    e_lower = _nilpotent_exp(lower_op, order)
    return np.exp(D) * (e_raise * diag[None, :]) @ e_lower


def contract_amplitude(tensor: IfTensor, trajectory: Sequence[Tuple[int, int]]) -> complex:
    """``<0| M_{s_N,sbar_N} ... M_{s_1,sbar_1} |0>``; ``trajectory[0]`` is the earliest step."""
    if len(trajectory) == 0:
        raise ContractError("trajectory must contain at least one step")
    v = np.zeros(tensor.dimension, dtype=complex)
    v[0] = 1.0
    for s, sb in trajectory:
        v = tensor.m_ss[(int(s), int(sb))] @ v
    return complex(v[0])
