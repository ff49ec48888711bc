"""Transfer matrix, transformed Hamiltonians and explicit solutions.

For a state ``(Pi, S)`` at time t, with ``X = Pi^* S^{-1}`` and
``R_k = (A - c_k I)^{-1}``:

* ``w_A(t, z) = I_m - i X (A - z I)^{-1} Pi`` (unitary at ``z = c_k``),
* ``H~_k = w_A(t, c_k) H_k(t) w_A(t, c_k)^*``,
* ``psi~(t, zeta) = X exp(i sum_k zeta_k R_k)``, an m x n solution of
  ``d psi/dt = sum_k H~_k d psi/d zeta_k``.

``S^{-1}`` is always applied through a linear solve. Points where the
condition number of ``S`` exceeds :data:`SINGULAR_COND` raise
:class:`~gbdt.errors.SingularSError`.
"""
from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import ShapeError, SingularSError
from .matrix_core import expm, resolvent

__all__ = [
    "SINGULAR_COND",
    "SolutionSample",
    "TransferMatrix",
    "TransformedHamiltonians",
    "eigen_exponent",
    "psi_tilde",
    "psi_tilde_space_derivative",
    "quadratic_form",
    "quadratic_form_direct",
    "s_inverse_pi",
    "transfer",
    "transfer_at_points",
    "transform_hamiltonians",
]

SINGULAR_COND = 1e12


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    t: float
    z: complex
    value: np.ndarray

    def unitarity_defect(self):
        w = self.value
        return float(np.linalg.norm(w @ w.conj().T - np.eye(w.shape[0])))


@dataclass(frozen=True, eq=False)
class TransformedHamiltonians:
    t: float
    H_tilde: List[np.ndarray]


@dataclass(frozen=True, eq=False)
class SolutionSample:
    t: float
    zeta: tuple
    value: np.ndarray


def s_inverse_pi(state, max_cond=SINGULAR_COND):
    """``S^{-1} Pi`` by a factorized solve; ``X = (S^{-1} Pi)^*`` since S is Hermitian."""
    if not state.s_condition < max_cond:
        raise SingularSError(state.t, state.s_condition)
    return np.linalg.solve(state.S, state.Pi)


def transfer(state, triple, z, max_cond=SINGULAR_COND):
    """Transfer matrix function ``w_A(t, z)`` at a point ``z`` off ``sigma(A)``."""
    g = s_inverse_pi(state, max_cond)
    rz = resolvent(triple.A, z)
    w = np.eye(triple.m, dtype=complex) - 1j * (g.conj().T @ rz @ state.Pi)
    return TransferMatrix(state.t, complex(z), w)


def transfer_at_points(state, triple, max_cond=SINGULAR_COND):
    """``[w_A(t, c_k) for k]`` reusing the triple's cached resolvents."""
    g = s_inverse_pi(state, max_cond)
    eye = np.eye(triple.m, dtype=complex)
    return [
        TransferMatrix(state.t, complex(ck), eye - 1j * (g.conj().T @ rk @ state.Pi))
        for ck, rk in zip(triple.c, triple.resolvents)
    ]


def transform_hamiltonians(state, triple, family, max_cond=SINGULAR_COND):
    # w^{-1} is taken as w^* (exact unitarity at the real points c_k)
    ws = transfer_at_points(state, triple, max_cond)
    hs = family.evaluate(state.t)
    out = []
    for w, h in zip(ws, hs):
        ht = w.value @ h @ w.value.conj().T
        out.append(0.5 * (ht + ht.conj().T))
    return TransformedHamiltonians(state.t, out)


def _zeta(zeta, triple):
    z = np.atleast_1d(np.asarray(zeta, dtype=float))
    if z.shape != (triple.r,):
        raise ShapeError(f"zeta must have {triple.r} entries, got shape {z.shape}")
    return z


def eigen_exponent(triple, zeta):
    """``exp(i sum_k zeta_k R_k)``; the resolvents commute, so the order is irrelevant."""
    z = _zeta(zeta, triple)
    gen = sum(zk * rk for zk, rk in zip(z, triple.resolvents))
    return expm(1j * gen)


def psi_tilde(state, triple, zeta, max_cond=SINGULAR_COND):
    """Sample the m x n solution ``psi~(t, zeta)``."""
    z = _zeta(zeta, triple)
    x = s_inverse_pi(state, max_cond).conj().T
    return SolutionSample(state.t, tuple(z), x @ eigen_exponent(triple, z))


def psi_tilde_space_derivative(state, triple, zeta, k, max_cond=SINGULAR_COND):
    """Analytic ``d psi~ / d zeta_k = X (i R_k) exp(i sum_j zeta_j R_j)``."""
    if not 0 <= k < triple.r:
        raise IndexError(f"k={k} out of range for r={triple.r}")
    x = s_inverse_pi(state, max_cond).conj().T
    return x @ (1j * triple.resolvents[k]) @ eigen_exponent(triple, zeta)


def quadratic_form(state, triple, family, zeta, k, max_cond=SINGULAR_COND):
    """``psi~^* H~_k psi~`` without forming ``w_A``.

    Uses ``S^{-1} Pi w_A(t, c_k) = (A^* - c_k I) S^{-1} R_k Pi``, so the value is
    ``E^* G H_k G^* E`` with ``G = (A^* - c_k I) S^{-1} R_k Pi`` and
    ``E = exp(i sum_j zeta_j R_j)``. The result is n x n.
    """
    if not 0 <= k < triple.r:
        raise IndexError(f"k={k} out of range for r={triple.r}")
    if not state.s_condition < max_cond:
        raise SingularSError(state.t, state.s_condition)
    a = triple.A
    n = triple.n
    shifted_adj = a.conj().T - triple.c[k] * np.eye(n)
    g = shifted_adj @ np.linalg.solve(state.S, triple.resolvents[k] @ state.Pi)
    e = eigen_exponent(triple, zeta)
    ge = g.conj().T @ e
    h = family.evaluate(state.t)[k]
    return ge.conj().T @ h @ ge


def quadratic_form_direct(state, triple, family, zeta, k, max_cond=SINGULAR_COND):
    """``psi~^* H~_k psi~`` from the transformed Hamiltonian itself."""
    psi = psi_tilde(state, triple, zeta, max_cond).value
    ht = transform_hamiltonians(state, triple, family, max_cond).H_tilde[k]
    return psi.conj().T @ ht @ psi
