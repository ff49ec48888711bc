"""Determining data of the transformation and evolution of ``Pi(t)``, ``S(t)``.

The generalized eigenfunction ``Pi(t)`` (n x m) and the Hermitian ``S(t)``
(n x n) obey

    Pi'(t) = -i sum_k R_k Pi(t) H_k(t),
    S'(t)  = -sum_k R_k Pi(t) H_k(t) Pi(t)^* R_k^*,

with ``R_k = (A - c_k I)^{-1}``, and keep the identity
``A S(t) - S(t) A^* = i Pi(t) Pi(t)^*`` for all t.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional

import numpy as np

from .errors import (
    IdentityDriftError,
    InvalidTripleError,
    ShapeError,
    SpectralGapError,
)
from .matrix_core import (
    GAP_THRESHOLD,
    HERMITIAN_TOL,
    HermitianCertificate,
    as_matrix,
    as_square,
    expm,
    hermitian_certificate,
    hermitian_spectrum,
    resolvent,
    solve_sylvester,
)

__all__ = [
    "ClosedForm",
    "EvolvedState",
    "GbdtTriple",
    "HamiltonianFamily",
    "TripleDiagnostics",
    "Trajectory",
    "closed_form_example1",
    "closed_form_example2",
    "diagnose_triple",
    "evolve",
    "identity_residual",
    "make_state",
    "ode_rhs",
    "validate_triple",
]

IDENTITY_TOL = 1e-8
SINGULAR_COND = 1e12

logger = logging.getLogger(__name__)


def _real_vector(c):
    c = np.atleast_1d(np.asarray(c))
    if np.iscomplexobj(c):
        if np.any(c.imag != 0):
            raise InvalidTripleError("spectrum", "the points c_k must be real")
        c = c.real
    c = c.astype(float)
    if c.ndim != 1 or not np.all(np.isfinite(c)):
        raise ShapeError("c must be a finite 1-D list of reals")
    return c


@dataclass(frozen=True, eq=False)
class GbdtTriple:
    """``{A, S(0), Pi(0)}`` together with the real points ``c_1..c_r``."""

    A: np.ndarray
    S0: np.ndarray
    Pi0: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", as_square(self.A, "A"))
        object.__setattr__(self, "S0", as_square(self.S0, "S0"))
        object.__setattr__(self, "Pi0", as_matrix(self.Pi0, "Pi0"))
        object.__setattr__(self, "c", _real_vector(self.c))
        n = self.A.shape[0]
        if self.S0.shape != (n, n):
            raise ShapeError(f"S0 has shape {self.S0.shape}, expected {(n, n)}")
        if self.Pi0.shape[0] != n:
            raise ShapeError(f"Pi0 has {self.Pi0.shape[0]} rows, expected {n}")
        if self.c.size == 0:
            raise ShapeError("at least one point c_k is required")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.Pi0.shape[1]

    @property
    def r(self):
        return self.c.size

    @cached_property
    def resolvents(self):
        """``[(A - c_k I)^{-1} for k]``, computed once per triple."""
        return [resolvent(self.A, ck) for ck in self.c]

    @cached_property
    def stacked_resolvents(self):
        return np.stack(self.resolvents)

    def identity_residual(self):
        return identity_residual(self.A, self.S0, self.Pi0)

    def identity_scale(self):
        return 1.0 + float(np.linalg.norm(self.Pi0)) ** 2


def identity_residual(a, s, pi):
    """Frobenius norm of ``A S - S A^* - i Pi Pi^*``."""
    return float(np.linalg.norm(a @ s - s @ a.conj().T - 1j * (pi @ pi.conj().T)))


@dataclass(frozen=True)
class TripleDiagnostics:
    certificate: Optional[HermitianCertificate]
    identity_residual: float
    identity_tolerance: float
    spectral_distance: float
    problems: List[tuple] = field(default_factory=list)

    @property
    def ok(self):
        return not self.problems


def diagnose_triple(triple, gap=GAP_THRESHOLD, identity_tol=1e-10,
                    hermitian_tol=HERMITIAN_TOL):
    """Check every condition on ``triple`` and collect the violations.

    Returns a :class:`TripleDiagnostics` whose ``problems`` is a list of
    ``(condition, message)`` pairs, empty when the triple is valid.
    """
    problems = []
    try:
        cert = hermitian_certificate(triple.S0, hermitian_tol, "S0")
    except Exception as exc:  # NotHermitianError
        cert = None
        problems.append(("hermitian", str(exc)))

    s0 = cert.matrix if cert is not None else triple.S0
    res = identity_residual(triple.A, s0, triple.Pi0)
    tol = identity_tol * (1.0 + float(np.linalg.norm(triple.Pi0)) ** 2)
    if res > tol:
        problems.append((
            "identity",
            f"A S0 - S0 A* - i Pi0 Pi0* has norm {res:.3e} > {tol:.3e}",
        ))

    lam = np.linalg.eigvals(triple.A)
    dist = float(np.min(np.abs(lam[:, None] - triple.c[None, :])))
    if dist <= gap:
        k = int(np.argmin(np.min(np.abs(lam[:, None] - triple.c[None, :]), axis=0)))
        problems.append((
            "spectrum",
            f"c_{k} = {triple.c[k]:g} lies {dist:.3e} from sigma(A)",
        ))

    c = np.sort(triple.c)
    if c.size > 1 and np.any(np.diff(c) == 0.0):
        dup = c[np.flatnonzero(np.diff(c) == 0.0)[0]]
        problems.append(("distinct", f"duplicate point c_k = {dup:g}"))

    return TripleDiagnostics(cert, res, tol, dist, problems)


def validate_triple(triple, **kwargs):
    """Raise :class:`InvalidTripleError` on the first violated condition."""
    diag = diagnose_triple(triple, **kwargs)
    if diag.problems:
        condition, message = diag.problems[0]
        raise InvalidTripleError(condition, message)
    return diag


class HamiltonianFamily:
    """The initial Hamiltonians ``H_1(t)..H_r(t)``, each Hermitian m x m.

    Build instances with the classmethods; ``kind`` is one of
    ``"ConstantSignature"``, ``"OrthoProjectors"``, ``"ConstantHermitian"``,
    ``"PolynomialHermitian"``.
    """

    KINDS = ("ConstantSignature", "OrthoProjectors", "ConstantHermitian",
             "PolynomialHermitian")

    def __init__(self, kind, m, r, payload, constant):
        self.kind = kind
        self.m = m
        self.r = r
        self.payload = payload
        self._constant = constant

    def __repr__(self):
        return f"HamiltonianFamily(kind={self.kind!r}, m={self.m}, r={self.r})"

    @classmethod
    def constant_signature(cls, m1, m2, r):
        if m1 < 0 or m2 < 0 or m1 + m2 == 0 or r < 1:
            raise ShapeError(f"invalid signature sizes m1={m1}, m2={m2}, r={r}")
        j = np.diag(np.r_[np.ones(m1), -np.ones(m2)]).astype(complex)
        return cls("ConstantSignature", m1 + m2, r, {"m1": m1, "m2": m2},
                   [j] * r)

    @classmethod
    def ortho_projectors(cls, beta, tol=1e-10):
        """``H_k = beta_k^* beta_k`` from the orthonormal rows ``beta_k`` of ``beta``."""
        beta = as_square(beta, "beta")
        m = beta.shape[0]
        err = float(np.linalg.norm(beta @ beta.conj().T - np.eye(m)))
        if err > tol:
            raise InvalidTripleError(
                "orthonormal", f"rows of beta are not orthonormal: ||beta beta* - I|| = {err:.3e}"
            )
        hs = [np.outer(beta[k].conj(), beta[k]) for k in range(m)]
        return cls("OrthoProjectors", m, m, {"beta": beta}, hs)

    @classmethod
    def constant_hermitian(cls, matrices, tol=HERMITIAN_TOL):
        hs = [hermitian_certificate(h, tol, f"H_{k}").matrix
              for k, h in enumerate(matrices)]
        if not hs:
            raise ShapeError("at least one Hamiltonian is required")
        m = hs[0].shape[0]
        if any(h.shape != (m, m) for h in hs):
            raise ShapeError("all Hamiltonians must share the same size")
        return cls("ConstantHermitian", m, len(hs), {"matrices": hs}, hs)

    @classmethod
    def polynomial_hermitian(cls, coefficients, tol=HERMITIAN_TOL):
        """``H_k(t) = sum_d coefficients[k][d] * t**d`` with Hermitian coefficients."""
        coeffs = []
        for k, ck in enumerate(coefficients):
            if len(ck) == 0:
                raise ShapeError(f"H_{k} has no coefficients")
            coeffs.append([hermitian_certificate(mat, tol, f"H_{k} coefficient {d}").matrix
                           for d, mat in enumerate(ck)])
        if not coeffs:
            raise ShapeError("at least one Hamiltonian is required")
        m = coeffs[0][0].shape[0]
        if any(mat.shape != (m, m) for ck in coeffs for mat in ck):
            raise ShapeError("all coefficient matrices must share the same size")
        return cls("PolynomialHermitian", m, len(coeffs), {"coefficients": coeffs},
                   None)

    def evaluate(self, t):
        """List of the r matrices ``H_k(t)``."""
        if self._constant is not None:
            return self._constant
        out = []
        for ck in self.payload["coefficients"]:
            # Horner in t; real t keeps each partial sum Hermitian
            acc = ck[-1]
            for mat in reversed(ck[:-1]):
                acc = acc * t + mat
            out.append(acc)
        return out

    def is_psd(self, t, tol=1e-12):
        return all(hermitian_spectrum(h)[0] >= -tol for h in self.evaluate(t))

    def check_compatible(self, triple):
        if self.m != triple.m:
            raise InvalidTripleError(
                "dimension", f"family has m={self.m} but Pi0 has {triple.m} columns"
            )
        if self.r != triple.r:
            raise InvalidTripleError(
                "dimension", f"family has r={self.r} Hamiltonians but {triple.r} points c_k"
            )


@dataclass(frozen=True, eq=False)
class EvolvedState:
    t: float
    Pi: np.ndarray
    S: np.ndarray
    s_condition: float
    identity_residual: float = float("nan")


def make_state(t, pi, s, a=None):
    s = 0.5 * (s + s.conj().T)
    cond = float(np.linalg.cond(s)) if s.size else 1.0
    if not np.isfinite(cond):
        cond = np.inf
    res = identity_residual(a, s, pi) if a is not None else float("nan")
    return EvolvedState(float(t), pi, s, cond, res)


@dataclass(frozen=True, eq=False)
class Trajectory:
    states: List[EvolvedState]
    step: float

    @property
    def times(self):
        return np.array([s.t for s in self.states])

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def max_identity_residual(self):
        return max(s.identity_residual for s in self.states)


def ode_rhs(t, pi, s, triple, family):
    """Right-hand sides ``(Pi'(t), S'(t))``.

    ``S'`` is assembled from the terms ``-R Pi H Pi^* R^*`` and is therefore
    Hermitian by construction.
    """
    rpi = triple.stacked_resolvents @ pi
    rpih = rpi @ np.asarray(family.evaluate(t))
    dpi = -1j * rpih.sum(axis=0)
    ds = -(rpih @ rpi.conj().transpose(0, 2, 1)).sum(axis=0)
    return dpi, ds


def evolve(triple, family, t_end, steps, identity_tol=IDENTITY_TOL, validate=True):
    """Integrate ``Pi`` and ``S`` from ``t = 0`` to ``t_end`` with classical RK4.

    Parameters
    ----------
    triple : GbdtTriple
    family : HamiltonianFamily
    t_end : float
        Final time; negative values integrate backward.
    steps : int
        Number of uniform steps.
    identity_tol : float
        Relative tolerance on the identity residual, scaled by
        ``1 + ||Pi(0)||_F**2``.

    Returns
    -------
    Trajectory
        ``steps + 1`` states including ``t = 0``.

    Raises
    ------
    IdentityDriftError
        If some state violates the identity beyond tolerance.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    if validate:
        validate_triple(triple)
    family.check_compatible(triple)
    h = float(t_end) / steps
    tol = identity_tol * triple.identity_scale()
    a = triple.A
    pi = triple.Pi0.copy()
    s = 0.5 * (triple.S0 + triple.S0.conj().T)
    states = [make_state(0.0, pi, s, a)]
    flagged = False
    for i in range(steps):
        t = i * h
        k1p, k1s = ode_rhs(t, pi, s, triple, family)
        k2p, k2s = ode_rhs(t + h / 2, pi + h / 2 * k1p, s + h / 2 * k1s, triple, family)
        k3p, k3s = ode_rhs(t + h / 2, pi + h / 2 * k2p, s + h / 2 * k2s, triple, family)
        k4p, k4s = ode_rhs(t + h, pi + h * k3p, s + h * k3s, triple, family)
        pi = pi + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        s = s + h / 6 * (k1s + 2 * k2s + 2 * k3s + k4s)
        s = 0.5 * (s + s.conj().T)
        state = make_state((i + 1) * h, pi, s, a)
        if state.identity_residual > tol:
            raise IdentityDriftError(state.t, state.identity_residual, tol)
        if state.s_condition > SINGULAR_COND and not flagged:
            # not fatal: invertibility of S only matters where S^{-1} is applied
            logger.warning("S(t) is near-singular at t=%g (cond %.3e)", state.t, state.s_condition)
            flagged = True
        states.append(state)
    return Trajectory(states, h)


class ClosedForm:
    """Explicit ``Pi(t)`` and ``S(t)`` built from matrix exponentials.

    Block ``j`` has a generator ``G_j``, ``E_j(t) = exp(t G_j)``, columns
    ``X_j`` and a Sylvester solution ``C_j``. ``Pi(t)`` is ``recombine`` applied
    to the blocks ``E_j(t) X_j`` and ``S(t) = sum_j E_j(t) C_j E_j(t)^*``.
    """

    def __init__(self, triple, family, generators, columns, sylvester, recombine):
        self.triple = triple
        self.family = family
        self._generators = generators
        self._columns = columns
        self._sylvester = sylvester
        self._recombine = recombine

    @property
    def sylvester_solutions(self):
        return list(self._sylvester)

    def __call__(self, t):
        return self.state(t)

    def state(self, t):
        exps = [expm(t * g) for g in self._generators]
        blocks = [e @ col for e, col in zip(exps, self._columns)]
        pi = self._recombine(blocks)
        s = sum(e @ c @ e.conj().T for e, c in zip(exps, self._sylvester))
        return make_state(t, pi, s, self.triple.A)

    def trajectory(self, t_end, steps):
        h = float(t_end) / steps
        return Trajectory([self.state(i * h) for i in range(steps + 1)], h)


def _check_points(a, c):
    c = _real_vector(c)
    if np.unique(c).size != c.size:
        raise InvalidTripleError("distinct", "the points c_k must be pairwise distinct")
    try:
        return c, [resolvent(a, ck) for ck in c]
    except SpectralGapError as exc:
        raise InvalidTripleError("spectrum", str(exc)) from exc


def closed_form_example1(A, theta1, theta2, c):
    """Closed form for constant Hamiltonians ``H_k = diag(I_m1, -I_m2)``.

    ``theta1`` (n x m1) and ``theta2`` (n x m2) are the column blocks of
    ``Pi(0)``; either may be ``None`` or have zero columns. ``S(0)`` is
    ``C_1 + C_2`` with ``A C_i - C_i A^* = i theta_i theta_i^*``.

    Returns
    -------
    (ClosedForm, GbdtTriple)
    """
    a = as_square(A, "A")
    n = a.shape[0]
    thetas = []
    for name, th in (("theta1", theta1), ("theta2", theta2)):
        th = np.zeros((n, 0), complex) if th is None else as_matrix(th, name)
        if th.shape[0] != n:
            raise ShapeError(f"{name} must have {n} rows")
        thetas.append(th)
    c, rs = _check_points(a, c)
    rsum = sum(rs)
    gens = [-1j * rsum, 1j * rsum]
    cs = [solve_sylvester(a, 1j * th @ th.conj().T) for th in thetas]
    pi0 = np.hstack(thetas)
    triple = GbdtTriple(a, cs[0] + cs[1], pi0, c)
    family = HamiltonianFamily.constant_signature(thetas[0].shape[1], thetas[1].shape[1], c.size)
    cf = ClosedForm(triple, family, gens, thetas, cs, np.hstack)
    return cf, triple


def closed_form_example2(A, Pi0, beta, c):
    """Closed form for rank-one Hamiltonians ``H_k = beta_k^* beta_k``.

    Requires ``r = m`` and orthonormal rows ``beta_k``. Column k of
    ``Pi(t) beta^*`` is ``exp(-i t R_k) Pi(0) beta_k^*`` and ``S(t)`` is the sum
    of ``exp(-i t R_k) C_k exp(-i t R_k)^*`` where
    ``A C_k - C_k A^* = i Pi(0) beta_k^* beta_k Pi(0)^*``.

    Returns
    -------
    (ClosedForm, GbdtTriple)
    """
    a = as_square(A, "A")
    pi0 = as_matrix(Pi0, "Pi0")
    family = HamiltonianFamily.ortho_projectors(beta)
    beta = family.payload["beta"]
    m = beta.shape[0]
    if pi0.shape != (a.shape[0], m):
        raise ShapeError(f"Pi0 must be {(a.shape[0], m)}, got {pi0.shape}")
    c, rs = _check_points(a, c)
    if c.size != m:
        raise InvalidTripleError("dimension", f"need r = m = {m} points c_k, got {c.size}")
    gens = [-1j * rk for rk in rs]
    cols = [pi0 @ beta[k].conj()[:, None] for k in range(m)]
    cs = [solve_sylvester(a, 1j * col @ col.conj().T) for col in cols]
    triple = GbdtTriple(a, sum(cs), pi0, c)

    def recombine(blocks):
        return np.hstack(blocks) @ beta

    cf = ClosedForm(triple, family, gens, cols, cs, recombine)
    return cf, triple
