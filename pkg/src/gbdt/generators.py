"""Seeded builders for valid triples and Hamiltonian families.

Random matrices ``A = X + i s Y`` with ``X`` Hermitian and ``Y`` positive
definite have their spectrum in the open upper (``s = +1``) or lower
(``s = -1``) half-plane, so ``sigma(A)`` and ``sigma(A^*)`` are disjoint and
every real point is admissible as ``c_k``.
"""
import numpy as np

from .engine import GbdtTriple, HamiltonianFamily
from .matrix_core import solve_sylvester

__all__ = [
    "half_plane_matrix",
    "random_complex",
    "random_family",
    "random_hermitian",
    "random_points",
    "random_sylvester_triple",
    "random_triple",
    "scalar_desk",
    "stationary_zero",
]


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_hermitian(rng, m, scale=1.0):
    g = random_complex(rng, m, m)
    return scale * 0.5 * (g + g.conj().T)


def half_plane_matrix(rng, n, side=1, min_imag=0.5, scale=1.0):
    """Random non-normal n x n matrix with ``side * Im(lambda) >= min_imag``."""
    x = random_hermitian(rng, n, 0.5 * scale)
    b = random_complex(rng, n, n) * (0.3 * scale / np.sqrt(n))
    y = b @ b.conj().T + min_imag * np.eye(n)
    return x + 1j * side * y


def random_points(rng, r, spread=1.0):
    """r distinct reals, at least ``spread / (2r)`` apart."""
    base = np.linspace(-spread, spread, r) if r > 1 else np.zeros(1)
    jitter = rng.uniform(-0.25, 0.25, r) * (2 * spread / max(r, 1)) * 0.5
    return base + jitter


def random_triple(rng, n, m, r, definite=1, pi_scale=0.5, min_distance=0.75):
    """Valid triple built from a prescribed Hermitian ``S(0)``.

    ``S0`` has eigenvalues of modulus in [0.5, 2] and sign ``definite``
    (+1, -1, or 0 for random signs); then ``A = (i Pi0 Pi0^*/2 + K) S0^{-1}``
    with K Hermitian satisfies the identity exactly. The points ``c_k`` are
    drawn from a grid on the real line, keeping ``min_distance`` from
    ``sigma(A)``.
    """
    q, _ = np.linalg.qr(random_complex(rng, n, n))
    mags = rng.uniform(0.5, 2.0, n)
    signs = rng.choice([-1.0, 1.0], n) if definite == 0 else np.full(n, float(definite))
    s0 = (q * (signs * mags)) @ q.conj().T
    s0 = 0.5 * (s0 + s0.conj().T)
    pi0 = pi_scale * random_complex(rng, n, m)
    k = random_hermitian(rng, n, 0.5)
    a = np.linalg.solve(s0, (0.5j * pi0 @ pi0.conj().T + k).conj().T).conj().T
    lam = np.linalg.eigvals(a)
    reach = 4.0
    while True:
        cand = np.linspace(-reach, reach, int(40 * reach) + 1)
        ok = cand[np.min(np.abs(lam[:, None] - cand[None, :]), axis=0) >= min_distance]
        if ok.size >= r:
            return GbdtTriple(a, s0, pi0, np.sort(rng.choice(ok, r, replace=False)))
        reach *= 2


def random_sylvester_triple(rng, n, m, r, side=1, pi_scale=0.5):
    """Valid triple with ``S(0)`` solving ``A S0 - S0 A^* = i Pi0 Pi0^*``.

    ``sigma(A)`` lies in the upper (``side = 1``) or lower half-plane, so
    ``S0`` is positive or negative definite for controllable ``(A, Pi0)``.
    """
    a = half_plane_matrix(rng, n, side)
    pi0 = pi_scale * random_complex(rng, n, m)
    s0 = solve_sylvester(a, 1j * pi0 @ pi0.conj().T)
    s0 = 0.5 * (s0 + s0.conj().T)
    return GbdtTriple(a, s0, pi0, random_points(rng, r))


def random_family(rng, kind, m, r, degree=2, scale=0.5, psd=False):
    """Random family of the given kind; ``psd`` forces ``H_k(t) >= 0``."""
    if kind == "ConstantHermitian":
        if psd:
            mats = []
            for _ in range(r):
                g = random_complex(rng, m, m) * scale
                mats.append(g @ g.conj().T / m)
        else:
            mats = [random_hermitian(rng, m, scale) for _ in range(r)]
        return HamiltonianFamily.constant_hermitian(mats)
    if kind == "PolynomialHermitian":
        coeffs = [[random_hermitian(rng, m, scale / (d + 1)) for d in range(degree + 1)]
                  for _ in range(r)]
        return HamiltonianFamily.polynomial_hermitian(coeffs)
    if kind == "OrthoProjectors":
        q, _ = np.linalg.qr(random_complex(rng, m, m))
        return HamiltonianFamily.ortho_projectors(q.conj().T)
    if kind == "ConstantSignature":
        m1 = int(rng.integers(0, m + 1))
        return HamiltonianFamily.constant_signature(m1, m - m1, r)
    raise ValueError(f"unknown family kind {kind!r}")


def scalar_desk():
    """``A = i, S0 = 1/2, Pi0 = 1, c = [0], H = 1``.

    Closed forms: ``Pi = e^{-t}``, ``S = e^{-2t}/2``, ``w_A(t, 0) = -1``,
    ``psi~ = 2 e^{t + zeta}``.
    """
    triple = GbdtTriple([[1j]], [[0.5]], [[1.0]], [0.0])
    family = HamiltonianFamily.constant_hermitian([[[1.0]]])
    return triple, family


def stationary_zero(n=2, m=1, r=1):
    """``A = S0 = I``, ``Pi0 = 0``: the zero eigenfunction, ``S(t) = I``."""
    c = np.arange(r, dtype=float) * 0.5 + 2.0
    triple = GbdtTriple(np.eye(n), np.eye(n), np.zeros((n, m)), c)
    family = HamiltonianFamily.constant_hermitian([np.eye(m)] * r)
    return triple, family
