"""Dense complex matrix kernels.

Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.
Everything here is a pure function of its inputs.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NotHermitianError, ShapeError, SpectralGapError

__all__ = [
    "GAP_THRESHOLD",
    "HERMITIAN_TOL",
    "HermitianCertificate",
    "as_matrix",
    "as_square",
    "expm",
    "hermitian_certificate",
    "hermitian_spectrum",
    "resolvent",
    "solve_sylvester",
    "spectrum",
    "sylvester_gap",
]

GAP_THRESHOLD = 1e-8
HERMITIAN_TOL = 1e-10


def as_matrix(x, name="matrix"):
    """Coerce ``x`` to a finite 2-D complex array."""
    m = np.asarray(x, dtype=complex)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ShapeError(f"{name} has non-finite entries")
    return m


def as_square(x, name="matrix"):
    m = as_matrix(x, name)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class HermitianCertificate:
    """A matrix accepted as Hermitian.

    ``matrix`` holds the Hermitian part ``(M + M^*)/2`` and ``asymmetry`` the
    Frobenius norm of ``M - M^*`` measured before symmetrization.
    """

    matrix: np.ndarray
    asymmetry: float


def hermitian_certificate(m, tol=HERMITIAN_TOL, name="matrix"):
    m = as_square(m, name)
    asym = float(np.linalg.norm(m - m.conj().T))
    if asym > tol:
        raise NotHermitianError(
            f"{name} is not Hermitian: ||M - M*||_F = {asym:.3e} > {tol:.1e}", asym
        )
    return HermitianCertificate(0.5 * (m + m.conj().T), asym)


# Pade approximant coefficients and 1-norm thresholds for degrees 3..13
# (Higham, SIAM J. Matrix Anal. Appl. 26 (2005)).
_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
         16380.0, 182.0, 1.0),
}
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_uv(a, degree):
    """Odd part ``U`` and even part ``V`` of the degree-``degree`` Pade numerator."""
    b = _PADE_COEFFS[degree]
    ident = np.eye(a.shape[0], dtype=a.dtype)
    a2 = a @ a
    if degree < 13:
        powers = [ident, a2]
        for _ in range(2, (degree + 1) // 2):
            powers.append(powers[-1] @ a2)
        u = sum(b[2 * j + 1] * powers[j] for j in range(len(powers)))
        v = sum(b[2 * j] * powers[j] for j in range(len(powers)))
        return a @ u, v
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    return u, v


def expm(m):
    """Matrix exponential by scaling and squaring with a diagonal Pade approximant.

    The degree (3, 5, 7, 9 or 13) and the number of squarings ``s`` are
    chosen from the 1-norm so that the backward error of ``r(M / 2**s)``
    stays below unit roundoff.

    Parameters
    ----------
    m : (n, n) array_like
        Square, finite matrix.

    Returns
    -------
    (n, n) complex ndarray
    """
    a = as_square(m, "expm argument")
    if a.shape[0] == 0:
        return a.copy()
    norm1 = np.linalg.norm(a, 1)
    for degree in (3, 5, 7, 9):
        if norm1 <= _THETA[degree]:
            u, v = _pade_uv(a, degree)
            return np.linalg.solve(v - u, v + u)
    s = max(0, int(np.ceil(np.log2(norm1 / _THETA[13]))))
    a = a / 2.0**s
    u, v = _pade_uv(a, 13)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def sylvester_gap(a):
    """Smallest distance between an eigenvalue of ``a`` and one of ``a^*``."""
    lam = np.linalg.eigvals(as_square(a, "A"))
    if lam.size == 0:
        return np.inf
    return float(np.min(np.abs(lam[:, None] - lam.conj()[None, :])))


def solve_sylvester(a, q, gap=GAP_THRESHOLD):
    """Solve ``A C - C A^* = Q`` for ``C`` by Kronecker vectorization.

    The solution is unique iff the spectra of ``A`` and ``A^*`` are disjoint;
    this is checked against ``gap`` before solving. The dense
    ``n**2 x n**2`` system costs O(n**6), which is fine for n up to about 20.

    Parameters
    ----------
    a, q : (n, n) array_like
    gap : float
        Minimum admissible distance between ``sigma(A)`` and ``sigma(A^*)``.

    Raises
    ------
    SpectralGapError
        If ``sigma(A)`` and ``sigma(A^*)`` are closer than ``gap``.
    """
    a = as_square(a, "A")
    q = as_square(q, "Q")
    if a.shape != q.shape:
        raise ShapeError(f"A{a.shape} and Q{q.shape} must have the same shape")
    n = a.shape[0]
    d = sylvester_gap(a)
    if d <= gap:
        raise SpectralGapError(
            f"sigma(A) and sigma(A*) are {d:.3e} apart (threshold {gap:.1e}); "
            "the solution is not unique",
            d,
        )
    ident = np.eye(n)
    # column-major vec: vec(A C) = (I kron A) vec C, vec(C A^*) = (conj(A) kron I) vec C
    k = np.kron(ident, a) - np.kron(a.conj(), ident)
    c = np.linalg.solve(k, q.reshape(-1, order="F"))
    return c.reshape((n, n), order="F")


def spectrum(m):
    """Eigenvalues sorted lexicographically by (real part, imaginary part)."""
    lam = np.linalg.eigvals(as_square(m))
    return lam[np.lexsort((lam.imag, lam.real))]


def hermitian_spectrum(m):
    """Ascending real eigenvalues of the Hermitian part of ``m``."""
    m = as_square(m)
    return np.linalg.eigvalsh(0.5 * (m + m.conj().T))


def resolvent(a, c, gap=GAP_THRESHOLD):
    """``(A - c I)^{-1}``, refusing points within ``gap`` of ``sigma(A)``."""
    a = as_square(a, "A")
    n = a.shape[0]
    lam = np.linalg.eigvals(a)
    if lam.size:
        d = float(np.min(np.abs(lam - c)))
        if d <= gap:
            raise SpectralGapError(
                f"c={c} lies {d:.3e} from sigma(A) (threshold {gap:.1e})", d
            )
    return np.linalg.solve(a - c * np.eye(n), np.eye(n, dtype=complex))
