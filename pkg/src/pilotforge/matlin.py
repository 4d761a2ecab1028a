"""Dense complex linear-algebra primitives used by every other module.

All operations work on 2-D complex128 arrays. Numerical tolerances are
expressed relative to the Frobenius norm of the input, so the checks are
scale free. Eigenvalue ties are broken by the stable order of the
underlying decomposition, then lexicographically by eigenvector entry
phases, which makes degenerate spectra deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NotHermitian, NotPSD, Singular

HERMITIAN_RTOL = 1e-10
PSD_RTOL = 1e-10
PINV_RTOL = 1e-12
MAX_CONDITION = 1e14


def as_cmatrix(a):
    """Coerce ``a`` to a finite 2-D complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise ValueError("matrix entries must be finite")
    return m


def frob(a):
    return float(np.linalg.norm(a))


def hermitize(a):
    """Nearest Hermitian matrix, (a + a*) / 2."""
    return (a + a.conj().T) / 2.0


def is_hermitian(a, rtol=HERMITIAN_RTOL):
    scale = frob(a)
    return frob(a - a.conj().T) <= rtol * scale


def kron(a, b):
    """Kronecker product; block (i, j) of the result equals a[i, j] * b."""
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def vec(a):
    """Column-stacking vectorization: (rows*cols) x 1 column vector."""
    a = as_cmatrix(a)
    return a.reshape(-1, 1, order="F")


def blkdiag(blocks):
    """Block-diagonal assembly of a sequence of matrices."""
    mats = [as_cmatrix(b) for b in blocks]
    if not mats:
        raise ValueError("blkdiag needs at least one block")
    return sla.block_diag(*mats).astype(np.complex128)


@dataclass(frozen=True)
class HermEig:
    """Eigendecomposition of a Hermitian matrix.

    values is sorted descending; vectors[:, k] is the unit eigenvector for
    values[k], and the columns form a unitary matrix.
    """

    values: np.ndarray
    vectors: np.ndarray


def _phase_tiebreak(values, vectors):
    """Reorder exactly tied eigenpairs by the entry phases of their vectors."""
    n = values.size
    i = 0
    while i < n:
        j = i + 1
        while j < n and values[j] == values[i]:
            j += 1
        if j - i > 1:
            block = vectors[:, i:j]
            order = np.lexsort(np.angle(block)[::-1])
            vectors[:, i:j] = block[:, order]
        i = j
    return values, vectors


def herm_eig(a, rtol=HERMITIAN_RTOL):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Raises NotHermitian when the symmetry defect exceeds rtol * ||a||_F.
    """
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise NotHermitian(f"matrix is not square: {a.shape}")
    if not is_hermitian(a, rtol):
        raise NotHermitian("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(hermitize(a))
    w, v = w[::-1].copy(), v[:, ::-1].copy()
    w, v = _phase_tiebreak(w, v)
    return HermEig(values=w, vectors=v)


def psd_sqrt(a, rtol=PSD_RTOL):
    """Hermitian PSD square root B with B @ B == a.

    Eigenvalues within -rtol * ||a||_F of zero are clamped to zero; anything
    more negative raises NotPSD.
    """
    eig = herm_eig(a)
    floor = -rtol * max(frob(a), 1.0e-300)
    if eig.values.min(initial=0.0) < floor:
        raise NotPSD(f"most negative eigenvalue {eig.values.min():.3e} below tolerance")
    lam = np.clip(eig.values, 0.0, None)
    root = (eig.vectors * np.sqrt(lam)) @ eig.vectors.conj().T
    return hermitize(root)


def range_projector(a, rtol=PINV_RTOL):
    """Orthogonal projector onto the column space of ``a``.

    Equals a (a* a)^+ a* with pseudo-inverse cutoff rtol * sigma_max; the
    zero matrix maps to the zero projector.
    """
    a = as_cmatrix(a)
    n = a.shape[0]
    if a.size == 0:
        return np.zeros((n, n), dtype=np.complex128)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((n, n), dtype=np.complex128)
    rank = int(np.sum(s > rtol * s[0]))
    ur = u[:, :rank]
    return hermitize(ur @ ur.conj().T)


def solve_hpd(a, b, max_condition=MAX_CONDITION):
    """Solve a @ x = b for Hermitian positive definite ``a``.

    Raises Singular when the spectral condition number estimate exceeds
    max_condition (or the matrix is not positive definite), and
    NotHermitian when ``a`` fails the symmetry check.
    """
    a = as_cmatrix(a)
    if a.shape[0] != a.shape[1]:
        raise NotHermitian(f"matrix is not square: {a.shape}")
    if not is_hermitian(a):
        raise NotHermitian("matrix is not Hermitian within tolerance")
    ah = hermitize(a)
    w = np.linalg.eigvalsh(ah)
    if w[0] <= 0.0 or w[-1] / w[0] > max_condition:
        raise Singular(
            f"condition estimate {w[-1] / max(w[0], 1e-300):.3e} exceeds {max_condition:.1e}"
        )
    b_arr = np.asarray(b, dtype=np.complex128)
    try:
        factor = sla.cho_factor(ah, lower=True, check_finite=False)
    except sla.LinAlgError as exc:  # pragma: no cover - guarded by eigvalsh above
        raise Singular("Cholesky factorization failed") from exc
    return sla.cho_solve(factor, b_arr, check_finite=False)
