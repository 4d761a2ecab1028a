"""Per-cell analog combiner design.

The network-wide estimation objective decouples so that each combiner can
be designed on its own receive correlation, independently of every pilot
matrix: each cell contributes a nonnegative weight

    w = tr(Q W* (W Q W*)^{-1} W Q)

that only depends on the row space of W. The unconstrained optimum packs
the top eigenvectors of Q into W (the fully digital solution); hardware
constrained combiners are obtained either by alternating minimization of
the gap to the fully digital solution (``magiq``) or by greedy dictionary
search (``grtm_combiner``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matlin
from .errors import DictionaryExhausted, Singular, SingularReducedGram
from .estimator import UNCONSTRAINED, UNIMODULAR

MAGIQ_THRESHOLD = 1e-6
MAGIQ_MAX_ITER = 200


def _reduced_solve(q, w_mat, rhs):
    g = matlin.hermitize(w_mat @ q @ w_mat.conj().T)
    try:
        return matlin.solve_hpd(g, rhs)
    except Singular as exc:
        raise SingularReducedGram(str(exc)) from exc


def weight(q, w_mat):
    """Per-cell combiner weight tr(Q W* (W Q W*)^{-1} W Q)."""
    q = matlin.as_cmatrix(q)
    w_mat = matlin.as_cmatrix(w_mat)
    wq = w_mat @ q
    num = matlin.hermitize(wq @ q @ w_mat.conj().T)
    x = _reduced_solve(q, w_mat, num)
    return float(np.trace(x).real)


def combiner_objective(q, w_mat):
    """tr(W Q^2 W* (W Q W*)^{-1}); identical to ``weight`` by cyclicity."""
    return weight(q, w_mat)


def fully_digital(q, rf_chains):
    """Rows of the optimal unconstrained combiner: top eigenvectors of Q."""
    eig = matlin.herm_eig(q)
    if rf_chains > eig.vectors.shape[1]:
        raise ValueError("rf_chains exceeds the matrix dimension")
    return eig.vectors[:, :rf_chains].conj().T.copy()


def project_feasible(a, feasible_set):
    """Euclidean projection onto the feasible combiner set.

    The unimodular projection keeps entry phases and sets moduli to one;
    zero entries map to 1 (phase-zero convention).
    """
    a = matlin.as_cmatrix(a)
    if feasible_set == UNCONSTRAINED:
        return a.copy()
    if feasible_set == UNIMODULAR:
        out = np.exp(1j * np.angle(a))
        out[a == 0] = 1.0
        return out
    raise ValueError(f"unknown feasible set {feasible_set!r}")


@dataclass(eq=False)
class MagiqState:
    """Final state and gap trace of the alternating quantization loop."""

    T: np.ndarray
    W: np.ndarray
    gap: float
    iterations: int
    gap_trace: list = field(default_factory=list)
    converged: bool = True


def magiq(u_star, feasible_set, threshold=MAGIQ_THRESHOLD, max_iter=MAGIQ_MAX_ITER):
    """Minimal-gap iterative quantization of a fully digital combiner.

    Alternates the feasible projection W <- P(T u_star) with the unitary
    alignment T <- Vbar Ubar* (from the SVD of u_star W*) until the squared
    gap ||T u_star - W||_F^2 drops below ``threshold`` or ``max_iter``
    iterations elapse. Starts from T = I, W = 0.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    u_star = matlin.as_cmatrix(u_star)
    r = u_star.shape[0]
    t_mat = np.eye(r, dtype=np.complex128)
    w_mat = np.zeros_like(u_star)
    gap = float(np.linalg.norm(t_mat @ u_star - w_mat) ** 2)
    trace = []  # per-iteration gaps; the infeasible W = 0 start is not an iterate
    iterations = 0
    while gap >= threshold and iterations < max_iter:
        w_mat = project_feasible(t_mat @ u_star, feasible_set)
        ub, _, vh = np.linalg.svd(u_star @ w_mat.conj().T)
        t_mat = vh.conj().T @ ub.conj().T
        gap = float(np.linalg.norm(t_mat @ u_star - w_mat) ** 2)
        iterations += 1
        trace.append(gap)
    state = MagiqState(
        T=t_mat,
        W=w_mat,
        gap=gap,
        iterations=iterations,
        gap_trace=trace,
        converged=gap < threshold,
    )
    return w_mat, state


def unimodular_dictionary(n_antennas, size, rng):
    """Random unit-modulus rows with i.i.d. uniform phases, shape (size, n)."""
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(size, n_antennas))
    return np.exp(1j * phases)


def grtm_combiner(q, rf_chains, dictionary):
    """Greedy dictionary combiner: add the row that maximizes the weight.

    Each step scores every candidate row by the exact weight increase it
    would produce (a generalized Rayleigh quotient against the part of Q
    not yet captured by the selected rows), which makes the scan a pair of
    matrix products. Rows that would leave W Q W* singular contribute no
    new direction and are skipped; if no row can extend the stack the
    search stops with DictionaryExhausted.
    """
    q = matlin.as_cmatrix(q)
    dictionary = np.asarray(dictionary, dtype=np.complex128)
    if dictionary.ndim != 2 or dictionary.shape[1] != q.shape[0]:
        raise ValueError("dictionary rows must match the matrix dimension")
    if dictionary.shape[0] < rf_chains:
        raise ValueError("dictionary smaller than the requested number of rows")
    n = q.shape[0]
    root = matlin.psd_sqrt(q)
    proj = np.zeros((n, n), dtype=np.complex128)  # onto range(Q^{1/2} W*)
    row_norm2 = np.sum(np.abs(dictionary) ** 2, axis=1).real
    used = np.zeros(dictionary.shape[0], dtype=bool)
    chosen = []
    for _ in range(rf_chains):
        resid = np.eye(n) - proj
        m_den = matlin.hermitize(root @ resid @ root)
        m_num = matlin.hermitize(root @ resid @ q @ resid @ root)
        den = np.einsum("ij,jk,ik->i", dictionary, m_den, dictionary.conj()).real
        num = np.einsum("ij,jk,ik->i", dictionary, m_num, dictionary.conj()).real
        scale = float(np.linalg.eigvalsh(m_den)[-1])
        feasible = (~used) & (den > 1e-10 * scale * row_norm2)
        if not feasible.any():
            raise DictionaryExhausted("no dictionary row extends the combiner")
        scores = np.where(feasible, num / np.where(feasible, den, 1.0), -np.inf)
        idx = int(np.argmax(scores))
        used[idx] = True
        chosen.append(dictionary[idx])
        grown = resid @ root @ dictionary[idx].conj()
        grown /= np.linalg.norm(grown)
        proj = matlin.hermitize(proj + np.outer(grown, grown.conj()))
    return np.vstack(chosen)
