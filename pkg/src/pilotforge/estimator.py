"""Interference-limited received signal synthesis and MMSE channel estimation.

The model is noise free: the only impairment is inter-cell interference
from pilot reuse. Each BS i observes, over pilot_len symbol times,

    Y_i = W_i H_ii S_i^T + W_i sum_{j != i} H_ij S_j^T

and forms the linear MMSE estimate of its own vectorized channel from
vec(Y_i). The estimation error has a closed form; both the estimate and
the error are evaluated here, with an optional diagonal ridge on the Gram
matrix so that degenerate baseline pilots (for instance full reuse with
more pilot symbols than users per cell) remain evaluable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matlin
from .channel import sample_channel_batch
from .errors import DimMismatch, Singular, SingularGram

UNCONSTRAINED = "unconstrained"
UNIMODULAR = "unimodular"

RIDGE_SCALE = 1e-10


@dataclass(eq=False)
class PilotSet:
    """Per-cell pilot matrices S_i (pilot_len x users)."""

    per_cell: list

    def __post_init__(self):
        self.per_cell = [matlin.as_cmatrix(s) for s in self.per_cell]
        shape = self.per_cell[0].shape
        if any(s.shape != shape for s in self.per_cell):
            raise DimMismatch("all per-cell pilot matrices must share one shape")

    @classmethod
    def from_stacked(cls, stacked, users):
        s = matlin.as_cmatrix(stacked)
        if s.shape[1] % users:
            raise DimMismatch("stacked pilot width must be a multiple of users")
        m = s.shape[1] // users
        return cls(per_cell=[s[:, i * users : (i + 1) * users].copy() for i in range(m)])

    @property
    def n_cells(self):
        return len(self.per_cell)

    @property
    def pilot_len(self):
        return self.per_cell[0].shape[0]

    @property
    def users(self):
        return self.per_cell[0].shape[1]

    @property
    def stacked(self):
        """The pilot_len x (cells * users) matrix [S_1, ..., S_M]."""
        return np.hstack(self.per_cell)

    def column_powers(self):
        return np.sum(np.abs(self.stacked) ** 2, axis=0)


def power_feasible(pilots: PilotSet, power, tol=1e-9):
    """True when every per-user pilot energy stays within the budget."""
    return bool(np.all(pilots.column_powers() <= power + tol))


@dataclass(eq=False)
class CombinerSet:
    """Per-cell analog combiners W_i (rf_chains x bs_antennas)."""

    per_cell: list
    feasible_set: str = UNCONSTRAINED

    def __post_init__(self):
        self.per_cell = [matlin.as_cmatrix(w) for w in self.per_cell]
        shape = self.per_cell[0].shape
        if any(w.shape != shape for w in self.per_cell):
            raise DimMismatch("all per-cell combiners must share one shape")
        if self.feasible_set not in (UNCONSTRAINED, UNIMODULAR):
            raise ValueError(f"unknown feasible set {self.feasible_set!r}")
        if self.feasible_set == UNIMODULAR:
            mods = np.abs(np.stack(self.per_cell))
            if np.max(np.abs(mods - 1.0)) > 1e-9:
                raise ValueError("unimodular combiner has an entry with modulus != 1")

    @property
    def n_cells(self):
        return len(self.per_cell)

    @property
    def rf_chains(self):
        return self.per_cell[0].shape[0]

    @property
    def bs_antennas(self):
        return self.per_cell[0].shape[1]


@dataclass(eq=False)
class EstimationReport:
    """Analytic and single-realization estimation quality for one block."""

    h_hat: list  # per-cell estimated channel vectors
    eps: np.ndarray  # per-cell analytic MSE
    eps_sum: float
    nmse_empirical: float
    ridged: bool = False


def _check_dims(pilots: PilotSet, combiners: CombinerSet, profile):
    if pilots.n_cells != profile.n_cells or combiners.n_cells != profile.n_cells:
        raise DimMismatch("pilots, combiners and profile disagree on the cell count")
    if pilots.users != profile.n_users:
        raise DimMismatch("pilot width does not match users per cell")
    if combiners.bs_antennas != profile.n_antennas:
        raise DimMismatch("combiner width does not match BS antenna count")


def receive(real, pilots: PilotSet, combiners: CombinerSet):
    """Per-cell received blocks Y_i = W_i sum_j H_ij S_j^T (rf_chains x pilot_len)."""
    m = real.H.shape[0]
    if pilots.n_cells != m or combiners.n_cells != m:
        raise DimMismatch("pilots/combiners do not match the channel realization")
    if real.H.shape[3] != pilots.users:
        raise DimMismatch("channel user count does not match pilots")
    if real.H.shape[2] != combiners.bs_antennas:
        raise DimMismatch("channel antenna count does not match combiners")
    out = []
    for i in range(m):
        acc = sum(real.H[i, j] @ pilots.per_cell[j].T for j in range(m))
        out.append(combiners.per_cell[i] @ acc)
    return out


def _gram(pilots: PilotSet, combiners: CombinerSet, profile, i, ridge=0.0):
    """Gram matrix of vec(Y_i): kron of pilot-side and combiner-side factors."""
    m = profile.n_cells
    w = combiners.per_cell[i]
    d = sum(
        pilots.per_cell[j] @ profile.tx_corr(i, j) @ pilots.per_cell[j].conj().T
        for j in range(m)
    )
    rq = w @ profile.rx_corr(i) @ w.conj().T
    g = matlin.hermitize(np.kron(d, rq))
    if ridge:
        g = g + (ridge * np.trace(g).real / g.shape[0]) * np.eye(g.shape[0])
    return g


def _cross(pilots: PilotSet, combiners: CombinerSet, profile, i):
    """Cross-covariance factor between the desired channel and vec(Y_i)."""
    w = combiners.per_cell[i]
    p_ii = profile.tx_corr(i, i)
    q_ii = profile.rx_corr(i)
    return np.kron(p_ii @ pilots.per_cell[i].conj().T, q_ii @ w.conj().T)


def _solve_gram(g, rhs):
    try:
        return matlin.solve_hpd(g, rhs)
    except Singular as exc:
        raise SingularGram(str(exc)) from exc


class MmseEstimator:
    """Per-cell linear MMSE filters for fixed pilots, combiners and statistics.

    Construction factors each Gram matrix once; applying the estimator to
    one realization or a batch is then a couple of matrix products. With no
    ridge the Gram is a Kronecker product of a pilot-side and a
    combiner-side factor, so the filter is assembled from two small solves
    (same inverse, same condition bound as the explicit form).
    """

    def __init__(self, pilots: PilotSet, combiners: CombinerSet, profile, ridge=0.0):
        _check_dims(pilots, combiners, profile)
        m = profile.n_cells
        self.n_cells = m
        self.ridge = ridge
        self._pilots = pilots
        self._combiners = combiners
        self._filters = []  # F_i = B_i G_i^{-1}
        eps = np.empty(m)
        for i in range(m):
            if ridge:
                g = _gram(pilots, combiners, profile, i, ridge=ridge)
                b = _cross(pilots, combiners, profile, i)
                z = _solve_gram(g, b.conj().T)
                captured = np.einsum("ab,ba->", b, z).real
                f_i = z.conj().T
            else:
                f_i, captured = self._factored_filter(pilots, combiners, profile, i)
            tr_a = np.trace(profile.tx_corr(i, i)).real * np.trace(profile.rx_corr(i)).real
            eps[i] = max(0.0, tr_a - captured)
            self._filters.append(f_i)
        self.eps = eps
        self.eps_sum = float(eps.sum())

    @staticmethod
    def _factored_filter(pilots, combiners, profile, i):
        w = combiners.per_cell[i]
        d = matlin.hermitize(
            sum(
                pilots.per_cell[j] @ profile.tx_corr(i, j) @ pilots.per_cell[j].conj().T
                for j in range(profile.n_cells)
            )
        )
        r = matlin.hermitize(w @ profile.rx_corr(i) @ w.conj().T)
        wd = np.linalg.eigvalsh(d)
        wr = np.linalg.eigvalsh(r)
        if wd[0] <= 0.0 or wr[0] <= 0.0 or (wd[-1] / wd[0]) * (wr[-1] / wr[0]) > matlin.MAX_CONDITION:
            raise SingularGram("received-signal Gram matrix is too ill-conditioned")
        sp = pilots.per_cell[i] @ profile.tx_corr(i, i)  # S_i P_ii, tau x K
        wq = w @ profile.rx_corr(i)  # W Q, r x N
        left = _solve_gram(d, sp).conj().T  # P S* D^{-1}, K x tau
        right = _solve_gram(r, wq).conj().T  # Q W* R^{-1}, N x r
        captured = np.trace(left @ sp).real * np.trace(right @ wq).real
        return np.kron(left, right), captured

    def estimate(self, y_i, i):
        """MMSE channel estimate from the vectorized observation of cell i."""
        return self._filters[i] @ np.asarray(y_i, dtype=np.complex128).ravel()

    def _observations(self, h_raw, i):
        """Vectorized noise-free observations of cell i for raw draws (T, M, M, N, K)."""
        w = self._combiners.per_cell[i]
        blocks = sum(
            w @ h_raw[:, i, j] @ self._pilots.per_cell[j].T for j in range(self.n_cells)
        )  # (T, r, tau)
        t = h_raw.shape[0]
        return blocks.swapaxes(-1, -2).reshape(t, -1)  # column-stacked per draw

    def batch_estimates(self, h_raw):
        """Per-cell channel estimates for a batch of raw draws, (T, M, N*K)."""
        t = h_raw.shape[0]
        out = np.empty((t, self.n_cells, self._filters[0].shape[0]), dtype=np.complex128)
        for i in range(self.n_cells):
            out[:, i] = self._observations(h_raw, i) @ self._filters[i].T
        return out

    def batch_errors(self, h_raw):
        """Squared errors and channel energies per draw and cell.

        h_raw has shape (trials, M, M, N, K); returns (err2, norm2), each
        (trials, M).
        """
        t, m = h_raw.shape[0], self.n_cells
        err2 = np.empty((t, m))
        norm2 = np.empty((t, m))
        for i in range(m):
            h_ii = h_raw[:, i, i].swapaxes(-1, -2).reshape(t, -1)
            h_hat = self._observations(h_raw, i) @ self._filters[i].T
            err2[:, i] = np.sum(np.abs(h_ii - h_hat) ** 2, axis=1)
            norm2[:, i] = np.sum(np.abs(h_ii) ** 2, axis=1)
        return err2, norm2


def mmse_estimate(y_i, pilots: PilotSet, combiners: CombinerSet, profile, i, ridge=0.0):
    """MMSE estimate of the desired channel of cell i from Y_i (or vec(Y_i))."""
    _check_dims(pilots, combiners, profile)
    g = _gram(pilots, combiners, profile, i, ridge=ridge)
    b = _cross(pilots, combiners, profile, i)
    y = np.asarray(y_i, dtype=np.complex128)
    y_vec = y.ravel(order="F") if y.ndim == 2 else y.ravel()
    return b @ _solve_gram(g, y_vec)


def analytic_mse(pilots: PilotSet, combiners: CombinerSet, profile, i, ridge=0.0):
    """Closed-form estimation error of cell i for the given design."""
    _check_dims(pilots, combiners, profile)
    g = _gram(pilots, combiners, profile, i, ridge=ridge)
    b = _cross(pilots, combiners, profile, i)
    z = _solve_gram(g, b.conj().T)
    tr_a = np.trace(profile.tx_corr(i, i)).real * np.trace(profile.rx_corr(i)).real
    return float(max(0.0, tr_a - np.einsum("ab,ba->", b, z).real))


def sum_mse(pilots: PilotSet, combiners: CombinerSet, profile, ridge=0.0):
    """Network-wide estimation error, summed over cells."""
    return float(
        sum(analytic_mse(pilots, combiners, profile, i, ridge=ridge) for i in range(profile.n_cells))
    )


def estimate_all(real, pilots: PilotSet, combiners: CombinerSet, profile, ridge=0.0):
    """Estimate every cell's channel for one realization and report quality."""
    est = MmseEstimator(pilots, combiners, profile, ridge=ridge)
    err2, norm2 = est.batch_errors(real.H[None])
    ys = receive(real, pilots, combiners)
    h_hat = [est.estimate(np.asarray(y).ravel(order="F"), i) for i, y in enumerate(ys)]
    return EstimationReport(
        h_hat=h_hat,
        eps=est.eps,
        eps_sum=est.eps_sum,
        nmse_empirical=float(np.mean(err2[0] / norm2[0])),
        ridged=bool(ridge),
    )


def empirical_errors(profile, cfg, pilots, combiners, rng, trials, ridge=0.0):
    """Monte-Carlo squared errors over fresh channel draws for a fixed design.

    Returns (err2, norm2), each (trials, M): per-trial squared estimation
    error and channel energy per cell.
    """
    est = MmseEstimator(pilots, combiners, profile, ridge=ridge)
    return est.batch_errors(sample_channel_batch(profile, cfg, rng, trials))
