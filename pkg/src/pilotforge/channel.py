"""Correlation profiles for the three channel models and channel sampling.

Three profile variants are supported:

* ``FullySeparable``: receive correlations Q_i depend only on the receiving
  base station, transmit correlations P_j only on the transmitting cell.
* ``PartiallySeparable``: receive side separable (Q_i), transmit side P_ij
  depends on both link ends.
* ``MuMimo``: the classical multi-cell fading model, a partially separable
  special case with identity receive correlation and diagonal transmit
  factors built from per-link decay coefficients beta[i, k, j] (user k of
  cell j as seen by base station i).

Channel matrices are drawn as H_ij = Q_i^(1/2) Hbar P_ij^(1/2) with Hbar
i.i.d. CN(0, 1); the CN(0, 1) convention splits unit variance evenly
between real and imaginary parts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import matlin
from .errors import DimMismatch

PSD_RTOL = 1e-10
MIN_DISTANCE_FRACTION = 0.05
JITTER_CONDITION = 1e12


def complex_normal(rng, shape):
    """I.i.d. CN(0, 1) samples, variance split evenly between re/im parts."""
    return np.sqrt(0.5) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class NetworkConfig:
    """Static network dimensions and the per-user pilot power budget."""

    cells: int
    users: int
    bs_antennas: int
    rf_chains: int
    pilot_len: int
    power: float = 1.0

    def __post_init__(self):
        if min(self.cells, self.users, self.bs_antennas, self.rf_chains, self.pilot_len) < 1:
            raise ValueError("all dimensions must be at least 1")
        if self.rf_chains > self.bs_antennas:
            raise ValueError("rf_chains must not exceed bs_antennas")
        total = self.cells * self.users
        if self.pilot_len > total:
            raise ValueError(f"pilot_len={self.pilot_len} exceeds total user count {total}")
        if self.pilot_len == total:
            warnings.warn(
                "pilot_len equals the total user count; the training model assumes "
                "fewer pilot symbols than users",
                stacklevel=2,
            )
        if not self.power > 0:
            raise ValueError("power must be positive")


def _check_corr(mat, dim, label):
    m = matlin.as_cmatrix(mat)
    if m.shape != (dim, dim):
        raise DimMismatch(f"{label} must be {dim}x{dim}, got {m.shape}")
    if not matlin.is_hermitian(m):
        raise ValueError(f"{label} is not Hermitian")
    w = np.linalg.eigvalsh(matlin.hermitize(m))
    if w[0] < -PSD_RTOL * max(matlin.frob(m), 1e-300):
        raise ValueError(f"{label} is not PSD (min eigenvalue {w[0]:.3e})")
    return m


@dataclass(eq=False)
class FullySeparable:
    """Receive correlations per BS and transmit correlations per cell."""

    rx: list  # Q_i, each bs_antennas x bs_antennas
    tx: list  # P_j, each users x users

    def __post_init__(self):
        if len(self.rx) != len(self.tx):
            raise DimMismatch("need one receive and one transmit matrix per cell")
        n = self.rx[0].shape[0]
        k = self.tx[0].shape[0]
        self.rx = [_check_corr(q, n, f"Q[{i}]") for i, q in enumerate(self.rx)]
        self.tx = [_check_corr(p, k, f"P[{j}]") for j, p in enumerate(self.tx)]

    @property
    def n_cells(self):
        return len(self.rx)

    @property
    def n_users(self):
        return self.tx[0].shape[0]

    @property
    def n_antennas(self):
        return self.rx[0].shape[0]

    def rx_corr(self, i):
        return self.rx[i]

    def tx_corr(self, i, j):
        return self.tx[j]

    def as_partially_separable(self):
        m = self.n_cells
        return PartiallySeparable(rx=list(self.rx), tx=[[self.tx[j] for j in range(m)] for _ in range(m)])


@dataclass(eq=False)
class PartiallySeparable:
    """Receive correlations per BS; transmit correlations per (BS, cell) pair."""

    rx: list  # Q_i
    tx: list  # tx[i][j] = P_ij, users x users

    def __post_init__(self):
        m = len(self.rx)
        if len(self.tx) != m or any(len(row) != m for row in self.tx):
            raise DimMismatch("transmit grid must be cells x cells")
        n = self.rx[0].shape[0]
        k = self.tx[0][0].shape[0]
        self.rx = [_check_corr(q, n, f"Q[{i}]") for i, q in enumerate(self.rx)]
        self.tx = [
            [_check_corr(p, k, f"P[{i}][{j}]") for j, p in enumerate(row)]
            for i, row in enumerate(self.tx)
        ]

    @property
    def n_cells(self):
        return len(self.rx)

    @property
    def n_users(self):
        return self.tx[0][0].shape[0]

    @property
    def n_antennas(self):
        return self.rx[0].shape[0]

    def rx_corr(self, i):
        return self.rx[i]

    def tx_corr(self, i, j):
        return self.tx[i][j]


@dataclass(eq=False)
class MuMimo:
    """Multi-cell fading model described by positive decay factors beta[i, k, j]."""

    beta: np.ndarray
    bs_antennas: int

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if self.beta.ndim != 3 or self.beta.shape[0] != self.beta.shape[2]:
            raise DimMismatch("beta must have shape (cells, users, cells)")
        if not np.all(self.beta > 0):
            raise ValueError("decay factors must be positive")
        if self.bs_antennas < 1:
            raise ValueError("bs_antennas must be at least 1")
        self._eye = np.eye(self.bs_antennas, dtype=np.complex128)

    @property
    def n_cells(self):
        return self.beta.shape[0]

    @property
    def n_users(self):
        return self.beta.shape[1]

    @property
    def n_antennas(self):
        return self.bs_antennas

    def rx_corr(self, i):
        return self._eye

    def tx_corr(self, i, j):
        return np.diag(self.beta[i, :, j]).astype(np.complex128)

    def as_partially_separable(self):
        m = self.n_cells
        return PartiallySeparable(
            rx=[self._eye.copy() for _ in range(m)],
            tx=[[self.tx_corr(i, j) for j in range(m)] for i in range(m)],
        )

    def as_fully_separable(self, rtol=1e-12):
        """Fully separable view, valid when beta does not depend on the receiving BS."""
        spread = np.max(np.abs(self.beta - self.beta[:1]))
        if spread > rtol * np.max(self.beta):
            raise ValueError("decay factors depend on the receiving BS; not fully separable")
        return FullySeparable(
            rx=[self._eye.copy() for _ in range(self.n_cells)],
            tx=[self.tx_corr(0, j) for j in range(self.n_cells)],
        )


def decay_grid(profile):
    """Per-link decay factors beta[i, k, j] for profiles with diagonal transmit factors."""
    if isinstance(profile, MuMimo):
        return profile.beta.copy()
    m, k = profile.n_cells, profile.n_users
    beta = np.empty((m, k, m))
    for i in range(m):
        for j in range(m):
            p = profile.tx_corr(i, j)
            if matlin.frob(p - np.diag(np.diagonal(p))) > 1e-12 * max(matlin.frob(p), 1e-300):
                raise ValueError("transmit correlations are not diagonal")
            beta[i, :, j] = np.real(np.diagonal(p))
    if not np.all(beta > 0):
        raise ValueError("decay factors must be positive")
    return beta


@dataclass(eq=False)
class Geometry:
    """Planar cell layout: BS positions at cell centers and user positions."""

    cell_centers: np.ndarray  # (cells, 2)
    ut_positions: np.ndarray  # (cells, users, 2), indexed [cell, user]
    cell_radius: float

    def __post_init__(self):
        self.cell_centers = np.asarray(self.cell_centers, dtype=np.float64)
        self.ut_positions = np.asarray(self.ut_positions, dtype=np.float64)
        if self.cell_centers.ndim != 2 or self.cell_centers.shape[1] != 2:
            raise DimMismatch("cell_centers must be (cells, 2)")
        if self.ut_positions.ndim != 3 or self.ut_positions.shape[2] != 2:
            raise DimMismatch("ut_positions must be (cells, users, 2)")
        if self.ut_positions.shape[0] != self.cell_centers.shape[0]:
            raise DimMismatch("one row of user positions per cell required")

    def distances(self):
        """r[i, k, j]: distance between user k of cell j and the BS of cell i."""
        diff = self.cell_centers[:, None, None, :] - self.ut_positions[None, :, :, :]
        r = np.linalg.norm(diff, axis=-1)  # (i, j, k)
        return np.transpose(r, (0, 2, 1)).copy()


_HEX_EDGE_NORMALS = np.array(
    [
        [np.cos(np.pi / 6), np.sin(np.pi / 6)],
        [0.0, 1.0],
        [np.cos(5 * np.pi / 6), np.sin(5 * np.pi / 6)],
    ]
)
_AXIAL_STEPS = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]


def _in_hexagon(point, radius):
    return np.all(np.abs(_HEX_EDGE_NORMALS @ point) <= radius * np.sqrt(3) / 2 + 1e-12)


def _hex_centers(m, radius):
    """Cell centers on a hexagonal tiling in center-out spiral order."""
    pitch = np.sqrt(3) * radius
    u = pitch * np.array([np.cos(np.pi / 6), np.sin(np.pi / 6)])
    v = pitch * np.array([0.0, 1.0])
    coords = [(0, 0)]
    ring = 1
    while len(coords) < m:
        q, r = (ring * _AXIAL_STEPS[4][0], ring * _AXIAL_STEPS[4][1])
        for step in _AXIAL_STEPS:
            for _ in range(ring):
                coords.append((q, r))
                q, r = q + step[0], r + step[1]
        ring += 1
    coords = coords[:m]
    return np.array([qi * u + ri * v for qi, ri in coords])


def make_hex_geometry(cfg: NetworkConfig, cell_radius, rng):
    """Uniformly place users inside hexagonal cells tiled around the origin.

    Positions are rejection sampled inside each hexagon, with a minimum
    distance of 0.05 * cell_radius from the serving BS so decay factors stay
    bounded.
    """
    centers = _hex_centers(cfg.cells, cell_radius)
    floor = MIN_DISTANCE_FRACTION * cell_radius
    positions = np.empty((cfg.cells, cfg.users, 2))
    for j in range(cfg.cells):
        for k in range(cfg.users):
            while True:
                p = rng.uniform(-cell_radius, cell_radius, size=2)
                if _in_hexagon(p, cell_radius) and np.linalg.norm(p) >= floor:
                    positions[j, k] = centers[j] + p
                    break
    return Geometry(cell_centers=centers, ut_positions=positions, cell_radius=float(cell_radius))


def make_random_fully_separable(cfg: NetworkConfig, rng):
    """Random fully separable profile: Q_i = X_i X_i*, P_j diagonal uniform [0, 1].

    X_i has i.i.d. standard complex Gaussian entries. A tiny identity jitter
    is added in the rare event that Q_i is conditioned worse than 1e12.
    """
    rx = []
    for _ in range(cfg.cells):
        x = complex_normal(rng, (cfg.bs_antennas, cfg.bs_antennas))
        q = x @ x.conj().T
        w = np.linalg.eigvalsh(matlin.hermitize(q))
        if w[0] <= 0 or w[-1] / w[0] > JITTER_CONDITION:
            q = q + 1e-12 * np.eye(cfg.bs_antennas)
        rx.append(matlin.hermitize(q))
    tx = [np.diag(rng.uniform(0.0, 1.0, size=cfg.users)).astype(np.complex128) for _ in range(cfg.cells)]
    return FullySeparable(rx=rx, tx=tx)


def make_mu_mimo_profile(geom: Geometry, gamma, sigma_shad_db, rng, bs_antennas=1):
    """Decay factors beta = z / r^gamma with log-normal shadowing.

    10 log10(z) is zero-mean Gaussian with standard deviation sigma_shad_db.
    """
    if not gamma > 0:
        raise ValueError("decay exponent must be positive")
    r = geom.distances()
    shadow_db = rng.normal(0.0, sigma_shad_db, size=r.shape)
    z = 10.0 ** (shadow_db / 10.0)
    return MuMimo(beta=z / r**gamma, bs_antennas=bs_antennas)


@dataclass(eq=False)
class ChannelRealization:
    """One coherence block of channel matrices H[i, j] (bs_antennas x users)."""

    H: np.ndarray  # (cells, cells, bs_antennas, users)

    def h(self, i, j):
        """Column-stacked channel vector between cell j users and BS i."""
        return self.H[i, j].ravel(order="F")


def _check_profile_dims(profile, cfg: NetworkConfig):
    if (
        profile.n_cells != cfg.cells
        or profile.n_users != cfg.users
        or profile.n_antennas != cfg.bs_antennas
    ):
        raise DimMismatch(
            f"profile dims (M={profile.n_cells}, K={profile.n_users}, N={profile.n_antennas}) "
            f"do not match config (M={cfg.cells}, K={cfg.users}, N={cfg.bs_antennas})"
        )


def _corr_sqrts(profile):
    # memoized per profile object; profiles are treated as immutable
    cached = getattr(profile, "_sqrt_memo", None)
    if cached is not None:
        return cached
    m = profile.n_cells
    sq_rx = [matlin.psd_sqrt(profile.rx_corr(i)) for i in range(m)]
    sq_tx = [[matlin.psd_sqrt(profile.tx_corr(i, j)) for j in range(m)] for i in range(m)]
    profile._sqrt_memo = (sq_rx, sq_tx)
    return sq_rx, sq_tx


def sample_channels(profile, cfg: NetworkConfig, rng):
    """Draw one channel realization H_ij = Q_i^(1/2) Hbar_ij P_ij^(1/2)."""
    _check_profile_dims(profile, cfg)
    m, n, k = cfg.cells, cfg.bs_antennas, cfg.users
    sq_rx, sq_tx = _corr_sqrts(profile)
    h = np.empty((m, m, n, k), dtype=np.complex128)
    for i in range(m):
        for j in range(m):
            h[i, j] = sq_rx[i] @ complex_normal(rng, (n, k)) @ sq_tx[i][j]
    return ChannelRealization(H=h)


def sample_channel_batch(profile, cfg: NetworkConfig, rng, trials):
    """Draw ``trials`` independent realizations, shape (trials, M, M, N, K)."""
    _check_profile_dims(profile, cfg)
    m, n, k = cfg.cells, cfg.bs_antennas, cfg.users
    sq_rx, sq_tx = _corr_sqrts(profile)
    h = np.empty((trials, m, m, n, k), dtype=np.complex128)
    for i in range(m):
        for j in range(m):
            bar = complex_normal(rng, (trials, n, k))
            h[:, i, j] = sq_rx[i] @ bar @ sq_tx[i][j]
    return h


def effective_P_matrices(profile):
    """Transmit-side assemblies used by the pilot objectives.

    Fully separable profiles yield a single block-diagonal matrix Pbar
    (blkdiag of the per-cell transmit correlations); the other variants
    yield one assembly per receiving cell, Pbar_i = blkdiag(P_i1, ..,
    P_iM). The receive correlations are returned alongside.
    """
    m = profile.n_cells
    rx = [profile.rx_corr(i) for i in range(m)]
    if isinstance(profile, FullySeparable):
        return matlin.blkdiag([profile.tx_corr(0, j) for j in range(m)]), rx
    per_cell = [matlin.blkdiag([profile.tx_corr(i, j) for j in range(m)]) for i in range(m)]
    return per_cell, rx
