"""Pilot sequence design.

For fully separable statistics the sum-MSE pilot problem has a closed-form
solution: scale the top eigenvectors of the weighted transmit assembly
Wbar Pbar by the power budget ("eigen pilots"). When every transmit
correlation is diagonal this collapses to user selection by the weighted
average link strength.

For partially separable statistics the problem becomes a weighted sum of
ratio traces with one transmit assembly per receiving cell. ``gsrtm``
builds the pilot matrix greedily, one symbol row at a time, choosing each
row from a dictionary by maximizing an equivalent sum of quadratic ratios.

Baselines: full orthogonal reuse, random power-normalized pilots, and a
smart-assignment heuristic that permutes a fixed orthogonal set so weak
users see weak interferers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import matlin
from .channel import FullySeparable, complex_normal, decay_grid, effective_P_matrices
from .errors import (
    DimMismatch,
    NoFeasibleRow,
    RowDependent,
    Singular,
    SingularB,
    SingularGram,
)
from .estimator import PilotSet

FEASIBILITY_RTOL = 1e-10


@dataclass(eq=False)
class PilotObjectiveContext:
    """Weighted transmit-side data consumed by the pilot objectives.

    ``tx_assembly`` is the single block-diagonal transmit matrix of the
    fully separable case; ``tx_assembly_per_cell`` holds one assembly per
    receiving cell otherwise. Exactly one of the two is set.
    """

    weights: np.ndarray  # per-cell combiner weights, length M
    users: int
    tx_assembly: np.ndarray | None = None
    tx_assembly_per_cell: list | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if np.any(self.weights < 0):
            raise ValueError("combiner weights must be nonnegative")
        if (self.tx_assembly is None) == (self.tx_assembly_per_cell is None):
            raise ValueError("provide exactly one transmit assembly form")

    @property
    def n_cells(self):
        return self.weights.size

    @property
    def total_users(self):
        return self.n_cells * self.users

    @property
    def fully_separable(self):
        return self.tx_assembly is not None

    def weight_matrix(self):
        """Diagonal weights matrix: combiner weight of each user's home cell."""
        return np.diag(np.repeat(self.weights, self.users)).astype(np.complex128)

    def selector(self, i):
        """Block selector that keeps only the users of cell i."""
        z = np.zeros((self.n_cells, self.n_cells))
        z[i, i] = 1.0
        return np.kron(z, np.eye(self.users)).astype(np.complex128)

    def assembly(self, i):
        """Transmit assembly seen by receiving cell i."""
        if self.fully_separable:
            return self.tx_assembly
        return self.tx_assembly_per_cell[i]


def pilot_context(profile, weights):
    """Build the objective context from a correlation profile and weights."""
    assembly, _ = effective_P_matrices(profile)
    if isinstance(profile, FullySeparable):
        return PilotObjectiveContext(
            weights=weights, users=profile.n_users, tx_assembly=assembly
        )
    return PilotObjectiveContext(
        weights=weights, users=profile.n_users, tx_assembly_per_cell=assembly
    )


def _objective_solve(g, rhs):
    try:
        return matlin.solve_hpd(g, rhs)
    except Singular as exc:
        raise SingularGram(str(exc)) from exc


def fully_sep_objective(s, ctx: PilotObjectiveContext):
    """tr((S Pbar S*)^{-1} S Pbar Wbar Pbar S*) for the stacked pilot matrix."""
    if not ctx.fully_separable:
        raise ValueError("context is not fully separable")
    s = matlin.as_cmatrix(s)
    p_bar = ctx.tx_assembly
    w_bar = ctx.weight_matrix()
    g = matlin.hermitize(s @ p_bar @ s.conj().T)
    num = s @ p_bar @ w_bar @ p_bar @ s.conj().T
    return float(np.trace(_objective_solve(g, num)).real)


def partially_sep_objective(s, ctx: PilotObjectiveContext):
    """Weighted sum over cells of tr(S Pbar_i^2 L_i S* [S Pbar_i S*]^{-1})."""
    s = matlin.as_cmatrix(s)
    total = 0.0
    for i in range(ctx.n_cells):
        p_i = ctx.assembly(i)
        g = matlin.hermitize(s @ p_i @ s.conj().T)
        num = s @ p_i @ p_i @ ctx.selector(i) @ s.conj().T
        total += ctx.weights[i] * np.trace(_objective_solve(g, num)).real
    return float(total)


def eigen_pilots(ctx: PilotObjectiveContext, cfg):
    """Closed-form optimal pilots for fully separable statistics.

    Stacks the top pilot_len eigenvectors of Wbar Pbar (conjugate
    transposed) scaled by sqrt(power); every per-user pilot energy is then
    within the budget because the eigenvector matrix has unit-norm rows or
    shorter.
    """
    if not ctx.fully_separable:
        raise ValueError("eigen pilots require a fully separable profile")
    wp = ctx.weight_matrix() @ ctx.tx_assembly
    eig = matlin.herm_eig(wp)
    u1 = eig.vectors[:, : cfg.pilot_len]
    s = np.sqrt(cfg.power) * u1.conj().T
    return PilotSet.from_stacked(s, ctx.users)


def user_selection(ctx: PilotObjectiveContext, cfg):
    """Orthogonal pilots for the strongest-link users, all others silenced.

    Valid when every transmit correlation is diagonal; the users are ranked
    by the product of home-cell combiner weight and average link gain, with
    ties broken by (cell, user) index.
    """
    if not ctx.fully_separable:
        raise ValueError("user selection requires a fully separable profile")
    p_bar = ctx.tx_assembly
    off_diag = matlin.frob(p_bar - np.diag(np.diagonal(p_bar)))
    if off_diag > 1e-12 * max(matlin.frob(p_bar), 1e-300):
        raise ValueError("user selection requires diagonal transmit correlations")
    gains = np.real(np.diagonal(ctx.weight_matrix() @ p_bar))
    order = np.lexsort((np.arange(gains.size), -gains))
    chosen = order[: cfg.pilot_len]
    s = np.zeros((cfg.pilot_len, ctx.total_users), dtype=np.complex128)
    for rank, user in enumerate(chosen):
        s[rank, user] = np.sqrt(cfg.power)
    return PilotSet.from_stacked(s, ctx.users)


def rank1_block_inverse(s_stack, row, q_prev):
    """Inverse of the grown Gram [S; s][S; s]* from the inverse of S S*.

    Uses the 2x2 block formula with alpha = 1 / (s s* - s S* Q S s*);
    raises RowDependent when the appended row lies in the row space of the
    stack (the denominator vanishes).
    """
    s_stack = matlin.as_cmatrix(s_stack)
    row = np.asarray(row, dtype=np.complex128).ravel()
    q_prev = matlin.as_cmatrix(q_prev)
    u = s_stack @ row.conj()  # S s*
    qu = q_prev @ u
    denom = float((row @ row.conj()).real - (u.conj() @ qu).real)
    norm2 = float((row @ row.conj()).real)
    if denom < 1e-12 * norm2:
        raise RowDependent("appended row is inside the row space of the stack")
    alpha = 1.0 / denom
    n = s_stack.shape[0]
    out = np.empty((n + 1, n + 1), dtype=np.complex128)
    out[:n, :n] = q_prev + alpha * np.outer(qu, qu.conj())
    out[:n, n] = -alpha * qu
    out[n, :n] = -alpha * qu.conj()
    out[n, n] = alpha
    return out


@dataclass(eq=False)
class GsrtmState:
    """Greedy pilot search state for one partially separable instance.

    Holds the current row stack and, per receiving cell, the quadratic
    forms of the equivalent base-case problem: T_i vanishes exactly on the
    row space of the stack, and G_i scores the objective gain of a
    candidate row (up to a constant offset shared by all rows).
    """

    ctx: PilotObjectiveContext
    S: np.ndarray  # (rows_so_far, M*K)
    A: list  # A_i = Pbar_i^2 L_i
    B: list  # B_i = Pbar_i
    T: list
    G: list
    gamma: np.ndarray
    X: list
    T_norms: np.ndarray  # spectral norms of T_i, for the feasibility epsilon
    _roots: list = None  # (B^{1/2}, B^{-1/2}, A^{1/2}) per cell, cached

    @property
    def rows(self):
        return self.S.shape[0]


def _state_roots(ctx, a_list, b_list):
    roots = []
    for a_i, b_i in zip(a_list, b_list):
        eig = matlin.herm_eig(b_i)
        if eig.values[-1] <= 1e-12 * max(eig.values[0], 1e-300):
            raise SingularB("per-cell transmit assembly is not invertible")
        sq = np.sqrt(eig.values)
        b_half = (eig.vectors * sq) @ eig.vectors.conj().T
        b_inv_half = (eig.vectors / sq) @ eig.vectors.conj().T
        roots.append((matlin.hermitize(b_half), matlin.hermitize(b_inv_half), matlin.psd_sqrt(a_i)))
    return roots


def gsrtm_init(ctx: PilotObjectiveContext):
    """Empty-stack state: T_i = B_i and G_i = A_i."""
    mk = ctx.total_users
    a_list, b_list = [], []
    for i in range(ctx.n_cells):
        p_i = ctx.assembly(i)
        a_list.append(matlin.hermitize(p_i @ p_i @ ctx.selector(i)))
        b_list.append(p_i.copy())
    roots = _state_roots(ctx, a_list, b_list)
    state = GsrtmState(
        ctx=ctx,
        S=np.zeros((0, mk), dtype=np.complex128),
        A=a_list,
        B=b_list,
        T=[b.copy() for b in b_list],
        G=[a.copy() for a in a_list],
        gamma=np.zeros(ctx.n_cells),
        X=[-(r[2]).copy() for r in roots],
        T_norms=np.array([np.linalg.eigvalsh(b)[-1] for b in b_list]),
        _roots=roots,
    )
    return state


def gsrtm_update(state: GsrtmState):
    """Recompute (T_i, gamma_i, X_i, G_i) for the current row stack."""
    roots = state._roots
    mk = state.ctx.total_users
    eye = np.eye(mk)
    t_list, g_list, x_list = [], [], []
    gam = np.empty(state.ctx.n_cells)
    t_norms = np.empty(state.ctx.n_cells)
    for i in range(state.ctx.n_cells):
        b_half, b_inv_half, a_half = roots[i]
        proj = matlin.range_projector(b_half @ state.S.conj().T)
        t_i = matlin.hermitize(b_half @ (eye - proj) @ b_half)
        gam[i] = np.trace(proj @ b_inv_half @ a_half @ b_inv_half).real
        x_i = b_half @ proj @ b_inv_half @ a_half - a_half
        g_i = matlin.hermitize(gam[i] * t_i + x_i @ x_i.conj().T)
        t_list.append(t_i)
        g_list.append(g_i)
        x_list.append(x_i)
        t_norms[i] = np.linalg.eigvalsh(t_i)[-1]
    return replace(state, T=t_list, G=g_list, X=x_list, gamma=gam, T_norms=t_norms)


def gsrtm_base_case(state: GsrtmState, dictionary):
    """Best dictionary row for the next pilot symbol.

    Maximizes the weighted sum of quadratic ratios s G_i s* / s T_i s* over
    rows whose denominators are all strictly positive (rows already inside
    the row space of the stack are excluded by that constraint).
    """
    d = np.asarray(dictionary, dtype=np.complex128)
    if d.ndim != 2 or d.shape[0] == 0:
        raise ValueError("dictionary must be a nonempty 2-D array of rows")
    if d.shape[1] != state.ctx.total_users:
        raise DimMismatch("dictionary row length must equal the total user count")
    row_norm2 = np.sum(np.abs(d) ** 2, axis=1).real
    scores = np.zeros(d.shape[0])
    feasible = np.ones(d.shape[0], dtype=bool)
    for i in range(state.ctx.n_cells):
        den = np.einsum("qj,jk,qk->q", d, state.T[i], d.conj()).real
        num = np.einsum("qj,jk,qk->q", d, state.G[i], d.conj()).real
        eps = FEASIBILITY_RTOL * row_norm2 * state.T_norms[i]
        feasible &= den > eps
        with np.errstate(divide="ignore", invalid="ignore"):
            scores += np.where(feasible, state.ctx.weights[i] * num / den, 0.0)
    if not feasible.any():
        raise NoFeasibleRow("every dictionary row violates the positivity constraint")
    scores[~feasible] = -np.inf
    return d[int(np.argmax(scores))].copy()


def gsrtm_append(state: GsrtmState, row):
    """Grow the stack by one row and refresh the derived matrices."""
    row = np.asarray(row, dtype=np.complex128).reshape(1, -1)
    return gsrtm_update(replace(state, S=np.vstack([state.S, row])))


def gsrtm(ctx: PilotObjectiveContext, cfg, dictionary):
    """Greedy sum-of-ratio-traces pilot design over a fixed dictionary.

    Runs pilot_len greedy steps, then rescales the whole matrix by the
    largest alpha that keeps every per-user energy within the budget (the
    objective is scale invariant, so uniform scaling is free).
    """
    state = gsrtm_init(ctx)
    for _ in range(cfg.pilot_len):
        row = gsrtm_base_case(state, dictionary)
        state = gsrtm_append(state, row)
    s = state.S
    max_col = float(np.max(np.sum(np.abs(s) ** 2, axis=0)))
    if max_col <= 0:
        raise NoFeasibleRow("greedy search produced an all-zero pilot matrix")
    s = s * np.sqrt(cfg.power / max_col)
    return PilotSet.from_stacked(s, ctx.users)


def dft_matrix(n):
    """Unitary DFT matrix of size n."""
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


def baseline_orthogonal_reuse(cfg):
    """The same ``users`` orthogonal pilots reused in every cell."""
    if cfg.pilot_len < cfg.users:
        raise DimMismatch("orthogonal reuse needs pilot_len >= users")
    base = np.sqrt(cfg.power) * dft_matrix(cfg.pilot_len)[:, : cfg.users]
    return PilotSet(per_cell=[base.copy() for _ in range(cfg.cells)])


def baseline_random(cfg, rng):
    """I.i.d. complex Gaussian pilots with every column scaled to the budget."""
    per_cell = []
    for _ in range(cfg.cells):
        s = complex_normal(rng, (cfg.pilot_len, cfg.users))
        s *= np.sqrt(cfg.power) / np.linalg.norm(s, axis=0, keepdims=True)
        per_cell.append(s)
    return PilotSet(per_cell=per_cell)


def _spa_assign(beta, n_seq):
    """Sequence index per (cell, user) for the smart-assignment heuristic.

    Cells are processed in index order. Within a cell, the still-free
    sequence with the smallest accumulated cross-cell interference is
    given to the still-unassigned user with the weakest home link; ties
    fall back to the smaller index.
    """
    m, k = beta.shape[0], beta.shape[1]
    holders = [[] for _ in range(n_seq)]  # (cell, user) pairs per sequence
    assign = np.full((m, k), -1, dtype=int)
    for i in range(m):
        free_seqs = list(range(n_seq))
        free_users = list(range(k))
        for _ in range(k):
            scores = [
                sum(beta[i, ku, j] for j, ku in holders[q] if j != i) for q in free_seqs
            ]
            q_pick = free_seqs[int(np.argmin(scores))]
            gains = [beta[i, ku, i] for ku in free_users]
            u_pick = free_users[int(np.argmin(gains))]
            assign[i, u_pick] = q_pick
            holders[q_pick].append((i, u_pick))
            free_seqs.remove(q_pick)
            free_users.remove(u_pick)
    return assign


def baseline_spa(profile, cfg, base_sequences):
    """Smart pilot assignment: permute a fixed orthogonal set across users.

    ``base_sequences`` holds orthonormal columns (pilot_len x n_seq). The
    allocation reuses exactly ``users`` sequences (the first ones) in every
    cell, so extra pilot symbols lengthen the sequences but cannot reduce
    the reuse; within each cell, weak users are paired with the sequences
    that currently carry the least cross-cell interference. The output
    columns are the assigned sequences scaled to the power budget.
    """
    beta = decay_grid(profile)
    base = matlin.as_cmatrix(base_sequences)
    if base.shape[0] != cfg.pilot_len:
        raise DimMismatch("base sequences must have pilot_len rows")
    if base.shape[1] < cfg.users:
        raise DimMismatch("need at least one base sequence per user in a cell")
    gram = base.conj().T @ base
    if matlin.frob(gram - np.eye(base.shape[1])) > 1e-8 * base.shape[1]:
        raise ValueError("base sequences must be orthonormal")
    assign = _spa_assign(beta, cfg.users)
    per_cell = []
    for i in range(cfg.cells):
        s = np.sqrt(cfg.power) * base[:, assign[i]]
        per_cell.append(s)
    return PilotSet(per_cell=per_cell)


def _dedup_rows(rows, fresh, wanted):
    seen = {r.tobytes() for r in rows}
    for r in fresh:
        key = r.tobytes()
        if key not in seen:
            seen.add(key)
            rows.append(r)
        if len(rows) == wanted:
            break
    return rows


def gaussian_dictionary(length, size, rng):
    """I.i.d. CN(0, 1) rows, deduplicated, shape (size, length)."""
    rows = []
    while len(rows) < size:
        _dedup_rows(rows, list(complex_normal(rng, (size, length))), size)
    return np.vstack(rows)


_QAM4 = (np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)).astype(np.complex128)
_QAM16_LEVELS = np.array([-3, -1, 1, 3], dtype=np.float64)


def qam_dictionary(length, size, rng, points=4):
    """Rows of i.i.d. uniform QAM symbols (unit average energy), deduplicated."""
    if points == 4:
        symbols = _QAM4
    elif points == 16:
        re, im = np.meshgrid(_QAM16_LEVELS, _QAM16_LEVELS)
        symbols = ((re + 1j * im).ravel() / np.sqrt(10.0)).astype(np.complex128)
    else:
        raise ValueError("supported constellation sizes are 4 and 16")
    rows = []
    while len(rows) < size:
        draws = symbols[rng.integers(0, symbols.size, size=(size, length))]
        _dedup_rows(rows, list(draws), size)
    return np.vstack(rows)
