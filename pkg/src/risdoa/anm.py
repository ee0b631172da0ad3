"""Gridless sparse recovery via structured trace-minimization programs.

Two convex programs share one operator-splitting solver. The full program
searches a PSD-bordered matrix [[T, x], [x^H, t]] whose MN x MN block T is
two-level Toeplitz (outer level along the row axis, inner level along the
column axis, matching the row-major element flattening). The decoupled
program replaces it with [[T_x, X], [X^H, T_y]] of side M + N, with a plain
Hermitian Toeplitz block per axis; the PSD cone shrinks from MN + 1 to
M + N, which is where the large runtime gap between the two comes from.

Both minimize half the trace of the structured diagonal blocks, subject to
the observation either through a hard residual ball ||z - G x|| <= radius
("noise-ball") or through a quadratic penalty plus a weighted trace
("regularized"). Atoms are unit Frobenius norm throughout, so the optimal
objective of a well-separated sparse target equals the sum of its atom
weights.

The splitting alternates (1) exact projection onto the structure and data
constraints with the trace term folded in closed form, (2) projection onto
the PSD cone, (3) a scaled dual update, with residual-balanced step
adaptation.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import (
    ConfigError,
    DegenerateInputError,
    InfeasibleConstraintError,
    SizeCapError,
    SolverConvergenceError,
)
from .model import RisGeometry, axis_atom

_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# structure projections


@lru_cache(maxsize=None)
def _toeplitz_classes(n: int):
    i = np.arange(n)
    idx = i[None, :] - i[:, None] + (n - 1)
    counts = np.bincount(idx.ravel(), minlength=2 * n - 1)
    return idx, counts


@lru_cache(maxsize=None)
def _two_level_classes(m: int, n: int):
    r = np.arange(m * n)
    mm, nn = r // n, r % n
    dm = mm[:, None] - mm[None, :] + (m - 1)
    dn = nn[:, None] - nn[None, :] + (n - 1)
    idx = dm * (2 * n - 1) + dn
    counts = np.bincount(idx.ravel(), minlength=(2 * m - 1) * (2 * n - 1))
    return idx, counts


def _class_average(A: np.ndarray, idx: np.ndarray, counts: np.ndarray) -> np.ndarray:
    flat = idx.ravel()
    re = np.bincount(flat, weights=A.real.ravel(), minlength=counts.size)
    im = np.bincount(flat, weights=A.imag.ravel(), minlength=counts.size)
    return ((re + 1j * im) / counts)[idx]


def _hermitian(A: np.ndarray) -> np.ndarray:
    return (A + A.conj().T) / 2.0


def project_toeplitz_hermitian(A: np.ndarray) -> np.ndarray:
    """Orthogonal projection onto Hermitian Toeplitz matrices.

    Hermitian symmetrization followed by averaging each diagonal; the two
    projections commute, so the composition is the projection onto the
    intersection.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("input must be square")
    idx, counts = _toeplitz_classes(A.shape[0])
    return _class_average(_hermitian(A), idx, counts)


def project_block_toeplitz(A: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Orthogonal projection onto Hermitian two-level Toeplitz matrices.

    Entry ((m, n), (m', n')) of the projection depends only on
    (m - m', n - n'): the outer level runs over the row axis, each of the
    (2 rows - 1) representative blocks is cols x cols Toeplitz.
    """
    A = np.asarray(A, dtype=complex)
    mn = rows * cols
    if A.shape != (mn, mn):
        raise ValueError(f"expected a {mn}x{mn} matrix for a {rows}x{cols} grid")
    idx, counts = _two_level_classes(rows, cols)
    return _class_average(_hermitian(A), idx, counts)


def project_psd(A: np.ndarray) -> np.ndarray:
    """Nearest (Frobenius) positive semidefinite matrix to the Hermitian part."""
    H = _hermitian(np.asarray(A, dtype=complex))
    lam, V = np.linalg.eigh(H)
    lam = np.maximum(lam, 0.0)
    return _hermitian((V * lam) @ V.conj().T)


# ---------------------------------------------------------------------------
# atoms and Toeplitz construction (shared by tests, oracles, and extraction)


def unit_matrix_atom(geom: RisGeometry, f_row: float, f_col: float) -> np.ndarray:
    """Rank-1 M x N response of one (row, column) frequency pair, unit Frobenius norm."""
    u = axis_atom(f_row, geom.rows, geom.row_spacing)
    v = axis_atom(f_col, geom.cols, geom.col_spacing)
    return np.outer(u, v) / math.sqrt(geom.n_elements)


def unit_vec_atom(geom: RisGeometry, f_row: float, f_col: float) -> np.ndarray:
    """Row-major vectorization of unit_matrix_atom; unit 2-norm."""
    return unit_matrix_atom(geom, f_row, f_col).reshape(-1)


def toeplitz_from_atoms(freqs, weights, dim: int, spacing: float = 0.5) -> np.ndarray:
    """Sum of weighted rank-1 Toeplitz atoms a(f) a(f)^H with unit-modulus entries."""
    T = np.zeros((dim, dim), dtype=complex)
    for f, w in zip(np.atleast_1d(freqs), np.atleast_1d(weights)):
        a = axis_atom(f, dim, spacing)
        T += w * np.outer(a, a.conj())
    return T


def full_toeplitz_marginals(T: np.ndarray, rows: int, cols: int):
    """Per-axis Toeplitz factors of a two-level Toeplitz matrix.

    Averaging the inner (column) diagonal collapses the structure to the
    row-axis factor and vice versa; on a matrix built from frequency atoms
    both marginals carry the same atoms as a plain 1D Toeplitz sum.
    """
    T4 = np.asarray(T, dtype=complex).reshape(rows, cols, rows, cols)
    t_row = np.einsum("mnpn->mp", T4) / cols
    t_col = np.einsum("mnmq->nq", T4) / rows
    return t_row, t_col


# ---------------------------------------------------------------------------
# solver configuration and results


@dataclass(frozen=True)
class SolverConfig:
    """Splitting-solver knobs shared by both programs.

    mode selects the data coupling: "noise-ball" enforces
    ||z - G x|| <= sqrt(noise_power) exactly, "regularized" adds
    0.5 ||z - G x||^2 and weights the trace by alpha (default
    sigma * sqrt(MN log MN) with sigma the per-sample noise deviation).
    """

    mode: str = "noise-ball"
    rho: float = 1.0
    alpha: float | None = None
    max_iterations: int = 50_000
    tolerance: float = 1e-6
    adapt_every: int = 50
    record_every: int = 25
    size_cap: int = 64

    def __post_init__(self):
        if self.mode not in ("noise-ball", "regularized"):
            raise ConfigError(f"unknown solver mode {self.mode!r}")
        if self.rho <= 0 or self.tolerance <= 0 or self.max_iterations < 1:
            raise ConfigError("rho, tolerance, max_iterations must be positive")


@dataclass(frozen=True)
class SolverDiagnostics:
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float
    trace_objective: float
    data_residual: float
    min_eigenvalue: float
    rho_final: float
    mode: str
    residual_history: tuple = field(repr=False, default=())


@dataclass(frozen=True)
class DecoupledSdpVars:
    """Solution of the decoupled program: per-axis Toeplitz factors plus X."""

    T_x: np.ndarray
    T_y: np.ndarray
    X: np.ndarray
    diagnostics: SolverDiagnostics


@dataclass(frozen=True)
class FullSdpVars:
    """Solution of the full program: two-level Toeplitz T, scalar t, vector x."""

    T: np.ndarray
    t: float
    x: np.ndarray
    diagnostics: SolverDiagnostics


@dataclass(frozen=True)
class AtomicDecomposition:
    """Frequencies and nonnegative weights of a Toeplitz Vandermonde expansion."""

    frequencies: np.ndarray
    weights: np.ndarray


def write_residual_history(diagnostics: SolverDiagnostics, path) -> None:
    """Dump the recorded (iteration, primal, dual) residual trace as CSV."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "primal_residual", "dual_residual"])
        for row in diagnostics.residual_history:
            writer.writerow([row[0], repr(row[1]), repr(row[2])])


# ---------------------------------------------------------------------------
# data-coupling steps in the SVD basis of G


class _DataStep:
    """Closed-form updates of the observed block for both coupling modes."""

    def __init__(self, G: np.ndarray, z: np.ndarray, mode: str, radius: float = 0.0):
        self.mode = mode
        self.radius = float(radius)
        U, s, Vh = np.linalg.svd(np.asarray(G, dtype=complex), full_matrices=True)
        self.Vh = Vh
        zt = U.conj().T @ np.asarray(z, dtype=complex)
        smax = s[0] if s.size else 0.0
        rank = int(np.sum(s > smax * 1e-12))
        self.rank = rank
        self.s = s[:rank]
        self.zt = zt[:rank]
        # observation energy outside the range of G is unreachable by any x
        self.unreachable_sq = float(np.sum(np.abs(zt[rank:]) ** 2))
        n = G.shape[1]
        self.s_full = np.zeros(n)
        self.s_full[:rank] = self.s
        self.sz_full = np.zeros(n, dtype=complex)
        self.sz_full[:rank] = self.s * self.zt
        if mode == "noise-ball":
            budget_sq = self.radius**2 - self.unreachable_sq
            if budget_sq < -max(1e-20, 1e-10 * float(np.vdot(z, z).real)):
                raise InfeasibleConstraintError(
                    "observation has energy outside the range of the code matrix "
                    "exceeding the noise ball"
                )
            self.budget_sq = max(budget_sq, 0.0)

    def residual_norm(self, x: np.ndarray, z: np.ndarray, G: np.ndarray) -> float:
        return float(np.linalg.norm(z - G @ x))

    def ball_project(self, x0: np.ndarray) -> np.ndarray:
        xt = self.Vh @ x0
        r0 = self.zt - self.s * xt[: self.rank]
        r0_sq = np.abs(r0) ** 2
        if float(r0_sq.sum()) <= self.budget_sq + _FLOOR:
            return x0
        if self.budget_sq <= _FLOOR**2:
            xt[: self.rank] = self.zt / self.s
        else:

            def gap(lam):
                return float(np.sum(r0_sq / (1.0 + lam * self.s**2) ** 2)) - self.budget_sq

            hi = 1.0
            while gap(hi) > 0.0:
                hi *= 4.0
                if hi > 1e24:
                    raise InfeasibleConstraintError("ball projection failed to bracket")
            lam = brentq(gap, 0.0, hi, xtol=1e-14)
            xt[: self.rank] = (xt[: self.rank] + lam * self.s * self.zt) / (1.0 + lam * self.s**2)
        return self.Vh.conj().T @ xt

    def penalty_solve(self, v: np.ndarray, rho: float) -> np.ndarray:
        # argmin_x 0.5 ||z - G x||^2 + rho ||x - v||^2 (x enters the bordered
        # matrix twice, hence the doubled quadratic weight)
        vt = self.Vh @ v
        xt = (self.sz_full + 2.0 * rho * vt) / (self.s_full**2 + 2.0 * rho)
        return self.Vh.conj().T @ xt


def _resolve_alpha(config: SolverConfig, noise_power, n_atoms: int, n_obs: int) -> float:
    if config.alpha is not None:
        return float(config.alpha)
    if noise_power is None:
        raise ConfigError("regularized mode needs alpha or noise_power to size the trace weight")
    sigma = math.sqrt(max(float(noise_power), 0.0) / n_obs)
    return sigma * math.sqrt(n_atoms * math.log(n_atoms)) if n_atoms > 1 else sigma


# ---------------------------------------------------------------------------
# shared splitting loop


def _run_splitting(dim: int, structure_step, config: SolverConfig, label: str):
    Q = np.zeros((dim, dim), dtype=complex)
    Z = np.zeros_like(Q)
    dual = np.zeros_like(Q)
    rho = config.rho
    history = []
    converged = False
    r_pri = r_dual = float("nan")
    it = 0
    for it in range(1, config.max_iterations + 1):
        Q = structure_step(Z - dual, rho)
        Z_prev = Z
        Z = project_psd(Q + dual)
        R = Q - Z
        dual = dual + R
        r_pri = float(np.linalg.norm(R))
        r_dual = rho * float(np.linalg.norm(Z - Z_prev))
        if it == 1 or it % config.record_every == 0:
            history.append((it, r_pri, r_dual))
        scale_pri = max(float(np.linalg.norm(Q)), float(np.linalg.norm(Z)), _FLOOR)
        scale_dual = max(rho * float(np.linalg.norm(dual)), _FLOOR)
        if r_pri <= config.tolerance * scale_pri and r_dual <= config.tolerance * scale_dual:
            converged = True
            history.append((it, r_pri, r_dual))
            break
        if it % config.adapt_every == 0:
            if r_pri > 10.0 * r_dual and rho < 1e8:
                rho *= 2.0
                dual /= 2.0
            elif r_dual > 10.0 * r_pri and rho > 1e-8:
                rho /= 2.0
                dual *= 2.0
    if not converged:
        raise SolverConvergenceError(
            f"{label} splitting did not reach tolerance {config.tolerance:g} "
            f"in {config.max_iterations} iterations "
            f"(primal {r_pri:.3e}, dual {r_dual:.3e})",
            iterations=it,
            primal_residual=r_pri,
            dual_residual=r_dual,
        )
    return Q, rho, it, r_pri, r_dual, tuple(history)


# ---------------------------------------------------------------------------
# solvers


def solve_danm(
    z: np.ndarray,
    G: np.ndarray,
    geom: RisGeometry,
    config: SolverConfig | None = None,
    noise_power: float | None = None,
) -> DecoupledSdpVars:
    """Recover the structured M x N response X from z = G vec(X) + noise.

    noise_power is the squared-norm budget of the residual ball (total
    expected noise energy over the snapshot, i.e. samples x per-sample
    variance); it also sizes the default trace weight in regularized mode.
    """
    config = config or SolverConfig()
    M, N = geom.rows, geom.cols
    z = np.asarray(z, dtype=complex).reshape(-1)
    G = np.asarray(G, dtype=complex)
    if G.shape != (z.size, M * N):
        raise ValueError(f"code matrix must be {z.size}x{M * N}, got {G.shape}")
    if config.mode == "noise-ball":
        if noise_power is None:
            raise ConfigError("noise-ball mode requires noise_power")
        data = _DataStep(G, z, "noise-ball", radius=math.sqrt(max(noise_power, 0.0)))
        trace_weight = 1.0
    else:
        data = _DataStep(G, z, "regularized")
        trace_weight = _resolve_alpha(config, noise_power, M * N, z.size)

    idx_r, cnt_r = _toeplitz_classes(M)
    idx_c, cnt_c = _toeplitz_classes(N)
    eye_m, eye_n = np.eye(M), np.eye(N)

    def structure_step(V, rho):
        shift = trace_weight / (2.0 * rho)
        T_x = _class_average(_hermitian(V[:M, :M]), idx_r, cnt_r) - shift * eye_m
        T_y = _class_average(_hermitian(V[M:, M:]), idx_c, cnt_c) - shift * eye_n
        v_x = _hermitian(V)[:M, M:].reshape(-1)
        if config.mode == "noise-ball":
            x = data.ball_project(v_x)
        else:
            x = data.penalty_solve(v_x, rho)
        X = x.reshape(M, N)
        out = np.empty((M + N, M + N), dtype=complex)
        out[:M, :M] = T_x
        out[M:, M:] = T_y
        out[:M, M:] = X
        out[M:, :M] = X.conj().T
        return out

    Q, rho, iters, r_pri, r_dual, history = _run_splitting(
        M + N, structure_step, config, "decoupled"
    )
    T_x, T_y, X = Q[:M, :M], Q[M:, M:], Q[:M, M:]
    diag = SolverDiagnostics(
        iterations=iters,
        converged=True,
        primal_residual=r_pri,
        dual_residual=r_dual,
        trace_objective=0.5 * float(np.trace(T_x).real + np.trace(T_y).real),
        data_residual=float(np.linalg.norm(z - G @ X.reshape(-1))),
        min_eigenvalue=float(np.linalg.eigvalsh(Q)[0]),
        rho_final=rho,
        mode=config.mode,
        residual_history=history,
    )
    return DecoupledSdpVars(T_x=T_x, T_y=T_y, X=X, diagnostics=diag)


def solve_full_anm(
    geom: RisGeometry,
    config: SolverConfig | None = None,
    x: np.ndarray | None = None,
    z: np.ndarray | None = None,
    G: np.ndarray | None = None,
    noise_power: float | None = None,
) -> FullSdpVars:
    """Solve the full bordered program over the MN-element response.

    Pass either x (the response itself; computes its atomic decomposition
    value) or the observation pair (z, G) for denoising in the configured
    mode. The PSD block has side MN + 1, so the size cap guards runtime.
    """
    config = config or SolverConfig()
    M, N = geom.rows, geom.cols
    mn = M * N
    if mn > config.size_cap:
        raise SizeCapError(f"full program of side {mn + 1} exceeds size_cap={config.size_cap}")
    if (x is None) == (z is None or G is None):
        raise ValueError("pass exactly one of x or the pair (z, G)")

    if x is not None:
        x_fixed = np.asarray(x, dtype=complex).reshape(-1)
        if x_fixed.size != mn:
            raise ValueError(f"x must have {mn} entries")
        data = None
        trace_weight = 1.0
        mode = "atomic"
    else:
        z = np.asarray(z, dtype=complex).reshape(-1)
        G = np.asarray(G, dtype=complex)
        if G.shape != (z.size, mn):
            raise ValueError(f"code matrix must be {z.size}x{mn}, got {G.shape}")
        if config.mode == "noise-ball":
            if noise_power is None:
                raise ConfigError("noise-ball mode requires noise_power")
            data = _DataStep(G, z, "noise-ball", radius=math.sqrt(max(noise_power, 0.0)))
            trace_weight = 1.0
        else:
            data = _DataStep(G, z, "regularized")
            trace_weight = _resolve_alpha(config, noise_power, mn, z.size)
        mode = config.mode

    idx2, cnt2 = _two_level_classes(M, N)
    eye_mn = np.eye(mn)

    def structure_step(V, rho):
        shift = trace_weight / (2.0 * rho)
        H = _hermitian(V)
        T = _class_average(H[:mn, :mn], idx2, cnt2) - shift * eye_mn
        t = H[mn, mn].real - shift
        if x is not None:
            xb = x_fixed
        elif mode == "noise-ball":
            xb = data.ball_project(H[:mn, mn])
        else:
            xb = data.penalty_solve(H[:mn, mn], rho)
        out = np.empty((mn + 1, mn + 1), dtype=complex)
        out[:mn, :mn] = T
        out[mn, mn] = t
        out[:mn, mn] = xb
        out[mn, :mn] = xb.conj()
        return out

    Q, rho, iters, r_pri, r_dual, history = _run_splitting(mn + 1, structure_step, config, "full")
    T, t, x_out = Q[:mn, :mn], float(Q[mn, mn].real), Q[:mn, mn]
    if x is not None:
        data_residual = 0.0
    else:
        data_residual = float(np.linalg.norm(z - G @ x_out))
    diag = SolverDiagnostics(
        iterations=iters,
        converged=True,
        primal_residual=r_pri,
        dual_residual=r_dual,
        trace_objective=0.5 * (float(np.trace(T).real) + t),
        data_residual=data_residual,
        min_eigenvalue=float(np.linalg.eigvalsh(Q)[0]),
        rho_final=rho,
        mode=mode,
        residual_history=history,
    )
    return FullSdpVars(T=T, t=t, x=x_out, diagnostics=diag)


def atomic_norm(x: np.ndarray, geom: RisGeometry, config: SolverConfig | None = None) -> float:
    """Atomic-decomposition value of a response vector (unit-norm atom dictionary)."""
    return solve_full_anm(geom, config, x=x).diagnostics.trace_objective


def vandermonde_decompose(T: np.ndarray, num_atoms: int, spacing: float = 0.5) -> AtomicDecomposition:
    """Recover frequencies and weights of T = sum_q w_q a(f_q) a(f_q)^H.

    The frequencies come from the annihilating-polynomial roots of the
    first Toeplitz column; weights are the least-squares fit of the rank-1
    atoms to T. Requires numerical rank at least num_atoms.
    """
    from .extraction import toeplitz_to_freqs

    T = project_toeplitz_hermitian(T)
    dim = T.shape[0]
    lam = np.linalg.eigvalsh(T)
    tol = max(abs(lam[-1]), _FLOOR) * 1e-8
    if int(np.sum(lam > tol)) < num_atoms:
        raise DegenerateInputError(
            f"matrix rank {int(np.sum(lam > tol))} below requested atom count {num_atoms}"
        )
    freqs = toeplitz_to_freqs(T, num_atoms, spacing=spacing)
    atoms = np.stack(
        [np.outer(a, a.conj()).reshape(-1) for a in (axis_atom(f, dim, spacing) for f in freqs)],
        axis=1,
    )
    weights, *_ = np.linalg.lstsq(atoms, T.reshape(-1), rcond=None)
    order = np.argsort(freqs)
    return AtomicDecomposition(frequencies=np.asarray(freqs)[order], weights=weights.real[order])
