"""Interaction Hamiltonians and Krylov time evolution.

The nonlinear interaction (hbar = 1) is

    H = i kappa (a+^k b+^l p  -  a^k b^l p+)

on a (pump, A, B) layout. The dimensionless sweep coordinate is
xi = kappa * t * alpha_p, so grid times are t_j = xi_j / (kappa * alpha_p).

Evolution uses an adaptive Lanczos exponential stepper on the sparse
Hamiltonian: the Krylov subspace grows until the standard residual estimate
meets the local tolerance, otherwise the step is bisected. Norm is conserved
to machine precision by construction (the small exponential is unitary);
accuracy is controlled by the residual estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal

from .fock import ModeLayout, QuantumState, TruncatedOperator, annihilation, embed, top_level_population

TOP_LEVEL_GUARD = 1e-6


class IntegratorError(RuntimeError):
    """Raised when the stepper cannot reach the requested local tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class InteractionSpec:
    """Process orders and coupling for the trilinear interaction.

    k = l = 1 may only be used with the classical-pump oracle builder; the
    trilinear builder requires k + l >= 3.
    """

    layout: ModeLayout
    k: int
    l: int
    kappa: float = 1.0

    def __post_init__(self):
        for name, val in (("k", self.k), ("l", self.l)):
            if not isinstance(val, (int, np.integer)) or isinstance(val, bool) or val < 1:
                raise ValueError(f"{name} must be an integer >= 1, got {val!r}")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")


def build_hamiltonian(spec: InteractionSpec) -> TruncatedOperator:
    """Sparse trilinear Hamiltonian i*kappa*(a+^k b+^l p - h.c.) on a 3-mode layout."""
    layout = spec.layout
    if layout.nmodes != 3:
        raise ValueError("trilinear interaction needs a (pump, A, B) layout")
    if spec.k + spec.l < 3:
        raise ValueError(
            "k + l >= 3 required for the nonlinear interaction; "
            "use build_classical_pump_hamiltonian for the k = l = 1 Gaussian oracle"
        )
    dim_p, dim_a, dim_b = layout.dims
    if spec.k >= dim_a:
        raise ValueError(f"k={spec.k} exceeds mode-A cutoff {dim_a}")
    if spec.l >= dim_b:
        raise ValueError(f"l={spec.l} exceeds mode-B cutoff {dim_b}")
    adag_k = np.linalg.matrix_power(annihilation(dim_a).T, spec.k)
    bdag_l = np.linalg.matrix_power(annihilation(dim_b).T, spec.l)
    p = annihilation(dim_p)
    up = (
        embed(adag_k, layout.mode_a, layout).data
        @ embed(bdag_l, layout.mode_b, layout).data
        @ embed(p, layout.pump, layout).data
    )
    h = 1j * spec.kappa * (up - up.conj().T)
    return TruncatedOperator(layout, h.tocsr(), hermitian=True)


def build_classical_pump_hamiltonian(spec: InteractionSpec, alpha_p: float) -> TruncatedOperator:
    """Gaussian oracle H = i*kappa*alpha_p*(a+b+ - ab) on a two-mode (A, B) layout.

    Evolving vacuum for time t yields two-mode squeezed vacuum with
    r = kappa * alpha_p * t and <N_A> = sinh(r)^2.
    """
    layout = spec.layout
    if layout.nmodes != 2:
        raise ValueError("classical-pump oracle needs a two-mode (A, B) layout")
    if spec.k != 1 or spec.l != 1:
        raise ValueError("classical-pump oracle is defined for k = l = 1 only")
    dim_a, dim_b = layout.dims
    adag = annihilation(dim_a).T
    bdag = annihilation(dim_b).T
    up = embed(adag, 0, layout).data @ embed(bdag, 1, layout).data
    h = 1j * spec.kappa * alpha_p * (up - up.conj().T)
    return TruncatedOperator(layout, h.tocsr(), hermitian=True)


@dataclass(frozen=True)
class EvolutionConfig:
    """Grid and tolerances for a trajectory.

    xi_grid must be strictly increasing and start at 0; times are
    t_j = xi_j / (kappa * alpha_p).
    """

    xi_grid: tuple[float, ...]
    kappa: float
    alpha_p: float
    tol: float = 1e-9
    max_krylov: int = 48
    norm_tol: float = 1e-8
    mixed_weight_cutoff: float = 1e-12

    def __post_init__(self):
        grid = tuple(float(x) for x in self.xi_grid)
        if len(grid) == 0 or grid[0] != 0.0:
            raise ValueError("xi_grid must start at 0")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("xi_grid must be strictly increasing")
        if self.kappa <= 0 or self.alpha_p <= 0:
            raise ValueError("kappa and alpha_p must be positive")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        object.__setattr__(self, "xi_grid", grid)

    def times(self) -> np.ndarray:
        return np.asarray(self.xi_grid) / (self.kappa * self.alpha_p)


def _lanczos_expmv(h: sparse.csr_matrix, v: np.ndarray, tau: float, tol: float,
                   m_max: int, _depth: int = 0) -> np.ndarray:
    """y = exp(-i tau H) v for Hermitian sparse H, adaptive in subspace size and step."""
    if tau == 0.0:
        return v.copy()
    beta0 = float(np.linalg.norm(v))
    if beta0 == 0.0:
        return v.copy()
    if _depth > 48:
        raise IntegratorError("step bisection exceeded depth 48", residual=np.inf)
    n = v.shape[0]
    mmax = int(min(m_max, n))
    basis = np.empty((mmax + 1, n), dtype=complex)
    alphas = np.empty(mmax)
    betas = np.empty(mmax)
    basis[0] = v / beta0
    for j in range(mmax):
        w = h @ basis[j]
        alpha = float(np.vdot(basis[j], w).real)
        w = w - alpha * basis[j]
        if j > 0:
            w = w - betas[j - 1] * basis[j - 1]
        # one full reorthogonalization pass keeps the basis orthonormal
        coeffs = basis[: j + 1].conj() @ w
        w = w - coeffs @ basis[: j + 1]
        beta = float(np.linalg.norm(w))
        alphas[j] = alpha
        betas[j] = beta
        m = j + 1
        evals, evecs = eigh_tridiagonal(alphas[:m], betas[: m - 1])
        u = evecs @ (np.exp(-1j * tau * evals) * evecs[0])
        happy = beta <= 1e-13 * (abs(alpha) + beta0)
        err = abs(tau) * beta * abs(u[-1]) * beta0
        if happy or err <= tol * beta0:
            return beta0 * (basis[:m].T @ u)
        basis[j + 1] = w / beta
    # subspace exhausted: bisect the step, budgeting half the tolerance to each half
    half = _lanczos_expmv(h, v, tau / 2.0, tol / 2.0, m_max, _depth + 1)
    return _lanczos_expmv(h, half, tau / 2.0, tol / 2.0, m_max, _depth + 1)


def _evolve_vector(vec: np.ndarray, h: sparse.csr_matrix, times: np.ndarray,
                   cfg: EvolutionConfig) -> list[np.ndarray]:
    out = [vec.copy()]
    cur = vec.copy()
    for t0, t1 in zip(times[:-1], times[1:]):
        cur = _lanczos_expmv(h, cur, t1 - t0, cfg.tol, cfg.max_krylov)
        out.append(cur)
    return out


def evolve(state: QuantumState, hamiltonian: TruncatedOperator, config: EvolutionConfig) -> list[QuantumState]:
    """Propagate ``state`` to every xi grid point (the first entry is the input).

    Pure states evolve directly; density matrices are decomposed into their
    eigenbranches, each branch is propagated, and the matrix is reassembled at
    every grid point. Norm/trace deviations beyond config.norm_tol raise; a
    top-two-level population above the truncation guard is attached as a note.
    """
    if hamiltonian.layout.dims != state.layout.dims:
        raise ValueError("state and Hamiltonian live on different layouts")
    h = hamiltonian.data
    times = config.times()
    xi = config.xi_grid

    if state.is_pure:
        vecs = _evolve_vector(state.vector, h, times, config)
        branches = [(1.0, vecs)]
    else:
        evals, evecs = np.linalg.eigh(state.matrix)
        order = np.argsort(evals)[::-1]
        evals, evecs = evals[order], evecs[:, order]
        keep = evals > config.mixed_weight_cutoff * evals[0]
        weights = evals[keep]
        dropped = float(evals[~keep].sum())
        weights = weights / (weights.sum() + dropped) if dropped > 0 else weights
        branches = [
            (float(wt), _evolve_vector(np.ascontiguousarray(evecs[:, i]), h, times, config))
            for i, wt in enumerate(weights)
        ]

    states: list[QuantumState] = []
    for idx, (x, t) in enumerate(zip(xi, times)):
        notes: list[str] = []
        if state.is_pure:
            vec = branches[0][1][idx]
            nrm = float(np.linalg.norm(vec))
            if abs(nrm - 1.0) > config.norm_tol:
                raise IntegratorError(
                    f"norm drifted to {nrm:.12f} at xi={x}", residual=abs(nrm - 1.0)
                )
            new = QuantumState(state.layout, vector=vec, time=float(t))
        else:
            rho = np.zeros((state.layout.total_dim,) * 2, dtype=complex)
            for wt, vecs in branches:
                v = vecs[idx]
                rho += wt * np.outer(v, v.conj())
            tr = float(np.trace(rho).real)
            if abs(tr - 1.0) > max(config.norm_tol, 10 * config.mixed_weight_cutoff):
                raise IntegratorError(f"trace drifted to {tr:.12f} at xi={x}", residual=abs(tr - 1.0))
            rho /= tr
            new = QuantumState(state.layout, matrix=rho, time=float(t))
        pops = top_level_population(new)
        breaches = {m: p for m, p in pops.items() if p > TOP_LEVEL_GUARD}
        if breaches:
            notes.append(
                "truncation guard: top-two-level population "
                + ", ".join(f"mode{m}={p:.2e}" for m, p in sorted(breaches.items()))
            )
        if notes:
            new = QuantumState(new.layout, vector=new.vector, matrix=new.matrix,
                               time=new.time, notes=tuple(notes))
        states.append(new)
    return states
