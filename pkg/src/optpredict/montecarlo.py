"""Metropolis sampling of the lattice canonical measure and ensemble truth.

Chains are organised in fixed-size blocks.  Every block owns a PCG64 stream
seeded from ``SeedSequence(seed, spawn_key=(block,))`` and advances its chains
in lock-step, vectorized over the block.  Blocks are independent, so the
result does not depend on how many worker threads process them.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .gaussian import build_prior, condition, quadratic_form
from .kernels import FOURIER, KernelSet, collective_variables
from .lattice import DivergenceError, HamiltonianSpec, rk4_integrate, nls_rhs
from .opsolver import CollectiveTrajectory

__all__ = [
    "SamplerConfig",
    "SampleSet",
    "EnsembleResult",
    "sample_unconditioned",
    "sample_conditioned",
    "ensemble_truth",
    "integrated_autocorrelation",
    "block_rng",
]

ACCEPTANCE_WINDOW = (0.1, 0.9)
MAX_EXCLUDED_FRACTION = 0.01
_ADAPT_EVERY = 20


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs of the Metropolis samplers.

    ``proposal_scale`` is the initial step; with ``adapt=True`` it is tuned
    during burn-in towards ``target_acceptance`` and frozen afterwards.
    ``n_samples`` retained samples are spread over ``n_chains`` chains.
    """

    seed: int = 0
    proposal_scale: float = 0.5
    burn_in: int = 1000
    thinning: int = 10
    n_samples: int = 2000
    n_chains: int = 100
    chains_per_block: int = 10
    target_acceptance: float = 0.4
    adapt: bool = True
    workers: int = 1
    stream: int = 0

    def __post_init__(self):
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.n_chains < 1 or self.chains_per_block < 1:
            raise ValueError("n_chains and chains_per_block must be >= 1")
        if not self.proposal_scale > 0:
            raise ValueError("proposal_scale must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def samples_per_chain(self) -> int:
        return math.ceil(self.n_samples / self.n_chains)

    def blocks(self):
        """``(block_index, first_chain, n_chains_in_block)`` triples."""
        out = []
        for b, start in enumerate(range(0, self.n_chains, self.chains_per_block)):
            out.append((b, start, min(self.chains_per_block, self.n_chains - start)))
        return out


@dataclass(frozen=True, eq=False)
class SampleSet:
    samples: np.ndarray
    chain: np.ndarray
    acceptance_rate: float
    proposal_scales: np.ndarray
    tau_int: float
    warnings: tuple = ()

    def __len__(self):
        return len(self.samples)


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    trajectory: CollectiveTrajectory
    n_samples: int
    acceptance_rate: float
    excluded: int = 0
    sample_set: SampleSet | None = field(default=None, repr=False)


def block_rng(seed: int, block: int, stream: int = 0) -> np.random.Generator:
    """Generator of one chain block; ``stream`` separates independent uses of a seed."""
    key = (block,) if stream == 0 else (stream, block)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def integrated_autocorrelation(series, c: float = 5.0) -> float:
    """Integrated autocorrelation time with Sokal's automatic window.

    ``series`` has shape ``(chains, steps)``; the autocorrelation function is
    averaged over chains.
    """
    x = np.atleast_2d(np.asarray(series, dtype=float))
    m = x.shape[1]
    if m < 4:
        return float("nan")
    x = x - x.mean(axis=1, keepdims=True)
    f = np.fft.rfft(x, n=2 * m, axis=1)
    acf = np.fft.irfft(np.abs(f) ** 2, axis=1)[:, :m].mean(axis=0)
    if acf[0] <= 0:
        return float("nan")
    rho = acf / acf[0]
    tau = 1.0
    for w in range(1, m):
        tau += 2.0 * rho[w]
        if w >= c * tau:
            break
    return float(max(tau, 1.0))


def _adapt(scale, rate, target):
    return float(np.clip(scale * math.exp(rate - target), 1e-6, 1e6))


def _run_blocks(cfg: SamplerConfig, fn):
    blocks = cfg.blocks()
    if cfg.workers == 1:
        return [fn(*b) for b in blocks]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(lambda b: fn(*b), blocks))


def _collect(cfg: SamplerConfig, results):
    """Merge per-block outputs in round-major order and truncate."""
    spc = cfg.samples_per_chain
    chunks = [r[0] for r in results]           # each (spc, B, n)
    labels = [r[1] for r in results]           # each (B,)
    arr = np.concatenate(chunks, axis=1)       # (spc, chains, n)
    chain_ids = np.concatenate(labels)
    samples = arr.reshape(-1, arr.shape[-1])[: cfg.n_samples]
    chain = np.tile(chain_ids, spc)[: cfg.n_samples]
    acc = sum(r[2] for r in results) / max(sum(r[3] for r in results), 1)
    scales = np.array([r[4] for r in results])
    energy = np.concatenate([r[5] for r in results], axis=0)
    tau = integrated_autocorrelation(energy) if energy.size else float("nan")
    warns = []
    lo, hi = ACCEPTANCE_WINDOW
    if not lo < acc < hi:
        warns.append(
            f"acceptance rate {acc:.3f} outside ({lo}, {hi}); proposal_scale is mistuned"
        )
    return SampleSet(samples, chain, float(acc), scales, tau, tuple(warns))


# --------------------------------------------------------------------------
# unconditioned: single-site moves


def _colors(n):
    idx = np.arange(n)
    if n % 2 == 0:
        return [idx[0::2], idx[1::2]]
    return [idx[0:n - 1:2], idx[1:n - 1:2], np.array([n - 1])]


def _site_energy(v, left, right, h, mass_sq, quartic):
    e = (np.abs(v - left) ** 2 + np.abs(right - v) ** 2) / (2.0 * h)
    if mass_sq:
        e = e + 0.5 * h * mass_sq * np.abs(v) ** 2
    if quartic:
        e = e + 0.25 * h * quartic * (v.real**4 + v.imag**4)
    return e


def sample_unconditioned(spec: HamiltonianSpec, cfg: SamplerConfig,
                         init=None) -> SampleSet:
    """Metropolis with single-site complex Gaussian proposals.

    Sites are visited colour by colour (non-neighbouring sites together), which
    is a sequential single-site sweep in a fixed order.
    """
    n = spec.grid.n
    h = spec.grid.h
    T = spec.temperature
    colors = _colors(n)
    spc = cfg.samples_per_chain

    def run(block, first, B):
        rng = block_rng(cfg.seed, block, cfg.stream)
        u = np.zeros((B, n), complex) if init is None else np.tile(np.asarray(init, complex), (B, 1))
        scale = cfg.proposal_scale
        out = np.empty((spc, B, n), complex)
        energies = np.empty((B, spc * cfg.thinning))
        acc = trials = win_acc = win_trials = 0
        total = cfg.burn_in + spc * cfg.thinning
        for sweep in range(total):
            for sites in colors:
                left = u[:, (sites - 1) % n]
                right = u[:, (sites + 1) % n]
                old = u[:, sites]
                step = rng.standard_normal((B, len(sites), 2))
                new = old + scale * (step[..., 0] + 1j * step[..., 1])
                dE = (_site_energy(new, left, right, h, spec.mass_sq, spec.quartic)
                      - _site_energy(old, left, right, h, spec.mass_sq, spec.quartic))
                accept = rng.random((B, len(sites))) < np.exp(-np.minimum(dE, 700.0) / T)
                u[:, sites] = np.where(accept, new, old)
                na = int(accept.sum())
                if sweep < cfg.burn_in:
                    win_acc += na
                    win_trials += accept.size
                else:
                    acc += na
                    trials += accept.size
            if sweep < cfg.burn_in:
                if cfg.adapt and (sweep + 1) % _ADAPT_EVERY == 0:
                    scale = _adapt(scale, win_acc / win_trials, cfg.target_acceptance)
                    win_acc = win_trials = 0
                continue
            k = sweep - cfg.burn_in
            energies[:, k] = spec.energy(u)
            if (k + 1) % cfg.thinning == 0:
                out[(k + 1) // cfg.thinning - 1] = u
        return out, np.arange(first, first + B), acc, trials, scale, energies

    return _collect(cfg, _run_blocks(cfg, run))


# --------------------------------------------------------------------------
# conditioned: moves inside the null space of G


@dataclass(frozen=True, eq=False)
class _NullSpaceMoves:
    directions: np.ndarray   # (n, m) orthonormal, spans null(G)
    widths: np.ndarray       # (m,) Gaussian reference widths sqrt(T / e_k)
    A_dirs: np.ndarray       # (n, m) quadratic part applied to directions
    curv: np.ndarray         # (m,) d^H A d
    start: np.ndarray        # (n,) point satisfying the constraints
    pinv: np.ndarray         # (n, N) G^H (G G^H)^{-1}


def _null_space_moves(spec: HamiltonianSpec, kernels: KernelSet, V) -> _NullSpaceMoves:
    grid = spec.grid
    n = grid.n
    G = kernels.G
    V = np.asarray(V, dtype=complex)
    B = scipy.linalg.null_space(G) if kernels.N else np.eye(n, dtype=complex)
    if B.shape[1] != n - kernels.N:
        raise ValueError("kernel matrix is rank deficient")
    # reference curvature used to precondition the proposals
    m_ref = math.sqrt(spec.mass_sq + spec.quartic)
    Kref = quadratic_form(grid, m_ref)
    e, W = np.linalg.eigh(B.conj().T @ Kref @ B)
    D = B @ W
    A = quadratic_form(grid, math.sqrt(spec.mass_sq)) if spec.mass_sq else quadratic_form(grid, 0.0)
    A_dirs = A @ D
    curv = np.real(np.sum(D.conj() * A_dirs, axis=0))
    if kernels.N:
        start = condition(build_prior(grid, m_ref, spec.temperature), kernels, V).mean
        pinv = G.conj().T @ np.linalg.inv(G @ G.conj().T)
    else:
        start = np.zeros(n, complex)
        pinv = np.zeros((n, 0), complex)
    return _NullSpaceMoves(D, np.sqrt(spec.temperature / e), A_dirs, curv, start, pinv)


def sample_conditioned(spec: HamiltonianSpec, kernels: KernelSet, V,
                       cfg: SamplerConfig) -> SampleSet:
    """Sample ``exp(-H/T)`` restricted to the affine subspace ``G u = V``.

    Proposals move along an orthonormal basis of the null space of ``G``
    (one complex amplitude per move), scaled by the Gaussian reference width
    of that direction, so every state satisfies the conditions.
    """
    if kernels.grid.n != spec.grid.n:
        raise ValueError("kernel and Hamiltonian grids differ")
    V = np.asarray(V, dtype=complex)
    if V.shape != (kernels.N,):
        raise ValueError(f"V must have shape ({kernels.N},)")
    moves = _null_space_moves(spec, kernels, V)
    G = kernels.G
    h = spec.grid.h
    T = spec.temperature
    lam = spec.quartic
    m = moves.directions.shape[1]
    spc = cfg.samples_per_chain

    def run(block, first, B):
        rng = block_rng(cfg.seed, block, cfg.stream)
        u = np.tile(moves.start, (B, 1))
        scale = cfg.proposal_scale
        out = np.empty((spc, B, spec.grid.n), complex)
        energies = np.empty((B, spc * cfg.thinning))
        acc = trials = win_acc = win_trials = 0
        total = cfg.burn_in + spc * cfg.thinning
        for sweep in range(total):
            steps = rng.standard_normal((m, B, 2))
            unif = rng.random((m, B))
            n_acc = 0
            for k in range(m):
                d = moves.directions[:, k]
                zeta = (scale * moves.widths[k]) * (steps[k, :, 0] + 1j * steps[k, :, 1])
                dAu = u @ moves.A_dirs[:, k].conj()
                dE = np.real(np.conj(zeta) * dAu) + 0.5 * np.abs(zeta) ** 2 * moves.curv[k]
                new = u + zeta[:, None] * d[None, :]
                if lam:
                    dE = dE + 0.25 * h * lam * np.sum(
                        new.real**4 + new.imag**4 - u.real**4 - u.imag**4, axis=1)
                accept = unif[k] < np.exp(-np.minimum(dE, 700.0) / T)
                u = np.where(accept[:, None], new, u)
                n_acc += int(accept.sum())
            if kernels.N:
                u = u - (u @ G.T - V) @ moves.pinv.T
            if sweep < cfg.burn_in:
                win_acc += n_acc
                win_trials += m * B
                if cfg.adapt and (sweep + 1) % _ADAPT_EVERY == 0:
                    scale = _adapt(scale, win_acc / win_trials, cfg.target_acceptance)
                    win_acc = win_trials = 0
                continue
            acc += n_acc
            trials += m * B
            k2 = sweep - cfg.burn_in
            energies[:, k2] = spec.energy(u)
            if (k2 + 1) % cfg.thinning == 0:
                out[(k2 + 1) // cfg.thinning - 1] = u
        return out, np.arange(first, first + B), acc, trials, scale, energies

    return _collect(cfg, _run_blocks(cfg, run))


# --------------------------------------------------------------------------
# ensemble truth


def _group_stderr(x, chain):
    """Standard error of the mean of ``x`` (axis 0) from per-chain means."""
    labels = np.unique(chain)
    if len(labels) < 2:
        return x.std(axis=0, ddof=1) / math.sqrt(len(x)) if len(x) > 1 else np.zeros(x.shape[1:])
    means = np.array([x[chain == c].mean(axis=0) for c in labels])
    return means.std(axis=0, ddof=1) / math.sqrt(len(labels))


def ensemble_truth(spec: HamiltonianSpec, kernels: KernelSet, V0, cfg: SamplerConfig,
                   dt: float = 1e-3, t_end: float = 1.0, stride: int = 10,
                   members_per_task: int = 250, samples: SampleSet | None = None) -> EnsembleResult:
    """Average collective variables over integrated conditioned samples.

    For Gaussian-bump kernels ``V0`` is the complex vector ``V^q + i V^p`` and
    the trajectory is returned in the real ``(V^p, V^q)`` layout.
    """
    ss = samples if samples is not None else sample_conditioned(spec, kernels, V0, cfg)
    u0 = ss.samples
    S = len(u0)
    chunks = [u0[i:i + members_per_task] for i in range(0, S, members_per_task)]

    def run(chunk):
        times, states, bad = rk4_integrate(nls_rhs, chunk, dt, t_end, stride, mask_rows=True)
        return times, collective_variables(kernels, states), bad

    if cfg.workers == 1:
        parts = [run(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(run, chunks))
    times = parts[0][0]
    Vt = np.concatenate([p[1] for p in parts], axis=1)   # (T, S, N)
    bad = np.concatenate([p[2] for p in parts])
    excluded = int(bad.sum())
    if excluded > MAX_EXCLUDED_FRACTION * S:
        raise DivergenceError(
            f"{excluded} of {S} ensemble members diverged; reduce dt"
        )
    keep = ~bad
    Vt = Vt[:, keep]
    chain = ss.chain[keep]
    if kernels.family == FOURIER or not kernels.is_real:
        mean = Vt.mean(axis=1)
        re = np.stack([_group_stderr(v.real, chain) for v in Vt])
        im = np.stack([_group_stderr(v.imag, chain) for v in Vt])
        stderr = re + 1j * im
    else:
        pq = np.concatenate([Vt.imag, Vt.real], axis=2)          # (T, S, 2N)
        mean = pq.mean(axis=1)
        stderr = np.stack([_group_stderr(v, chain) for v in pq])
    traj = CollectiveTrajectory(times, mean, "ensemble", stderr)
    return EnsembleResult(traj, int(keep.sum()), ss.acceptance_rate, excluded, ss)
