"""Seeded Euler-Maruyama simulation and ensemble moment estimation.

Paths of either the exact nonlinear reactor SDE or its bilinear Carleman
embedding are generated with the Euler-Maruyama scheme

    x[k+1] = x[k] + f(x[k]) dt + g(x[k]) sqrt(dt) z[k],

with z[k] i.i.d. standard normal.  Reproducibility contract:

* normal increments come from numpy's PCG64 generator (ziggurat
  transform), so a given seed yields bit-identical trajectories across
  runs of one build;
* ensemble path i draws from the substream seed
  ``substream_seed(seed, i)``, a SplitMix64 mix that is injective in the
  path index, so substreams never collide;
* ensemble statistics are reduced in fixed chunk order with a pairwise
  mean/M2 merge, so the results do not depend on worker count or
  evaluation order.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .carleman import BilinearSystem
from .kronecker import reduce_square
from .model import ReactorParams, diffusion, drift
from .moments import grid_steps

# Paths per reduction chunk.  Fixed: changing it would change the (still
# deterministic) floating-point reduction order, and worker counts must not.
CHUNK_SIZE = 256

_GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


class SimulationError(RuntimeError):
    """Raised when a simulated path leaves the finite range."""


def substream_seed(seed: int, index: int) -> int:
    """Derive the RNG seed for ensemble path ``index``.

    SplitMix64 finalizer applied to ``seed + (index + 1) * golden`` mod
    2**64.  The pre-mix map is injective in ``index`` (odd multiplier) and
    the finalizer is a bijection, so distinct indices give distinct seeds
    by construction; the finalizer's avalanche decorrelates neighbours.
    """
    if index < 0:
        raise ValueError("path index must be nonnegative")
    z = (seed + (index + 1) * _GOLDEN_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class PathConfig:
    """Grid, seed, and system selector for path simulation."""

    dt: float
    t_end: float
    seed: int
    system: str = "nonlinear"  # or "bilinear"

    def __post_init__(self):
        grid_steps(self.dt, self.t_end)  # validates dt, t_end
        if self.system not in ("nonlinear", "bilinear"):
            raise ValueError(f"unknown system selector {self.system!r}")

    @property
    def n_steps(self) -> int:
        return grid_steps(self.dt, self.t_end)


@dataclass(frozen=True)
class EnsembleStats:
    """Per-component sample mean/variance over an ensemble, on the time grid."""

    n_paths: int
    t: np.ndarray
    mean: np.ndarray  # (n_grid, d)
    var: np.ndarray  # (n_grid, d), unbiased
    stderr: np.ndarray  # sqrt(var / n_paths)


def _dynamics_fns(cfg: PathConfig, dynamics):
    """Return (drift_fn, noise_fn) operating on (..., d) state arrays."""
    if cfg.system == "nonlinear":
        if not isinstance(dynamics, ReactorParams):
            raise TypeError("nonlinear paths need ReactorParams dynamics")
        g = diffusion(dynamics)
        return (lambda x: drift(x, dynamics)), (lambda x: np.broadcast_to(g, x.shape))
    if not isinstance(dynamics, BilinearSystem):
        raise TypeError("bilinear paths need BilinearSystem dynamics")
    sys = dynamics
    return (lambda x: sys.a0 + x @ sys.a.T), (lambda x: sys.g + x @ sys.d.T)


def _initial_state(cfg: PathConfig, x0, dynamics) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    if cfg.system == "nonlinear":
        if x0.shape != (3,):
            raise ValueError("nonlinear initial state must be a 3-vector")
        return x0
    dim = dynamics.dim
    n = dynamics.n
    if x0.shape == (n,):
        return np.concatenate([x0, reduce_square(x0)])
    if x0.shape == (dim,):
        lifted = reduce_square(x0[:n])
        if np.any(np.abs(x0[n:] - lifted) > 1e-12 * (1.0 + np.abs(lifted))):
            raise ValueError("bilinear initial state is inconsistent with its product slots")
        return x0
    raise ValueError(f"initial state must have shape ({n},) or ({dim},)")


def simulate_path(cfg: PathConfig, x0, dynamics, increments: np.ndarray | None = None):
    """Euler-Maruyama trajectory of one path.  Returns (t, X).

    ``dynamics`` is ReactorParams for the nonlinear system or a
    BilinearSystem for the embedded one; a physical 3-vector start is
    lifted onto the product slots automatically.  ``increments``, if
    given, are the standard-normal draws to consume (length n_steps);
    passing the same array to both systems couples them through shared
    noise.  Omitted, they come from the seeded generator.
    """
    x = _initial_state(cfg, x0, dynamics)
    drift_fn, noise_fn = _dynamics_fns(cfg, dynamics)
    n_steps = cfg.n_steps
    if increments is None:
        increments = np.random.Generator(np.random.PCG64(cfg.seed)).standard_normal(n_steps)
    else:
        increments = np.asarray(increments, dtype=float)
        if increments.shape != (n_steps,):
            raise ValueError(f"need {n_steps} increments, got shape {increments.shape}")
    sqdt = np.sqrt(cfg.dt)
    out = np.empty((n_steps + 1, x.size))
    out[0] = x
    for k in range(n_steps):
        x = x + drift_fn(x) * cfg.dt + noise_fn(x) * (sqdt * increments[k])
        if not np.all(np.isfinite(x)):
            raise SimulationError(f"non-finite state at step {k + 1} (t={(k + 1) * cfg.dt:.6g})")
        out[k + 1] = x
    return np.arange(n_steps + 1) * cfg.dt, out


def _chunk_stats(cfg: PathConfig, x0: np.ndarray, dynamics, start: int, count: int):
    """Simulate paths [start, start+count) together; return per-time mean and M2."""
    drift_fn, noise_fn = _dynamics_fns(cfg, dynamics)
    n_steps = cfg.n_steps
    z = np.empty((count, n_steps))
    for i in range(count):
        gen = np.random.Generator(np.random.PCG64(substream_seed(cfg.seed, start + i)))
        z[i] = gen.standard_normal(n_steps)
    sqdt = np.sqrt(cfg.dt)
    x = np.tile(x0, (count, 1))
    d = x0.size
    mean = np.empty((n_steps + 1, d))
    m2 = np.empty((n_steps + 1, d))

    def record(k):
        mu = x.mean(axis=0)
        mean[k] = mu
        m2[k] = ((x - mu) ** 2).sum(axis=0)

    record(0)
    for k in range(n_steps):
        x = x + drift_fn(x) * cfg.dt + noise_fn(x) * (sqdt * z[:, k, None])
        if not np.all(np.isfinite(x)):
            bad = int(np.where(~np.isfinite(x).all(axis=1))[0][0])
            raise SimulationError(
                f"path {start + bad} non-finite at step {k + 1} (t={(k + 1) * cfg.dt:.6g})"
            )
        record(k + 1)
    return count, mean, m2


def _merge_stats(acc, chunk):
    """Pairwise mean/M2 merge (Chan et al.); keeps M2 nonnegative."""
    n_a, mean_a, m2_a = acc
    n_b, mean_b, m2_b = chunk
    n = n_a + n_b
    delta = mean_b - mean_a
    mean = mean_a + delta * (n_b / n)
    m2 = m2_a + m2_b + delta * delta * (n_a * n_b / n)
    return n, mean, m2


def ensemble_moments(cfg: PathConfig, x0, n_paths: int, dynamics, n_workers: int = 1) -> EnsembleStats:
    """Sample mean and unbiased variance over a seeded ensemble.

    Path i uses the substream seed ``substream_seed(cfg.seed, i)``.  Paths
    are simulated in fixed chunks of CHUNK_SIZE and the chunk statistics
    are merged in chunk order, so the result is independent of
    ``n_workers``.
    """
    if n_paths < 2:
        raise ValueError("ensemble needs at least 2 paths")
    x0 = _initial_state(cfg, x0, dynamics)
    starts = list(range(0, n_paths, CHUNK_SIZE))
    jobs = [(s, min(CHUNK_SIZE, n_paths - s)) for s in starts]

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(lambda j: _chunk_stats(cfg, x0, dynamics, *j), jobs))
    else:
        results = [_chunk_stats(cfg, x0, dynamics, *j) for j in jobs]

    acc = results[0]
    for chunk in results[1:]:
        acc = _merge_stats(acc, chunk)
    n, mean, m2 = acc
    assert n == n_paths
    var = m2 / (n_paths - 1)
    t = np.arange(cfg.n_steps + 1) * cfg.dt
    return EnsembleStats(n_paths=n_paths, t=t, mean=mean, var=var, stderr=np.sqrt(var / n_paths))


def em_mean_reference(sys: BilinearSystem, x0, dt: float, t_end: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact expectation of the Euler-Maruyama chain for the bilinear system.

    Because the system is bilinear and the increments are zero-mean and
    independent of the state, the ensemble mean of EM paths follows the
    Euler-discretized mean ODE exactly:

        m[k+1] = m[k] + (a0 + a m[k]) dt.

    This is the bias-free reference for ensemble-mean validation; an ODE
    solution of higher order differs from it by the O(dt) scheme bias,
    which has nothing to do with how the system matrices were assembled.
    """
    cfg = PathConfig(dt=dt, t_end=t_end, seed=0, system="bilinear")
    m = _initial_state(cfg, x0, sys)
    n_steps = cfg.n_steps
    out = np.empty((n_steps + 1, m.size))
    out[0] = m
    for k in range(n_steps):
        m = m + (sys.a0 + sys.a @ m) * dt
        out[k + 1] = m
    return np.arange(n_steps + 1) * dt, out


def simulate_shared_noise(p: ReactorParams, sys: BilinearSystem, x0, dt: float, t_end: float, seed: int):
    """One nonlinear and one bilinear path driven by identical increments.

    Returns (t, x_nonlinear, xi_bilinear).  Shared noise makes the pair
    directly comparable: the remaining gap is the truncation error, not
    realization noise.
    """
    n_steps = grid_steps(dt, t_end)
    z = np.random.Generator(np.random.PCG64(seed)).standard_normal(n_steps)
    t, x_nl = simulate_path(PathConfig(dt=dt, t_end=t_end, seed=seed, system="nonlinear"), x0, p, increments=z)
    _, xi_bl = simulate_path(PathConfig(dt=dt, t_end=t_end, seed=seed, system="bilinear"), x0, sys, increments=z)
    return t, x_nl, xi_bl
