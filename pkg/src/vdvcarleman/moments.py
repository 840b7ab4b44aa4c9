"""Conditional moment propagation for the reactor and its bilinear embedding.

Two formulations are implemented:

* the physical path: nine coupled ODEs for the 3-vector mean and the six
  distinct covariance entries of (C_A, C_B, F_r).  This is the reporting
  path; all variance tables and error curves come from it.
* the augmented path: mean and covariance of the full 9-dim bilinear
  state, propagated in partitioned matrix form.  It exists for
  cross-validation of the assembled system matrices.

The two MEAN systems are the same linear ODE written in different
coordinates; `crosscheck_mean_paths` integrates both and reports the
maximum discrepancy, which should sit at integrator-noise level.  The two
COVARIANCE notions differ by construction (the augmented covariance
treats each product slot as an independent coordinate); their gap is
measured by `covariance_notion_gap` and logged, never reconciled.

Covariances are symmetrized after every integrator step.  No
positive-semidefiniteness repair is applied: order-2 truncation can
legitimately drive the physical covariance indefinite, and that behaviour
must stay observable.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .carleman import BilinearSystem
from .kronecker import MonomialIndexMap
from .model import ReactorParams

logger = logging.getLogger(__name__)

# Canonical order of the distinct covariance entries of a 3-state system.
PAIRS = MonomialIndexMap(3, 2).pairs

GRID_TOL = 1e-9


class IntegrationError(RuntimeError):
    """Raised when an integration produces a non-finite state."""


def grid_steps(dt: float, t_end: float) -> int:
    """Number of fixed steps covering [0, t_end]; t_end must sit on the grid."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if t_end < 0.0:
        raise ValueError("t_end must be nonnegative")
    n = round(t_end / dt)
    if abs(n * dt - t_end) > GRID_TOL:
        raise ValueError(f"t_end={t_end} is not a multiple of dt={dt}")
    return n


def grid_index(dt: float, time: float) -> int:
    """Exact grid lookup: index of ``time`` on the dt-grid, no interpolation."""
    k = round(time / dt)
    if k < 0 or abs(k * dt - time) > GRID_TOL:
        raise ValueError(f"time {time} is not on the dt={dt} grid")
    return k


def integrate(rhs, y0: np.ndarray, dt: float, t_end: float, post_step=None) -> tuple[np.ndarray, np.ndarray]:
    """Classical fixed-step RK4 on a uniform grid.

    Returns (t, Y) with Y[k] the state at t[k]; Y[0] is y0.  ``post_step``
    (if given) is applied to the raw state after every step, e.g. to
    re-symmetrize a covariance block.  Aborts with `IntegrationError` at
    the first non-finite state.
    """
    n = grid_steps(dt, t_end)
    y = np.array(y0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise IntegrationError("non-finite initial state")
    out = np.empty((n + 1, y.size))
    out[0] = y
    sixth = dt / 6.0
    half = 0.5 * dt
    for k in range(n):
        k1 = rhs(y)
        k2 = rhs(y + half * k1)
        k3 = rhs(y + half * k2)
        k4 = rhs(y + dt * k3)
        y = y + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if post_step is not None:
            y = post_step(y)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"non-finite state at t={(k + 1) * dt:.6g}")
        out[k + 1] = y
    return np.arange(n + 1) * dt, out


@dataclass(frozen=True)
class MomentSeries:
    """Mean/covariance trajectory on a uniform time grid."""

    dt: float
    t: np.ndarray
    mean: np.ndarray  # (n_grid, d)
    cov: np.ndarray  # (n_grid, d, d)

    def at_time(self, time: float) -> tuple[np.ndarray, np.ndarray]:
        k = grid_index(self.dt, time)
        if k >= self.t.size:
            raise ValueError(f"time {time} beyond integration horizon {self.t[-1]}")
        return self.mean[k], self.cov[k]


def _pack_cov(cov: np.ndarray) -> np.ndarray:
    return np.array([cov[i, j] for (i, j) in PAIRS])


def _unpack_cov(packed: np.ndarray) -> np.ndarray:
    cov = np.empty((3, 3))
    for k, (i, j) in enumerate(PAIRS):
        cov[i, j] = packed[k]
        cov[j, i] = packed[k]
    return cov


@dataclass(frozen=True)
class PhysicalMoments:
    """Mean and covariance of (C_A, C_B, F_r); six distinct covariance entries stored."""

    mean: np.ndarray
    cov_packed: np.ndarray  # order: P11, P12, P13, P22, P23, P33

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        packed = np.asarray(self.cov_packed, dtype=float)
        if mean.shape != (3,) or packed.shape != (6,):
            raise ValueError("PhysicalMoments needs a 3-vector mean and 6 covariance entries")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(packed))):
            raise ValueError("moments must be finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov_packed", packed)

    @property
    def cov(self) -> np.ndarray:
        return _unpack_cov(self.cov_packed)

    @classmethod
    def from_mean_cov(cls, mean, cov) -> "PhysicalMoments":
        cov = np.asarray(cov, dtype=float)
        cov = 0.5 * (cov + cov.T)
        return cls(mean=np.asarray(mean, dtype=float), cov_packed=_pack_cov(cov))


def _physical_rhs_flat(y: np.ndarray, p: ReactorParams) -> np.ndarray:
    m1, m2, m3, p11, p12, p13, p22, p23, p33 = y.tolist()
    k1, k2, k3 = p.k1, p.k2, p.k3
    caf, v, a, b = p.caf, p.v, p.alpha, p.beta

    dm1 = -k1 * m1 + (caf / v) * m3 - k3 * p11 - k3 * m1 * m1 - p13 / v - m1 * m3 / v
    dm2 = k1 * m1 - k2 * m2 - p23 / v - m2 * m3 / v
    dm3 = -a * m3
    # Covariance rates; the m-only products are the order-2 truncation residual.
    dp11 = (-2.0 * k1 * p11 + (2.0 * caf / v) * p13 + 2.0 * k3 * m1 * p11
            + 2.0 * k3 * m1 ** 3 + (2.0 / v) * m1 * p13 + (2.0 / v) * m1 * m1 * m3)
    dp12 = (k1 * p11 + k3 * m2 * p11 - (k1 + k2) * p12 + m2 * p13 / v
            + (caf / v) * p23 + m1 * p23 / v + k3 * m1 * m1 * m2 + 2.0 * m1 * m2 * m3 / v)
    dp13 = (-(a + k1) * p13 + (caf / v) * p33 + k3 * m3 * p11
            + k3 * m1 * m1 * m3 + m3 * p13 / v + m1 * m3 * m3 / v)
    dp22 = 2.0 * k1 * p12 - 2.0 * k2 * p22 + (2.0 / v) * m2 * p23 + (2.0 / v) * m2 * m2 * m3
    dp23 = k1 * p13 - (a + k2) * p23 + m3 * p23 / v + m2 * m3 * m3 / v
    dp33 = b * b - 2.0 * a * p33
    return np.array([dm1, dm2, dm3, dp11, dp12, dp13, dp22, dp23, dp33])


def physical_rhs(m: PhysicalMoments, p: ReactorParams) -> PhysicalMoments:
    """Time derivative of the physical moments (returned in the same container)."""
    y = np.concatenate([m.mean, m.cov_packed])
    dy = _physical_rhs_flat(y, p)
    return PhysicalMoments(mean=dy[:3], cov_packed=dy[3:])


def integrate_physical(p: ReactorParams, m0: PhysicalMoments, dt: float, t_end: float) -> MomentSeries:
    """Propagate the physical moment ODEs with fixed-step RK4."""
    y0 = np.concatenate([m0.mean, m0.cov_packed])
    t, ys = integrate(lambda y: _physical_rhs_flat(y, p), y0, dt, t_end)
    mean = ys[:, :3]
    cov = np.empty((t.size, 3, 3))
    for k, (i, j) in enumerate(PAIRS):
        cov[:, i, j] = ys[:, 3 + k]
        cov[:, j, i] = ys[:, 3 + k]
    return MomentSeries(dt=dt, t=t, mean=mean, cov=cov)


@dataclass(frozen=True)
class AugmentedMoments:
    """Mean and covariance of the 9-dim augmented state."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError("inconsistent augmented moment shapes")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("moments must be finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", 0.5 * (cov + cov.T))

    @classmethod
    def from_physical(cls, phys: PhysicalMoments) -> "AugmentedMoments":
        """Lift physical moments to the augmented state under Gaussian closure.

        The product-slot means are the exact second moments
        E[x_i x_j] = P_ij + m_i m_j.  Product-slot covariances use the
        Isserlis identities for jointly Gaussian states:

            Cov(x_k, x_i x_j)       = m_i P_kj + m_j P_ki
            Cov(x_i x_j, x_k x_l)   = P_ik P_jl + P_il P_jk
                                      + m_i m_k P_jl + m_i m_l P_jk
                                      + m_j m_k P_il + m_j m_l P_ik
        """
        m = phys.mean
        P = phys.cov
        second = P + np.outer(m, m)
        mean = np.concatenate([m, np.array([second[i, j] for (i, j) in PAIRS])])

        n2 = len(PAIRS)
        cov = np.zeros((3 + n2, 3 + n2))
        cov[:3, :3] = P
        for b, (i, j) in enumerate(PAIRS):
            for k in range(3):
                c = m[i] * P[k, j] + m[j] * P[k, i]
                cov[k, 3 + b] = c
                cov[3 + b, k] = c
        for a, (i, j) in enumerate(PAIRS):
            for b, (k, l) in enumerate(PAIRS):
                cov[3 + a, 3 + b] = (P[i, k] * P[j, l] + P[i, l] * P[j, k]
                                     + m[i] * m[k] * P[j, l] + m[i] * m[l] * P[j, k]
                                     + m[j] * m[k] * P[i, l] + m[j] * m[l] * P[i, k])
        return cls(mean=mean, cov=cov)


def augmented_mean_rhs(sys: BilinearSystem, mean: np.ndarray) -> np.ndarray:
    """Mean dynamics of the bilinear state: a0 + a @ mean (exact, no closure)."""
    return sys.a0 + sys.a @ mean


def _augmented_cov_rhs(sys: BilinearSystem, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Covariance dynamics of the bilinear state, full-matrix form.

    dP = P a^T + a P + qw * (g g^T + (d mean) g^T + g (d mean)^T
                             + d P d^T + (d mean)(d mean)^T)
    """
    ap = sys.a @ cov
    u = sys.d @ mean
    diff = (np.outer(sys.g, sys.g) + np.outer(u, sys.g) + np.outer(sys.g, u)
            + sys.d @ cov @ sys.d.T + np.outer(u, u))
    return ap + ap.T + sys.qw * diff


def augmented_rhs(m: AugmentedMoments, sys: BilinearSystem) -> AugmentedMoments:
    """Time derivative of the augmented moments (same container)."""
    return AugmentedMoments(
        mean=augmented_mean_rhs(sys, m.mean),
        cov=_augmented_cov_rhs(sys, m.mean, m.cov),
    )


def augmented_cov_rhs_blocks(sys: BilinearSystem, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Covariance dynamics assembled block by block.

    Writes out the four partitioned blocks of the full-matrix form, with
    the physical (x) and product (y) coordinates kept separate.  Exists as
    an independent cross-check of `_augmented_cov_rhs`; the two must agree
    to machine precision on any state.
    """
    n = sys.n
    x, y = mean[:n], mean[n:]
    pxx, pxy = cov[:n, :n], cov[:n, n:]
    pyx, pyy = cov[n:, :n], cov[n:, n:]
    a11, a12, a21, a22 = sys.a11, sys.a12, sys.a21, sys.a22
    d11, d12, d21, d22 = sys.d11, sys.d12, sys.d21, sys.d22
    g1, g2 = sys.g1, sys.g2
    qw = sys.qw

    xx, xy = np.outer(x, x), np.outer(x, y)
    yx, yy = np.outer(y, x), np.outer(y, y)

    dxx = (pxx @ a11.T + pxy @ a12.T + a11 @ pxx + a12 @ pyx
           + qw * (np.outer(g1, g1)
                   + np.outer(d11 @ x, g1) + np.outer(d12 @ y, g1)
                   + np.outer(g1, d11 @ x) + np.outer(g1, d12 @ y)
                   + d11 @ (pxx @ d11.T + pxy @ d12.T) + d12 @ (pyx @ d11.T + pyy @ d12.T)
                   + d11 @ (xx @ d11.T + xy @ d12.T) + d12 @ (yx @ d11.T + yy @ d12.T)))
    dxy = (pxx @ a21.T + pxy @ a22.T + a11 @ pxy + a12 @ pyy
           + qw * (np.outer(g1, g2)
                   + np.outer(d11 @ x, g2) + np.outer(d12 @ y, g2)
                   + np.outer(g1, d21 @ x) + np.outer(g1, d22 @ y)
                   + d11 @ (pxx @ d21.T + pxy @ d22.T) + d12 @ (pyx @ d21.T + pyy @ d22.T)
                   + d11 @ (xx @ d21.T + xy @ d22.T) + d12 @ (yx @ d21.T + yy @ d22.T)))
    dyx = (pyx @ a11.T + pyy @ a12.T + a21 @ pxx + a22 @ pyx
           + qw * (np.outer(g2, g1)
                   + np.outer(d21 @ x, g1) + np.outer(d22 @ y, g1)
                   + np.outer(g2, d11 @ x) + np.outer(g2, d12 @ y)
                   + d21 @ (pxx @ d11.T + pxy @ d12.T) + d22 @ (pyx @ d11.T + pyy @ d12.T)
                   + d21 @ (xx @ d11.T + xy @ d12.T) + d22 @ (yx @ d11.T + yy @ d12.T)))
    dyy = (pyx @ a21.T + pyy @ a22.T + a21 @ pxy + a22 @ pyy
           + qw * (np.outer(g2, g2)
                   + np.outer(d21 @ x, g2) + np.outer(d22 @ y, g2)
                   + np.outer(g2, d21 @ x) + np.outer(g2, d22 @ y)
                   + d21 @ (pxx @ d21.T + pxy @ d22.T) + d22 @ (pyx @ d21.T + pyy @ d22.T)
                   + d21 @ (xx @ d21.T + xy @ d22.T) + d22 @ (yx @ d21.T + yy @ d22.T)))
    return np.block([[dxx, dxy], [dyx, dyy]])


def integrate_augmented(sys: BilinearSystem, m0: AugmentedMoments, dt: float, t_end: float) -> MomentSeries:
    """Propagate augmented mean and covariance with fixed-step RK4."""
    dim = sys.dim
    if m0.mean.size != dim:
        raise ValueError(f"initial moments have dimension {m0.mean.size}, system has {dim}")
    y0 = np.concatenate([m0.mean, m0.cov.ravel()])

    def rhs(y):
        mean = y[:dim]
        cov = y[dim:].reshape(dim, dim)
        return np.concatenate([augmented_mean_rhs(sys, mean), _augmented_cov_rhs(sys, mean, cov).ravel()])

    def symmetrize(y):
        cov = y[dim:].reshape(dim, dim)
        y[dim:] = (0.5 * (cov + cov.T)).ravel()
        return y

    t, ys = integrate(rhs, y0, dt, t_end, post_step=symmetrize)
    return MomentSeries(dt=dt, t=t, mean=ys[:, :dim], cov=ys[:, dim:].reshape(t.size, dim, dim))


@dataclass(frozen=True)
class CrosscheckReport:
    """Outcome of the two-coordinate mean-path comparison."""

    max_discrepancy: float
    t_at_max: float
    max_mean_discrepancy: float
    max_cov_discrepancy: float


def crosscheck_mean_paths(
    sys: BilinearSystem,
    p: ReactorParams,
    m0: PhysicalMoments,
    dt: float,
    t_end: float,
    augmented_mean0: np.ndarray | None = None,
) -> CrosscheckReport:
    """Integrate the mean system in both coordinate sets and compare.

    The physical path propagates (mean, covariance); the augmented path
    propagates the bilinear mean (physical mean, second moments).  The two
    are the same ODE, so after mapping second moments back to covariances
    (P_ij = s_ij - m_i m_j) the trajectories must coincide up to
    integrator round-off.
    """
    second = m0.cov + np.outer(m0.mean, m0.mean)
    consistent = np.concatenate([m0.mean, np.array([second[i, j] for (i, j) in PAIRS])])
    if augmented_mean0 is None:
        augmented_mean0 = consistent
    else:
        augmented_mean0 = np.asarray(augmented_mean0, dtype=float)
        scale = 1.0 + np.abs(consistent)
        if np.any(np.abs(augmented_mean0 - consistent) > 1e-9 * scale):
            raise ValueError("augmented mean is inconsistent with the physical moments "
                             "(second block must equal cov + mean outer mean)")

    t, aug = integrate(lambda y: augmented_mean_rhs(sys, y), augmented_mean0, dt, t_end)
    phys = integrate_physical(p, m0, dt, t_end)

    mean_diff = np.abs(phys.mean - aug[:, :3])
    implied = np.empty((t.size, len(PAIRS)))
    for k, (i, j) in enumerate(PAIRS):
        implied[:, k] = aug[:, 3 + k] - aug[:, i] * aug[:, j]
    phys_packed = np.stack([phys.cov[:, i, j] for (i, j) in PAIRS], axis=1)
    cov_diff = np.abs(phys_packed - implied)

    per_t = np.maximum(mean_diff.max(axis=1), cov_diff.max(axis=1))
    k_max = int(np.argmax(per_t))
    return CrosscheckReport(
        max_discrepancy=float(per_t[k_max]),
        t_at_max=float(t[k_max]),
        max_mean_discrepancy=float(mean_diff.max()),
        max_cov_discrepancy=float(cov_diff.max()),
    )


def covariance_notion_gap(
    sys: BilinearSystem, p: ReactorParams, m0: PhysicalMoments, dt: float, t_end: float
) -> float:
    """Max |physical covariance - augmented-path physical block| over the grid.

    The two covariance notions are genuinely different objects; the gap is
    informational and is logged, not asserted.
    """
    phys = integrate_physical(p, m0, dt, t_end)
    aug = integrate_augmented(sys, AugmentedMoments.from_physical(m0), dt, t_end)
    gap = float(np.abs(phys.cov - aug.cov[:, :3, :3]).max())
    logger.info("covariance notion gap over [0, %g]: %.6g", t_end, gap)
    return gap


def ou_mean(x0: float, alpha: float, t: np.ndarray) -> np.ndarray:
    """Exact OU mean: x0 * exp(-alpha t)."""
    return x0 * np.exp(-alpha * np.asarray(t, dtype=float))


def ou_variance(p0: float, alpha: float, beta: float, t: np.ndarray) -> np.ndarray:
    """Exact OU variance: b2/(2a) + (p0 - b2/(2a)) exp(-2 a t)."""
    pinf = beta * beta / (2.0 * alpha)
    return pinf + (p0 - pinf) * np.exp(-2.0 * alpha * np.asarray(t, dtype=float))
