"""Order-2 Carleman embedding of quadratic-drift Ito SDEs.

A quadratic-drift SDE with constant diffusion and one Brownian channel,

    dx_i = (c_i + L_i . x + x^T Q_i x) dt + g_i dB,

is lifted onto the augmented state xi = (x, distinct pairwise products
of x).  The product dynamics follow from the Ito product rule

    d(x_i x_j) = x_i dx_j + x_j dx_i + g_i g_j dt,

after which every drift monomial of total degree three or more is
deleted.  Diffusion terms are at most linear in x here and survive
truncation untouched, as does the Ito correction g_i*g_j.  The result is
a bilinear SDE on the augmented state:

    d xi = (a0 + a xi) dt + (g + d xi) dB.

`embed_order2` performs this construction for any quadratic SDE;
`build_vandevusse` writes down the same matrices for the van de Vusse
reactor in closed form.  The two must agree entrywise, which is the
central correctness check on both.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .kronecker import MonomialIndexMap, reduced_dim
from .model import ReactorParams


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class QuadraticSde:
    """Coefficient form of a quadratic-drift SDE with constant scalar-channel diffusion.

    drift_i(x) = c[i] + lin[i] @ x + x @ quad[i] @ x, diffusion column g.
    The per-state coefficient matrices ``quad[i]`` are symmetrized on
    construction, so mixed-term coefficients may be supplied either split
    across (j, k) and (k, j) or all on one side.
    """

    c: np.ndarray
    lin: np.ndarray
    quad: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        n = c.shape[0]
        lin = np.asarray(self.lin, dtype=float)
        quad = np.asarray(self.quad, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if lin.shape != (n, n) or quad.shape != (n, n, n) or g.shape != (n,):
            raise ValueError("inconsistent coefficient shapes")
        quad = 0.5 * (quad + quad.transpose(0, 2, 1))
        for name, arr in (("c", c), ("lin", lin), ("quad", quad), ("g", g)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite coefficients in {name}")
            object.__setattr__(self, name, _readonly(arr))

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def drift(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.c + self.lin @ x + np.einsum("ijk,j,k->i", self.quad, x, x)

    @classmethod
    def from_callable(cls, n: int, drift, g) -> "QuadraticSde":
        """Fit coefficients from a drift callable; rejects drift of degree > 2.

        The fit uses exact interpolation on axis and pair points; the
        candidate is then verified on a scaled probe, which any monomial of
        degree three or more fails.
        """
        e = np.eye(n)
        c = np.asarray(drift(np.zeros(n)), dtype=float)
        lin = np.empty((n, n))
        quad = np.zeros((n, n, n))
        fp = [np.asarray(drift(e[i]), dtype=float) for i in range(n)]
        fm = [np.asarray(drift(-e[i]), dtype=float) for i in range(n)]
        for i in range(n):
            lin[:, i] = 0.5 * (fp[i] - fm[i])
            quad[:, i, i] = 0.5 * (fp[i] + fm[i]) - c
        for i in range(n):
            for j in range(i + 1, n):
                fij = np.asarray(drift(e[i] + e[j]), dtype=float)
                mixed = fij - c - lin[:, i] - lin[:, j] - quad[:, i, i] - quad[:, j, j]
                quad[:, i, j] = 0.5 * mixed
                quad[:, j, i] = 0.5 * mixed
        sde = cls(c=c, lin=lin, quad=quad, g=np.asarray(g, dtype=float))
        probe = 1.0 + np.arange(n, dtype=float)
        for s in (1.0, 2.0, -3.0):
            x = s * probe
            fx = np.asarray(drift(x), dtype=float)
            scale = 1.0 + np.abs(fx)
            if np.any(np.abs(fx - sde.drift(x)) > 1e-9 * scale):
                raise ValueError("drift has coefficients of degree > 2; order-2 embedding only")
        return sde


@dataclass(frozen=True)
class BilinearSystem:
    """Augmented bilinear SDE  d xi = (a0 + a xi) dt + (g + d xi) dB.

    ``n`` is the physical dimension; the augmented dimension is
    n + n(n+1)/2.  Block accessors slice the matrices into the physical
    (first n) and product (remaining) coordinates.  ``qw`` is the white
    noise intensity (unit Brownian motion by default).
    """

    n: int
    a0: np.ndarray
    a: np.ndarray
    d: np.ndarray
    g: np.ndarray
    qw: float = 1.0

    def __post_init__(self):
        m = self.dim
        a0 = np.asarray(self.a0, dtype=float)
        a = np.asarray(self.a, dtype=float)
        d = np.asarray(self.d, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if a0.shape != (m,) or a.shape != (m, m) or d.shape != (m, m) or g.shape != (m,):
            raise ValueError(f"matrix shapes inconsistent with augmented dimension {m}")
        for name, arr in (("a0", a0), ("a", a), ("d", d), ("g", g)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entries in {name}")
            object.__setattr__(self, name, _readonly(arr))

    @property
    def dim(self) -> int:
        return self.n + reduced_dim(self.n, 2)

    # Block views: 1 = physical coordinates, 2 = product coordinates.
    @property
    def a01(self) -> np.ndarray:
        return self.a0[: self.n]

    @property
    def a02(self) -> np.ndarray:
        return self.a0[self.n :]

    @property
    def a11(self) -> np.ndarray:
        return self.a[: self.n, : self.n]

    @property
    def a12(self) -> np.ndarray:
        return self.a[: self.n, self.n :]

    @property
    def a21(self) -> np.ndarray:
        return self.a[self.n :, : self.n]

    @property
    def a22(self) -> np.ndarray:
        return self.a[self.n :, self.n :]

    @property
    def d11(self) -> np.ndarray:
        return self.d[: self.n, : self.n]

    @property
    def d12(self) -> np.ndarray:
        return self.d[: self.n, self.n :]

    @property
    def d21(self) -> np.ndarray:
        return self.d[self.n :, : self.n]

    @property
    def d22(self) -> np.ndarray:
        return self.d[self.n :, self.n :]

    @property
    def g1(self) -> np.ndarray:
        return self.g[: self.n]

    @property
    def g2(self) -> np.ndarray:
        return self.g[self.n :]


def embed_order2(sde: QuadraticSde, imap: MonomialIndexMap) -> BilinearSystem:
    """Order-2 Carleman embedding of a quadratic SDE.

    Expands d(x_i x_j) by the Ito product rule, classifies every drift
    monomial by total degree, deletes degree >= 3, and keeps all diffusion
    terms plus the Ito correction g_i*g_j.  `dropped_cubic_terms` lists
    exactly what the truncation removed.
    """
    n = sde.n
    if imap.n != n or imap.order != 2:
        raise ValueError(f"index map must be built for (n={n}, order=2)")
    m2 = len(imap)
    dim = n + m2
    a0 = np.zeros(dim)
    a = np.zeros((dim, dim))
    d = np.zeros((dim, dim))
    g = np.zeros(dim)

    # Physical block: the drift is exactly quadratic, nothing is dropped.
    a0[:n] = sde.c
    a[:n, :n] = sde.lin
    for i in range(n):
        for k, (p, q) in enumerate(imap.pairs):
            a[i, n + k] = sde.quad[i, p, p] if p == q else sde.quad[i, p, q] + sde.quad[i, q, p]
    g[:n] = sde.g

    # Product block: x_i dx_j + x_j dx_i + g_i g_j dt, truncated at degree 2.
    for k, (i, j) in enumerate(imap.pairs):
        row = n + k
        for src, other in ((j, i), (i, j)):
            # x_other * drift_src contributes c deg-1 and L deg-2 terms;
            # the Q deg-3 terms are the truncation residual.
            a[row, other] += sde.c[src]
            for m in range(n):
                a[row, n + imap.position((other, m))] += sde.lin[src, m]
            d[row, other] += sde.g[src]
        a0[row] += sde.g[i] * sde.g[j]

    return BilinearSystem(n=n, a0=a0, a=a, d=d, g=g)


def dropped_cubic_terms(sde: QuadraticSde, imap: MonomialIndexMap) -> dict[int, dict[tuple[int, int, int], float]]:
    """Degree-3 drift monomials deleted by `embed_order2`.

    Maps each product-slot index to {sorted 0-based index triple:
    coefficient}; zero coefficients are omitted.
    """
    n = sde.n
    if imap.n != n or imap.order != 2:
        raise ValueError(f"index map must be built for (n={n}, order=2)")
    dropped: dict[int, dict[tuple[int, int, int], float]] = {k: {} for k in range(len(imap))}
    for k, (i, j) in enumerate(imap.pairs):
        for src, other in ((j, i), (i, j)):
            for p in range(n):
                for q in range(p, n):
                    w = sde.quad[src, p, p] if p == q else sde.quad[src, p, q] + sde.quad[src, q, p]
                    if w != 0.0:
                        key = tuple(sorted((other, p, q)))
                        dropped[k][key] = dropped[k].get(key, 0.0) + w
    return {k: terms for k, terms in dropped.items() if terms}


def vandevusse_coefficients(p: ReactorParams) -> QuadraticSde:
    """Quadratic coefficient form of the van de Vusse reactor drift."""
    c = np.zeros(3)
    lin = np.array(
        [
            [-p.k1, 0.0, p.caf / p.v],
            [p.k1, -p.k2, 0.0],
            [0.0, 0.0, -p.alpha],
        ]
    )
    quad = np.zeros((3, 3, 3))
    quad[0, 0, 0] = -p.k3
    quad[0, 0, 2] = quad[0, 2, 0] = -0.5 / p.v
    quad[1, 1, 2] = quad[1, 2, 1] = -0.5 / p.v
    g = np.array([0.0, 0.0, p.beta])
    return QuadraticSde(c=c, lin=lin, quad=quad, g=g)


def build_vandevusse(p: ReactorParams) -> BilinearSystem:
    """Closed-form order-2 embedding of the van de Vusse reactor.

    Slot order of the product block: x1^2, x1x2, x1x3, x2^2, x2x3, x3^2.
    """
    k1, k2, k3 = p.k1, p.k2, p.k3
    caf, v, alpha, beta = p.caf, p.v, p.alpha, p.beta

    a11 = np.array(
        [
            [-k1, 0.0, caf / v],
            [k1, -k2, 0.0],
            [0.0, 0.0, -alpha],
        ]
    )
    a12 = np.zeros((3, 6))
    a12[0, 0] = -k3
    a12[0, 2] = -1.0 / v
    a12[1, 4] = -1.0 / v
    a22 = np.array(
        [
            [-2.0 * k1, 0.0, 2.0 * (caf / v), 0.0, 0.0, 0.0],
            [k1, -(k1 + k2), 0.0, 0.0, caf / v, 0.0],
            [0.0, 0.0, -(alpha + k1), 0.0, 0.0, caf / v],
            [0.0, 2.0 * k1, 0.0, -2.0 * k2, 0.0, 0.0],
            [0.0, 0.0, k1, 0.0, -(alpha + k2), 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, -2.0 * alpha],
        ]
    )
    d21 = np.zeros((6, 3))
    d21[2, 0] = beta
    d21[4, 1] = beta
    d21[5, 2] = 2.0 * beta

    a0 = np.zeros(9)
    a0[8] = beta * beta
    a = np.block([[a11, a12], [np.zeros((6, 3)), a22]])
    d = np.zeros((9, 9))
    d[3:, :3] = d21
    g = np.zeros(9)
    g[2] = beta
    return BilinearSystem(n=3, a0=a0, a=a, d=d, g=g)


def augmented_drift(sys: BilinearSystem, xi: np.ndarray) -> np.ndarray:
    """Drift of the augmented state: a0 + a @ xi."""
    xi = np.asarray(xi, dtype=float)
    if not np.all(np.isfinite(xi)):
        raise ValueError("augmented state must be finite")
    return sys.a0 + sys.a @ xi


_BLOCK_NAMES = ("a01", "a02", "a11", "a12", "a21", "a22", "d11", "d12", "d21", "d22", "g1", "g2")


def write_blocks(sys: BilinearSystem, out_dir: str) -> list[str]:
    """Dump the nonzero coefficient blocks as plain-text matrices.

    One file per nonzero block, row-major, entries formatted '%.12e' and
    space-separated; vectors become a single row.  Returns the written
    paths.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name in _BLOCK_NAMES:
        block = np.atleast_2d(getattr(sys, name))
        if not np.any(block != 0.0):
            continue
        path = os.path.join(out_dir, f"{name}.txt")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for row in block:
                fh.write(" ".join(f"{x:.12e}" for x in row) + "\n")
        written.append(path)
    return written
