import numpy as np
import pytest

from vdvcarleman.carleman import (
    BilinearSystem,
    QuadraticSde,
    augmented_drift,
    build_vandevusse,
    dropped_cubic_terms,
    embed_order2,
    vandevusse_coefficients,
    write_blocks,
)
from vdvcarleman.kronecker import MonomialIndexMap, reduce_square
from vdvcarleman.model import PARAM_SET1, PARAM_SET2, X0_SET1, drift

IMAP3 = MonomialIndexMap(3, 2)


def test_quadratic_sde_reproduces_model_drift():
    rng = np.random.default_rng(4)
    for p in (PARAM_SET1, PARAM_SET2):
        sde = vandevusse_coefficients(p)
        for _ in range(20):
            x = rng.normal(scale=2.0, size=3)
            assert np.allclose(sde.drift(x), drift(x, p), rtol=1e-12, atol=1e-300)


def test_from_callable_recovers_coefficients():
    p = PARAM_SET1
    fitted = QuadraticSde.from_callable(3, lambda x: drift(x, p), [0.0, 0.0, p.beta])
    ref = vandevusse_coefficients(p)
    for name in ("c", "lin", "quad", "g"):
        assert np.allclose(getattr(fitted, name), getattr(ref, name), atol=1e-12)


def test_from_callable_rejects_cubic_drift():
    with pytest.raises(ValueError, match="degree > 2"):
        QuadraticSde.from_callable(2, lambda x: np.array([x[0] ** 3, x[1]]), [0.0, 0.0])


def test_embedding_equals_closed_form_exactly():
    for p in (PARAM_SET1, PARAM_SET2):
        built = build_vandevusse(p)
        embedded = embed_order2(vandevusse_coefficients(p), IMAP3)
        for f in ("a0", "a", "d", "g"):
            assert np.array_equal(getattr(built, f), getattr(embedded, f)), f
        assert built.n == embedded.n == 3
        assert built.dim == 9


def test_scalar_ou_embedding_coefficients():
    alpha, beta = 0.1, 0.044
    sys = embed_order2(
        QuadraticSde(c=[0.0], lin=[[-alpha]], quad=[[[0.0]]], g=[beta]),
        MonomialIndexMap(1, 2),
    )
    # x-block keeps the OU drift; the square slot gets -2a, the Ito
    # correction b^2, and multiplicative noise 2b.
    assert sys.a[0, 0] == -alpha
    assert sys.a[1, 1] == -2.0 * alpha
    assert sys.a0[1] == beta * beta
    assert sys.d[1, 0] == 2.0 * beta
    assert sys.g[0] == beta
    assert sys.a[1, 0] == 0.0 and sys.a0[0] == 0.0


def test_zero_noise_embedding_has_no_noise_terms():
    sde = vandevusse_coefficients(PARAM_SET1)
    quiet = QuadraticSde(c=sde.c, lin=sde.lin, quad=sde.quad, g=np.zeros(3))
    sys = embed_order2(quiet, IMAP3)
    assert not np.any(sys.d)
    assert not np.any(sys.g)
    assert not np.any(sys.a0[3:])


def test_embed_rejects_mismatched_map():
    sde = vandevusse_coefficients(PARAM_SET1)
    with pytest.raises(ValueError):
        embed_order2(sde, MonomialIndexMap(2, 2))
    with pytest.raises(ValueError):
        embed_order2(sde, MonomialIndexMap(3, 3))


def test_vandevusse_zero_blocks():
    for p in (PARAM_SET1, PARAM_SET2):
        sys = build_vandevusse(p)
        assert sys.a21.shape == (6, 3) and not np.any(sys.a21)
        for name in ("d11", "d12", "d22"):
            assert not np.any(getattr(sys, name)), name
        assert not np.any(sys.g2)
        assert np.array_equal(sys.a01, np.zeros(3))
        expected_a02 = np.zeros(6)
        expected_a02[5] = p.beta * p.beta
        assert np.array_equal(sys.a02, expected_a02)


def test_vandevusse_block_entries():
    p = PARAM_SET1
    sys = build_vandevusse(p)
    assert sys.a11[0, 2] == p.caf / p.v == 0.00027
    assert sys.a12[0, 0] == -p.k3
    assert sys.a12[0, 2] == sys.a12[1, 4] == -0.1
    assert sys.a22[1, 1] == -(p.k1 + p.k2)
    d21 = sys.d21
    assert d21[2, 0] == p.beta and d21[4, 1] == p.beta and d21[5, 2] == 2 * p.beta
    assert np.count_nonzero(d21) == 3
    assert np.isclose(sys.a0[8], 0.001936, rtol=1e-12)


def test_dropped_cubic_terms_match_hand_derivation():
    p = PARAM_SET1
    dropped = dropped_cubic_terms(vandevusse_coefficients(p), IMAP3)
    k3, v = p.k3, p.v
    # Slot order: x1^2, x1x2, x1x3, x2^2, x2x3, x3^2 (0-based triples).
    expected = {
        0: {(0, 0, 0): -2 * k3, (0, 0, 2): -2 / v},
        1: {(0, 0, 1): -k3, (0, 1, 2): -2 / v},
        2: {(0, 0, 2): -k3, (0, 2, 2): -1 / v},
        3: {(1, 1, 2): -2 / v},
        4: {(1, 2, 2): -1 / v},
    }
    assert set(dropped) == set(expected)  # the x3^2 slot drops nothing
    for slot, terms in expected.items():
        assert set(dropped[slot]) == set(terms)
        for mono, coeff in terms.items():
            assert np.isclose(dropped[slot][mono], coeff, rtol=1e-12)


def test_embedding_matches_truncated_product_rates_on_random_sdes():
    # Independent oracle: for slot (i, j) the truncated rate is
    #   c_j x_i + c_i x_j + x_i (L_j . x) + x_j (L_i . x) + g_i g_j
    # (the quadratic drift parts of the product rule are degree 3 and
    # dropped), and the noise coefficient is g_j x_i + g_i x_j.  Written
    # directly from those definitions, it exercises none of the builder's
    # slot bookkeeping.
    rng = np.random.default_rng(11)
    for n in (2, 3, 4):
        imap = MonomialIndexMap(n, 2)
        for _ in range(5):
            quad = rng.normal(size=(n, n, n))
            sde = QuadraticSde(
                c=rng.normal(size=n), lin=rng.normal(size=(n, n)), quad=quad, g=rng.normal(size=n)
            )
            sys = embed_order2(sde, imap)
            for _ in range(4):
                x = rng.normal(size=n)
                xi = np.concatenate([x, reduce_square(x)])
                rate = sys.a0 + sys.a @ xi
                noise = sys.g + sys.d @ xi
                assert np.allclose(rate[:n], sde.drift(x), rtol=1e-12, atol=1e-12)
                for k, (i, j) in enumerate(imap.pairs):
                    expected = (sde.c[j] * x[i] + sde.c[i] * x[j]
                                + x[i] * (sde.lin[j] @ x) + x[j] * (sde.lin[i] @ x)
                                + sde.g[i] * sde.g[j])
                    assert np.isclose(rate[n + k], expected, rtol=1e-11, atol=1e-12)
                    assert np.isclose(noise[n + k], sde.g[j] * x[i] + sde.g[i] * x[j],
                                      rtol=1e-11, atol=1e-12)


def test_augmented_drift_at_zero_is_constant_block():
    sys = build_vandevusse(PARAM_SET1)
    assert np.array_equal(augmented_drift(sys, np.zeros(9)), sys.a0)


def test_augmented_drift_on_consistency_manifold_matches_model():
    # The physical block of the embedded drift is exact on lifted states
    # because the reactor drift is itself quadratic.
    p = PARAM_SET1
    sys = build_vandevusse(p)
    x = X0_SET1.as_array()
    xi = np.concatenate([x, reduce_square(x)])
    got = augmented_drift(sys, xi)
    assert np.allclose(got[:3], drift(x, p), rtol=1e-12, atol=1e-300)
    assert np.allclose(got[:3], [-0.0694978274, 0.009459264, -0.0009528], rtol=1e-8)


def test_augmented_drift_flow_square_row():
    p = PARAM_SET1
    sys = build_vandevusse(p)
    xi = np.zeros(9)
    xi[8] = 1.0  # only the x3^2 slot
    got = augmented_drift(sys, xi)
    assert np.isclose(got[8], -2.0 * p.alpha + p.beta * p.beta, rtol=1e-14)


def test_augmented_drift_rejects_non_finite():
    sys = build_vandevusse(PARAM_SET1)
    bad = np.zeros(9)
    bad[4] = np.nan
    with pytest.raises(ValueError):
        augmented_drift(sys, bad)


def test_bilinear_system_validates_shapes():
    with pytest.raises(ValueError):
        BilinearSystem(n=3, a0=np.zeros(8), a=np.zeros((9, 9)), d=np.zeros((9, 9)), g=np.zeros(9))


def test_write_blocks_nontrivial_set(tmp_path):
    sys = build_vandevusse(PARAM_SET1)
    paths = write_blocks(sys, str(tmp_path))
    names = sorted(p.rsplit("/", 1)[-1] for p in paths)
    assert names == ["a02.txt", "a11.txt", "a12.txt", "a22.txt", "d21.txt", "g1.txt"]
    a11 = (tmp_path / "a11.txt").read_text()
    assert a11.splitlines()[0] == "-1.388000000000e-02 0.000000000000e+00 2.700000000000e-04"
    # round-trip the dump
    loaded = np.array([[float(v) for v in line.split()] for line in a11.splitlines()])
    assert np.allclose(loaded, sys.a11, rtol=1e-12)
