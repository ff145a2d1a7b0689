import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import complex_of
from ddrym.lie import (
    abelian,
    algebra_from_spec,
    extract,
    interleave,
    lie_dofs,
    so3,
    tensorize_bilinear,
    tensorize_linear,
)
from oracles import random_algebra

finite = st.floats(-10, 10, allow_nan=False)
vec3 = arrays(np.float64, 3, elements=finite)
field = arrays(np.float64, (4, 3, 3), elements=finite)
E = np.eye(3)


def test_so3_basis():
    g = so3()
    assert np.array_equal(g.bracket(E[0], E[1]), E[2])
    assert np.array_equal(g.bracket(E[1], E[2]), E[0])
    assert np.array_equal(g.bracket(E[2], E[0]), E[1])
    assert np.array_equal(g.metric, np.eye(3))
    assert algebra_from_spec("su2").name == "so3"


@pytest.mark.parametrize("g", [so3(), abelian(2), random_algebra(4, np.random.default_rng(3))], ids=["so3", "ab2", "rand4"])
def test_structure(g):
    assert np.array_equal(g.c, -g.c.transpose(1, 0, 2))
    assert np.allclose(g.metric, g.metric.T)
    assert np.all(np.linalg.eigvalsh(g.metric) > 0)


def test_jacobi_exact():
    c = so3().c
    # sum over cyclic permutations of c_{IJ}^L c_{LK}^M
    J = np.einsum("IJL,LKM->IJKM", c, c)
    assert not np.any(J + J.transpose(1, 2, 0, 3) + J.transpose(2, 0, 1, 3))


@given(vec3, vec3, vec3)
@settings(max_examples=50, deadline=None)
def test_so3_properties(u, v, w):
    g = so3()
    scale = 1 + np.abs(u).max() * np.abs(v).max() * np.abs(w).max()
    jac = g.bracket(u, g.bracket(v, w)) + g.bracket(v, g.bracket(w, u)) + g.bracket(w, g.bracket(u, v))
    assert np.abs(jac).max() <= 1e-14 * scale
    assert not np.any(g.bracket(u, u))
    # ad-invariance of the metric
    s = g.inner(g.bracket(u, v), w) + g.inner(v, g.bracket(u, w))
    assert abs(s) <= 1e-13 * scale
    # bracket of so(3) is the cross product
    assert np.allclose(g.bracket(u, v), np.cross(u, v), atol=1e-12 * scale)


def test_dimension_mismatch():
    g = so3()
    with pytest.raises(ValueError):
        g.bracket(np.ones(2), np.ones(3))
    with pytest.raises(ValueError):
        g.vector_bracket(np.ones((3, 2)), np.ones((3, 3)))
    with pytest.raises(ValueError):
        algebra_from_spec("sl2")
    with pytest.raises(ValueError):
        abelian(0)
    with pytest.raises(ValueError):
        tensorize_bilinear(np.eye(2), np.ones(3))
    with pytest.raises(ValueError):
        extract(np.ones(5), 3)


def test_vector_bracket_examples(rng):
    g = so3()
    v, w = rng.standard_normal((2, 3))
    V = np.outer(v, E[0])
    W = np.outer(w, E[1])
    assert np.allclose(g.vector_bracket(V, W), np.outer(np.cross(v, w), E[2]))
    a, b = rng.standard_normal((2, 3))
    X = np.outer(a, E[0]) + np.outer(b, E[1])
    assert np.allclose(g.vector_bracket(X, X), 2 * np.outer(np.cross(a, b), E[2]))


@given(field, field)
@settings(max_examples=30, deadline=None)
def test_vector_bracket_symmetric(v, w):
    g = so3()
    assert np.allclose(g.vector_bracket(v, w), g.vector_bracket(w, v), atol=1e-12)


def test_tensorize_examples():
    assert np.array_equal(tensorize_linear(np.array([[2.0]]), 2), np.diag([2.0, 2.0]))
    B = sp.random(5, 5, density=0.5, random_state=1, format="csr")
    B = B + B.T
    L = tensorize_linear(B, 3)
    assert sp.issparse(L)
    assert np.array_equal(tensorize_bilinear(B, np.eye(3)).toarray(), L.toarray())


def test_tensorized_product_blockwise(rng):
    cx = complex_of("tet:1", 0)
    g = random_algebra(3, rng)
    Bm = cx.mass["curl"]
    n = cx.dim("curl")
    x, y = rng.standard_normal((2, n * g.dim))
    lifted = x @ (tensorize_bilinear(Bm, g.metric) @ y)
    X, Y = extract(x, g.dim), extract(y, g.dim)
    ref = sum(g.metric[I, J] * (X[I] @ (Bm @ Y[J])) for I in range(g.dim) for J in range(g.dim))
    assert lifted == pytest.approx(ref, rel=1e-13)


@given(st.integers(1, 4), st.integers(0, 2**31))
@settings(max_examples=20, deadline=None)
def test_lift_functorial(d, seed):
    r = np.random.default_rng(seed)
    L1, L2 = r.standard_normal((2, 4, 4))
    assert np.allclose(tensorize_linear(L1 @ L2, d), tensorize_linear(L1, d) @ tensorize_linear(L2, d), atol=1e-13 * 16)


@given(st.integers(1, 4), st.integers(1, 6), st.integers(0, 2**31))
@settings(max_examples=20, deadline=None)
def test_interleave_round_trip(d, n, seed):
    blocks = np.random.default_rng(seed).standard_normal((d, n))
    v = interleave(blocks)
    assert len(v) == d * n
    assert np.array_equal(extract(v, d), blocks)
    assert np.array_equal(interleave(extract(v, d)), v)
    # DOF i of component I sits at i * d + I
    assert np.array_equal(v[lie_dofs(np.arange(n), d)], v)
    for I in range(d):
        assert np.array_equal(v[lie_dofs(np.arange(n), d).reshape(n, d)[:, I]], blocks[I])


def test_dump():
    text = so3().dump().splitlines()
    assert text[0] == "# algebra so3 dim 3"
    assert "c 0 1 2 1" in text and "c 1 0 2 -1" in text
    assert sum(line.startswith("M ") for line in text) == 3
