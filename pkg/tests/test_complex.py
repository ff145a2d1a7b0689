import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import complex_of, mesh_of
from ddrym.complex import build_complex, serendipity
from ddrym.harness import complex_property, polynomial_consistency

MESHES = ["cubic:1", "tet:1", "prism"]


def pentagon_prism():
    from ddrym.mesh import PolyMesh

    ang = np.linspace(0, 2 * np.pi, 6)[:-1] + np.array([0.1, -0.2, 0.05, 0.15, -0.1])
    base = np.stack([0.5 + 0.4 * np.cos(ang), 0.5 + 0.4 * np.sin(ang), np.zeros(5)], axis=1)
    verts = np.concatenate([base, base + [0.0, 0.0, 0.6]])
    faces = [[4, 3, 2, 1, 0], [5, 6, 7, 8, 9]] + [[i, (i + 1) % 5, (i + 1) % 5 + 5, i + 5] for i in range(5)]
    return PolyMesh.from_arrays(verts, faces, [list(range(7))])


_PRISM = {}


def cx_of(spec, k):
    if spec == "prism":
        if k not in _PRISM:
            _PRISM[k] = build_complex(pentagon_prism(), k)
        return _PRISM[k]
    return complex_of(spec, k)


class Poly:
    """Random polynomial with analytic derivatives (test-side only)."""

    def __init__(self, deg, ncomp, rng):
        self.exps = np.array([e for e in itertools.product(range(deg + 1), repeat=3) if sum(e) <= deg])
        self.c = rng.standard_normal((len(self.exps), ncomp))

    def _m(self, x, exps):
        return np.prod(x[:, None, :] ** exps[None], axis=2)

    def __call__(self, x):
        v = self._m(x, self.exps) @ self.c
        return v[:, 0] if v.shape[1] == 1 else v

    def d(self, x, j):
        e = self.exps.copy()
        f = e[:, j].astype(float)
        e[:, j] = np.maximum(e[:, j] - 1, 0)
        return (self._m(x, e) * f[None]) @ self.c

    def grad(self, x):
        return np.stack([self.d(x, j)[:, 0] for j in range(3)], axis=1)

    def curl(self, x):
        D = [self.d(x, j) for j in range(3)]
        return np.stack([D[1][:, 2] - D[2][:, 1], D[2][:, 0] - D[0][:, 2], D[0][:, 1] - D[1][:, 0]], axis=1)

    def div(self, x):
        return sum(self.d(x, j)[:, j] for j in range(3))


def rel(a, b):
    return np.abs(a - b).max() / max(np.abs(b).max(), 1e-300)


def proj_scalar(eb, vals, deg):
    C = eb.P(deg)
    return eb.eval(C) @ (eb.project(vals, C))


# ----------------------------------------------------------------- layout
@pytest.mark.parametrize("k", [0, 1, 2])
def test_layout_dimensions(k):
    m = mesh_of("cubic:2")
    cx = complex_of("cubic:2", k)
    n1 = lambda l: comb(l + 1, 1) if l >= 0 else 0  # noqa: E731
    n2 = lambda l: comb(l + 2, 2) if l >= 0 else 0  # noqa: E731
    n3 = lambda l: comb(l + 3, 3) if l >= 0 else 0  # noqa: E731
    V, E, F, T = m.n_vertices, m.n_edges, m.n_faces, m.n_cells
    assert cx.dim("grad") == V + E * n1(k - 1) + F * n2(k - 1) + T * n3(k - 1)
    curl_F = (n2(k) - 1 if k else 0) + n2(k - 1)
    curl_T = (3 * n3(k) - n3(k + 1) + 1 if k else 0) + n3(k - 1)
    assert cx.dim("curl") == E * n1(k) + F * curl_F + T * curl_T
    div_T = (n3(k) - 1) + (3 * n3(k - 1) - n3(k - 2))
    assert cx.dim("div") == F * n2(k) + T * div_T
    assert cx.dim("l2") == T * n3(k)
    for space in ("grad", "curl", "div", "l2"):
        lay = cx.layouts[space]
        assert lay.ell == k - 1
        desc = lay.describe()
        kinds = [d[0] for d in desc]
        assert kinds == sorted(kinds, key=["vertex", "edge", "face", "cell"].index)
    assert cx.uG.shape == (cx.dim("curl"), cx.dim("grad"))
    assert cx.uC.shape == (cx.dim("div"), cx.dim("curl"))
    assert cx.D.shape == (cx.dim("l2"), cx.dim("div"))


def test_grad_k0_vertex_only():
    cx = complex_of("cubic:2", 0)
    assert cx.dim("grad") == mesh_of("cubic:2").n_vertices
    q = cx.interpolate("grad", lambda x: x[:, 0] + 2 * x[:, 1])
    assert np.allclose(q, mesh_of("cubic:2").vertices @ [1, 2, 0])


@pytest.mark.parametrize("space", ["grad", "curl", "div", "l2"])
def test_interpolate_zero(space):
    cx = complex_of("tet:1", 1)
    shape = (lambda x: (len(x), 3)) if space in ("curl", "div") else len
    assert not np.any(cx.interpolate(space, lambda x: np.zeros(shape(x))))


def test_interpolate_constant_curl():
    m = mesh_of("tet:1")
    cx = complex_of("tet:1", 1)
    v = cx.interpolate("curl", lambda x: np.tile([1.0, 0.0, 0.0], (len(x), 1)))
    lay = cx.layouts["curl"]
    B = cx.bases
    for e in range(m.n_edges):
        eb = B.edges[e]
        # oracle: L2 projection of t_E . (1, 0, 0) onto P^k(E) by dense quadrature
        vals = np.full(len(eb.rule.weights), m.edge_tangents[e, 0])
        assert np.allclose(v[lay.entity_dofs("edge", e)], eb.project(vals, eb.P(1)), atol=1e-13)
    for f in range(m.n_faces):
        eb = B.faces[f]
        C = np.concatenate([eb.sub["R"], eb.sub["Rc"]])
        G = eb.gram(C, C)
        rhs = np.einsum("q,qbx,x->b", eb.rule.weights, eb.eval3(C), [1.0, 0.0, 0.0])
        assert np.allclose(G @ v[lay.entity_dofs("face", f)], rhs, atol=1e-13)


# ---------------------------------------------------- local consistency
@pytest.mark.parametrize("spec", MESHES)
@pytest.mark.parametrize("k", [0, 1, 2])
def test_local_consistency(spec, k, rng):
    cx = cx_of(spec, k)
    m = cx.mesh
    B = cx.bases
    p = Poly(k + 1, 1, rng)
    w = Poly(k, 3, rng)
    q = cx.interpolate("grad", p)
    v = cx.interpolate("curl", w)
    dv = cx.interpolate("div", w)
    for e, eo in enumerate(cx.edge_ops):
        eb = B.edges[e]
        x = eb.rule.points
        assert rel(eb.eval(eb.P(k)) @ (eo.G @ q[eo.dofs.grad]), p.grad(x) @ m.edge_tangents[e]) < 1e-11
        assert rel(eb.eval(eb.P(k + 1)) @ (eo.gamma @ q[eo.dofs.grad]), p(x)) < 1e-11
    for f, fo in enumerate(cx.face_ops):
        eb = B.faces[f]
        x = eb.rule.points
        n = m.face_normals[f]
        gF = p.grad(x) - np.outer(p.grad(x) @ n, n)
        vec = eb.eval3(eb.vector_P(k))
        assert rel(np.einsum("qax,a->qx", vec, fo.G @ q[fo.dofs.grad]), gF) < 1e-11
        assert rel(eb.eval(eb.P(k + 1)) @ (fo.gamma @ q[fo.dofs.grad]), p(x)) < 1e-11
        wt = w(x) - np.outer(w(x) @ n, n)
        assert rel(np.einsum("qax,a->qx", vec, fo.gamma_t @ v[fo.dofs.curl]), wt) < 1e-11
    for t, co in enumerate(cx.cell_ops):
        eb = B.cells[t]
        x = eb.rule.points
        vec = eb.eval3(eb.vector_P(k))
        assert rel(np.einsum("qax,a->qx", vec, co.G @ q[co.dofs.grad]), p.grad(x)) < 1e-11
        assert rel(eb.eval(eb.P(k + 1)) @ (co.Pgrad @ q[co.dofs.grad]), p(x)) < 1e-11
        assert rel(np.einsum("qax,a->qx", vec, co.Pcurl @ v[co.dofs.curl]), w(x)) < 1e-11
        assert rel(np.einsum("qax,a->qx", vec, co.Pdiv @ dv[co.dofs.div]), w(x)) < 1e-11
        # curl and divergence commute with the L2 projection
        cw = w.curl(x)
        if np.abs(cw).max() > 0:
            assert rel(np.einsum("qax,a->qx", vec, co.C @ v[co.dofs.curl]), cw) < 1e-11
        if k > 0:
            assert rel(eb.eval(eb.P(k)) @ (co.D @ dv[co.dofs.div]), w.div(x)) < 1e-11


@pytest.mark.parametrize("spec", MESHES)
@pytest.mark.parametrize("k", [0, 1])
def test_commutation(spec, k, rng):
    """uG I_grad = I_curl grad, uC I_curl = I_div curl, D I_div = pi div for smooth fields."""
    cx = cx_of(spec, k)
    p = Poly(k + 3, 1, rng)
    w = Poly(k + 2, 3, rng)
    a = cx.uG @ cx.interpolate("grad", p)
    assert rel(a, cx.interpolate("curl", p.grad)) < 1e-11
    a = cx.uC @ cx.interpolate("curl", w)
    assert rel(a, cx.interpolate("div", w.curl)) < 1e-11
    a = cx.D @ cx.interpolate("div", w)
    ref = np.concatenate([eb.project(w.div(eb.rule.points), eb.P(k)) for eb in cx.bases.cells])
    assert rel(a, ref) < 1e-11


def test_curl_and_div_examples():
    cx = complex_of("cubic:1", 0)
    m = cx.mesh
    for f, fo in enumerate(cx.face_ops):
        xF = m.face_centroids[f]
        n = m.face_normals[f]

        def rot(x):
            return np.cross(n, x - xF)  # (-y, x) in the face plane around x_F

        v = cx.interpolate("curl", rot)
        eb = cx.bases.faces[f]
        val = eb.eval(eb.P(0)) @ (fo.C @ v[fo.dofs.curl])
        assert np.allclose(val, 2.0, atol=1e-12)
        c = cx.interpolate("curl", lambda x: np.tile([0.3, -1.0, 2.0], (len(x), 1)))
        assert np.allclose(fo.C @ c[fo.dofs.curl], 0.0, atol=1e-13)
    co = cx.cell_ops[0]
    w = cx.interpolate("div", lambda x: x)
    eb = cx.bases.cells[0]
    assert np.allclose(eb.eval(eb.P(0)) @ (co.D @ w[co.dofs.div]), 3.0, atol=1e-12)
    c = cx.interpolate("div", lambda x: np.tile([1.0, 2.0, 3.0], (len(x), 1)))
    assert np.allclose(co.D @ c[co.dofs.div], 0.0, atol=1e-13)
    vec = eb.eval3(eb.vector_P(0))
    assert np.allclose(np.einsum("qax,a->qx", vec, co.Pdiv @ c[co.dofs.div]), [1.0, 2.0, 3.0])


def test_constants_have_zero_gradient():
    cx = complex_of("tet:1", 2)
    q = cx.interpolate("grad", lambda x: np.full(len(x), 1.7))
    assert np.abs(cx.uG @ q).max() < 1e-13
    for eo in cx.edge_ops:
        assert np.allclose(eo.G @ q[eo.dofs.grad], 0.0, atol=1e-13)
    for fo in cx.face_ops:
        assert np.allclose(fo.G @ q[fo.dofs.grad], 0.0, atol=1e-13)


# ------------------------------------------------------------- complex
@pytest.mark.parametrize("spec", MESHES)
@pytest.mark.parametrize("k", [0, 1, 2])
def test_complex_property(spec, k):
    res = complex_property(cx_of(spec, k), samples=5)
    assert res["curl_grad"] <= 1e-12 and res["div_curl"] <= 1e-12


@pytest.mark.parametrize("spec", MESHES)
@pytest.mark.parametrize("k", [0, 1, 2])
def test_polynomial_consistency(spec, k):
    res = polynomial_consistency(cx_of(spec, k))
    assert max(res.values()) <= 1e-11, res


# --------------------------------------------------------------- products
@pytest.mark.parametrize("k", [0, 1])
def test_stabilization_vanishes_on_polynomials(k, rng):
    cx = cx_of("prism", k)
    p = Poly(k + 1, 1, rng)
    w = Poly(k, 3, rng)
    vals = {"grad": cx.interpolate("grad", p), "curl": cx.interpolate("curl", w), "div": cx.interpolate("div", w)}
    co = cx.cell_ops[0]
    dofs = {"grad": co.dofs.grad, "curl": co.dofs.curl, "div": co.dofs.div}
    for space, (P, S) in co.mass.items():
        x = vals[space][dofs[space]]
        assert abs(x @ S @ x) <= 1e-11 * abs(x @ P @ x)


@given(st.integers(0, 2**31), st.sampled_from(["grad", "curl", "div", "l2"]))
@settings(max_examples=12, deadline=None)
def test_products_symmetric_psd(seed, space):
    cx = complex_of("tet:1", 1)
    r = np.random.default_rng(seed)
    x, y = r.standard_normal((2, cx.dim(space)))
    assert cx.l2_product(space, x, y) == pytest.approx(cx.l2_product(space, y, x), rel=1e-12)
    assert cx.l2_product(space, x, x) > 0
    assert cx.norm(space, x) ** 2 == pytest.approx(cx.l2_product(space, x, x))


# ---------------------------------------------------------- serendipity
def test_serendipity_contract(rng):
    cx = cx_of("prism", 1)
    prov = serendipity("ddr")
    assert prov.eta("face") == prov.eta("cell") == 2
    p = Poly(2, 1, rng)
    w = Poly(1, 3, rng)
    q = cx.interpolate("grad", p)
    v = cx.interpolate("curl", w)
    for f, fo in enumerate(cx.face_ops):
        eb = cx.bases.faces[f]
        x, n = eb.rule.points, cx.mesh.face_normals[f]
        vec = eb.eval3(eb.vector_P(1))
        g = np.einsum("qax,a->qx", vec, prov.gradient(cx, "face", f) @ q[fo.dofs.grad])
        assert rel(g, p.grad(x) - np.outer(p.grad(x) @ n, n)) < 1e-11
        assert not np.any(prov.gradient(cx, "face", f) @ np.zeros(len(fo.dofs.grad)))
    eb = cx.bases.cells[0]
    vec = eb.eval3(eb.vector_P(1))
    pot = np.einsum("qax,a->qx", vec, prov.potential(cx, "cell", 0) @ v[cx.cell_ops[0].dofs.curl])
    assert rel(pot, w(eb.rule.points)) < 1e-11
    with pytest.raises(ValueError):
        serendipity("sddr")
    with pytest.raises(ValueError):
        build_complex(mesh_of("cubic:1"), 0, mode="other")


def test_local_systems_well_posed():
    cx = cx_of("prism", 2)
    sig = {key: v for key, v in cx.diagnostics.items() if not key.startswith("cond_")}
    assert sig and min(sig.values()) > 1e-10


def test_dump_local_operators(tmp_path):
    cx = complex_of("cubic:1", 0)
    path = tmp_path / "ops.txt"
    cx.dump_local_operators(path)
    lines = path.read_text().splitlines()
    first = lines[0].split()
    assert first[:3] == ["edge", "0", "G"]
    r, c = int(first[3]), int(first[4])
    assert np.allclose(np.array(first[5:], float).reshape(r, c), cx.edge_ops[0].G, rtol=1e-16)
