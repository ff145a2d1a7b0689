"""Structural checks of a DDR complex: complex property and polynomial consistency."""

from __future__ import annotations

from itertools import product

import numpy as np


class RandomPolynomial:
    """Random polynomial of total degree ``deg`` with ``ncomp`` components, with gradient and divergence."""

    def __init__(self, deg: int, ncomp: int, rng):
        self.exps = np.array([e for e in product(range(deg + 1), repeat=3) if sum(e) <= deg])
        self.coef = rng.standard_normal((len(self.exps), ncomp))
        self.ncomp = ncomp

    def _mono(self, x, exps):
        return np.prod(x[:, None, :] ** exps[None], axis=2)

    def __call__(self, x):
        v = self._mono(x, self.exps) @ self.coef
        return v[:, 0] if self.ncomp == 1 else v

    def _partial(self, x, j):
        e = self.exps.copy()
        fac = e[:, j].astype(float)
        e[:, j] = np.maximum(e[:, j] - 1, 0)
        return (self._mono(x, e) * fac) @ self.coef

    def grad(self, x):
        return np.stack([self._partial(x, j)[:, 0] for j in range(3)], axis=1)

    def div(self, x):
        return sum(self._partial(x, j)[:, j] for j in range(3))


def complex_property(cx, samples: int = 20, seed: int = 0) -> dict:
    """Largest relative norms of uC uG q and D uC v over random inputs."""
    rng = np.random.default_rng(seed)
    cg = dc = 0.0
    for _ in range(samples):
        q = rng.standard_normal(cx.dim("grad"))
        v = rng.standard_normal(cx.dim("curl"))
        cg = max(cg, np.linalg.norm(cx.uC @ (cx.uG @ q)) / np.linalg.norm(q))
        dc = max(dc, np.linalg.norm(cx.D @ (cx.uC @ v)) / np.linalg.norm(v))
    return {"curl_grad": float(cg), "div_curl": float(dc)}


def polynomial_consistency(cx, seed: int = 0) -> dict:
    """Relative errors of the potentials and L2 products on interpolated random polynomials.

    P_grad is tested on P^{k+1}, P_curl and P_div on P^k(T)^3; the discrete
    L2 products are compared with exact integrals of the same polynomials.
    """
    rng = np.random.default_rng(seed)
    k = cx.k
    p, p2 = RandomPolynomial(k + 1, 1, rng), RandomPolynomial(k + 1, 1, rng)
    w, w2 = RandomPolynomial(k, 3, rng), RandomPolynomial(k, 3, rng)
    qI, q2I = cx.interpolate("grad", p), cx.interpolate("grad", p2)
    vI, v2I = cx.interpolate("curl", w), cx.interpolate("curl", w2)
    dI, d2I = cx.interpolate("div", w), cx.interpolate("div", w2)
    err = {"P_grad": 0.0, "P_curl": 0.0, "P_div": 0.0}
    ref = {"P_grad": 0.0, "P_curl": 0.0, "P_div": 0.0}
    ig = ic = 0.0
    for t, co in enumerate(cx.cell_ops):
        eb = cx.bases.cells[t]
        pts, wts = eb.rule.points, eb.rule.weights
        vec = eb.eval3(eb.vector_P(k)).transpose(0, 2, 1)
        vals = {
            "P_grad": (eb.eval(eb.P(k + 1)) @ (co.Pgrad @ qI[co.dofs.grad]), p(pts)),
            "P_curl": (vec @ (co.Pcurl @ vI[co.dofs.curl]), w(pts)),
            "P_div": (vec @ (co.Pdiv @ dI[co.dofs.div]), w(pts)),
        }
        for name, (a, b) in vals.items():
            err[name] = max(err[name], np.abs(a - b).max())
            ref[name] = max(ref[name], np.abs(b).max())
        ig += wts @ (p(pts) * p2(pts))
        ic += wts @ np.sum(w(pts) * w2(pts), axis=1)
    out = {name: float(err[name] / ref[name]) for name in err}
    out["mass_grad"] = float(abs(cx.l2_product("grad", qI, q2I) - ig) / abs(ig))
    out["mass_curl"] = float(abs(cx.l2_product("curl", vI, v2I) - ic) / abs(ic))
    out["mass_div"] = float(abs(cx.l2_product("div", dI, d2I) - ic) / abs(ic))
    return out
