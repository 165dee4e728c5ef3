"""Analytic 4-metrics in outgoing-geodesic adapted coordinates (u, s, y1, y2).

Metrics are supplied as sympy expressions of the block form

    g = -2 sigma du ds + g_uu du^2 + 2 g_ua du dy^a + g_ab dy^a dy^b,

with g_ss = g_sa = 0 and d(sigma)/ds = 0, which makes u an optical function
and s an affine parameter along the null generators e4 = d/ds for *any*
choice of the free component functions.

Derivative evaluation strategy: first metric derivatives are lambdified
analytically; everything built algebraically on top of (g, dg) supports
complex-shifted points, so higher derivatives (Riemann, frame gradients) use
complex-step differentiation and are exact to machine precision.
"""

import numpy as np
import sympy as sp

_CSTEP = 1e-30

U, S, TH, PH = sp.symbols("u s theta phi", real=True)
COORDS = (U, S, TH, PH)


# real l=2..4 spherical harmonic polynomials in x, y, z (restricted to S^2),
# used as angular shapes with exactly zero l=0 and l=1 content
def _harmonic_polynomials():
    x = sp.sin(TH) * sp.cos(PH)
    y = sp.sin(TH) * sp.sin(PH)
    z = sp.cos(TH)
    l2 = [x * y, y * z, x * z, x**2 - y**2, 3 * z**2 - 1]
    l3 = [x * (5 * z**2 - 1), y * (5 * z**2 - 1), z * (5 * z**2 - 3),
          z * (x**2 - y**2), x * y * z, x * (x**2 - 3 * y**2), y * (3 * x**2 - y**2)]
    l4 = [35 * z**4 - 30 * z**2 + 3, x * z * (7 * z**2 - 3), y * z * (7 * z**2 - 3),
          (x**2 - y**2) * (7 * z**2 - 1), x * y * (7 * z**2 - 1)]
    return l2 + l3 + l4


def random_angular_shape(rng, nterms=3):
    basis = _harmonic_polynomials()
    picks = rng.choice(len(basis), size=min(nterms, len(basis)), replace=False)
    expr = sp.Integer(0)
    for k in picks:
        expr += sp.Float(rng.normal(), 17) * basis[k]
    return expr


class MetricModel:
    """Lambdified metric + first derivatives with complex-step higher calculus."""

    def __init__(self, comp_exprs, params=None):
        self.params = dict(params or {})
        self.expr = sp.ImmutableMatrix(comp_exprs)
        mods = ["numpy"]
        self._g = {}
        self._dg = {}
        for i in range(4):
            for j in range(i, 4):
                e = self.expr[i, j]
                self._g[i, j] = sp.lambdify(COORDS, e, modules=mods) if e != 0 else None
                for c in range(4):
                    de = sp.diff(e, COORDS[c])
                    self._dg[c, i, j] = (sp.lambdify(COORDS, de, modules=mods)
                                         if de != 0 else None)

    # -- pointwise tensors --------------------------------------------------
    def metric(self, pts):
        u, s, th, ph = pts
        shp = np.broadcast(u, s, th, ph).shape
        iscomplex = any(np.iscomplexobj(p) for p in pts)
        out = np.zeros((4, 4) + shp, dtype=complex if iscomplex else float)
        for (i, j), fn in self._g.items():
            if fn is None:
                continue
            val = fn(u, s, th, ph)
            out[i, j] = val
            if i != j:
                out[j, i] = val
        return out

    def dmetric(self, pts):
        u, s, th, ph = pts
        shp = np.broadcast(u, s, th, ph).shape
        iscomplex = any(np.iscomplexobj(p) for p in pts)
        out = np.zeros((4, 4, 4) + shp, dtype=complex if iscomplex else float)
        for (c, i, j), fn in self._dg.items():
            if fn is None:
                continue
            val = fn(u, s, th, ph)
            out[c, i, j] = val
            if i != j:
                out[c, j, i] = val
        return out

    def inverse_metric(self, pts):
        g = np.moveaxis(self.metric(pts), (0, 1), (-2, -1))
        return np.moveaxis(np.linalg.inv(g), (-2, -1), (0, 1))

    def christoffel(self, pts):
        """Gamma^rho_{mu nu}; supports complex-shifted points."""
        dg = self.dmetric(pts)
        ginv = self.inverse_metric(pts)
        # 0.5 g^{rho sigma} (dg[mu][sigma nu] + dg[nu][sigma mu] - dg[sigma][mu nu])
        braces = np.einsum("msn...->mns...", dg) + np.einsum("nsm...->mns...", dg) \
            - np.einsum("smn...->mns...", dg)
        return 0.5 * np.einsum("rs...,mns...->rmn...", ginv, braces)

    def riemann_lower(self, pts):
        """R_{rho sigma mu nu} via complex-step derivatives of Christoffels."""
        pts = tuple(np.asarray(p, dtype=complex) for p in pts)
        gam = self.christoffel(pts).real
        dgam = np.empty((4,) + gam.shape)
        for c in range(4):
            shifted = list(pts)
            shifted[c] = shifted[c] + 1j * _CSTEP
            dgam[c] = self.christoffel(tuple(shifted)).imag / _CSTEP
        # R^r_{s m n} = d_m Gam^r_{n s} - d_n Gam^r_{m s} + Gam Gam - Gam Gam
        rup = (np.einsum("mrns...->rsmn...", dgam)
               - np.einsum("nrms...->rsmn...", dgam)
               + np.einsum("rml...,lns...->rsmn...", gam, gam)
               - np.einsum("rnl...,lms...->rsmn...", gam, gam))
        g = self.metric(pts).real
        return np.einsum("rl...,lsmn...->rsmn...", g, rup)

    # -- adapted frames ------------------------------------------------------
    def frame_components(self, pts):
        """Exact (e4, e3, E1, E2) coordinate components at the given points.

        Works for complex-shifted points, which lets callers complex-step
        through the frame construction itself.
        """
        u, s, th, ph = (np.asarray(p, dtype=complex) for p in pts)
        shp = np.broadcast(u, s, th, ph).shape
        g = self.metric((u, s, th, ph))
        e4 = np.zeros((4,) + shp, dtype=complex)
        e4[1] = 1.0
        sigma = -g[0, 1]
        z = 2.0 / sigma
        # angular block and inverse
        gab = np.stack([np.stack([g[2, 2], g[2, 3]]), np.stack([g[3, 2], g[3, 3]])])
        det = gab[0, 0] * gab[1, 1] - gab[0, 1] * gab[1, 0]
        inv = np.empty_like(gab)
        inv[0, 0], inv[1, 1] = gab[1, 1] / det, gab[0, 0] / det
        inv[0, 1] = inv[1, 0] = -gab[0, 1] / det
        gu = np.stack([g[0, 2], g[0, 3]])            # g_{u a}
        gamma_a = -z * np.einsum("ab...,b...->a...", inv, gu)
        quad = (z**2 * g[0, 0] + 2 * z * np.einsum("a...,a...->...", gamma_a, gu)
                + np.einsum("a...,ab...,b...->...", gamma_a, gab, gamma_a))
        beta = quad / (2.0 * z * sigma)
        e3 = np.zeros((4,) + shp, dtype=complex)
        e3[0], e3[1], e3[2], e3[3] = z, beta, gamma_a[0], gamma_a[1]

        # orthonormal dyad from the round reference (d_theta, csc(theta) d_phi)
        st = np.sin(th)
        m11, m12, m22 = gab[0, 0], gab[0, 1] / st, gab[1, 1] / st**2
        dm = np.sqrt(m11 * m22 - m12**2)
        tr = m11 + m22
        denom = np.sqrt(tr + 2 * dm)
        # inverse sqrt of the 2x2 SPD matrix M
        i11 = (m22 + dm) / (dm * denom)
        i12 = -m12 / (dm * denom)
        i22 = (m11 + dm) / (dm * denom)
        E1 = np.zeros((4,) + shp, dtype=complex)
        E2 = np.zeros((4,) + shp, dtype=complex)
        E1[2], E1[3] = i11, i12 / st
        E2[2], E2[3] = i12, i22 / st
        return {"e4": e4, "e3": e3, "E1": E1, "E2": E2,
                "sigma": sigma, "z": z, "beta": beta, "Bbar": gamma_a / 2.0}

    def frame_gradient(self, pts, name):
        """d_mu of the named frame field's components, by complex step."""
        pts = tuple(np.asarray(p, dtype=complex) for p in pts)
        base = self.frame_components(pts)[name]
        out = np.empty((4,) + base.shape)
        for c in range(4):
            shifted = list(pts)
            shifted[c] = shifted[c] + 1j * _CSTEP
            out[c] = self.frame_components(tuple(shifted))[name].imag / _CSTEP
        return out


def schwarzschild_exprs(m0):
    m0 = sp.Float(m0, 17)
    ups = 1 - 2 * m0 / S
    g = sp.zeros(4, 4)
    g[0, 0] = -ups
    g[0, 1] = g[1, 0] = -1
    g[2, 2] = S**2
    g[3, 3] = S**2 * sp.sin(TH) ** 2
    return g


def schwarzschild_metric(m0):
    return MetricModel(schwarzschild_exprs(m0), params={"m0": m0, "eps": 0.0})


def _lie_derivative_metric(gexpr, xi_lower):
    """(L_xi g)_{mu nu} = d_mu xi_nu + d_nu xi_mu - 2 Gamma^r_{mu nu} xi_r."""
    ginv = gexpr.inv()
    h = sp.zeros(4, 4)
    gam = [[[sp.Integer(0)] * 4 for _ in range(4)] for _ in range(4)]
    for r in range(4):
        for m in range(4):
            for n in range(m, 4):
                val = sp.Integer(0)
                for l in range(4):
                    if ginv[r, l] == 0:
                        continue
                    val += ginv[r, l] * (sp.diff(gexpr[l, m], COORDS[n])
                                         + sp.diff(gexpr[l, n], COORDS[m])
                                         - sp.diff(gexpr[m, n], COORDS[l]))
                gam[r][m][n] = gam[r][n][m] = sp.Rational(1, 2) * val
    for m in range(4):
        for n in range(m, 4):
            val = sp.diff(xi_lower[m], COORDS[n]) + sp.diff(xi_lower[n], COORDS[m])
            for r in range(4):
                val -= 2 * gam[r][m][n] * xi_lower[r]
            h[m, n] = h[n, m] = sp.expand(val)
    return h


def gauge_perturbed_exprs(m0, eps, seed, region_center, slow_scale=None,
                          amplitudes=None):
    """Schwarzschild plus eps * L_xi(Schwarzschild) with a gauge-compatible xi.

    The generator is built from free angular shapes (l = 2..4 content only)
    with the s-profiles that keep the perturbed metric in the adapted block
    form exactly; the resulting metric is vacuum to O(eps^2).
    """
    rng = np.random.default_rng(seed)
    u0, s0 = region_center
    r0 = sp.Float(s0, 17)
    du = (U - sp.Float(u0, 17)) / (slow_scale or r0)
    ds = (S - sp.Float(s0, 17)) / (slow_scale or r0)

    def profile():
        c = [sp.Float(rng.normal(), 17) for _ in range(4)]
        return 1 + c[0] * du + c[1] * ds + c[2] * du * ds + c[3] * ds**2

    amp = {"a": 1.0, "c": 1.0, "d": 1.0, "e": 1.0}
    amp.update(amplitudes or {})
    ups = 1 - 2 * sp.Float(m0, 17) / S

    a = amp["a"] * random_angular_shape(rng) * profile()
    chi = amp["c"] * random_angular_shape(rng) * profile() / r0
    chit = amp["c"] * random_angular_shape(rng) * profile() / r0
    dfun = amp["d"] * r0 * (sp.Float(rng.normal(), 17) * du
                            + sp.Float(rng.normal(), 17) * du * ds
                            + random_angular_shape(rng) * profile() / r0)
    efun = amp["e"] * random_angular_shape(rng) * profile()

    # 1-form potentials: c_a = (d chi)_a + (*d chit)_a  (smooth on the sphere)
    c_th = sp.diff(chi, TH) - sp.diff(chit, PH) / sp.sin(TH)
    c_ph = sp.diff(chi, PH) + sp.sin(TH) * sp.diff(chit, TH)

    xi = sp.zeros(4, 1)
    xi[1] = a                                   # xi_s, s-independent
    xi[2] = S**2 * c_th + S * sp.diff(a, TH)    # xi_theta
    xi[3] = S**2 * c_ph + S * sp.diff(a, PH)    # xi_phi
    xi[0] = a * ups + dfun + S * efun           # xi_u

    g0 = schwarzschild_exprs(m0)
    h = _lie_derivative_metric(g0, xi)
    g = g0 + sp.Float(eps, 17) * h
    return g, h


def gauge_perturbed_metric(m0, eps, seed, region_center, **kw):
    g, h = gauge_perturbed_exprs(m0, eps, seed, region_center, **kw)
    model = MetricModel(g, params={"m0": m0, "eps": eps, "seed": seed})
    model.perturbation = h
    return model
