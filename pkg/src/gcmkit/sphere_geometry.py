"""Exact intrinsic geometry of near-round 2-metrics given spectrally.

A 2-metric on the parameter sphere is carried by its components in the
*unit-round orthonormal dyad* (d_theta, csc(theta) d_phi):

    M = [[m11, m12], [m12, m22]],

split into the trace part a = (m11+m22)/2 (spin 0) and the TT part
w = (m11-m22)/2 + i m12 (spin +2).  Gauss curvature, areas and surface
divergences are evaluated through the relative-Christoffel formula against
the unit round connection; all angular derivatives are spin-weighted ladders
(internally up to spin 3).  Nothing is linearized in the deviation from
roundness; accuracy is set by the band limit alone.

Tensor components live in the complex null dyad m = (e1 + i e2)/sqrt(2):
all slots are stored round-lowered and keyed by '+'/'-' strings; every
contraction pairs '+' with '-' (the round metric is the identity in the
orthonormal dyad).  A slot raised with the inverse 2-metric is produced by
contracting against the inverse-component tensor and is stored the same way.
"""

import numpy as np

from .swsh import _legendre_table


def raw_analyze(samples, grid, spin):
    lmax = grid.lmax
    fm = np.fft.fft(np.asarray(samples, dtype=complex), axis=1) * (2 * np.pi / grid.nphi)
    tab = _legendre_table(grid, spin)
    coeffs = np.zeros((lmax + 1, 2 * lmax + 1), dtype=complex)
    for m in range(-lmax, lmax + 1):
        coeffs[:, m + lmax] = tab[m + lmax] @ (grid.wtheta * fm[:, m % grid.nphi])
    return coeffs


def raw_synthesize(coeffs, grid, spin):
    lmax = grid.lmax
    tab = _legendre_table(grid, spin)
    fm = np.zeros((grid.nlat, grid.nphi), dtype=complex)
    for m in range(-lmax, lmax + 1):
        fm[:, m % grid.nphi] += coeffs[:, m + lmax] @ tab[m + lmax]
    return np.fft.ifft(fm, axis=1) * grid.nphi


def raw_eth(coeffs, spin, lmax):
    ls = np.arange(lmax + 1)[:, None].astype(float)
    return np.sqrt(np.maximum((ls - spin) * (ls + spin + 1), 0.0)) * coeffs


def raw_ethbar(coeffs, spin, lmax):
    ls = np.arange(lmax + 1)[:, None].astype(float)
    return -np.sqrt(np.maximum((ls + spin) * (ls - spin + 1), 0.0)) * coeffs


def _grad_complex(samples, spin, grid):
    """(nabla_m F, nabla_mbar F) on the unit round sphere."""
    c = raw_analyze(samples, grid, spin)
    dm = raw_synthesize(raw_eth(c, spin, grid.lmax), grid, spin + 1)
    dmb = raw_synthesize(raw_ethbar(c, spin, grid.lmax), grid, spin - 1)
    return -dm / np.sqrt(2.0), -dmb / np.sqrt(2.0)


def _dual(k):
    return "-" if k == "+" else "+"


class ComplexTensor:
    def __init__(self, grid, comps):
        self.grid = grid
        self.comps = {k: np.asarray(v, dtype=complex) for k, v in comps.items()}
        self._shape = next(iter(self.comps.values())).shape

    @classmethod
    def oneform(cls, grid, u_complex):
        U = np.asarray(u_complex, dtype=complex)
        return cls(grid, {"+": U / np.sqrt(2.0), "-": np.conj(U) / np.sqrt(2.0)})

    @classmethod
    def sym2(cls, grid, trace_part, tt_part):
        a = np.asarray(trace_part, dtype=complex)
        w = np.asarray(tt_part, dtype=complex)
        return cls(grid, {"++": w, "+-": a, "-+": a, "--": np.conj(w)})

    def comp(self, key):
        return self.comps.get(key, np.zeros(self._shape, dtype=complex))

    def nabla(self):
        """Round covariant derivative, new index prepended (round-lowered)."""
        out = {}
        for key, val in self.comps.items():
            s = key.count("+") - key.count("-")
            dm, dmb = _grad_complex(val, s, self.grid)
            out["+" + key] = out.get("+" + key, 0.0) + dm
            out["-" + key] = out.get("-" + key, 0.0) + dmb
        return ComplexTensor(self.grid, out)


def _keys(rank):
    if rank == 0:
        return [""]
    return [k + c for k in _keys(rank - 1) for c in "+-"]


class Metric2D:
    """2-metric with components (m11, m12, m22) in the unit-round dyad."""

    def __init__(self, grid, m11, m12, m22):
        self.grid = grid
        self.m11 = np.asarray(m11, dtype=float)
        self.m12 = np.asarray(m12, dtype=float)
        self.m22 = np.asarray(m22, dtype=float)

    @classmethod
    def round(cls, grid, radius=None):
        r = grid.radius if radius is None else radius
        one = np.full(grid.shape, float(r) ** 2)
        return cls(grid, one, np.zeros(grid.shape), one)

    @classmethod
    def from_parts(cls, grid, trace_part, tt_part):
        w = np.asarray(tt_part, dtype=complex)
        a = np.asarray(trace_part, dtype=float)
        return cls(grid, a + w.real, w.imag, a - w.real)

    @property
    def det(self):
        return self.m11 * self.m22 - self.m12**2

    def area(self):
        g1 = self.grid.with_radius(1.0)
        return float(g1.integrate(np.sqrt(self.det)))

    def area_radius(self):
        return float(np.sqrt(self.area() / (4.0 * np.pi)))

    def inverse_components(self):
        d = self.det
        return self.m22 / d, -self.m12 / d, self.m11 / d

    def _g_and_ginv(self):
        g = ComplexTensor.sym2(self.grid, 0.5 * (self.m11 + self.m22),
                               0.5 * (self.m11 - self.m22) + 1j * self.m12)
        i11, i12, i22 = self.inverse_components()
        ginv = ComplexTensor.sym2(self.grid, 0.5 * (i11 + i22),
                                  0.5 * (i11 - i22) + 1j * i12)
        return g, ginv

    def _christoffel(self, g, ginv):
        """C with slots (c_raised, a, b), every slot keyed round-lowered."""
        dM = g.nabla()                       # slots (deriv c, a, b)
        D = {}
        for key in _keys(3):
            kc, ka, kb = key
            D[key] = 0.5 * (dM.comp(ka + kc + kb) + dM.comp(kb + kc + ka)
                            - dM.comp(kc + ka + kb))
        C = {}
        for key in _keys(3):
            kc, ka, kb = key
            val = 0.0
            for kx in "+-":
                val = val + ginv.comp(kc + kx) * D[_dual(kx) + ka + kb]
            C[key] = val
        return ComplexTensor(self.grid, C)

    def gauss_curvature(self):
        """Exact Gauss curvature of this metric."""
        g, ginv = self._g_and_ginv()
        C = self._christoffel(g, ginv)
        dM = g.nabla()
        shape = self.grid.shape

        # nabla_c (M^{-1})^{ab} = -(M^{-1})^{ax} (nabla_c M_{xy}) (M^{-1})^{yb}
        def dginv(kc, ka, kb):
            val = np.zeros(shape, dtype=complex)
            for kx in "+-":
                for ky in "+-":
                    val = val - (ginv.comp(ka + kx) * dM.comp(kc + _dual(kx) + _dual(ky))
                                 * ginv.comp(ky + kb))
            return val

        # V^c = M^{ab} C^c_{ab};  W_b = C^c_{cb}
        V = {kc: np.zeros(shape, dtype=complex) for kc in "+-"}
        for kc in "+-":
            for ka in "+-":
                for kb in "+-":
                    V[kc] += ginv.comp(_dual(ka) + _dual(kb)) * C.comp(kc + ka + kb)
        W = {kb: np.zeros(shape, dtype=complex) for kb in "+-"}
        for kb in "+-":
            for kc in "+-":
                W[kb] += C.comp(kc + _dual(kc) + kb)

        def div_vector(vec):
            t = ComplexTensor(self.grid, vec)
            dt = t.nabla()
            return dt.comp("+-") + dt.comp("-+")

        # term1 = M^{ab} nabla_c C^c_{ab} = div V - (nabla_c M^{ab}) C^c_{ab}
        corr1 = np.zeros(shape, dtype=complex)
        for kc in "+-":
            for ka in "+-":
                for kb in "+-":
                    corr1 += dginv(kc, _dual(ka), _dual(kb)) * C.comp(_dual(kc) + ka + kb)
        term1 = div_vector(V) - corr1

        # term2 = M^{ab} nabla_a C^c_{cb} = div(M^{ab} W_b) - (nabla_a M^{ab}) W_b
        gW = {ka: np.zeros(shape, dtype=complex) for ka in "+-"}
        for ka in "+-":
            for kb in "+-":
                gW[ka] += ginv.comp(ka + kb) * W[_dual(kb)]
        corr2 = np.zeros(shape, dtype=complex)
        for ka in "+-":
            for kb in "+-":
                corr2 += dginv(ka, _dual(ka), kb) * W[_dual(kb)]
        term2 = div_vector(gW) - corr2

        # quadratic terms
        T3 = np.zeros(shape, dtype=complex)
        T4 = np.zeros(shape, dtype=complex)
        trC = {kd: np.zeros(shape, dtype=complex) for kd in "+-"}
        for kd in "+-":
            for kc in "+-":
                trC[kd] += C.comp(kc + _dual(kc) + kd)
        for ka in "+-":
            for kb in "+-":
                gab = ginv.comp(_dual(ka) + _dual(kb))
                for kd in "+-":
                    T3 += gab * trC[kd] * C.comp(_dual(kd) + ka + kb)
                    for kc in "+-":
                        T4 += gab * C.comp(kc + ka + kd) * C.comp(_dual(kd) + _dual(kc) + kb)

        i11, i12, i22 = self.inverse_components()
        R = (i11 + i22) + (term1 - term2 + T3 - T4).real
        return 0.5 * R

    def divergence(self, u_complex):
        """Metric divergence of a 1-form given by unit-round-dyad components."""
        g, ginv = self._g_and_ginv()
        C = self._christoffel(g, ginv)
        u = ComplexTensor.oneform(self.grid, u_complex)
        du = u.nabla()
        out = np.zeros(self.grid.shape, dtype=complex)
        for ka in "+-":
            for kb in "+-":
                gab = ginv.comp(_dual(ka) + _dual(kb))
                term = du.comp(ka + kb)
                for kc in "+-":
                    term = term - C.comp(kc + ka + kb) * u.comp(_dual(kc))
                out += gab * term
        return out.real

    def gradient_oneform(self, scalar):
        """Unit-round-dyad components of d(scalar): returns u1 + i u2."""
        dm, dmb = _grad_complex(np.asarray(scalar, dtype=complex), 0, self.grid)
        # u(m) = dm, and U = u1 + i u2 = sqrt(2) * u(m)... with u real:
        return np.sqrt(2.0) * dm
