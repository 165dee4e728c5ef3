"""Hodge operators on the sphere and diagonal elliptic inversion.

Dictionary used throughout (U spin+1 for a real 1-form, W spin+2 for a real
symmetric traceless 2-tensor, r the metric radius):

    d1 u       = (div u, curl u),  div + i curl = -(1/r) ethbar U
    d1star(h, hs) = -grad h + dual-grad hs,   U = (1/r) eth (h + i hs)
    d2 v       = div v,            U = -(1/r) ethbar W
    d2star u   = -(1/2) sym-traceless grad u, W = (1/(2r)) eth U

Compositions are diagonal in the harmonic basis, which makes the inversions
exact; kernels (means, ell=1 content) are handled by explicit prescription.
"""

import numpy as np

from .swsh import (SpectralField, SpinError, eth, ethbar, mean_free,
                   zero_field)


class EllipticError(ValueError):
    pass


def conj_scalar(field):
    """Coefficients of the complex conjugate of a spin-0 field."""
    if field.spin != 0:
        raise SpinError("conj_scalar acts on scalars")
    lmax = field.grid.lmax
    c = field.coeffs
    out = np.zeros_like(c)
    ms = np.arange(-lmax, lmax + 1)
    out[:, ms + lmax] = ((-1.0) ** ms)[None, :] * np.conj(c[:, -ms + lmax])
    return SpectralField(field.grid, 0, out)


def real_part(field):
    return 0.5 * (field + conj_scalar(field))


def imag_part(field):
    out = 0.5 * (field - conj_scalar(field))
    return SpectralField(field.grid, 0, -1j * out.coeffs)


def d1(u):
    """1-form -> (div, curl) scalar pair."""
    if u.spin != 1:
        raise SpinError("d1 expects a spin +1 field (real 1-form)")
    r = u.grid.radius
    dc = (-1.0 / r) * ethbar(u)
    return real_part(dc), imag_part(dc)


def d1star(h, hstar):
    """(h, h*) -> -grad h + dual-grad h* as spin +1."""
    if h.spin != 0 or hstar.spin != 0:
        raise SpinError("d1star expects two scalars")
    r = h.grid.radius
    H = SpectralField(h.grid, 0, h.coeffs + 1j * hstar.coeffs)
    return (1.0 / r) * eth(H)


def d2(v):
    """Symmetric traceless 2-tensor -> its divergence 1-form."""
    if v.spin != 2:
        raise SpinError("d2 expects a spin +2 field")
    r = v.grid.radius
    return (-1.0 / r) * ethbar(v)


def d2star(u):
    """1-form -> -(1/2) traceless symmetrized gradient."""
    if u.spin != 1:
        raise SpinError("d2star expects a spin +1 field")
    r = u.grid.radius
    return (1.0 / (2.0 * r)) * eth(u)


def _lap_symbol(grid, spin):
    ls = np.arange(grid.lmax + 1)[:, None].astype(float)
    return -(ls * (ls + 1) - spin**2) / grid.radius**2


def inner(a, b):
    """Real L2 inner product of equal-type fields on the metric sphere."""
    tf = {0: 1.0, 1: 1.0, 2: 2.0}[abs(a.spin)]
    r = a.grid.radius
    return float(tf * r**2 * np.sum(a.coeffs * np.conj(b.coeffs)).real)


def inner_pair(pair_a, pair_b):
    return inner(pair_a[0], pair_b[0]) + inner(pair_a[1], pair_b[1])


# -- identity verification ----------------------------------------------------

class HodgeOperatorReport:
    def __init__(self, grid):
        self.grid = grid
        self.radius = grid.radius
        self.gauss_curvature = 1.0 / grid.radius**2
        self.residuals = {}
        self.kernel_dims = {"d1": 0, "d2": 0, "d1star": 2, "d2star": 6}
        self.eigen_table = self._eigen_table()
        self.coercivity = {}

    def _eigen_table(self):
        ls = np.arange(self.grid.lmax + 1).astype(float)
        r2 = self.radius**2
        return {
            "d1star_d1": ls * (ls + 1) / r2,
            "d1_d1star": ls * (ls + 1) / r2,
            "d2star_d2": np.maximum(ls * (ls + 1) - 2.0, 0.0) / (2 * r2),
            "d2_d2star": np.maximum(ls * (ls + 1) - 2.0, 0.0) / (2 * r2),
        }

    @property
    def max_residual(self):
        return max(self.residuals.values())

    def failing(self, tol=1e-10):
        return sorted(k for k, v in self.residuals.items() if v > tol)

    def to_dict(self):
        return {
            "radius": self.radius,
            "gauss_curvature": self.gauss_curvature,
            "residuals": self.residuals,
            "kernel_dims": self.kernel_dims,
            "coercivity": self.coercivity,
        }


def verify_identities(grid, seed=0, nsamples=3, corrupt=None):
    """Check the four composition identities on random band-limited fields.

    ``corrupt`` flips the sign of the named operator so that fault injection
    shows up in the per-identity residual table.
    """
    from .swsh import random_band_limited

    sgn = {name: (-1.0 if corrupt == name else 1.0)
           for name in ("d1", "d2", "d1star", "d2star")}
    _d1 = lambda u: tuple(sgn["d1"] * x for x in d1(u))
    _d2 = lambda v: sgn["d2"] * d2(v)
    _d1s = lambda h, hs: sgn["d1star"] * d1star(h, hs)
    _d2s = lambda u: sgn["d2star"] * d2star(u)

    rep = HodgeOperatorReport(grid)
    K = rep.gauss_curvature
    r = grid.radius

    def nrm(field):
        return field.l2_norm()

    res = {k: 0.0 for k in ("d1star_d1", "d1_d1star", "d2star_d2", "d2_d2star",
                            "adjoint_d1", "adjoint_d2")}
    for i in range(nsamples):
        u = random_band_limited(grid, spin=1, seed=seed + 17 * i, real_tensor=False)
        v = random_band_limited(grid, spin=2, seed=seed + 17 * i + 5, real_tensor=False)
        h = random_band_limited(grid, spin=0, seed=seed + 17 * i + 9)
        hs = random_band_limited(grid, spin=0, seed=seed + 17 * i + 13)

        # d1* d1 = -Delta_1 + K on 1-forms
        lhs = _d1s(*_d1(u))
        rhs = SpectralField(grid, 1, -_lap_symbol(grid, 1) * u.coeffs + K * u.coeffs)
        res["d1star_d1"] = max(res["d1star_d1"], nrm(lhs - rhs) / max(nrm(u), 1e-300))

        # d1 d1* = -Delta_0 on scalar pairs
        D, C = _d1(_d1s(h, hs))
        rhs_h = SpectralField(grid, 0, -_lap_symbol(grid, 0) * h.coeffs)
        rhs_hs = SpectralField(grid, 0, -_lap_symbol(grid, 0) * hs.coeffs)
        num = nrm(D - rhs_h) + nrm(C - rhs_hs)
        res["d1_d1star"] = max(res["d1_d1star"], num / max(nrm(h) + nrm(hs), 1e-300))

        # d2* d2 = -(1/2) Delta_2 + K on stt tensors
        lhs = _d2s(_d2(v))
        rhs = SpectralField(grid, 2, (-0.5 * _lap_symbol(grid, 2) + K) * v.coeffs)
        res["d2star_d2"] = max(res["d2star_d2"], nrm(lhs - rhs) / max(nrm(v), 1e-300))

        # d2 d2* = -(1/2)(Delta_1 + K) on 1-forms
        lhs = _d2(_d2s(u))
        rhs = SpectralField(grid, 1, -0.5 * (_lap_symbol(grid, 1) + K) * u.coeffs)
        res["d2_d2star"] = max(res["d2_d2star"], nrm(lhs - rhs) / max(nrm(u), 1e-300))

        # adjointness
        a1 = inner_pair(_d1(u), (h, hs)) - inner(u, _d1s(h, hs))
        res["adjoint_d1"] = max(res["adjoint_d1"],
                                abs(a1) / max(nrm(u) * (nrm(h) + nrm(hs)), 1e-300))
        a2 = inner(_d2(v), u) - inner(v, _d2s(u))
        res["adjoint_d2"] = max(res["adjoint_d2"],
                                abs(a2) / max(nrm(v) * nrm(u), 1e-300))
    rep.residuals = res
    return rep


# -- elliptic inversion -------------------------------------------------------

_OPERATORS = {
    # name -> (input spin, symbol(l, r), kernel l-values)
    "laplacian": (0, lambda l, r: -l * (l + 1) / r**2, (0,)),
    "laplacian_plus_2_r2": (0, lambda l, r: (-l * (l + 1) + 2.0) / r**2, (1,)),
    "d2star_d2": (2, lambda l, r: np.maximum(l * (l + 1) - 2.0, 0.0) / (2 * r**2), ()),
}


def apply_operator(name, field):
    spin, symbol, _ = _OPERATORS[name]
    if field.spin != spin:
        raise SpinError(f"{name} expects spin {spin}")
    ls = np.arange(field.grid.lmax + 1)[:, None].astype(float)
    return SpectralField(field.grid, spin, symbol(ls, field.grid.radius) * field.coeffs)


def invert_elliptic(name, rhs, kernel=None, cokernel_tol=1e-8, report=None):
    """Solve op(sol) = rhs with prescribed kernel content.

    kernel: dict with entries for every kernel direction of the operator:
        "mean"  -> prescribed sphere average        (laplacian)
        "ell1"  -> prescribed l=1 coefficient block (laplacian_plus_2_r2),
                   a complex array of shape (3,) ordered m = -1, 0, +1.
    Inconsistent right-hand sides (cokernel component above ``cokernel_tol``
    relative) raise EllipticError rather than being silently projected.
    """
    kernel = dict(kernel or {})
    spin, symbol, kernel_ls = _OPERATORS[name]
    if rhs.spin != spin:
        raise SpinError(f"{name} expects spin {spin}")
    grid = rhs.grid
    lmax = grid.lmax
    ls = np.arange(lmax + 1)[:, None].astype(float)
    sym = symbol(ls, grid.radius) * np.ones((1, 2 * lmax + 1))

    scale = max(float(np.max(np.abs(rhs.coeffs))), 1e-300)
    sol = np.zeros_like(rhs.coeffs)
    for l in range(abs(spin), lmax + 1):
        sl = slice(lmax - l, lmax + l + 1)
        if l in kernel_ls:
            bad = float(np.max(np.abs(rhs.coeffs[l, sl])))
            if bad > cokernel_tol * scale:
                raise EllipticError(
                    f"rhs has cokernel content {bad:.3e} at l={l} (operator {name})")
        else:
            sol[l, sl] = rhs.coeffs[l, sl] / sym[l, 0]

    # kernel prescriptions
    if 0 in kernel_ls:
        if "mean" not in kernel:
            raise EllipticError(f"operator {name} needs a prescribed mean")
        sol[0, lmax] = kernel["mean"] * np.sqrt(4.0 * np.pi)
    if 1 in kernel_ls:
        if "ell1" not in kernel:
            raise EllipticError(f"operator {name} needs prescribed ell=1 content")
        block = np.asarray(kernel["ell1"], dtype=complex)
        sol[1, lmax - 1:lmax + 2] = block

    out = SpectralField(grid, spin, sol)
    if report is not None:
        k = report.get("k", 1)
        num = _sob(out, k + 1)
        den = grid.radius * _sob(rhs, k)
        report["coercivity"] = num / max(den, 1e-300)
        report["residual"] = (apply_operator(name, out) - rhs).l2_norm() / (
            max(rhs.l2_norm(), 1e-300))
    return out


def _sob(field, k):
    from .swsh import sobolev_norm
    return sobolev_norm(field, k)


def invert_d1(div_scalar, curl_scalar, cokernel_tol=1e-8):
    """Unique 1-form with the given divergence and curl (their means must vanish)."""
    grid = div_scalar.grid
    lmax = grid.lmax
    dc = SpectralField(grid, 0, div_scalar.coeffs + 1j * curl_scalar.coeffs)
    scale = max(float(np.max(np.abs(dc.coeffs))), 1e-300)
    if abs(dc.coeffs[0, lmax]) > cokernel_tol * scale * np.sqrt(4 * np.pi):
        raise EllipticError("div/curl data has nonzero mean (no closed 1-form exists)")
    # solve -(1/r) ethbar U = dc: coefficientwise, ethbar factor -sqrt(l(l+1))
    ls = np.arange(lmax + 1)[:, None].astype(float)
    fac = np.sqrt(ls * (ls + 1))
    fac[0] = np.inf
    return SpectralField(grid, 1, grid.radius * dc.coeffs / fac)


def invert_d2(u, cokernel_tol=1e-8):
    """Symmetric traceless tensor v with d2 v = u; u must have no l=1 content."""
    grid = u.grid
    lmax = grid.lmax
    if u.spin != 1:
        raise SpinError("invert_d2 expects a 1-form")
    scale = max(float(np.max(np.abs(u.coeffs))), 1e-300)
    l1 = float(np.max(np.abs(u.coeffs[1, lmax - 1:lmax + 2])))
    if l1 > cokernel_tol * scale:
        raise EllipticError(f"1-form has l=1 cokernel content {l1:.3e}")
    ls = np.arange(lmax + 1)[:, None].astype(float)
    fac = -np.sqrt(np.maximum((ls + 1) * ls - 2.0, 0.0))  # ethbar on spin 2
    fac[np.abs(fac) < 1e-14] = np.inf
    return SpectralField(grid, 2, grid.radius * u.coeffs / fac)


def dense_matrix(apply_fn, grid, spin_in, spin_out_fields=1):
    """Dense real matrix of a linear operator on real-ified coefficients."""
    lmax = grid.lmax
    idx = [(l, m) for l in range(max(abs(spin_in), 0), lmax + 1)
           for m in range(-l, l + 1) if l >= abs(spin_in)]
    cols = []
    for (l, m) in idx:
        for part in (1.0, 1.0j):
            e = zero_field(grid, spin_in)
            e.coeffs[l, m + lmax] = part
            out = apply_fn(e)
            outs = out if isinstance(out, tuple) else (out,)
            cols.append(np.concatenate([
                np.concatenate([o.coeffs.real.ravel(), o.coeffs.imag.ravel()])
                for o in outs]))
    return np.array(cols).T


def measured_coercivity(name_or_fn, grid, spin_in):
    """Smallest nonzero singular value of the densely assembled operator."""
    if isinstance(name_or_fn, str):
        fn = {"d1": d1, "d2": d2, "d2star": d2star}[name_or_fn]
    else:
        fn = name_or_fn
    M = dense_matrix(fn, grid, spin_in)
    sv = np.linalg.svd(M, compute_uv=False)
    nz = sv[sv > 1e-10 * sv[0]]
    return float(nz[-1]), int((sv <= 1e-10 * sv[0]).sum())
