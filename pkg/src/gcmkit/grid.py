"""Discretization of the 2-sphere: Gauss-Legendre colatitudes x uniform azimuth.

The quadrature integrates cos(theta)-polynomials of degree <= 2*nlat-1 exactly
and resolves azimuthal modes |m| < nphi exactly, so all band-limited integrands
appearing in the spectral machinery (including products of two band-limited
fields) are integrated without aliasing error.
"""

import numpy as np


class GridError(ValueError):
    pass


class SphereGrid:
    """Quadrature grid on a sphere of metric radius ``radius``.

    Attributes
    ----------
    lmax : band limit of the spectral representation carried on this grid
    theta : colatitude nodes (Gauss-Legendre abscissae mapped to (0, pi))
    wtheta : colatitude weights, normalized so sum(wtheta) = 2
    phi : uniform azimuth nodes in [0, 2*pi)
    radius : metric radius (areas scale with radius**2)
    """

    def __init__(self, lmax, radius=1.0, nlat=None, nphi=None):
        if lmax < 4:
            raise GridError(f"lmax={lmax} too coarse: spin-2 content needs lmax >= 4")
        if radius <= 0:
            raise GridError("radius must be positive")
        # 1.5x padding makes quadratic nonlinearities alias-free.
        self.lmax = int(lmax)
        self.nlat = int(nlat) if nlat else int(np.ceil(1.5 * (lmax + 1)))
        self.nphi = int(nphi) if nphi else max(3 * lmax + 3, 2 * lmax + 1)
        if self.nphi < 2 * lmax + 1:
            raise GridError("nphi must be >= 2*lmax+1")
        self.radius = float(radius)
        x, w = np.polynomial.legendre.leggauss(self.nlat)
        order = np.argsort(-x)          # theta increasing: x = cos(theta) decreasing
        self.costheta = x[order]
        self.wtheta = w[order]
        self.theta = np.arccos(self.costheta)
        self.sintheta = np.sin(self.theta)
        self.phi = 2.0 * np.pi * np.arange(self.nphi) / self.nphi

    @property
    def shape(self):
        return (self.nlat, self.nphi)

    @property
    def area(self):
        return 4.0 * np.pi * self.radius**2

    def integrate(self, samples):
        """Surface integral with the metric measure radius^2 sin(theta) dtheta dphi."""
        samples = np.asarray(samples)
        if samples.shape[-2:] != self.shape:
            raise GridError(f"sample shape {samples.shape} does not match grid {self.shape}")
        az = samples.sum(axis=-1) * (2.0 * np.pi / self.nphi)
        return self.radius**2 * np.tensordot(az, self.wtheta, axes=([-1], [0]))

    def mean(self, samples):
        return self.integrate(samples) / self.area

    def south_pole_index(self):
        """Grid index anchoring deformations: largest colatitude, phi = 0."""
        return (self.nlat - 1, 0)

    def meshgrid(self):
        return np.meshgrid(self.theta, self.phi, indexing="ij")

    def with_radius(self, radius):
        g = SphereGrid.__new__(SphereGrid)
        g.__dict__.update(self.__dict__)
        g.radius = float(radius)
        return g

    def header(self):
        return {
            "lmax": self.lmax,
            "nlat": self.nlat,
            "nphi": self.nphi,
            "radius": self.radius,
        }


def make_grid(lmax, radius=1.0, nlat=None, nphi=None):
    """Build a SphereGrid; rejects lmax < 4."""
    return SphereGrid(lmax, radius, nlat=nlat, nphi=nphi)
