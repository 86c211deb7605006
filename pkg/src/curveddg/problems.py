"""Manufactured solutions on the unit disk and their right-hand sides."""

import numpy as np

PI = np.pi


class RadialFunction:
    """u(x) = g(|x|^2) with analytic derivatives up to order three.

    ``g`` is a tuple of callables (g, g', g'', g''') of s = |x|^2.
    """

    def __init__(self, g, rhs=None, name=""):
        self.g = g
        self._rhs = rhs
        self.name = name

    def __call__(self, x):
        return self.value(x)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.g[0](np.sum(x * x, axis=-1))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        s = np.sum(x * x, axis=-1)
        return 2.0 * self.g[1](s)[..., None] * x

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        s = np.sum(x * x, axis=-1)
        g1, g2 = self.g[1](s), self.g[2](s)
        eye = np.eye(2)
        return 2.0 * g1[..., None, None] * eye + 4.0 * g2[..., None, None] * x[..., :, None] * x[..., None, :]

    def third(self, x):
        x = np.asarray(x, dtype=float)
        s = np.sum(x * x, axis=-1)
        g2, g3 = self.g[2](s)[..., None, None, None], self.g[3](s)[..., None, None, None]
        eye = np.eye(2)
        xi = x[..., :, None, None]
        xj = x[..., None, :, None]
        xk = x[..., None, None, :]
        sym = eye[:, :, None] * xk + eye[:, None, :] * xj + eye[None, :, :] * xi
        return 4.0 * g2 * sym + 8.0 * g3 * xi * xj * xk

    def laplacian(self, x):
        h = self.hess(x)
        return h[..., 0, 0] + h[..., 1, 1]

    def rhs(self, x):
        if self._rhs is None:
            raise NotImplementedError("no right-hand side attached")
        return self._rhs(np.sum(np.asarray(x, dtype=float) ** 2, axis=-1))


def poisson_rhs(s):
    """-Laplacian of sin(pi s)/4 as a function of s = r^2."""
    return PI**2 * s * np.sin(PI * s) - PI * np.cos(PI * s)


def biharmonic_rhs(s):
    """Bilaplacian of sin^2(pi s) as a function of s = r^2."""
    c, sn = np.cos(2 * PI * s), np.sin(2 * PI * s)
    return 64 * PI**2 * (c - 4 * PI * s * sn - 2 * PI**2 * s**2 * c)


POISSON_SOLUTION = RadialFunction(
    (lambda s: 0.25 * np.sin(PI * s),
     lambda s: 0.25 * PI * np.cos(PI * s),
     lambda s: -0.25 * PI**2 * np.sin(PI * s),
     lambda s: -0.25 * PI**3 * np.cos(PI * s)),
    rhs=poisson_rhs, name="sin(pi r^2)/4")

BIHARMONIC_SOLUTION = RadialFunction(
    (lambda s: np.sin(PI * s) ** 2,
     lambda s: PI * np.sin(2 * PI * s),
     lambda s: 2 * PI**2 * np.cos(2 * PI * s),
     lambda s: -4 * PI**3 * np.sin(2 * PI * s)),
    rhs=biharmonic_rhs, name="sin^2(pi r^2)")


class PolynomialFunction:
    """Polynomial in (x, y) given by a coefficient dict {(a, b): c}; exact derivatives."""

    def __init__(self, coeffs):
        self.coeffs = dict(coeffs)

    def _d(self, x, dx, dy):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for (a, b), c in self.coeffs.items():
            if a < dx or b < dy:
                continue
            fa = np.prod(np.arange(a, a - dx, -1)) if dx else 1
            fb = np.prod(np.arange(b, b - dy, -1)) if dy else 1
            out = out + c * fa * fb * x[..., 0] ** (a - dx) * x[..., 1] ** (b - dy)
        return out

    def __call__(self, x):
        return self.value(x)

    def value(self, x):
        return self._d(x, 0, 0)

    def grad(self, x):
        return np.stack([self._d(x, 1, 0), self._d(x, 0, 1)], axis=-1)

    def hess(self, x):
        xx, xy, yy = self._d(x, 2, 0), self._d(x, 1, 1), self._d(x, 0, 2)
        return np.stack([np.stack([xx, xy], -1), np.stack([xy, yy], -1)], -2)

    def third(self, x):
        out = np.empty(np.asarray(x).shape[:-1] + (2, 2, 2))
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    nx = (i == 0) + (j == 0) + (k == 0)
                    out[..., i, j, k] = self._d(x, nx, 3 - nx)
        return out

    def laplacian(self, x):
        return self._d(x, 2, 0) + self._d(x, 0, 2)
