"""Grid-based one-dimensional convex analysis.

Convex functions are sampled on strictly increasing grids, with ``np.inf``
as the sentinel for +infinity (allowed only in contiguous boundary ranges,
so the effective domain stays an interval).  The conjugate follows the
convention G(mu) = sup_z(-mu*z - g(z)); applying the transform twice
recovers the closed convex hull of the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NormalizationError, FeasibilityError, ValidationError

TOL_CONVEXITY = 1e-9

AFFINE = "affine-extrapolate"
PLUS_INF = "plus-infinity"


@dataclass(frozen=True)
class GridConvexFunction:
    """A convex function sampled on a 1-D grid.

    ``extension`` governs values outside the grid span: either extrapolate
    with the boundary slope or treat the function as +inf there.
    """

    grid: np.ndarray
    values: np.ndarray
    extension: str = AFFINE

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValidationError("grid and values must be 1-D arrays of equal length")
        if grid.size < 1:
            raise ValidationError("empty grid")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise ValidationError("grid must be strictly increasing")
        if self.extension not in (AFFINE, PLUS_INF):
            raise ValidationError(f"unknown extension {self.extension!r}")
        finite = np.isfinite(values)
        if np.any(np.isnan(values)) or np.any(values == -np.inf):
            raise ValidationError("values must be finite or +inf")
        if not finite.any():
            raise DomainError("effective domain is empty")
        idx = np.flatnonzero(finite)
        lo, hi = idx[0], idx[-1]
        if not finite[lo : hi + 1].all():
            raise ValidationError("+inf sentinel only allowed in contiguous boundary ranges")
        object.__setattr__(self, "_lo", int(lo))
        object.__setattr__(self, "_hi", int(hi))
        fin = values[lo : hi + 1]
        if fin.size >= 3:
            d = np.diff(fin) / np.diff(grid[lo : hi + 1])
            if np.any(np.diff(d) < -TOL_CONVEXITY * np.maximum(1.0, np.abs(fin[1:-1]))):
                raise ValidationError("values are not a convex sequence")

    # -- domain helpers -------------------------------------------------

    @property
    def domain(self) -> tuple[float, float]:
        """Endpoints of the effective domain on the grid."""
        lo, hi = self._lo, self._hi
        if self.extension == AFFINE and lo == 0 and hi == self.grid.size - 1:
            return (-np.inf, np.inf)
        a = self.grid[lo] if (lo > 0 or self.extension == PLUS_INF) else -np.inf
        b = self.grid[hi] if (hi < self.grid.size - 1 or self.extension == PLUS_INF) else np.inf
        return (a, b)

    @property
    def finite_grid(self) -> np.ndarray:
        return self.grid[self._lo : self._hi + 1]

    @property
    def finite_values(self) -> np.ndarray:
        return self.values[self._lo : self._hi + 1]

    def boundary_slopes(self) -> tuple[float, float]:
        """Slopes of the outermost finite cells (left, right).

        Degenerate single-point domains report (-inf, +inf) so the function
        behaves as an indicator for recession purposes.
        """
        g, v = self.finite_grid, self.finite_values
        if g.size < 2:
            return (-np.inf, np.inf)
        left = (v[1] - v[0]) / (g[1] - g[0])
        right = (v[-1] - v[-2]) / (g[-1] - g[-2])
        return (left, right)

    # -- evaluation -----------------------------------------------------

    def __call__(self, z):
        """Piecewise-linear evaluation, honoring the extension rule."""
        z = np.asarray(z, dtype=float)
        scalar = z.ndim == 0
        z = np.atleast_1d(z)
        g, v = self.finite_grid, self.finite_values
        out = np.interp(z, g, v)
        sl, sr = self.boundary_slopes()
        # round-off guard: points a few ulps outside the span count as inside
        tol = 1e-9 * (1.0 + float(g[-1] - g[0]))
        below = z < g[0] - tol
        above = z > g[-1] + tol
        bounded_left = self._lo > 0 or self.extension == PLUS_INF
        bounded_right = self._hi < self.grid.size - 1 or self.extension == PLUS_INF
        if below.any():
            out[below] = np.inf if bounded_left else v[0] + sl * (z[below] - g[0])
        if above.any():
            out[above] = np.inf if bounded_right else v[-1] + sr * (z[above] - g[-1])
        return float(out[0]) if scalar else out


def uniform_grid(span: float, n: int = 2001) -> np.ndarray:
    """Symmetric grid [-span, span] with n points (odd n keeps 0 on-grid)."""
    return np.linspace(-span, span, n)


def from_callable(fn, grid, extension=AFFINE) -> GridConvexFunction:
    grid = np.asarray(grid, dtype=float)
    return GridConvexFunction(grid, np.array([fn(z) for z in grid], dtype=float), extension)


def quadratic_kernel(k: float, grid) -> GridConvexFunction:
    """(k/2) z^2 sampled on the grid."""
    grid = np.asarray(grid, dtype=float)
    return GridConvexFunction(grid, 0.5 * k * grid**2, AFFINE)


def abs_kernel(k: float, grid) -> GridConvexFunction:
    """k |z| sampled on the grid."""
    grid = np.asarray(grid, dtype=float)
    return GridConvexFunction(grid, k * np.abs(grid), AFFINE)


def indicator(grid, interval) -> GridConvexFunction:
    """Convex indicator of [a, b] (0 inside, +inf outside), on the grid."""
    grid = np.asarray(grid, dtype=float)
    a, b = interval
    values = np.where((grid >= a - 1e-15) & (grid <= b + 1e-15), 0.0, np.inf)
    return GridConvexFunction(grid, values, PLUS_INF)


# -- Legendre-Fenchel transform ----------------------------------------


def legendre_transform(f: GridConvexFunction, dual_grid) -> GridConvexFunction:
    """Conjugate G(mu) = max over grid z of (-mu*z - f(z)).

    A monotone argmax sweep exploits concavity of the score in z: as mu
    increases the maximizer moves left, so the total work is linear.
    """
    dual_grid = np.asarray(dual_grid, dtype=float)
    if dual_grid.size > 1 and not np.all(np.diff(dual_grid) > 0):
        raise ValidationError("dual_grid must be strictly increasing")
    z = f.finite_grid
    fv = f.finite_values
    m = z.size
    out = np.empty(dual_grid.size)
    j = m - 1  # argmax for the smallest mu sits at the right end
    for i, mu in enumerate(dual_grid):
        # concave score in z: slide left while not worse (ties -> smallest z)
        while j > 0 and (-mu * z[j - 1] - fv[j - 1]) >= (-mu * z[j] - fv[j]):
            j -= 1
        out[i] = -mu * z[j] - fv[j]
    return GridConvexFunction(dual_grid, out, AFFINE)


def biconjugate_gap(f: GridConvexFunction, dual_points: int | None = None) -> float:
    """max |f - f**| over interior points of the effective domain.

    Tends to 0 under refinement; +inf sentinels outside the domain are
    allowed (indicators) and excluded from the comparison.
    """
    g, v = f.finite_grid, f.finite_values
    if g.size < 2:
        return 0.0
    slopes = np.diff(v) / np.diff(g)
    span = float(np.abs(slopes).max()) * 1.25 + 1.0
    n = dual_points or max(g.size, 1001)
    # Include the negated chord slopes of f: they are exactly the breakpoints
    # of the conjugate, so piecewise-linear (e.g. affine) inputs round-trip
    # without discretization error.
    dual = np.union1d(uniform_grid(span, n), -slopes)
    keep = np.concatenate(([True], np.diff(dual) > 1e-9 * span))
    dual = dual[keep]
    gstar = legendre_transform(f, dual)
    fss = legendre_transform(gstar, g)
    return float(np.max(np.abs(v[1:-1] - fss.values[1:-1])))


# -- recession / perspective -------------------------------------------


def recession_slopes(f: GridConvexFunction) -> tuple[float, float]:
    """Limiting slopes (left, right) of f; +-inf when the domain is bounded."""
    a, b = f.domain
    sl, sr = f.boundary_slopes()
    left = -np.inf if a > -np.inf else sl
    right = np.inf if b < np.inf else sr
    return (left, right)


def recession_function(f: GridConvexFunction) -> GridConvexFunction:
    """Homogeneous growth function: slope*z on each side, +inf on bounded sides."""
    sl, sr = recession_slopes(f)
    grid = f.grid
    if not np.any(np.isclose(grid, 0.0)):
        grid = np.sort(np.append(grid, 0.0))
    values = np.empty_like(grid)
    neg, pos = grid < 0, grid > 0
    values[np.isclose(grid, 0.0)] = 0.0
    values[neg] = np.inf if sl == -np.inf else sl * grid[neg]
    values[pos] = np.inf if sr == np.inf else sr * grid[pos]
    return GridConvexFunction(grid, values, PLUS_INF)


def perspective(f: GridConvexFunction, gamma: float, z: float) -> float:
    """gamma * f(z/gamma) for gamma > 0, recession value at gamma = 0."""
    if gamma < 0:
        raise ValidationError("gamma must be nonnegative")
    if abs(f(0.0)) > 1e-9:
        raise NormalizationError("perspective requires f(0) = 0")
    if gamma == 0:
        return float(recession_function(f)(z))
    return float(gamma * f(z / gamma))


def dilate(f: GridConvexFunction, gamma: float) -> GridConvexFunction:
    """gamma * f(z/gamma) resampled on f's grid."""
    if gamma <= 0:
        raise ValidationError("gamma must be positive")
    values = np.array([gamma * f(z / gamma) for z in f.grid])
    return GridConvexFunction(f.grid, values, f.extension)


# -- inf-convolution and regularizations -------------------------------


def check_infconv_feasible(fA: GridConvexFunction, fB: GridConvexFunction) -> None:
    """Recession condition rA(z) + rB(-z) > 0 for z != 0, else FeasibilityError."""
    aL, aR = recession_slopes(fA)
    bL, bR = recession_slopes(fB)
    # direction z > 0: g^A_{0+}(1) + g^B_{0+}(-1) = aR + (-bL)
    if np.isfinite(aR) and np.isfinite(bL) and aR - bL <= 0:
        raise FeasibilityError(
            "inf-convolution unbounded below in direction z > 0", direction=+1.0
        )
    if np.isfinite(aL) and np.isfinite(bR) and bR - aL <= 0:
        raise FeasibilityError(
            "inf-convolution unbounded below in direction z < 0", direction=-1.0
        )


def inf_convolve(
    fA: GridConvexFunction, fB: GridConvexFunction, out_grid=None
) -> tuple[GridConvexFunction, np.ndarray]:
    """h(z) = min_x fA(z - x) + fB(x), plus the per-z minimizer (smallest)."""
    check_infconv_feasible(fA, fB)
    zs = np.asarray(out_grid, dtype=float) if out_grid is not None else fA.grid
    xs = fB.finite_grid
    bv = fB.finite_values
    # rows: z, cols: candidate x
    total = fA(zs[:, None] - xs[None, :]) + bv[None, :]
    j = np.argmin(total, axis=1)  # first occurrence -> smallest x
    h = total[np.arange(zs.size), j]
    if not np.isfinite(h).any():
        raise FeasibilityError("inf-convolution has empty effective domain on this grid")
    argmin = xs[j]
    # clean tiny convexity violations from interpolation noise
    return GridConvexFunction(zs, _convex_clean(zs, h), fA.extension), argmin


def _convex_clean(grid, values):
    """Snap sub-tolerance concave dents (interpolation round-off) to convexity."""
    v = np.array(values, dtype=float)
    fin = np.isfinite(v)
    idx = np.flatnonzero(fin)
    if idx.size < 3:
        return v
    lo, hi = idx[0], idx[-1]
    g = grid[lo : hi + 1]
    w = v[lo : hi + 1]
    for _ in range(3):
        d = np.diff(w) / np.diff(g)
        bad = np.flatnonzero(np.diff(d) < -TOL_CONVEXITY * np.maximum(1.0, np.abs(w[1:-1])))
        if bad.size == 0:
            break
        for i in bad + 1:
            t = (g[i] - g[i - 1]) / (g[i + 1] - g[i - 1])
            w[i] = (1 - t) * w[i - 1] + t * w[i + 1]
    v[lo : hi + 1] = w
    return v


def moreau_yosida(f: GridConvexFunction, k: float) -> GridConvexFunction:
    """Differentiable regularization f box (k/2)|.|^2 on f's grid."""
    if k <= 0:
        raise ValidationError("k must be positive")
    h, _ = inf_convolve(f, quadratic_kernel(k, f.grid))
    return h


def lipschitz_regularize(f: GridConvexFunction, k: float) -> GridConvexFunction:
    """Lipschitz regularization f box k|.| on f's grid; result is k-Lipschitz."""
    if k <= 0:
        raise ValidationError("k must be positive")
    h, _ = inf_convolve(f, abs_kernel(k, f.grid))
    return h


def subdifferential(f: GridConvexFunction, z: float) -> tuple[float, float]:
    """[left slope, right slope] bracketing the subdifferential at grid point z."""
    g, v = f.finite_grid, f.finite_values
    i = int(np.argmin(np.abs(g - z)))
    if not np.isclose(g[i], z, atol=1e-12 * max(1.0, abs(z))):
        raise DomainError(f"{z} is not a grid point of f")
    a, b = f.domain
    if z <= a or z >= b:
        raise DomainError(f"{z} is not interior to the effective domain [{a}, {b}]")
    left = (v[i] - v[i - 1]) / (g[i] - g[i - 1]) if i > 0 else -np.inf
    right = (v[i + 1] - v[i]) / (g[i + 1] - g[i]) if i < g.size - 1 else np.inf
    return (float(left), float(right))


def to_csv(f: GridConvexFunction) -> str:
    """Two-column CSV (z, value) with an "inf" sentinel for +infinity."""
    lines = ["z,value"]
    for z, v in zip(f.grid, f.values):
        lines.append(f"{float(z)!r},{'inf' if np.isinf(v) else repr(float(v))}")
    return "\n".join(lines) + "\n"


def from_csv(text: str) -> GridConvexFunction:
    """Inverse of to_csv."""
    rows = [r for r in text.strip().splitlines()[1:] if r]
    grid = np.array([float(r.split(",")[0]) for r in rows])
    values = np.array(
        [np.inf if r.split(",")[1] == "inf" else float(r.split(",")[1]) for r in rows]
    )
    extension = PLUS_INF if np.isinf(values[0]) or np.isinf(values[-1]) else AFFINE
    return GridConvexFunction(grid, values, extension)
