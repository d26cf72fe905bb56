"""One-dimensional period-doubling renormalization.

Provides the unimodal map type, the restrictive-interval diagnostic, the
doubling operator acting on maps of a fixed interval, a Newton solve for
the operator's fixed point in an even Chebyshev ansatz, the presentation
tower built from the inverse branch through the critical value, and the
universal Jacobian profile derived from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as _cheb
from scipy.optimize import brentq

from .errors import DomainError, NoConvergence, NotRenormalizable, OutOfDomain
from .funcrep import (Interval, ScalarField1D, _vals_to_coeffs_1d,
                      interpolate, interpolate_auto, invert_monotone)


@dataclass(frozen=True)
class AffineMap1D:
    """t -> slope * t + offset."""

    slope: float
    offset: float

    def __call__(self, t):
        return self.slope * np.asarray(t, dtype=float) + self.offset

    def inverse(self) -> "AffineMap1D":
        return AffineMap1D(1.0 / self.slope, -self.offset / self.slope)

    @staticmethod
    def onto(src: Interval, dst: Interval, reversing: bool) -> "AffineMap1D":
        slope = dst.length / src.length
        if reversing:
            slope = -slope
            return AffineMap1D(slope, dst.hi - slope * src.lo)
        return AffineMap1D(slope, dst.lo - slope * src.lo)


@dataclass(frozen=True)
class UnimodalMap:
    """A map of an interval with a single interior quadratic maximum."""

    f: ScalarField1D
    critical_point: float

    @property
    def domain(self) -> Interval:
        return self.f.domain

    def __call__(self, x):
        return self.f(x)

    @classmethod
    def from_field(cls, f: ScalarField1D) -> "UnimodalMap":
        """Locate the critical point from the derivative's real roots."""
        df = f.derivative()
        roots = _cheb.chebroots(df.coeffs)
        real = roots[np.abs(roots.imag) < 1e-10].real
        interior = [float(f.domain.from_unit(t)) for t in real if abs(t) < 1.0 - 1e-12]
        d2 = df.derivative()
        maxima = [c for c in interior if d2(c) < 0.0]
        if len(maxima) != 1:
            raise DomainError(
                f"expected one interior maximum, found {len(maxima)}")
        return cls(f, maxima[0])


def quadratic_family(mu: float) -> UnimodalMap:
    """x -> 1 - mu x^2 on the largest invariant symmetric interval.

    The half-width L = (1 + sqrt(1 + 4 mu)) / (2 mu) satisfies f(L) = -L
    exactly, so the interval [-L, L] maps into itself.
    """
    if mu <= 0.0:
        raise DomainError("mu must be positive")
    L = (1.0 + math.sqrt(1.0 + 4.0 * mu)) / (2.0 * mu)
    dom = Interval(-L, L)
    f = interpolate(lambda x: 1.0 - mu * x * x, dom, 2)
    return UnimodalMap(f, 0.0)


# -- restrictive interval ----------------------------------------------------

def is_renormalizable(m: UnimodalMap) -> tuple[bool, Interval | None]:
    """Period-doubling restrictive interval test.

    Returns (True, J) when the interval J with endpoints f^2(c), f^4(c)
    contains c, is mapped off itself by f, back inside itself by f^2, and
    an orientation-reversing fixed point separates J from f(J). Returns
    (False, None) on any failure instead of raising.
    """
    f, c = m.f, m.critical_point
    try:
        v1 = float(f(c))
        v2 = float(f(v1))
        v3 = float(f(v2))
        v4 = float(f(v3))
    except OutOfDomain:
        return False, None
    if not (v2 < c < v4):
        return False, None
    J = Interval(v2, v4)
    try:
        grid = J.sample(129)
        fJ = f(grid)
        lo_f, hi_f = float(np.min(fJ)), float(np.max(fJ))
        if not (lo_f > J.hi or hi_f < J.lo):
            return False, None
        f2J = f(fJ)
    except OutOfDomain:
        return False, None
    pad = 1e-12 * max(1.0, J.length)
    if float(np.min(f2J)) < J.lo - pad or float(np.max(f2J)) > J.hi + pad:
        return False, None
    # orientation-reversing fixed point between J and f(J)
    lo, hi = (J.hi, lo_f) if lo_f > J.hi else (hi_f, J.lo)
    try:
        if (f(lo) - lo) * (f(hi) - hi) > 0.0:
            return False, None
        xfix = brentq(lambda x: float(f(x)) - x, lo, hi)
        if f.derivative()(xfix) >= 0.0:
            return False, None
    except (ValueError, OutOfDomain):
        return False, None
    return True, J


def renormalize_1d(m: UnimodalMap, rtol: float = 1e-12
                   ) -> tuple[UnimodalMap, AffineMap1D]:
    """One doubling step: rescale f^2 on the restrictive interval back to I.

    The affine change sends J onto f's domain orientation-reversingly, so
    its slope s < -1 and the renormalized critical value lands on the upper
    domain endpoint. Raises NotRenormalizable when the interval test fails.
    """
    ok, J = is_renormalizable(m)
    if not ok:
        raise NotRenormalizable("restrictive interval conditions fail")
    I = m.domain
    lam = AffineMap1D.onto(J, I, reversing=True)
    lam_inv = lam.inverse()

    def sampler(x):
        u = lam_inv(x)
        return lam(m.f(m.f(u)))

    start = max(32, min(2 * m.f.degree, 64))
    g = interpolate_auto(sampler, I, start, rtol=rtol, max_doublings=3).trim(1e-13)
    return UnimodalMap(g, float(lam(m.critical_point))), lam


# -- fixed point of the doubling operator -------------------------------------

_UNIT = Interval(-1.0, 1.0)


def _ansatz_eval(c: float, p: np.ndarray, x):
    """Even ansatz sum_k p_k T_k(2 ((x-c)/(1-c))^2 - 1)."""
    q = ((np.asarray(x, dtype=float) - c) / (1.0 - c)) ** 2
    return _cheb.chebval(2.0 * q - 1.0, p)


def _doubling_residual(theta: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    c, p = theta[0], theta[1:]
    v1 = float(_ansatz_eval(c, p, c))
    v2 = float(_ansatz_eval(c, p, v1))
    v3 = float(_ansatz_eval(c, p, v2))
    v4 = float(_ansatz_eval(c, p, v3))
    if not v4 > v2:
        return np.full_like(nodes, 1e6)
    s = -2.0 / (v4 - v2)
    xj = v2 + (nodes - 1.0) / s
    f2 = _ansatz_eval(c, p, _ansatz_eval(c, p, xj))
    return 1.0 + s * (f2 - v2) - _ansatz_eval(c, p, nodes)


def _fit_ansatz(sampler: Callable, c: float, k: int) -> np.ndarray:
    xs = _cheb.chebpts1(4 * (k + 1))
    q = ((xs - c) / (1.0 - c)) ** 2
    V = _cheb.chebvander(2.0 * q - 1.0, k)
    p, *_ = np.linalg.lstsq(V, sampler(xs), rcond=None)
    return p


_CVITANOVIC_SCALE = 0.3995355
_CVITANOVIC_POLY = (1.527632997, -0.1048151943, -0.0267056705, 0.003527413864)


def start_from_power_series(k: int) -> np.ndarray:
    """Initial guess from the classical even power-series solution.

    The classical frame puts the critical point at 0 with value 1 and has
    g(1) = -scale; conjugating by y = (x - c) / (1 - c) with
    c = (scale - 1) / (scale + 1) and rescaling the image by the same
    affine moves it to the frame with f(c) = 1 and f(1) = -1.
    """
    lam = _CVITANOVIC_SCALE
    c = (lam - 1.0) / (1.0 + lam)

    def g(y):
        y2 = np.asarray(y, dtype=float) ** 2
        return (1.0 - _CVITANOVIC_POLY[0] * y2
                - _CVITANOVIC_POLY[1] * y2 ** 2
                - _CVITANOVIC_POLY[2] * y2 ** 3
                - _CVITANOVIC_POLY[3] * y2 ** 4)

    p = _fit_ansatz(lambda x: c + (1.0 - c) * g((x - c) / (1.0 - c)), c, k)
    return np.concatenate([[c], p])


def start_from_cascade(k: int, mu: float = 1.4011551890920506,
                       steps: int = 6) -> np.ndarray:
    """Initial guess by renormalizing the accumulation-parameter quadratic map."""
    m = quadratic_family(mu)
    for _ in range(steps):
        m, _ = renormalize_1d(m)
    L = m.domain.hi
    c = m.critical_point / L
    p = _fit_ansatz(lambda x: m.f(L * x) / L, c, k)
    return np.concatenate([[c], p])


@dataclass
class DoublingFixedPoint:
    """Converged fixed point of the doubling operator on [-1, 1]."""

    map: UnimodalMap
    scale: AffineMap1D
    sigma: float
    residual: float
    theta: np.ndarray
    iterations: int

    @property
    def critical_point(self) -> float:
        return self.map.critical_point


def solve_fixed_point(degree: int = 20, tol: float = 1e-12,
                      start: np.ndarray | str = "power-series",
                      fd_step: float = 1e-7, max_iter: int = 60
                      ) -> DoublingFixedPoint:
    """Gauss-Newton solve for the doubling fixed point in the even ansatz.

    Unknowns are the critical point and the even-series coefficients.
    Collocation uses about half again as many first-kind nodes as
    unknowns; a square system leaves the residual free to oscillate
    between nodes once the ansatz outgrows the equation's effective rank.
    The Jacobian is finite differences with the given step, and each step
    is damped by halving until the residual norm decreases.
    """
    k = degree // 2
    if isinstance(start, str):
        theta = {"power-series": start_from_power_series,
                 "cascade": start_from_cascade}[start](k)
    else:
        theta = np.asarray(start, dtype=float).copy()
        if len(theta) != k + 2:
            raise DomainError(f"start vector needs length {k + 2}")
    nodes = _cheb.chebpts1(k + 2 + max(6, k // 2))
    res = _doubling_residual(theta, nodes)
    for it in range(1, max_iter + 1):
        nrm = float(np.max(np.abs(res)))
        if nrm < tol:
            break
        Jm = np.empty((len(nodes), len(theta)))
        for i in range(len(theta)):
            bump = np.zeros_like(theta)
            bump[i] = fd_step
            Jm[:, i] = (_doubling_residual(theta + bump, nodes)
                        - _doubling_residual(theta - bump, nodes)) / (2 * fd_step)
        step, *_ = np.linalg.lstsq(Jm, res, rcond=None)
        lam = 1.0
        while lam > 1e-6:
            cand = theta - lam * step
            cres = _doubling_residual(cand, nodes)
            if np.max(np.abs(cres)) < nrm:
                theta, res = cand, cres
                break
            lam *= 0.5
        else:
            break  # stalled at the floor the ansatz supports
    else:
        raise NoConvergence(
            f"no convergence after {max_iter} iterations, "
            f"residual {np.max(np.abs(res)):.3e}")
    if float(np.max(np.abs(res))) > max(1e3 * tol, 1e-8):
        raise NoConvergence(
            f"stalled far from a solution, residual {np.max(np.abs(res)):.3e}")

    c, p = float(theta[0]), theta[1:]
    f = interpolate(lambda x: _ansatz_eval(c, p, x), _UNIT, 2 * k).trim(1e-15)
    fp = UnimodalMap(f, c)
    renorm, lam_map = renormalize_1d(fp)
    xs = _UNIT.sample(513)
    dense_res = float(np.max(np.abs(renorm.f(xs) - f(xs))))
    sigma = -1.0 / lam_map.slope
    return DoublingFixedPoint(map=fp, scale=lam_map, sigma=sigma,
                              residual=dense_res, theta=theta, iterations=it)


# -- presentation tower --------------------------------------------------------

@dataclass
class PresentationTower:
    """Limit frames around the critical value of the doubling fixed point.

    g is the inverse branch through the critical value conjugated by the
    fixed point's own rescaling; levels[n] is g^n(I); u is the limit of the
    affinely renormalized iterates G^n; v recenters u at its fixed point 1;
    value_fixed_point is the limit of the rescaled 2^n-th return maps to
    levels[n], the doubling fixed point presented at the critical value.
    level_lengths carries the interval lengths at full relative accuracy,
    which the rounded Interval endpoints lose once levels shrink near the
    float spacing.
    """

    fixed_point: UnimodalMap
    rescale: AffineMap1D
    g: ScalarField1D
    g_fixed_point: float
    levels: list[Interval]
    level_lengths: np.ndarray
    u: ScalarField1D
    v: ScalarField1D
    value_fixed_point: ScalarField1D
    u_prime_at_1: float
    converged_at: int
    sup_steps: list[float]
    disp_hi: np.ndarray
    disp_lo: np.ndarray

    def value_frame(self, n: int) -> AffineMap1D:
        """Orientation-preserving affine from levels[n] onto [-1, 1]."""
        slope = 2.0 / self.level_lengths[n]
        return AffineMap1D(slope, -1.0 - slope * self.levels[n].lo)

    def rescaled(self, n: int, samples: int = 257) -> ScalarField1D:
        """G^n = a_n o g^n as a field on [-1, 1]."""
        if not 1 <= n <= self.converged_at:
            raise DomainError(f"level {n} outside tower depth")
        pts = _cheb.chebpts1(samples)
        base = -1.0
        D = pts - base
        for _ in range(n):
            D = self.g.diffq(base + D, np.full_like(D, base)) * D
            base = float(self.g(base))
        return ScalarField1D(
            _UNIT, _vals_to_coeffs_1d(-1.0 + 2.0 * D / self.level_lengths[n])
        ).trim(1e-14)

    def value_renormalized(self, n: int, rtol: float = 1e-9) -> ScalarField1D:
        """Rescaled 2^n-th return map of the fixed point to levels[n].

        Conjugating through g^n replaces 2^n map iterations by n inverse
        steps out and n contraction steps back, all carried as
        displacements from the fixed point of g, which keeps relative
        accuracy where the untangled return orbit would lose the level
        geometry to rounding. Anchor rounding still injects about 1e-15
        per outward step, amplified by the remaining expansion, so depth
        is capped where that noise passes 1e-8.
        """
        if not 1 <= n <= min(self.converged_at, 10):
            raise DomainError(f"level {n} outside the stable sandwich range")
        f = self.fixed_point.f
        g, xg = self.g, self.g_fixed_point
        s = self.rescale
        chat = xg - float(s(f(xg)))
        rhat = xg - float(g(xg))
        h_lo_n = self.disp_lo[n]
        length = self.level_lengths[n]

        def sampler(x):
            eta = h_lo_n - length * (np.asarray(x, dtype=float) + 1.0) / 2.0
            for _ in range(n):
                eta = s.slope * f.diffq(xg, xg - eta) * eta + chat
            w = xg - f(xg - eta)
            for _ in range(n):
                w = g.diffq(xg, xg - w) * w + rhat
            return -1.0 + 2.0 * (h_lo_n - w) / length

        return interpolate_auto(sampler, _UNIT, 48, rtol=rtol)


def presentation_tower(fp: DoublingFixedPoint, n_max: int = 48,
                       tol: float = 1e-11, value_depth: int = 9
                       ) -> PresentationTower:
    """Build the tower of value-side frames and its limit coordinate.

    The iterates contract geometrically onto the fixed point of g, so the
    rescaled values are computed from per-sample displacements
    D_n(x) = g^n(x) - g^n(-1) advanced by the divided-difference quotient;
    subtracting converged iterates directly would leave pure rounding noise
    after a few dozen levels. Convergence is declared on the C1 distance
    of consecutive rescaled iterates.
    """
    fstar = fp.map
    f, c = fstar.f, fstar.critical_point
    ok, J = is_renormalizable(fstar)
    if not ok:
        raise NotRenormalizable("fixed point fails its own interval test")
    # inverse branch through the critical value: target stays clear of the
    # square-root singularity at f(c)
    top = J.hi + 0.08 * J.length
    branch_lo = brentq(lambda x: float(f(x)) - top, c, 1.0)
    finv = invert_monotone(f, Interval(branch_lo, 1.0))
    s_inv = fp.scale.inverse()

    g = interpolate_auto(lambda x: finv(s_inv(x)), _UNIT, 48, rtol=1e-12)
    gp = g.derivative()

    xg = 1.0
    for _ in range(4):
        xg = xg - (float(g(xg)) - xg) / (float(gp(xg)) - 1.0)
    rhat = xg - float(g(xg))

    pts = np.append(_cheb.chebpts1(257), 1.0)
    base = -1.0
    D = pts - base
    deriv_prod = np.ones_like(pts)
    h_hi = [xg - 1.0]
    h_lo = [xg + 1.0]
    levels = [Interval(-1.0, 1.0)]
    lengths = [2.0]
    prev = prev_d = None
    sup_steps: list[float] = []
    converged = 0
    for n in range(1, n_max + 1):
        deriv_prod = deriv_prod * gp(base + D)
        D = g.diffq(base + D, np.full_like(D, base)) * D
        base = float(g(base))
        h_hi.append(float(g.diffq(xg, xg - h_hi[-1])) * h_hi[-1] + rhat)
        h_lo.append(float(g.diffq(xg, xg - h_lo[-1])) * h_lo[-1] + rhat)
        length = float(D[-1])
        lengths.append(length)
        levels.append(Interval(base, base + length))
        cur = -1.0 + 2.0 * D / length
        cur_d = 2.0 * deriv_prod / length
        if prev is not None:
            step = max(float(np.max(np.abs(cur - prev))),
                       float(np.max(np.abs(cur_d - prev_d))))
            sup_steps.append(step)
            if step < tol:
                converged = n
                prev, prev_d = cur, cur_d
                break
        prev, prev_d = cur, cur_d
    if converged == 0:
        raise NoConvergence(
            f"tower not settled after {n_max} levels, last step "
            f"{sup_steps[-1]:.3e}")
    u = ScalarField1D(_UNIT, _vals_to_coeffs_1d(prev[:-1])).trim(1e-14)
    du = u.derivative()
    u_prime_at_1 = float(du(1.0))
    vdom = Interval(-2.0, 0.0)
    v = interpolate_auto(lambda x: (u(x + 1.0) - 1.0) / u_prime_at_1,
                         vdom, u.degree + 2, rtol=1e-11)
    tower = PresentationTower(
        fixed_point=fstar, rescale=fp.scale, g=g, g_fixed_point=xg,
        levels=levels, level_lengths=np.asarray(lengths), u=u, v=v,
        value_fixed_point=u,  # placeholder, replaced below
        u_prime_at_1=u_prime_at_1, converged_at=converged,
        sup_steps=sup_steps, disp_hi=np.asarray(h_hi), disp_lo=np.asarray(h_lo))
    tower.value_fixed_point = tower.value_renormalized(
        min(value_depth, converged))
    return tower


# -- universal Jacobian profile -------------------------------------------------

def universal_a(v: ScalarField1D, fixed_point: UnimodalMap,
                rtol: float = 1e-10) -> ScalarField1D:
    """Ratio profile a(x) = v'(x - 1) / v'(f*(x) - 1) on [-1, 1].

    Both arguments are displacements from the critical value 1, of the
    point and of its image, and stay inside dom v = [-2, 0] on the whole
    interval; shifting by the critical point instead would leave dom v on
    most of it. a is positive and equals 1 exactly at the fixed point of
    f* on the decreasing lap, where the two arguments coincide.
    """
    f = fixed_point.f
    vp = v.derivative()
    floor = float(np.min(np.abs(vp(vp.domain.sample(801)))))
    if floor < 1e-8:
        raise DomainError(f"v' comes within {floor:.3e} of zero")

    def sampler(x):
        arg1 = np.asarray(x, dtype=float) - 1.0
        arg2 = f(x) - 1.0
        return vp(np.clip(arg1, -2.0, 0.0)) / vp(np.clip(arg2, -2.0, 0.0))

    return interpolate_auto(sampler, _UNIT, 48, rtol=rtol)


def lap_fixed_point(m: UnimodalMap) -> float:
    """The fixed point on the decreasing lap right of the critical point."""
    f, c = m.f, m.critical_point
    return brentq(lambda x: float(f(x)) - x, c, m.domain.hi)
