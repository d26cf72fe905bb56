"""Three-dimensional Henon-like maps and their period-doubling step.

A map here has the form (x, y, z) -> (f(x) - eps(x, y, z), x, delta(x, y, z))
on a box whose x and y extents coincide. The module provides named example
families, saddle fixed points, the horizontal-like coordinate change that
straightens the second iterate, one renormalization step, and towers of
steps. The deviation fields produced by a step shrink roughly quadratically,
so every small quantity is assembled from divided differences whose relative
accuracy does not degrade with size; structural zeros (a deviation field
independent of some coordinate) survive the step exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import (DomainError, NoConvergence, NotFound, NotRenormalizable,
                     NumericsError, OutOfDomain)
from .funcrep import (Box3, Interval, ScalarField1D, ScalarField3D, c0_norm,
                      interpolate, interpolate_auto, invert_monotone,
                      solve_implicit)
from .unimodal import (AffineMap1D, UnimodalMap, lap_fixed_point,
                       quadratic_family)

EPS_BAR_MAX = 0.25
FREEZE_FLOOR = 1e-280

# Parameter of the quadratic core for which toy_affine_map(mu, 0.1, 0.001)
# stays doubling-renormalizable to depth >= 9; found with
# find_doubling_parameter over [1.46, 1.60] and re-checked in the test suite.
TOY_CASCADE_MU = 1.5615093994140623


def _as_points(x, y, z):
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    shape = np.broadcast_shapes(x.shape, y.shape, z.shape)
    return (np.broadcast_to(x, shape), np.broadcast_to(y, shape),
            np.broadcast_to(z, shape))


def _same_interval(a: Interval, b: Interval, tol: float = 1e-9) -> bool:
    scale = max(a.length, b.length)
    return abs(a.lo - b.lo) <= tol * scale and abs(a.hi - b.hi) <= tol * scale


def _column(arr: np.ndarray, axis: int) -> np.ndarray:
    # meshgrid inputs vary along one axis only; keep just that column
    idx = [slice(0, 1)] * 3
    idx[axis] = slice(None)
    if arr.ndim == 3:
        col = arr[tuple(idx)]
        if np.all(arr == col):
            return col
    return arr


@dataclass(frozen=True)
class HenonMap3D:
    """(x, y, z) -> (f(x) - eps(x, y, z), x, delta(x, y, z)) on `box`."""

    f: ScalarField1D
    eps: ScalarField3D
    delta: ScalarField3D
    box: Box3

    def __post_init__(self):
        if not _same_interval(self.f.domain, self.box.x):
            raise DomainError("the one-dimensional part must live on the x axis")
        for fld in (self.eps, self.delta):
            for got, want in zip(fld.box.axes, self.box.axes):
                if not _same_interval(got, want):
                    raise DomainError("deviation fields must live on the map box")

    def __call__(self, x, y, z):
        x, y, z = _as_points(x, y, z)
        return self.f(x) - self.eps(x, y, z), x.copy(), self.delta(x, y, z)

    def apply(self, w) -> np.ndarray:
        """Image of a single point, which must lie in the box."""
        w = np.asarray(w, dtype=float)
        if not self.box.contains(w[0], w[1], w[2], slack=1e-9):
            raise OutOfDomain(f"point {w} is outside the map box")
        fx, sx, dz = self(w[0], w[1], w[2])
        return np.array([float(fx), float(sx), float(dz)])

    @cached_property
    def _partials(self):
        return (self.f.derivative(),
                self.eps.partial(0), self.eps.partial(1), self.eps.partial(2),
                self.delta.partial(0), self.delta.partial(1), self.delta.partial(2))

    def derivative(self, x, y, z) -> np.ndarray:
        """Derivative matrix at one or many points, shape (..., 3, 3)."""
        x, y, z = _as_points(x, y, z)
        fp, ex, ey, ez, dx, dy, dz = self._partials
        out = np.zeros(x.shape + (3, 3))
        out[..., 0, 0] = fp(x) - ex(x, y, z)
        out[..., 0, 1] = -ey(x, y, z)
        out[..., 0, 2] = -ez(x, y, z)
        out[..., 1, 0] = 1.0
        out[..., 2, 0] = dx(x, y, z)
        out[..., 2, 1] = dy(x, y, z)
        out[..., 2, 2] = dz(x, y, z)
        return out

    def jacobian(self, x, y, z):
        """det of the derivative: d_y eps * d_z delta - d_z eps * d_y delta."""
        x, y, z = _as_points(x, y, z)
        _, _, ey, ez, _, dy, dz = self._partials
        return ey(x, y, z) * dz(x, y, z) - ez(x, y, z) * dy(x, y, z)

    @cached_property
    def deviation_norms(self) -> tuple[float, float]:
        return c0_norm(self.eps), c0_norm(self.delta)

    @property
    def is_degenerate(self) -> bool:
        return (float(np.max(np.abs(self.eps.coeffs))) == 0.0
                and float(np.max(np.abs(self.delta.coeffs))) == 0.0)

    def core(self, y0: float | None = None, z0: float | None = None) -> UnimodalMap:
        """One-dimensional section family x -> f(x) - eps(x, y0, z0)."""
        y0 = self.box.y.mid if y0 is None else float(y0)
        z0 = self.box.z.mid if z0 is None else float(z0)
        if float(np.max(np.abs(self.eps.coeffs))) == 0.0:
            return UnimodalMap.from_field(self.f)
        deg = max(16, self.f.degree + self.eps.degrees[0] + 2)
        sec = interpolate_auto(lambda x: self.f(x) - self.eps(x, y0, z0),
                               self.box.x, deg, rtol=1e-12)
        return UnimodalMap.from_field(sec.trim(1e-14))


# -- named families ----------------------------------------------------------


def cube_box(domain: Interval) -> Box3:
    return Box3(domain, domain, domain)


def _zero_field(box: Box3) -> ScalarField3D:
    return ScalarField3D(box, np.zeros((1, 1, 1)))


def degenerate_map(core: UnimodalMap) -> HenonMap3D:
    """(f(x), x, 0) with both deviation fields identically zero."""
    box = cube_box(core.domain)
    return HenonMap3D(core.f, _zero_field(box), _zero_field(box), box)


def toy_affine_map(mu: float, b1: float, b2: float) -> HenonMap3D:
    """f = 1 - mu x^2 with eps = b1 y and delta = b2 z; Jacobian b1 b2."""
    core = quadratic_family(mu)
    box = cube_box(core.domain)
    eps = interpolate(lambda x, y, z: b1 * y, box, (0, 1, 0))
    dlt = interpolate(lambda x, y, z: b2 * z, box, (0, 0, 1))
    return HenonMap3D(core.f, eps, dlt, box)


def perturbed_toy_map(mu: float, b1: float, b2: float, eta: float) -> HenonMap3D:
    """Toy affine map with eta*z added to eps and eta*x*y added to delta."""
    core = quadratic_family(mu)
    box = cube_box(core.domain)
    eps = interpolate(lambda x, y, z: b1 * y + eta * z, box, (0, 1, 1))
    dlt = interpolate(lambda x, y, z: b2 * z + eta * x * y, box, (1, 1, 1))
    return HenonMap3D(core.f, eps, dlt, box)


# -- saddle fixed points -----------------------------------------------------


@dataclass(frozen=True)
class Saddle:
    """A fixed point together with its eigen-data."""

    point: np.ndarray
    eigenvalues: np.ndarray
    unstable_value: float
    unstable_direction: np.ndarray
    residual: float


@dataclass(frozen=True)
class SaddlePair:
    """Both saddles: beta0 expands with a positive rate, beta1 with a flip."""

    beta0: Saddle
    beta1: Saddle


def _core_fixed_points(f: ScalarField1D) -> list[float]:
    from numpy.polynomial import chebyshev as _cheb

    # roots of f(x) - x in unit coordinates
    c = f.coeffs.astype(float).copy()
    if len(c) < 2:
        c = np.pad(c, (0, 2 - len(c)))
    c[0] -= f.domain.mid
    c[1] -= f.domain.half
    roots = _cheb.chebroots(c)
    real = roots[np.abs(roots.imag) < 1e-9].real
    xs = sorted(float(f.domain.from_unit(t)) for t in real if abs(t) <= 1.0 + 1e-9)
    out: list[float] = []
    for x in xs:
        if not out or abs(x - out[-1]) > 1e-9 * max(1.0, f.domain.length):
            out.append(x)
    return out


def _refine_fixed_point(m: HenonMap3D, seed, tol: float = 1e-13) -> Saddle:
    w = np.asarray(seed, dtype=float).copy()
    eye = np.eye(3)
    best = math.inf
    for _ in range(60):
        fx, sx, dz = m(w[0], w[1], w[2])
        g = np.array([float(fx), float(sx), float(dz)]) - w
        best = float(np.max(np.abs(g)))
        if best < tol:
            break
        jac = m.derivative(w[0], w[1], w[2]) - eye
        try:
            step = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError as exc:
            raise NotFound(f"singular linearization near {w}") from exc
        w = w + step
        if not m.box.contains(w[0], w[1], w[2], slack=0.04):
            raise NotFound(f"iteration left the box near {w}")
    if best > 1e-10:
        raise NotFound(f"fixed-point residual {best:.3e} did not reach 1e-10")
    vals, vecs = np.linalg.eig(m.derivative(w[0], w[1], w[2]))
    order = np.argsort(-np.abs(vals))
    vals, vecs = vals[order], vecs[:, order]
    lam = vals[0]
    if abs(lam.imag) > 1e-9 * (1.0 + abs(lam)) or abs(lam.real) <= 1.0:
        raise NotFound(f"leading eigenvalue {lam:.6g} is not a real expansion")
    if np.max(np.abs(vals[1:])) >= 1.0:
        raise NotFound("more than one expanding eigenvalue at a fixed point")
    direction = np.real(vecs[:, 0])
    direction = direction / np.linalg.norm(direction)
    if direction[int(np.argmax(np.abs(direction)))] < 0.0:
        direction = -direction
    return Saddle(point=w, eigenvalues=vals, unstable_value=float(lam.real),
                  unstable_direction=direction, residual=best)


def fixed_points(m: HenonMap3D) -> SaddlePair:
    """Newton-refined saddle pair seeded from the fixed points of f.

    Raises NotFound unless f(x) = x has exactly two solutions in the box,
    each refining to a saddle with a one-dimensional unstable direction, one
    expanding with rate > 1 and the other with rate < -1.
    """
    xs = _core_fixed_points(m.f)
    if len(xs) != 2:
        raise NotFound(
            f"expected two fixed points of the one-dimensional part, got {len(xs)}")
    saddles = [_refine_fixed_point(m, (x, x, 0.0)) for x in xs]
    positive = [s for s in saddles if s.unstable_value > 1.0]
    negative = [s for s in saddles if s.unstable_value < -1.0]
    if len(positive) != 1 or len(negative) != 1:
        raise NotFound("saddles do not split into one positive and one flip expansion")
    return SaddlePair(beta0=positive[0], beta1=negative[0])


# -- horizontal-like coordinate change ---------------------------------------


@dataclass(frozen=True)
class HorizontalChange:
    """The change (x,y,z) -> (f(x) - eps(x,y,z), y, z - dc(y)) and its inverse.

    dc(y) = delta(y, finv(y), 0) with finv the decreasing-branch inverse of
    f, so the straightened second iterate has no constant part in its third
    coordinate. The inverse solves f(u) - eps(u, y, z + dc(y)) = x for the
    first coordinate u on the same branch.
    """

    henon: HenonMap3D
    core: UnimodalMap
    window: Interval
    padded_window: Interval
    finv: ScalarField1D
    rescale: AffineMap1D
    prf_box: Box3
    tip_estimate: np.ndarray

    def delta_c(self, y):
        y = np.asarray(y, dtype=float)
        return self.henon.delta(y, self.finv(y), 0.0)

    def forward(self, x, y, z):
        x, y, z = _as_points(x, y, z)
        return (self.henon.f(x) - self.henon.eps(x, y, z), y.copy(),
                z - self.delta_c(y))

    def phi_inverse(self, x, y, z, tol: float = 1e-13):
        """First coordinate of the inverse: u with f(u) - eps(u,y,z+dc(y)) = x."""
        f, eps = self.henon.f, self.henon.eps
        if np.ndim(x) == 0 and np.ndim(y) == 0 and np.ndim(z) == 0:
            x = float(np.asarray(x, dtype=float))
            zh = float(np.asarray(z, dtype=float) + self.delta_c(y))
            return float(solve_implicit(
                lambda u: float(self.finv(x + float(eps(u, y, zh)))),
                float(self.finv(x)), tol=tol))
        x, y, z = _as_points(x, y, z)
        zh = z + self.delta_c(y)
        u = np.asarray(self.finv(x), dtype=float)
        span = max(1.0, float(np.max(np.abs(u))))
        for _ in range(80):
            unew = self.finv(x + eps(u, y, zh))
            shift = float(np.max(np.abs(unew - u)))
            u = unew
            if shift <= 20 * np.finfo(float).eps * span:
                break
        res = float(np.max(np.abs(f(u) - eps(u, y, zh) - x)))
        if res > max(tol, 1e-12):
            raise NoConvergence(f"implicit first coordinate stalled at {res:.3e}")
        return u

    def inverse(self, x, y, z):
        x, y, z = _as_points(x, y, z)
        u = self.phi_inverse(x, y, z)
        return u, y.copy(), z + self.delta_c(y)

    def jac_forward(self, x, y, z):
        """det of the forward derivative, f'(x) - d_x eps."""
        x, y, z = _as_points(x, y, z)
        return self.henon.f.derivative()(x) - self.henon.eps.partial(0)(x, y, z)

    def delta_c_prime(self, y):
        y = np.asarray(y, dtype=float)
        dlt = self.henon.delta
        fi = self.finv(y)
        return (dlt.partial(0)(y, fi, 0.0)
                + dlt.partial(1)(y, fi, 0.0) * self.finv.derivative()(y))

    def inverse_derivative(self, x, y, z) -> np.ndarray:
        """Derivative matrix of the inverse change, shape (..., 3, 3).

        Rows follow (u, y, z + dc(y)) with u implicit; the first row comes
        from differentiating f(u) - eps(u, y, z + dc(y)) = x.
        """
        x, y, z = _as_points(x, y, z)
        eps = self.henon.eps
        u = np.asarray(self.phi_inverse(x, y, z), dtype=float)
        zh = z + self.delta_c(y)
        dcp = self.delta_c_prime(y)
        den = self.henon.f.derivative()(u) - eps.partial(0)(u, y, zh)
        ey = eps.partial(1)(u, y, zh)
        ez = eps.partial(2)(u, y, zh)
        out = np.zeros(np.broadcast(x, y, z).shape + (3, 3))
        out[..., 0, 0] = 1.0 / den
        out[..., 0, 1] = (ey + ez * dcp) / den
        out[..., 0, 2] = ez / den
        out[..., 1, 1] = 1.0
        out[..., 2, 1] = dcp
        out[..., 2, 2] = 1.0
        return out

    def roundtrip_defect(self, n: int = 100, seed: int = 0) -> float:
        """Max |forward(inverse(p)) - p| over n random points of prf_box."""
        rng = np.random.default_rng(seed)
        pts = [ax.lo + ax.length * rng.random(n) for ax in self.prf_box.axes]
        back = self.forward(*self.inverse(*pts))
        worst = 0.0
        for got, want in zip(back, pts):
            worst = max(worst, float(np.max(np.abs(got - want))))
        return worst


def _branch_inverse(f: ScalarField1D, box: Box3, cf: float, top: float,
                    need: Interval, margin: float) -> ScalarField1D:
    """Inverse of f on the decreasing lap, covering `need` widened by margin."""
    hi_need = need.hi + margin
    lo_need = need.lo - margin
    if hi_need >= top:
        raise NotRenormalizable(
            f"needed branch values reach {hi_need:.4g} past the maximum {top:.4g}")
    branch_hi = box.x.hi + 0.04 * box.x.half
    if float(f(branch_hi)) > lo_need:
        raise NotRenormalizable(
            f"branch bottom {float(f(branch_hi)):.4g} cannot reach {lo_need:.4g}")
    x_b = brentq(lambda t: float(f(t)) - hi_need, cf, branch_hi,
                 xtol=1e-14, rtol=8.9e-16)
    return invert_monotone(f, Interval(x_b, branch_hi), rtol=1e-13)


def _doubled_section(m: HenonMap3D, finv: ScalarField1D, ct: float,
                     domain: Interval) -> ScalarField1D:
    """Second-iterate section map along y = ct, z = 0 of the straightening."""
    f, eps, dlt = m.f, m.eps, m.delta
    zh0 = float(dlt(ct, finv(ct), 0.0))

    def sampler(xs):
        xs = np.asarray(xs, dtype=float)
        u = np.asarray(finv(xs), dtype=float)
        span = max(1.0, float(np.max(np.abs(u))))
        for _ in range(80):
            unew = finv(xs + eps(u, ct, zh0))
            shift = float(np.max(np.abs(unew - u)))
            u = unew
            if shift <= 20 * np.finfo(float).eps * span:
                break
        dw0 = dlt(u, ct, zh0)
        b0 = f(xs) - eps(xs, u, dw0)
        return f(b0) - eps(b0, xs, dlt(xs, u, dw0))

    deg = max(24, min(2 * f.degree + 4, 64))
    return interpolate_auto(sampler, domain, deg, rtol=1e-12, max_doublings=3)


def _interior_minimum(h: ScalarField1D) -> float:
    from numpy.polynomial import chebyshev as _cheb

    roots = _cheb.chebroots(_cheb.chebder(h.coeffs))
    real = roots[np.abs(roots.imag) < 1e-9].real
    cands = sorted(float(h.domain.from_unit(t)) for t in real if abs(t) <= 0.985)
    dedup: list[float] = []
    for x in cands:
        if not dedup or abs(x - dedup[-1]) > 1e-8 * h.domain.length:
            dedup.append(x)
    curv = h.derivative().derivative()
    mins = [x for x in dedup if float(curv(x)) > 0.0]
    if len(mins) != 1:
        raise NotRenormalizable(
            f"expected one interior minimum of the doubled section, got {len(mins)}")
    return mins[0]


def horizontal_diffeo(m: HenonMap3D, eps_bar_max: float = EPS_BAR_MAX,
                      ) -> HorizontalChange:
    """Build the straightening change for one renormalization step.

    The restrictive interval of the centre-section core only bootstraps the
    region where the doubled section map is built; the window itself is the
    hull of that section's critical orbit, so the rescaled first coordinate
    comes out normalized with its critical value on the upper box endpoint.
    Raises NotRenormalizable when the deviation exceeds eps_bar_max, when
    the section's window fails to open, or when no branch of f can cover
    the implicit solves.
    """
    box = m.box
    if not _same_interval(box.x, box.y):
        raise DomainError("renormalization needs matching x and y extents")
    ebar, dbar = m.deviation_norms
    if ebar > eps_bar_max:
        raise NotRenormalizable(
            f"deviation size {ebar:.3g} exceeds the gate {eps_bar_max:.3g}")
    if dbar > min(-box.z.lo, box.z.hi) + 0.04 * box.z.half:
        raise NotRenormalizable(
            "third-coordinate deviation exceeds the box height")

    core = m.core()
    ct = core.critical_point
    f = m.f
    cf = UnimodalMap.from_field(f).critical_point
    top = float(f(cf))
    margin = 1.05 * ebar + 1e-3 * box.x.half
    slack_abs = 0.04 * box.x.half

    # provisional straightening around the centre core's critical orbit,
    # good enough to locate the doubled section's own critical orbit
    try:
        v1 = float(core(ct))
        v2 = float(core(v1))
        v4 = float(core(float(core(v2))))
    except OutOfDomain:
        raise NotRenormalizable("critical orbit of the centre core escapes")
    hull = Interval(min(v2, ct, v4), max(v2, ct, v4))
    pad = 0.05 * max(hull.length, 0.1 * box.x.half) + ebar
    region = Interval(hull.lo - pad, hull.hi + pad).intersect(box.x)
    finv0 = _branch_inverse(f, box, cf, top, region, margin)
    h = _doubled_section(m, finv0, ct, region)
    ch = _interior_minimum(h)
    w1 = float(h(ch))
    if not (box.x.contains(w1, slack=1e-9) and region.contains(w1, slack=1e-9)):
        raise NotRenormalizable(
            f"doubled critical value {w1:.4g} leaves the bootstrap region")
    w2 = float(h(w1))
    if not (w1 < ch < w2):
        exc = NotRenormalizable(
            f"window of the doubled section is not open: "
            f"{w1:.4g}, {ch:.4g}, {w2:.4g}")
        # crossed but not open is cold while the next image still lands
        # above the flip fixed point; below it the bands have merged
        if w1 >= ch:
            exc.cold = True
        else:
            try:
                exc.cold = bool(float(core(w1)) >= lap_fixed_point(core))
            except (NumericsError, ValueError, OutOfDomain):
                pass
        raise exc
    if not box.x.contains(w2, slack=1e-9):
        raise NotRenormalizable(f"window endpoint {w2:.4g} leaves the box")

    window = Interval(w1, w2)
    # the window must trap the doubled section, or the periodic band
    # structure has already merged
    hv = h(window.sample(129))
    lift = 1e-9 * box.x.half
    if (float(np.max(hv)) > window.hi + lift
            or float(np.min(hv)) < window.lo - lift):
        exc = NotRenormalizable("doubled section does not trap its window")
        exc.cold = False
        raise exc

    rescale = AffineMap1D.onto(window, box.x, reversing=True)
    s = rescale.slope
    if s >= -1.0:
        raise NotRenormalizable(f"rescaling slope {s:.4g} is not expanding")
    zspan = Interval(min(box.z.lo / s, box.z.hi / s),
                     max(box.z.lo / s, box.z.hi / s))
    padded = window.inflate(1.05).intersect(box.x)
    # the second iterate evaluates f on the padded window shifted by eps, so
    # those values must stay inside the box however the sections tilt
    fv = f(padded.sample(129))
    if (float(np.max(fv)) + margin > box.x.hi + slack_abs
            or float(np.min(fv)) - margin < box.x.lo - slack_abs):
        raise NotRenormalizable(
            "second-iterate values leave the box on some section")
    finv = _branch_inverse(f, box, cf, top, padded, margin)

    tip = np.array([float(core(ct)), ct, 0.0])
    change = HorizontalChange(henon=m, core=core, window=window,
                              padded_window=padded, finv=finv, rescale=rescale,
                              prf_box=Box3(window, window, zspan),
                              tip_estimate=tip)
    # the straightened piece lives on the decreasing lap of f; it must stay
    # clear of the window itself or the two pieces of the cycle meet
    gx, gy, gz = change.prf_box.grid(7, 7, 3)
    px = change.phi_inverse(gx, gy, gz)
    if float(np.min(px)) <= window.hi + lift:
        exc = NotRenormalizable("cycle pieces are not separated")
        exc.cold = False
        raise exc
    return change


# -- one renormalization step -------------------------------------------------


def _reflect_odd(coeffs: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    """Coefficients of the series composed with t -> -t along given axes."""
    c = coeffs.copy()
    if c.ndim == 1:
        c[1::2] *= -1.0
        return c
    for ax in axes:
        view = np.moveaxis(c, ax, 0)
        view[1::2] *= -1.0
    return c


@dataclass(frozen=True)
class RenormStep:
    """One application of the doubling operator to a Henon-like map.

    `prf` is the straightened second iterate on the shrunken product box,
    `rf` its rescaling back to the standing box, and `piece_box` the hull
    of the branch image, invariant under the second iterate of the input.
    """

    change: HorizontalChange
    scale: float
    rescale: AffineMap1D
    prf: HenonMap3D
    rf: HenonMap3D
    window: Interval
    piece_box: Box3
    meta: dict

    def branch(self, x, y, z):
        """The rescaled-coordinates chart of the doubling piece."""
        inv = self.rescale.inverse()
        return self.change.inverse(inv(x), inv(y),
                                   np.asarray(z, dtype=float) / self.scale)

    def branch_jacobian(self, x, y, z):
        """det of the branch derivative via the forward determinant."""
        p = self.branch(x, y, z)
        return (1.0 / self.scale ** 3) / self.change.jac_forward(*p)

    def branch_derivative(self, x, y, z) -> np.ndarray:
        """Derivative matrix of the chart, shape (..., 3, 3)."""
        inv = self.rescale.inverse()
        back = (inv(x), inv(y), np.asarray(z, dtype=float) / self.scale)
        return self.change.inverse_derivative(*back) / self.scale


def _freeze(field: ScalarField3D, box: Box3) -> tuple[ScalarField3D, bool]:
    if 0.0 < c0_norm(field) < FREEZE_FLOOR:
        return _zero_field(box), True
    return field, False


def renormalize(m: HenonMap3D, eps_bar_max: float = EPS_BAR_MAX,
                rtol: float = 1e-11) -> RenormStep:
    """One period-doubling step of a three-dimensional Henon-like map.

    The second iterate is straightened by the horizontal-like change,
    rescaled by the affine map carrying the restrictive window back onto
    the standing box, and split again into (f1 - eps1, x, delta1) with the
    first coordinate sectioned at the critical line of the core. The new
    deviation fields are assembled from divided differences, keeping their
    relative accuracy independent of their size.
    """
    change = horizontal_diffeo(m, eps_bar_max)
    box = m.box
    f, eps, dlt = m.f, m.eps, m.delta
    finv = change.finv
    rescale = change.rescale
    inv = rescale.inverse()
    s = rescale.slope
    ct = change.core.critical_point
    zh0 = float(change.delta_c(ct))

    def anchor(xp):
        # exact second-iterate pieces along the section y = ct, z = 0
        a0 = change.phi_inverse(xp, ct, 0.0)
        dw0 = dlt(a0, ct, zh0)
        e0 = eps(xp, a0, dw0)
        d20 = dlt(xp, a0, dw0)
        b0 = f(xp) - e0
        sec = f(b0) - eps(b0, xp, d20)
        return a0, dw0, e0, d20, b0, sec

    def f1_sampler(xs):
        return rescale(anchor(np.asarray(inv(xs), dtype=float))[-1])

    def chain(xs, ys, zs):
        xp = _column(np.asarray(inv(xs), dtype=float), 0)
        yp = _column(np.asarray(inv(ys), dtype=float), 1)
        zp = _column(np.asarray(zs, dtype=float) / s, 2)
        a0, dw0, e0, d20, b0, _ = anchor(xp)

        # dc(y) - dc(ct), telescoped through finv and delta
        fiy = finv(yp)
        fic = float(finv(ct))
        dy = yp - ct
        dfi = finv.diffq(yp, ct) * dy
        ddc = (dlt.diffq_axis(0, yp, ct, fiy, 0.0) * dy
               + dlt.diffq_axis(1, fiy, fic, ct, 0.0) * dfi)
        dzh = zp + ddc
        zh = zh0 + dzh

        # first-coordinate shift a - a0 from the two implicit equations;
        # the quotients need the endpoint a only to modest accuracy, so a
        # few passes settle the shift to full relative precision
        shape = np.broadcast_shapes(xp.shape, yp.shape, zp.shape)
        da = np.zeros(shape)
        scale_a = float(np.max(np.abs(a0))) + 1.0
        for _ in range(20):
            a = a0 + da
            denom = f.diffq(a, a0) - eps.diffq_axis(0, a, a0, yp, zh)
            da_new = (eps.diffq_axis(1, yp, ct, a0, zh) * dy
                      + eps.diffq_axis(2, zh, zh0, a0, ct) * dzh) / denom
            shift = float(np.max(np.abs(da_new - da)))
            da = da_new
            if shift <= 1e-15 * scale_a:
                break
        a = a0 + da

        ddw = (dlt.diffq_axis(0, a, a0, yp, zh) * da
               + dlt.diffq_axis(1, yp, ct, a0, zh) * dy
               + dlt.diffq_axis(2, zh, zh0, a0, ct) * dzh)
        dw = dw0 + ddw
        de = (eps.diffq_axis(1, a, a0, xp, dw) * da
              + eps.diffq_axis(2, dw, dw0, xp, a0) * ddw)
        dd2 = (dlt.diffq_axis(1, a, a0, xp, dw) * da
               + dlt.diffq_axis(2, dw, dw0, xp, a0) * ddw)
        d2 = d20 + dd2
        b = b0 - de
        return xp, yp, zh, a, dw, de, dd2, d2, b, d20, b0

    def eps1_sampler(xs, ys, zs):
        xp, _, _, _, _, de, dd2, d2, b, d20, b0 = chain(xs, ys, zs)
        diff = (f.diffq(b0, b) * de
                - eps.diffq_axis(0, b0, b, xp, d20) * de
                + eps.diffq_axis(2, d20, d2, b, xp) * dd2)
        return s * diff

    def delta1_sampler(xs, ys, zs):
        xp, yp, zh, a, dw = chain(xs, ys, zs)[:5]
        fix = finv(xp)
        resid = f(fix) - xp
        nu = (eps(a, yp, zh) - resid) / f.diffq(a, fix)
        return s * (dlt.diffq_axis(1, a, fix, xp, dw) * nu
                    + dlt.diffq_axis(2, dw, 0.0, xp, fix) * dw)

    deg_f = max(16, min(2 * f.degree + 4, 48))
    f1 = interpolate_auto(f1_sampler, box.x, deg_f, rtol=1e-12,
                          max_doublings=3).trim(1e-14)
    deg3 = (max(12, min(2 * max(f.degree, eps.degrees[0]) + 4, 40)),
            max(10, min(eps.degrees[1] + 8, 20)),
            max(4, min(max(eps.degrees[2], dlt.degrees[2]) + 4, 12)))
    eps1 = interpolate_auto(eps1_sampler, box, deg3, rtol=rtol,
                            max_doublings=2).trim(1e-13)
    # the finv round-trip residue rides the y-quotient of delta into delta1
    # as a high-frequency wiggle no degree can resolve; measure that floor,
    # freeze the field when it sinks below it, and otherwise judge the
    # interpolant against what the samples actually carry
    px, py, pz = box.grid(5, 5, 3)
    cxp, _, _, ca, cdw = chain(px, py, pz)[:5]
    cfix = finv(cxp)
    dnoise = float(np.max(np.abs(
        s * dlt.diffq_axis(1, ca, cfix, cxp, cdw)
        * (f(cfix) - cxp) / f.diffq(ca, cfix))))
    dmag = float(np.max(np.abs(delta1_sampler(px, py, pz))))
    if dmag <= 8.0 * dnoise + FREEZE_FLOOR:
        delta1, froze_d = _zero_field(box), True
    else:
        d_rtol = max(rtol, 6.0 * dnoise / dmag)
        delta1 = interpolate_auto(delta1_sampler, box, deg3, rtol=d_rtol,
                                  max_doublings=2).trim(1e-13)
        delta1, froze_d = _freeze(delta1, box)
    eps1, froze_e = _freeze(eps1, box)
    rf = HenonMap3D(f1, eps1, delta1, box)

    # the unscaled straightened map follows by exact coefficient reflection,
    # since the rescaling negates every axis in unit coordinates
    c1 = _reflect_odd(f1.coeffs, (0,))
    c1[0] -= rescale.offset
    prf = HenonMap3D(
        ScalarField1D(change.prf_box.x, c1 / s),
        ScalarField3D(change.prf_box, _reflect_odd(eps1.coeffs, (0, 1, 2)) / s),
        ScalarField3D(change.prf_box, _reflect_odd(delta1.coeffs, (0, 1, 2)) / s),
        change.prf_box)

    piece_box, piece_meta = _piece_hull(m, change)
    meta = {
        "eps_norm": m.deviation_norms[0],
        "delta_norm": m.deviation_norms[1],
        "eps1_norm": c0_norm(eps1),
        "delta1_norm": c0_norm(delta1),
        "scale": s,
        "window": (change.window.lo, change.window.hi),
        "window_padded": (change.padded_window.lo, change.padded_window.hi),
        "section_anchor": (ct, 0.0),
        "frozen_eps": froze_e,
        "frozen_delta": froze_d,
        "f1_linear_defect": _f1_linear_defect(m, change, prf.f),
    }
    meta.update(piece_meta)
    step = RenormStep(change=change, scale=s, rescale=rescale, prf=prf, rf=rf,
                      window=change.window, piece_box=piece_box, meta=meta)
    meta["conjugacy_defect"] = _conjugacy_defect(m, step)
    return step


def _piece_hull(m: HenonMap3D, change: HorizontalChange) -> tuple[Box3, dict]:
    pad = change.padded_window
    zpad = change.prf_box.z.inflate(1.05)
    xs, ys, zs = Box3(pad, pad, zpad).grid(9, 9, 9)
    u, v, w = change.inverse(xs, ys, zs)
    hull = Box3(Interval(float(np.min(u)), float(np.max(u))),
                Interval(float(np.min(v)), float(np.max(v))),
                Interval(float(np.min(w)), float(np.max(w))))

    # the second iterate must keep the unpadded piece inside the padded hull
    u2, v2, w2 = change.inverse(*change.prf_box.grid(9, 9, 9))
    in_box = m.box.contains(u2, v2, w2, slack=1e-9)
    invariant, margin = True, math.inf
    try:
        p2 = m(*m(u2, v2, w2))
        margin = 0.0
        for got, ax in zip(p2, hull.axes):
            worst = float(np.max(np.abs(ax.to_unit(got))))
            invariant = invariant and worst <= 1.0 + 1e-9
            margin = max(margin, worst)
    except OutOfDomain:
        invariant = False
    return hull, {"piece_in_box": bool(in_box),
                  "piece_invariant": bool(invariant),
                  "piece_boundary_reach": margin}


def _f1_linear_defect(m: HenonMap3D, change: HorizontalChange,
                      f_prf: ScalarField1D) -> float:
    """Gap between the extracted section and its first-order expression."""
    f, eps = m.f, m.eps
    xs = change.window.sample(129)
    fx = f(xs)
    v = eps(xs, change.finv(xs), 0.0)
    vf = eps(fx, xs, 0.0)
    lin = f(fx) - vf - (f.derivative()(fx) - eps.partial(0)(fx, xs, 0.0)) * v
    return float(np.max(np.abs(f_prf(xs) - lin)))


def _conjugacy_defect(m: HenonMap3D, step: RenormStep, n: int = 5) -> float:
    """Max |chart(RF(w)) - F^2(chart(w))| over an interior probe grid."""
    shrink = Box3(m.box.x.inflate(0.9), m.box.y.inflate(0.9),
                  m.box.z.inflate(0.9))
    xs, ys, zs = shrink.grid(n, n, n)
    lhs = step.branch(*step.rf(xs, ys, zs))
    p = step.branch(xs, ys, zs)
    rhs = m(*m(*p))
    return float(max(np.max(np.abs(a - b)) for a, b in zip(lhs, rhs)))


# -- towers -------------------------------------------------------------------


@dataclass
class RenormSequence:
    """Successive renormalizations of one map, level 0 being the input."""

    maps: list[HenonMap3D]
    steps: list[RenormStep]
    eps_norms: np.ndarray
    delta_norms: np.ndarray

    @property
    def depth(self) -> int:
        return len(self.steps)


def renorm_tower(m: HenonMap3D, n_max: int, eps_bar_max: float = EPS_BAR_MAX
                 ) -> RenormSequence:
    """Apply the doubling step n_max times, collecting maps and norms."""
    maps = [m]
    steps: list[RenormStep] = []
    for level in range(n_max):
        try:
            step = renormalize(maps[-1], eps_bar_max)
        except NotRenormalizable as exc:
            raise NotRenormalizable(f"level {level + 1}: {exc}") from exc
        steps.append(step)
        maps.append(step.rf)
    en = np.array([mp.deviation_norms[0] for mp in maps])
    dn = np.array([mp.deviation_norms[1] for mp in maps])
    return RenormSequence(maps=maps, steps=steps, eps_norms=en, delta_norms=dn)


def _failure_is_cold(m: HenonMap3D) -> bool:
    """True when the core's doubled critical orbit has not yet crossed.

    Pre-crossing cores keep f^2(c) >= c; just past crossing the window has
    not opened, so f^4(c) <= c while f^3(c) still sits above the flip fixed
    point. Past band merging f^3(c) falls below the flip point, which is a
    hot failure like any open-window geometry violation.
    """
    try:
        core = m.core()
        c = core.critical_point
        v2 = float(core(core(c)))
        if v2 >= c:
            return True
        v3 = float(core(v2))
        v4 = float(core(v3))
        if v4 > c:
            return False
        return v3 >= lap_fixed_point(core)
    except (NumericsError, ValueError):
        return False


def find_doubling_parameter(builder: Callable[[float], HenonMap3D],
                            lo: float, hi: float, depth: int = 9,
                            tol: float = 1e-7) -> float:
    """Bisect a one-parameter family to a map renormalizable `depth` times.

    The bracket must straddle the doubling cascade: towers at `lo` must
    fail cold (critical orbit not yet crossed) and towers at `hi` must
    fail hot. Returns the first midpoint whose tower reaches the depth.
    """

    def probe(p: float) -> int | None:
        cur = builder(p)
        for _ in range(depth):
            try:
                cur = renormalize(cur).rf
            except NumericsError as exc:
                cold = getattr(exc, "cold", None)
                if cold is None:
                    cold = _failure_is_cold(cur)
                return +1 if cold else -1
        return None

    if probe(lo) != +1:
        raise DomainError(f"tower at the bracket bottom {lo} does not fail cold")
    if probe(hi) != -1:
        raise DomainError(f"tower at the bracket top {hi} does not fail hot")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        side = probe(mid)
        if side is None:
            return mid
        if side > 0:
            lo = mid
        else:
            hi = mid
    raise NoConvergence(
        f"no {depth}-times renormalizable parameter found above resolution {tol}")
