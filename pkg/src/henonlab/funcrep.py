"""Chebyshev scalar fields on intervals and boxes.

Function data everywhere in this package is carried by two concrete
types: :class:`ScalarField1D` (a Chebyshev series on an interval) and
:class:`ScalarField3D` (a tensor-product series on a box). Construction
goes through :func:`interpolate`, which samples a callable at Chebyshev
nodes of the first kind and verifies the result on an off-node probe
grid; composition, inversion and rescaling all reduce to
re-interpolation.

Evaluation slightly outside the domain (up to ``DOMAIN_SLACK`` in unit
coordinates) is permitted: a resolved series extrapolates harmlessly at
that range, and the renormalization step needs a small overhang when the
restrictive interval touches the box edge.

Both field types support divided-difference evaluation (``diffq`` /
``delta``), which returns differences of field values with *relative*
accuracy even when the two evaluation points nearly coincide. The deep
levels of the renormalization tower depend on this: deviations decay
super-exponentially and fall far below the absolute rounding floor of a
naive subtraction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as _cheb

from .errors import NoConvergence, NotMonotone, NotResolved, OutOfDomain

DOMAIN_SLACK = 0.05
TAIL_RTOL = 1e-12
ZERO_FLOOR = 1e-300


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] with lo < hi, both finite."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("interval endpoints must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def half(self) -> float:
        return 0.5 * (self.hi - self.lo)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def to_unit(self, x):
        return (np.asarray(x, dtype=float) - self.mid) / self.half

    def from_unit(self, t):
        return self.mid + self.half * np.asarray(t, dtype=float)

    def contains(self, x, slack: float = 0.0) -> bool:
        t = np.abs(self.to_unit(x))
        return bool(np.all(t <= 1.0 + slack))

    def inflate(self, factor: float) -> "Interval":
        return Interval(self.mid - self.half * factor, self.mid + self.half * factor)

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lo, other.lo), min(self.hi, other.hi))

    def sample(self, n: int) -> np.ndarray:
        return np.linspace(self.lo, self.hi, n)


@dataclass(frozen=True)
class Box3:
    """Product of three intervals, coordinates named x, y, z."""

    x: Interval
    y: Interval
    z: Interval

    @property
    def axes(self):
        return (self.x, self.y, self.z)

    def contains(self, x, y, z, slack: float = 0.0) -> bool:
        return (self.x.contains(x, slack) and self.y.contains(y, slack)
                and self.z.contains(z, slack))

    def corners(self) -> np.ndarray:
        pts = [(a, b, c)
               for a in (self.x.lo, self.x.hi)
               for b in (self.y.lo, self.y.hi)
               for c in (self.z.lo, self.z.hi)]
        return np.array(pts)

    def grid(self, nx: int, ny: int, nz: int):
        return np.meshgrid(self.x.sample(nx), self.y.sample(ny),
                           self.z.sample(nz), indexing="ij")

    @property
    def diameter(self) -> float:
        return math.sqrt(self.x.length ** 2 + self.y.length ** 2 + self.z.length ** 2)


# -- node/coefficient plumbing -------------------------------------------

_COEF_MATRICES: dict[int, np.ndarray] = {}


def _coef_matrix(n: int) -> np.ndarray:
    # maps values at the n first-kind nodes to series coefficients
    if n not in _COEF_MATRICES:
        V = _cheb.chebvander(_cheb.chebpts1(n), n - 1)
        _COEF_MATRICES[n] = np.linalg.inv(V)
    return _COEF_MATRICES[n]


def _vals_to_coeffs_1d(vals: np.ndarray) -> np.ndarray:
    # DCT path for large n; values are at ascending first-kind nodes
    n = len(vals)
    if n <= 128:
        return _coef_matrix(n) @ vals
    from scipy.fft import dct

    c = dct(np.asarray(vals, dtype=float)[::-1], type=2) / n
    c[0] *= 0.5
    return c


def _nodes(domain: Interval, n: int) -> np.ndarray:
    return domain.from_unit(_cheb.chebpts1(n))


def _dd_unit(coeffs, a, b):
    """Divided difference of a unit-domain series, stable for a near b.

    Uses the recurrence T_{k+1}[a,b] = 2a T_k[a,b] + 2 T_k(b) - T_{k-1}[a,b];
    with a == b it degenerates to the derivative recurrence, so coincident
    points are handled for free. ``coeffs`` may be a vector (one series) or
    a matrix of per-sample rows aligned with broadcast a, b.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    shape = np.broadcast_shapes(a.shape, b.shape)
    coeffs = np.asarray(coeffs, dtype=float)
    per_sample = coeffs.ndim == 2
    m = coeffs.shape[-1]
    if m < 2:
        return np.zeros(shape)

    def col(k):
        return coeffs[..., k] if per_sample else coeffs[k]

    q_prev = np.zeros(shape)
    q = np.ones(shape)
    tb_prev = np.ones(shape)
    tb = np.broadcast_to(b, shape).astype(float)
    out = col(1) * q
    for k in range(1, m - 1):
        q_next = 2.0 * a * q + 2.0 * tb - q_prev
        tb_next = 2.0 * b * tb - tb_prev
        out = out + col(k + 1) * q_next
        q_prev, q = q, q_next
        tb_prev, tb = tb, tb_next
    return out


class ScalarField1D:
    """Chebyshev series on an interval."""

    __slots__ = ("domain", "coeffs")

    def __init__(self, domain: Interval, coeffs):
        self.domain = domain
        self.coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def _unit(self, x, slack=DOMAIN_SLACK):
        t = self.domain.to_unit(x)
        if np.any(np.abs(t) > 1.0 + slack):
            worst = float(np.max(np.abs(t)))
            raise OutOfDomain(
                f"evaluation at unit coordinate {worst:.6f} exceeds slack "
                f"{1.0 + slack:.6f} on {self.domain}")
        return t

    def __call__(self, x):
        return _cheb.chebval(self._unit(x), self.coeffs)

    def derivative(self) -> "ScalarField1D":
        if len(self.coeffs) == 1:
            return ScalarField1D(self.domain, [0.0])
        return ScalarField1D(
            self.domain, _cheb.chebder(self.coeffs, 1, scl=1.0 / self.domain.half))

    def antiderivative(self) -> "ScalarField1D":
        return ScalarField1D(
            self.domain, _cheb.chebint(self.coeffs, 1, scl=self.domain.half))

    def diffq(self, a, b):
        """(f(a) - f(b)) / (a - b), relative-accurate for a near b."""
        ta = self._unit(a)
        tb = self._unit(b)
        return _dd_unit(self.coeffs, ta, tb) / self.domain.half

    def delta(self, a, b):
        """f(a) - f(b) without cancellation."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return self.diffq(a, b) * (a - b)

    def trim(self, rtol: float = 1e-14) -> "ScalarField1D":
        """Drop the trailing coefficients below rtol relative to the largest."""
        scale = float(np.max(np.abs(self.coeffs)))
        if scale <= ZERO_FLOOR:
            return ScalarField1D(self.domain, [0.0])
        keep = len(self.coeffs)
        while keep > 1 and abs(self.coeffs[keep - 1]) <= rtol * scale:
            keep -= 1
        return ScalarField1D(self.domain, self.coeffs[:keep].copy())

    def __repr__(self):
        return (f"ScalarField1D(degree={self.degree}, "
                f"domain=[{self.domain.lo:.6g}, {self.domain.hi:.6g}])")


class ScalarField3D:
    """Tensor-product Chebyshev series on a box, coefficients indexed (x, y, z)."""

    __slots__ = ("box", "coeffs")

    def __init__(self, box: Box3, coeffs):
        self.box = box
        c = np.asarray(coeffs, dtype=float)
        if c.ndim != 3:
            raise ValueError("ScalarField3D needs a rank-3 coefficient tensor")
        self.coeffs = c

    @property
    def degrees(self):
        return tuple(n - 1 for n in self.coeffs.shape)

    def _units(self, x, y, z, slack=DOMAIN_SLACK):
        ts = []
        for v, axis, name in ((x, self.box.x, "x"), (y, self.box.y, "y"),
                              (z, self.box.z, "z")):
            t = axis.to_unit(v)
            if np.any(np.abs(t) > 1.0 + slack):
                worst = float(np.max(np.abs(t)))
                raise OutOfDomain(
                    f"{name} evaluation at unit coordinate {worst:.6f} "
                    f"exceeds slack on {axis}")
            ts.append(t)
        return ts

    def __call__(self, x, y, z):
        tx, ty, tz = self._units(x, y, z)
        shape = np.broadcast_shapes(np.shape(tx), np.shape(ty), np.shape(tz))
        tx, ty, tz = (np.broadcast_to(t, shape) for t in (tx, ty, tz))
        return _cheb.chebval3d(tx, ty, tz, self.coeffs)

    def partial(self, axis: int) -> "ScalarField3D":
        if self.coeffs.shape[axis] == 1:
            return ScalarField3D(self.box, np.zeros_like(self.coeffs))
        scl = 1.0 / self.box.axes[axis].half
        c = _cheb.chebder(np.moveaxis(self.coeffs, axis, 0), 1, scl=scl)
        return ScalarField3D(self.box, np.moveaxis(c, 0, axis))

    def _collapse(self, axis: int, u, v):
        """Per-sample coefficient rows along `axis` at unit values u, v of the others."""
        c = np.moveaxis(self.coeffs, axis, 2)  # (other1, other2, axis)
        Vu = _cheb.chebvander(np.atleast_1d(u), c.shape[0] - 1)
        Vv = _cheb.chebvander(np.atleast_1d(v), c.shape[1] - 1)
        return np.einsum("ijk,ni,nj->nk", c, Vu, Vv)

    def diffq_axis(self, axis: int, a, b, other1, other2):
        """Divided difference along one axis at fixed other coordinates.

        axis=0: (f(a, o1, o2) - f(b, o1, o2)) / (a - b) with (o1, o2) = (y, z);
        for axis=1 the fixed pair is (x, z); for axis=2 it is (x, y).
        """
        axes = self.box.axes
        others = [i for i in range(3) if i != axis]
        ta = axes[axis].to_unit(a)
        tb = axes[axis].to_unit(b)
        u = axes[others[0]].to_unit(other1)
        v = axes[others[1]].to_unit(other2)
        shape = np.broadcast_shapes(np.shape(ta), np.shape(tb), np.shape(u), np.shape(v))
        perm = [others[0], others[1], axis]
        c = np.transpose(self.coeffs, perm)
        Vu = _cheb.chebvander(np.broadcast_to(u, shape).ravel(), c.shape[0] - 1)
        Vv = _cheb.chebvander(np.broadcast_to(v, shape).ravel(), c.shape[1] - 1)
        rows = np.einsum("ijk,ni,nj->nk", c, Vu, Vv)
        dd = _dd_unit(rows,
                      np.broadcast_to(ta, shape).ravel(),
                      np.broadcast_to(tb, shape).ravel())
        return dd.reshape(shape) / axes[axis].half

    def delta(self, p, q):
        """f(p) - f(q) without cancellation, telescoped one axis at a time."""
        px, py, pz = (np.asarray(c, dtype=float) for c in p)
        qx, qy, qz = (np.asarray(c, dtype=float) for c in q)
        d = self.diffq_axis(0, px, qx, py, pz) * (px - qx)
        d = d + self.diffq_axis(1, py, qy, qx, pz) * (py - qy)
        d = d + self.diffq_axis(2, pz, qz, qx, qy) * (pz - qz)
        return d

    def trim(self, rtol: float = 1e-14) -> "ScalarField3D":
        scale = float(np.max(np.abs(self.coeffs)))
        if scale <= ZERO_FLOOR:
            return ScalarField3D(self.box, np.zeros((1, 1, 1)))
        c = self.coeffs
        for axis in range(3):
            m = np.moveaxis(c, axis, 0)
            keep = m.shape[0]
            while keep > 1 and np.max(np.abs(m[keep - 1])) <= rtol * scale:
                keep -= 1
            c = np.moveaxis(m[:keep], 0, axis)
        return ScalarField3D(self.box, c.copy())

    def __repr__(self):
        return f"ScalarField3D(degrees={self.degrees})"


# -- construction ---------------------------------------------------------


def _call_sampler(sampler, *grids):
    try:
        vals = sampler(*grids)
        vals = np.asarray(vals, dtype=float)
        if vals.shape != grids[0].shape:
            vals = np.broadcast_to(vals, grids[0].shape).astype(float)
        return vals
    except (TypeError, ValueError):
        flat = np.stack([g.ravel() for g in grids], axis=-1)
        out = np.array([float(sampler(*row)) for row in flat])
        return out.reshape(grids[0].shape)


def field_from_samples(domain, degrees, values):
    """Build a field from values on the first-kind node grid, no resolution check."""
    if isinstance(domain, Interval):
        n = degrees + 1
        vals = np.asarray(values, dtype=float)
        if vals.shape != (n,):
            raise ValueError(f"expected {n} samples, got {vals.shape}")
        return ScalarField1D(domain, _vals_to_coeffs_1d(vals))
    nx, ny, nz = (d + 1 for d in degrees)
    vals = np.asarray(values, dtype=float)
    if vals.shape != (nx, ny, nz):
        raise ValueError(f"expected grid {(nx, ny, nz)}, got {vals.shape}")
    coeffs = np.einsum("ai,bj,ck,ijk->abc", _coef_matrix(nx), _coef_matrix(ny),
                       _coef_matrix(nz), vals)
    return ScalarField3D(domain, coeffs)


def node_grid(domain, degrees):
    """Sampling grid(s) matching field_from_samples for the given degrees."""
    if isinstance(domain, Interval):
        return _nodes(domain, degrees + 1)
    xs = _nodes(domain.x, degrees[0] + 1)
    ys = _nodes(domain.y, degrees[1] + 1)
    zs = _nodes(domain.z, degrees[2] + 1)
    return np.meshgrid(xs, ys, zs, indexing="ij")


def probe_grid(domain, degrees):
    """Off-node probe grid with roughly doubled density per axis."""
    if isinstance(domain, Interval):
        return _nodes(domain, 2 * (degrees + 1) + 1)
    xs = _nodes(domain.x, 2 * (degrees[0] + 1) + 1)
    ys = _nodes(domain.y, 2 * (degrees[1] + 1) + 1)
    zs = _nodes(domain.z, 2 * (degrees[2] + 1) + 1)
    return np.meshgrid(xs, ys, zs, indexing="ij")


def resolution_defect(field, probe_values, probe_points) -> float:
    """Max probe mismatch relative to the probe scale."""
    if isinstance(field, ScalarField1D):
        approx = field(probe_points)
    else:
        approx = field(*probe_points)
    scale = max(float(np.max(np.abs(probe_values))), ZERO_FLOOR)
    return float(np.max(np.abs(approx - probe_values))) / scale


def interpolate(sampler: Callable, domain, degrees, rtol: float = TAIL_RTOL):
    """Sample a callable at Chebyshev nodes and verify on an off-node grid.

    Parameters
    ----------
    sampler : callable
        Function of one (interval domain) or three (box domain) arguments.
        Array arguments are attempted first, scalar fallback otherwise.
    domain : Interval or Box3
    degrees : int or (int, int, int)
        Series degrees per axis.
    rtol : float
        Maximum allowed probe mismatch relative to the sampled scale.

    Raises
    ------
    NotResolved
        If the interpolant misses off-node probe values by more than rtol
        in relative terms; the caller is expected to raise the degrees.
    """
    if isinstance(domain, Interval):
        xs = _nodes(domain, degrees + 1)
        field = field_from_samples(domain, degrees, _call_sampler(sampler, xs))
        pp = probe_grid(domain, degrees)
        pv = _call_sampler(sampler, pp)
    else:
        grids = node_grid(domain, degrees)
        field = field_from_samples(domain, degrees, _call_sampler(sampler, *grids))
        pp = probe_grid(domain, degrees)
        pv = _call_sampler(sampler, *pp)
    defect = resolution_defect(field, pv, pp)
    if defect > rtol:
        raise NotResolved(
            f"probe defect {defect:.3e} exceeds rtol {rtol:.1e} at degrees {degrees}")
    return field


def interpolate_auto(sampler, domain, degrees, rtol=TAIL_RTOL, max_doublings=3):
    """interpolate() with degree escalation on NotResolved."""
    last = None
    for k in range(max_doublings + 1):
        if isinstance(domain, Interval):
            degs = (degrees + 1) * 2 ** k - 1
        else:
            degs = tuple((d + 1) * 2 ** k - 1 for d in degrees)
        try:
            return interpolate(sampler, domain, degs, rtol=rtol)
        except NotResolved as exc:
            last = exc
    raise last


# -- functional operations -------------------------------------------------


def compose(outer: ScalarField1D, inner, degrees=None, rtol: float = TAIL_RTOL):
    """outer(inner(.)) re-interpolated on inner's domain."""
    if isinstance(inner, ScalarField1D):
        domain = inner.domain
        start = degrees if degrees is not None else max(
            16, min(outer.degree * max(inner.degree, 1), 64))
        return interpolate_auto(lambda x: outer(inner(x)), domain, start,
                                rtol=rtol, max_doublings=3)
    domain = inner.box
    start = degrees if degrees is not None else tuple(
        max(8, min(outer.degree * max(d, 1), 48)) for d in inner.degrees)
    return interpolate_auto(lambda x, y, z: outer(inner(x, y, z)), domain, start,
                            rtol=rtol, max_doublings=2)


def invert_monotone(f: ScalarField1D, branch: Interval,
                    degrees: int | None = None, rtol: float = TAIL_RTOL
                    ) -> ScalarField1D:
    """Inverse of f restricted to a monotone branch.

    Returns a field g on f(branch) with g(f(x)) = x. Raises NotMonotone when
    the derivative changes sign (or vanishes) on the branch.
    """
    from scipy.optimize import brentq

    df = f.derivative()
    grid = branch.sample(257)
    dvals = df(grid)
    if np.min(np.abs(dvals)) == 0.0 or np.min(dvals) * np.max(dvals) <= 0.0:
        raise NotMonotone(
            f"derivative changes sign on [{branch.lo:.6g}, {branch.hi:.6g}]")
    fa, fb = float(f(branch.lo)), float(f(branch.hi))
    target = Interval(min(fa, fb), max(fa, fb))

    def sampler(ys):
        ys = np.atleast_1d(ys)
        out = np.empty_like(ys)
        for i, y in enumerate(ys.ravel()):
            out.ravel()[i] = brentq(lambda x: float(f(x)) - y, branch.lo,
                                    branch.hi, xtol=1e-15, rtol=8.9e-16)
        return out.reshape(ys.shape)

    # the inverse of an analytic branch can have a singularity just past the
    # endpoint where |f'| is smallest, so the schedule reaches high degrees
    schedule = ([degrees] if degrees is not None
                else [32, 48, 64, 96, 128, 256, 512, 1024, 1536, 2048])
    last = None
    for deg in schedule:
        try:
            return interpolate(sampler, target, deg, rtol=rtol)
        except NotResolved as exc:
            last = exc
    raise last


def solve_implicit(target: Callable[[float], float], guess: float,
                   tol: float = 1e-13, max_iter: int = 200) -> float:
    """Damped fixed-point solve of u = target(u).

    Starts undamped; the step is halved whenever the residual grows.
    Raises NoConvergence when the residual fails to reach tol (divergent
    targets such as u -> 2u fail here rather than looping forever).
    """
    u = float(guess)
    lam = 1.0
    res = abs(target(u) - u)
    for _ in range(max_iter):
        if res <= tol:
            return u
        cand = (1.0 - lam) * u + lam * float(target(u))
        if not math.isfinite(cand):
            raise NoConvergence("iterate left the finite range")
        cand_res = abs(float(target(cand)) - cand)
        if cand_res < res or lam < 1e-12:
            u, res = cand, cand_res
            lam = min(1.0, lam * 1.5)
        else:
            lam *= 0.5
            if lam < 1e-8 and cand_res > 1e3 * tol:
                raise NoConvergence(
                    f"damping exhausted at residual {cand_res:.3e}")
    if res <= tol:
        return u
    raise NoConvergence(f"residual {res:.3e} after {max_iter} iterations")


def affine_rescale(field, new_domain):
    """Re-anchor a field on a new domain by exact affine substitution.

    The result g satisfies g(A(t)) = f(t) with A the increasing affine map
    from the old domain onto the new one. In unit coordinates the series is
    unchanged, so the coefficients carry over exactly and the round trip is
    lossless.
    """
    if isinstance(field, ScalarField1D):
        return ScalarField1D(new_domain, field.coeffs.copy())
    return ScalarField3D(new_domain, field.coeffs.copy())


# -- norms -----------------------------------------------------------------


def _norm_grid_1d(field: ScalarField1D, n: int = 801):
    return field.domain.sample(n)


def _norm_grid_3d(field: ScalarField3D, n: int = 21):
    return field.box.grid(n, n, n)


def c0_norm(field) -> float:
    """Max absolute value over a dense probe grid."""
    if isinstance(field, ScalarField1D):
        return float(np.max(np.abs(field(_norm_grid_1d(field)))))
    g = _norm_grid_3d(field)
    return float(np.max(np.abs(field(*g))))


def c1_norm(field) -> float:
    """Max over the value and all first partial derivatives on a probe grid."""
    if isinstance(field, ScalarField1D):
        xs = _norm_grid_1d(field)
        return float(max(np.max(np.abs(field(xs))),
                         np.max(np.abs(field.derivative()(xs)))))
    g = _norm_grid_3d(field)
    best = np.max(np.abs(field(*g)))
    for axis in range(3):
        best = max(best, np.max(np.abs(field.partial(axis)(*g))))
    return float(best)


def c2_norm(field) -> float:
    """c1_norm extended with all second partials (mixed included)."""
    if isinstance(field, ScalarField1D):
        xs = _norm_grid_1d(field)
        d1 = field.derivative()
        return float(max(np.max(np.abs(field(xs))), np.max(np.abs(d1(xs))),
                         np.max(np.abs(d1.derivative()(xs)))))
    g = _norm_grid_3d(field)
    best = np.max(np.abs(field(*g)))
    firsts = [field.partial(a) for a in range(3)]
    for a, fa in enumerate(firsts):
        best = max(best, np.max(np.abs(fa(*g))))
        for b2 in range(a, 3):
            best = max(best, np.max(np.abs(fa.partial(b2)(*g))))
    return float(best)


# -- serialization ---------------------------------------------------------


def _fmt(x: float) -> str:
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            raise ValueError("non-finite float in serialization")
        return format(x, ".17g")
    return json.dumps(x)


def dumps_17g(obj, indent: int = 0) -> str:
    """JSON text with floats written at 17 significant digits."""
    pad = " " * indent
    if isinstance(obj, dict):
        items = ",\n".join(
            f'{pad}  {json.dumps(str(k))}: {dumps_17g(v, indent + 2).lstrip()}'
            for k, v in obj.items())
        return f"{pad}{{\n{items}\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(np.asarray(obj).tolist()) if isinstance(obj, np.ndarray) else list(obj)
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in seq):
            return pad + "[" + ", ".join(
                _fmt(float(v)) if isinstance(v, float) else str(v) for v in seq) + "]"
        items = ",\n".join(dumps_17g(v, indent + 2) for v in seq)
        return f"{pad}[\n{items}\n{pad}]"
    if isinstance(obj, bool):
        return pad + ("true" if obj else "false")
    if isinstance(obj, float):
        return pad + _fmt(obj)
    if isinstance(obj, (int, str)) or obj is None:
        return pad + json.dumps(obj)
    if isinstance(obj, (np.floating,)):
        return pad + _fmt(float(obj))
    if isinstance(obj, (np.integer,)):
        return pad + str(int(obj))
    raise TypeError(f"cannot serialize {type(obj)!r}")


def field_to_json(field) -> str:
    if isinstance(field, ScalarField1D):
        payload = {
            "domain": [field.domain.lo, field.domain.hi],
            "degrees": [field.degree],
            "coeffs": [float(c) for c in field.coeffs],
        }
    else:
        payload = {
            "domain": [[a.lo, a.hi] for a in field.box.axes],
            "degrees": list(field.degrees),
            "coeffs": [float(c) for c in field.coeffs.ravel(order="C")],
        }
    return dumps_17g(payload)


def field_from_json(text: str):
    data = json.loads(text)
    degs = data["degrees"]
    if len(degs) == 1:
        dom = Interval(*data["domain"])
        return ScalarField1D(dom, np.array(data["coeffs"]))
    axes = [Interval(*pair) for pair in data["domain"]]
    box = Box3(*axes)
    shape = tuple(d + 1 for d in degs)
    return ScalarField3D(box, np.array(data["coeffs"]).reshape(shape, order="C"))
