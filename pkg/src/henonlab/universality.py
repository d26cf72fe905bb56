"""Average Jacobian, its universal law, and asymptotics along the tip.

The attractor carries a unique invariant measure, so log Jac F has a
well-defined average b; piece centers at a fixed level are an equal-weight
quadrature for it, and a long orbit gives an independent Birkhoff estimate.
The Jacobian of the n-th renormalization then factors as b^(2^n) times a
universal profile a(x) up to an error that decays geometrically, which is
what `jacobian_universality_fit` measures. Around the tip the composed
branch charts decompose into a unipotent part times diag(alpha, sigma,
sigma), and their nonlinear part converges to the one-dimensional limit
coordinate; `tip_decomposition` and `nonlinearity_asymptotics` quantify
both. Lyapunov exponents come from QR accumulation along the tip orbit.
"""

from dataclasses import dataclass

import numpy as np

from .cantor import build_pieces
from .errors import (DegenerateDerivative, DomainError, SingularJacobian,
                     TowerTooShallow, UnderflowFrozen)
from .funcrep import ScalarField1D
from .henon import HenonMap3D, RenormSequence
from .unimodal import UnimodalMap, presentation_tower, solve_fixed_point

__all__ = [
    "TipDerivativeDecomposition", "JacobianFit", "PowerLawReport",
    "NonlinearityReport", "LyapunovEstimate",
    "average_jacobian", "birkhoff_jacobian", "jacobian_universality_fit",
    "jac_power_law_check", "tip_decomposition", "nonlinearity_asymptotics",
    "lyapunov_exponents",
]

# smallest usable value of 2^n log b before b^(2^n) leaves double range
_LOG_FLOOR = -680.0


# -- tip anchors ---------------------------------------------------------------


def _critical_value_point(m: HenonMap3D) -> np.ndarray:
    """Seed for the tip: the critical value of the 1d part, z on the midline."""
    c = UnimodalMap.from_field(m.f).critical_point
    return np.array([float(m.f(c)), c, 0.0])


def _tips(tower: RenormSequence, k_hi: int) -> np.ndarray:
    """Tips of the sub-towers at levels 0..k_hi, shape (k_hi+1, 3).

    The tip at level k is the image of the tip at level k+1 under the
    branch chart, so one seed at the deepest level propagates down with
    the seed error shrunk by the chart contraction at every level. The
    seed itself is the critical-value point of the deepest map, which is
    where the renormalized first coordinate pins its maximum.
    """
    if k_hi >= tower.depth:
        raise TowerTooShallow(
            f"tips up to level {k_hi} need depth > {k_hi}, have {tower.depth}")
    p = _critical_value_point(tower.maps[tower.depth])
    chain = [p]
    for k in reversed(range(tower.depth)):
        p = np.array(tower.steps[k].branch(*p), dtype=float)
        chain.append(p)
    chain.reverse()
    return np.array(chain[: k_hi + 1])


# -- average Jacobian -----------------------------------------------------------


def _log_jacobians(F: HenonMap3D, x, y, z) -> np.ndarray:
    jac = np.atleast_1d(np.asarray(F.jacobian(x, y, z), dtype=float))
    if not np.all(np.isfinite(jac)) or np.any(jac == 0.0):
        raise SingularJacobian("Jac F vanishes at a sample point")
    return np.log(np.abs(jac))


def average_jacobian(F: HenonMap3D, tower: RenormSequence, n: int) -> float:
    """exp of the equal-weight average of log Jac F over level-n piece centers.

    Every level-n piece has invariant mass 2^-n, so one sample per piece
    is an exact quadrature up to the within-piece distortion, and the
    estimates at successive levels converge geometrically.
    """
    centers = np.array([p.center for p in build_pieces(tower, n)])
    logs = _log_jacobians(F, centers[:, 0], centers[:, 1], centers[:, 2])
    return float(np.exp(np.mean(logs)))


def birkhoff_jacobian(F: HenonMap3D, start, steps: int) -> float:
    """Direct-orbit estimate of the average Jacobian, exp of the mean log.

    Independent of the piece machinery: iterates F from `start` and
    averages log Jac F along the way, which converges for any point in
    the basin of the attractor.
    """
    p = np.asarray(start, dtype=float)
    acc = 0.0
    for _ in range(steps):
        acc += float(_log_jacobians(F, *p)[0])
        p = F.apply(p)
    return float(np.exp(acc / steps))


# -- universal law of the Jacobian ----------------------------------------------


@dataclass(frozen=True)
class JacobianFit:
    """Fit of the residuals E_n = max |Jac F_n / (b^(2^n) a(x)) - 1|."""

    b: float
    rho: float
    levels: tuple[int, ...]
    residuals: np.ndarray
    excluded: tuple[int, ...] = ()

    def as_dict(self) -> dict:
        return {"b": self.b, "rho": self.rho, "levels": list(self.levels),
                "E": [float(e) for e in self.residuals]}


def jacobian_universality_fit(tower: RenormSequence, a: ScalarField1D,
                              levels, b: float | None = None,
                              grid: tuple[int, int, int] = (7, 7, 5)
                              ) -> JacobianFit:
    """Measure and fit the geometric decay of the universal-law residuals.

    For each requested level the Jacobian of the renormalized map is
    compared against b^(2^n) a(x) on a probe grid, in log space since the
    power of b leaves double range quickly. Levels whose comparison scale
    underflows, or whose third-coordinate field has frozen to zero, are
    excluded; the decay rate rho comes from least squares on log E_n and
    needs at least three surviving levels.
    """
    levels = sorted(set(int(n) for n in levels))
    if not levels or levels[0] < 1:
        raise DomainError("levels must be positive")
    if levels[-1] > tower.depth:
        raise TowerTooShallow(
            f"level {levels[-1]} requested, tower has {tower.depth}")
    if b is None:
        b = average_jacobian(tower.maps[0], tower, min(tower.depth, 5))
    if not 0.0 < b < 1.0:
        raise DomainError(f"average Jacobian {b:.3g} outside (0, 1)")

    box = tower.maps[0].box
    gx, gy, gz = (g.ravel() for g in box.grid(*grid))
    # the profile is a ratio of derivatives of the limit coordinate, so it
    # carries over to the standing box by straight affine reframing
    log_a = np.log(a(a.domain.from_unit(box.x.to_unit(gx))))

    used: list[int] = []
    excluded: list[int] = []
    residuals: list[float] = []
    for n in levels:
        target = 2.0 ** n * np.log(b)
        if target < _LOG_FLOOR:
            excluded.append(n)
            continue
        jac = np.asarray(tower.maps[n].jacobian(gx, gy, gz), dtype=float)
        if np.any(jac <= 0.0) or not np.all(np.isfinite(jac)):
            excluded.append(n)
            continue
        resid = np.expm1(np.log(jac) - target - log_a)
        used.append(n)
        residuals.append(float(np.max(np.abs(resid))))
    if len(used) < 3:
        raise UnderflowFrozen(
            f"only {len(used)} usable levels, {len(excluded)} excluded")
    slope = np.polyfit(np.asarray(used, dtype=float),
                       np.log(residuals), 1)[0]
    return JacobianFit(b=float(b), rho=float(np.exp(slope)),
                       levels=tuple(used),
                       residuals=np.asarray(residuals),
                       excluded=tuple(excluded))


@dataclass(frozen=True)
class PowerLawReport:
    """Per-piece ratios Jac F^(2^n) / b^(2^n) and their distortion."""

    level: int
    ratios: np.ndarray
    worst: float
    distortion: float


def jac_power_law_check(F: HenonMap3D, tower: RenormSequence, n: int,
                        b: float | None = None) -> PowerLawReport:
    """Check Jac F^(2^n) = b^(2^n) (1 + small) one piece at a time.

    The 2^n-step Jacobian at a piece sample is accumulated as a sum of
    one-step logs along the orbit, never as a linear-space product. The
    same sum started from a second point of the piece bounds the
    within-piece distortion, reported as the largest log spread.
    """
    pieces = build_pieces(tower, n)
    if b is None:
        b = average_jacobian(F, tower, n)
    if not 0.0 < b < 1.0:
        raise DomainError(f"average Jacobian {b:.3g} outside (0, 1)")
    target = 2.0 ** n * np.log(b)
    if target < _LOG_FLOOR:
        raise UnderflowFrozen(f"b^(2^{n}) below double range")

    ratios = np.empty(len(pieces))
    spread = 0.0
    for i, piece in enumerate(pieces):
        sums = []
        for start in (piece.center, piece.probes[:, 0]):
            p = np.asarray(start, dtype=float)
            acc = 0.0
            for _ in range(2 ** n):
                acc += float(_log_jacobians(F, *p)[0])
                p = F.apply(p)
            sums.append(acc)
        ratios[i] = np.exp(sums[0] - target)
        spread = max(spread, abs(sums[0] - sums[1]))
    return PowerLawReport(level=n, ratios=ratios,
                          worst=float(np.max(np.abs(ratios - 1.0))),
                          distortion=float(spread))


# -- derivative decomposition at the tip -----------------------------------------


@dataclass(frozen=True)
class TipDerivativeDecomposition:
    """Factors D_k = unipotent(t_k, u_k, d_k) . diag(alpha_k, sigma_k, sigma_k).

    matrices[k] holds the numerically differentiated D_k; tips[k] the
    anchor points the translated charts fix; defect the worst reassembly
    error over all levels.
    """

    levels: np.ndarray
    alpha: np.ndarray
    sigma: np.ndarray
    t: np.ndarray
    u: np.ndarray
    d: np.ndarray
    matrices: np.ndarray
    tips: np.ndarray
    defect: float

    def reassemble(self, i: int) -> np.ndarray:
        upper = np.array([[1.0, self.t[i], self.u[i]],
                          [0.0, 1.0, 0.0],
                          [0.0, self.d[i], 1.0]])
        return upper @ np.diag([self.alpha[i], self.sigma[i], self.sigma[i]])


def _chart_derivative(step, base: np.ndarray, h: float) -> np.ndarray:
    """Central-difference derivative of the branch chart at `base`."""
    offsets = np.vstack([np.eye(3), -np.eye(3)]) * h
    pts = base[None, :] + offsets
    out = np.column_stack(step.branch(pts[:, 0], pts[:, 1], pts[:, 2]))
    return (out[:3] - out[3:]).T / (2.0 * h)


def tip_decomposition(tower: RenormSequence, k_max: int,
                      fd_step: float = 1e-6) -> TipDerivativeDecomposition:
    """Differentiate each translated chart at its anchor and factor it.

    The chart between consecutive tips has derivative with second and
    third diagonal entries both equal to the rescaling, zero lower-left
    block, and a y->z coupling only; solving the entry equations of the
    unipotent times diagonal form is therefore exact, and the reassembly
    defect only measures finite-difference noise on the structural zeros.
    """
    if k_max < 0:
        raise DomainError("k_max must be nonnegative")
    if tower.depth < k_max + 2:
        raise TowerTooShallow(
            f"decomposition to level {k_max} needs depth {k_max + 2}, "
            f"have {tower.depth}")
    tips = _tips(tower, k_max + 1)
    h = fd_step * tower.maps[0].box.diameter

    ks = np.arange(k_max + 1)
    alpha = np.empty(k_max + 1)
    sigma = np.empty(k_max + 1)
    t = np.empty(k_max + 1)
    u = np.empty(k_max + 1)
    d = np.empty(k_max + 1)
    mats = np.empty((k_max + 1, 3, 3))
    defect = 0.0
    for k in ks:
        D = _chart_derivative(tower.steps[k], tips[k + 1], h)
        s = D[1, 1]
        if abs(s) < 1e-300:
            raise DegenerateDerivative(f"sigma vanishes at level {k}")
        mats[k] = D
        alpha[k] = D[0, 0]
        sigma[k] = s
        t[k] = D[0, 1] / s
        u[k] = D[0, 2] / s
        d[k] = D[2, 1] / s
        upper = np.array([[1.0, t[k], u[k]],
                          [0.0, 1.0, 0.0],
                          [0.0, d[k], 1.0]])
        back = upper @ np.diag([alpha[k], s, s])
        defect = max(defect, float(np.max(np.abs(back - D))))
    return TipDerivativeDecomposition(levels=ks, alpha=alpha, sigma=sigma,
                                      t=t, u=u, d=d, matrices=mats, tips=tips,
                                      defect=defect)


# -- nonlinear part of the coordinate change -------------------------------------


@dataclass(frozen=True)
class NonlinearityReport:
    """Quadratic profile and limit-coordinate residuals of S = D^-1 Psi - id."""

    n: int
    k: int
    a: np.ndarray
    fit_residual: float
    v_residual: float
    dx_residual: float
    r_norm: float
    hull_diameter: float


def _v_limit() -> ScalarField1D:
    fp = solve_fixed_point()
    return presentation_tower(fp).v


def nonlinearity_asymptotics(tower: RenormSequence, n: int, k: int = 0,
                             v: ScalarField1D | None = None,
                             grid: int = 9) -> NonlinearityReport:
    """Extract S^n_k from the chart between levels k and n and fit its shape.

    The chart is evaluated on the standing box and recentered at the tips,
    so its domain in translated coordinates is the box shifted by the
    level-n tip; the image hull is the corresponding piece at level k,
    whose diameter is reported alongside the coefficients since the fit
    is only meaningful on that scale. The first coordinate is fit per
    x-slice with a quadratic in (y, z), sharing the three quadratic
    coefficients across slices by averaging; the slice constants absorb
    the one-dimensional profile, which is then compared against the limit
    coordinate v and its derivative along the line through the tip.
    """
    if not 0 <= k < n:
        raise DomainError(f"need 0 <= k < n, got k={k}, n={n}")
    if tower.depth <= n:
        raise TowerTooShallow(
            f"levels up to {n} need depth > {n}, have {tower.depth}")
    if v is None:
        v = _v_limit()
    vp = v.derivative()
    tips = _tips(tower, n)
    half = tower.maps[0].box.x.half
    if abs(tower.maps[0].box.x.mid) > 1e-9 * half:
        raise DomainError("standing box must be centered on the x axis")

    h = 1e-6 * tower.maps[0].box.diameter
    D = np.eye(3)
    for j in range(k, n):
        D = D @ _chart_derivative(tower.steps[j], tips[j + 1], h)

    box = tower.maps[0].box
    gx, gy, gz = (g.ravel() for g in box.grid(grid, grid, grid))
    cx, cy, cz = gx.copy(), gy.copy(), gz.copy()
    for j in reversed(range(k, n)):
        cx, cy, cz = tower.steps[j].branch(cx, cy, cz)
    image = np.column_stack([cx, cy, cz])
    lengths = image.max(axis=0) - image.min(axis=0)
    hull_diameter = float(np.sqrt(np.sum(lengths ** 2)))

    w = np.column_stack([gx, gy, gz]) - tips[n]
    S = np.linalg.solve(D, (image - tips[k]).T).T - w

    # per-slice quadratic in (y, z); the grid is a product, so each slice
    # sees the same regressors and the constant column absorbs the x-profile
    wy = w[:, 1].reshape(grid, grid * grid)
    wz = w[:, 2].reshape(grid, grid * grid)
    sx = S[:, 0].reshape(grid, grid * grid)
    basis = np.stack([np.ones_like(wy[0]), wy[0], wz[0],
                      wy[0] ** 2, wy[0] * wz[0], wz[0] ** 2], axis=1)
    coeffs, *_ = np.linalg.lstsq(basis, sx.T, rcond=None)
    fit_residual = float(np.max(np.abs(basis @ coeffs - sx.T)))
    a = coeffs[3:6].mean(axis=1)

    # the limit coordinate lives on [-2, 0] in the frame where the box has
    # half-width one; values scale linearly, slopes carry over unchanged
    quad = a[0] * w[:, 1] ** 2 + a[1] * w[:, 1] * w[:, 2] + a[2] * w[:, 2] ** 2
    vx = half * v(np.clip(w[:, 0] / half, -2.0, 0.0))
    v_residual = float(np.max(np.abs(w[:, 0] + S[:, 0] - vx - quad)))
    r_norm = float(np.max(np.abs(S[:, 2])))

    # derivative along the line through the tip, by the chain rule on the
    # analytic chart derivatives rather than differencing the coarse grid
    line = box.x.sample(161)
    dxs = np.empty_like(line)
    for i, x in enumerate(line):
        p = np.array([x, tips[n][1], tips[n][2]])
        M = np.eye(3)
        for j in reversed(range(k, n)):
            M = tower.steps[j].branch_derivative(*p) @ M
            p = np.array(tower.steps[j].branch(*p), dtype=float)
        dxs[i] = np.linalg.solve(D, M[:, 0])[0]
    wline = np.clip((line - tips[n][0]) / half, -2.0, 0.0)
    dx_residual = float(np.max(np.abs(dxs - vp(wline))))

    return NonlinearityReport(n=n, k=k, a=a, fit_residual=fit_residual,
                              v_residual=v_residual, dx_residual=dx_residual,
                              r_norm=r_norm, hull_diameter=hull_diameter)


# -- Lyapunov exponents ----------------------------------------------------------


@dataclass(frozen=True)
class LyapunovEstimate:
    """QR exponents along the tip orbit, largest first, with 3-sigma bars."""

    chi0: float
    chi1: float
    chi2: float
    bar0: float
    bar1: float
    bar2: float
    steps: int


def lyapunov_exponents(F: HenonMap3D, tower: RenormSequence,
                       steps: int) -> LyapunovEstimate:
    """Accumulate log |diag R| of QR-reorthogonalized derivative products.

    Starts from the tip so the orbit samples the attractor from step one.
    Error bars are 3 / sqrt(steps) times the per-step spread of each log
    stretch, the usual i.i.d.-style width, honest here because the orbit
    decorrelates under the adding machine.
    """
    if steps < 2:
        raise DomainError("need at least two steps")
    p = _tips(tower, 0)[0]
    Q = np.eye(3)
    sums = np.zeros(3)
    squares = np.zeros(3)
    for _ in range(steps):
        J = F.derivative(*p)
        if not np.all(np.isfinite(J)) or abs(np.linalg.det(J)) < 1e-300:
            raise SingularJacobian("derivative along the orbit is singular")
        Q, R = np.linalg.qr(J @ Q)
        r = np.log(np.abs(np.diag(R)))
        sums += r
        squares += r * r
        p = F.apply(p)
    chi = sums / steps
    spread = np.sqrt(np.maximum(squares / steps - chi ** 2, 0.0))
    bars = 3.0 * spread / np.sqrt(steps)
    order = np.argsort(-chi)
    chi, bars = chi[order], bars[order]
    return LyapunovEstimate(chi0=float(chi[0]), chi1=float(chi[1]),
                            chi2=float(chi[2]), bar0=float(bars[0]),
                            bar1=float(bars[1]), bar2=float(bars[2]),
                            steps=steps)
