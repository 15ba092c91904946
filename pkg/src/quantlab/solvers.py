"""Quantizer solvers: Lloyd alternation, exact 1D dynamic programming,
uniform-interval constructions on compact subsets of [0,1], greedy covers,
and i.i.d. random quantizers.

The 1D DP is the ground-truth anchor: globally optimal cell boundaries on a
grid, refined to the continuum stationary point. Lloyd is the general-purpose
heuristic; it reports best-found values and never claims global optimality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from .error import INF, ErrorEstimate, check_order, error_eval, error_exact_1d
from .measures import (Law1D, Measure, cantor_cylinders, derive_seed,
                       piecewise_uniform, sample)
from .spatial import PointCloud, _as_points

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class SolverConfig:
    max_iters: int = 200
    rel_tol: float = 1e-9
    restarts: int = 8
    empty_cell_policy: str = "reseed-at-farthest"
    inner_1d_tol: float = 1e-10
    working_sample: int | None = None  # default 1e5 * max(1, d/2)
    eval_samples: int = 1 << 19

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")


@dataclass(frozen=True)
class Provenance:
    solver: str
    seed: object
    iterations: int
    converged: bool
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Quantizer:
    points: np.ndarray
    N: int
    p: float
    error: ErrorEstimate
    provenance: Provenance

    def __post_init__(self):
        object.__setattr__(self, "points",
                           np.atleast_2d(np.asarray(self.points, dtype=float)))


# ---------------------------------------------------------------------------
# seeding

def _seed_pp(points, weights, N, rng):
    n = points.shape[0]
    if N > n:
        raise ValueError("budget exceeds number of points")
    probs = weights / weights.sum()
    chosen = np.empty(N, dtype=int)
    chosen[0] = rng.choice(n, p=probs)
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for k in range(1, N):
        d2[chosen[:k]] = 0.0
        score = weights * d2
        total = score.sum()
        if total <= 0:
            remaining = np.setdiff1d(np.arange(n), chosen[:k])
            chosen[k] = rng.choice(remaining)
        else:
            chosen[k] = rng.choice(n, p=score / total)
        d2 = np.minimum(d2, np.sum((points - points[chosen[k]]) ** 2, axis=1))
    return points[chosen].copy()


def seed_plusplus(cloud: PointCloud, N: int, seed) -> np.ndarray:
    """Distance-squared-proportional seeding over a weighted cloud."""
    rng = np.random.default_rng(seed)
    return _seed_pp(cloud.points, cloud.weights, N, rng)


# ---------------------------------------------------------------------------
# single-cell centers

def _weighted_median_1d(x, w):
    order = np.argsort(x, kind="stable")
    xs, ws = x[order], w[order]
    cum = np.cumsum(ws)
    k = int(np.searchsorted(cum, 0.5 * cum[-1]))
    return float(xs[min(k, len(xs) - 1)])


def _weiszfeld(points, weights, tol=1e-10, max_iter=10000):
    y = np.average(points, axis=0, weights=weights)
    for _ in range(max_iter):
        diff = points - y
        dist = np.linalg.norm(diff, axis=1)
        at = dist < 1e-14
        if np.any(at):
            k = int(np.argmax(at))
            others = ~at
            if not np.any(others):
                return points[k]
            inv = weights[others] / dist[others]
            R = np.sum(inv[:, None] * diff[others], axis=0)
            r = np.linalg.norm(R)
            wk = weights[at].sum()
            if r <= wk:
                return y
            T = np.sum(inv[:, None] * points[others], axis=0) / inv.sum()
            gamma = min(1.0, wk / r)
            y_new = (1.0 - gamma) * T + gamma * y
        else:
            inv = weights / dist
            y_new = np.sum(inv[:, None] * points, axis=0) / inv.sum()
        if np.linalg.norm(y_new - y) < tol:
            return y_new
        y = y_new
    return y


def _circumcircle(a, b, c):
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]))
    if abs(d) < 1e-14 * max(1.0, np.abs([a, b, c]).max() ** 2):
        return None
    ux = ((a @ a) * (b[1] - c[1]) + (b @ b) * (c[1] - a[1]) + (c @ c) * (a[1] - b[1])) / d
    uy = ((a @ a) * (c[0] - b[0]) + (b @ b) * (a[0] - c[0]) + (c @ c) * (b[0] - a[0])) / d
    return np.array([ux, uy])


def _miniball_2d(points, rng):
    """Exact minimum enclosing circle (randomized incremental)."""
    P = points[rng.permutation(len(points))]
    eps = 1e-12 * (1.0 + np.abs(P).max())
    c, r = P[0].copy(), 0.0
    for i in range(1, len(P)):
        if np.linalg.norm(P[i] - c) <= r + eps:
            continue
        c, r = P[i].copy(), 0.0
        for j in range(i):
            if np.linalg.norm(P[j] - c) <= r + eps:
                continue
            c = 0.5 * (P[i] + P[j])
            r = np.linalg.norm(P[i] - c)
            for k in range(j):
                if np.linalg.norm(P[k] - c) <= r + eps:
                    continue
                cc = _circumcircle(P[i], P[j], P[k])
                if cc is None:
                    # collinear triple: the diameter pair encloses all three
                    tri = np.array([P[i], P[j], P[k]])
                    dmax, pair = -1.0, (0, 1)
                    for u in range(3):
                        for v in range(u + 1, 3):
                            dd = np.linalg.norm(tri[u] - tri[v])
                            if dd > dmax:
                                dmax, pair = dd, (u, v)
                    cc = 0.5 * (tri[pair[0]] + tri[pair[1]])
                c = cc
                r = np.linalg.norm(P[i] - c)
    return c


def _badoiu_clarkson(points, iters=4000):
    c = points.mean(axis=0)
    for k in range(1, iters + 1):
        far = points[np.argmax(np.linalg.norm(points - c, axis=1))]
        c = c + (far - c) / (k + 1.0)
    return c


def cell_center(points, weights=None, p=2.0) -> np.ndarray:
    """argmin_a of the weighted p-th moment of a cell around a.

    p=2 weighted mean (exact); p=1 geometric median (exact in 1D, Weiszfeld
    with vertex handling otherwise); other finite p coordinate-wise descent;
    p=inf minimum enclosing ball (exact in 1D/2D, iterative in higher d).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = pts.shape
    if n == 0:
        raise ValueError("empty cell")
    w = np.full(n, 1.0) if weights is None else np.asarray(weights, dtype=float)
    p = check_order(p)

    if math.isinf(p):
        if d == 1:
            return np.array([0.5 * (pts.min() + pts.max())])
        if d == 2:
            return _miniball_2d(pts, np.random.default_rng(0))
        return _badoiu_clarkson(pts)
    if p == 2.0:
        return np.average(pts, axis=0, weights=w)
    if p == 1.0:
        if d == 1:
            return np.array([_weighted_median_1d(pts[:, 0], w)])
        return _weiszfeld(pts, w)

    # general finite p: cyclic coordinate-wise minimization of a convex objective
    y = np.average(pts, axis=0, weights=w)
    for _ in range(200):
        moved = 0.0
        for c in range(d):
            lo, hi = pts[:, c].min(), pts[:, c].max()
            if hi - lo < 1e-15:
                continue

            def f(v, _c=c, _y=y):
                z = _y.copy()
                z[_c] = v
                return float(np.sum(w * np.linalg.norm(pts - z, axis=1) ** p))

            res = minimize_scalar(f, bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-12})
            moved = max(moved, abs(res.x - y[c]))
            y[c] = res.x
        if moved < 1e-10:
            break
    return y


# ---------------------------------------------------------------------------
# Lloyd alternation

def _centers_update(W, assign, S, p, dist):
    """One center step with reseed-at-farthest for empty cells."""
    N, d = S.shape
    counts = np.bincount(assign, minlength=N)
    S_new = S.copy()
    if p == 2.0:
        sums = np.zeros((N, d))
        np.add.at(sums, assign, W)
        ok = counts > 0
        S_new[ok] = sums[ok] / counts[ok, None]
    else:
        for k in np.nonzero(counts > 0)[0]:
            S_new[k] = cell_center(W[assign == k], None, p)
    empties = np.nonzero(counts == 0)[0]
    reseeded = len(empties) > 0
    if reseeded:
        dcur = dist.copy()
        for k in empties:
            far = int(np.argmax(dcur))
            S_new[k] = W[far]
            dcur = np.minimum(dcur, np.linalg.norm(W - W[far], axis=1))
    return S_new, reseeded


def lloyd(m: Measure, N: int, p, cfg: SolverConfig | None = None, seed=0) -> Quantizer:
    """Multi-start Lloyd alternation on a fixed working sample.

    The working-sample objective V_p is non-increasing across iterations
    (empty cells reseed at the farthest sample point, which preserves
    descent). The returned error is re-evaluated independently: exact
    quadrature for 1D densities and curves, Monte Carlo otherwise.
    """
    p = check_order(p)
    if math.isinf(p):
        raise ValueError("lloyd handles finite p only")
    if N < 1:
        raise ValueError("N must be >= 1")
    cfg = cfg or SolverConfig()
    n_work = cfg.working_sample or int(1e5 * max(1.0, m.ambient_dim / 2.0))
    W = sample(m, n_work, derive_seed(seed, "work")).points

    best = None
    for rs in range(cfg.restarts):
        rng = np.random.default_rng(derive_seed(seed, "restart", rs))
        S = _seed_pp(W, np.full(len(W), 1.0), N, rng)
        v_hist = []
        converged = False
        for _ in range(cfg.max_iters):
            dist, assign = cKDTree(S).query(W)
            V = float(np.mean(dist ** p))
            v_hist.append(V)
            if (len(v_hist) >= 2
                    and v_hist[-2] - V <= cfg.rel_tol * max(v_hist[-2], 1e-300)):
                converged = True
                break
            S, _ = _centers_update(W, assign, S, p, dist)
        key = (v_hist[-1], tuple(np.sort(S.ravel())))
        if best is None or key < best[0]:
            best = (key, S, v_hist, converged)

    _, S, v_hist, converged = best
    order = np.lexsort(S.T[::-1])
    S = S[order]
    err = error_eval(m, S, p, n_mc=cfg.eval_samples, seed=derive_seed(seed, "eval"))
    prov = Provenance("lloyd", seed, len(v_hist), converged,
                      details={"restarts": cfg.restarts, "v_history": v_hist,
                               "working_sample": n_work})
    return Quantizer(S, N, p, err, prov)


# ---------------------------------------------------------------------------
# exact 1D dynamic programming

class _CellOracle:
    """Optimal single-point cost of interval cells [l, r] for one (law, p).

    Works from cumulative moments, so cost evaluation never re-integrates the
    density; the general-p fall-back runs a vectorized golden section.
    """

    def __init__(self, law: Law1D, p: float):
        self.law = law
        self.p = float(p)
        self.constant = law.constant

    def centers_costs(self, ls, rs, moments_l=None, moments_r=None):
        ls = np.asarray(ls, dtype=float)
        rs = np.asarray(rs, dtype=float)
        if self.constant is not None:
            h = np.maximum(rs - ls, 0.0)
            centers = 0.5 * (ls + rs)
            costs = self.constant * 2.0 * (h / 2.0) ** (self.p + 1) / (self.p + 1)
            return centers, costs
        if self.p in (1.0, 2.0):
            m0l, m1l, m2l = moments_l if moments_l is not None else self.law.moments(ls)
            m0r, m1r, m2r = moments_r if moments_r is not None else self.law.moments(rs)
            mass = m0r - m0l
            safe = np.maximum(mass, 1e-300)
            if self.p == 2.0:
                centers = np.where(mass > 0, (m1r - m1l) / safe, 0.5 * (ls + rs))
                costs = np.maximum((m2r - m2l) - (m1r - m1l) ** 2 / safe, 0.0)
                return centers, np.where(mass > 0, costs, 0.0)
            med = self.law.ppf(0.5 * (m0l + m0r))
            med = np.where(mass > 0, med, 0.5 * (ls + rs))
            m0m, m1m, _ = self.law.moments(med)
            costs = (m1r - m1m) - med * (m0r - m0m) + med * (m0m - m0l) - (m1m - m1l)
            return med, np.maximum(np.where(mass > 0, costs, 0.0), 0.0)
        return self._golden(ls, rs)

    def _moment_about(self, ls, rs, a):
        """Vectorized GL quadrature of |x-a|^p rho over [l, a] plus [a, r]."""
        out = np.zeros_like(a)
        for lo, hi in ((ls, a), (a, rs)):
            half = 0.5 * (hi - lo)
            mid = 0.5 * (hi + lo)
            x = mid[..., None] + half[..., None] * _GL_NODES
            fx = np.asarray(self.law.pdf(x), dtype=float)
            fx = np.broadcast_to(fx, x.shape)
            out = out + np.sum(half[..., None] * _GL_WEIGHTS * fx
                               * np.abs(x - a[..., None]) ** self.p, axis=-1)
        return out

    def _golden(self, ls, rs, iters=60):
        a = ls.astype(float).copy()
        b = rs.astype(float).copy()
        for _ in range(iters):
            c = b - _INVPHI * (b - a)
            d = a + _INVPHI * (b - a)
            left = self._moment_about(ls, rs, c) < self._moment_about(ls, rs, d)
            b = np.where(left, d, b)
            a = np.where(left, a, c)
        centers = 0.5 * (a + b)
        return centers, self._moment_about(ls, rs, centers)


class Dp1dSolver:
    """Globally optimal 1D quantizers on a boundary grid, for all N at once.

    Cell boundaries are restricted to a uniform grid, per-cell optimal costs
    are closed-form (constant density, p in {1,2}) or vectorized
    golden-section, and a layered DP finds optimal boundaries for every
    budget up to n_max. `solve` refines the grid solution by alternating
    exact cell centers with midpoint boundaries until stationary.
    """

    def __init__(self, m: Measure, p, n_max: int, grid_size: int | None = None):
        p = check_order(p)
        if math.isinf(p):
            raise ValueError("dp solver handles finite p only")
        if m.law is None or m.kind != "density1d":
            raise ValueError("dp solver needs a density1d measure")
        law = m.law
        general = law.constant is None and p not in (1.0, 2.0)
        if grid_size is None:
            grid_size = int(np.clip(8 * n_max, 64 if general else 1024,
                                    512 if general else 2048))
        if grid_size < 4 * n_max:
            raise ValueError("grid_size must be at least 4N")
        self.measure = m
        self.p = p
        self.n_max = int(n_max)
        self.grid = np.linspace(law.lo, law.hi, grid_size + 1)
        self.oracle = _CellOracle(law, p)

        G = grid_size
        ii, jj = np.triu_indices(G + 1, k=1)
        if law.constant is None and p in (1.0, 2.0):
            nodal = law.moments(self.grid)  # one pass; pairs index into it
            ml = tuple(a[ii] for a in nodal)
            mr = tuple(a[jj] for a in nodal)
            _, costs = self.oracle.centers_costs(self.grid[ii], self.grid[jj],
                                                 moments_l=ml, moments_r=mr)
        else:
            _, costs = self.oracle.centers_costs(self.grid[ii], self.grid[jj])
        C = np.full((G + 1, G + 1), np.inf)
        C[ii, jj] = costs
        CT = np.ascontiguousarray(C.T)

        # D[k][j] = optimal cost of covering [grid[0], grid[j]] with k cells
        D = C[0].copy()
        back = np.zeros((self.n_max + 1, G + 1), dtype=np.int32)
        self._grid_V = {1: float(D[G])}
        for k in range(2, self.n_max + 1):
            M = CT + D[None, :]
            arg = np.argmin(M, axis=1)
            D = M[np.arange(G + 1), arg]
            back[k] = arg
            self._grid_V[k] = float(D[G])
        self._back = back

    def grid_boundaries(self, N: int) -> np.ndarray:
        """Interior cell boundaries of the grid-optimal N-cell solution."""
        if not 1 <= N <= self.n_max:
            raise ValueError("N out of range for this solver")
        G = len(self.grid) - 1
        idx = []
        j = G
        for k in range(N, 1, -1):
            j = int(self._back[k][j])
            idx.append(j)
        return self.grid[np.array(idx[::-1], dtype=int)]

    def grid_value(self, N: int) -> float:
        return self._grid_V[N]

    def _gmap(self, b):
        """Midpoint-of-adjacent-centers map whose fixed points are stationary."""
        lo, hi = self.grid[0], self.grid[-1]
        edges = np.concatenate([[lo], b, [hi]])
        centers, _ = self.oracle.centers_costs(edges[:-1], edges[1:])
        return 0.5 * (centers[:-1] + centers[1:])

    def _refine(self, bounds, tol=1e-13, sweeps=40, newton_iters=12):
        """Polish grid boundaries to the continuum stationarity system.

        Plain sweeps damp the grid-snap oscillation quickly but relax smooth
        deviation modes at rate 1 - O(1/N^2), so after a few sweeps a Newton
        step with a finite-difference tridiagonal Jacobian finishes the job
        (one step suffices for constant densities, where the map is linear).
        """
        lo, hi = self.grid[0], self.grid[-1]
        span = hi - lo
        b = np.asarray(bounds, dtype=float).copy()
        n = b.size
        if n == 0:
            return b
        for _ in range(sweeps):
            nb = self._gmap(b)
            if np.max(np.abs(nb - b)) < tol * span:
                return nb
            b = nb

        from scipy.linalg import solve_banded

        eps = 1e-7 * span
        for _ in range(newton_iters):
            F = b - self._gmap(b)
            if np.max(np.abs(F)) < tol * span:
                break
            diag = np.ones(n)
            sup = np.zeros(n)  # sup[j] = dF_{j-1}/db_j
            sub = np.zeros(n)  # sub[j] = dF_{j+1}/db_j
            for color in range(3):
                mask = (np.arange(n) % 3) == color
                bp = b.copy()
                bp[mask] += eps
                dF = ((bp - self._gmap(bp)) - F) / eps
                for j in np.nonzero(mask)[0]:
                    diag[j] = dF[j]
                    if j > 0:
                        sup[j] = dF[j - 1]
                    if j + 1 < n:
                        sub[j] = dF[j + 1]
            ab = np.zeros((3, n))
            ab[0, 1:] = sup[1:]
            ab[1] = diag
            ab[2, :-1] = sub[:-1]
            try:
                step = solve_banded((1, 1), ab, F)
            except Exception:
                b = self._gmap(b)
                continue
            b_new = b - step
            edges = np.concatenate([[lo], b_new, [hi]])
            if np.all(np.diff(edges) > 0):
                b = b_new
            else:
                b = self._gmap(b)
        return b

    def solve(self, N: int, refine: bool = True) -> Quantizer:
        b = self.grid_boundaries(N)
        if refine and N > 1:
            b = self._refine(b)
        lo, hi = self.grid[0], self.grid[-1]
        edges = np.concatenate([[lo], b, [hi]])
        centers, costs = self.oracle.centers_costs(edges[:-1], edges[1:])
        centers = np.sort(centers)
        V = float(np.sum(costs))
        err = ErrorEstimate(V ** (1.0 / self.p), 0.0, 0, "exact1d")
        prov = Provenance("dp1d", None, 0, True,
                          details={"grid_size": len(self.grid) - 1,
                                   "refined": bool(refine),
                                   "grid_value": self.grid_value(N)})
        return Quantizer(centers.reshape(-1, 1), N, self.p, err, prov)


def dp_optimal_1d(m: Measure, N: int, p, grid_size: int | None = None,
                  refine: bool = True) -> Quantizer:
    """Exact (grid + refinement) optimal 1D quantizer for a density measure."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if grid_size is not None and N >= grid_size:
        raise ValueError("N must be smaller than grid_size")
    return Dp1dSolver(m, p, n_max=N, grid_size=grid_size).solve(N, refine=refine)


# ---------------------------------------------------------------------------
# uniform-interval construction on compact K in [0,1]

def interval_quantizer(K, N: int, p) -> Quantizer:
    """Quantizer from the uniform interval partition of [0,1] restricted to K.

    K is a finite union of closed intervals. Each of the N equal subintervals
    I with positive-length overlap with K contributes the point of K cap I
    minimizing the p-th moment of the whole subinterval I; subintervals
    meeting K in measure zero are dropped, so the returned set may have fewer
    than N points.
    """
    p = check_order(p)
    if math.isinf(p):
        raise ValueError("interval_quantizer handles finite p only")
    comps = sorted((float(a), float(b)) for a, b in K if b > a)
    if not comps or sum(b - a for a, b in comps) <= 0:
        raise ValueError("K has zero length")
    for a, b in comps:
        if a < -1e-12 or b > 1 + 1e-12:
            raise ValueError("K must lie in [0, 1]")

    pts = []
    for k in range(N):
        lo, hi = k / N, (k + 1) / N
        mid = 0.5 * (lo + hi)
        best = None
        for a, b in comps:
            u, v = max(a, lo), min(b, hi)
            if v - u <= 1e-15:
                continue
            cand = min(max(mid, u), v)  # moment is strictly convex: projected min
            val = ((hi - cand) ** (p + 1) + (cand - lo) ** (p + 1)) / (p + 1)
            if best is None or val < best[0] - 1e-18:
                best = (val, cand)
        if best is not None:
            pts.append(best[1])

    pts = np.array(sorted(pts))
    nu = piecewise_uniform(comps, normalize=False)
    err = error_exact_1d(nu, pts, p)
    prov = Provenance("interval-construction", None, 0, True,
                      details={"n_points": len(pts), "budget": N})
    return Quantizer(pts.reshape(-1, 1), N, p, err, prov)


# ---------------------------------------------------------------------------
# covers

def farthest_point_cover(A: PointCloud, N: int, seed=0) -> Quantizer:
    """Greedy k-center cover of the cloud; radius within 2x of optimal."""
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    first = int(rng.integers(A.n))
    centers = [first]
    dist = np.linalg.norm(A.points - A.points[first], axis=1)
    while len(centers) < min(N, A.n):
        far = int(np.argmax(dist))
        centers.append(far)
        dist = np.minimum(dist, np.linalg.norm(A.points - A.points[far], axis=1))
    pts = A.points[np.array(centers)]
    radius = float(dist.max())
    err = ErrorEstimate(radius, 0.0, 0, "sup")
    prov = Provenance("farthest-point", seed, len(centers), True,
                      details={"two_approx": True})
    return Quantizer(pts, N, INF, err, prov)


def random_quantizer(nu: Measure, N: int, seed) -> np.ndarray:
    """N i.i.d. draws from nu, used as a (random) quantizer point set."""
    return sample(nu, N, seed).points


# ---------------------------------------------------------------------------
# exact middle-thirds Cantor covers

def cantor_covering_radius(N: int) -> float:
    """Exact e_{N,inf} of the middle-thirds Cantor set: 3^(-floor(log2 N))/2.

    With fewer than 2^(k+1) points some depth-k cylinder holds at most one
    center, and a single ball needs radius half the cylinder width.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    k = int(math.floor(math.log2(N) + 1e-12))
    return 3.0 ** (-k) / 2.0


def cantor_cover(N: int):
    """Optimal cover points (cylinder midpoints) and exact covering radius."""
    if N < 1:
        raise ValueError("N must be >= 1")
    k = int(math.floor(math.log2(N) + 1e-12))
    pts = cantor_cylinders(k) + 3.0 ** (-k) / 2.0
    return pts.reshape(-1, 1), cantor_covering_radius(N)
