"""Feasible regions inside the unit cube and their geometric oracles.

Every body is a convex subset of [0,1]^n from a closed list of kinds:

* ``hypercube``    -- the full cube (down-closed),
* ``budget``       -- {x : <costs, x> <= limit} with costs >= 0 (down-closed),
* ``budget-band``  -- {x : lower <= <costs, x> <= upper}, possibly not
  down-closed,
* ``polytope``     -- {x : A x <= b} intersected with the cube.

Membership, Euclidean projection, linear maximization and the minimum
infinity-norm point are exact (or certified to the documented tolerance) for
all kinds; that is the reason the list is closed rather than an arbitrary
membership oracle.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

FEASIBILITY_TOL = 1e-9
PROJECTION_TOL = 1e-7
PROJECTION_MAX_CYCLES = 10_000


class GeometryError(ValueError):
    """Ill-posed body or operand (dimension mismatch, infeasible data)."""


class ProjectionConvergenceError(RuntimeError):
    """Iterative projection failed to converge within the cycle cap."""


def _as_vector(x, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise GeometryError(f"expected vector of dimension {n}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise GeometryError("vector has non-finite entries")
    return x


def _max_sq_norm_under_budget(limit: float, support: int) -> float:
    """max ||x||^2 over 0 <= x <= 1 with sum(x) <= limit and support-size coords."""
    if support <= 0:
        return 0.0
    k = min(int(np.floor(limit + 1e-12)), support)
    r = min(max(limit - k, 0.0), 1.0) if k < support else 0.0
    return k + r * r


class ConvexBody:
    """A feasible region with exact membership / projection / linear oracles."""

    def __init__(self, kind, n, *, costs=None, limit=None, lower=None,
                 halfspace_lhs=None, halfspace_rhs=None):
        if n < 1:
            raise GeometryError("dimension must be positive")
        self.kind = kind
        self.n = int(n)
        self.costs = None if costs is None else np.asarray(costs, dtype=float)
        self.limit = limit
        self.lower = lower
        self.halfspace_lhs = None if halfspace_lhs is None else np.asarray(halfspace_lhs, dtype=float)
        self.halfspace_rhs = None if halfspace_rhs is None else np.asarray(halfspace_rhs, dtype=float)
        self._validate()
        self.down_closed = self._derive_down_closed()
        self.diameter, self.diameter_is_exact = self._derive_diameter()

    # -- constructors -----------------------------------------------------

    @classmethod
    def hypercube(cls, n: int) -> "ConvexBody":
        return cls("hypercube", n)

    @classmethod
    def budget(cls, n: int, limit: float, costs=None) -> "ConvexBody":
        """{x in [0,1]^n : <costs, x> <= limit}; costs default to all ones."""
        costs = np.ones(n) if costs is None else np.asarray(costs, dtype=float)
        return cls("budget", n, costs=costs, limit=float(limit))

    @classmethod
    def budget_band(cls, n: int, lower: float, upper: float, costs=None) -> "ConvexBody":
        """{x in [0,1]^n : lower <= <costs, x> <= upper}; not down-closed if lower > 0."""
        costs = np.ones(n) if costs is None else np.asarray(costs, dtype=float)
        return cls("budget-band", n, costs=costs, limit=float(upper), lower=float(lower))

    @classmethod
    def halfspaces(cls, lhs, rhs) -> "ConvexBody":
        """{x in [0,1]^n : lhs @ x <= rhs}; n inferred from lhs columns."""
        lhs = np.atleast_2d(np.asarray(lhs, dtype=float))
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        return cls("polytope", lhs.shape[1], halfspace_lhs=lhs, halfspace_rhs=rhs)

    # -- construction checks ----------------------------------------------

    def _validate(self):
        if self.kind == "hypercube":
            return
        if self.kind in ("budget", "budget-band"):
            if self.costs.shape != (self.n,) or np.any(self.costs < 0):
                raise GeometryError("budget costs must be non-negative, one per coordinate")
            if self.limit < 0:
                raise GeometryError("budget limit must be non-negative")
            if self.kind == "budget-band":
                if self.lower < 0 or self.lower > self.limit + FEASIBILITY_TOL:
                    raise GeometryError("need 0 <= lower <= upper")
                if self.lower > float(self.costs.sum()) + FEASIBILITY_TOL:
                    raise GeometryError("lower bound exceeds the body's maximum cost: empty body")
            return
        if self.kind == "polytope":
            if self.halfspace_lhs.shape[0] != self.halfspace_rhs.shape[0]:
                raise GeometryError("halfspace lhs/rhs row mismatch")
            res = linprog(np.zeros(self.n), A_ub=self.halfspace_lhs, b_ub=self.halfspace_rhs,
                          bounds=[(0.0, 1.0)] * self.n, method="highs")
            if not res.success:
                raise GeometryError("empty polytope: no feasible point in the unit cube")
            return
        raise GeometryError(f"unknown body kind {self.kind!r}")

    def _derive_down_closed(self) -> bool:
        if self.kind in ("hypercube", "budget"):
            return True
        if self.kind == "budget-band":
            return self.lower <= FEASIBILITY_TOL
        # A x <= b with A >= 0 entrywise and b >= 0 is closed under lowering coordinates.
        return bool(np.all(self.halfspace_lhs >= 0) and np.all(self.halfspace_rhs >= 0))

    def _derive_diameter(self) -> tuple[float, bool]:
        root_n = float(np.sqrt(self.n))
        if self.kind == "hypercube":
            return root_n, True
        if self.kind == "budget":
            if np.allclose(self.costs, self.costs[0]) and self.costs[0] > 0:
                scaled = self.limit / self.costs[0]
                best = max(
                    _max_sq_norm_under_budget(scaled, s) + _max_sq_norm_under_budget(scaled, self.n - s)
                    for s in range(self.n + 1)
                )
                return float(np.sqrt(best)), True
            caps = np.minimum(1.0, np.divide(self.limit, self.costs,
                                             out=np.full(self.n, np.inf), where=self.costs > 0))
            return float(min(root_n, np.sqrt(2.0) * np.linalg.norm(caps))), False
        return root_n, False

    # -- oracles ------------------------------------------------------------

    def contains(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        x = _as_vector(x, self.n)
        if np.any(x < -tol) or np.any(x > 1 + tol):
            return False
        if self.kind == "hypercube":
            return True
        if self.kind == "budget":
            return float(self.costs @ x) <= self.limit + tol
        if self.kind == "budget-band":
            s = float(self.costs @ x)
            return self.lower - tol <= s <= self.limit + tol
        return bool(np.all(self.halfspace_lhs @ x <= self.halfspace_rhs + tol))

    def contains_batch(self, xs, tol: float = FEASIBILITY_TOL) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        ok = np.all(xs >= -tol, axis=1) & np.all(xs <= 1 + tol, axis=1)
        if self.kind == "budget":
            ok &= xs @ self.costs <= self.limit + tol
        elif self.kind == "budget-band":
            s = xs @ self.costs
            ok &= (s >= self.lower - tol) & (s <= self.limit + tol)
        elif self.kind == "polytope":
            ok &= np.all(xs @ self.halfspace_lhs.T <= self.halfspace_rhs + tol, axis=1)
        return ok

    def linear_maximize(self, w) -> np.ndarray:
        """argmax <w, x> over the body, returned as a vertex.

        Ties in the greedy kinds are broken toward the lowest coordinate
        index; indifferent coordinates (zero marginal value) stay at 0.
        """
        w = _as_vector(w, self.n)
        if self.kind == "hypercube":
            return (w > 0).astype(float)
        if self.kind == "budget":
            return self._budget_maximize(w, self.limit, np.zeros(self.n))
        if self.kind == "budget-band":
            x = self._budget_maximize(w, self.limit, np.zeros(self.n))
            return self._pad_to_lower(w, x)
        res = linprog(-w, A_ub=self.halfspace_lhs, b_ub=self.halfspace_rhs,
                      bounds=[(0.0, 1.0)] * self.n, method="highs-ds")
        if not res.success:
            raise GeometryError("linear maximization failed on polytope body")
        return np.asarray(res.x, dtype=float)

    def _budget_maximize(self, w, limit, start) -> np.ndarray:
        x = start.copy()
        remaining = limit - float(self.costs @ x)
        free = (self.costs <= 0) & (w > 0)
        x[free] = 1.0
        ratio = np.divide(w, self.costs, out=np.full(self.n, -np.inf), where=self.costs > 0)
        for i in np.argsort(-ratio, kind="stable"):
            if w[i] <= 0 or self.costs[i] <= 0:
                continue
            if remaining <= 0:
                break
            take = min(1.0 - x[i], remaining / self.costs[i])
            x[i] += take
            remaining -= take * self.costs[i]
        return x

    def _pad_to_lower(self, w, x) -> np.ndarray:
        """Raise <costs, x> up to the lower bound at the least objective damage."""
        deficit = self.lower - float(self.costs @ x)
        if deficit <= FEASIBILITY_TOL:
            return x
        ratio = np.divide(w, self.costs, out=np.full(self.n, -np.inf), where=self.costs > 0)
        for i in np.argsort(-ratio, kind="stable"):
            if self.costs[i] <= 0:
                continue
            if deficit <= 0:
                break
            take = min(1.0 - x[i], deficit / self.costs[i])
            x[i] += take
            deficit -= take * self.costs[i]
        if deficit > FEASIBILITY_TOL:
            raise GeometryError("cannot reach the lower budget bound: empty body")
        return x

    def linear_maximize_boxed(self, w, upper) -> np.ndarray:
        """argmax <w, x> over the body intersected with {0 <= x <= upper}."""
        w = _as_vector(w, self.n)
        upper = np.clip(_as_vector(upper, self.n), 0.0, 1.0)
        if self.kind == "hypercube":
            return np.where(w > 0, upper, 0.0)
        if self.kind in ("budget", "budget-band"):
            x = np.zeros(self.n)
            remaining = self.limit
            free = (self.costs <= 0) & (w > 0)
            x[free] = upper[free]
            ratio = np.divide(w, self.costs, out=np.full(self.n, -np.inf), where=self.costs > 0)
            for i in np.argsort(-ratio, kind="stable"):
                if w[i] <= 0 or self.costs[i] <= 0 or remaining <= 0:
                    continue
                take = min(upper[i] - x[i], remaining / self.costs[i])
                x[i] += take
                remaining -= take * self.costs[i]
            if self.kind == "budget-band":
                deficit = self.lower - float(self.costs @ x)
                if deficit > FEASIBILITY_TOL:
                    for i in np.argsort(-ratio, kind="stable"):
                        if self.costs[i] <= 0 or deficit <= 0:
                            continue
                        take = min(upper[i] - x[i], deficit / self.costs[i])
                        x[i] += take
                        deficit -= take * self.costs[i]
                    if deficit > FEASIBILITY_TOL:
                        raise GeometryError("lower budget bound unreachable under the caps")
            return x
        res = linprog(-w, A_ub=self.halfspace_lhs, b_ub=self.halfspace_rhs,
                      bounds=list(zip(np.zeros(self.n), upper)), method="highs-ds")
        if not res.success:
            raise GeometryError("boxed linear maximization failed on polytope body")
        return np.asarray(res.x, dtype=float)

    def project(self, x) -> np.ndarray:
        """Euclidean projection onto the body, within PROJECTION_TOL of exact."""
        x = _as_vector(x, self.n)
        clipped = np.clip(x, 0.0, 1.0)
        if self.kind == "hypercube":
            return clipped
        if self.kind == "budget":
            if float(self.costs @ clipped) <= self.limit + FEASIBILITY_TOL:
                return clipped
            return self._budget_bisect(x, self.limit, direction=-1.0)
        if self.kind == "budget-band":
            s = float(self.costs @ clipped)
            if s > self.limit + FEASIBILITY_TOL:
                return self._budget_bisect(x, self.limit, direction=-1.0)
            if s < self.lower - FEASIBILITY_TOL:
                return self._budget_bisect(x, self.lower, direction=+1.0)
            return clipped
        return self._dykstra(x)

    def _budget_bisect(self, x, target, direction) -> np.ndarray:
        """Solve <costs, clip(x + t*direction*costs)> = target by bisection on t >= 0.

        This is the KKT form of projection onto a single budget constraint
        intersected with the box: the multiplier moves all coordinates along
        the cost vector before clipping.
        """
        c = self.costs

        def cost_at(t):
            return float(c @ np.clip(x + direction * t * c, 0.0, 1.0))

        hi = 1.0
        # bracket: cost_at is monotone in t, reaching 0 (direction -1) or sum(c) (+1)
        while (cost_at(hi) - target) * direction < 0 and hi < 1e12:
            hi *= 2.0
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if (cost_at(mid) - target) * direction < 0:
                lo = mid
            else:
                hi = mid
            if (hi - lo) * float(np.linalg.norm(c)) < PROJECTION_TOL * 1e-2:
                break
        t = 0.5 * (lo + hi)
        return np.clip(x + direction * t * c, 0.0, 1.0)

    def _dykstra(self, x) -> np.ndarray:
        """Dykstra alternating projections over the box and each halfspace."""
        lhs, rhs = self.halfspace_lhs, self.halfspace_rhs
        m = lhs.shape[0]
        sq_norms = np.einsum("ij,ij->i", lhs, lhs)
        z = x.copy()
        corrections = np.zeros((m + 1, self.n))
        for _ in range(PROJECTION_MAX_CYCLES):
            start = z.copy()
            for idx in range(m + 1):
                y = z + corrections[idx]
                if idx < m:
                    viol = lhs[idx] @ y - rhs[idx]
                    proj = y - (max(viol, 0.0) / sq_norms[idx]) * lhs[idx] if sq_norms[idx] > 0 else y
                else:
                    proj = np.clip(y, 0.0, 1.0)
                corrections[idx] = y - proj
                z = proj
            feasible = (np.all(lhs @ z <= rhs + FEASIBILITY_TOL)
                        and np.all(z >= -FEASIBILITY_TOL) and np.all(z <= 1 + FEASIBILITY_TOL))
            if feasible and float(np.linalg.norm(z - start)) < PROJECTION_TOL * 1e-2:
                return np.clip(z, 0.0, 1.0)
        raise ProjectionConvergenceError(
            f"projection did not converge within {PROJECTION_MAX_CYCLES} cycles")

    def min_inf_norm_point(self) -> np.ndarray:
        """The feasible point with smallest infinity norm (lexicographic ties)."""
        if self.kind in ("hypercube", "budget"):
            return np.zeros(self.n)
        if self.kind == "budget-band":
            if self.lower <= FEASIBILITY_TOL:
                return np.zeros(self.n)
            positive = self.costs > 0
            s = self.lower / float(self.costs[positive].sum())
            if s > 1 + FEASIBILITY_TOL:
                raise GeometryError("empty body: lower bound unreachable")
            x = np.zeros(self.n)
            x[positive] = min(s, 1.0)
            return x
        return self._polytope_min_inf()

    def _polytope_min_inf(self) -> np.ndarray:
        n = self.n
        lhs, rhs = self.halfspace_lhs, self.halfspace_rhs
        # variables (x, s): minimize s subject to A x <= b, x_i - s <= 0
        a_rows = [np.concatenate([lhs, np.zeros((lhs.shape[0], 1))], axis=1),
                  np.concatenate([np.eye(n), -np.ones((n, 1))], axis=1)]
        a_ub = np.concatenate(a_rows, axis=0)
        b_ub = np.concatenate([rhs, np.zeros(n)])
        bounds = [(0.0, 1.0)] * n + [(0.0, 1.0)]
        res = linprog(np.concatenate([np.zeros(n), [1.0]]), A_ub=a_ub, b_ub=b_ub,
                      bounds=bounds, method="highs")
        if not res.success:
            raise GeometryError("infeasible polytope body")
        s_opt = float(res.x[-1])
        # lexicographic refinement: fix s, then shrink coordinates left to right
        fixed: list[float] = []
        slack = 1e-12
        for i in range(n):
            cost = np.zeros(n + 1)
            cost[i] = 1.0
            bnds = list(bounds)
            bnds[-1] = (0.0, s_opt + slack)
            for j, v in enumerate(fixed):
                bnds[j] = (v - slack, v + slack)
            sub = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bnds, method="highs")
            if not sub.success:
                break
            fixed.append(float(sub.x[i]))
        if len(fixed) == n:
            x = np.asarray(fixed)
        else:
            x = np.asarray(res.x[:n])
        return np.clip(np.where(np.abs(x) < 1e-12, 0.0, x), 0.0, 1.0)

    def sample(self, rng) -> np.ndarray:
        """A feasible point: the projection of a uniform cube sample."""
        return self.project(rng.uniform(0.0, 1.0, self.n))

    @property
    def dimension(self) -> int:
        return self.n

    def __repr__(self):
        return f"ConvexBody(kind={self.kind!r}, n={self.n})"
