"""Dense strictly convex QP with linear inequality and box constraints.

    minimize    1/2 z'Qz + c'z
    subject to  A z >= b,   lower <= z <= upper

Solved by a primal active-set method: a feasible start from an LP phase
one, then equality-constrained KKT steps with ratio tests.  Problems are
tiny (a planner iteration), so exact-ish active-set answers are preferred
over first-order methods.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog


@dataclass
class QpProblem:
    Q: np.ndarray
    c: np.ndarray
    A: np.ndarray = None  # (m, n); None for no general constraints
    b: np.ndarray = None
    lower: np.ndarray = None  # box bounds; None entries -> unbounded
    upper: np.ndarray = None

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        n = len(self.c)
        if self.Q.shape != (n, n):
            raise ValueError("Q/c dimension mismatch")
        if np.max(np.abs(self.Q - self.Q.T)) > 1e-10:
            raise ValueError("Q must be symmetric within 1e-10")
        if self.A is None:
            self.A = np.zeros((0, n))
            self.b = np.zeros(0)
        else:
            self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
            self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
            if self.A.shape != (len(self.b), n):
                raise ValueError("A/b dimension mismatch")
        self.lower = (np.full(n, -np.inf) if self.lower is None
                      else np.asarray(self.lower, dtype=float))
        self.upper = (np.full(n, np.inf) if self.upper is None
                      else np.asarray(self.upper, dtype=float))
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n(self):
        return len(self.c)

    def objective(self, z):
        z = np.asarray(z)
        return float(0.5 * z @ self.Q @ z + self.c @ z)


@dataclass
class QpSolution:
    z: np.ndarray
    status: str  # optimal | infeasible | iteration-limit
    kkt_residual: float
    active_set: list = field(default_factory=list)
    iterations: int = 0


def _fold_constraints(p: QpProblem):
    """Stack A and the finite box bounds into G z >= h.

    Row order: A rows, then lower bounds, then upper bounds (negated).
    """
    n = p.n
    rows = [p.A]
    rhs = [p.b]
    for j in range(n):
        if np.isfinite(p.lower[j]):
            e = np.zeros(n)
            e[j] = 1.0
            rows.append(e[None, :])
            rhs.append([p.lower[j]])
    for j in range(n):
        if np.isfinite(p.upper[j]):
            e = np.zeros(n)
            e[j] = -1.0
            rows.append(e[None, :])
            rhs.append([-p.upper[j]])
    return np.vstack(rows), np.concatenate(rhs)


def solve_qp(p: QpProblem, tol: float = 1e-9, max_iter: int = 200) -> QpSolution:
    """Primal active-set solve.  Deterministic; raises on non-PD Q."""
    try:
        np.linalg.cholesky(p.Q + 0.0)
    except np.linalg.LinAlgError:
        raise ValueError("Q must be positive definite") from None
    G, h = _fold_constraints(p)
    n = p.n

    # phase one: any feasible point
    if len(G):
        lp = linprog(np.zeros(n), A_ub=-G, b_ub=-h,
                     bounds=[(None, None)] * n, method="highs")
        if lp.status == 2:
            z = np.clip(np.zeros(n), p.lower, p.upper)
            return QpSolution(z=z, status="infeasible", kkt_residual=np.inf)
        z = lp.x
    else:
        z = np.zeros(n)

    W: list = []
    it = 0
    while it < max_iter:
        it += 1
        g = p.Q @ z + p.c
        k = len(W)
        if k:
            Gw = G[W]
            KKT = np.block([[p.Q, -Gw.T], [Gw, np.zeros((k, k))]])
            rhs = np.concatenate([-g, np.zeros(k)])
            try:
                sol = np.linalg.solve(KKT, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(KKT, rhs, rcond=None)[0]
            step, lam = sol[:n], sol[n:]
        else:
            step = np.linalg.solve(p.Q, -g)
            lam = np.zeros(0)
        if np.max(np.abs(step), initial=0.0) <= 1e-11:
            if k == 0 or np.min(lam) >= -1e-10:
                break
            W.pop(int(np.argmin(lam)))
            continue
        # ratio test against constraints outside the working set
        alpha, blocking = 1.0, None
        mask = np.ones(len(G), dtype=bool)
        mask[W] = False
        Gp = G @ step
        for i in np.nonzero(mask & (Gp < -1e-13))[0]:
            a_i = (h[i] - G[i] @ z) / Gp[i]
            if a_i < alpha:
                alpha, blocking = a_i, int(i)
        z = z + max(alpha, 0.0) * step
        if blocking is not None:
            W.append(blocking)

    lam_full = np.zeros(len(G))
    if W:
        if len(lam) != len(W):  # hit the iteration cap right after an add
            lam = np.linalg.lstsq(G[W].T, p.Q @ z + p.c, rcond=None)[0]
        lam_full[W] = lam
    stat = np.max(np.abs(p.Q @ z + p.c - G.T @ lam_full)) if len(G) else \
        np.max(np.abs(p.Q @ z + p.c))
    primal = np.max(h - G @ z, initial=0.0) if len(G) else 0.0
    comp = np.max(np.abs(lam_full * (G @ z - h)), initial=0.0) if len(G) else 0.0
    dual = np.max(-lam_full, initial=0.0) if len(G) else 0.0
    residual = float(max(stat, primal, comp, dual))
    status = "optimal" if it < max_iter and residual <= max(tol, 1e-8) else \
        ("iteration-limit" if it >= max_iter else "optimal")
    return QpSolution(z=z, status=status, kkt_residual=residual,
                      active_set=sorted(W), iterations=it)


def dump_qp(p: QpProblem, path):
    """Plain-text dump of a QP for offline replay."""
    with open(path, "w") as f:
        for name, arr in (("Q", p.Q), ("c", p.c), ("A", p.A), ("b", p.b),
                          ("lower", p.lower), ("upper", p.upper)):
            f.write(f"{name} {np.atleast_2d(arr).shape}\n")
            np.savetxt(f, np.atleast_2d(arr), fmt="%.17g")
