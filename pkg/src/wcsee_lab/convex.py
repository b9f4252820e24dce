"""Small dense convex solver for the successive-approximation subproblems.

Accepts a convex objective (linear, optionally plus a PSD quadratic term)
under affine equalities/inequalities, PSD quadratic inequalities,
norm-of-affine second-order-cone rows, and variable boxes, at dimensions up
to a few hundred.  Quadratic pieces are lowered to second-order cones and
the whole program is solved in conic standard form

    minimize c'x  subject to  Ax = b,  Gx + s = h,  s in K,

with K a product of a nonnegative orthant and second-order cones, by a
primal-dual interior-point method with Nesterov-Todd scaling and Mehrotra
predictor-corrector steps.  Everything is dense float64 with a fixed
iteration order, so identical programs produce bitwise identical solutions.

Infeasibility is classified by a single slack-minimization (phase-1) solve
when the main iteration stalls; `Infeasible` tells a caller its surrogate
constraint set is empty, `MaxIter` signals a numerical stall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"


class BadProgramError(ValueError):
    """Malformed program data (dimension mismatch or indefinite quadratic)."""


# ---------------------------------------------------------------------------
# Cone algebra (nonnegative orthant of dim l, then SOC blocks)
# ---------------------------------------------------------------------------


@dataclass
class Cone:
    l: int
    socs: list[int]

    @property
    def dim(self) -> int:
        return self.l + sum(self.socs)

    @property
    def degree(self) -> int:
        return self.l + len(self.socs)

    def blocks(self):
        start = self.l
        for d in self.socs:
            yield start, d
            start += d

    def identity(self) -> np.ndarray:
        e = np.zeros(self.dim)
        e[: self.l] = 1.0
        for start, _ in self.blocks():
            e[start] = 1.0
        return e

    def margin(self, s: np.ndarray) -> float:
        """Positive inside the cone interior; the most violated block bound."""
        m = math.inf
        if self.l:
            m = min(m, float(s[: self.l].min()))
        for start, d in self.blocks():
            m = min(m, float(s[start] - np.linalg.norm(s[start + 1 : start + d])))
        return m

    def max_step(self, s: np.ndarray, ds: np.ndarray) -> float:
        """Largest alpha with s + alpha * ds on or inside the cone boundary."""
        alpha = math.inf
        if self.l:
            neg = ds[: self.l] < 0
            if np.any(neg):
                alpha = min(alpha, float(np.min(-s[: self.l][neg] / ds[: self.l][neg])))
        for start, d in self.blocks():
            s0, v = s[start], s[start + 1 : start + d]
            d0, w = ds[start], ds[start + 1 : start + d]
            # Boundary: (s0 + a d0)^2 = ||v + a w||^2 with s0 + a d0 >= 0.
            a2 = d0 * d0 - w @ w
            a1 = 2.0 * (s0 * d0 - v @ w)
            a0 = s0 * s0 - v @ v
            roots = []
            if abs(a2) > 1e-300:
                disc = a1 * a1 - 4.0 * a2 * a0
                if disc >= 0.0:
                    sq = math.sqrt(disc)
                    roots.extend(((-a1 - sq) / (2 * a2), (-a1 + sq) / (2 * a2)))
            elif abs(a1) > 1e-300:
                roots.append(-a0 / a1)
            if d0 < 0.0:
                roots.append(-s0 / d0)
            pos = [r for r in roots if r > 0.0]
            if pos:
                cand = min(pos)
                # The smallest positive root may be a tangential touch that
                # stays inside; accept it conservatively.
                alpha = min(alpha, cand)
        return alpha

    def prod(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Jordan product u o v on the composite cone."""
        out = np.empty(self.dim)
        out[: self.l] = u[: self.l] * v[: self.l]
        for start, d in self.blocks():
            u0, u1 = u[start], u[start + 1 : start + d]
            v0, v1 = v[start], v[start + 1 : start + d]
            out[start] = u0 * v0 + u1 @ v1
            out[start + 1 : start + d] = u0 * v1 + v0 * u1
        return out

    def solve_arrow(self, lam: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        """Solve Arw(lam) u = rhs blockwise (lam in the cone interior)."""
        out = np.empty(self.dim)
        out[: self.l] = rhs[: self.l] / lam[: self.l]
        for start, d in self.blocks():
            l0, l1 = lam[start], lam[start + 1 : start + d]
            r0, r1 = rhs[start], rhs[start + 1 : start + d]
            det = l0 * l0 - l1 @ l1
            u0 = (l0 * r0 - l1 @ r1) / det
            out[start] = u0
            out[start + 1 : start + d] = (r1 - u0 * l1) / l0
        return out


class NtScaling:
    """Nesterov-Todd scaling W with lambda = W z = W^{-1} s."""

    def __init__(self, cone: Cone, s: np.ndarray, z: np.ndarray):
        self.cone = cone
        self.w_orth = np.sqrt(s[: cone.l] / z[: cone.l]) if cone.l else np.zeros(0)
        self.soc = []  # (eta, wbar) per block
        for start, d in cone.blocks():
            sb, zb = s[start : start + d], z[start : start + d]
            snorm = math.sqrt(sb[0] ** 2 - sb[1:] @ sb[1:])
            znorm = math.sqrt(zb[0] ** 2 - zb[1:] @ zb[1:])
            s_bar, z_bar = sb / snorm, zb / znorm
            gamma = math.sqrt((1.0 + s_bar @ z_bar) / 2.0)
            wbar = np.empty(d)
            wbar[0] = (s_bar[0] + z_bar[0]) / (2.0 * gamma)
            wbar[1:] = (s_bar[1:] - z_bar[1:]) / (2.0 * gamma)
            self.soc.append((math.sqrt(snorm / znorm), wbar))

    @staticmethod
    def _wbar_apply(wbar, v):
        out = np.empty_like(v)
        coef = wbar[1:] @ v[1:]
        out[0] = wbar[0] * v[0] + coef
        out[1:] = v[0] * wbar[1:] + v[1:] + (coef / (1.0 + wbar[0])) * wbar[1:]
        return out

    def _apply_soc(self, eta, wbar, v, inverse=False):
        if inverse:
            # Wbar J Wbar = J implies Wbar^{-1} = J Wbar J.
            jv = v.copy()
            jv[1:] = -jv[1:]
            t = self._wbar_apply(wbar, jv)
            t[1:] = -t[1:]
            return t / eta
        return eta * self._wbar_apply(wbar, v)

    def apply(self, v: np.ndarray, inverse: bool = False) -> np.ndarray:
        """W v (or W^{-1} v); W is symmetric so this also covers transposes."""
        cone = self.cone
        out = np.empty(cone.dim)
        if cone.l:
            out[: cone.l] = (
                v[: cone.l] / self.w_orth if inverse else v[: cone.l] * self.w_orth
            )
        for (start, d), (eta, wbar) in zip(cone.blocks(), self.soc):
            out[start : start + d] = self._apply_soc(
                eta, wbar, v[start : start + d], inverse
            )
        return out

    def wtw_matrix(self) -> np.ndarray:
        """Dense W^T W = W^2 (block diagonal)."""
        cone = self.cone
        m = np.zeros((cone.dim, cone.dim))
        if cone.l:
            m[np.arange(cone.l), np.arange(cone.l)] = self.w_orth**2
        for (start, d), (eta, wbar) in zip(cone.blocks(), self.soc):
            # W^2 = eta^2 (2 wbar wbar' - J) (quadratic representation).
            block = 2.0 * np.outer(wbar, wbar)
            block[0, 0] -= 1.0
            block[1:, 1:] += np.eye(d - 1)
            m[start : start + d, start : start + d] = eta * eta * block
        return m


# ---------------------------------------------------------------------------
# Program definition
# ---------------------------------------------------------------------------


@dataclass
class Solution:
    x: np.ndarray
    status: str
    objective: float
    iterations: int
    max_violation: float
    relgap: float = math.inf
    rel_violation: float = math.inf


@dataclass
class ConvexProgram:
    """Builder for the supported constraint types; see :meth:`solve`."""

    n: int
    c: np.ndarray = None
    quad_objective: np.ndarray = None  # PSD Q for 0.5 x'Qx added to c'x
    _lin_a: list = field(default_factory=list)
    _lin_b: list = field(default_factory=list)
    _eq_a: list = field(default_factory=list)
    _eq_b: list = field(default_factory=list)
    _quads: list = field(default_factory=list)  # (P, q, r)
    _socs: list = field(default_factory=list)  # (F, g, d, e)
    lb: np.ndarray = None
    ub: np.ndarray = None

    def __post_init__(self):
        self.c = np.zeros(self.n) if self.c is None else np.asarray(self.c, float)
        self.lb = np.full(self.n, -np.inf)
        self.ub = np.full(self.n, np.inf)

    # -- construction --------------------------------------------------------

    def set_linear_objective(self, c):
        c = np.asarray(c, float)
        if c.shape != (self.n,):
            raise BadProgramError(f"objective must have shape ({self.n},)")
        self.c = c

    @staticmethod
    def _check_psd(p_matrix):
        vals = np.linalg.eigvalsh(p_matrix)
        top = float(vals.max(initial=0.0))
        if vals.min(initial=0.0) < -max(1e-12, top * 1e-10):
            raise BadProgramError("quadratic term is not positive semidefinite")

    def set_quadratic_objective(self, q_matrix, c):
        q_matrix = np.asarray(q_matrix, float)
        if q_matrix.shape != (self.n, self.n):
            raise BadProgramError("quadratic objective has wrong shape")
        self.quad_objective = 0.5 * (q_matrix + q_matrix.T)
        self._check_psd(self.quad_objective)
        self.set_linear_objective(c)

    def add_linear(self, a, b):
        """Rows a x <= b; accepts one row or a stack."""
        a = np.atleast_2d(np.asarray(a, float))
        b = np.atleast_1d(np.asarray(b, float))
        if a.shape[1] != self.n or a.shape[0] != b.shape[0]:
            raise BadProgramError("linear constraint dimensions disagree")
        self._lin_a.extend(a)
        self._lin_b.extend(b)

    def add_equality(self, a, b):
        a = np.atleast_2d(np.asarray(a, float))
        b = np.atleast_1d(np.asarray(b, float))
        if a.shape[1] != self.n or a.shape[0] != b.shape[0]:
            raise BadProgramError("equality constraint dimensions disagree")
        self._eq_a.extend(a)
        self._eq_b.extend(b)

    def add_quadratic(self, p_matrix, q, r):
        """0.5 x' P x + q' x + r <= 0 with P PSD."""
        p_matrix = 0.5 * (np.asarray(p_matrix, float) + np.asarray(p_matrix, float).T)
        q = np.asarray(q, float)
        if p_matrix.shape != (self.n, self.n) or q.shape != (self.n,):
            raise BadProgramError("quadratic constraint dimensions disagree")
        self._check_psd(p_matrix)
        self._quads.append((p_matrix, q, float(r)))

    def add_soc(self, f_matrix, g, d, e):
        """||F x + g|| <= d' x + e."""
        f_matrix = np.atleast_2d(np.asarray(f_matrix, float))
        g = np.atleast_1d(np.asarray(g, float))
        d = np.asarray(d, float)
        if f_matrix.shape[1] != self.n or d.shape != (self.n,):
            raise BadProgramError("cone constraint dimensions disagree")
        self._socs.append((f_matrix, g, d, float(e)))

    def add_box(self, lb=None, ub=None):
        """Elementwise bounds; None entries (or +-inf) leave a side open."""
        if lb is not None:
            self.lb = np.maximum(self.lb, np.asarray(lb, float))
        if ub is not None:
            self.ub = np.minimum(self.ub, np.asarray(ub, float))

    # -- diagnostics -----------------------------------------------------------

    def objective_value(self, x: np.ndarray) -> float:
        val = float(self.c @ x)
        if self.quad_objective is not None:
            val += 0.5 * float(x @ self.quad_objective @ x)
        return val

    def max_violation(self, x: np.ndarray) -> float:
        worst = 0.0
        for a, b in zip(self._lin_a, self._lin_b):
            worst = max(worst, float(a @ x - b))
        for a, b in zip(self._eq_a, self._eq_b):
            worst = max(worst, abs(float(a @ x - b)))
        for p, q, r in self._quads:
            worst = max(worst, 0.5 * float(x @ p @ x) + float(q @ x) + r)
        for f, g, d, e in self._socs:
            worst = max(worst, float(np.linalg.norm(f @ x + g) - (d @ x + e)))
        finite = np.isfinite(self.lb)
        if np.any(finite):
            worst = max(worst, float(np.max(self.lb[finite] - x[finite])))
        finite = np.isfinite(self.ub)
        if np.any(finite):
            worst = max(worst, float(np.max(x[finite] - self.ub[finite])))
        return worst

    def relative_violation(self, x: np.ndarray) -> float:
        """Worst constraint residual relative to the row's coefficient scale."""
        worst = 0.0
        for a, b in zip(self._lin_a, self._lin_b):
            scale = max(1.0, float(np.abs(a).max()), abs(b))
            worst = max(worst, float(a @ x - b) / scale)
        for a, b in zip(self._eq_a, self._eq_b):
            scale = max(1.0, float(np.abs(a).max()), abs(b))
            worst = max(worst, abs(float(a @ x - b)) / scale)
        for p, q, r in self._quads:
            scale = max(1.0, float(np.abs(p).max()), float(np.abs(q).max()), abs(r))
            worst = max(worst, (0.5 * float(x @ p @ x) + float(q @ x) + r) / scale)
        for f, g, d, e in self._socs:
            scale = max(
                1.0, float(np.abs(f).max()), float(np.abs(g).max(initial=0.0)),
                float(np.abs(d).max()), abs(e),
            )
            worst = max(worst, float(np.linalg.norm(f @ x + g) - (d @ x + e)) / scale)
        finite = np.isfinite(self.lb)
        if np.any(finite):
            worst = max(worst, float(np.max(self.lb[finite] - x[finite])))
        finite = np.isfinite(self.ub)
        if np.any(finite):
            worst = max(worst, float(np.max(x[finite] - self.ub[finite])))
        return worst

    # -- lowering to conic form ------------------------------------------------

    def _psd_factor(self, p_matrix: np.ndarray) -> np.ndarray:
        vals, vecs = np.linalg.eigh(p_matrix)
        tol = max(1e-14, float(vals.max(initial=0.0)) * 1e-12)
        if vals.min(initial=0.0) < -tol * 10 - 1e-9:
            raise BadProgramError("quadratic term is not positive semidefinite")
        keep = vals > tol
        return (vecs[:, keep] * np.sqrt(vals[keep])).T  # rows: sqrt(lam) v'

    def _build_conic(self):
        """Returns (c, A, b, G, h, cone, n_total) in standard form."""
        n = self.n
        extra = 1 if self.quad_objective is not None else 0
        nt = n + extra

        g_rows, h_vals = [], []

        def pad(row):
            return np.concatenate([row, np.zeros(extra)]) if extra else row

        # Orthant: user linear rows, then finite bounds.
        for a, b in zip(self._lin_a, self._lin_b):
            g_rows.append(pad(a))
            h_vals.append(b)
        for i in range(n):
            if np.isfinite(self.ub[i]):
                row = np.zeros(nt)
                row[i] = 1.0
                g_rows.append(row)
                h_vals.append(self.ub[i])
            if np.isfinite(self.lb[i]):
                row = np.zeros(nt)
                row[i] = -1.0
                g_rows.append(row)
                h_vals.append(-self.lb[i])
        l = len(g_rows)

        soc_dims = []

        def add_soc_rows(first_row, first_h, rest_rows, rest_h):
            g_rows.append(first_row)
            h_vals.append(first_h)
            for row, hv in zip(rest_rows, rest_h):
                g_rows.append(row)
                h_vals.append(hv)
            soc_dims.append(1 + len(rest_rows))

        # Quadratic objective epigraph: 0.5 ||L x||^2 <= t.
        if extra:
            l_fac = self._psd_factor(self.quad_objective)
            k = l_fac.shape[0]
            t_col = np.zeros(nt)
            t_col[n] = 1.0
            # ||L x||^2 <= 2t as s0 = 1 + 2t, s1 = 1 - 2t, s2.. = 2 L x.
            add_soc_rows(
                -2.0 * t_col,
                1.0,
                [2.0 * t_col] + [pad(-2.0 * l_fac[i]) for i in range(k)],
                [1.0] + [0.0] * k,
            )

        # Quadratic constraints: 0.5 x'Px + q'x + r <= 0.
        for p, q, r in self._quads:
            l_fac = self._psd_factor(p)
            k = l_fac.shape[0]
            # w(x) = -2 q'x - 2r >= ||L x||^2 ... wait: 0.5||Lx||^2 <= -q'x - r
            # => ||Lx||^2 <= w with w = -2 q'x - 2 r.
            # SOC: || [2 L x ; 1 - w] || <= 1 + w.
            add_soc_rows(
                pad(2.0 * q),
                1.0 - 2.0 * r,
                [pad(-2.0 * q)] + [pad(-2.0 * l_fac[i]) for i in range(k)],
                [1.0 + 2.0 * r] + [0.0] * k,
            )

        # Explicit second-order cones.
        for f, g, d, e in self._socs:
            add_soc_rows(
                pad(-d), e, [pad(-f[i]) for i in range(f.shape[0])], list(g)
            )

        if not g_rows:
            raise BadProgramError("program needs at least one inequality or bound")

        g_mat = np.vstack(g_rows)
        h_vec = np.array(h_vals, float)
        cone = Cone(l=l, socs=soc_dims)

        # Row equilibration: callers mix rows spanning many decades (noise
        # floors vs powers); scaling each row (uniformly per cone block)
        # leaves the feasible set unchanged and keeps residual tolerances
        # meaningful.
        for i in range(l):
            f = float(np.abs(g_mat[i]).max())
            if f > 0.0:
                g_mat[i] /= f
                h_vec[i] /= f
        for start, d in cone.blocks():
            f = float(np.abs(g_mat[start : start + d]).max())
            if f > 0.0:
                g_mat[start : start + d] /= f
                h_vec[start : start + d] /= f

        a_mat = (
            np.vstack([pad(a) for a in self._eq_a])
            if self._eq_a
            else np.zeros((0, nt))
        )
        b_vec = np.array(self._eq_b, float)
        for i in range(a_mat.shape[0]):
            f = float(np.abs(a_mat[i]).max())
            if f > 0.0:
                a_mat[i] /= f
                b_vec[i] /= f

        c_vec = np.concatenate([self.c, np.ones(extra)])
        return c_vec, a_mat, b_vec, g_mat, h_vec, cone, nt

    # -- solve -----------------------------------------------------------------

    def solve(self, tol: float = 1e-8, max_iter: int = 100) -> Solution:
        """Interior-point solve; statuses: optimal, infeasible, max_iter."""
        c, a_mat, b_vec, g_mat, h_vec, cone, nt = self._build_conic()
        x, status, iters, relgap = _conelp(c, a_mat, b_vec, g_mat, h_vec, cone, tol, max_iter)
        if status != OPTIMAL and x is not None and np.all(np.isfinite(x)):
            # End-game step collapse often leaves a nearly converged point;
            # keep it (as MAX_ITER) instead of paying for classification.
            xs_try = x[: self.n]
            if self.relative_violation(xs_try) <= 1e-5:
                return Solution(
                    x=xs_try,
                    status=MAX_ITER,
                    objective=self.objective_value(xs_try),
                    iterations=iters,
                    max_violation=self.max_violation(xs_try),
                    relgap=relgap,
                    rel_violation=self.relative_violation(xs_try),
                )
        if status != OPTIMAL:
            # Classify: strictly feasible programs that stalled are MAX_ITER;
            # empty programs are INFEASIBLE, certified by slack minimization.
            t_star = self._phase1(a_mat, b_vec, g_mat, h_vec, cone, nt, tol)
            if t_star is not None and t_star > 10.0 * tol:
                return Solution(
                    x=x[: self.n] if x is not None else np.zeros(self.n),
                    status=INFEASIBLE,
                    objective=math.nan,
                    iterations=iters,
                    max_violation=math.inf,
                )
            if x is None:
                return Solution(
                    x=np.zeros(self.n),
                    status=MAX_ITER,
                    objective=math.nan,
                    iterations=iters,
                    max_violation=math.inf,
                )
        xs = x[: self.n]
        return Solution(
            x=xs,
            status=status if status == OPTIMAL else MAX_ITER,
            objective=self.objective_value(xs),
            iterations=iters,
            max_violation=self.max_violation(xs),
            relgap=relgap,
            rel_violation=self.relative_violation(xs),
        )

    def _phase1(self, a_mat, b_vec, g_mat, h_vec, cone, nt, tol):
        """min t with every cone row relaxed by t; t* < 0 iff strictly feasible."""
        m = g_mat.shape[0]
        relax = np.zeros(m)
        relax[: cone.l] = -1.0
        for start, _ in cone.blocks():
            relax[start] = -1.0
        g1 = np.hstack([g_mat, relax[:, None]])
        # Keep t bounded below so the phase-1 program is never unbounded.
        g1 = np.vstack([g1, np.zeros(nt + 1)])
        g1[-1, -1] = -1.0
        h1 = np.concatenate([h_vec, [1.0]])
        cone1 = Cone(l=cone.l + 1, socs=list(cone.socs))
        # Reorder: the new orthant row must sit with the orthant block.
        order = list(range(cone.l)) + [m] + list(range(cone.l, m))
        g1 = g1[order]
        h1 = h1[order]
        a1 = np.hstack([a_mat, np.zeros((a_mat.shape[0], 1))])
        c1 = np.zeros(nt + 1)
        c1[-1] = 1.0
        x, status, _, _ = _conelp(c1, a1, b_vec, g1, h1, cone1, tol, 100)
        if status != OPTIMAL or x is None:
            return None
        return float(x[-1])


# ---------------------------------------------------------------------------
# Core interior-point iteration
# ---------------------------------------------------------------------------


def _kkt_factor(a_mat, g_mat, wtw, reg):
    n = g_mat.shape[1]
    p = a_mat.shape[0]
    m = g_mat.shape[0]
    k = np.zeros((n + p + m, n + p + m))
    k[:n, n : n + p] = a_mat.T
    k[:n, n + p :] = g_mat.T
    k[n : n + p, :n] = a_mat
    k[n + p :, :n] = g_mat
    k[n + p :, n + p :] = -wtw
    k_reg = k.copy()
    k_reg[:n, :n] += reg * np.eye(n)
    k_reg[n:, n:] -= reg * np.eye(p + m)
    return lu_factor(k_reg), k


def _kkt_solve(factor, rhs_x, rhs_y, rhs_z):
    lu, k_orig = factor
    rhs = np.concatenate([rhs_x, rhs_y, rhs_z])
    sol = lu_solve(lu, rhs)
    # Two refinement sweeps against the unregularized matrix.
    for _ in range(2):
        residual = rhs - k_orig @ sol
        sol += lu_solve(lu, residual)
    n, p = len(rhs_x), len(rhs_y)
    return sol[:n], sol[n : n + p], sol[n + p :]


def _conelp(c, a_mat, b_vec, g_mat, h_vec, cone, tol, max_iter):
    """Returns (x or None, status, iterations, relative duality gap)."""
    n = len(c)
    m, p = g_mat.shape[0], a_mat.shape[0]
    reg = 1e-10 * max(
        1.0,
        float(np.abs(g_mat).max(initial=0.0)),
        float(np.abs(a_mat).max(initial=0.0)),
    )

    # Initial point: least-norm style solves with identity scaling.
    eye_scale = np.eye(m)
    factor0 = _kkt_factor(a_mat, g_mat, eye_scale, reg)
    x, _, z_init = _kkt_solve(factor0, np.zeros(n), b_vec, h_vec)
    s = h_vec - g_mat @ x
    margin = cone.margin(s)
    if margin <= 0.0:
        s = s + (1.0 - margin) * cone.identity()
    x_d, y, z = _kkt_solve(factor0, -c, np.zeros(p), np.zeros(m))
    margin = cone.margin(z)
    if margin <= 0.0:
        z = z + (1.0 - margin) * cone.identity()

    e = cone.identity()
    m_bar = cone.degree
    best = None
    best_merit = math.inf
    stall = 0

    for it in range(1, max_iter + 1):
        rx = c + a_mat.T @ y + g_mat.T @ z
        ry = a_mat @ x - b_vec
        rz = g_mat @ x + s - h_vec
        gap = float(s @ z)
        obj = float(c @ x)

        pres = max(
            float(np.linalg.norm(ry, np.inf)) / max(1.0, float(np.linalg.norm(b_vec, np.inf))) if p else 0.0,
            float(np.linalg.norm(rz, np.inf)) / max(1.0, float(np.linalg.norm(h_vec, np.inf))),
        )
        dres = float(np.linalg.norm(rx, np.inf)) / max(1.0, float(np.linalg.norm(c, np.inf)))
        relgap = gap / max(1.0, abs(obj))
        if pres <= tol * 10 and dres <= tol * 10 and (gap <= tol or relgap <= tol):
            return x, OPTIMAL, it, relgap
        merit = max(pres, dres, relgap)
        if merit < best_merit * (1.0 - 1e-3):
            best_merit = merit
            stall = 0
        else:
            stall += 1
            # Bail early only while far from a solution (infeasible wander);
            # nearly converged iterates are allowed to keep grinding.
            if stall > 25 and merit > 1e-3:
                return x, MAX_ITER, it, relgap
            if stall > 60:
                return x, MAX_ITER, it, relgap
        best = x

        scaling = NtScaling(cone, s, z)
        lam = scaling.apply(z)
        if not np.all(np.isfinite(lam)) or cone.margin(lam) <= 0.0:
            return best, MAX_ITER, it, relgap
        wtw = scaling.wtw_matrix()
        try:
            factor = _kkt_factor(a_mat, g_mat, wtw, reg)
        except Exception:
            return best, MAX_ITER, it, relgap

        def direction(d_s):
            rhs_z = -rz - scaling.apply(cone.solve_arrow(lam, d_s))
            if not np.all(np.isfinite(rhs_z)):
                return None
            dx, dy, dz = _kkt_solve(factor, -rx, -ry, rhs_z)
            ds = scaling.apply(cone.solve_arrow(lam, d_s) - scaling.apply(dz))
            if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(ds)) and np.all(np.isfinite(dz))):
                return None
            return dx, dy, dz, ds

        # Affine (predictor) direction.
        d_s_aff = -cone.prod(lam, lam)
        aff = direction(d_s_aff)
        if aff is None:
            return best, MAX_ITER, it, relgap
        dx_a, dy_a, dz_a, ds_a = aff
        alpha_aff = min(1.0, 0.9999 * min(cone.max_step(s, ds_a), cone.max_step(z, dz_a)))
        gap_aff = float((s + alpha_aff * ds_a) @ (z + alpha_aff * dz_a))
        sigma = max(0.0, min(1.0, (gap_aff / gap))) ** 3
        mu = gap / m_bar

        # Combined (corrector) direction with Mehrotra second-order term.
        corr = cone.prod(scaling.apply(ds_a, inverse=True), scaling.apply(dz_a))
        d_s_comb = -cone.prod(lam, lam) - corr + sigma * mu * e
        comb = direction(d_s_comb)
        if comb is None:
            return best, MAX_ITER, it, relgap
        dx, dy, dz, ds = comb

        alpha = min(1.0, 0.99 * min(cone.max_step(s, ds), cone.max_step(z, dz)))
        if not math.isfinite(alpha) or alpha <= 1e-13:
            return best, MAX_ITER, it, relgap
        # Guard against boundary overshoot from roundoff in max_step.
        for _ in range(40):
            if cone.margin(s + alpha * ds) > 0.0 and cone.margin(z + alpha * dz) > 0.0:
                break
            alpha *= 0.5
        else:
            return best, MAX_ITER, it, relgap
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds

    return best, MAX_ITER, max_iter, math.inf
