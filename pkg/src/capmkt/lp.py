"""Self-contained linear-program solver with dual prices and reduced costs.

Bounded-variable two-phase revised simplex over a dense tableau. Dantzig
pricing by default with Bland's rule engaged after an iteration threshold to
rule out cycling. The basis inverse is maintained explicitly with product-form
updates and periodic refactorization.

Dual sign convention for ``min``: equality rows carry free duals, ``>=`` rows
nonnegative duals, ``<=`` rows nonpositive duals. Reduced costs are
``c_j - y^T a_j``: nonnegative at a lower bound, nonpositive at an upper
bound, zero on basic columns.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

__all__ = ["LinearProgram", "LpSolution", "KktReport", "solve", "check_kkt", "write_lp_text"]

INF = float("inf")

FEAS_TOL = 1e-7       # primal feasibility
OPT_TOL = 1e-7        # reduced-cost optimality
PIVOT_TOL = 1e-9      # smallest acceptable pivot magnitude
REFACTOR_EVERY = 64   # basis refactorization cadence
BLAND_AFTER = 2000    # switch to Bland's rule after this many pivots


@dataclass
class _Variable:
    name: str
    cost: float
    lower: float
    upper: float


@dataclass
class _Row:
    name: str
    coeffs: dict[int, float]
    relation: str   # "<=", "=", ">="
    rhs: float


class LinearProgram:
    """Minimization LP assembled column-by-column and row-by-row.

    Variables and rows are referenced by unique names; duals and reduced
    costs are reported against those names.
    """

    def __init__(self):
        self.variables: list[_Variable] = []
        self.rows: list[_Row] = []
        self._var_index: dict[str, int] = {}
        self._row_names: set[str] = set()

    def add_variable(self, name: str, cost: float = 0.0,
                     lower: float = 0.0, upper: float = INF) -> int:
        if name in self._var_index:
            raise ValueError(f"duplicate variable name {name!r}")
        if not np.isfinite(cost):
            raise ValueError(f"variable {name!r}: cost must be finite")
        if lower > upper:
            raise ValueError(f"variable {name!r}: lower {lower} exceeds upper {upper}")
        idx = len(self.variables)
        self.variables.append(_Variable(name, float(cost), float(lower), float(upper)))
        self._var_index[name] = idx
        return idx

    def add_constraint(self, name: str, terms: Iterable[tuple[str | int, float]],
                       relation: str, rhs: float) -> int:
        if name in self._row_names:
            raise ValueError(f"duplicate row name {name!r}")
        if relation not in ("<=", "=", ">="):
            raise ValueError(f"row {name!r}: unknown relation {relation!r}")
        coeffs: dict[int, float] = {}
        for ref, a in terms:
            j = ref if isinstance(ref, int) else self._var_index[ref]
            if a != 0.0:
                coeffs[j] = coeffs.get(j, 0.0) + float(a)
        self.rows.append(_Row(name, coeffs, relation, float(rhs)))
        self._row_names.add(name)
        return len(self.rows) - 1

    def variable_index(self, name: str) -> int:
        return self._var_index[name]

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    @property
    def n_rows(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class LpSolution:
    status: str                       # "optimal" | "infeasible" | "unbounded"
    objective: float
    x: Mapping[str, float]
    duals: Mapping[str, float]
    reduced_costs: Mapping[str, float]
    iterations: int

    def primal(self, name: str) -> float:
        return self.x[name]

    def dual(self, name: str) -> float:
        return self.duals[name]


class _Standardized:
    """Shifted/split standard form: min c'z, A z = b, 0 <= z <= U."""

    def __init__(self, lp: LinearProgram):
        n = lp.n_variables
        m = lp.n_rows
        # Column mapping per original variable: (kind, col, aux)
        #   kind "shift":  x = lower + z[col]
        #   kind "neg":    x = upper - z[col]          (lower = -inf)
        #   kind "split":  x = z[col] - z[aux]         (free)
        self.mapping: list[tuple[str, int, int | None]] = []
        cols_cost: list[float] = []
        cols_upper: list[float] = []
        col_of_var: list[list[tuple[int, float]]] = []   # (col, sign)
        self.const = 0.0

        for v in lp.variables:
            if v.lower == -INF and v.upper == INF:
                c1 = len(cols_cost)
                cols_cost.extend([v.cost, -v.cost])
                cols_upper.extend([INF, INF])
                self.mapping.append(("split", c1, c1 + 1))
                col_of_var.append([(c1, 1.0), (c1 + 1, -1.0)])
            elif v.lower == -INF:
                c1 = len(cols_cost)
                cols_cost.append(-v.cost)
                cols_upper.append(INF)
                self.const += v.cost * v.upper
                self.mapping.append(("neg", c1, None))
                col_of_var.append([(c1, -1.0)])
            else:
                c1 = len(cols_cost)
                cols_cost.append(v.cost)
                cols_upper.append(v.upper - v.lower)
                self.const += v.cost * v.lower
                self.mapping.append(("shift", c1, None))
                col_of_var.append([(c1, 1.0)])

        n_struct = len(cols_cost)
        n_slack = sum(1 for r in lp.rows if r.relation != "=")
        total = n_struct + n_slack
        A = np.zeros((m, total))
        b = np.zeros(m)
        slack_col = n_struct
        self.slack_of_row = np.full(m, -1, dtype=int)
        for i, row in enumerate(lp.rows):
            rhs = row.rhs
            for j, a in row.coeffs.items():
                v = lp.variables[j]
                for col, sign in col_of_var[j]:
                    A[i, col] += a * sign
                # shift/neg move a constant into the rhs
                if v.lower == -INF and v.upper == INF:
                    pass
                elif v.lower == -INF:
                    rhs -= a * v.upper
                else:
                    rhs -= a * v.lower
            if row.relation == "<=":
                A[i, slack_col] = 1.0
                self.slack_of_row[i] = slack_col
                slack_col += 1
            elif row.relation == ">=":
                A[i, slack_col] = -1.0
                self.slack_of_row[i] = slack_col
                slack_col += 1
            b[i] = rhs

        self.A = A
        self.b = b
        self.c = np.concatenate([np.asarray(cols_cost), np.zeros(n_slack)])
        self.upper = np.concatenate([np.asarray(cols_upper), np.full(n_slack, INF)])
        self.n_struct = n_struct


def _simplex(A: np.ndarray, b: np.ndarray, c: np.ndarray, upper: np.ndarray):
    """Core bounded simplex on min c'z, Az = b, 0 <= z <= upper.

    Returns (status, z, y, d, iterations). Phase 1 minimizes the sum of
    artificial variables; phase 2 the true objective.
    """
    m, n = A.shape
    art_sign = np.where(b >= 0, 1.0, -1.0)
    A_full = np.hstack([A, np.diag(art_sign)])
    upper_full = np.concatenate([upper, np.full(m, INF)])
    z = np.zeros(n + m)
    z[n:] = np.abs(b)
    in_basis = np.zeros(n + m, dtype=bool)
    in_basis[n:] = True
    at_upper = np.zeros(n + m, dtype=bool)
    inv = np.diag(1.0 / art_sign)   # inverse of the artificial basis

    iterations = 0
    basis_arr = np.arange(n, n + m)

    def refactor():
        """Recompute the inverse and the basic values to wash out drift."""
        nonlocal inv
        inv = np.linalg.inv(A_full[:, basis_arr])
        nonbasic = ~in_basis
        rhs = b - A_full[:, nonbasic] @ z[nonbasic]
        z[basis_arr] = inv @ rhs

    def run_phase(cost: np.ndarray, allow: np.ndarray) -> str:
        """Pivot until optimal for `cost`; `allow` masks enterable columns."""
        nonlocal iterations, inv
        while True:
            iterations += 1
            if iterations % REFACTOR_EVERY == 0:
                refactor()
            y = cost[basis_arr] @ inv
            d = cost - y @ A_full
            # entering candidates
            lower_viol = (~in_basis) & (~at_upper) & allow & (d < -OPT_TOL)
            upper_viol = (~in_basis) & at_upper & allow & (d > OPT_TOL)
            cand = np.where(lower_viol | upper_viol)[0]
            if cand.size == 0:
                return "optimal"
            if iterations > BLAND_AFTER:
                j = int(cand[0])             # Bland: lowest index
            else:
                j = int(cand[np.argmax(np.abs(d[cand]))])
            increasing = not at_upper[j]
            col = inv @ A_full[:, j]
            direction = col if increasing else -col
            xb = z[basis_arr]
            ub = upper_full[basis_arr]
            # ratio test: entering moves by t >= 0 in its improving direction;
            # basic variables change by -direction * t.
            t_own = upper_full[j]
            ratios = np.full(m, INF)
            dec = direction > PIVOT_TOL
            inc = (direction < -PIVOT_TOL) & np.isfinite(ub)
            np.divide(np.maximum(xb, 0.0), direction, out=ratios, where=dec)
            np.divide(np.maximum(ub - xb, 0.0), -direction, out=ratios, where=inc)
            basic_min = float(ratios.min(initial=INF)) if m else INF
            t_min = min(t_own, basic_min)
            if t_min == INF:
                return "unbounded"
            if basic_min > t_min + PIVOT_TOL:
                # entering hits its own opposite bound first: flip, no pivot
                z[basis_arr] = xb - direction * t_min
                z[j] = (t_min if increasing else upper_full[j] - t_min)
                at_upper[j] = not at_upper[j]
                continue
            tie = np.where(ratios <= basic_min + PIVOT_TOL)[0]
            if iterations > BLAND_AFTER:
                leave_pos = int(tie[np.argmin(basis_arr[tie])])
            else:
                leave_pos = int(tie[np.argmax(np.abs(direction[tie]))])
            t_step = max(min(t_min, basic_min), 0.0)
            z[basis_arr] = xb - direction * t_step
            z[j] = t_step if increasing else upper_full[j] - t_step
            leaving = int(basis_arr[leave_pos])
            leaves_to_upper = bool(inc[leave_pos])
            in_basis[leaving] = False
            at_upper[leaving] = leaves_to_upper
            z[leaving] = upper_full[leaving] if leaves_to_upper else 0.0
            basis_arr[leave_pos] = j
            in_basis[j] = True
            at_upper[j] = False
            # product-form update of the inverse (pivot magnitude guaranteed
            # by the ratio test, which only admits rows with |direction| > tol)
            piv = col[leave_pos]
            row = inv[leave_pos] / piv
            inv = inv - np.outer(col, row)
            inv[leave_pos] = row

    # Phase 1
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    allow1 = np.ones(n + m, dtype=bool)
    status = run_phase(cost1, allow1)
    phase1_obj = float(z[n:].sum())
    if status == "unbounded" or phase1_obj > 1e-7 * max(1.0, float(np.abs(b).max(initial=0.0))):
        return "infeasible", z[:n], np.zeros(m), np.zeros(n), iterations

    # pin artificials to zero so they never re-enter at a positive level
    upper_full[n:] = 0.0
    at_upper[n:] = ~in_basis[n:]

    cost2 = np.concatenate([c, np.zeros(m)])
    allow2 = np.concatenate([np.ones(n, dtype=bool), np.zeros(m, dtype=bool)])
    status = run_phase(cost2, allow2)
    if status == "unbounded":
        return "unbounded", z[:n], np.zeros(m), np.zeros(n), iterations

    refactor()
    y = cost2[basis_arr] @ inv
    d = c - y @ A
    return "optimal", z[:n].copy(), y, d, iterations


def solve(lp: LinearProgram) -> LpSolution:
    """Solve the LP; never raises on infeasible or unbounded models."""
    std = _Standardized(lp)
    status, zvec, y, d, iters = _simplex(std.A, std.b, std.c, std.upper)

    if status != "optimal":
        return LpSolution(
            status=status, objective=float("nan"),
            x={v.name: float("nan") for v in lp.variables},
            duals={r.name: float("nan") for r in lp.rows},
            reduced_costs={v.name: float("nan") for v in lp.variables},
            iterations=iters,
        )

    x: dict[str, float] = {}
    rc: dict[str, float] = {}
    for v, (kind, col, aux) in zip(lp.variables, std.mapping):
        if kind == "split":
            x[v.name] = float(zvec[col] - zvec[aux])
            rc[v.name] = float(d[col])
        elif kind == "neg":
            x[v.name] = float(v.upper - zvec[col])
            rc[v.name] = float(-d[col])
        else:
            x[v.name] = float(v.lower + zvec[col])
            rc[v.name] = float(d[col])
    duals = {row.name: float(y[i]) for i, row in enumerate(lp.rows)}
    objective = float(std.c @ zvec + std.const)
    return LpSolution(
        status="optimal", objective=objective, x=x, duals=duals,
        reduced_costs=rc, iterations=iters,
    )


@dataclass(frozen=True)
class KktReport:
    """Worst-case optimality residuals of a solution against its LP."""

    feasibility: float        # row + bound violation
    stationarity: float       # reduced-cost sign violations at the bounds
    complementarity: float    # slack * dual and bound-gap * reduced-cost products
    duality_gap: float        # |primal - dual objective|, relative
    max_residual: float
    passed: bool


def check_kkt(lp: LinearProgram, sol: LpSolution, tol: float = 1e-6) -> KktReport:
    """Verify primal/dual feasibility, complementary slackness, strong duality."""
    if sol.status != "optimal":
        raise ValueError("KKT check requires an optimal solution")
    xs = np.array([sol.x[v.name] for v in lp.variables])
    cost = np.array([v.cost for v in lp.variables])
    lower = np.array([v.lower for v in lp.variables])
    upper = np.array([v.upper for v in lp.variables])

    feas = 0.0
    comp = 0.0
    stat = 0.0
    dual_obj = 0.0
    atx = np.zeros(lp.n_rows)
    d = cost.copy()
    for i, row in enumerate(lp.rows):
        a = sum(coef * xs[j] for j, coef in row.coeffs.items())
        atx[i] = a
        yv = sol.duals[row.name]
        scale = max(1.0, abs(row.rhs))
        if row.relation == "=":
            feas = max(feas, abs(a - row.rhs) / scale)
        elif row.relation == "<=":
            feas = max(feas, (a - row.rhs) / scale)
            stat = max(stat, yv)                      # y <= 0 on <= rows
            comp = max(comp, abs(yv * (row.rhs - a)) / scale)
        else:
            feas = max(feas, (row.rhs - a) / scale)
            stat = max(stat, -yv)                     # y >= 0 on >= rows
            comp = max(comp, abs(yv * (a - row.rhs)) / scale)
        dual_obj += yv * row.rhs
        for j, coef in row.coeffs.items():
            d[j] -= yv * coef

    for j, v in enumerate(lp.variables):
        scale = max(1.0, abs(xs[j]))
        if np.isfinite(lower[j]):
            feas = max(feas, (lower[j] - xs[j]) / scale)
        if np.isfinite(upper[j]):
            feas = max(feas, (xs[j] - upper[j]) / scale)
        mu = max(d[j], 0.0)    # lower-bound multiplier
        nu = max(-d[j], 0.0)   # upper-bound multiplier
        if np.isfinite(lower[j]):
            comp = max(comp, abs(mu * (xs[j] - lower[j])) / scale)
            dual_obj += lower[j] * mu
        elif mu > tol:
            stat = max(stat, mu)
        if np.isfinite(upper[j]):
            comp = max(comp, abs(nu * (upper[j] - xs[j])) / scale)
            dual_obj -= upper[j] * nu
        elif nu > tol:
            stat = max(stat, nu)

    gap = abs(sol.objective - dual_obj) / (1.0 + abs(sol.objective))
    worst = max(feas, stat, comp, gap)
    return KktReport(
        feasibility=feas, stationarity=stat, complementarity=comp,
        duality_gap=gap, max_residual=worst, passed=worst <= tol,
    )


def write_lp_text(lp: LinearProgram) -> str:
    """Render the model in CPLEX LP text format for external cross-checks."""
    out = ["Minimize", " obj:"]
    terms = []
    for v in lp.variables:
        if v.cost != 0.0:
            terms.append(f" {'+' if v.cost >= 0 else '-'} {abs(v.cost):.17g} {v.name}")
    out.append("".join(terms) if terms else " 0 x_dummy")
    out.append("Subject To")
    rel = {"<=": "<=", ">=": ">=", "=": "="}
    for row in lp.rows:
        body = "".join(
            f" {'+' if a >= 0 else '-'} {abs(a):.17g} {lp.variables[j].name}"
            for j, a in sorted(row.coeffs.items())
        )
        out.append(f" {row.name}:{body} {rel[row.relation]} {row.rhs:.17g}")
    out.append("Bounds")
    for v in lp.variables:
        lo = "-inf" if v.lower == -INF else f"{v.lower:.17g}"
        hi = "+inf" if v.upper == INF else f"{v.upper:.17g}"
        out.append(f" {lo} <= {v.name} <= {hi}")
    out.append("End")
    return "\n".join(out) + "\n"
