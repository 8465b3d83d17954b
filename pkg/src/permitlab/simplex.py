"""Exact rational primal simplex for problems of the form

    max  c . x   subject to   A x <= b,  x >= 0,  b >= 0,

which is the shape the profit program takes after eliminating the trivial
empty-allocation variable (the slack basis is then feasible, so no phase 1).
Rows are sparse dicts. Entering variable: Dantzig rule, switching to Bland's
rule after a run of degenerate pivots so termination is guaranteed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .rational import Q, ZERO

STALL_LIMIT = 40


class Unbounded(Exception):
    pass


@dataclass
class LinearProgram:
    ncols: int = 0
    rows: list = field(default_factory=list)  # list[dict[col, Q]]
    rhs: list = field(default_factory=list)
    obj: dict = field(default_factory=dict)

    def add_cols(self, k: int) -> range:
        r = range(self.ncols, self.ncols + k)
        self.ncols += k
        return r

    def add_col(self, obj_coef=ZERO) -> int:
        j = self.ncols
        self.ncols += 1
        if obj_coef:
            self.obj[j] = Q(obj_coef)
        return j

    def set_obj(self, col: int, coef):
        coef = Q(coef)
        if coef:
            self.obj[col] = coef
        else:
            self.obj.pop(col, None)

    def add_row(self, coeffs: dict, rhs) -> int:
        rhs = Q(rhs)
        if rhs < 0:
            raise ValueError("rhs must be non-negative for the slack start")
        self.rows.append({j: Q(v) for j, v in coeffs.items() if v != 0})
        self.rhs.append(rhs)
        return len(self.rows) - 1


@dataclass
class SimplexResult:
    objective: Q
    primal: dict  # structural col -> value (zeros omitted)
    duals: list  # one multiplier per row, >= 0
    iterations: int


def solve(lp: LinearProgram) -> SimplexResult:
    nrows = len(lp.rows)
    ncols = lp.ncols
    # tableau rows over structural cols + slack cols (ncols + r)
    rows = []
    for r, row in enumerate(lp.rows):
        t = dict(row)
        t[ncols + r] = Q(1)
        rows.append(t)
    rhs = [Q(v) for v in lp.rhs]
    obj = {j: Q(v) for j, v in lp.obj.items() if v != 0}
    objval = ZERO
    basis = [ncols + r for r in range(nrows)]
    stall = 0
    iters = 0
    while True:
        iters += 1
        use_bland = stall >= STALL_LIMIT
        enter = -1
        if use_bland:
            for j, rc in sorted(obj.items()):
                if rc > 0:
                    enter = j
                    break
        else:
            best = ZERO
            for j, rc in obj.items():
                if rc > best or (rc == best and rc > 0 and j < enter):
                    best = rc
                    enter = j
        if enter < 0:
            break
        # ratio test; ties by smallest basis index (Bland-compatible)
        leave = -1
        best_ratio = None
        for r in range(nrows):
            a = rows[r].get(enter)
            if a is not None and a > 0:
                ratio = rhs[r] / a
                if (
                    best_ratio is None
                    or ratio < best_ratio
                    or (ratio == best_ratio and basis[r] < basis[leave])
                ):
                    best_ratio = ratio
                    leave = r
        if leave < 0:
            raise Unbounded(f"objective unbounded along column {enter}")
        if best_ratio == 0:
            stall += 1
        else:
            stall = 0
        # pivot on (leave, enter)
        prow = rows[leave]
        piv = prow[enter]
        if piv != 1:
            inv = 1 / piv
            prow = {j: v * inv for j, v in prow.items()}
            rows[leave] = prow
            rhs[leave] *= inv
        prhs = rhs[leave]
        for r in range(nrows):
            if r == leave:
                continue
            row = rows[r]
            f = row.get(enter)
            if f is None or f == 0:
                continue
            for j, v in prow.items():
                nv = row.get(j, ZERO) - f * v
                if nv:
                    row[j] = nv
                else:
                    row.pop(j, None)
            nrhs = rhs[r] - f * prhs
            rhs[r] = nrhs
        f = obj.get(enter)
        if f:
            for j, v in prow.items():
                nv = obj.get(j, ZERO) - f * v
                if nv:
                    obj[j] = nv
                else:
                    obj.pop(j, None)
            objval += f * prhs
        basis[leave] = enter
    primal = {}
    for r in range(nrows):
        if basis[r] < ncols and rhs[r] != 0:
            primal[basis[r]] = rhs[r]
    duals = [-obj.get(ncols + r, ZERO) for r in range(nrows)]
    return SimplexResult(objval, primal, duals, iters)
