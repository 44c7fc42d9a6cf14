"""Exact revised simplex for small set-covering LPs over rational data.

Solves  min c'w  s.t.  Aw >= 1, w >= 0  where A is the 0/1 vertex-part
incidence matrix.  All basis arithmetic is done in Fractions, so the optimum
and the basic weights are exact for the given costs.  Pricing is screened in
floating point for speed, but every entering column is re-priced exactly and
optimality is certified by a final exact sweep, so the float pass can only
cost time, never correctness.

The column pool must contain every singleton {v}: those columns form the
identity start basis, which makes the covering LP feasible without a phase 1.
``CoverLp`` keeps its basis across ``add_column`` calls, so column generation
re-optimizes in a handful of pivots instead of from scratch.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import VerificationError

_ZERO = Fraction(0)
_ONE = Fraction(1)
_SCREEN_TOL = 1e-9
_BLAND_AFTER = 5000  # switch to Bland's rule if Dantzig-style pricing runs long

_SURPLUS_BASE = 10**9  # Bland priority offset for surplus columns


@dataclass
class CoverLpResult:
    objective: Fraction
    weights: dict[int, Fraction]  # column index -> positive weight
    duals: tuple[Fraction, ...]
    iterations: int


class CoverLp:
    """Warm-startable exact covering LP.  Surplus column ids are -v (v a vertex)."""

    def __init__(self, n: int, columns: list[frozenset[int]], costs: list[Fraction]):
        if len(columns) != len(costs):
            raise ValueError("columns and costs length mismatch")
        self.n = n
        self.columns = list(columns)
        self.costs = list(costs)
        singleton_col: dict[int, int] = {}
        for j, col in enumerate(self.columns):
            if len(col) == 1:
                v = next(iter(col))
                singleton_col.setdefault(v, j)
        if len(singleton_col) != n:
            missing = [v for v in range(1, n + 1) if v not in singleton_col]
            raise VerificationError(f"column pool lacks singleton parts for {missing}")
        self.basis = [singleton_col[v] for v in range(1, n + 1)]
        self.b_inv: list[list[Fraction]] = [
            [_ONE if i == j else _ZERO for j in range(n)] for i in range(n)
        ]
        self.x_b: list[Fraction] = [_ONE] * n
        self.iterations = 0
        self._rebuild_float_view()

    def _rebuild_float_view(self) -> None:
        k = len(self.columns)
        self._incidence = np.zeros((k, self.n), dtype=np.float64)
        for j, col in enumerate(self.columns):
            for v in col:
                self._incidence[j, v - 1] = 1.0
        self._costs_f = np.array([float(c) for c in self.costs], dtype=np.float64)

    def add_column(self, column: frozenset[int], cost: Fraction) -> int:
        """Append a column; the current basis stays feasible."""
        self.columns.append(column)
        self.costs.append(cost)
        self._rebuild_float_view()
        return len(self.columns) - 1

    # column ids: j >= 0 are parts, -v are surplus for vertex v
    def _col_vec(self, ident: int) -> list[Fraction]:
        vec = [_ZERO] * self.n
        if ident >= 0:
            for v in self.columns[ident]:
                vec[v - 1] = _ONE
        else:
            vec[-ident - 1] = -_ONE
        return vec

    def _col_cost(self, ident: int) -> Fraction:
        return self.costs[ident] if ident >= 0 else _ZERO

    @staticmethod
    def _priority(ident: int) -> int:
        return ident if ident >= 0 else _SURPLUS_BASE - ident

    def _duals(self) -> list[Fraction]:
        y = [_ZERO] * self.n
        for i in range(self.n):
            ci = self._col_cost(self.basis[i])
            if ci:
                row = self.b_inv[i]
                for j in range(self.n):
                    if row[j]:
                        y[j] += ci * row[j]
        return y

    def _exact_reduced(self, ident: int, y: list[Fraction]) -> Fraction:
        if ident >= 0:
            return self.costs[ident] - sum(y[v - 1] for v in self.columns[ident])
        return y[-ident - 1]

    def _entering(self, y: list[Fraction]) -> int:
        if self.iterations <= _BLAND_AFTER:
            y_f = np.array([float(v) for v in y], dtype=np.float64)
            reduced_f = self._costs_f - self._incidence @ y_f
            order = np.argsort(reduced_f, kind="stable")
            for j in order[: max(8, self.n)]:
                if reduced_f[j] >= -_SCREEN_TOL:
                    break
                if self._exact_reduced(int(j), y) < 0:
                    return int(j)
            for v in range(self.n):
                if y_f[v] < -_SCREEN_TOL and y[v] < 0:
                    return -(v + 1)
        # exact sweep, Bland order: certifies optimality when nothing is found
        in_basis = set(self.basis)
        for ident in list(range(len(self.columns))) + [-(v + 1) for v in range(self.n)]:
            if ident in in_basis:
                continue
            if self._exact_reduced(ident, y) < 0:
                return ident
        return None

    def solve(self) -> CoverLpResult:
        n = self.n
        while True:
            self.iterations += 1
            y = self._duals()
            entering = self._entering(y)
            if entering is None:
                break
            a_j = self._col_vec(entering)
            d = [
                sum(self.b_inv[i][j] * a_j[j] for j in range(n) if a_j[j])
                for i in range(n)
            ]
            leave = -1
            best: Fraction | None = None
            for i in range(n):
                if d[i] > 0:
                    ratio = self.x_b[i] / d[i]
                    if (
                        best is None
                        or ratio < best
                        or (
                            ratio == best
                            and self._priority(self.basis[i]) < self._priority(self.basis[leave])
                        )
                    ):
                        best, leave = ratio, i
            if leave < 0:
                raise VerificationError("covering LP reported unbounded; data is inconsistent")
            theta = best
            piv = d[leave]
            self.b_inv[leave] = [val / piv for val in self.b_inv[leave]]
            for i in range(n):
                if i != leave and d[i]:
                    di = d[i]
                    row, prow = self.b_inv[i], self.b_inv[leave]
                    self.b_inv[i] = [row[j] - di * prow[j] for j in range(n)]
                    self.x_b[i] -= di * theta
            self.x_b[leave] = theta
            self.basis[leave] = entering

        weights: dict[int, Fraction] = {}
        for i in range(n):
            if self.basis[i] >= 0 and self.x_b[i] > 0:
                weights[self.basis[i]] = weights.get(self.basis[i], _ZERO) + self.x_b[i]
        objective = sum((self.costs[j] * w for j, w in weights.items()), _ZERO)
        return CoverLpResult(
            objective=objective,
            weights=weights,
            duals=tuple(self._duals()),
            iterations=self.iterations,
        )


def solve_min_cover_lp(
    n: int,
    columns: list[frozenset[int]],
    costs: list[Fraction],
) -> CoverLpResult:
    return CoverLp(n, columns, costs).solve()
