"""Linear-program feasibility, min-max bisection and a small 0/1 branch-and-bound.

The LP kernel is HiGHS via :func:`scipy.optimize.linprog`; everything else in
the package talks to it only through :class:`LinearProgram`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

SLACK = 1e-9
_HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


class LinearProgram:
    """Nonnegative variables, linear constraints, optional linear objective.

    Constraints are stored row-wise in triplet form so that programs with tens
    of thousands of variables stay cheap to assemble.
    """

    def __init__(self):
        self.names: list[Hashable] = []
        self.index: dict[Hashable, int] = {}
        self.upper: list[float] = []
        self._rows: dict[str, list] = {"<=": [], "==": []}
        self.objective: dict[int, float] = {}

    def add_var(self, name: Hashable, upper: float | None = None) -> int:
        if name in self.index:
            raise ValueError(f"duplicate variable {name!r}")
        self.index[name] = len(self.names)
        self.names.append(name)
        self.upper.append(np.inf if upper is None else upper)
        return self.index[name]

    def var(self, name: Hashable) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise KeyError(f"constraint references undeclared variable {name!r}") from None

    def _coeffs(self, coeffs: Mapping[Hashable, float]) -> dict[int, float]:
        out: dict[int, float] = {}
        for name, c in coeffs.items():
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient on {name!r}")
            j = self.var(name)
            out[j] = out.get(j, 0.0) + c
        return out

    def add_constraint(self, coeffs: Mapping[Hashable, float], sense: str, rhs: float) -> None:
        self.add_row(self._coeffs(coeffs), sense, rhs)

    def add_row(self, row: dict[int, float], sense: str, rhs: float) -> None:
        """Like :meth:`add_constraint` but keyed by column index."""
        if not math.isfinite(rhs):
            raise ValueError("non-finite right-hand side")
        if sense == "<=":
            self._rows["<="].append((row, rhs))
        elif sense == ">=":
            self._rows["<="].append(({j: -c for j, c in row.items()}, -rhs))
        elif sense == "==":
            self._rows["=="].append((row, rhs))
        else:
            raise ValueError(f"unknown sense {sense!r}")

    def set_objective(self, coeffs: Mapping[Hashable, float]) -> None:
        self.objective = self._coeffs(coeffs)

    @property
    def n(self) -> int:
        return len(self.names)

    def matrices(self):
        def stack(rows):
            if not rows:
                return None, None
            r, c, v = [], [], []
            for i, (row, _) in enumerate(rows):
                r.extend([i] * len(row))
                c.extend(row.keys())
                v.extend(row.values())
            A = sp.csr_matrix((v, (r, c)), shape=(len(rows), self.n))
            return A, np.array([b for _, b in rows], float)

        A_ub, b_ub = stack(self._rows["<="])
        A_eq, b_eq = stack(self._rows["=="])
        return A_ub, b_ub, A_eq, b_eq

    def max_violation(self, x: np.ndarray) -> float:
        A_ub, b_ub, A_eq, b_eq = self.matrices()
        v = float(max(0.0, -x.min(initial=0.0)))
        ub = np.asarray(self.upper)
        v = max(v, float(np.max(x - ub, initial=0.0)))
        if A_ub is not None:
            v = max(v, float(np.max(A_ub @ x - b_ub, initial=0.0)))
        if A_eq is not None:
            v = max(v, float(np.max(np.abs(A_eq @ x - b_eq), initial=0.0)))
        return v

    def to_lp_format(self) -> str:
        """CPLEX LP text, for cross-checking with an external solver."""
        def term(c, j):
            sign = "-" if c < 0 else "+"
            return f"{sign} {abs(c):.17g} x{j}"

        obj = " ".join(term(c, j) for j, c in sorted(self.objective.items())) or "0 x0"
        lines = ["\\ " + "; ".join(f"x{j}={name}" for j, name in enumerate(self.names)),
                 "Minimize", f" obj: {obj}", "Subject To"]
        i = 0
        for sense, op in (("<=", "<="), ("==", "=")):
            for row, rhs in self._rows[sense]:
                body = " ".join(term(c, j) for j, c in sorted(row.items())) or "0 x0"
                lines.append(f" c{i}: {body} {op} {rhs:.17g}")
                i += 1
        lines.append("Bounds")
        for j, u in enumerate(self.upper):
            lines.append(f" 0 <= x{j}" + ("" if math.isinf(u) else f" <= {u:.17g}"))
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class LPResult:
    feasible: bool
    x: np.ndarray | None = None
    objective: float | None = None
    status: str = ""

    def value(self, lp: LinearProgram, name: Hashable) -> float:
        return float(self.x[lp.index[name]])


def _run(lp: LinearProgram, c: np.ndarray) -> LPResult:
    A_ub, b_ub, A_eq, b_eq = lp.matrices()
    bounds = [(0, None if math.isinf(u) else u) for u in lp.upper]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs", options=_HIGHS)
    if res.status == 3:
        raise ValueError("linear program is unbounded")
    if res.status == 2 or res.x is None:
        return LPResult(False, status=res.message)
    x = np.maximum(res.x, 0.0)
    if lp.max_violation(x) > SLACK:
        return LPResult(False, status=f"solution violates constraints by {lp.max_violation(x):.3g}")
    return LPResult(True, x, float(res.fun), res.message)


def check_feasible(lp: LinearProgram) -> LPResult:
    """Feasible point within absolute slack 1e-9, or ``feasible=False``."""
    return _run(lp, np.zeros(lp.n))


def solve_lp(lp: LinearProgram) -> LPResult:
    c = np.zeros(lp.n)
    for j, v in lp.objective.items():
        c[j] = v
    return _run(lp, c)


@dataclass(frozen=True)
class BisectionConfig:
    alpha_low: float = 0.0
    alpha_high: float = 1.0
    rel_tolerance: float = 1e-6
    max_iters: int = 60

    def __post_init__(self):
        if not self.alpha_low < self.alpha_high:
            raise ValueError("need alpha_low < alpha_high")
        if self.rel_tolerance <= 0:
            raise ValueError("rel_tolerance must be positive")


@dataclass
class BisectionResult:
    alpha: float
    lower: float
    solution: LPResult
    iterations: int


def bisect_min_alpha(family: Callable[[float], LinearProgram], cfg: BisectionConfig) -> BisectionResult:
    """Smallest alpha whose LP is feasible, for a family monotone in alpha."""
    top = check_feasible(family(cfg.alpha_high))
    if not top.feasible:
        raise ValueError(
            f"program infeasible at alpha_high={cfg.alpha_high}; raise the upper bound"
        )
    bottom = check_feasible(family(cfg.alpha_low))
    if bottom.feasible:
        return BisectionResult(cfg.alpha_low, cfg.alpha_low, bottom, 0)
    lo, hi, best = cfg.alpha_low, cfg.alpha_high, top
    it = 0
    while (hi - lo) > cfg.rel_tolerance * hi and it < cfg.max_iters:
        mid = 0.5 * (lo + hi)
        res = check_feasible(family(mid))
        if res.feasible:
            hi, best = mid, res
        else:
            lo = mid
        it += 1
    return BisectionResult(hi, lo, best, it)


# --------------------------------------------------------------------------
# 0/1 programs
# --------------------------------------------------------------------------


@dataclass
class BinaryResult:
    status: str  # "optimal" | "abandoned" | "infeasible"
    x: np.ndarray | None
    objective: float | None
    nodes: int


@dataclass
class MixedBinaryProgram:
    """min c.x  s.t.  A_ub x <= b_ub, A_eq x = b_eq, x >= 0,
    x_j in {0, 1} where ``binary[j]``; other variables are continuous in [0, upper]."""

    c: np.ndarray
    A_ub: sp.spmatrix | np.ndarray | None
    b_ub: np.ndarray | None
    A_eq: sp.spmatrix | np.ndarray | None
    b_eq: np.ndarray | None
    binary: np.ndarray
    upper: np.ndarray | None = None
    integral_objective: bool = False
    names: Sequence[Hashable] = field(default_factory=tuple)

    def bounds(self) -> list[tuple[float, float | None]]:
        out = []
        for j, is_bin in enumerate(self.binary):
            if is_bin:
                out.append((0.0, 1.0))
            else:
                u = None if self.upper is None or math.isinf(self.upper[j]) else float(self.upper[j])
                out.append((0.0, u))
        return out

    def feasible(self, x: np.ndarray, tol: float = 1e-7) -> bool:
        if self.A_ub is not None and np.any(self.A_ub @ x - self.b_ub > tol):
            return False
        if self.A_eq is not None and np.any(np.abs(self.A_eq @ x - self.b_eq) > tol):
            return False
        return True


def solve_binary_min(
    prog: MixedBinaryProgram,
    node_limit: int = 20000,
    incumbent: np.ndarray | None = None,
    lower_bound: float | None = None,
) -> BinaryResult:
    """Depth-first branch-and-bound with LP-relaxation bounds.

    ``incumbent`` is a known feasible point used as the starting upper bound;
    ``lower_bound`` is a proven bound that stops the search once reached.
    When the node budget runs out the result is ``status="abandoned"`` so the
    caller can fall back to a heuristic.
    """
    c = np.asarray(prog.c, float)
    binary = np.asarray(prog.binary, bool)
    base = prog.bounds()
    best_x = None if incumbent is None else np.asarray(incumbent, float)
    best = math.inf if best_x is None else float(c @ best_x)
    eps = 1e-9

    def pruned(bound: float) -> bool:
        if prog.integral_objective:
            return math.ceil(bound - 1e-6) >= best - eps
        return bound >= best - 1e-9

    if lower_bound is not None and best <= lower_bound + eps:
        return BinaryResult("optimal", best_x, best, 0)

    stack: list[dict[int, float]] = [{}]
    nodes = 0
    while stack:
        if nodes >= node_limit:
            return BinaryResult("abandoned", best_x, None if best_x is None else best, nodes)
        fixed = stack.pop()
        nodes += 1
        bounds = list(base)
        for j, v in fixed.items():
            bounds[j] = (v, v)
        res = linprog(c, A_ub=prog.A_ub, b_ub=prog.b_ub, A_eq=prog.A_eq, b_eq=prog.b_eq,
                      bounds=bounds, method="highs")
        if res.status != 0:
            continue
        if pruned(res.fun):
            continue
        x = res.x
        frac = np.abs(x - np.round(x))
        frac[~binary] = 0.0
        j = int(np.argmax(frac))
        if frac[j] <= 1e-7:
            xr = x.copy()
            xr[binary] = np.round(xr[binary])
            if prog.feasible(xr):
                val = float(c @ xr)
                if val < best - eps:
                    best, best_x = val, xr
                    if lower_bound is not None and best <= lower_bound + eps:
                        break
                continue
            # rounding drifted out of tolerance: branch on the least-integral binary
            j = int(np.argmax(np.where(binary, frac, -1.0)))
        first = 1.0 if x[j] >= 0.5 else 0.0
        stack.append({**fixed, j: 1.0 - first})
        stack.append({**fixed, j: first})

    if best_x is None:
        return BinaryResult("infeasible", None, None, nodes)
    return BinaryResult("optimal", best_x, best, nodes)


def brute_force_binary_min(prog: MixedBinaryProgram) -> tuple[float | None, np.ndarray | None]:
    """Enumerate every 0/1 assignment (pure binary programs only)."""
    binary = np.asarray(prog.binary, bool)
    if not binary.all():
        raise ValueError("brute force handles pure 0/1 programs only")
    n = len(binary)
    A_ub = None if prog.A_ub is None else np.asarray(sp.csr_matrix(prog.A_ub).todense())
    A_eq = None if prog.A_eq is None else np.asarray(sp.csr_matrix(prog.A_eq).todense())
    best, best_x = None, None
    chunk = 1 << min(n, 14)
    for start in range(0, 1 << n, chunk):
        ids = np.arange(start, min(start + chunk, 1 << n))
        X = ((ids[:, None] >> np.arange(n)) & 1).astype(float)
        ok = np.ones(len(ids), bool)
        if A_ub is not None:
            ok &= np.all(X @ A_ub.T <= prog.b_ub + 1e-9, axis=1)
        if A_eq is not None:
            ok &= np.all(np.abs(X @ A_eq.T - prog.b_eq) <= 1e-9, axis=1)
        if ok.any():
            vals = X[ok] @ prog.c
            i = int(np.argmin(vals))
            if best is None or vals[i] < best:
                best, best_x = float(vals[i]), X[ok][i]
    return best, best_x
