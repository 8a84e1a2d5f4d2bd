"""Solver-agnostic MILP representation and backend adapters.

Models are built incrementally with :meth:`ModelInstance.add_variable`,
:meth:`ModelInstance.add_constraint` and :meth:`ModelInstance.set_objective`.
Variable and constraint names are tuples (``("p", "g1", 3, "d0")``) hashed
into a registry; they are rendered to strings only for diagnostics and LP
export.

Two open-source backends are supported:

* ``"highs"`` -- HiGHS through :mod:`highspy` (default; reports the MIP dual
  bound, honours ``threads`` and ``seed``).
* ``"scipy"`` -- :func:`scipy.optimize.milp`, which wraps the same HiGHS code
  but exposes fewer options.

Only minimization is supported.
"""

from __future__ import annotations

import copy
import io
import logging
import math
import os
import re
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import ModelBuildError

logger = logging.getLogger(__name__)

CONTINUOUS = "continuous"
BINARY = "binary"
SENSES = ("<=", ">=", "==")
INF = math.inf

# Coefficients with magnitude below this are dropped at build time.
COEF_EPS = 1e-12

STATUSES = ("optimal", "gap_limit", "time_limit", "infeasible", "unbounded", "error")


class VariableRef:
    """Handle to a variable registered in one :class:`ModelInstance`."""

    __slots__ = ("index", "name", "domain", "lo", "hi", "_model")

    def __init__(self, model, index, name, domain, lo, hi):
        self._model = model
        self.index = index
        self.name = name
        self.domain = domain
        self.lo = lo
        self.hi = hi

    @property
    def is_binary(self) -> bool:
        return self.domain == BINARY

    def __repr__(self):
        return f"VariableRef({self.name!r}, {self.domain}, [{self.lo}, {self.hi}])"

    # Arithmetic promotes to LinExpr so model code can write ``2 * x + y``.
    def _expr(self):
        return LinExpr({self: 1.0})

    def __add__(self, other):
        return self._expr() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self._expr() - other

    def __rsub__(self, other):
        return (-1.0) * self._expr() + other

    def __mul__(self, c):
        return self._expr() * c

    __rmul__ = __mul__

    def __neg__(self):
        return self._expr() * -1.0

    def __truediv__(self, c):
        return self._expr() * (1.0 / c)


class LinExpr:
    """Affine expression ``sum(coef * var) + constant``.

    Duplicate variables are merged on construction, so ``2x + 3x`` is held as
    a single ``5x`` term.
    """

    __slots__ = ("terms", "constant")

    def __init__(self, terms: Mapping[VariableRef, float] | None = None, constant: float = 0.0):
        self.terms: dict[VariableRef, float] = dict(terms) if terms else {}
        self.constant = float(constant)

    @classmethod
    def of(cls, obj) -> "LinExpr":
        if isinstance(obj, LinExpr):
            return obj
        if isinstance(obj, VariableRef):
            return cls({obj: 1.0})
        return cls(constant=float(obj))

    def copy(self) -> "LinExpr":
        return LinExpr(self.terms, self.constant)

    def add_term(self, var: VariableRef, coef: float) -> "LinExpr":
        """In-place ``self += coef * var``; returns ``self``."""
        self.terms[var] = self.terms.get(var, 0.0) + coef
        return self

    def __iadd__(self, other):
        if isinstance(other, LinExpr):
            for v, c in other.terms.items():
                self.terms[v] = self.terms.get(v, 0.0) + c
            self.constant += other.constant
        elif isinstance(other, VariableRef):
            self.terms[other] = self.terms.get(other, 0.0) + 1.0
        else:
            self.constant += float(other)
        return self

    def __isub__(self, other):
        self += LinExpr.of(other) * -1.0
        return self

    def __add__(self, other):
        out = self.copy()
        out += other
        return out

    __radd__ = __add__

    def __sub__(self, other):
        out = self.copy()
        out -= other
        return out

    def __rsub__(self, other):
        return self * -1.0 + other

    def __mul__(self, c):
        if isinstance(c, (LinExpr, VariableRef)):
            raise TypeError("only linear expressions are supported")
        c = float(c)
        return LinExpr({v: a * c for v, a in self.terms.items()}, self.constant * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __truediv__(self, c):
        return self * (1.0 / c)

    def value(self, values) -> float:
        """Evaluate at a value vector indexed by ``VariableRef.index``."""
        return self.constant + sum(c * values[v.index] for v, c in self.terms.items())

    def __repr__(self):
        parts = [f"{c:+g}*{v.name}" for v, c in self.terms.items()]
        return "LinExpr(" + " ".join(parts) + f" {self.constant:+g})"


def quicksum(items: Iterable) -> LinExpr:
    """Sum variables/expressions/numbers into one expression in linear time."""
    out = LinExpr()
    for it in items:
        out += it
    return out


@dataclass
class LinearConstraint:
    """``sum(coef * var) <sense> rhs`` with coefficients already merged."""

    name: tuple
    terms: list[tuple[VariableRef, float]]
    sense: str
    rhs: float

    def activity(self, values) -> float:
        return sum(c * values[v.index] for v, c in self.terms)

    def violation(self, values) -> float:
        """Amount by which ``values`` violate this row (0 when satisfied)."""
        a = self.activity(values)
        if self.sense == "<=":
            return max(0.0, a - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - a)
        return abs(a - self.rhs)


def _as_name(name) -> tuple:
    return name if isinstance(name, tuple) else (name,)


class ModelInstance:
    """A minimization MILP with a name registry.

    The registry iterates in insertion order, so building the same model twice
    yields identical variable and constraint orderings.
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[VariableRef] = []
        self.constraints: list[LinearConstraint] = []
        self._vars: dict[tuple, VariableRef] = {}
        self._cons: dict[tuple, LinearConstraint] = {}
        self.objective = LinExpr()
        self._objective_set = False
        self.flags: set[str] = set()
        self.dropped_coefficients = 0
        self._compiled = None
        self._compiled_key = None

    # -- registry ---------------------------------------------------------
    def add_variable(self, name, domain: str = CONTINUOUS, lo: float = 0.0, hi: float = INF) -> VariableRef:
        name = _as_name(name)
        if name in self._vars:
            raise ModelBuildError("duplicate_name", f"variable {name!r} already registered")
        if domain not in (CONTINUOUS, BINARY):
            raise ModelBuildError("bad_domain", f"unknown domain {domain!r}")
        lo, hi = float(lo), float(hi)
        if domain == BINARY:
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        if lo > hi:
            raise ModelBuildError("bad_bounds", f"{name!r}: lo={lo} > hi={hi}")
        ref = VariableRef(self, len(self.variables), name, domain, lo, hi)
        self.variables.append(ref)
        self._vars[name] = ref
        self._compiled = None
        return ref

    def var(self, *name) -> VariableRef:
        key = name[0] if len(name) == 1 and isinstance(name[0], tuple) else tuple(name)
        return self._vars[key]

    def has_var(self, *name) -> bool:
        key = name[0] if len(name) == 1 and isinstance(name[0], tuple) else tuple(name)
        return key in self._vars

    def constraint(self, *name) -> LinearConstraint:
        key = name[0] if len(name) == 1 and isinstance(name[0], tuple) else tuple(name)
        return self._cons[key]

    def has_constraint(self, *name) -> bool:
        key = name[0] if len(name) == 1 and isinstance(name[0], tuple) else tuple(name)
        return key in self._cons

    def _check_owner(self, expr: LinExpr):
        for v in expr.terms:
            if v._model is not self:
                raise ModelBuildError("foreign_variable", f"{v.name!r} belongs to another model")

    def add_constraint(self, name, lhs, sense: str, rhs=0.0) -> LinearConstraint:
        """Add ``lhs <sense> rhs``; both sides may be expressions."""
        name = _as_name(name)
        if name in self._cons:
            raise ModelBuildError("duplicate_name", f"constraint {name!r} already registered")
        if sense not in SENSES:
            raise ModelBuildError("bad_sense", f"unknown sense {sense!r}")
        expr = LinExpr.of(lhs) - LinExpr.of(rhs)
        self._check_owner(expr)
        terms = []
        for v, c in expr.terms.items():
            if not math.isfinite(c):
                raise ModelBuildError("nonfinite_coefficient", f"{name!r}: {v.name!r} has {c}")
            if abs(c) < COEF_EPS:
                if c != 0.0:
                    self.dropped_coefficients += 1
                continue
            terms.append((v, c))
        con = LinearConstraint(name, terms, sense, -expr.constant)
        self.constraints.append(con)
        self._cons[name] = con
        self._compiled = None
        return con

    def set_objective(self, expr) -> None:
        """Set the (minimization) objective. Replacing one sets ``objective_replaced``."""
        expr = LinExpr.of(expr).copy()
        self._check_owner(expr)
        if self._objective_set:
            self.flags.add("objective_replaced")
        self.objective = expr
        self._objective_set = True

    def fix(self, ref: VariableRef, value: float) -> None:
        ref.lo = ref.hi = float(value)
        self._compiled = None

    def set_bounds(self, ref: VariableRef, lo: float, hi: float) -> None:
        ref.lo, ref.hi = float(lo), float(hi)
        self._compiled = None

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def num_binaries(self) -> int:
        return sum(1 for v in self.variables if v.domain == BINARY)

    def is_empty(self) -> bool:
        return not self.variables

    # -- compilation ------------------------------------------------------
    def compile(self):
        """Return ``(c, c0, A, row_lo, row_hi, col_lo, col_hi, is_int)``.

        The constraint block is cached until the model is modified; the
        objective is always rebuilt since PH rewrites it every iteration.
        """
        n = len(self.variables)
        key = (n, len(self.constraints))
        if self._compiled is None or self._compiled_key != key:
            rows, cols, vals = [], [], []
            row_lo = np.empty(len(self.constraints))
            row_hi = np.empty(len(self.constraints))
            for i, con in enumerate(self.constraints):
                for v, c in con.terms:
                    rows.append(i)
                    cols.append(v.index)
                    vals.append(c)
                row_lo[i] = con.rhs if con.sense in (">=", "==") else -INF
                row_hi[i] = con.rhs if con.sense in ("<=", "==") else INF
            A = sp.csr_matrix((vals, (rows, cols)), shape=(len(self.constraints), n))
            A.sum_duplicates()
            self._compiled = (A, row_lo, row_hi)
            self._compiled_key = key
        A, row_lo, row_hi = self._compiled
        col_lo = np.fromiter((v.lo for v in self.variables), float, n)
        col_hi = np.fromiter((v.hi for v in self.variables), float, n)
        is_int = np.fromiter((v.domain == BINARY for v in self.variables), bool, n)
        c = np.zeros(n)
        for v, a in self.objective.terms.items():
            c[v.index] += a
        return c, self.objective.constant, A, row_lo, row_hi, col_lo, col_hi, is_int

    def check_feasibility(self, values, tol: float = 1e-6) -> list[tuple]:
        """Names of rows/bounds violated by more than ``tol``."""
        bad = []
        for v in self.variables:
            x = values[v.index]
            if x < v.lo - tol or x > v.hi + tol:
                bad.append(v.name)
            elif v.domain == BINARY and min(abs(x), abs(x - 1.0)) > tol:
                bad.append(v.name)
        for con in self.constraints:
            if con.violation(values) > tol:
                bad.append(con.name)
        return bad


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------


@dataclass
class SolveOptions:
    """Backend options.

    ``CEP_MIP_GAP`` and ``CEP_TIME_LIMIT`` in the environment override
    ``mip_gap`` and ``time_limit`` when :meth:`resolved` is called.
    """

    mip_gap: float = 1e-4
    time_limit: float | None = None
    threads: int = 1
    seed: int = 0
    backend: str = "highs"
    mip_abs_gap: float = 1e-6

    def resolved(self) -> "SolveOptions":
        out = copy.copy(self)
        if os.environ.get("CEP_MIP_GAP"):
            out.mip_gap = float(os.environ["CEP_MIP_GAP"])
        if os.environ.get("CEP_TIME_LIMIT"):
            out.time_limit = float(os.environ["CEP_TIME_LIMIT"])
        return out


@dataclass
class SolveResult:
    """Outcome of one backend solve.

    ``values`` is indexed by :attr:`VariableRef.index`; use :meth:`value` or
    ``result[ref]`` for lookups.
    """

    status: str
    objective: float = math.nan
    best_bound: float = math.nan
    values: np.ndarray = field(default_factory=lambda: np.empty(0))
    wall_time: float = 0.0
    message: str = ""

    @property
    def ok(self) -> bool:
        """True when a primal solution is available."""
        return self.status in ("optimal", "gap_limit") or (
            self.status == "time_limit" and self.values.size > 0 and math.isfinite(self.objective)
        )

    @property
    def gap(self) -> float:
        if not (math.isfinite(self.objective) and math.isfinite(self.best_bound)):
            return math.inf
        return max(0.0, self.objective - self.best_bound) / max(abs(self.objective), 1.0)

    def value(self, ref) -> float:
        if isinstance(ref, LinExpr):
            return ref.value(self.values)
        return float(self.values[ref.index])

    __getitem__ = value

    def as_dict(self, model: ModelInstance) -> dict[tuple, float]:
        return {v.name: float(self.values[v.index]) for v in model.variables}


def solve(model: ModelInstance, options: SolveOptions | None = None, start=None) -> SolveResult:
    """Solve ``model`` and never raise on backend failure (status ``error``).

    ``start`` is an optional full value vector handed to the backend as a
    MIP start (ignored by backends without warm-start support).
    """
    options = (options or SolveOptions()).resolved()
    if model.is_empty():
        return SolveResult("error", message="empty model")
    t0 = time.perf_counter()
    try:
        if options.backend == "highs":
            res = _solve_highs(model, options, start)
        elif options.backend == "scipy":
            res = _solve_scipy(model, options)
        else:
            res = SolveResult("error", message=f"unknown backend {options.backend!r}")
    except Exception as exc:  # backend crashes become data
        logger.exception("backend failure")
        res = SolveResult("error", message=f"{type(exc).__name__}: {exc}")
    res.wall_time = time.perf_counter() - t0
    return res


def _classify_optimal(objective, bound, options, has_int) -> str:
    if not has_int:
        return "optimal"
    gap = max(0.0, objective - bound) / max(abs(objective), 1.0)
    return "optimal" if gap <= 1e-9 or objective - bound <= 1e-9 else "gap_limit"


def _solve_highs(model: ModelInstance, options: SolveOptions, start=None) -> SolveResult:
    import highspy

    c, c0, A, row_lo, row_hi, col_lo, col_hi, is_int = model.compile()
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", int(options.threads))
    h.setOptionValue("random_seed", int(options.seed))
    h.setOptionValue("mip_rel_gap", float(options.mip_gap))
    h.setOptionValue("mip_abs_gap", float(options.mip_abs_gap))
    if options.time_limit is not None:
        h.setOptionValue("time_limit", float(options.time_limit))
    hinf = highspy.kHighsInf
    lp = highspy.HighsLp()
    lp.num_col_ = len(c)
    lp.num_row_ = A.shape[0]
    lp.col_cost_ = c
    lp.offset_ = float(c0)
    lp.col_lower_ = np.where(np.isinf(col_lo), -hinf, col_lo)
    lp.col_upper_ = np.where(np.isinf(col_hi), hinf, col_hi)
    lp.row_lower_ = np.where(np.isinf(row_lo), -hinf, row_lo)
    lp.row_upper_ = np.where(np.isinf(row_hi), hinf, row_hi)
    lp.a_matrix_.format_ = highspy.MatrixFormat.kRowwise
    lp.a_matrix_.start_ = A.indptr.astype(np.int32)
    lp.a_matrix_.index_ = A.indices.astype(np.int32)
    lp.a_matrix_.value_ = A.data.astype(float)
    has_int = bool(is_int.any())
    if has_int:
        lp.integrality_ = [
            highspy.HighsVarType.kInteger if b else highspy.HighsVarType.kContinuous for b in is_int
        ]
    h.passModel(lp)
    if start is not None and has_int and len(start) == len(c):
        sol = highspy.HighsSolution()
        sol.col_value = [float(v) for v in start]
        sol.value_valid = True
        h.setSolution(sol)
    h.run()
    st = h.getModelStatus()
    info = h.getInfo()
    S = highspy.HighsModelStatus
    have_primal = info.primal_solution_status == 2
    values = np.asarray(h.getSolution().col_value, float) if have_primal else np.empty(0)
    obj = float(info.objective_function_value) if have_primal else math.nan
    bound = float(info.mip_dual_bound) if has_int else obj
    if st == S.kOptimal:
        if has_int and not math.isfinite(bound):
            bound = obj
        return SolveResult(_classify_optimal(obj, bound, options, has_int), obj, bound, values)
    if st in (S.kTimeLimit, S.kIterationLimit, S.kSolutionLimit, S.kInterrupt):
        return SolveResult("time_limit", obj, bound, values, message=h.modelStatusToString(st))
    if st == S.kInfeasible:
        return SolveResult("infeasible", message="infeasible")
    if st in (S.kUnbounded, S.kUnboundedOrInfeasible):
        return SolveResult("unbounded", message=h.modelStatusToString(st))
    return SolveResult("error", message=h.modelStatusToString(st))


def _solve_scipy(model: ModelInstance, options: SolveOptions) -> SolveResult:
    from scipy.optimize import Bounds, LinearConstraint as SpLinearConstraint, milp

    c, c0, A, row_lo, row_hi, col_lo, col_hi, is_int = model.compile()
    opts = {"mip_rel_gap": float(options.mip_gap), "disp": False}
    if options.time_limit is not None:
        opts["time_limit"] = float(options.time_limit)
    cons = [SpLinearConstraint(A, row_lo, row_hi)] if A.shape[0] else []
    res = milp(c, integrality=is_int.astype(int), bounds=Bounds(col_lo, col_hi),
               constraints=cons, options=opts)
    has_int = bool(is_int.any())
    if res.x is not None:
        obj = float(res.fun) + c0
        bound = float(getattr(res, "mip_dual_bound", np.nan)) + c0 if has_int else obj
        if not math.isfinite(bound):
            bound = obj
        if res.status == 0:
            return SolveResult(_classify_optimal(obj, bound, options, has_int), obj, bound, np.asarray(res.x))
        return SolveResult("time_limit", obj, bound, np.asarray(res.x), message=res.message)
    if res.status == 2:
        return SolveResult("infeasible", message=res.message)
    if res.status == 3:
        return SolveResult("unbounded", message=res.message)
    if res.status == 1:
        return SolveResult("time_limit", message=res.message)
    return SolveResult("error", message=res.message)


def relax_integrality(model: ModelInstance) -> ModelInstance:
    """Copy of ``model`` with binaries turned into continuous ``[0, 1]``."""
    out = copy.deepcopy(model)
    for v in out.variables:
        if v.domain == BINARY:
            v.domain = CONTINUOUS
    out._compiled = None
    return out


# ---------------------------------------------------------------------------
# LP-file interchange
# ---------------------------------------------------------------------------

_BAD_CHARS = re.compile(r"[^A-Za-z0-9_.]")


def _lp_names(items) -> list[str]:
    seen: set[str] = set()
    out = []
    for obj in items:
        base = _BAD_CHARS.sub("_", "_".join(str(k) for k in obj.name))
        if not base or base[0].isdigit() or base[0] in ".":
            base = "n_" + base
        s, k = base, 1
        while s in seen:
            s = f"{base}__{k}"
            k += 1
        seen.add(s)
        out.append(s)
    return out


def _fmt(x: float) -> str:
    return repr(float(x))


def _terms_text(terms, names) -> str:
    parts = []
    for v, c in terms:
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(c))} {names[v.index]}")
    if not parts:
        return "0 " + names[0] if names else "0"
    lines, line = [], []
    for p in parts:
        line.append(p)
        if len(line) == 8:
            lines.append(" ".join(line))
            line = []
    if line:
        lines.append(" ".join(line))
    return "\n   ".join(lines)


def write_lp(model: ModelInstance, fh=None) -> str:
    """Render ``model`` in LP-file text format; also writes to ``fh`` if given."""
    vn = _lp_names(model.variables)
    cn = _lp_names(model.constraints)
    out = io.StringIO()
    out.write(f"\\ model {model.name}\nMinimize\n obj: ")
    obj_terms = [(v, c) for v, c in model.objective.terms.items() if c != 0.0]
    out.write(_terms_text(obj_terms, vn) if obj_terms else "0 " + vn[0])
    if model.objective.constant:
        c0 = model.objective.constant
        out.write(f" {'-' if c0 < 0 else '+'} {_fmt(abs(c0))}")
    out.write("\nSubject To\n")
    for name, con in zip(cn, model.constraints):
        sense = "=" if con.sense == "==" else con.sense
        out.write(f" {name}: {_terms_text(con.terms, vn)} {sense} {_fmt(con.rhs)}\n")
    out.write("Bounds\n")
    for name, v in zip(vn, model.variables):
        if v.domain == BINARY and v.lo == 0.0 and v.hi == 1.0:
            continue
        lo = "-inf" if v.lo == -INF else _fmt(v.lo)
        hi = "+inf" if v.hi == INF else _fmt(v.hi)
        if v.lo == -INF and v.hi == INF:
            out.write(f" {name} free\n")
        else:
            out.write(f" {lo} <= {name} <= {hi}\n")
    bins = [name for name, v in zip(vn, model.variables) if v.domain == BINARY]
    if bins:
        out.write("Binaries\n")
        for name in bins:
            out.write(f" {name}\n")
    out.write("End\n")
    text = out.getvalue()
    if fh is not None:
        if isinstance(fh, (str, os.PathLike)):
            with open(fh, "w") as f:
                f.write(text)
        else:
            fh.write(text)
    return text


def _parse_linear(text: str):
    """Parse ``+ 2 x - 3.5 y + 4`` into ``([(name, coef)], constant)``."""
    tokens = text.replace("\n", " ").split()
    terms, const = [], 0.0
    sign, coef = 1.0, None
    for tok in tokens:
        if tok in ("+", "-"):
            sign = 1.0 if tok == "+" else -1.0
            continue
        try:
            num = float(tok)
        except ValueError:
            terms.append((tok, sign * (coef if coef is not None else 1.0)))
            sign, coef = 1.0, None
            continue
        if coef is not None:
            const += sign * coef
            sign = 1.0
        coef = num
    if coef is not None:
        const += sign * coef
    return terms, const


def read_lp(text: str) -> ModelInstance:
    """Parse LP text produced by :func:`write_lp` back into a model.

    Structured names are not recoverable; each variable gets a one-element
    name tuple holding its LP identifier.
    """
    m = ModelInstance("imported")
    section = None
    obj_text = []
    rows: list[tuple[str, str]] = []
    bounds: dict[str, tuple[float, float]] = {}
    binaries: list[str] = []
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "binaries", "end"):
            section = low
            continue
        if section == "minimize":
            obj_text.append(line.split(":", 1)[1] if ":" in line else line)
        elif section == "subject to":
            if ":" in line and re.match(r"^[A-Za-z_][A-Za-z0-9_.]*:", line):
                name, body = line.split(":", 1)
                rows.append((name.strip(), body))
            else:
                rows[-1] = (rows[-1][0], rows[-1][1] + " " + line)
        elif section == "bounds":
            parts = line.split()
            if len(parts) == 2 and parts[1] == "free":
                bounds[parts[0]] = (-INF, INF)
            else:
                lo, _, name, _, hi = parts
                bounds[name] = (float(lo), float(hi))
        elif section == "binaries":
            binaries.extend(line.split())
    # variables appear in first-use order of objective and rows
    order: dict[str, None] = {}
    obj_terms, obj_const = _parse_linear(" ".join(obj_text))
    parsed_rows = []
    for name, body in rows:
        m_sense = re.search(r"(<=|>=|=)", body)
        lhs, rhs = body[: m_sense.start()], body[m_sense.end():]
        terms, const = _parse_linear(lhs)
        parsed_rows.append((name, terms, m_sense.group(1), float(rhs) - const))
    for nm, _ in obj_terms:
        order.setdefault(nm)
    for _, terms, _, _ in parsed_rows:
        for nm, _ in terms:
            order.setdefault(nm)
    for nm in list(bounds) + binaries:
        order.setdefault(nm)
    binset = set(binaries)
    refs = {}
    for nm in order:
        lo, hi = bounds.get(nm, (0.0, 1.0) if nm in binset else (0.0, INF))
        refs[nm] = m.add_variable((nm,), BINARY if nm in binset else CONTINUOUS, lo, hi)
    m.set_objective(quicksum(c * refs[n] for n, c in obj_terms) + obj_const)
    for name, terms, sense, rhs in parsed_rows:
        m.add_constraint((name,), quicksum(c * refs[n] for n, c in terms), "==" if sense == "=" else sense, rhs)
    return m
