import itertools
import math

import numpy as np
import pytest

from islandcep.errors import ModelBuildError
from islandcep.milp import (
    BINARY,
    ModelInstance,
    SolveOptions,
    quicksum,
    read_lp,
    relax_integrality,
    solve,
    write_lp,
)

BACKENDS = ["highs", "scipy"]


def test_binary_variable_bounds():
    m = ModelInstance()
    u = m.add_variable(("u", "g1", 3, "w0"), BINARY)
    assert (u.lo, u.hi) == (0.0, 1.0)
    assert m.var("u", "g1", 3, "w0") is u


def test_duplicate_terms_are_merged():
    m = ModelInstance()
    x = m.add_variable("x")
    con = m.add_constraint("c", 2 * x + 3 * x, "<=", 10)
    assert len(con.terms) == 1
    assert con.terms[0][1] == 5.0


def test_duplicate_name_rejected():
    m = ModelInstance()
    m.add_variable("x")
    with pytest.raises(ModelBuildError) as err:
        m.add_variable("x")
    assert err.value.code == "duplicate_name"


def test_foreign_variable_rejected():
    a, b = ModelInstance(), ModelInstance()
    x = a.add_variable("x")
    b.add_variable("y")
    with pytest.raises(ModelBuildError) as err:
        b.add_constraint("c", x, ">=", 1)
    assert err.value.code == "foreign_variable"


def test_set_objective_twice_flags_replacement():
    m = ModelInstance()
    x = m.add_variable("x", hi=5)
    m.set_objective(x)
    assert "objective_replaced" not in m.flags
    m.set_objective(-x)
    assert "objective_replaced" in m.flags
    res = solve(m)
    assert res.objective == pytest.approx(-5.0)


def test_tiny_coefficients_dropped():
    m = ModelInstance()
    x, y = m.add_variable("x"), m.add_variable("y")
    con = m.add_constraint("c", x + 1e-14 * y, ">=", 1)
    assert [v.name for v, _ in con.terms] == [("x",)]
    assert m.dropped_coefficients == 1


@pytest.mark.parametrize("backend", BACKENDS)
def test_continuous_lower_bound(backend):
    m = ModelInstance()
    x = m.add_variable("x", lo=-10)
    m.add_constraint("c", x, ">=", 3)
    m.set_objective(x)
    res = solve(m, SolveOptions(backend=backend))
    assert res.status == "optimal"
    assert res.objective == pytest.approx(3.0)
    assert res[x] == pytest.approx(3.0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_infeasible(backend):
    m = ModelInstance()
    x = m.add_variable("x", lo=-10)
    m.add_constraint("a", x, "<=", 0)
    m.add_constraint("b", x, ">=", 1)
    m.set_objective(x)
    assert solve(m, SolveOptions(backend=backend)).status == "infeasible"


def test_empty_model_is_error_not_exception():
    assert solve(ModelInstance()).status == "error"


def _knapsack(values, weights, cap):
    m = ModelInstance()
    xs = [m.add_variable(("x", i), BINARY) for i in range(len(values))]
    m.add_constraint("cap", quicksum(w * x for w, x in zip(weights, xs)), "<=", cap)
    m.set_objective(quicksum(-v * x for v, x in zip(values, xs)))
    return m


@pytest.mark.parametrize("backend", BACKENDS)
def test_knapsack_matches_enumeration(backend):
    values, weights, cap = [6.0, 10.0, 12.0], [1.0, 2.0, 3.0], 5.0
    best = min(
        -sum(v for v, b in zip(values, bits) if b)
        for bits in itertools.product([0, 1], repeat=3)
        if sum(w for w, b in zip(weights, bits) if b) <= cap
    )
    res = solve(_knapsack(values, weights, cap), SolveOptions(backend=backend, mip_gap=0.0))
    assert res.objective == pytest.approx(best)
    assert best == -22.0


def test_relax_integrality_copies():
    m = _knapsack([1, 2, 3, 4, 5], [1, 1, 1, 1, 1], 2.5)
    r = relax_integrality(m)
    assert m.num_binaries == 5
    assert r.num_binaries == 0
    assert all(v.lo == 0.0 and v.hi == 1.0 for v in r.variables)
    assert relax_integrality(ModelInstance()).num_variables == 0


def test_relaxation_bounds_milp():
    rng = np.random.default_rng(7)
    for _ in range(5):
        vals = rng.uniform(1, 10, 6)
        wts = rng.uniform(1, 5, 6)
        m = _knapsack(vals, wts, wts.sum() / 2.3)
        full = solve(m, SolveOptions(mip_gap=0.0))
        lp = solve(relax_integrality(m))
        assert lp.objective <= full.objective + 1e-9


def test_lp_round_trip():
    m = ModelInstance("rt")
    x = m.add_variable(("x", "a", 1), lo=-2.5, hi=7)
    y = m.add_variable(("y", 0), BINARY)
    z = m.add_variable(("z",), lo=-math.inf, hi=math.inf)
    m.add_constraint(("c", 1), x + 2 * y - z, "<=", 4.25)
    m.add_constraint(("c", 2), x - y, ">=", -1)
    m.add_constraint(("c", 3), z + x, "==", 1.5)
    m.set_objective(3 * x - 4 * y + 0.5 * z + 12.0)
    text = write_lp(m)
    back = read_lp(text)
    r1, r2 = solve(m, SolveOptions(mip_gap=0.0)), solve(back, SolveOptions(mip_gap=0.0))
    assert r1.status == r2.status == "optimal"
    assert r2.objective == pytest.approx(r1.objective, abs=1e-9)
    assert back.num_binaries == 1
    assert "Binaries" in text and "Subject To" in text


def test_lp_export_readable_by_highs(tmp_path):
    import highspy

    m = _knapsack([6.0, 10.0, 12.0], [1.0, 2.0, 3.0], 5.0)
    path = tmp_path / "k.lp"
    write_lp(m, path)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.readModel(str(path))
    h.run()
    assert h.getInfo().objective_function_value == pytest.approx(-22.0)


def test_env_overrides(monkeypatch):
    monkeypatch.setenv("CEP_MIP_GAP", "0.05")
    monkeypatch.setenv("CEP_TIME_LIMIT", "12")
    opts = SolveOptions().resolved()
    assert opts.mip_gap == 0.05 and opts.time_limit == 12.0


def test_build_is_deterministic():
    def build():
        m = ModelInstance()
        xs = [m.add_variable(("x", i)) for i in range(5)]
        for i in range(4):
            m.add_constraint(("c", i), xs[i] - xs[i + 1], "<=", i)
        return [v.name for v in m.variables], [c.name for c in m.constraints]

    assert build() == build()
