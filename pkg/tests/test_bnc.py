import json

import numpy as np
import pytest
from scipy.optimize import Bounds, LinearConstraint, milp

from alphapc.bnc import (APC1_SETTINGS, APC2_SETTINGS, CSV_HEADER, BncConfig, Engine, NodeState,
                         SolveReport, check_integer_candidate, default_time_limit, separate_round,
                         separate_assigned_to_later, solve)
from alphapc.formulations import apc1_fix_by_ub, apc2_fixings, apply_fixings, build_apc1, build_apc2
from alphapc.heuristics import greedy_start
from alphapc.instance import parse_tsplib, validate_solution
from alphapc.oracle import brute_force_solve, closest_assignment

from conftest import DATA, seeded_instance

ALL = APC1_SETTINGS + APC2_SETTINGS


def test_example1_1hsvl(ex1):
    rep = solve(ex1, BncConfig(setting="1HSVL"))
    assert rep.status == "Optimal" and rep.UB == rep.LB == 4
    assert validate_solution(ex1, rep.incumbent) == []


@pytest.mark.parametrize("setting", ALL)
def test_every_setting_on_examples(setting, ex1, ex2, ex3):
    for inst, opt in ((ex1, 4), (ex2, 1), (ex3, 2)):
        rep = solve(inst, BncConfig(setting=setting))
        assert rep.status == "Optimal" and rep.UB == opt and rep.LB == opt


@pytest.mark.parametrize("seed", range(12))
def test_settings_agree_with_oracle(seed):
    inst = seeded_instance(seed, 5, 8)
    opt = brute_force_solve(inst).objective
    for s in ALL:
        rep = solve(inst, BncConfig(setting=s))
        assert rep.UB == opt and rep.status == "Optimal", s


@pytest.mark.parametrize("setting", ["1HSVLO", "2HVSL", "1", "2"])
def test_native_lp_backend_route(setting):
    for seed in range(3):
        inst = seeded_instance(seed, 5, 6)
        rep = solve(inst, BncConfig(setting=setting, backend="native"))
        assert rep.UB == brute_force_solve(inst).objective


def test_unknown_setting():
    with pytest.raises(ValueError):
        BncConfig(setting="3H")


def test_config_flags():
    cfg = BncConfig(setting="1HSVLO")
    assert cfg.formulation == "APC1" and all(cfg.has(f) for f in "HSVLO")
    cfg = BncConfig(setting="2HV")
    assert cfg.formulation == "APC2" and cfg.has("V") and not cfg.has("S")
    d = BncConfig()
    assert (d.start_heur, d.max_ineqs_root, d.max_ineqs_tree, d.max_sep_root, d.max_sep_tree,
            d.num_init_apc1, d.num_init_apc2) == (10, 50, 20, 100, 1, 10, 100)


def test_time_limit_env(monkeypatch):
    monkeypatch.setenv("ALPHAPC_TIME_LIMIT", "12.5")
    assert default_time_limit() == 12.5 and BncConfig().time_limit == 12.5
    monkeypatch.delenv("ALPHAPC_TIME_LIMIT")
    assert default_time_limit() == 1800


# ---------------------------------------------------------------- separation
def test_root_of_example3_finds_family10(ex3):
    eng = Engine(ex3, BncConfig(setting="1HSV"))
    sol = eng._solve_lp(NodeState({}, (), eng.global_lb, 0))
    cuts = separate_round(eng, sol.primal, root=True)
    assert any(c.family == "10" for c in cuts)
    m = eng.m
    X = np.array([[0, 6, 3], [6, 0, 2], [3, 2, 0]]) / 11
    v = m.pack([13 / 22, 14 / 22, 17 / 22], X, 6 / 11)
    published = {c.key: c for c in separate_round(eng, v, root=True)}
    assert published[("10", 0, 1)].violation == pytest.approx(3 / 22)


def test_integral_point_gives_no_user_cuts(ex1):
    eng = Engine(ex1, BncConfig(setting="1HSVLO"))
    eng.offer(brute_force_solve(ex1))
    m = eng.m
    y = np.array([0, 1, 1, 1.0])
    v = m.pack(y, closest_assignment(ex1, (1, 2, 3)), 4.0)
    assert check_integer_candidate(eng, v) == []
    assert separate_round(eng, v, root=False, lb=4.0) == []


def test_budget_one_returns_most_violated():
    for seed in range(6):
        inst = seeded_instance(seed, 6, 8)
        eng = Engine(inst, BncConfig(setting="2HVS", max_ineqs_tree=1))
        v = np.zeros(eng.m.num_vars)
        v[:inst.n] = np.linspace(0.0, inst.p / inst.n, inst.n)  # u = 0: many rows fail
        big = Engine(inst, BncConfig(setting="2HVS", max_ineqs_tree=10**6))
        everything = separate_round(big, v, root=False)
        one = separate_round(eng, v, root=False)
        assert len(one) == 1 and one[0].key == everything[0].key
        vals = eng.vals
        scores = [c.violation * vals[c.key[2]] for c in everything]
        assert scores[0] == pytest.approx(max(scores))


def test_budget_one_apc1_takes_first_family(ex1):
    eng = Engine(ex1, BncConfig(setting="1HSV", max_ineqs_tree=1))
    X = np.zeros((4, 4))
    X[0, 1], X[0, 2], X[0, 3] = 1.0, 0.5, 0.5
    v = eng.m.pack(np.array([0, 1, 1, 1.0]), X, 2.0)
    one = separate_round(eng, v, root=False)
    assert len(one) == 1 and one[0].family == "9"


def test_assigned_to_later_example1(ex1):
    eng = Engine(ex1, BncConfig(setting="1HSVLO"))
    X = np.zeros((4, 4))
    X[0, 1], X[0, 2], X[0, 3] = 1.0, 0.5, 0.5
    v = eng.m.pack(np.array([0, 1, 1, 1.0]), X, 3.0)
    c = separate_assigned_to_later(eng, v, 0)
    assert c.violation == pytest.approx(0.5) and c.key == ("13a", 0, (1, 2), (3,))
    good = eng.m.pack(np.array([0, 1, 1, 1.0]), closest_assignment(ex1, (1, 2, 3)), 4.0)
    assert all(separate_assigned_to_later(eng.m, good, i) is None for i in range(4))


def test_assigned_to_later_runs_out(ex1):
    # alpha = 3 with three other points: no candidates survive once X is nonempty
    inst = ex1.with_params(p=3, alpha=3)
    m = build_apc1(inst)
    v = m.pack(np.array([0, 1, 1, 1.0]), closest_assignment(inst, (1, 2, 3)), 42.0)
    assert separate_assigned_to_later(m, v, 0) is None


def test_lazy_checks(ex1):
    e1 = Engine(ex1, BncConfig(setting="1HS", num_init_apc1=1))
    v = e1.m.pack(np.array([0, 1, 1, 1.0]), closest_assignment(ex1, (1, 2, 3)), 2.0)
    assert {c.family for c in check_integer_candidate(e1, v)} == {"2e"}
    # alpha = 1, P = {3, 4}: point 2 sits at 42 while every u is zero
    inst = ex1.with_params(p=2, alpha=1)
    e2 = Engine(inst, BncConfig(setting="2HVS", num_init_apc2=0))
    v = np.zeros(e2.m.num_vars)
    v[[2, 3]] = 1.0
    cuts = check_integer_candidate(e2, v)
    assert cuts and {c.family for c in cuts} == {"6d"}
    assert ("6d", 1, 2) in {c.key for c in cuts}


# ---------------------------------------------------------------- tree invariants
class Recorder(Engine):
    def __init__(self, *a, **k):
        super().__init__(*a, **k)
        self.trace, self.ubs, self.glbs = [], [], []

    def process(self, node):
        before = node.lb
        out = super().process(node)
        self.trace.append((before, node.lb))
        self.glbs.append(self.global_lb)
        if out:
            assert all(ch.lb >= node.lb for ch in out)
        return out

    def offer(self, sol):
        ok = super().offer(sol)
        if ok:
            self.ubs.append(sol.objective)
            assert validate_solution(self.inst, sol) == []
        return ok


@pytest.mark.parametrize("setting", ["1HSVL", "2HVSL", "1H", "2H"])
def test_tree_invariants(setting):
    for seed in range(8):
        inst = seeded_instance(seed, 7, 10)
        eng = Recorder(inst, BncConfig(setting=setting))
        rep = eng.run()
        assert all(after >= before - 1e-9 for before, after in eng.trace)
        assert all(b >= a - 1e-12 for a, b in zip(eng.glbs, eng.glbs[1:]))
        assert eng.ubs == sorted(eng.ubs, reverse=True)
        assert rep.LB <= rep.UB + 1e-6
        assert rep.UB - rep.LB <= 1e-6 * max(1.0, abs(rep.UB))


def _milp(lp, ints):
    A = lp.dense()
    lo = np.array([r.bounds()[0] for r in lp.rows])
    hi = np.array([r.bounds()[1] for r in lp.rows])
    integ = np.zeros(lp.num_vars)
    integ[ints] = 1
    res = milp(lp.objective, constraints=LinearConstraint(A, lo, hi), integrality=integ,
               bounds=Bounds(lp.lower, lp.upper))
    return res.fun + lp.offset


@pytest.mark.parametrize("seed", range(10))
def test_fixings_keep_the_optimum(seed):
    inst = seeded_instance(seed, 5, 8)
    opt = brute_force_solve(inst).objective
    UB = greedy_start(inst, seed, 3).objective
    m1 = build_apc1(inst)
    lp1 = apply_fixings(m1.relaxation(), apc1_fix_by_ub(m1, UB))
    assert _milp(lp1, m1.integer_vars()) == pytest.approx(opt)
    m2 = build_apc2(inst)
    lp2 = apply_fixings(m2.relaxation(), apc2_fixings(m2, float(m2.ladder.values[0]), UB))
    assert _milp(lp2, m2.integer_vars()) == pytest.approx(opt)


def test_deterministic():
    inst = seeded_instance(5, 9, 9)
    a = solve(inst, BncConfig(setting="2HVSL", seed=3)).to_dict(inst)
    b = solve(inst, BncConfig(setting="2HVSL", seed=3)).to_dict(inst)
    a.pop("seconds"), b.pop("seconds")
    assert a == b


# ---------------------------------------------------------------- reporting
def test_time_limit_report():
    inst = parse_tsplib((DATA / "tsplib" / "att48.tsp").read_text(), 30, 2)
    rep = solve(inst, BncConfig(setting="2HVSL", time_limit=0.3))
    assert rep.status == "TimeLimit" and rep.time_limit_hit
    assert rep.LB <= rep.UB and np.isfinite(rep.UB)
    row = rep.csv_row(inst)
    assert row[6] == "TL" and row[:4] == ["att48", 48, 30, 2]


def test_report_serialization(ex1):
    rep = solve(ex1, BncConfig(setting="2HVSL", seed=7))
    d = json.loads(rep.to_json(ex1))
    assert d["open"] == [2, 3, 4] and d["seed"] == 7 and d["status"] == "Optimal"
    assert rep.csv_row(ex1)[:6] == ["ex1", 4, 3, 2, "4", "4"]
    assert CSV_HEADER == ["name", "|N|", "p", "alpha", "UB", "LB", "t", "nBC"]
    r = SolveReport("Optimal", 1592.1196, 1592.1196, None, 1, {}, 0.5, 0)
    assert r.csv_row(ex1)[4] == "1592.12"
