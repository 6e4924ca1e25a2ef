import csv
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_objective, grid_search_behavior, naive_polynomial, random_affine_rows
from emotrack import data_path
from emotrack.engine import (
    FEATURES,
    AmalgamationEquationSet,
    EquationError,
    EventFeatures,
    ImpressionEquationSet,
    NonlinearBehaviorError,
    PolyTerm,
    SingularSystemError,
    amalgamate,
    apply_event,
    behavior_affine_form,
    deflection_agent,
    deflection_total,
    event_deflection,
    load_amalgamation,
    load_equations,
    recommend_modifier,
    save_equations,
    solve_optimal_behavior,
)
from emotrack.lexicon import EpaVector, LexiconEntry

_epa = st.floats(-4.3, 4.3, allow_nan=False)
_vec = st.builds(EpaVector, _epa, _epa, _epa)


def _nine(rng):
    return EventFeatures(rng.uniform(-4.3, 4.3, 9))


def _csv_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for row in reader:
            if not row or row[0].startswith("#"):
                continue
            factors = [] if row[0] == "1" else [row[0][i:i + 2] for i in range(0, len(row[0]), 2)]
            rows.append((factors, {h: float(v) for h, v in zip(header[1:], row[1:]) if float(v)}))
    return rows


def _csv_mapping():
    with open(data_path("impression_equations.csv"), newline="", encoding="utf-8") as fh:
        return {row.pop("term"): {k: float(v) for k, v in row.items()}
                for row in csv.DictReader(fh) if not row["term"].startswith("#")}


class TestPolyTerm:
    def test_parse(self):
        assert PolyTerm.parse("1").degree == 0
        t = PolyTerm.parse("AeBeOe")
        assert t.degree == 3 and t.behavior_degree == 1 and str(t) == "AeBeOe"
        assert PolyTerm.parse("BeAe") == PolyTerm.parse("AeBe")

    def test_bad_terms(self):
        for bad in ("Xe", "Ae Be", "", "Aq"):
            with pytest.raises(ValueError):
                PolyTerm.parse(bad)


class TestApplyEvent:
    def test_constants_only(self):
        eqs = ImpressionEquationSet.from_mapping({"1": {f: float(i) for i, f in enumerate(FEATURES)}})
        out = apply_event(eqs, _nine(np.random.default_rng(0)))
        assert out.values.tolist() == list(range(9))

    def test_identity_set(self):
        pre = _nine(np.random.default_rng(1))
        assert apply_event(ImpressionEquationSet.identity(), pre) == pre

    def test_reference_actor_activity(self, lexicon, equations):
        pre = EventFeatures.from_abo(lexicon.lookup("nurse", "identity").epa,
                                     lexicon.lookup("shout_at", "behavior").epa,
                                     lexicon.lookup("patient", "identity").epa)
        assert apply_event(equations, pre)["Aa"] == pytest.approx(-0.65, abs=0.05)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_naive_polynomial(self, equations, seed):
        rows = _csv_rows(data_path("impression_equations.csv"))
        pre = _nine(np.random.default_rng(seed))
        expected = naive_polynomial(rows, dict(zip(FEATURES, pre.values)))
        got = apply_event(equations, pre)
        for f in FEATURES:
            assert got[f] == pytest.approx(expected.get(f, 0.0), abs=1e-12)

    def test_additive_over_rows(self, equations):
        pre = _nine(np.random.default_rng(3))
        half = len(equations) // 2
        first = ImpressionEquationSet(equations.terms[:half], equations.coefficients[:half])
        second = ImpressionEquationSet(equations.terms[half:], equations.coefficients[half:])
        total = apply_event(first, pre).values + apply_event(second, pre).values
        assert np.allclose(apply_event(equations, pre).values, total, atol=1e-12)

    def test_duplicate_term_rejected(self):
        with pytest.raises(EquationError, match="duplicate"):
            ImpressionEquationSet([PolyTerm.parse("Ae"), PolyTerm.parse("Ae")], np.zeros((2, 9)))

    def test_round_trip(self, tmp_path, equations):
        path = tmp_path / "eq.csv"
        save_equations(equations, path)
        assert load_equations(path) == equations

    def test_bad_header(self, tmp_path):
        path = tmp_path / "eq.csv"
        path.write_text("term,Ae\n1,0\n")
        with pytest.raises(EquationError, match="header"):
            load_equations(path)


class TestAmalgamation:
    def test_reference_values(self, amalgamation):
        zero = EpaVector(0, 0, 0)
        assert amalgamate(amalgamation, zero, zero).e == pytest.approx(-0.17)
        assert amalgamate(amalgamation, EpaVector(1, 0, 0), EpaVector(1, 0, 0)).e == pytest.approx(0.95)

    def test_no_op(self):
        noop = AmalgamationEquationSet()
        ident = EpaVector(1.2, -0.4, 3.0)
        assert amalgamate(noop, EpaVector(2, 2, 2), ident) == ident

    @settings(max_examples=50, deadline=None)
    @given(_vec, _vec, st.floats(0.01, 3))
    def test_monotone_in_modifier_evaluation(self, amalgamation, modifier, identity, bump):
        higher = EpaVector(modifier.e + bump, modifier.p, modifier.a)
        assert amalgamate(amalgamation, higher, identity).e > amalgamate(amalgamation, modifier, identity).e

    def test_missing_row_passes_through(self, tmp_path):
        path = tmp_path / "am.csv"
        path.write_text("output,const,Me,Mp,Ma,I\ne,-0.17,0.62,-0.14,-0.18,0.5\n")
        with pytest.warns(UserWarning, match="p, a"):
            am = load_amalgamation(path)
        out = am.apply(EpaVector(1, 1, 1), EpaVector(0.5, -0.25, 2))
        assert (out.p, out.a) == (-0.25, 2)


class TestDeflection:
    def test_zero_when_equal(self):
        v = _nine(np.random.default_rng(0))
        assert deflection_total(v, v) == 0.0

    def test_known_value(self):
        assert deflection_total([0] * 9, [3, 4] + [0] * 7) == pytest.approx(5.0)
        assert deflection_total([0] * 9, [3, 4] + [0] * 7, mode="squared") == pytest.approx(25.0)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(_epa, min_size=27, max_size=27))
    def test_metric_properties(self, vals):
        a, b, c = (np.array(vals[i:i + 9]) for i in (0, 9, 18))
        assert deflection_total(a, b) >= 0
        assert deflection_total(a, b) == pytest.approx(deflection_total(b, a))
        assert deflection_total(a, c) <= deflection_total(a, b) + deflection_total(b, c) + 1e-9

    def test_agent_and_triples(self):
        f = (EpaVector(1, 0, 0), EpaVector(0, 0, 0), EpaVector(0, 0, 0))
        t = (EpaVector(0, 0, 0),) * 3
        assert deflection_total(f, t) == deflection_agent(EpaVector(1, 0, 0), EpaVector(0, 0, 0)) == 1.0

    def test_bad_mode_and_shape(self):
        with pytest.raises(ValueError):
            deflection_total([0] * 9, [0] * 9, mode="manhattan")
        with pytest.raises(ValueError):
            deflection_total([0] * 8, [0] * 8)


class TestOptimalBehavior:
    @pytest.mark.parametrize("seed", range(3))
    def test_matches_grid_search(self, seed):
        rng = np.random.default_rng(seed)
        rows = random_affine_rows(rng)
        eqs = ImpressionEquationSet.from_mapping(rows)
        actor, obj = EpaVector(*rng.uniform(-2, 2, 3)), EpaVector(*rng.uniform(-2, 2, 3))
        best = solve_optimal_behavior(eqs, actor, obj)
        objective = brute_objective(rows, actor, obj)
        grid_best, values = grid_search_behavior(objective)
        if np.max(np.abs(best.to_array())) < 4.2:
            assert np.max(np.abs(best.to_array() - grid_best)) <= 0.15
        assert objective(best.to_array()[None, :])[0] <= values.min() + 1e-12

    def test_gradient_vanishes(self, equations, lexicon):
        actor = lexicon.lookup("customer", "identity").epa
        obj = lexicon.lookup("chatbot", "identity").epa
        b = solve_optimal_behavior(equations, actor, obj).to_array()
        f = brute_objective(_csv_mapping(), actor, obj)
        h = 1e-5
        grad = [(f((b + h * e)[None])[0] - f((b - h * e)[None])[0]) / (2 * h) for e in np.eye(3)]
        assert np.max(np.abs(grad)) < 1e-3

    def test_transients_are_respected(self, equations, lexicon):
        actor = lexicon.lookup("customer", "identity").epa
        obj = lexicon.lookup("chatbot", "identity").epa
        at = EpaVector(-1, 0.5, 1)
        b = solve_optimal_behavior(equations, actor, obj, actor_transient=at)
        base = event_deflection(equations, actor, b, obj, actor_transient=at)
        for delta in itertools.product((-0.05, 0.05), repeat=3):
            moved = EpaVector.from_array(b.to_array() + np.array(delta))
            assert event_deflection(equations, actor, moved, obj, actor_transient=at) >= base - 1e-12

    def test_nonlinear_in_behavior(self):
        eqs = ImpressionEquationSet.from_mapping({"BeBp": {"Ae": 1.0}})
        with pytest.raises(NonlinearBehaviorError, match="BeBp"):
            solve_optimal_behavior(eqs, EpaVector(0, 0, 0), EpaVector(0, 0, 0))

    def test_identity_set_is_degenerate(self):
        with pytest.raises(SingularSystemError):
            solve_optimal_behavior(ImpressionEquationSet.identity(), EpaVector(1, 1, 1), EpaVector(0, 0, 0))

    def test_affine_form_reconstructs_post(self, equations):
        rng = np.random.default_rng(4)
        actor, obj, b = (EpaVector(*rng.uniform(-3, 3, 3)) for _ in range(3))
        c, M = behavior_affine_form(equations, actor, obj)
        post = apply_event(equations, EventFeatures.from_abo(actor, b, obj)).values
        assert np.allclose(c + M @ b.to_array(), post, atol=1e-12)


class TestRecommend:
    def _emojis(self, lexicon):
        return lexicon.of_kind("emoji")

    def test_single_candidate(self, equations, amalgamation, lexicon):
        cand = self._emojis(lexicon)[:1]
        res = recommend_modifier(equations, amalgamation, EpaVector(1, 1, 1), EpaVector(0, 0, 0),
                                 EpaVector(0, 0, 0), cand)
        assert len(res) == 1 and res[0][0] == cand[0]

    def test_zero_deflection_candidate_ranks_first(self, lexicon):
        # identity equations: deflection is zero whatever the modifier; a
        # constant term then singles out the modifier that reproduces it
        eqs = ImpressionEquationSet.from_mapping(
            {"1": {"Ae": 1.0}, **{f: {f: 1.0} for f in FEATURES if f != "Ae"}})
        amalg = AmalgamationEquationSet(modifier=((1, 0, 0), (0, 1, 0), (0, 0, 1)), identity=(0, 0, 0))
        target = LexiconEntry("zz_target", "emoji", EpaVector(1.0, 0.3, -0.2))
        cands = [target, *self._emojis(lexicon)]
        res = recommend_modifier(eqs, amalg, EpaVector(0, 0, 0), EpaVector(0.5, 0.5, 0.5),
                                 EpaVector(0, 0, 0), cands)
        assert res[0][0] == target and res[0][1] == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("role", ["actor", "object"])
    def test_matches_rescoring(self, equations, amalgamation, lexicon, role):
        base = lexicon.lookup("customer", "identity").epa
        other = lexicon.lookup("chatbot", "identity").epa
        beh = lexicon.lookup("question", "behavior").epa
        res = recommend_modifier(equations, amalgamation, base, beh, other, self._emojis(lexicon), role=role)
        rescored = []
        for entry in self._emojis(lexicon):
            mod = amalgamation.apply(entry.epa, base)
            a, o = (mod, other) if role == "actor" else (other, mod)
            post = apply_event(equations, EventFeatures.from_abo(a, beh, o)).values
            fund = np.concatenate([a.to_array(), beh.to_array(), o.to_array()])
            rescored.append((float(np.linalg.norm(fund - post)), entry.term))
        rescored.sort()
        assert [e.term for e, _ in res] == [t for _, t in rescored]
        assert np.allclose([s for _, s in res], [s for s, _ in rescored], atol=1e-12)

    def test_bad_role(self, equations, amalgamation):
        with pytest.raises(ValueError):
            recommend_modifier(equations, amalgamation, EpaVector(0, 0, 0), EpaVector(0, 0, 0),
                               EpaVector(0, 0, 0), [], role="bystander")
