import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

import oracles
from condspec import exact
from condspec.errors import ConditioningImpossibleError, DomainError, FamilyError, SizeError, TailUnknownError
from condspec.models import ModelSpec


def poisson(**kw):
    return ModelSpec.poisson_power(**kw)


def degenerate():
    # every Z_j is identically zero
    return ModelSpec.custom({1: [1.0]}, beyond="zero")


def test_partitions_counts():
    counts = [sum(1 for _ in exact.partitions(n)) for n in range(0, 21)]
    assert counts[:11] == [1, 1, 2, 3, 5, 7, 11, 15, 22, 30, 42]
    assert counts[20] == 627
    assert sorted(exact.spectra(4)) == sorted(oracles.spectrum(p) for p in oracles.partitions(4))


class TestTables:
    def test_suffix_matches_direct_convolution(self):
        spec = poisson()
        n = 30
        suf = exact.suffix_table(spec, n)
        for b in (0, 7, 29):
            law = exact.t_distribution(spec, b, n)
            assert np.allclose(suf.column(b + 1), law.window(n), atol=1e-15)
            assert abs(suf.mass(b + 1) - 1) < 1e-12

    def test_prefix_and_suffix_agree_on_full_sum(self):
        spec = ModelSpec.forest("unlabelled-unrooted")
        n = 40
        pre = exact.prefix_table(spec, n)
        suf = exact.suffix_table(spec, n)
        assert np.allclose(pre.column(n), suf.column(1), atol=1e-15)

    def test_scaled_rows_survive_heavy_tilt(self):
        # P[T_0n = n] is about exp(-1500) here: below double range, yet exact in log form
        n = 20
        base = exact.suffix_table(poisson(), n)
        tilted = exact.suffix_table(poisson().tilted(2.0), n)
        assert tilted.prob(1, n) == 0.0
        a = [poisson().mean(j) for j in range(1, n + 1)]
        shift = n * math.log(2.0) - math.fsum(aj * (2.0**j - 1) for j, aj in enumerate(a, start=1))
        assert tilted.logprob(1, n) == pytest.approx(base.logprob(1, n) + shift, rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            exact.suffix_table(poisson(), 0)
        with pytest.raises(DomainError):
            exact.t_distribution(poisson(), 5, 5)


class TestBruteForce:
    @pytest.mark.parametrize("n", [1, 5, 12])
    def test_matches_oracle(self, n):
        spec = poisson(A=0.7, q=0.9)
        law = exact.spectrum_law_bruteforce(spec, n)
        ref = oracles.poisson_conditional_law({j: spec.mean(j) for j in range(1, n + 1)}, n)
        assert set(law.entries) == set(ref)
        assert max(abs(law[k] - ref[k]) for k in ref) < 1e-13
        assert abs(law.total() - 1) < 1e-13

    def test_guard(self):
        with pytest.raises(SizeError):
            exact.spectrum_law_bruteforce(poisson(), 41)

    def test_degenerate_conditioning_is_impossible(self):
        with pytest.raises(ConditioningImpossibleError):
            exact.spectrum_law_bruteforce(degenerate(), 6)
        with pytest.raises(ConditioningImpossibleError):
            exact.conditional_marginal(degenerate(), 6, 1)

    def test_null_zero_probability(self):
        # Z_1 >= 1 always: every spectrum must contain a 1-component
        spec = ModelSpec.custom({1: [0.0, 0.5, 0.5], 2: [0.5, 0.5]})
        law = exact.spectrum_law_bruteforce(spec, 4)
        assert all(dict(s).get(1, 0) >= 1 for s in law.entries)
        assert abs(law.total() - 1) < 1e-14


@given(st.floats(0.2, 3.0), st.floats(0.3, 3.0), st.integers(2, 12))
@settings(max_examples=25, deadline=None)
def test_dp_marginals_equal_enumeration(A, q, n):
    spec = poisson(A=A, q=q)
    law = exact.spectrum_law_bruteforce(spec, n)
    for j in range(1, n + 1):
        m = exact.conditional_marginal(spec, n, j).window(n // j)
        ref = law.component_marginal(j)
        assert np.allclose(m[: len(ref)], ref, atol=1e-12)
    y = exact.largest_component_law(spec, n).window(n)
    for k, p in law.marginal(lambda s: s[-1][0]).items():
        assert abs(y[k] - p) < 1e-12


def test_tilt_invariance_of_marginals():
    spec = poisson()
    n = 20
    base = exact.conditional_marginal(spec, n, 3).window(6)
    for x in (0.5, 2.0):
        other = exact.conditional_marginal(spec.tilted(x), n, 3).window(6)
        assert np.allclose(base, other, atol=1e-12)


class TestQn:
    def test_mass_accounting(self):
        spec = poisson()
        q = exact.qn_law(spec, 15)
        assert abs(q.total() + q.outside - 1) < 1e-12
        t = exact.t_distribution(spec, 0, 15)
        assert q.outside == pytest.approx(t.tail, abs=1e-15)

    def test_single_entry_against_definition(self):
        # Q_n(y) = P[Z = y] + sum_{k: y_k >= 1} P[Z = y - e_k]
        spec = poisson()
        n = 6
        a = {j: spec.mean(j) for j in range(1, n + 1)}

        def pz(y):
            return math.prod(math.exp(-a[j]) * a[j] ** y.get(j, 0) / math.factorial(y.get(j, 0)) for j in a)

        y = {1: 1, 2: 1, 3: 1}
        expected = pz(y) + pz({2: 1, 3: 1}) + pz({1: 1, 3: 1}) + pz({1: 1, 2: 1})
        assert exact.qn_law(spec, n)[((1, 1), (2, 1), (3, 1))] == pytest.approx(expected, rel=1e-12)

    def test_resolve_outside(self):
        spec = poisson()
        q = exact.qn_law(spec, 8, delta=1e-4, resolve_outside=True)
        assert q.outside == 0
        assert q.uncovered < 1e-4
        assert abs(q.total() + q.uncovered - 1) < 1e-10
        assert any(sum(j * c for j, c in s) > 8 for s in q.entries)

    def test_degenerate_is_point_mass(self):
        q = exact.qn_law(degenerate(), 9)
        assert q.entries == {((9, 1),): 1.0}

    def test_delta_range(self):
        with pytest.raises(DomainError):
            exact.qn_law(poisson(), 5, delta=0.1)


class TestTV:
    def test_identical_is_zero(self):
        law = exact.spectrum_law_bruteforce(poisson(), 10)
        r = exact.tv_distance(law, law)
        assert r.value == 0 and r.error == 0

    def test_outside_lump_contributes(self):
        spec = poisson()
        c = exact.spectrum_law_bruteforce(spec, 10)
        q = exact.qn_law(spec, 10)
        r = exact.tv_distance(c, q)
        lo, hi = r.interval
        assert lo <= r.value <= hi
        assert r.value >= 0.5 * q.outside


class TestLimits:
    def test_poisson_rho_connect(self):
        lim = exact.limit_laws(poisson(), delta=1e-6, cap=200)
        rho = math.exp(-float(special.zeta(2.5, 1)))
        assert lim.rho_bracket[0] <= rho <= lim.rho_bracket[1]
        assert lim.uncovered <= 1e-6
        assert abs(lim.t_inf[0] - rho) < 1e-6

    def test_degenerate(self):
        lim = exact.limit_laws(degenerate(), cap=50)
        assert lim.rho_connect == 1.0
        assert lim.t_inf[0] == 1.0
        assert lim.count[1] == 1.0

    def test_forest_tail_not_certified(self):
        with pytest.raises(TailUnknownError):
            exact.limit_laws(ModelSpec.forest("unlabelled-unrooted"), delta=1e-6)

    def test_tilted_above_one_has_no_tail(self):
        with pytest.raises(TailUnknownError):
            exact.limit_laws(poisson().tilted(1.5))


class TestIdentities:
    def test_poisson_recursion(self):
        spec = poisson(A=0.5, q=0.4)
        for b in (0, 10, 99):
            assert exact.poisson_recursion_residual(spec, b, 100) < 1e-12

    def test_recursion_detects_wrong_law(self):
        spec = poisson()
        wrong = exact.t_distribution(poisson(A=1.01), 0, 60)
        assert exact.poisson_recursion_residual(spec, 0, 60, law=wrong) > 1e-6

    @pytest.mark.parametrize("spec", [ModelSpec.forest("unlabelled-unrooted"), poisson()], ids=["forest", "poisson"])
    def test_general_recursion(self, spec):
        for b in (0, 20, 59):
            assert exact.general_recursion_residual(spec, b, 60) < 1e-12

    def test_partition_function(self):
        spec = poisson()
        for n in (1, 5, 12):
            ref = oracles.partition_sum({j: spec.mean(j) for j in range(1, n + 1)}, n)
            assert exact.partition_function(spec, n) == pytest.approx(ref, rel=1e-12)
        with pytest.raises(FamilyError):
            exact.partition_function(ModelSpec.forest("unlabelled-unrooted"), 5)

    def test_upper_bound_constant(self):
        k = exact.upper_bound_constant(poisson(), 200)
        assert 1 <= k < 10
