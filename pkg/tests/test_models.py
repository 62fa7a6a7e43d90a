import math
import threading

import numpy as np
import pytest
from scipy import special

from condspec.errors import DomainError, HorizonError, TailUnknownError, TiltDivergenceError
from condspec.models import LambdaFn, ModelSpec, condition_diagnostics
from condspec.trees import otter_for_horizon, tree_counts


def test_family_validation():
    with pytest.raises(DomainError):
        ModelSpec("no-such-family", 1.5)
    with pytest.raises(DomainError):
        ModelSpec("forest-unlabelled-unrooted", 1.0)
    with pytest.raises(DomainError):
        ModelSpec.poisson_power(q=0.0)
    with pytest.raises(DomainError):
        ModelSpec.poisson_power(A=-1.0)
    with pytest.raises(DomainError):
        LambdaFn.constant(0.0)


def test_labelled_unrooted_j1():
    spec = ModelSpec.forest("labelled-unrooted")
    assert math.isclose(spec.mean(1), math.exp(-1), rel_tol=1e-15)
    assert math.isclose(spec.species_pmf(1)[0], math.exp(-math.exp(-1)), rel_tol=1e-14)


def test_labelled_means_large_j():
    spec = ModelSpec.forest("labelled-rooted")
    j = 300
    expected = math.exp((j - 1) * math.log(j) - math.lgamma(j + 1) - j)
    assert math.isclose(spec.mean(j), expected, rel_tol=1e-12)


def test_poisson_power_j2():
    spec = ModelSpec.poisson_power()
    assert math.isclose(spec.mean(2), 2**-2.5, rel_tol=1e-15)
    assert spec.species_pmf(2).kind == ("poisson", 2**-2.5)


def test_forest_negative_binomial_mean():
    spec = ModelSpec.forest("unlabelled-unrooted")
    rho = spec.rho
    m = tree_counts(spec.horizon).unrooted(7)
    law = spec.species_pmf(7)
    assert math.isclose(spec.mean(7), m * rho**7 / (1 - rho**7), rel_tol=1e-12)
    assert law.kind[0] == "negbinom" and law.kind[1] == m
    assert math.isclose(law[0], (1 - rho**7) ** m, rel_tol=1e-12)


@pytest.mark.parametrize(
    "spec",
    [ModelSpec.poisson_power(A=2.0, q=0.7, lam=LambdaFn.log_power(1.5, 2.0)), ModelSpec.forest("labelled-rooted")],
    ids=["poisson-log-power", "labelled-rooted"],
)
def test_lambda_recovered_from_pmf(spec):
    for j in (1, 5, 40, 200):
        # a wide window, so the truncated part of the mean is negligible
        law = spec.species_pmf(j, 12)
        m = math.fsum(np.arange(len(law)) * law.probs)
        assert math.isclose(m * j ** (spec.q + 1), spec.lam_at(j), rel_tol=1e-9)


def test_forest_lambda_settles_to_otter_c():
    spec = ModelSpec.forest("unlabelled-unrooted")
    lams = [spec.lam_at(j) for j in range(50, 201)]
    osc = (max(lams) - min(lams)) / (max(lams) + min(lams))
    assert osc < 0.01
    c = otter_for_horizon(spec.horizon).c
    assert abs(spec.lam_at(200) / c - 1) < 0.01


def test_horizon():
    spec = ModelSpec.forest("unlabelled-rooted", horizon=80)
    spec.species_pmf(80)
    with pytest.raises(HorizonError):
        spec.species_pmf(81)


def test_tilt_divergence_for_forest():
    spec = ModelSpec.forest("unlabelled-unrooted").tilted(3.0)
    with pytest.raises(TiltDivergenceError):
        spec.species_pmf(1)


def test_custom_table():
    spec = ModelSpec.custom({1: [0.5, 0.5], 3: [0.9, 0.0, 0.1]})
    assert spec.species_pmf(2)[0] == 1.0
    assert spec.mean(3) == pytest.approx(0.2)
    strict = ModelSpec.custom({1: [0.5, 0.5]}, beyond="error")
    with pytest.raises(HorizonError):
        strict.species_pmf(2)
    with pytest.raises(TailUnknownError):
        strict.tail_mean_bracket(1)
    with pytest.raises(DomainError):
        ModelSpec.custom({1: [0.5, 0.4]}).species_pmf(1)


def test_fingerprint_tracks_every_parameter():
    base = ModelSpec.poisson_power()
    variants = [
        ModelSpec.poisson_power(A=1.0000001),
        ModelSpec.poisson_power(q=1.5000001),
        ModelSpec.poisson_power(lam=LambdaFn.constant(1.0000001)),
        ModelSpec.poisson_power(lam=LambdaFn.log_power(1.0, 1.0)),
        ModelSpec.poisson_power(tau=1e-11),
        ModelSpec.poisson_power(tilt=1.01),
    ]
    fps = {base.fingerprint()} | {v.fingerprint() for v in variants}
    assert len(fps) == len(variants) + 1
    assert ModelSpec.poisson_power().fingerprint() == base.fingerprint()
    f1 = ModelSpec.forest("unlabelled-unrooted", horizon=100).fingerprint()
    assert f1 != ModelSpec.forest("unlabelled-unrooted", horizon=101).fingerprint()


def test_tail_brackets_contain_truth():
    spec = ModelSpec.poisson_power()
    lo, hi, rig = spec.tail_mean_bracket(50)
    truth = float(special.zeta(2.5, 51))
    assert rig and lo <= truth <= hi
    spec = ModelSpec.poisson_power(lam=LambdaFn.log_power(1.0, 1.0))
    lo, hi, rig = spec.tail_mean_bracket(100)
    direct = math.fsum(spec.mean(j) for j in range(101, 2_000_001))
    assert lo <= direct <= hi * (1 + 1e-6) and rig
    spec = ModelSpec.forest("labelled-unrooted")
    lo, hi, _ = spec.tail_mean_bracket(100)
    direct = math.fsum(spec.mean(j) for j in range(101, 200_001))
    assert lo <= direct <= hi


def test_species_cache_is_shared_across_threads():
    spec = ModelSpec.poisson_power()
    seen = []

    def work():
        seen.append(spec.species_pmf(17))

    ts = [threading.Thread(target=work) for _ in range(8)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert all(s is seen[0] for s in seen)


class TestDiagnostics:
    def test_constant_lambda(self):
        d = condition_diagnostics(ModelSpec.poisson_power(), jmax=100)
        assert d.L_hat == 1.0

    def test_poisson_eps_decays(self):
        d = condition_diagnostics(ModelSpec.poisson_power(), jmax=200)
        tail = d.eps_hat[9:200]
        assert np.all(np.diff(tail) < 0)
        # eps_j2 = P[Z_j = 2] j^2.5 = exp(-a_j) a_j^2 j^2.5 / 2 with a_j = j^-2.5
        j = 50
        a = j**-2.5
        assert d.gamma[0] > 0
        assert d.eps_hat[j - 1] * d.gamma[0] >= math.exp(-a) * a**2 / 2 * j**2.5 * (1 - 1e-12)

    def test_forest_p0_bounded_away(self):
        d = condition_diagnostics(ModelSpec.forest("unlabelled-unrooted"), jmax=200)
        assert d.p0_hat > 0.1
        assert d.as_dict()["jmax"] == 200

    def test_log_lambda_flags_growth(self):
        spec = ModelSpec.poisson_power(lam=LambdaFn.log_power(1.0, 3.0))
        d = condition_diagnostics(spec, jmax=200)
        assert d.L_hat == 1.0  # increasing lambda: lambda(l - t) <= lambda(l)
        assert any("lambda+" in f for f in d.flags)

    def test_decreasing_lambda(self):
        spec = ModelSpec.poisson_power(lam=LambdaFn.log_power(1.0, -1.0))
        d = condition_diagnostics(spec, jmax=200)
        lam = [math.log(math.e + j) ** -1 for j in range(0, 201)]
        ref = max(lam[l - t] / lam[l] for l in range(2, 201) for t in range(l // 2 + 1, l))
        assert d.L_hat == pytest.approx(ref, rel=1e-12) and d.L_hat > 1
