import numpy as np
import pytest

from condspec import exact
from condspec.errors import ConditioningImpossibleError, DomainError, ExhaustionError
from condspec.models import ModelSpec
from condspec.sampling import (
    SamplerState,
    chisquare_gof,
    empirical_tv,
    make_rng,
    sample_spectrum_exact,
    sample_spectrum_rejection,
)


def poisson():
    return ModelSpec.poisson_power()


def test_same_seed_same_draws():
    a = sample_spectrum_exact(SamplerState.for_model(poisson(), 15, seed=7), 200)
    b = sample_spectrum_exact(SamplerState.for_model(poisson(), 15, seed=7), 200)
    assert a == b


def test_batching_does_not_change_draws():
    a = sample_spectrum_exact(SamplerState.for_model(poisson(), 10, seed=3), 500, batch=500)
    b = sample_spectrum_exact(SamplerState.for_model(poisson(), 10, seed=3), 500, batch=500)
    assert a == b


def test_streams_differ():
    st = SamplerState.for_model(poisson(), 15, seed=7)
    a = sample_spectrum_exact(st.substream(1), 200)
    b = sample_spectrum_exact(st.substream(2), 200)
    assert a != b
    x = make_rng(5, 0).random(4)
    y = make_rng(5, 1).random(4)
    assert not np.allclose(x, y)


@pytest.mark.parametrize("spec", [poisson(), ModelSpec.forest("unlabelled-unrooted")], ids=["poisson", "forest"])
def test_exact_sampler_fits_law(spec):
    n = 9
    law = exact.spectrum_law_bruteforce(spec, n)
    draws = sample_spectrum_exact(SamplerState.for_model(spec, n, seed=11), 20000)
    assert all(sum(j * y for j, y in s) == n for s in draws)
    assert chisquare_gof(draws, law) > 1e-3
    assert empirical_tv(draws, law) < 0.03


def test_single_draw_shape():
    s = sample_spectrum_exact(SamplerState.for_model(poisson(), 6, seed=1))
    assert isinstance(s, tuple) and sum(j * y for j, y in s) == 6


def test_rejection_sampler_fits_law():
    spec = poisson()
    n = 7
    st = SamplerState.for_model(spec, n, seed=4)
    draws = [sample_spectrum_rejection(spec, n, st).spectrum for _ in range(4000)]
    law = exact.spectrum_law_bruteforce(spec, n)
    assert chisquare_gof(draws, law) > 1e-3


def test_rejection_exhaustion():
    spec = poisson()
    st = SamplerState.for_model(spec, 30, seed=0)
    r = sample_spectrum_rejection(spec, 30, st, max_tries=3)
    assert r.exhausted and r.tries == 3
    with pytest.raises(ExhaustionError):
        sample_spectrum_rejection(spec, 30, st, max_tries=3, raise_on_exhaustion=True)


def test_bad_inputs():
    with pytest.raises(DomainError):
        SamplerState.for_model(poisson(), 5, seed=-1)
    with pytest.raises(DomainError):
        sample_spectrum_rejection(poisson(), 5, SamplerState.for_model(poisson(), 5), max_tries=0)
    with pytest.raises(DomainError):
        empirical_tv([], exact.spectrum_law_bruteforce(poisson(), 3))


def test_degenerate_model_cannot_be_sampled():
    spec = ModelSpec.custom({1: [1.0]})
    with pytest.raises(ConditioningImpossibleError):
        sample_spectrum_exact(SamplerState.for_model(spec, 5, seed=0))
