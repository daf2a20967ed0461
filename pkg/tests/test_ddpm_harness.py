import numpy as np
import pytest

from exceptions_handler import DomainError
from models.request.diffusion import GaussianToyConfig
from service.ddpm_harness import GaussianChain, ddpm_guided_step


def test_zero_gradient_leaves_the_mean():
    mean, var = ddpm_guided_step(np.array([0.4, -1.0]), 0.2, np.zeros(2))
    np.testing.assert_array_equal(mean, [0.4, -1.0])
    assert var == 0.2


def test_guided_step_is_a_linear_shift():
    mean, _ = ddpm_guided_step(np.array([1.0]), 0.5, np.array([3.0]))
    assert mean[0] == pytest.approx(1.0 - 0.5 * 3.0)


def test_guided_step_needs_positive_variance():
    with pytest.raises(DomainError):
        ddpm_guided_step(np.zeros(1), 0.0, np.zeros(1))


def test_tilted_moments():
    chain = GaussianChain(GaussianToyConfig())
    assert chain.tilted_moments(guided=True)[0] == pytest.approx(0.295)
    assert chain.tilted_moments(guided=False) == pytest.approx((0.3, 0.0025))


def test_guided_chain_samples_the_tilted_distribution():
    samples = GaussianChain(GaussianToyConfig()).sample(100_000, seed=0, guided=True)
    assert samples.mean() == pytest.approx(0.295, abs=1e-3)
    assert samples.var() == pytest.approx(0.0025, rel=0.05)


def test_unguided_chain_samples_the_data_distribution():
    samples = GaussianChain(GaussianToyConfig()).sample(100_000, seed=1, guided=False)
    assert samples.mean() == pytest.approx(0.3, abs=1e-3)


def test_guidance_alone_produces_the_tilt():
    chain = GaussianChain(GaussianToyConfig())
    prior = chain.prior(100_000, np.random.default_rng(2))
    assert prior.mean() == pytest.approx(np.sqrt(chain.alpha_bars[-1]) * 0.3, abs=1e-2)

    guided = chain.sample(1_000, seed=5, guided=True)
    unguided = chain.sample(1_000, seed=5, guided=False)
    shift = guided - unguided
    np.testing.assert_allclose(shift, shift[0], atol=1e-12)
    assert shift[0] == pytest.approx(-0.005, abs=1e-3)
