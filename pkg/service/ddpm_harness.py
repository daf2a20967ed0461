"""
One-dimensional linear-Gaussian DDPM chain with exact denoising, used to check that
shifting each reverse mean by -sigma^2 * grad log Q samples the Q-tilted data distribution.
"""
from dataclasses import dataclass

import numpy as np

from exceptions_handler import DomainError
from models.request.diffusion import GaussianToyConfig


def ddpm_guided_step(mean: np.ndarray, var: float, grad_log_q: np.ndarray) -> tuple[np.ndarray, float]:
    if not var > 0:
        raise DomainError(detail=f"reverse-step variance must be > 0, got {var}")
    return np.asarray(mean) - var * np.asarray(grad_log_q), var


@dataclass
class GaussianChain:
    """Data x0 ~ N(m0, v0) pushed through x_i = sqrt(alpha_i) x_{i-1} + sqrt(beta_i) n_i."""

    config: GaussianToyConfig

    @property
    def betas(self) -> np.ndarray:
        return np.asarray(self.config.betas, dtype=np.float64)

    @property
    def alpha_bars(self) -> np.ndarray:
        # index j holds the product of the first j alphas; index 0 is 1
        return np.concatenate([[1.0], np.cumprod(1.0 - self.betas)])

    def marginal_var(self, j: int) -> float:
        ab = self.alpha_bars[j]
        return ab * self.config.data_var + 1.0 - ab

    def predicted_noise(self, x: np.ndarray, i: int) -> np.ndarray:
        """Exact epsilon prediction E[n | x_i] for the Gaussian data distribution."""
        ab = self.alpha_bars[i]
        return np.sqrt(1.0 - ab) * (x - np.sqrt(ab) * self.config.data_mean) / self.marginal_var(i)

    def reverse_params(self, x: np.ndarray, i: int) -> tuple[np.ndarray, float]:
        """Mean from the epsilon parameterization and the exact posterior variance of step i -> i-1."""
        beta = self.betas[i - 1]
        alpha = 1.0 - beta
        ab = self.alpha_bars[i]
        mean = (x - beta / np.sqrt(1.0 - ab) * self.predicted_noise(x, i)) / np.sqrt(alpha)
        var = self.marginal_var(i - 1) * beta / self.marginal_var(i)
        return mean, var

    def grad_log_q(self, x: np.ndarray, i: int) -> np.ndarray:
        """Gradient of log E[Q(x0) | x_{i-1}] for log Q(x0) = q_slope * x0."""
        ab = self.alpha_bars[i - 1]
        kappa = np.sqrt(ab) * self.config.data_var / self.marginal_var(i - 1)
        return np.full_like(x, self.config.q_slope * kappa)

    def tilted_moments(self, guided: bool) -> tuple[float, float]:
        """Closed-form terminal distribution: N(m0 - c v0, v0) under guidance, N(m0, v0) without."""
        cfg = self.config
        shift = cfg.q_slope * cfg.data_var if guided else 0.0
        return cfg.data_mean - shift, cfg.data_var

    def prior(self, num_samples: int, rng: np.random.Generator) -> np.ndarray:
        """Draws from the forward marginal at the last step; guidance does not change where the chain starts."""
        steps = len(self.betas)
        mean = np.sqrt(self.alpha_bars[steps]) * self.config.data_mean
        return mean + np.sqrt(self.marginal_var(steps)) * rng.standard_normal(num_samples)

    def sample(self, num_samples: int, seed: int, guided: bool = True) -> np.ndarray:
        rng = np.random.default_rng(seed)
        steps = len(self.betas)
        x = self.prior(num_samples, rng)
        for i in range(steps, 0, -1):
            mean, var = self.reverse_params(x, i)
            g = self.grad_log_q(x, i) if guided else np.zeros_like(x)
            mean, var = ddpm_guided_step(mean, var, g)
            x = mean + np.sqrt(var) * rng.standard_normal(num_samples)
        return x
