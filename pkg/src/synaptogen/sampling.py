"""Generative models for convolutional synaptic strengths.

Three samplers produce frozen 5x5 kernel banks:

* ``normal`` -- i.i.d. standard normal draws.
* ``lognormal`` -- ``w = exp(mu + sigma * z)`` with z standard normal;
  strictly positive, defaults fitted to cortical synapse measurements
  (mu = -0.702, sigma^2 = 0.9355).
* ``center-surround`` -- one zero-mean 25-dimensional multivariate normal
  per 5x5 kernel slice whose covariance is a stationary
  difference-of-Gaussians over the receptive-field grid, giving each slice
  an excitatory-center / inhibitory-surround correlation structure.

The covariance function is K(d) = exp(-d^2 / 2*sigma_center^2)
- surround_weight * exp(-d^2 / 2*sigma_surround^2); the bound
``surround_weight <= (sigma_center / sigma_surround)^2`` keeps it positive
semidefinite on the plane.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .numerics import cholesky, make_rng

__all__ = [
    "NORMAL",
    "LOGNORMAL",
    "CENTER_SURROUND",
    "SynapseDistribution",
    "KernelBank",
    "KernelStats",
    "sample_normal",
    "sample_lognormal",
    "center_surround_covariance",
    "sample_center_surround",
    "generate_kernel_bank",
    "kernel_stats",
    "export_kernels_pgm",
    "write_stats_csv",
    "rescale_to_unit_fanin",
]

NORMAL = "normal"
LOGNORMAL = "lognormal"
CENTER_SURROUND = "center-surround"

FIELD_SIZE = 5  # receptive-field edge length, fixed by the architecture

_DEFAULT_MU = -0.702
_DEFAULT_SIGMA2 = 0.9355


@dataclass(frozen=True)
class SynapseDistribution:
    """Tagged choice of generative model plus its parameters.

    Only the parameters belonging to ``variant`` are meaningful; the
    constructors :meth:`normal`, :meth:`lognormal` and
    :meth:`center_surround` are the intended entry points.
    """

    variant: str
    mu: float = _DEFAULT_MU            # lognormal: mean of ln w
    sigma2: float = _DEFAULT_SIGMA2    # lognormal: variance of ln w
    sigma_center: float = 1.0          # DoG center scale, pixels
    sigma_surround: float = 2.5        # DoG surround scale, pixels
    surround_weight: float = field(default=0.9 * (1.0 / 2.5) ** 2)
    jitter: float = 1e-8               # diagonal jitter added before Cholesky
    sign_flip: bool = False            # lognormal ablation: random Rademacher signs

    def __post_init__(self):
        if self.variant not in (NORMAL, LOGNORMAL, CENTER_SURROUND):
            raise ValueError(f"unknown distribution variant {self.variant!r}")
        if self.sigma2 <= 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.sigma_center <= 0:
            raise ValueError(f"sigma_center must be positive, got {self.sigma_center}")
        if self.sigma_surround <= self.sigma_center:
            raise ValueError(
                f"sigma_surround ({self.sigma_surround}) must exceed "
                f"sigma_center ({self.sigma_center})"
            )
        bound = (self.sigma_center / self.sigma_surround) ** 2
        if not 0.0 <= self.surround_weight <= bound:
            raise ValueError(
                f"surround_weight {self.surround_weight} outside [0, {bound}]; "
                "larger values break positive semidefiniteness"
            )
        if self.jitter <= 0:
            raise ValueError(f"jitter must be positive, got {self.jitter}")

    @classmethod
    def normal(cls) -> "SynapseDistribution":
        return cls(variant=NORMAL)

    @classmethod
    def lognormal(
        cls,
        mu: float = _DEFAULT_MU,
        sigma2: float = _DEFAULT_SIGMA2,
        sign_flip: bool = False,
    ) -> "SynapseDistribution":
        return cls(variant=LOGNORMAL, mu=mu, sigma2=sigma2, sign_flip=sign_flip)

    @classmethod
    def center_surround(
        cls,
        sigma_center: float = 1.0,
        sigma_surround: float = 2.5,
        surround_weight: float | None = None,
        jitter: float = 1e-8,
    ) -> "SynapseDistribution":
        if surround_weight is None:
            surround_weight = 0.9 * (sigma_center / sigma_surround) ** 2
        return cls(
            variant=CENTER_SURROUND,
            sigma_center=sigma_center,
            sigma_surround=sigma_surround,
            surround_weight=surround_weight,
            jitter=jitter,
        )

    def second_moment(self) -> float:
        """Analytic E[w^2] of a single sampled weight."""
        if self.variant == NORMAL:
            return 1.0
        if self.variant == LOGNORMAL:
            return float(np.exp(2 * self.mu + 2 * self.sigma2))
        return 1.0 - self.surround_weight + self.jitter  # K(0) + jitter


@dataclass
class KernelBank:
    """A sampled convolutional kernel bank; frozen banks are never trained."""

    weights: np.ndarray  # [K, C, 5, 5] float64
    distribution: SynapseDistribution | None  # None: trained-from-init baseline
    seed: int
    frozen: bool = True


@dataclass
class KernelStats:
    mean: float
    var: float
    min: float
    max: float
    empirical_cov: np.ndarray  # [25, 25] across all kernel-channel slices


def sample_normal(rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` i.i.d. draws from N(0, 1) (numpy ziggurat)."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return rng.standard_normal(count)


def sample_lognormal(
    rng: np.random.Generator,
    count: int,
    mu: float = _DEFAULT_MU,
    sigma2: float = _DEFAULT_SIGMA2,
) -> np.ndarray:
    """``count`` draws of exp(mu + sigma * z), z ~ N(0, 1); all positive."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    return np.exp(mu + np.sqrt(sigma2) * rng.standard_normal(count))


def center_surround_covariance(
    field_size: int = FIELD_SIZE,
    sigma_center: float = 1.0,
    sigma_surround: float = 2.5,
    surround_weight: float | None = None,
    jitter: float = 1e-8,
) -> np.ndarray:
    """Difference-of-Gaussians covariance over a field_size^2 pixel grid.

    Entry (j, k) is K(||p_j - p_k||) + jitter * [j == k] for grid points
    p in row-major order.  Stationary by construction: it depends only on
    the pixel distance, so the result is exactly symmetric.
    """
    dist = SynapseDistribution.center_surround(
        sigma_center, sigma_surround, surround_weight, jitter
    )
    coords = np.array(
        [(y, x) for y in range(field_size) for x in range(field_size)], dtype=np.float64
    )
    d2 = ((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2)
    cov = np.exp(-d2 / (2.0 * dist.sigma_center**2))
    cov -= dist.surround_weight * np.exp(-d2 / (2.0 * dist.sigma_surround**2))
    cov += dist.jitter * np.eye(field_size**2)
    return cov


def sample_center_surround(
    rng: np.random.Generator,
    num_kernels: int,
    channels: int,
    cov: np.ndarray,
) -> np.ndarray:
    """Independent zero-mean draws with covariance ``cov`` per kernel slice.

    Each (kernel, channel) slice is ``L @ u`` with ``u ~ N(0, I)`` and
    ``L`` the Cholesky factor of ``cov``, reshaped row-major onto the grid.
    """
    dim = cov.shape[0]
    side = int(round(np.sqrt(dim)))
    if side * side != dim:
        raise ValueError(f"covariance dim {dim} is not a square grid size")
    ell = cholesky(cov)
    u = rng.standard_normal((num_kernels * channels, dim))
    draws = u @ ell.T
    return draws.reshape(num_kernels, channels, side, side)


def generate_kernel_bank(
    dist: SynapseDistribution,
    num_kernels: int = 64,
    channels: int = 1,
    seed: int = 0,
) -> KernelBank:
    """Sample a frozen [num_kernels, channels, 5, 5] bank from ``dist``.

    A pure function of its arguments: the same seed always reproduces the
    same bank bit for bit.
    """
    if channels not in (1, 3):
        raise ValueError(f"channels must be 1 or 3, got {channels}")
    rng = make_rng(seed)
    shape = (num_kernels, channels, FIELD_SIZE, FIELD_SIZE)
    count = int(np.prod(shape))
    if dist.variant == NORMAL:
        weights = sample_normal(rng, count).reshape(shape)
    elif dist.variant == LOGNORMAL:
        weights = sample_lognormal(rng, count, dist.mu, dist.sigma2).reshape(shape)
        if dist.sign_flip:
            weights = weights * (rng.integers(0, 2, size=shape) * 2 - 1)
    else:
        cov = center_surround_covariance(
            FIELD_SIZE,
            dist.sigma_center,
            dist.sigma_surround,
            dist.surround_weight,
            dist.jitter,
        )
        weights = sample_center_surround(rng, num_kernels, channels, cov)
    return KernelBank(weights=weights, distribution=dist, seed=seed, frozen=True)


def kernel_stats(bank: KernelBank) -> KernelStats:
    """Exact sample statistics of a bank, including the slice covariance."""
    w = bank.weights
    slices = w.reshape(-1, FIELD_SIZE * FIELD_SIZE)
    centered = slices - slices.mean(axis=0)
    emp_cov = centered.T @ centered / slices.shape[0]
    return KernelStats(
        mean=float(w.mean()),
        var=float(w.var()),
        min=float(w.min()),
        max=float(w.max()),
        empirical_cov=emp_cov,
    )


def export_kernels_pgm(bank: KernelBank, directory) -> list:
    """Write one 8-bit binary PGM (P5) per kernel-channel slice.

    Each slice is affinely rescaled so min -> 0 and max -> 255; a constant
    slice maps to 128 everywhere.  Returns the written paths.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    k, c, h, w = bank.weights.shape
    paths = []
    for ki in range(k):
        for ci in range(c):
            slab = bank.weights[ki, ci]
            lo, hi = slab.min(), slab.max()
            if hi > lo:
                pixels = np.rint((slab - lo) / (hi - lo) * 255.0)
            else:
                pixels = np.full_like(slab, 128.0)
            pixels = pixels.astype(np.uint8)
            path = directory / f"kernel_{ki:03d}_c{ci}.pgm"
            with open(path, "wb") as fh:
                fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
                fh.write(pixels.tobytes())
            paths.append(path)
    return paths


def write_stats_csv(path, entries) -> None:
    """Write (bank_id, KernelStats) rows with the standard header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bank_id", "mean", "var", "min", "max"])
        for bank_id, stats in entries:
            writer.writerow(
                [bank_id, repr(stats.mean), repr(stats.var), repr(stats.min), repr(stats.max)]
            )


def rescale_to_unit_fanin(bank: KernelBank, fan_in: int) -> KernelBank:
    """Optional normalization: divide by sqrt(fan_in * E[w^2]).

    Leaves the sampled structure intact while bringing pre-activation
    variance to order one (unscaled lognormal banks otherwise saturate the
    trainable head's early dynamics).
    """
    if bank.distribution is None:
        return bank
    scale = float(np.sqrt(fan_in * bank.distribution.second_moment()))
    return replace(bank, weights=bank.weights / scale)
