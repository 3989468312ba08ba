"""Gumbel laws for samples of centred maxima and distances between empirical laws."""

import logging
import math
from typing import Sequence, Union

import numpy as np
from django.conf import settings
from scipy import optimize, special, stats

from .exceptions import DegenerateSampleError
from .models import GumbelFit, MixtureFit

logger = logging.getLogger(__name__)

PROFILE_XTOL = 1e-10

SampleLike = Union[Sequence[float], np.ndarray]


def _checked_sample(samples: SampleLike) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).ravel()
    minimum = settings.PPHI_GUMBEL_MIN_SAMPLES
    if x.size < minimum:
        raise DegenerateSampleError(f"a Gumbel fit needs at least {minimum} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DegenerateSampleError("samples must be finite")
    if x.max() == x.min():
        raise DegenerateSampleError("all samples are equal")
    return x


def _profile_scale(y: np.ndarray) -> float:
    # For centred data the scale solves β = −Σ y e^{−y/β} / Σ e^{−y/β}.
    def profile(beta: float) -> float:
        return beta + float(np.dot(y, special.softmax(-y / beta)))

    spread = float(y.max() - y.min())
    low, high = spread / y.size, spread
    for _ in range(200):
        if profile(low) < 0:
            break
        low /= 2.0
    for _ in range(200):
        if profile(high) > 0:
            break
        high *= 2.0
    return float(optimize.bisect(profile, low, high, xtol=PROFILE_XTOL, maxiter=1000))


def gumbel_fit(samples: SampleLike) -> GumbelFit:
    """
    Maximum-likelihood Gumbel (maximum) law with its Kolmogorov-Smirnov distance.

    The scale solves the one-dimensional profile equation on mean-centred
    data by bisection; the location then has a closed form.
    """
    x = _checked_sample(samples)
    mean = float(x.mean())
    y = x - mean
    beta = _profile_scale(y)
    location = mean - beta * (float(special.logsumexp(-y / beta)) - math.log(y.size))

    ks = stats.kstest(x, "gumbel_r", args=(location, beta))
    fit = GumbelFit(
        location=location,
        scale=beta,
        ks_distance=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
        log_likelihood=float(np.sum(stats.gumbel_r.logpdf(x, loc=location, scale=beta))),
        count=int(x.size),
    )
    logger.debug("Gumbel fit of %d samples: mu=%.6g beta=%.6g KS=%.4g", x.size, location, beta, fit.ks_distance)
    return fit


def _mixture_log_likelihood(params: np.ndarray, x: np.ndarray) -> float:
    first, second, log_scale, logit = params
    scale = math.exp(log_scale)
    components = np.logaddexp(
        special.log_expit(logit) + stats.gumbel_r.logpdf(x, loc=first, scale=scale),
        special.log_expit(-logit) + stats.gumbel_r.logpdf(x, loc=second, scale=scale),
    )
    return float(np.sum(components))


def location_mixture_gain(samples: SampleLike) -> MixtureFit:
    """
    Fit w·G(μ₁, β) + (1 − w)·G(μ₂, β) by maximum likelihood.

    Nelder-Mead is started from a few symmetric splits of the single-Gumbel
    fit; the single fit itself is a degenerate mixture, so the gain is never
    negative.
    """
    x = _checked_sample(samples)
    single = gumbel_fit(x)
    mu, beta = single.location, single.scale

    best_params = np.array([mu, mu, math.log(beta), 0.0])
    best = single.log_likelihood
    for split in (0.5, 1.0, 2.0):
        start = np.array([mu - split * beta, mu + split * beta, math.log(beta), 0.0])
        result = optimize.minimize(
            lambda p: -_mixture_log_likelihood(p, x),
            start,
            method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-8, "maxiter": 4000},
        )
        if np.isfinite(result.fun) and -result.fun > best:
            best, best_params = float(-result.fun), result.x

    first, second, log_scale, logit = best_params
    return MixtureFit(
        weight=float(special.expit(logit)),
        locations=(float(first), float(second)),
        scale=math.exp(log_scale),
        log_likelihood=best,
        gain=best - single.log_likelihood,
    )


def _one_sided_excess(p: np.ndarray, q: np.ndarray, h: float) -> float:
    # sup_x P(x) − Q(x + h) for empirical laws of sorted p and q; both sides
    # are step functions, so the supremum sits at a jump of P or of Q(· + h).
    at_p = np.searchsorted(p, p, "right") / p.size - np.searchsorted(q, p + h, "right") / q.size
    at_q = np.searchsorted(p, q - h, "right") / p.size - np.searchsorted(q, q, "right") / q.size
    return max(0.0, float(at_p.max()), float(at_q.max()))


def levy_distance(a: SampleLike, b: SampleLike) -> float:
    """
    Lévy distance between the empirical laws of `a` and `b`.

    The smallest h with F(x − h) − h ≤ G(x) ≤ F(x + h) + h for every x,
    located by bisection on the decreasing function h ↦ excess(h) − h.
    """
    p = np.sort(np.asarray(a, dtype=np.float64).ravel())
    q = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if p.size == 0 or q.size == 0:
        raise DegenerateSampleError("the Lévy distance needs two non-empty samples")

    def gap(h: float) -> float:
        return max(_one_sided_excess(q, p, h), _one_sided_excess(p, q, h)) - h

    if gap(0.0) <= 0:
        return 0.0
    if gap(1.0) >= 0:
        return 1.0
    return float(optimize.bisect(gap, 0.0, 1.0, xtol=1e-12))


def cdf_table(samples: SampleLike, fit: GumbelFit) -> np.ndarray:
    """Rows (x, empirical CDF, fitted CDF) at the sorted sample points."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    empirical = np.arange(1, x.size + 1) / x.size
    return np.column_stack([x, empirical, fit.cdf(x)])
