from typing import Optional, Sequence, Union

import numpy as np
from django.test import SimpleTestCase

from pphi.apps.lattice.models import LatticeGeometry, RealField
from pphi.stats import Estimate, bonferroni_multiplier, mean_estimate


class PPhiTestCase(SimpleTestCase):
    """Base class for the toolkit's tests: fixtures and statistical assertions."""

    def geometry(self, n: int = 8, mass2: float = 1.0) -> LatticeGeometry:
        return LatticeGeometry(n=n, mass2=mass2)

    def random_field(self, geometry: LatticeGeometry, seed: int = 0, scale: float = 1.0) -> RealField:
        """
        Build a field of i.i.d. Gaussian site values.

        Args:
            geometry: The lattice.
            seed: Seed of the generator.
            scale: Standard deviation of each site value.
        Return:
            The field.
        """
        rng = np.random.default_rng(seed)
        return RealField(geometry, scale * rng.standard_normal(geometry.shape))

    def assertFieldsClose(  # pylint: disable=invalid-name
        self, expected: RealField, actual: RealField, atol: float = 1e-12, rtol: float = 0.0
    ):
        self.assertEqual(expected.geometry, actual.geometry)
        np.testing.assert_allclose(actual.values, expected.values, atol=atol, rtol=rtol)

    def assertWithinStandardErrors(  # pylint: disable=invalid-name,too-many-arguments
        self,
        expected: Union[float, Sequence[float], np.ndarray],
        estimate: Union[Estimate, Sequence[float], np.ndarray],
        stderr: Optional[Union[float, np.ndarray]] = None,
        comparisons: Optional[int] = None,
        relative_allowance: float = 0.0,
    ):
        """
        Assert that Monte-Carlo estimates agree with exact values.

        Args:
            expected: Exact value(s).
            estimate: An Estimate, or raw estimates together with `stderr`.
            stderr: Standard error(s) when `estimate` is not an Estimate.
            comparisons: Size of the family of simultaneous checks; defaults to
                the number of values compared.
            relative_allowance: Extra tolerance, relative to |expected|, for
                known scheme bias.
        """
        if isinstance(estimate, Estimate):
            values = np.array([estimate.value])
            errors = np.array([estimate.stderr])
        else:
            assert stderr is not None
            values = np.atleast_1d(np.asarray(estimate, dtype=np.float64))
            errors = np.broadcast_to(np.asarray(stderr, dtype=np.float64), values.shape)
        exact = np.broadcast_to(np.asarray(expected, dtype=np.float64), values.shape)

        multiplier = bonferroni_multiplier(comparisons or values.size)
        slack = multiplier * errors + relative_allowance * np.abs(exact)
        bad = np.abs(values - exact) > slack
        if np.any(bad):
            index = int(np.flatnonzero(bad)[0])
            self.fail(
                f"{int(bad.sum())} of {values.size} estimates outside {multiplier:.2f} SE; "
                f"first: {values.flat[index]!r} vs {exact.flat[index]!r} "
                f"(se {errors.flat[index]!r})"
            )

    def assertMeanWithinStandardErrors(  # pylint: disable=invalid-name
        self, expected: float, samples: Union[Sequence[float], np.ndarray], **kwargs
    ):
        self.assertWithinStandardErrors(expected, mean_estimate(samples), **kwargs)
