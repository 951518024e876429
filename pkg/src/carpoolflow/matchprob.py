"""Door-to-door match probability under a uniform sub-cube model.

Space-time is partitioned into n sub-cubes; a driver and a passenger each
draw an origin and a destination sub-cube independently and uniformly. They
match door-to-door when both coordinates coincide. The closed form is
1/n^2 by independence; the Monte Carlo estimator exists to mirror the
operational re-sampling approach and is validated against the closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_SAMPLE_COUNT = 1000


@dataclass(frozen=True)
class SubCubeModel:
    """Uniform origin/destination model over ``n`` sub-cubes."""

    n: int
    sample_count: int = DEFAULT_SAMPLE_COUNT
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"need at least one sub-cube, got {self.n}")
        if self.sample_count < 1:
            raise ValueError(f"need at least one sample, got {self.sample_count}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")


def _generator(seed: int) -> np.random.Generator:
    # Philox: a counter-based generator with a published algorithm, so the
    # same seed reproduces the same stream bit-for-bit everywhere
    return np.random.Generator(np.random.Philox(key=seed))


def match_probability_mc(model: SubCubeModel) -> float:
    """Monte Carlo estimate of the door-to-door match probability.

    Draws ``sample_count`` independent (driver origin, passenger origin,
    driver destination, passenger destination) quadruples uniform on
    {1..n} and returns the fraction where both pairs coincide.
    Deterministic for a fixed seed.
    """
    rng = _generator(model.seed)
    draws = rng.integers(1, model.n + 1, size=(model.sample_count, 4))
    hits = (draws[:, 0] == draws[:, 1]) & (draws[:, 2] == draws[:, 3])
    return float(hits.mean())


def match_probability_exact(n: int) -> float:
    """Exact match probability: origin and destination coincide independently."""
    if n < 1:
        raise ValueError(f"need at least one sub-cube, got {n}")
    return 1.0 / (n * n)
