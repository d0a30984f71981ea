"""Random-generator plumbing shared by samplers and fitting."""

from __future__ import annotations

import numpy as np


def as_generator(rng) -> tuple[np.random.Generator, int]:
    """Accept an integer seed or a numpy Generator (or anything quacking
    like one: ``standard_normal``/``uniform``/``integers`` suffice).

    Returns the generator plus the seed when one was given (-1 when the
    caller passed an already-running generator, whose origin is unknown).
    """
    if isinstance(rng, (int, np.integer)):
        return np.random.default_rng(int(rng)), int(rng)
    if isinstance(rng, np.random.Generator) or hasattr(rng, "standard_normal"):
        return rng, -1
    raise TypeError(f"rng must be an int seed or numpy Generator, got {type(rng)!r}")
