from typing import Protocol

import numpy as np


class Evaluator(Protocol):
    """Anything that maps an (m, d) array of points to an (m,) array of values."""

    def __call__(self, points: np.ndarray) -> np.ndarray:
        ...
