"""Linear situation score over the 5x5 factor matrix.

``score = bias + sum_j omega_j * a_j`` with the matrix flattened row-major,
and a least-mean-squares correction of (omega, bias) toward an observed
target.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError

N_ENTRIES = 25


@dataclass(frozen=True, eq=False)
class SituationWeights:
    omega: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        omega = np.array(self.omega, dtype=float).reshape(-1)
        if omega.size != N_ENTRIES:
            raise ShapeError(f"omega needs {N_ENTRIES} entries, got {omega.size}")
        if not np.all(np.isfinite(omega)) or not np.isfinite(self.bias):
            raise DomainError("weights must be finite")
        omega.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "bias", float(self.bias))

    def to_dict(self):
        return {"bias": self.bias, "omega": self.omega.tolist()}

    @classmethod
    def from_dict(cls, obj):
        return cls(obj["omega"], obj["bias"])


def _flat(matrix):
    a = matrix.flat()
    if not np.all(np.isfinite(a)):
        raise DomainError("parameter matrix has non-finite entries")
    return a


def situation_score(matrix, weights):
    return weights.bias + float(np.dot(weights.omega, _flat(matrix)))


def feedback_update(weights, matrix, target, rate):
    """One LMS step on 0.5 * (score - target)**2."""
    if not rate > 0:
        raise DomainError("rate must be > 0")
    a = _flat(matrix)
    r = situation_score(matrix, weights) - target
    if not np.isfinite(r):
        raise DomainError("non-finite residual")
    return SituationWeights(weights.omega - rate * r * a, weights.bias - rate * r)


def stable_rate_bound(matrix):
    """Rates below this make repeated updates contract the residual."""
    a = _flat(matrix)
    return 2.0 / (1.0 + float(np.dot(a, a)))
