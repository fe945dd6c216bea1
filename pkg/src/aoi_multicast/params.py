"""System configuration shared by every other module.

A system instance is one server multicasting timestamped status updates to
``n_devices`` receivers. Per-device delivery times are i.i.d. shifted
exponential with rate ``rate`` and deterministic floor ``shift``. An update is
served once ``k_quorum`` devices have received it, and dropped if the hard
deadline ``deadline`` expires first. ``deadline = math.inf`` selects the
no-deadline variant and is a first-class value, not a sentinel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class ParamError(ValueError):
    """Base class for invalid system configurations."""


class QuorumOutOfRange(ParamError):
    pass


class NonPositiveRate(ParamError):
    pass


class NonPositiveShift(ParamError):
    pass


class DeadlineNotAboveShift(ParamError):
    pass


@dataclass(frozen=True)
class SystemParams:
    """Validated (N, K, rate, shift, deadline) tuple.

    Immutable after construction; safe to share across threads. All times are
    in one implicit unit.
    """

    n_devices: int
    k_quorum: int
    rate: float
    shift: float
    deadline: float

    def __post_init__(self):
        if not (isinstance(self.n_devices, int) and self.n_devices >= 1):
            raise QuorumOutOfRange(f"n_devices must be a positive integer, got {self.n_devices!r}")
        if not (isinstance(self.k_quorum, int) and 1 <= self.k_quorum <= self.n_devices):
            raise QuorumOutOfRange(
                f"k_quorum must satisfy 1 <= K <= N, got K={self.k_quorum!r} with N={self.n_devices}"
            )
        if not (isinstance(self.rate, (int, float)) and math.isfinite(self.rate) and self.rate > 0):
            raise NonPositiveRate(f"rate must be a positive finite real, got {self.rate!r}")
        if not (isinstance(self.shift, (int, float)) and math.isfinite(self.shift) and self.shift > 0):
            raise NonPositiveShift(f"shift must be a positive finite real, got {self.shift!r}")
        if math.isnan(self.deadline) or self.deadline <= 0:
            raise DeadlineNotAboveShift(f"deadline must be positive, got {self.deadline!r}")
        # A finite deadline at or below the floor makes every reception
        # impossible (success probability exactly zero), and every downstream
        # quotient divides by that probability. Reject instead of returning
        # an infinite age.
        if math.isfinite(self.deadline) and self.deadline <= self.shift:
            raise DeadlineNotAboveShift(
                f"finite deadline ({self.deadline}) must exceed shift ({self.shift})"
            )
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "shift", float(self.shift))
        object.__setattr__(self, "deadline", float(self.deadline))

    @property
    def no_deadline(self) -> bool:
        return math.isinf(self.deadline)


def validate(n_devices, k_quorum, rate, shift, deadline) -> SystemParams:
    """Build a SystemParams from raw values, raising a ParamError subclass on
    any invariant violation. Idempotent on already-valid tuples."""
    if isinstance(n_devices, bool) or isinstance(k_quorum, bool):
        raise QuorumOutOfRange("n_devices and k_quorum must be integers, not booleans")
    try:
        n = int(n_devices)
        k = int(k_quorum)
    except (TypeError, ValueError) as exc:
        raise QuorumOutOfRange(f"n_devices/k_quorum not integral: {exc}") from exc
    if n != n_devices or k != k_quorum:
        raise QuorumOutOfRange(f"n_devices/k_quorum must be integral, got {n_devices!r}, {k_quorum!r}")
    return SystemParams(n, k, float(rate), float(shift), float(deadline))
