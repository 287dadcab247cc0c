"""SINR computation and the SINR -> packet-success-probability maps.

The receiver sees signal power ``P * d**(-alpha)`` over great-circle
distance ``d``, and interference summed over every concurrently
transmitting node network-wide.  Success-probability models are
pure maps from SINR to ``[0, 1]``; the continuous variants are
nondecreasing and approach one as SINR grows, while ``threshold`` and
``constant_p`` are the two discontinuous baseline variants kept for
reference comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from . import geometry
from .errors import ConfigurationError, GeometryError


@dataclass(frozen=True)
class RadioParams:
    tx_power: float = 1.0
    noise: float = 1e-9
    alpha: float = 3.0

    def __post_init__(self):
        if self.tx_power <= 0:
            raise ConfigurationError("tx_power must be positive")
        if self.noise < 0:
            raise ConfigurationError("noise must be nonnegative")
        if self.alpha <= 2:
            raise ConfigurationError("path-loss exponent must exceed 2")


def path_gain(distance, alpha: float):
    """Propagation gain ``d**(-alpha)`` for surface distance ``d``."""
    return np.asarray(distance, dtype=float) ** (-alpha)


def sinr(receiver, transmitter, interferers, radio: RadioParams) -> float:
    """SINR at ``receiver`` for a transmission from ``transmitter``.

    ``interferers`` are the positions of all other nodes transmitting in the
    same slot; the sum is taken network-wide with no range truncation.
    """
    d_tr = geometry.surface_distance(transmitter, receiver)
    if d_tr <= 0.0:
        raise GeometryError("transmitter and receiver are co-located")
    signal = radio.tx_power * float(path_gain(d_tr, radio.alpha))
    interferers = np.asarray(list(interferers), dtype=float)
    interference = 0.0
    if interferers.size:
        d = geometry.surface_distance(interferers.reshape(-1, 3), receiver)
        interference = radio.tx_power * float(path_gain(d, radio.alpha).sum())
    return signal / (radio.noise + interference)


@dataclass(frozen=True)
class ThresholdModel:
    """All-or-nothing reception at a fixed SINR threshold.

    Discontinuous by design: this is the idealized baseline in which a
    scheduled transmission either meets the threshold and always succeeds
    or always fails.
    """

    beta: float = 10.0
    continuous = False

    def success(self, gamma: float) -> float:
        return 1.0 if gamma >= self.beta else 0.0


@dataclass(frozen=True)
class ConstantPModel:
    """Every transmission succeeds with a fixed probability ``p``.

    The SINR-independent lossy baseline; discontinuous at infinity by
    design (it never approaches one).
    """

    p: float = 0.9
    continuous = False

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ConfigurationError("p must lie in (0, 1)")

    def success(self, gamma: float) -> float:
        return self.p


@dataclass(frozen=True)
class BpskPacketModel:
    """Packet success of ``bits`` independent BPSK symbols: ``(1 - erfc(sqrt(g))/2)**bits``."""

    bits: int = 256
    continuous = True

    def __post_init__(self):
        if self.bits < 1:
            raise ConfigurationError("bits must be at least 1")

    def success(self, gamma: float) -> float:
        if gamma <= 0.0:
            return 0.5**self.bits
        return (1.0 - 0.5 * math.erfc(math.sqrt(gamma))) ** self.bits


@dataclass(frozen=True)
class LogisticModel:
    """Logistic success curve in dB: ``1/(1 + exp(-a*(10*log10(g) - midpoint_db)))``."""

    a: float = 1.0
    midpoint_db: float = 10.0
    continuous = True

    def __post_init__(self):
        if self.a <= 0:
            raise ConfigurationError("slope a must be positive")

    def success(self, gamma: float) -> float:
        if gamma <= 0.0:
            return 0.0
        x = self.a * (10.0 * math.log10(gamma) - self.midpoint_db)
        if x >= 0:
            return 1.0 / (1.0 + math.exp(-x))
        e = math.exp(x)
        return e / (1.0 + e)


LinkModel = Union[ThresholdModel, ConstantPModel, BpskPacketModel, LogisticModel]

_MODEL_NAMES = {
    "threshold": ThresholdModel,
    "constant_p": ConstantPModel,
    "bpsk_packet": BpskPacketModel,
    "logistic": LogisticModel,
}


def make_link_model(name: str, **params) -> LinkModel:
    """Build a link model from its config name and per-variant parameters."""
    try:
        cls = _MODEL_NAMES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown link model {name!r}; expected one of {sorted(_MODEL_NAMES)}"
        ) from None
    if name == "bpsk_packet" and "bits" in params:
        params = {**params, "bits": int(params["bits"])}
    return cls(**params)


def filter_model_params(name: str, params: dict) -> dict:
    """Keep the parameters the chosen variant accepts.

    Config sections carry defaults for every variant; keys belonging to a
    different variant are dropped, keys unknown to all variants are an error.
    """
    import dataclasses

    if name not in _MODEL_NAMES:
        raise ConfigurationError(f"unknown link model {name!r}")
    all_fields = {
        f.name for cls in _MODEL_NAMES.values() for f in dataclasses.fields(cls)
    }
    own_fields = {f.name for f in dataclasses.fields(_MODEL_NAMES[name])}
    unknown = set(params) - all_fields
    if unknown:
        raise ConfigurationError(f"unknown link model parameters: {sorted(unknown)}")
    return {k: v for k, v in params.items() if k in own_fields}


def success_probability(gamma: float, model: LinkModel) -> float:
    if gamma < 0:
        raise ConfigurationError("SINR must be nonnegative")
    return model.success(gamma)


def hop_success_with_retries(
    gamma_sequence: Iterable[float], model: LinkModel, attempts: int
) -> float:
    """Probability the hop succeeds within ``attempts`` tries.

    Per-attempt SINRs come from ``gamma_sequence``; if it is shorter than the
    attempt budget the last value repeats.  For a constant per-attempt success
    probability ``p`` this is ``1 - (1-p)**attempts``, and for a single
    attempt it reduces to ``phi(gamma_1)``.
    """
    if attempts < 1:
        raise ConfigurationError("attempt budget must be at least 1")
    gammas = list(gamma_sequence)
    if not gammas:
        raise ConfigurationError("need at least one per-attempt SINR")
    fail = 1.0
    for k in range(attempts):
        g = gammas[k] if k < len(gammas) else gammas[-1]
        fail *= 1.0 - success_probability(g, model)
    return 1.0 - fail
