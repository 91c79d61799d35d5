"""Channel-parameter layout: the ordered vector eta and its named index map.

Path 0 is the LOS path and paths 1..M1 are the RIS paths. Each path block lists
its geometric parameters first and its nuisance parameters last. The UE
orientation appears in every block as a per-path copy. At the location level
the copies are summed back into the single physical orientation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "LOS_GEOMETRIC",
    "RIS_GEOMETRIC",
    "NUISANCE",
    "ParamIndex",
    "ParamVector",
    "channel_layout",
    "select",
    "ris_orientation",
    "ue_orientation",
]

UE_ORIENTATION = ("ue_yaw", "ue_pitch", "ue_roll")
RIS_ORIENTATION = ("ris_yaw", "ris_pitch", "ris_roll")

LOS_GEOMETRIC = ("theta_bu", "phi_bu", "tau_bu") + UE_ORIENTATION
RIS_GEOMETRIC = (
    "theta_ru", "phi_ru", "theta_br", "phi_br", "tau_ru", "tau_br",
) + RIS_ORIENTATION + UE_ORIENTATION
NUISANCE = ("eps", "beta_re", "beta_im")

ANGLE_NAMES = frozenset(
    ("theta_bu", "phi_bu", "theta_ru", "phi_ru", "theta_br", "phi_br")
    + UE_ORIENTATION + RIS_ORIENTATION
)
DELAY_NAMES = frozenset(("tau_bu", "tau_ru", "tau_br", "eps"))


class ParamIndex(NamedTuple):
    """One entry of eta: path id, parameter name and flat offset."""

    path: int
    name: str
    offset: int = -1

    @property
    def key(self) -> tuple[int, str]:
        return (self.path, self.name)

    @property
    def is_geometric(self) -> bool:
        return self.name not in NUISANCE

    def __str__(self):
        return f"{self.name}[{self.path}]"


def _names_for(path: int) -> tuple[str, ...]:
    return (LOS_GEOMETRIC if path == 0 else RIS_GEOMETRIC) + NUISANCE


def channel_layout(n_ris: int, include_los: bool = True) -> list[ParamIndex]:
    """Full parameter layout: LOS block then one block per RIS."""
    paths = ([0] if include_los else []) + list(range(1, n_ris + 1))
    out = []
    for m in paths:
        for name in _names_for(m):
            out.append(ParamIndex(m, name, len(out)))
    return out


def _key(p) -> tuple[int, str]:
    if isinstance(p, ParamIndex):
        return p.key
    m, name = p
    return int(m), str(name)


def select(layout: Sequence[ParamIndex], keys: Iterable) -> list[ParamIndex]:
    """Re-index a subset of ``layout`` given (path, name) keys, keeping key order."""
    known = {p.key for p in layout}
    out = []
    for k in keys:
        k = _key(k)
        if k not in known:
            raise KeyError(f"parameter {k[1]}[{k[0]}] not in layout")
        out.append(ParamIndex(k[0], k[1], len(out)))
    return out


def ris_orientation(m: int) -> list[tuple[int, str]]:
    return [(m, n) for n in RIS_ORIENTATION]


def ue_orientation(m: int) -> list[tuple[int, str]]:
    return [(m, n) for n in UE_ORIENTATION]


@dataclass
class ParamVector:
    """Values of eta with their index map."""

    index: list[ParamIndex]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).copy()
        if self.values.shape != (len(self.index),):
            raise ValueError("values and index lengths differ")
        self._pos = {p.key: i for i, p in enumerate(self.index)}

    def __len__(self):
        return len(self.index)

    def __getitem__(self, key) -> float:
        return float(self.values[self._pos[_key(key)]])

    def __contains__(self, key) -> bool:
        return _key(key) in self._pos

    def position(self, key) -> int:
        return self._pos[_key(key)]

    def with_value(self, key, value: float) -> "ParamVector":
        v = self.values.copy()
        v[self._pos[_key(key)]] = value
        return ParamVector(list(self.index), v)

    def block(self, path: int) -> dict[str, float]:
        return {p.name: float(self.values[i]) for i, p in enumerate(self.index) if p.path == path}

    def paths(self) -> list[int]:
        seen = []
        for p in self.index:
            if p.path not in seen:
                seen.append(p.path)
        return seen

    def copy(self) -> "ParamVector":
        return ParamVector(list(self.index), self.values.copy())
