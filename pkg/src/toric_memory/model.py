"""Coupling models for the periodic transverse Ising chain.

A chain is fixed by its bond strengths ``couplings`` (Delta_n, the stabilizer
weights of one toric-code row) and its transverse fields ``fields``
(delta_n, the X perturbation). Site indices are 1-based in every public
function, matching n = 1..N.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

import numpy as np

Distribution = Union[float, tuple[float, float]]


class InvalidModelError(ValueError):
    """Raised for chains that violate N >= 2 or Delta_n > 0."""


def _frozen(values, n_sites: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.shape != (n_sites,):
        raise InvalidModelError(f"{name} must have length {n_sites}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidModelError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CouplingModel:
    n_sites: int
    couplings: np.ndarray
    fields: np.ndarray

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 2:
            raise InvalidModelError(f"need n_sites >= 2, got {self.n_sites}")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        object.__setattr__(self, "couplings", _frozen(self.couplings, self.n_sites, "couplings"))
        object.__setattr__(self, "fields", _frozen(self.fields, self.n_sites, "fields"))
        if np.any(self.couplings <= 0):
            raise InvalidModelError("every coupling must be strictly positive")

    def __eq__(self, other):
        if not isinstance(other, CouplingModel):
            return NotImplemented
        return (
            self.n_sites == other.n_sites
            and np.array_equal(self.couplings, other.couplings)
            and np.array_equal(self.fields, other.fields)
        )

    def __hash__(self):
        return hash((self.n_sites, self.couplings.tobytes(), self.fields.tobytes()))

    @property
    def delta_min(self) -> float:
        return float(self.couplings.min())

    @property
    def field_max(self) -> float:
        """Largest field magnitude, max |delta_n|."""
        return float(np.abs(self.fields).max())

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.couplings == self.couplings[0]) and np.all(self.fields == self.fields[0]))

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "couplings": self.couplings.tolist(),
            "fields": self.fields.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CouplingModel":
        return cls(int(data["n_sites"]), data["couplings"], data["fields"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "CouplingModel":
        return cls.from_dict(json.loads(text))

    def describe(self) -> dict:
        """Compact descriptor used in CSV/JSON provenance."""
        if self.is_uniform:
            return {
                "kind": "uniform",
                "n_sites": self.n_sites,
                "coupling": float(self.couplings[0]),
                "field": float(self.fields[0]),
            }
        return {"kind": "explicit", **self.to_dict()}


def build_uniform(n_sites: int, coupling: float, field: float) -> CouplingModel:
    """Translation-invariant chain with Delta_n = coupling and delta_n = field."""
    if n_sites < 2:
        raise InvalidModelError(f"need n_sites >= 2, got {n_sites}")
    if not coupling > 0:
        raise InvalidModelError(f"coupling must be positive, got {coupling}")
    return CouplingModel(n_sites, np.full(n_sites, float(coupling)), np.full(n_sites, float(field)))


def flip_site(model: CouplingModel, site: int) -> CouplingModel:
    """Return the chain with delta_site negated (conjugation of H_I by Z_site)."""
    if not 1 <= site <= model.n_sites:
        raise IndexError(f"site {site} outside 1..{model.n_sites}")
    fields = model.fields.copy()
    fields[site - 1] = -fields[site - 1]
    return CouplingModel(model.n_sites, model.couplings, fields)


def _check_dist(dist: Distribution, name: str, positive: bool) -> Distribution:
    if isinstance(dist, (int, float, np.floating, np.integer)):
        value = float(dist)
        if positive and not value > 0:
            raise InvalidModelError(f"{name} must be positive, got {value}")
        return value
    lo, hi = (float(x) for x in dist)
    if not lo <= hi:
        raise InvalidModelError(f"{name} interval [{lo}, {hi}] is empty")
    if positive and not lo > 0:
        raise InvalidModelError(f"{name} interval lower bound must be positive, got {lo}")
    return (lo, hi)


@dataclass(frozen=True)
class EnsembleSpec:
    """Disorder ensemble: each distribution is a fixed value or a closed interval."""

    n_sites: int
    coupling: Distribution = 1.0
    field: Distribution = 0.0
    n_instances: int = 1
    master_seed: int = 0

    def __post_init__(self):
        if self.n_sites < 2:
            raise InvalidModelError(f"need n_sites >= 2, got {self.n_sites}")
        if self.n_instances < 1:
            raise InvalidModelError("n_instances must be >= 1")
        if not 0 <= int(self.master_seed) < 2**64:
            raise InvalidModelError("master_seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "coupling", _check_dist(self.coupling, "coupling", True))
        object.__setattr__(self, "field", _check_dist(self.field, "field", False))

    @property
    def is_fixed(self) -> bool:
        return not isinstance(self.coupling, tuple) and not isinstance(self.field, tuple)

    def to_dict(self) -> dict:
        def enc(d):
            return list(d) if isinstance(d, tuple) else d

        return {
            "spec": {
                "n_sites": self.n_sites,
                "coupling": enc(self.coupling),
                "field": enc(self.field),
                "n_instances": self.n_instances,
                "master_seed": int(self.master_seed),
            }
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnsembleSpec":
        spec = data.get("spec", data)

        def dec(d):
            return tuple(d) if isinstance(d, (list, tuple)) else d

        return cls(
            n_sites=int(spec["n_sites"]),
            coupling=dec(spec["coupling"]),
            field=dec(spec["field"]),
            n_instances=int(spec["n_instances"]),
            master_seed=int(spec["master_seed"]),
        )


def instance_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for ensemble member ``index``; order-independent."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))))


def _draw(dist: Distribution, rng: np.random.Generator, n: int) -> np.ndarray:
    if isinstance(dist, tuple):
        return rng.uniform(dist[0], dist[1], size=n)
    return np.full(n, dist)


def sample_instance(spec: EnsembleSpec, index: int) -> CouplingModel:
    rng = instance_rng(spec.master_seed, index)
    couplings = _draw(spec.coupling, rng, spec.n_sites)
    fields = _draw(spec.field, rng, spec.n_sites)
    return CouplingModel(spec.n_sites, couplings, fields)


def sample_ensemble(spec: EnsembleSpec) -> list[CouplingModel]:
    return [sample_instance(spec, k) for k in range(spec.n_instances)]


def as_model(obj: Union[CouplingModel, dict]) -> CouplingModel:
    if isinstance(obj, CouplingModel):
        return obj
    if isinstance(obj, dict):
        return CouplingModel.from_dict(obj)
    raise TypeError(f"cannot interpret {type(obj).__name__} as a CouplingModel")
