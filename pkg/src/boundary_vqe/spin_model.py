"""Pauli-string observables for the open Ising chain with boundary fields.

Sites are 1-based everywhere in the public API. The Hamiltonian is

    H = -J sum_i Z_i Z_{i+1} - h_x sum_i X_i + h_l Z_1 + h_r Z_L

with open boundaries.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

PAULI_KINDS = ("X", "Y", "Z")


class InvalidSizeError(ValueError):
    pass


@dataclass(frozen=True)
class IsingChainSpec:
    """Physical parameters of the boundary-field Ising chain."""

    L: int
    J: float = 1.0
    h_x: float = 0.5
    h_l: float = 0.0
    h_r: float = 0.0

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise InvalidSizeError(f"chain needs L >= 2, got {self.L}")
        if not self.J > 0:
            raise ValueError(f"coupling J must be positive, got {self.J}")

    @property
    def physical_regime(self) -> bool:
        """0 < h_x < 1 with anti-parallel boundary fields."""
        return 0.0 < self.h_x < 1.0 and self.h_l * self.h_r < 0.0

    @property
    def critical_field(self) -> float:
        return math.sqrt(1.0 - self.h_x) if self.h_x <= 1.0 else float("nan")

    def with_fields(self, h_l: float, h_r: float) -> "IsingChainSpec":
        return IsingChainSpec(self.L, self.J, self.h_x, h_l, h_r)

    def to_dict(self) -> dict:
        return {"L": self.L, "J": self.J, "h_x": self.h_x, "h_l": self.h_l, "h_r": self.h_r}


@dataclass(frozen=True)
class PauliString:
    """coefficient * prod_site P_site, stored as sorted ``(site, kind)`` pairs."""

    coefficient: float
    factors: tuple[tuple[int, str], ...]
    length: int

    def __post_init__(self):
        seen = set()
        for site, kind in self.factors:
            if not 1 <= site <= self.length:
                raise IndexError(f"site {site} outside [1, {self.length}]")
            if kind not in PAULI_KINDS:
                raise ValueError(f"unknown Pauli kind {kind!r}")
            if site in seen:
                raise ValueError(f"site {site} appears twice")
            seen.add(site)
        object.__setattr__(self, "factors", tuple(sorted(self.factors)))
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @classmethod
    def from_map(cls, coefficient: float, factors: Mapping[int, str], length: int) -> "PauliString":
        return cls(coefficient, tuple(factors.items()), length)

    @property
    def kinds(self) -> set[str]:
        return {k for _, k in self.factors}

    @property
    def is_identity(self) -> bool:
        return not self.factors

    def label(self) -> str:
        return "".join(f"{k}{s}" for s, k in self.factors) or "I"


@dataclass(frozen=True)
class Observable:
    """Real-weighted sum of Pauli strings plus a constant offset.

    Duplicate factor maps are merged and zero coefficients dropped at
    construction, so two equal operators always have the same terms.
    """

    terms: tuple[PauliString, ...]
    length: int
    constant_offset: float = 0.0

    def __init__(self, terms: Iterable[PauliString], length: int, constant_offset: float = 0.0):
        merged: dict[tuple, float] = {}
        offset = float(constant_offset)
        for term in terms:
            if term.length != length:
                raise ValueError(f"term length {term.length} != observable length {length}")
            if term.is_identity:
                offset += term.coefficient
                continue
            merged[term.factors] = merged.get(term.factors, 0.0) + term.coefficient
        kept = tuple(
            PauliString(c, f, length) for f, c in merged.items() if c != 0.0
        )
        object.__setattr__(self, "terms", kept)
        object.__setattr__(self, "length", int(length))
        object.__setattr__(self, "constant_offset", offset)

    def __len__(self) -> int:
        return len(self.terms)

    def __add__(self, other: "Observable") -> "Observable":
        if not isinstance(other, Observable):
            return NotImplemented
        if other.length != self.length:
            raise ValueError(f"cannot combine observables on {self.length} and {other.length} sites")
        return Observable(self.terms + other.terms, self.length,
                          self.constant_offset + other.constant_offset)

    def __mul__(self, scalar: float) -> "Observable":
        return Observable(
            [PauliString(t.coefficient * scalar, t.factors, self.length) for t in self.terms],
            self.length,
            self.constant_offset * scalar,
        )

    __rmul__ = __mul__

    def coefficient_of(self, factors: Mapping[int, str]) -> float:
        key = tuple(sorted(factors.items()))
        for t in self.terms:
            if t.factors == key:
                return t.coefficient
        return 0.0

    @property
    def one_norm(self) -> float:
        """Sum of |coefficient| over non-identity terms."""
        return sum(abs(t.coefficient) for t in self.terms)

    def grouped(self) -> dict[str, list[PauliString]]:
        """Split terms into an all-Z group and an all-X group.

        Raises ValueError if a term mixes kinds or contains Y.
        """
        groups: dict[str, list[PauliString]] = {"Z": [], "X": []}
        for t in self.terms:
            kinds = t.kinds
            if kinds == {"Z"}:
                groups["Z"].append(t)
            elif kinds == {"X"}:
                groups["X"].append(t)
            else:
                raise UnsupportedGroupingError(f"term {t.label()} is neither all-Z nor all-X")
        return groups

    def to_json_dict(self) -> dict:
        return {
            "length": self.length,
            "offset": self.constant_offset,
            "terms": [
                {"coefficient": t.coefficient, "factors": [[s, k] for s, k in t.factors]}
                for t in self.terms
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_dict(), **kwargs)

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Observable":
        length = int(data["length"])
        terms = [
            PauliString(t["coefficient"], tuple((int(s), str(k)) for s, k in t["factors"]), length)
            for t in data["terms"]
        ]
        return cls(terms, length, float(data.get("offset", 0.0)))

    @classmethod
    def from_json(cls, text: str) -> "Observable":
        return cls.from_json_dict(json.loads(text))


class UnsupportedGroupingError(ValueError):
    pass


def build_hamiltonian(spec: IsingChainSpec) -> Observable:
    L = spec.L
    terms = [PauliString(-spec.J, ((i, "Z"), (i + 1, "Z")), L) for i in range(1, L)]
    terms += [PauliString(-spec.h_x, ((i, "X"),), L) for i in range(1, L + 1)]
    terms.append(PauliString(spec.h_l, ((1, "Z"),), L))
    terms.append(PauliString(spec.h_r, ((L, "Z"),), L))
    return Observable(terms, L)


def build_kink_operator(L: int) -> Observable:
    """Domain-wall counter (1/2) sum_i (1 - Z_i Z_{i+1})."""
    if L < 2:
        raise InvalidSizeError(f"kink operator needs L >= 2, got {L}")
    terms = [PauliString(-0.5, ((i, "Z"), (i + 1, "Z")), L) for i in range(1, L)]
    return Observable(terms, L, 0.5 * (L - 1))


def build_local_magnetization(i: int, L: int) -> Observable:
    if not 1 <= i <= L:
        raise IndexError(f"site {i} outside [1, {L}]")
    return Observable([PauliString(1.0, ((i, "Z"),), L)], L)
