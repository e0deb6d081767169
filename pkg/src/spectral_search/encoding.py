"""Log-linear binary encoding of numerical hyperparameters.

A numeric category with ``a`` exponent bits and ``b`` mantissa bits encodes
``value = 10**e * mantissa`` where ``e = offset + int(exponent bits)`` and the
mantissa bits index a table of ``2**b`` values.  Bits are read most
significant first with -1 -> 0 and +1 -> 1.

For group-sparse recovery every category contributes an exponent group and a
mantissa group; a monomial belongs to the group named by the set of base
groups its variables touch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .fourier import BasisFamily, as_point
from .recovery import GroupStructure


def bits_to_int(bits) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | (1 if b > 0 else 0)
    return v


def int_to_bits(v: int, width: int) -> np.ndarray:
    if not 0 <= v < 2**width:
        raise ValueError(f"{v} does not fit in {width} bits")
    return np.array([1 if (v >> (width - 1 - j)) & 1 else -1 for j in range(width)], dtype=np.int8)


def default_mantissas(b: int) -> tuple:
    """``2**b`` values evenly spaced on [1, 10), so each exponent spans one decade."""
    k = 2**b
    return tuple(1.0 + 9.0 * j / k for j in range(k))


@dataclass(frozen=True)
class Category:
    """One hyperparameter.

    ``kind="numeric"`` uses the log-linear layout; ``kind="bits"`` is a raw
    block of ``exponent_bits`` bits (categorical switches) decoded to its
    integer value and forming a single group.
    """

    name: str
    exponent_bits: int
    exponent_offset: int = 0
    mantissas: tuple = (1.0,)
    kind: str = "numeric"

    def __post_init__(self):
        if self.kind not in ("numeric", "bits"):
            raise ValueError(f"unknown category kind {self.kind!r}")
        if self.exponent_bits < 0:
            raise ValueError(f"{self.name}: exponent_bits must be >= 0")
        m = tuple(float(v) for v in self.mantissas)
        if self.kind == "bits":
            m = (1.0,)
        size = len(m)
        if size < 1 or size & (size - 1):
            raise ValueError(f"{self.name}: mantissa table size must be a power of two, got {size}")
        if len(set(m)) != size or any(v <= 0 for v in m):
            raise ValueError(f"{self.name}: mantissas must be distinct and positive")
        object.__setattr__(self, "mantissas", m)

    @property
    def mantissa_bits(self) -> int:
        return len(self.mantissas).bit_length() - 1

    @property
    def width(self) -> int:
        return self.exponent_bits + self.mantissa_bits

    @property
    def exponent_range(self) -> tuple:
        return self.exponent_offset, self.exponent_offset + 2**self.exponent_bits - 1

    def decode(self, bits) -> float:
        e_bits, m_bits = bits[: self.exponent_bits], bits[self.exponent_bits:]
        if self.kind == "bits":
            return float(bits_to_int(e_bits))
        e = self.exponent_offset + bits_to_int(e_bits)
        return 10.0**e * self.mantissas[bits_to_int(m_bits)]

    def encode(self, value: float, rel_tol: float = 1e-12) -> np.ndarray:
        if self.kind == "bits":
            v = int(round(value))
            if v != value:
                raise ValueError(f"{self.name}: {value} is not an integer")
            return int_to_bits(v, self.exponent_bits)
        lo, hi = self.exponent_range
        for e in range(lo, hi + 1):
            for j, mant in enumerate(self.mantissas):
                if math.isclose(10.0**e * mant, value, rel_tol=rel_tol):
                    return np.concatenate([
                        int_to_bits(e - lo, self.exponent_bits),
                        int_to_bits(j, self.mantissa_bits),
                    ])
        raise ValueError(f"{self.name}: {value} is not representable")


@dataclass(frozen=True)
class HyperparamSpace:
    categories: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        names = [c.name for c in self.categories]
        if len(set(names)) != len(names):
            raise ValueError("category names must be unique")

    @property
    def n(self) -> int:
        return sum(c.width for c in self.categories)

    @property
    def k(self) -> int:
        return len(self.categories)

    def slices(self) -> list:
        out, start = [], 0
        for c in self.categories:
            out.append(slice(start, start + c.width))
            start += c.width
        return out

    def base_groups(self) -> list:
        """``(label, bit indices)`` for every base group, empty groups included.

        Numeric categories give ``g:<name>`` (exponent) and ``h:<name>``
        (mantissa); raw-bit categories give a single ``b:<name>``.
        """
        out = []
        for c, sl in zip(self.categories, self.slices()):
            bits = list(range(sl.start, sl.stop))
            if c.kind == "bits":
                out.append((f"b:{c.name}", bits))
            else:
                out.append((f"g:{c.name}", bits[: c.exponent_bits]))
                out.append((f"h:{c.name}", bits[c.exponent_bits:]))
        return out

    def exponent_bits(self, name: str) -> list:
        return dict(self.base_groups())[f"g:{name}"]

    def gamma(self, d: int) -> int:
        """Number of possible non-constant groups for a degree-d basis."""
        G = len(self.base_groups())
        return sum(math.comb(G, i) for i in range(1, d + 1))

    def decode(self, alpha) -> list:
        a = as_point(alpha, self.n)
        return [c.decode(a[sl]) for c, sl in zip(self.categories, self.slices())]

    def decode_dict(self, alpha) -> dict:
        return dict(zip((c.name for c in self.categories), self.decode(alpha)))

    def encode(self, values: Sequence[float]) -> np.ndarray:
        if len(values) != self.k:
            raise ValueError(f"expected {self.k} values, got {len(values)}")
        return np.concatenate([c.encode(v) for c, v in zip(self.categories, values)]).astype(np.int8)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return (2 * rng.integers(0, 2, size=(count, self.n)) - 1).astype(np.int8)

    @classmethod
    def from_config(cls, spec) -> "HyperparamSpace":
        """Build from a list of mappings.

        Each entry has ``name``, ``exponent_bits`` and optionally
        ``exponent_offset``, ``mantissas`` (explicit table), ``mantissa_bits``
        (evenly spaced default table) and ``kind``.
        """
        cats = []
        for i, entry in enumerate(spec):
            if "name" not in entry:
                raise ValueError(f"category {i}: missing field 'name'")
            if "exponent_bits" not in entry:
                raise ValueError(f"category {entry['name']}: missing field 'exponent_bits'")
            if "mantissas" in entry:
                mant = tuple(entry["mantissas"])
            else:
                mant = default_mantissas(int(entry.get("mantissa_bits", 0)))
            cats.append(Category(
                name=str(entry["name"]),
                exponent_bits=int(entry["exponent_bits"]),
                exponent_offset=int(entry.get("exponent_offset", 0)),
                mantissas=mant,
                kind=entry.get("kind", "numeric"),
            ))
        return cls(tuple(cats))

    def to_config(self) -> list:
        return [
            {"name": c.name, "kind": c.kind, "exponent_bits": c.exponent_bits,
             "exponent_offset": c.exponent_offset, "mantissas": list(c.mantissas)}
            for c in self.categories
        ]


def group_columns(space: HyperparamSpace, basis: BasisFamily) -> GroupStructure:
    """Group basis columns by the set of base groups each monomial touches.

    The constant column gets its own weight-0 group so the intercept is never
    penalized; other groups use ``sqrt(size)``.  Only non-empty groups are
    returned, in the canonical order of their base-group combinations.
    """
    if basis.n != space.n:
        raise ValueError(f"basis has n={basis.n}, space has n={space.n}")
    base = space.base_groups()
    owner = {}
    for g, (_, bits) in enumerate(base):
        for b in bits:
            owner[b] = g
    members: dict = {}
    for k, S in enumerate(basis.indices):
        key = tuple(sorted({owner[i] for i in S}))
        members.setdefault(key, []).append(k)
    order = [()] + [c for i in range(1, basis.d + 1) for c in combinations(range(len(base)), i)]
    keys = [key for key in order if key in members]
    labels = tuple("const" if not key else "+".join(base[g][0] for g in key) for key in keys)
    groups = tuple(members[key] for key in keys)
    weights = [0.0 if not key else math.sqrt(len(members[key])) for key in keys]
    return GroupStructure(groups, weights, labels)
