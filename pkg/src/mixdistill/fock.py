"""Multi-photon polarization states over named spatial modes.

A :class:`ModeRegistry` fixes an ordering of ``(spatial, polarization)``
modes.  :class:`FockKet` is an occupation vector in that ordering and
:class:`PureState` is a sparse map from kets to complex amplitudes.
Classical mixtures are kept as weighted lists of pure states
(:class:`MixedEnsemble`) rather than as one global density matrix, so each
branch can be traced and labelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from mixdistill.errors import (
    InvalidDensityError,
    PhotonCollisionError,
    PreconditionError,
    UnknownModeError,
)

DEFAULT_PRUNE_TOLERANCE = 1e-12


class Pol(str, Enum):
    H = "H"
    V = "V"


@dataclass(frozen=True)
class ModeLabel:
    spatial: str
    pol: Pol

    def __post_init__(self):
        object.__setattr__(self, "pol", Pol(self.pol))

    def __str__(self):
        return f"{self.pol.value}@{self.spatial}"


def _as_label(label) -> ModeLabel:
    if isinstance(label, ModeLabel):
        return label
    if isinstance(label, str):
        pol, _, spatial = label.partition("@")
        if not spatial:
            raise UnknownModeError(f"cannot parse mode label {label!r}; expected 'H@a1'")
        return ModeLabel(spatial, Pol(pol))
    spatial, pol = label
    return ModeLabel(spatial, Pol(pol))


class ModeRegistry:
    """Ordered, duplicate-free collection of optical modes.

    Insertion order defines the canonical ordering of occupation vectors.
    """

    __slots__ = ("_labels", "_index")

    def __init__(self, labels: Iterable):
        labels = tuple(_as_label(x) for x in labels)
        index = {}
        for i, label in enumerate(labels):
            if label in index:
                raise ValueError(f"duplicate mode {label}")
            index[label] = i
        self._labels = labels
        self._index = index

    @classmethod
    def from_spatial(cls, spatial: Iterable[str]) -> "ModeRegistry":
        """Registry with an H and a V mode for every spatial label, in order."""
        return cls(ModeLabel(s, p) for s in spatial for p in (Pol.H, Pol.V))

    @property
    def labels(self) -> tuple[ModeLabel, ...]:
        return self._labels

    @property
    def spatial_modes(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(label.spatial for label in self._labels))

    def index(self, label) -> int:
        label = _as_label(label)
        try:
            return self._index[label]
        except KeyError:
            raise UnknownModeError(f"mode {label} is not registered") from None

    def spatial_indices(self, spatial: str) -> tuple[int, ...]:
        idx = tuple(i for i, label in enumerate(self._labels) if label.spatial == spatial)
        if not idx:
            raise UnknownModeError(f"spatial mode {spatial!r} is not registered")
        return idx

    def ket(self, occupations: Mapping | str | None = None) -> "FockKet":
        """Build a ket from ``{label: n}`` or a string like ``"H@a1 V@b1"``.

        Repeated labels in the string form add up, so ``"H@a1 H@a1"`` is two
        photons in one mode.
        """
        occ = [0] * len(self._labels)
        if occupations is None:
            return FockKet(tuple(occ))
        if isinstance(occupations, str):
            items = [(tok, 1) for tok in occupations.split()]
        else:
            items = list(occupations.items())
        for label, n in items:
            if n < 0:
                raise ValueError("occupation numbers must be non-negative")
            occ[self.index(label)] += int(n)
        return FockKet(tuple(occ))

    def vacuum(self) -> "FockKet":
        return FockKet((0,) * len(self._labels))

    def merge(self, other: "ModeRegistry") -> "ModeRegistry":
        shared = set(self._labels) & set(other._labels)
        if shared:
            raise ValueError(f"registries share modes {sorted(map(str, shared))}")
        return ModeRegistry(self._labels + other._labels)

    def describe(self, ket: "FockKet") -> str:
        parts = []
        for label, n in zip(self._labels, ket.occupations):
            if n == 1:
                parts.append(str(label))
            elif n > 1:
                parts.append(f"{n}{label}")
        return " ".join(parts) if parts else "vac"

    def __len__(self):
        return len(self._labels)

    def __iter__(self) -> Iterator[ModeLabel]:
        return iter(self._labels)

    def __contains__(self, label):
        try:
            return _as_label(label) in self._index
        except (ValueError, UnknownModeError, TypeError):
            return False

    def __eq__(self, other):
        return isinstance(other, ModeRegistry) and self._labels == other._labels

    def __hash__(self):
        return hash(self._labels)

    def __repr__(self):
        return f"ModeRegistry([{', '.join(map(str, self._labels))}])"


@dataclass(frozen=True)
class FockKet:
    occupations: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.occupations)

    def __add__(self, other: "FockKet") -> "FockKet":
        return FockKet(tuple(a + b for a, b in zip(self.occupations, other.occupations)))


class PureState:
    """Sparse superposition of Fock kets.

    Instances are immutable.  Amplitudes with modulus below
    ``prune_tolerance`` are dropped at construction.  States are not
    normalized automatically.
    """

    __slots__ = ("_registry", "_amps", "_tol")

    def __init__(
        self,
        registry: ModeRegistry,
        amplitudes: Mapping[FockKet, complex] | None = None,
        prune_tolerance: float = DEFAULT_PRUNE_TOLERANCE,
    ):
        self._registry = registry
        self._tol = prune_tolerance
        amps = {}
        if amplitudes:
            width = len(registry)
            for ket, amp in amplitudes.items():
                if len(ket.occupations) != width:
                    raise UnknownModeError("ket does not match registry width")
                amp = complex(amp)
                if abs(amp) >= prune_tolerance:
                    amps[ket] = amp
        self._amps = amps

    @property
    def registry(self) -> ModeRegistry:
        return self._registry

    @property
    def prune_tolerance(self) -> float:
        return self._tol

    @property
    def amplitudes(self) -> Mapping[FockKet, complex]:
        return MappingProxyType(self._amps)

    def items(self):
        return self._amps.items()

    def amplitude(self, ket: FockKet | str) -> complex:
        if isinstance(ket, str):
            ket = self._registry.ket(ket)
        return self._amps.get(ket, 0j)

    def norm2(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self._amps.values())

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.norm2() - 1.0) <= tol

    def normalized(self) -> "PureState":
        n2 = self.norm2()
        if n2 == 0.0:
            raise PreconditionError("cannot normalize the zero state")
        return self.scaled(1.0 / math.sqrt(n2))

    def scaled(self, factor: complex) -> "PureState":
        return PureState(
            self._registry, {k: a * factor for k, a in self._amps.items()}, self._tol
        )

    def _check_same(self, other: "PureState"):
        if other._registry != self._registry:
            raise UnknownModeError("states live on different mode registries")

    def __add__(self, other: "PureState") -> "PureState":
        self._check_same(other)
        amps = dict(self._amps)
        for k, a in other._amps.items():
            amps[k] = amps.get(k, 0j) + a
        return PureState(self._registry, amps, min(self._tol, other._tol))

    def __sub__(self, other: "PureState") -> "PureState":
        return self + other.scaled(-1.0)

    def __mul__(self, factor: complex) -> "PureState":
        return self.scaled(factor)

    __rmul__ = __mul__

    def __len__(self):
        return len(self._amps)

    def __bool__(self):
        return bool(self._amps)

    def photon_numbers(self) -> set[int]:
        return {k.total for k in self._amps}

    def occupied_modes(self) -> set[int]:
        """Indices of modes holding a photon in at least one ket."""
        out = set()
        for ket in self._amps:
            out.update(i for i, n in enumerate(ket.occupations) if n)
        return out

    def allclose(self, other: "PureState", atol: float = 1e-12) -> bool:
        self._check_same(other)
        keys = set(self._amps) | set(other._amps)
        return all(abs(self.amplitude(k) - other.amplitude(k)) <= atol for k in keys)

    def __repr__(self):
        terms = " + ".join(
            f"({a.real:.6g}{a.imag:+.6g}j)|{self._registry.describe(k)}>"
            for k, a in self._amps.items()
        )
        return f"PureState({terms or '0'})"


def make_pure(
    terms: Iterable[tuple[complex, FockKet | str]],
    registry: ModeRegistry,
    prune_tolerance: float = DEFAULT_PRUNE_TOLERANCE,
) -> PureState:
    """Build a state from ``(amplitude, ket)`` terms, merging duplicate kets.

    Kets may be given as strings (``"H@a1 V@b1"``); unknown labels raise
    :class:`UnknownModeError`.
    """
    amps: dict[FockKet, complex] = {}
    for amp, ket in terms:
        if isinstance(ket, str):
            ket = registry.ket(ket)
        elif len(ket.occupations) != len(registry):
            raise UnknownModeError("ket does not match registry width")
        amps[ket] = amps.get(ket, 0j) + complex(amp)
    return PureState(registry, amps, prune_tolerance)


def vacuum(registry: ModeRegistry) -> PureState:
    return PureState(registry, {registry.vacuum(): 1.0})


def two_photon_state(
    registry: ModeRegistry, mode_a: str, mode_b: str, coeffs: Mapping[str, complex]
) -> PureState:
    """One photon in each of two spatial modes, polarization amplitudes keyed "HH", "HV", ...

    The first letter is the polarization in ``mode_a``.
    """
    terms = []
    for pols, amp in coeffs.items():
        pa, pb = pols
        terms.append((amp, registry.ket(f"{pa}@{mode_a} {pb}@{mode_b}")))
    return make_pure(terms, registry)


def tensor(s1: PureState, s2: PureState) -> PureState:
    """Joint state of two independent subsystems.

    With identical registries the states must occupy disjoint modes; with
    disjoint registries the result lives on the concatenated registry.
    """
    tol = min(s1.prune_tolerance, s2.prune_tolerance)
    if s1.registry == s2.registry:
        if s1.occupied_modes() & s2.occupied_modes():
            raise PhotonCollisionError("states occupy a common mode")
        amps: dict[FockKet, complex] = {}
        for k1, a1 in s1.items():
            for k2, a2 in s2.items():
                k = k1 + k2
                amps[k] = amps.get(k, 0j) + a1 * a2
        return PureState(s1.registry, amps, tol)
    try:
        registry = s1.registry.merge(s2.registry)
    except ValueError as exc:
        raise PhotonCollisionError(str(exc)) from None
    amps = {}
    for k1, a1 in s1.items():
        for k2, a2 in s2.items():
            amps[FockKet(k1.occupations + k2.occupations)] = a1 * a2
    return PureState(registry, amps, tol)


def _fact_sqrt(occ: Sequence[int]) -> float:
    return math.sqrt(math.prod(math.factorial(n) for n in occ))


def create_product(s1: PureState, s2: PureState, bosonic: bool = True) -> PureState:
    """Apply the creation-operator polynomial of ``s1`` to the state ``s2``.

    Unlike :func:`tensor`, photons may land in the same mode.  With
    ``bosonic=True`` kets carry the exact number-state factors
    (``(a†)^n |0> = sqrt(n!) |n>``).  With ``bosonic=False`` a ket's amplitude
    is the bare polynomial coefficient, the convention of writing
    ``|H>_a |H>_a`` without normalization.
    """
    if s1.registry != s2.registry:
        raise UnknownModeError("states live on different mode registries")
    amps: dict[FockKet, complex] = {}
    for k1, a1 in s1.items():
        for k2, a2 in s2.items():
            k = k1 + k2
            amp = a1 * a2
            if bosonic:
                amp *= _fact_sqrt(k.occupations) / (
                    _fact_sqrt(k1.occupations) * _fact_sqrt(k2.occupations)
                )
            amps[k] = amps.get(k, 0j) + amp
    return PureState(s1.registry, amps, min(s1.prune_tolerance, s2.prune_tolerance))


def inner(s1: PureState, s2: PureState) -> complex:
    """<s1|s2>, conjugate-linear in the first argument."""
    if s1.registry != s2.registry:
        raise UnknownModeError("states live on different mode registries")
    small, large = (s1, s2) if len(s1) <= len(s2) else (s2, s1)
    total = 0j
    for k, a in small.items():
        b = large.amplitudes.get(k)
        if b is not None:
            total += (a.conjugate() * b) if small is s1 else (b.conjugate() * a)
    return total


def embed(state: PureState, registry: ModeRegistry, spatial_map: Mapping[str, str]) -> PureState:
    """Move ``state`` onto ``registry``, renaming spatial modes via ``spatial_map``.

    Spatial modes missing from the map keep their name.  Only modes that
    hold a photon need to exist in the target registry.
    """
    targets = []
    occupied = state.occupied_modes()
    for i, label in enumerate(state.registry):
        new = ModeLabel(spatial_map.get(label.spatial, label.spatial), label.pol)
        targets.append(registry.index(new) if i in occupied else None)
    width = len(registry)
    amps: dict[FockKet, complex] = {}
    for ket, amp in state.items():
        occ = [0] * width
        for src, n in enumerate(ket.occupations):
            if n:
                occ[targets[src]] += n
        k = FockKet(tuple(occ))
        amps[k] = amps.get(k, 0j) + amp
    return PureState(registry, amps, state.prune_tolerance)


@dataclass(frozen=True)
class Branch:
    weight: float
    state: PureState
    label: str = ""


@dataclass(frozen=True)
class MixedEnsemble:
    """Weighted list of pure states.

    Weights need not sum to one; :meth:`normalized` rescales them.
    """

    branches: tuple[Branch, ...] = ()

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, PureState]], labels: Sequence[str] = ()):
        pairs = list(pairs)
        labels = list(labels) + [""] * (len(pairs) - len(labels))
        return cls(tuple(Branch(float(w), s, lab) for (w, s), lab in zip(pairs, labels)))

    @property
    def total_weight(self) -> float:
        return math.fsum(b.weight for b in self.branches)

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.total_weight - 1.0) <= tol and all(
            b.state.is_normalized(tol) for b in self.branches
        )

    def normalized(self) -> "MixedEnsemble":
        total = self.total_weight
        if total <= 0:
            raise PreconditionError("cannot normalize an empty ensemble")
        return MixedEnsemble(
            tuple(Branch(b.weight / total, b.state, b.label) for b in self.branches)
        )

    def map_states(self, fn) -> "MixedEnsemble":
        return MixedEnsemble(tuple(Branch(b.weight, fn(b.state), b.label) for b in self.branches))

    def merged(self, tol: float = 1e-10) -> "MixedEnsemble":
        """Combine branches whose states agree up to a global phase."""
        out: list[Branch] = []
        for b in self.branches:
            for i, seen in enumerate(out):
                if (
                    seen.state.registry == b.state.registry
                    and abs(abs(inner(seen.state, b.state)) - 1.0) <= tol
                ):
                    label = seen.label if b.label in seen.label.split(",") else (
                        f"{seen.label},{b.label}" if seen.label else b.label
                    )
                    out[i] = Branch(seen.weight + b.weight, seen.state, label)
                    break
            else:
                out.append(b)
        return MixedEnsemble(tuple(out))

    def __iter__(self) -> Iterator[Branch]:
        return iter(self.branches)

    def __len__(self):
        return len(self.branches)


@dataclass(frozen=True)
class TwoQubitDensity:
    """4x4 density matrix in the (HH, HV, VH, VV) basis of two spatial modes."""

    matrix: np.ndarray
    modes: tuple[str, str] = ("a", "b")
    atol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise InvalidDensityError(f"expected 4x4 matrix, got {m.shape}")
        if not np.allclose(m, m.conj().T, atol=self.atol, rtol=0):
            raise InvalidDensityError("matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > self.atol:
            raise InvalidDensityError(f"trace {np.trace(m).real!r} differs from 1")
        if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -1e-10:
            raise InvalidDensityError("matrix is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


_PAIR_ORDER = ((Pol.H, Pol.H), (Pol.H, Pol.V), (Pol.V, Pol.H), (Pol.V, Pol.V))


def two_qubit_vector(state: PureState, mode_a: str, mode_b: str) -> np.ndarray:
    """Amplitudes of ``state`` in the (HH, HV, VH, VV) basis of two spatial modes.

    Every ket must hold exactly one photon in each mode and none elsewhere.
    """
    reg = state.registry
    ia = {p: reg.index(ModeLabel(mode_a, p)) for p in Pol}
    ib = {p: reg.index(ModeLabel(mode_b, p)) for p in Pol}
    vec = np.zeros(4, dtype=complex)
    for ket, amp in state.items():
        occ = ket.occupations
        if ket.total != 2:
            raise PreconditionError(f"ket |{reg.describe(ket)}> is not a two-photon ket")
        for j, (pa, pb) in enumerate(_PAIR_ORDER):
            if occ[ia[pa]] == 1 and occ[ib[pb]] == 1:
                vec[j] += amp
                break
        else:
            raise PreconditionError(
                f"ket |{reg.describe(ket)}> lacks one photon in each of {mode_a}, {mode_b}"
            )
    return vec


def reduce_two_qubit(ens: MixedEnsemble, mode_a: str, mode_b: str) -> TwoQubitDensity:
    """Polarization density matrix of an ensemble with one photon in each of two modes."""
    rho = np.zeros((4, 4), dtype=complex)
    for i, b in enumerate(ens.branches):
        try:
            v = two_qubit_vector(b.state, mode_a, mode_b)
        except PreconditionError as exc:
            name = b.label or f"#{i}"
            raise PreconditionError(f"branch {name}: {exc}") from None
        rho += b.weight * np.outer(v, v.conj())
    return TwoQubitDensity(rho, (mode_a, mode_b))
