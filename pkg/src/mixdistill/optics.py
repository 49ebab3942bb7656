"""Passive linear-optical elements acting on Fock states.

An element maps each input creation operator to a linear combination of
output creation operators, ``a†_j -> sum_i U[i, j] a†_i``, over the modes it
lists.  Modes not listed are untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from mixdistill.errors import NonUnitaryError, UnknownModeError
from mixdistill.fock import FockKet, ModeLabel, Pol, PureState, _as_label

_UNITARY_ATOL = 1e-12


@dataclass(frozen=True)
class LinearElement:
    modes: tuple[ModeLabel, ...]
    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        modes = tuple(_as_label(m) for m in self.modes)
        if len(set(modes)) != len(modes):
            raise ValueError("element lists a mode twice")
        u = np.array(self.matrix, dtype=complex)
        if u.shape != (len(modes), len(modes)):
            raise ValueError(f"matrix shape {u.shape} does not match {len(modes)} modes")
        if not np.allclose(u.conj().T @ u, np.eye(len(modes)), atol=_UNITARY_ATOL, rtol=0):
            raise NonUnitaryError(f"matrix of element {self.name or '?'} is not unitary")
        u.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "matrix", u)

    def then(self, other: "LinearElement") -> "LinearElement":
        """Compose two elements on the same mode list: ``self`` first."""
        if other.modes != self.modes:
            raise ValueError("composition needs identical mode lists")
        return LinearElement(self.modes, other.matrix @ self.matrix, f"{self.name};{other.name}")


def pbs(in1: str, in2: str, out_keep: str, out_cross: str) -> LinearElement:
    """Polarizing beam splitter with a fixed routing convention.

    H from ``in1`` and V from ``in2`` leave through ``out_cross``; V from
    ``in1`` and H from ``in2`` leave through ``out_keep``.  All coefficients
    are +1.  The map is written as a permutation over the eight modes, so
    it is its own inverse.
    """
    names = (in1, in2, out_keep, out_cross)
    if len(set(names)) != 4:
        raise ValueError(f"PBS needs four distinct spatial labels, got {names}")
    H, V = Pol.H, Pol.V
    modes = [ModeLabel(s, p) for s in names for p in (H, V)]
    pairs = [
        (ModeLabel(in1, H), ModeLabel(out_cross, H)),
        (ModeLabel(in1, V), ModeLabel(out_keep, V)),
        (ModeLabel(in2, H), ModeLabel(out_keep, H)),
        (ModeLabel(in2, V), ModeLabel(out_cross, V)),
    ]
    pos = {m: i for i, m in enumerate(modes)}
    u = np.zeros((8, 8))
    for a, b in pairs:
        u[pos[b], pos[a]] = 1.0
        u[pos[a], pos[b]] = 1.0
    return LinearElement(tuple(modes), u, f"PBS({in1},{in2}->{out_keep},{out_cross})")


def _polarization_element(spatial: str, u, name: str) -> LinearElement:
    return LinearElement((ModeLabel(spatial, Pol.H), ModeLabel(spatial, Pol.V)), u, name)


def hwp_flip(spatial: str) -> LinearElement:
    """Bit flip H <-> V on one spatial mode."""
    return _polarization_element(spatial, [[0, 1], [1, 0]], f"X({spatial})")


def hadamard_wp(spatial: str) -> LinearElement:
    """H -> (H+V)/sqrt2, V -> (H-V)/sqrt2 on one spatial mode."""
    s = 1 / math.sqrt(2)
    return _polarization_element(spatial, [[s, s], [s, -s]], f"Had({spatial})")


def phase_flip(spatial: str) -> LinearElement:
    """V -> -V on one spatial mode."""
    return _polarization_element(spatial, [[1, 0], [0, -1]], f"Z({spatial})")


def phase_shift(spatial: str, delta: float) -> LinearElement:
    """Common phase e^{i delta} on both polarizations of one spatial mode."""
    ph = complex(math.cos(delta), math.sin(delta))
    return _polarization_element(spatial, [[ph, 0], [0, ph]], f"Phase({spatial},{delta:g})")


def apply_element(state: PureState, el: LinearElement) -> PureState:
    """Exact action of ``el`` on a multi-photon state.

    Each ket is written as ``prod_j (a†_j)^{n_j} / sqrt(n_j!) |0>``, every
    creation operator on an element mode is substituted, and the resulting
    monomials are converted back to number states.
    """
    reg = state.registry
    try:
        idx = [reg.index(m) for m in el.modes]
    except UnknownModeError as exc:
        raise UnknownModeError(f"{el.name}: {exc}") from None
    u = el.matrix
    # per input column: list of (output local index, coefficient)
    columns = [[(i, u[i, j]) for i in range(len(idx)) if u[i, j] != 0] for j in range(len(idx))]

    out: dict[FockKet, complex] = {}
    for ket, amp in state.items():
        occ = list(ket.occupations)
        photons = []
        norm_in = 1.0
        for j, r in enumerate(idx):
            n = occ[r]
            if n:
                photons.extend([j] * n)
                norm_in *= math.factorial(n)
                occ[r] = 0
        if not photons:
            out[ket] = out.get(ket, 0j) + amp
            continue
        base = amp / math.sqrt(norm_in)
        counts: dict[tuple[int, ...], complex] = {}
        for choice in product(*(columns[j] for j in photons)):
            coeff = 1 + 0j
            m = [0] * len(idx)
            for i, c in choice:
                coeff *= c
                m[i] += 1
            key = tuple(m)
            counts[key] = counts.get(key, 0j) + coeff
        for m, coeff in counts.items():
            new = occ.copy()
            factor = 1.0
            for i, n in enumerate(m):
                if n:
                    new[idx[i]] += n
                    factor *= math.factorial(n)
            k = FockKet(tuple(new))
            out[k] = out.get(k, 0j) + base * coeff * math.sqrt(factor)
    return PureState(reg, out, state.prune_tolerance)


def apply_all(state: PureState, elements: Sequence[LinearElement]) -> PureState:
    for el in elements:
        state = apply_element(state, el)
    return state
