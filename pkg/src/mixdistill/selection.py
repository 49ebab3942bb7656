"""Photon-number post-selection, |+/->-basis measurement and parity corrections."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Sequence

from mixdistill.errors import PreconditionError
from mixdistill.fock import Branch, FockKet, MixedEnsemble, ModeLabel, Pol, PureState
from mixdistill.optics import apply_element, phase_flip

# below this a post-selected branch has no conditional state
ZERO_PROBABILITY = 1e-14

_S = 1 / math.sqrt(2)


@dataclass(frozen=True)
class BranchRecord:
    """One outcome of a |+/-> measurement.

    ``probability`` is the squared norm of the projected state; over all
    outcomes of one measurement they sum to the squared norm of the
    measured state.  ``residual`` is normalized.
    """

    outcome: str
    probability: float
    residual: PureState
    correction_applied: bool = False
    source: str = ""

    @property
    def minus_count(self) -> int:
        return self.outcome.count("-")

    @property
    def plus_count(self) -> int:
        return self.outcome.count("+")

    @property
    def minus_parity_odd(self) -> bool:
        return self.minus_count % 2 == 1

    @property
    def plus_parity_even(self) -> bool:
        return self.plus_count % 2 == 0


@dataclass(frozen=True)
class ParityRule:
    """Which outcomes trigger a V -> -V flip on ``flip_mode``.

    ``trigger="odd-minus"`` flips when the number of ``-`` results is odd.
    ``trigger="odd-plus"`` flips when the number of ``+`` results is odd,
    i.e. it keeps outcomes with an even number of ``+``.  The two coincide
    for an even number of measured photons only.
    """

    flip_mode: str
    trigger: str = "odd-minus"

    def __post_init__(self):
        if self.trigger not in ("odd-minus", "odd-plus"):
            raise ValueError(f"unknown parity trigger {self.trigger!r}")

    def fires(self, record: BranchRecord) -> bool:
        if self.trigger == "odd-minus":
            return record.minus_count % 2 == 1
        return record.plus_count % 2 == 1


def postselect_one_photon_each(
    state: PureState, spatial_modes: Sequence[str]
) -> tuple[float, PureState | None]:
    """Keep kets with exactly one photon in each listed spatial mode and none elsewhere.

    Returns ``(probability, conditional)``; ``conditional`` is ``None`` when
    the probability is below ``ZERO_PROBABILITY``.
    """
    reg = state.registry
    groups = [reg.spatial_indices(s) for s in spatial_modes]
    listed = {i for g in groups for i in g}
    others = [i for i in range(len(reg)) if i not in listed]
    kept = {}
    for ket, amp in state.items():
        occ = ket.occupations
        if any(occ[i] for i in others):
            continue
        if all(sum(occ[i] for i in g) == 1 for g in groups):
            kept[ket] = amp
    part = PureState(reg, kept, state.prune_tolerance)
    prob = part.norm2()
    if prob < ZERO_PROBABILITY:
        return prob, None
    return prob, part.normalized()


def measure_pm(state: PureState, spatial_modes: Sequence[str]) -> list[BranchRecord]:
    """Measure one photon in each listed mode in the |+/-> = (|H> +/- |V>)/sqrt2 basis.

    Branches are returned in lexicographic outcome order (``+`` before
    ``-``).  Outcomes of probability below ``ZERO_PROBABILITY`` are dropped.
    """
    reg = state.registry
    pairs = []
    for s in spatial_modes:
        pairs.append((reg.index(ModeLabel(s, Pol.H)), reg.index(ModeLabel(s, Pol.V))))
    measured = {i for p in pairs for i in p}

    # split each ket into (measured polarizations, remaining ket)
    pieces = []
    for ket, amp in state.items():
        occ = ket.occupations
        pols = []
        for ih, iv in pairs:
            nh, nv = occ[ih], occ[iv]
            if nh + nv != 1:
                raise PreconditionError(
                    f"ket |{reg.describe(ket)}> does not hold exactly one photon in "
                    f"every measured mode"
                )
            pols.append(0 if nh else 1)
        rest = FockKet(tuple(0 if i in measured else n for i, n in enumerate(occ)))
        pieces.append((tuple(pols), rest, amp))

    records = []
    for signs in product((1, -1), repeat=len(pairs)):
        amps: dict[FockKet, complex] = {}
        for pols, rest, amp in pieces:
            c = amp
            for pol, sgn in zip(pols, signs):
                c *= _S if pol == 0 else sgn * _S
            amps[rest] = amps.get(rest, 0j) + c
        proj = PureState(reg, amps, state.prune_tolerance)
        prob = proj.norm2()
        if prob < ZERO_PROBABILITY:
            continue
        outcome = "".join("+" if s > 0 else "-" for s in signs)
        records.append(BranchRecord(outcome, prob, proj.normalized()))
    return records


def parity_correct(branches: Sequence[BranchRecord], rule: ParityRule) -> MixedEnsemble:
    """Flip V -> -V on ``rule.flip_mode`` where the rule fires, then merge.

    Weights are the branch probabilities, so total weight is conserved.
    """
    flip = phase_flip(rule.flip_mode)
    out = []
    for rec in branches:
        state = rec.residual
        if rule.fires(rec):
            state = apply_element(state, flip)
        out.append(Branch(rec.probability, state, rec.outcome))
    return MixedEnsemble(tuple(out)).merged()


def corrected_records(branches: Sequence[BranchRecord], rule: ParityRule) -> list[BranchRecord]:
    """Like :func:`parity_correct` but keeps one record per outcome."""
    flip = phase_flip(rule.flip_mode)
    out = []
    for rec in branches:
        if rule.fires(rec):
            out.append(
                BranchRecord(rec.outcome, rec.probability, apply_element(rec.residual, flip), True, rec.source)
            )
        else:
            out.append(rec)
    return out
