"""Analytic fidelity, probability and efficiency formulas.

This module deliberately imports nothing from the simulator so that the
two can be checked against each other.
"""

from __future__ import annotations

import math
from enum import Enum


class FormulaId(str, Enum):
    BITFLIP_FIDELITY = "bitflip_fidelity"
    BITFLIP_PROB = "bitflip_prob"
    PHASEFLIP_STAGE1_WEIGHTS = "phaseflip_stage1_weights"
    PHASEFLIP_STAGE1_PROB = "phaseflip_stage1_prob"
    PHASEFLIP_FULL_FIDELITY = "phaseflip_full_fidelity"
    SPDC_FIDELITY = "spdc_fidelity"
    INPUT_CONCURRENCE = "input_concurrence"
    ETA_CONCURRENCE = "eta_concurrence"


def _check_fidelity(F):
    if not 0.0 <= F <= 1.0:
        raise ValueError(f"fidelity must lie in [0, 1], got {F}")


def _check_alpha2(a2):
    if not 0.0 <= a2 <= 1.0:
        raise ValueError(f"alpha^2 must lie in [0, 1], got {a2}")


def bitflip_fidelity(F: float) -> float:
    _check_fidelity(F)
    return F * F / (F * F + (1 - F) ** 2)


def bitflip_prob(F: float, alpha2: float) -> float:
    _check_fidelity(F)
    _check_alpha2(alpha2)
    return 2 * alpha2 * (1 - alpha2) * (F * F + (1 - F) ** 2)


def phaseflip_stage1_weights(F: float) -> tuple[float, float]:
    """Weights of |phi+> and |phi-> after the concentration step."""
    _check_fidelity(F)
    return F * F + (1 - F) ** 2, 2 * F * (1 - F)


def phaseflip_stage1_prob(alpha2: float) -> float:
    _check_alpha2(alpha2)
    return 2 * alpha2 * (1 - alpha2)


def phaseflip_full_fidelity(F: float) -> float:
    f1 = phaseflip_stage1_weights(F)[0]
    return bitflip_fidelity(f1)


def spdc_fidelity(F: float) -> float:
    _check_fidelity(F)
    return (F * F + 2) / (F * F + (1 - F) ** 2 + 2)


def input_concurrence(F: float, alpha2: float) -> float:
    """Concurrence of F|Phi+><Phi+| + (1-F)|Psi+><Psi+| with real alpha, beta."""
    _check_fidelity(F)
    _check_alpha2(alpha2)
    return 2 * math.sqrt(alpha2 * (1 - alpha2)) * abs(2 * F - 1)


def eta_concurrence(alpha2: float) -> float:
    """Concurrence-based transformation efficiency of the bit-flip protocol.

    F cancels between output entanglement, success probability and input
    entanglement, leaving |alpha beta| / 2.
    """
    _check_alpha2(alpha2)
    return math.sqrt(alpha2 * (1 - alpha2)) / 2


def evaluate(formula: FormulaId | str, params) -> float | tuple[float, float]:
    """Evaluate ``formula`` at ``params`` (anything with ``fidelity`` and ``alpha2``)."""
    formula = FormulaId(formula)
    F = params.fidelity
    a2 = params.alpha2
    if formula is FormulaId.BITFLIP_FIDELITY:
        return bitflip_fidelity(F)
    if formula is FormulaId.BITFLIP_PROB:
        return bitflip_prob(F, a2)
    if formula is FormulaId.PHASEFLIP_STAGE1_WEIGHTS:
        return phaseflip_stage1_weights(F)
    if formula is FormulaId.PHASEFLIP_STAGE1_PROB:
        return phaseflip_stage1_prob(a2)
    if formula is FormulaId.PHASEFLIP_FULL_FIDELITY:
        return phaseflip_full_fidelity(F)
    if formula is FormulaId.SPDC_FIDELITY:
        return spdc_fidelity(F)
    if formula is FormulaId.INPUT_CONCURRENCE:
        return input_concurrence(F, a2)
    return eta_concurrence(a2)
