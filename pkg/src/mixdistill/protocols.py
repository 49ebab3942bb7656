"""End-to-end distillation drivers.

Every driver builds the joint input as a list of labelled pure branches
with exact classical weights, pushes each branch through the optical
circuit, post-selects, measures and corrects, and recombines the results.
Nothing here samples; see :mod:`mixdistill.montecarlo` for the stochastic
cross-check.

Mode naming: party ``x`` owns input modes ``x1`` (first copy) and ``x2``
(second copy, bit-flipped before the PBS) and output modes ``x3`` (kept)
and ``x4`` (measured in the |+/-> basis).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import product
from typing import Sequence

from mixdistill.errors import CapacityError, InvariantError, ParameterError
from mixdistill.fock import (
    MixedEnsemble,
    ModeRegistry,
    PureState,
    Branch,
    create_product,
    embed,
    inner,
    make_pure,
    tensor,
    vacuum,
)
from mixdistill.measures import (
    EfficiencyInputs,
    efficiency_eta,
    ensemble_entanglement,
    fidelity_to_target,
)
from mixdistill.optics import LinearElement, apply_all, hadamard_wp, hwp_flip, pbs
from mixdistill.selection import (
    BranchRecord,
    ParityRule,
    corrected_records,
    measure_pm,
    postselect_one_photon_each,
)

PROTOCOLS = ("bitflip", "phaseflip", "phaseflip-full", "multipartite", "spdc")
WEIGHTINGS = ("paper", "physical")
PARTY_NAMES = "abcdefghijkl"
DEFAULT_MAX_PHOTONS = 12


@dataclass(frozen=True)
class ProtocolParams:
    """Input parameters shared by all drivers.

    ``alpha2`` is |alpha|^2; beta is fixed by normalization and both are
    taken real and non-negative.
    """

    fidelity: float
    alpha2: float
    parties: int = 2
    spdc_p: float = 0.1
    delta: float = 0.0
    weighting: str = "paper"

    def __post_init__(self):
        if not 0.0 < self.fidelity <= 1.0:
            raise ParameterError("fidelity", f"must be in (0, 1], got {self.fidelity}")
        if not 0.0 < self.alpha2 < 1.0:
            raise ParameterError("alpha2", f"must be in (0, 1), got {self.alpha2}")
        if int(self.parties) != self.parties or self.parties < 2:
            raise ParameterError("parties", f"must be an integer >= 2, got {self.parties}")
        if not 0.0 < self.spdc_p < 1.0:
            raise ParameterError("spdc_p", f"must be in (0, 1), got {self.spdc_p}")
        if not math.isfinite(self.delta):
            raise ParameterError("delta", f"must be finite, got {self.delta}")
        if self.weighting not in WEIGHTINGS:
            raise ParameterError("weighting", f"must be one of {WEIGHTINGS}, got {self.weighting!r}")
        object.__setattr__(self, "parties", int(self.parties))

    @property
    def alpha(self) -> float:
        return math.sqrt(self.alpha2)

    @property
    def beta(self) -> float:
        return math.sqrt(1.0 - self.alpha2)

    @property
    def below_threshold(self) -> bool:
        return self.fidelity <= 0.5


@dataclass(frozen=True)
class StageReport:
    name: str
    success_probability: float
    fidelity_out: float
    output_weights: tuple[float, ...] = ()


@dataclass(frozen=True)
class DistillationOutcome:
    """Result of one protocol run.

    ``branches`` holds one record per (joint input branch, measurement
    outcome) with its absolute probability, so the record probabilities sum
    to ``success_probability``.
    """

    protocol: str
    params: ProtocolParams
    success_probability: float
    output: MixedEnsemble
    fidelity_out: float
    target: PureState
    branches: tuple[BranchRecord, ...] = ()
    stage_reports: tuple[StageReport, ...] = ()
    discarded_weight: float = 0.0
    below_threshold: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "below_threshold", self.params.below_threshold)
        tol = 1e-9
        if not -tol <= self.fidelity_out <= 1 + tol:
            raise InvariantError(f"fidelity {self.fidelity_out} outside [0, 1]")
        if not -tol <= self.success_probability <= 1 + tol:
            raise InvariantError(f"success probability {self.success_probability} outside [0, 1]")
        if self.output.branches and abs(self.output.total_weight - 1.0) > 1e-9:
            raise InvariantError("output weights do not sum to one")

    @property
    def output_modes(self) -> tuple[str, ...]:
        return tuple(s for s in self.target.registry.spatial_modes if s.endswith("3"))


# -- state construction --------------------------------------------------------


@lru_cache(maxsize=None)
def party_registry(parties: int) -> ModeRegistry:
    return ModeRegistry.from_spatial(PARTY_NAMES[:parties])


@lru_cache(maxsize=None)
def round_registry(parties: int) -> ModeRegistry:
    names = PARTY_NAMES[:parties]
    return ModeRegistry.from_spatial(f"{p}{i}" for p in names for i in (1, 2, 3, 4))


def _product_ket(registry, names, pols) -> str:
    return " ".join(f"{pol}@{name}" for name, pol in zip(names, pols))


def source_states(params: ProtocolParams, error: str = "bit", parties: int = 2) -> list[tuple[str, float, PureState]]:
    """The two pure components of a genuine mixed source, with their weights.

    ``error="bit"`` gives F |Phi+> + (1-F) |Psi+> with less-entangled
    components; ``error="phase"`` gives F |Phi+> + (1-F) |Phi->.  For
    ``parties > 2`` the bit-flipped component flips the first party.
    """
    reg = party_registry(parties)
    names = PARTY_NAMES[:parties]
    a, b = params.alpha, params.beta
    all_h = _product_ket(reg, names, "H" * parties)
    all_v = _product_ket(reg, names, "V" * parties)
    phi = make_pure([(a, all_h), (b, all_v)], reg)
    if error == "bit":
        if parties == 2:
            flipped = make_pure([(a, "H@a V@b"), (b, "V@a H@b")], reg)
        else:
            flipped = make_pure(
                [
                    (a, _product_ket(reg, names, "V" + "H" * (parties - 1))),
                    (b, _product_ket(reg, names, "H" + "V" * (parties - 1))),
                ],
                reg,
            )
        second = ("Psi+", flipped)
    elif error == "phase":
        second = ("Phi-", make_pure([(a, all_h), (-b, all_v)], reg))
    else:
        raise ValueError(f"unknown error model {error!r}")
    F = params.fidelity
    return [("Phi+", F, phi), (second[0], 1.0 - F, second[1])]


def source_ensemble(params: ProtocolParams, error: str = "bit", parties: int = 2) -> MixedEnsemble:
    return MixedEnsemble(
        tuple(Branch(w, s, lab) for lab, w, s in source_states(params, error, parties) if w > 0)
    )


def ghz_target(registry: ModeRegistry, modes: Sequence[str], sign: int = 1) -> PureState:
    """(|H...H> + sign |V...V>)/sqrt2 on the given spatial modes."""
    s = 1 / math.sqrt(2)
    return make_pure(
        [
            (s, _product_ket(registry, modes, "H" * len(modes))),
            (sign * s, _product_ket(registry, modes, "V" * len(modes))),
        ],
        registry,
    )


def _copy_maps(parties: int):
    names = PARTY_NAMES[:parties]
    return {p: f"{p}1" for p in names}, {p: f"{p}2" for p in names}


def joint_branches(
    first: Sequence[tuple[str, float, PureState]],
    second: Sequence[tuple[str, float, PureState]],
    parties: int,
) -> list[tuple[str, float, PureState]]:
    """All products of a first-copy and second-copy component, placed on x1 / x2 modes."""
    reg = round_registry(parties)
    m1, m2 = _copy_maps(parties)
    out = []
    for (l1, w1, s1), (l2, w2, s2) in product(first, second):
        if w1 * w2 == 0:
            continue
        state = tensor(embed(s1, reg, m1), embed(s2, reg, m2))
        out.append((f"{l1}|{l2}", w1 * w2, state))
    return out


# -- the circuit ---------------------------------------------------------------


@lru_cache(maxsize=None)
def circuit(parties: int) -> tuple[LinearElement, ...]:
    """Bit flips on every second-copy mode followed by one PBS per party."""
    names = PARTY_NAMES[:parties]
    flips = [hwp_flip(f"{p}2") for p in names]
    splitters = [pbs(f"{p}1", f"{p}2", f"{p}3", f"{p}4") for p in names]
    return tuple(flips + splitters)


@dataclass(frozen=True)
class BranchAnalysis:
    """Fate of one joint input branch.

    ``norm2`` is the squared norm of the input state, ``kept`` the squared
    norm surviving post-selection and ``records`` the corrected measurement
    branches of the conditional state (probabilities summing to one).
    """

    label: str
    weight: float
    norm2: float
    kept: float
    records: tuple[BranchRecord, ...]


def analyze_branch(label: str, weight: float, state: PureState, parties: int) -> BranchAnalysis:
    names = PARTY_NAMES[:parties]
    out = apply_all(state, circuit(parties))
    selected = [f"{p}{i}" for p in names for i in (3, 4)]
    kept, conditional = postselect_one_photon_each(out, selected)
    if conditional is None:
        return BranchAnalysis(label, weight, state.norm2(), 0.0, ())
    records = measure_pm(conditional, [f"{p}4" for p in names])
    rule = ParityRule(f"{names[0]}3")
    records = [replace(r, source=label) for r in corrected_records(records, rule)]
    return BranchAnalysis(label, weight, state.norm2(), kept, tuple(records))


def bell_name(state: PureState, mode_a: str, mode_b: str) -> str:
    """Name of the Bell state equal to ``state`` up to phase, or ``""``."""
    reg = state.registry
    s = 1 / math.sqrt(2)
    for name, (k1, k2, sign) in {
        "phi+": ("H H", "V V", 1),
        "phi-": ("H H", "V V", -1),
        "psi+": ("H V", "V H", 1),
        "psi-": ("H V", "V H", -1),
    }.items():
        pa, pb = k1.split()
        qa, qb = k2.split()
        bell = make_pure(
            [(s, f"{pa}@{mode_a} {pb}@{mode_b}"), (sign * s, f"{qa}@{mode_a} {qb}@{mode_b}")], reg
        )
        if abs(abs(inner(bell, state)) - 1.0) < 1e-10:
            return name
    return ""


def _output_label(record: BranchRecord, names) -> str:
    if len(names) == 2:
        return bell_name(record.residual, f"{names[0]}3", f"{names[1]}3") or record.source
    return record.source


def _combine(
    protocol: str,
    params: ProtocolParams,
    analyses: Sequence[BranchAnalysis],
    parties: int,
    stage_reports: Sequence[StageReport] = (),
) -> DistillationOutcome:
    total = math.fsum(a.weight * a.norm2 for a in analyses)
    records = []
    for a in analyses:
        scale = a.weight * a.kept / total
        for r in a.records:
            records.append(replace(r, probability=scale * r.probability))
    success = math.fsum(r.probability for r in records)
    names = PARTY_NAMES[:parties]
    target = ghz_target(round_registry(parties), [f"{p}3" for p in names])
    if success > 0:
        output = MixedEnsemble(
            tuple(Branch(r.probability, r.residual, _output_label(r, names)) for r in records)
        ).merged().normalized()
        fidelity = fidelity_to_target(output, target)
    else:
        output, fidelity = MixedEnsemble(), 0.0
    return DistillationOutcome(
        protocol=protocol,
        params=params,
        success_probability=success,
        output=output,
        fidelity_out=min(1.0, max(0.0, fidelity)),
        target=target,
        branches=tuple(records),
        stage_reports=tuple(stage_reports),
        discarded_weight=1.0 - success,
    )


def _run_round(protocol, params, joint, parties, stage_reports=()) -> DistillationOutcome:
    analyses = [analyze_branch(lab, w, s, parties) for lab, w, s in joint]
    return _combine(protocol, params, analyses, parties, stage_reports)


# -- drivers -------------------------------------------------------------------


def distill_bitflip(params: ProtocolParams) -> DistillationOutcome:
    """One round on two copies of F|Phi+><Phi+| + (1-F)|Psi+><Psi+|."""
    src = source_states(params, "bit")
    return _run_round("bitflip", params, joint_branches(src, src, 2), 2)


def distill_phaseflip_stage1(params: ProtocolParams) -> DistillationOutcome:
    """Concentration step on two copies of F|Phi+><Phi+| + (1-F)|Phi-><Phi-|."""
    src = source_states(params, "phase")
    return _run_round("phaseflip", params, joint_branches(src, src, 2), 2)


def stage1_to_sources(outcome: DistillationOutcome) -> list[tuple[str, float, PureState]]:
    """Hadamard-convert a stage-1 output into source components for the next round."""
    reg = party_registry(2)
    out = []
    for b in outcome.output.branches:
        state = embed(b.state, reg, {"a3": "a", "b3": "b"})
        state = apply_all(state, (hadamard_wp("a"), hadamard_wp("b")))
        out.append((b.label, b.weight, state))
    return out


def distill_phaseflip_full(params: ProtocolParams) -> DistillationOutcome:
    """Concentration, Hadamard conversion, then a purification round.

    The second round acts on two independent copies of the converted
    stage-1 output.  ``success_probability`` is that of the whole chain:
    two stage-1 successes followed by a stage-2 success.
    """
    stage1 = distill_phaseflip_stage1(params)
    converted = stage1_to_sources(stage1)
    stage2 = _run_round("phaseflip-full", params, joint_branches(converted, converted, 2), 2)
    reports = (
        StageReport(
            "concentration",
            stage1.success_probability,
            stage1.fidelity_out,
            tuple(b.weight for b in stage1.output.branches),
        ),
        StageReport(
            "purification",
            stage2.success_probability,
            stage2.fidelity_out,
            tuple(b.weight for b in stage2.output.branches),
        ),
    )
    overall = stage1.success_probability**2 * stage2.success_probability
    return replace(
        stage2,
        success_probability=overall,
        discarded_weight=1.0 - overall,
        stage_reports=reports,
    )


def distill_multipartite(params: ProtocolParams, max_photons: int = DEFAULT_MAX_PHOTONS) -> DistillationOutcome:
    """GHZ-type version: one PBS per party, 2N photons."""
    n = params.parties
    if 2 * n > max_photons:
        raise CapacityError(f"{2 * n} photons exceed the cap of {max_photons}")
    if n > len(PARTY_NAMES):
        raise CapacityError(f"at most {len(PARTY_NAMES)} parties are supported")
    src = source_states(params, "bit", n)
    return _run_round("multipartite", params, joint_branches(src, src, n), n)


def spdc_joint_branches(params: ProtocolParams) -> list[tuple[str, float, PureState]]:
    """Two-pass SPDC emission truncated at two pairs, one branch per error-label pair.

    Each pass draws one error label, shared by every pair that pass emits.
    A factor e^{i delta} accompanies every term in which the second pass
    emits.  With ``weighting="paper"`` the same-mode double pairs keep bare
    polynomial coefficients and enter as a 1/sqrt2 superposition; with
    ``weighting="physical"`` each double pair is a normalized bosonic state.
    """
    reg = round_registry(2)
    m1, m2 = _copy_maps(2)
    p = params.spdc_p
    phase = cmath.exp(1j * params.delta)
    physical = params.weighting == "physical"
    src = source_states(params, "bit")
    out = []
    for (l1, w1, s1), (l2, w2, s2) in product(src, src):
        if w1 * w2 == 0:
            continue
        first = embed(s1, reg, m1)
        second = embed(s2, reg, m2)
        double1 = create_product(first, first, bosonic=physical)
        double2 = create_product(second, second, bosonic=physical)
        if physical:
            double1, double2, c = double1.normalized(), double2.normalized(), 1.0
        else:
            c = 1 / math.sqrt(2)
        two_pair = tensor(first, second) * phase + (double1 + double2 * phase) * c
        state = vacuum(reg) + (first + second * phase) * p + two_pair * (p * p)
        out.append((f"{l1}|{l2}", w1 * w2, state))
    return out


def distill_spdc(params: ProtocolParams) -> DistillationOutcome:
    """Bit-flip round fed by two SPDC passes instead of ideal pair sources."""
    return _run_round("spdc", params, spdc_joint_branches(params), 2)


DRIVERS = {
    "bitflip": distill_bitflip,
    "phaseflip": distill_phaseflip_stage1,
    "phaseflip-full": distill_phaseflip_full,
    "multipartite": distill_multipartite,
    "spdc": distill_spdc,
}


def run(protocol: str, params: ProtocolParams) -> DistillationOutcome:
    try:
        driver = DRIVERS[protocol]
    except KeyError:
        raise ValueError(f"unknown protocol {protocol!r}; choose from {PROTOCOLS}") from None
    return driver(params)


def branch_analyses(protocol: str, params: ProtocolParams) -> list[BranchAnalysis]:
    """Per-joint-branch analysis for the single-round protocols."""
    if protocol == "bitflip":
        src = source_states(params, "bit")
        joint, n = joint_branches(src, src, 2), 2
    elif protocol == "phaseflip":
        src = source_states(params, "phase")
        joint, n = joint_branches(src, src, 2), 2
    elif protocol == "multipartite":
        n = params.parties
        src = source_states(params, "bit", n)
        joint = joint_branches(src, src, n)
    elif protocol == "spdc":
        joint, n = spdc_joint_branches(params), 2
    else:
        raise ValueError(f"no single-round branch analysis for {protocol!r}")
    return [analyze_branch(lab, w, s, n) for lab, w, s in joint]


# -- efficiency ----------------------------------------------------------------


@dataclass(frozen=True)
class EfficiencyReport:
    eta: float
    E_out: float
    P: float
    E_in: float
    measure_kind: str


def bitflip_efficiency(params: ProtocolParams, measure_kind: str = "concurrence") -> EfficiencyReport:
    """Transformation efficiency of the bit-flip protocol from simulated quantities."""
    outcome = distill_bitflip(params)
    e_in = ensemble_entanglement(source_ensemble(params, "bit"), "a", "b", measure_kind)
    e_out = ensemble_entanglement(outcome.output, "a3", "b3", measure_kind)
    inputs = EfficiencyInputs(e_out, outcome.success_probability, e_in, measure_kind)
    return EfficiencyReport(efficiency_eta(inputs), e_out, outcome.success_probability, e_in, measure_kind)


def input_concurrence(params: ProtocolParams) -> float:
    return ensemble_entanglement(source_ensemble(params, "bit"), "a", "b", "concurrence")
