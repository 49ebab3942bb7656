"""Fidelity, Wootters concurrence, entropy of entanglement and efficiency."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from mixdistill.errors import (
    InvalidDensityError,
    PreconditionError,
    UndefinedEfficiencyError,
    UnknownModeError,
)
from mixdistill.fock import (
    MixedEnsemble,
    PureState,
    TwoQubitDensity,
    inner,
    reduce_two_qubit,
    two_qubit_vector,
)

_YY = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]], dtype=complex)

# eigenvalues below this are treated as numerical noise around zero
EIG_CLIP = -1e-10

MEASURE_KINDS = ("concurrence", "entropy")


def fidelity_to_target(ens: MixedEnsemble, target: PureState) -> float:
    """sum_i w_i |<target|psi_i>|^2."""
    total = 0.0
    for b in ens.branches:
        if b.state.registry != target.registry:
            raise UnknownModeError("ensemble and target live on different mode registries")
        total += b.weight * abs(inner(target, b.state)) ** 2
    return total


def concurrence(rho: TwoQubitDensity | np.ndarray) -> float:
    """Wootters concurrence max(0, l1 - l2 - l3 - l4).

    The l_i, the square roots of the eigenvalues of rho (Y x Y) rho* (Y x Y),
    are obtained as the singular values of tau = V^T (Y x Y) V where
    rho = V V^dagger comes from the eigendecomposition of rho.  This avoids
    square roots of noisy near-zero eigenvalues, which would otherwise cost
    about eight digits for rank-deficient states.
    """
    if not isinstance(rho, TwoQubitDensity):
        rho = TwoQubitDensity(np.asarray(rho, dtype=complex), atol=1e-10)
    p, u = np.linalg.eigh(rho.matrix)
    if p.min() < EIG_CLIP:
        raise InvalidDensityError(f"negative eigenvalue {p.min():.3g} in rho")
    v = u * np.sqrt(np.clip(p, 0.0, None))
    lam = np.linalg.svd(v.T @ _YY @ v, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def _shannon2(probs) -> float:
    return float(-sum(p * math.log2(p) for p in probs if p > 0))


def entropy_of_entanglement(state: PureState, mode_a: str | None = None, mode_b: str | None = None) -> float:
    """Von Neumann entropy (bits) of one photon's reduced polarization state.

    The state must be normalized with one photon in each of two spatial
    modes.  When the modes are not given they are inferred from the kets.
    """
    if not state.is_normalized(1e-10):
        raise PreconditionError("entropy needs a normalized pure state")
    if mode_a is None or mode_b is None:
        occupied = sorted(
            {state.registry.labels[i].spatial for i in state.occupied_modes()},
            key=state.registry.spatial_modes.index,
        )
        if len(occupied) != 2:
            raise PreconditionError(f"expected two occupied spatial modes, got {occupied}")
        mode_a, mode_b = occupied
    v = two_qubit_vector(state, mode_a, mode_b).reshape(2, 2)
    sv = np.linalg.svd(v, compute_uv=False)
    return _shannon2(sv**2)


@dataclass(frozen=True)
class EfficiencyInputs:
    E_out: float
    P: float
    E_in: float
    measure_kind: str = "concurrence"

    def __post_init__(self):
        if self.measure_kind not in MEASURE_KINDS:
            raise ValueError(f"unknown measure kind {self.measure_kind!r}")
        for name in ("E_out", "P", "E_in"):
            v = getattr(self, name)
            if not -1e-12 <= v <= 1 + 1e-12:
                raise ValueError(f"{name}={v} outside [0, 1]")


def efficiency_eta(inputs: EfficiencyInputs) -> float:
    """E_out * P / (2 E_in): entanglement kept per pair consumed."""
    if inputs.E_in <= 0:
        raise UndefinedEfficiencyError("input entanglement is zero; efficiency undefined")
    return inputs.E_out * inputs.P / (2 * inputs.E_in)


def ensemble_entanglement(ens: MixedEnsemble, mode_a: str, mode_b: str, kind: str = "concurrence") -> float:
    """Entanglement of a two-photon ensemble.

    ``entropy`` is only defined for ensembles that are a single pure state
    (up to merging of identical branches).
    """
    if kind == "concurrence":
        return concurrence(reduce_two_qubit(ens, mode_a, mode_b))
    if kind == "entropy":
        ens = ens.normalized().merged()
        if len(ens) != 1:
            raise PreconditionError("entropy of entanglement needs a pure state")
        return entropy_of_entanglement(ens.branches[0].state, mode_a, mode_b)
    raise ValueError(f"unknown measure kind {kind!r}")
