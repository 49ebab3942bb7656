import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixdistill.errors import (
    InvalidDensityError,
    PhotonCollisionError,
    PreconditionError,
    UnknownModeError,
)
from mixdistill.fock import (
    Branch,
    MixedEnsemble,
    ModeLabel,
    ModeRegistry,
    Pol,
    PureState,
    TwoQubitDensity,
    create_product,
    embed,
    inner,
    make_pure,
    reduce_two_qubit,
    tensor,
    two_photon_state,
    two_qubit_vector,
    vacuum,
)

S = 1 / math.sqrt(2)


@pytest.fixture
def reg():
    return ModeRegistry.from_spatial(["a", "b"])


def bell(reg, kind, alpha=S, beta=S):
    coeffs = {
        "phi+": {"HH": alpha, "VV": beta},
        "phi-": {"HH": alpha, "VV": -beta},
        "psi+": {"HV": alpha, "VH": beta},
    }[kind]
    return two_photon_state(reg, "a", "b", coeffs)


def test_registry_order_and_labels():
    reg = ModeRegistry.from_spatial(["a1", "b1"])
    assert [str(m) for m in reg] == ["H@a1", "V@a1", "H@b1", "V@b1"]
    assert reg.index("V@b1") == 3
    assert reg.index(("b1", "H")) == 2
    assert reg.index(ModeLabel("a1", Pol.V)) == 1
    assert reg.spatial_modes == ("a1", "b1")


def test_registry_rejects_duplicates_and_unknown_labels():
    with pytest.raises(ValueError):
        ModeRegistry(["H@a", "H@a"])
    reg = ModeRegistry.from_spatial(["a"])
    with pytest.raises(UnknownModeError):
        reg.index("H@z")


def test_ket_string_repeats_add_up(reg):
    k = reg.ket("H@a H@a V@b")
    assert k.occupations == (2, 0, 0, 1)
    assert k.total == 3


def test_make_pure_norm(reg):
    s = make_pure([(0.6, "H@a V@b"), (0.8, "V@a H@b")], reg)
    assert s.norm2() == pytest.approx(1.0, abs=1e-15)
    assert s.is_normalized()


def test_make_pure_merges_duplicates(reg):
    s = make_pure([(0.5, "H@a H@b"), (0.5, "H@a H@b")], reg)
    assert len(s) == 1
    assert s.amplitude("H@a H@b") == pytest.approx(1.0)


def test_make_pure_prunes_tiny_amplitudes(reg):
    s = make_pure([(1e-15, "H@a H@b")], reg, prune_tolerance=1e-12)
    assert len(s) == 0
    assert not s


def test_make_pure_unknown_mode(reg):
    with pytest.raises(UnknownModeError):
        make_pure([(1.0, "H@c")], reg)


def test_tensor_amplitudes_are_products():
    # first copy on a1 b1, second copy (flipped) on a2 b2: four product terms
    reg = ModeRegistry.from_spatial(["a1", "b1", "a2", "b2"])
    a, b = 0.6, 0.8
    s1 = make_pure([(a, "H@a1 H@b1"), (b, "V@a1 V@b1")], reg)
    s2 = make_pure([(a, "V@a2 V@b2"), (b, "H@a2 H@b2")], reg)
    t = tensor(s1, s2)
    assert len(t) == 4
    assert t.amplitude("H@a1 H@b1 V@a2 V@b2") == pytest.approx(a * a)
    assert t.amplitude("V@a1 V@b1 H@a2 H@b2") == pytest.approx(b * b)
    assert t.amplitude("H@a1 H@b1 H@a2 H@b2") == pytest.approx(a * b)
    assert t.amplitude("V@a1 V@b1 V@a2 V@b2") == pytest.approx(a * b)
    assert t.norm2() == pytest.approx(1.0, abs=1e-12)


def test_tensor_with_vacuum_is_identity(reg):
    s = bell(reg, "phi+")
    assert tensor(vacuum(reg), s).allclose(s)


def test_tensor_collision(reg):
    s = make_pure([(1.0, "H@a")], reg)
    with pytest.raises(PhotonCollisionError):
        tensor(s, s)


def test_tensor_disjoint_registries():
    ra = ModeRegistry.from_spatial(["a"])
    rb = ModeRegistry.from_spatial(["b"])
    t = tensor(make_pure([(1.0, "H@a")], ra), make_pure([(1.0, "V@b")], rb))
    assert t.registry.spatial_modes == ("a", "b")
    assert t.amplitude(t.registry.ket("H@a V@b")) == pytest.approx(1.0)


def test_create_product_bosonic_factor(reg):
    h = make_pure([(1.0, "H@a")], reg)
    two = create_product(h, h)
    assert two.amplitude("H@a H@a") == pytest.approx(math.sqrt(2))
    bare = create_product(h, h, bosonic=False)
    assert bare.amplitude("H@a H@a") == pytest.approx(1.0)


def test_inner_examples(reg):
    phi = bell(reg, "phi+")
    assert inner(phi, phi) == pytest.approx(1.0)
    assert inner(phi, bell(reg, "psi+", 0.6, 0.8)) == 0
    # (0.6 + 0.8) / sqrt2, frozen from direct expansion
    assert inner(phi, bell(reg, "phi+", 0.6, 0.8)).real == pytest.approx(0.9899494936611665, abs=1e-12)


def test_inner_conjugate_linear_in_first_argument(reg):
    s = make_pure([(1.0, "H@a H@b")], reg)
    assert inner(s * 1j, s) == pytest.approx(-1j)
    assert inner(s, s * 1j) == pytest.approx(1j)


def test_embed_renames_modes():
    src = ModeRegistry.from_spatial(["a", "b"])
    dst = ModeRegistry.from_spatial(["a1", "b1", "a2", "b2"])
    s = embed(bell(src, "phi+"), dst, {"a": "a2", "b": "b2"})
    assert s.amplitude("H@a2 H@b2") == pytest.approx(S)


def test_two_qubit_vector_order(reg):
    s = two_photon_state(reg, "a", "b", {"HH": 0.1, "HV": 0.2, "VH": 0.3, "VV": 0.4})
    assert two_qubit_vector(s, "a", "b") == pytest.approx(np.array([0.1, 0.2, 0.3, 0.4]))
    with pytest.raises(PreconditionError):
        two_qubit_vector(make_pure([(1.0, "H@a H@a")], reg), "a", "b")


def test_reduce_pure_phi_plus(reg):
    rho = reduce_two_qubit(MixedEnsemble((Branch(1.0, bell(reg, "phi+")),)), "a", "b").matrix
    expected = np.zeros((4, 4))
    expected[np.ix_([0, 3], [0, 3])] = 0.5
    assert np.allclose(rho, expected, atol=1e-15)


def test_reduce_x_state_entries(reg):
    F, a2 = 0.75, 1 / 16
    a, b = math.sqrt(a2), math.sqrt(1 - a2)
    ens = MixedEnsemble.from_pairs([(F, bell(reg, "phi+", a, b)), (1 - F, bell(reg, "psi+", a, b))])
    rho = reduce_two_qubit(ens, "a", "b").matrix
    # frozen: F a^2 and F a b, expanded by hand
    assert rho[0, 0].real == pytest.approx(0.046875, abs=1e-12)
    assert rho[0, 3].real == pytest.approx(0.1815460943534727, abs=1e-12)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    # X shape: nothing outside the diagonal and anti-diagonal
    mask = np.ones((4, 4), bool)
    mask[np.arange(4), np.arange(4)] = False
    mask[np.arange(4), 3 - np.arange(4)] = False
    assert np.all(np.abs(rho[mask]) < 1e-15)


def test_reduce_error_names_branch(reg):
    bad = MixedEnsemble((Branch(1.0, make_pure([(1.0, "H@a H@a")], reg), "broken"),))
    with pytest.raises(PreconditionError, match="broken"):
        reduce_two_qubit(bad, "a", "b")


def test_density_validation():
    with pytest.raises(InvalidDensityError):
        TwoQubitDensity(np.eye(4))
    with pytest.raises(InvalidDensityError):
        TwoQubitDensity(np.diag([1.5, -0.5, 0, 0]))
    m = np.zeros((4, 4), complex)
    m[0, 1] = 1
    with pytest.raises(InvalidDensityError):
        TwoQubitDensity(m + np.eye(4) / 4)


def test_ensemble_merge_and_normalize(reg):
    phi = bell(reg, "phi+")
    ens = MixedEnsemble.from_pairs([(0.2, phi), (0.3, phi * -1), (0.5, bell(reg, "psi+"))], ["x", "y", "z"])
    merged = ens.merged()
    assert len(merged) == 2
    assert merged.total_weight == pytest.approx(1.0)
    assert MixedEnsemble.from_pairs([(2.0, phi)]).normalized().branches[0].weight == 1.0


# -- properties -----------------------------------------------------------------

REG4 = ModeRegistry.from_spatial(["a", "b"])
KETS = [REG4.ket(s) for s in ("H@a", "V@a", "H@b", "V@b", "H@a V@b", "V@a H@b", "H@a H@a", "")]

amplitude = st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False)


@st.composite
def sparse_states(draw, reg=REG4, kets=KETS):
    amps = draw(st.lists(amplitude, min_size=len(kets), max_size=len(kets)))
    return PureState(reg, dict(zip(kets, amps)))


@given(sparse_states(), sparse_states())
def test_inner_hermitian_symmetry(s1, s2):
    assert inner(s1, s2) == pytest.approx(inner(s2, s1).conjugate(), abs=1e-12)


@given(sparse_states())
def test_inner_self_is_norm(s):
    assert inner(s, s).real == pytest.approx(s.norm2(), abs=1e-12)


@st.composite
def normalized_pair_states(draw):
    # one state on a-modes, one on b-modes, so supports are disjoint
    ra = [REG4.ket(x) for x in ("H@a", "V@a", "H@a V@a")]
    rb = [REG4.ket(x) for x in ("H@b", "V@b", "V@b V@b")]
    s1 = draw(sparse_states(kets=ra).filter(lambda s: s.norm2() > 1e-6)).normalized()
    s2 = draw(sparse_states(kets=rb).filter(lambda s: s.norm2() > 1e-6)).normalized()
    return s1, s2


@given(normalized_pair_states())
def test_tensor_norm_multiplicative(pair):
    assert tensor(*pair).norm2() == pytest.approx(1.0, abs=1e-12)


@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=8, max_size=8), st.floats(1e-6, 1e-2))
def test_pruning_norm_change_bounded(amps, tol):
    raw = sum(a * a for a in amps)
    s = PureState(REG4, dict(zip(KETS, amps)), prune_tolerance=tol)
    pruned = sum(1 for a in amps if a != 0 and abs(a) < tol)
    assert raw - s.norm2() <= pruned * tol * tol + 1e-15
    assert all(abs(v) >= tol for v in s.amplitudes.values())


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(0.01, 1), st.lists(amplitude, min_size=4, max_size=4)), min_size=1, max_size=5))
def test_reduced_density_is_valid(parts):
    pairs = []
    for w, amps in parts:
        if sum(abs(a) ** 2 for a in amps) < 1e-6:
            continue
        s = two_photon_state(REG4, "a", "b", dict(zip(("HH", "HV", "VH", "VV"), amps))).normalized()
        pairs.append((w, s))
    if not pairs:
        return
    rho = reduce_two_qubit(MixedEnsemble.from_pairs(pairs).normalized(), "a", "b").matrix
    assert np.allclose(rho, rho.conj().T, atol=1e-12)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.eigvalsh(rho).min() >= -1e-10
