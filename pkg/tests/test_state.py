import cmath
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import angles, sparse_states, unit_pairs
from timebinsim.errors import DomainError, NormalizationError
from timebinsim.state import (
    PRUNE_THRESHOLD,
    Label,
    MultiPhotonState,
    PhotonState,
    Pol,
    canonical_times,
    fidelity,
    make_product_state,
    norm_squared,
    renormalize,
    scale,
)

S = 1 / math.sqrt(2)


def test_polarization_has_two_distinct_values():
    assert list(Pol) == [Pol.H, Pol.V]
    assert Pol.H != Pol.V
    assert Pol.H.flipped() is Pol.V and Pol.V.flipped() is Pol.H


def test_label_is_a_value():
    a, b = Label("a", Pol.H, 2), Label("a", Pol.H, 2)
    assert a == b and hash(a) == hash(b)
    assert {a: 1}[b] == 1
    assert a.moved(dt=3).time == 5 and a.time == 2


@pytest.mark.parametrize("bad", [dict(rail=""), dict(pol="X"), dict(time=1.5)])
def test_label_rejects_bad_fields(bad):
    fields = dict(rail="a", pol=Pol.H, time=0) | bad
    with pytest.raises((DomainError, ValueError)):
        Label(**fields)


def test_product_basis_state():
    s = make_product_state({"a": 1, "b": 0}, {Pol.H: 1, Pol.V: 0})
    assert s.terms == {(Label("a", Pol.H, 0),): 1}


def test_product_uniform_superposition():
    s = make_product_state({"a": S, "b": S}, {Pol.H: S, Pol.V: S})
    assert len(s) == 4
    assert all(abs(a - 0.5) < 1e-15 for _, a in s.items())
    assert abs(norm_squared(s) - 1) < 1e-12


def test_correlated_pair_form():
    s = make_product_state([{"a1": S, "b1": S}, {"a2": S, "b2": S}], [{"H": S, "V": S}] * 2, correlated=True)
    expected = {
        (Label("a1", Pol.H), Label("a2", Pol.H)),
        (Label("a1", Pol.V), Label("a2", Pol.V)),
        (Label("b1", Pol.H), Label("b2", Pol.H)),
        (Label("b1", Pol.V), Label("b2", Pol.V)),
    }
    assert set(s) == expected
    assert all(abs(a - 0.5) < 1e-15 for _, a in s.items())


def test_product_state_errors():
    with pytest.raises(NormalizationError):
        make_product_state({"a": 0.7, "b": 0.7}, {Pol.H: 1})
    with pytest.raises(DomainError):
        make_product_state({}, {Pol.H: 1})
    with pytest.raises(DomainError):
        make_product_state([{"a": 1}, {"a": 1}], [{Pol.H: 1}, {Pol.H: 1}])


@given(unit_pairs(), unit_pairs())
def test_product_state_is_normalized(sp, pl):
    s = make_product_state({"a": sp[0], "b": sp[1]}, {Pol.H: pl[0], Pol.V: pl[1]})
    assert abs(norm_squared(s) - 1) < 1e-9


def test_norm_squared_examples():
    assert norm_squared(PhotonState({Label("a", Pol.H): 0.5})) == 0.25
    assert norm_squared(MultiPhotonState({}, n=1)) == 0.0


def test_fidelity_examples():
    h = PhotonState({Label("a", Pol.H): 1})
    v = PhotonState({Label("a", Pol.V): 1})
    plus = PhotonState({Label("a", Pol.H): S, Label("a", Pol.V): S})
    assert fidelity(h, h) == 1.0
    assert fidelity(h, v) == 0.0
    assert abs(fidelity(plus, h) - 0.5) < 1e-15


def test_fidelity_rejects_zero_and_mismatched_states():
    h = PhotonState({Label("a", Pol.H): 1})
    with pytest.raises(DomainError):
        fidelity(MultiPhotonState({}, n=1), h)
    with pytest.raises(DomainError):
        fidelity(h, MultiPhotonState({(Label("a", Pol.H), Label("b", Pol.H)): 1}))


def test_fidelity_ignores_common_time_offset():
    a = PhotonState({Label("a", Pol.H, 0): S, Label("b", Pol.V, 1): S})
    b = PhotonState({Label("a", Pol.H, 4): S, Label("b", Pol.V, 5): S})
    assert abs(fidelity(a, b) - 1) < 1e-15
    assert canonical_times(b) == a


@given(sparse_states(), angles)
def test_fidelity_is_global_phase_invariant(psi, theta):
    assert abs(fidelity(scale(psi, cmath.exp(1j * theta)), psi) - 1) < 1e-12


def test_renormalize_examples():
    lab = Label("a", Pol.H)
    assert renormalize(PhotonState({lab: 0.5})).terms == {(lab,): 1.0}
    two = renormalize(PhotonState({lab: 0.3, Label("b", Pol.H): 0.3}))
    assert all(abs(a - S) < 1e-15 for _, a in two.items())
    with pytest.raises(DomainError):
        renormalize(MultiPhotonState({}, n=1))


@given(sparse_states(normalized=False))
def test_renormalize_gives_unit_norm(psi):
    if norm_squared(psi) > 0:
        assert abs(norm_squared(renormalize(psi)) - 1) < 1e-12


def test_pruning_and_duplicate_merging():
    lab = Label("a", Pol.H)
    tiny = math.sqrt(PRUNE_THRESHOLD) / 2
    s = MultiPhotonState([((lab,), 0.5), ((lab,), 0.25), ((Label("b", Pol.H),), tiny)])
    assert s.terms == {(lab,): 0.75}
    assert len(s - s) == 0


def test_states_are_immutable_values():
    s = PhotonState({Label("a", Pol.H): 1})
    t = s.terms
    t.clear()
    assert len(s) == 1
    with pytest.raises(AttributeError):
        s._n = 2


def test_term_keys_must_match_photon_count():
    with pytest.raises(DomainError):
        MultiPhotonState([((Label("a", Pol.H),), 1), ((Label("a", Pol.H), Label("b", Pol.H)), 1)])


@given(st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False), min_size=1, max_size=6))
def test_addition_is_termwise(amps):
    labs = [Label("a", Pol.H, t) for t in range(len(amps))]
    s = MultiPhotonState({(l,): a for l, a in zip(labs, amps)}, n=1)
    assert (s + s).max_abs_diff(s * 2) < 1e-9
