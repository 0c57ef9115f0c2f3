import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import angles, unit_pairs
from timebinsim.analysis.outcomes import run_protocol
from timebinsim.analysis.postselect import postselect
from timebinsim.elements import NoiseChannel, NoiseParams
from timebinsim.errors import DomainError, NormalizationError, ResourceError
from timebinsim.netlist import emit_canonical, execute, iter_execute
from timebinsim.protocols import (
    ChannelKey,
    ProtocolSpec,
    TerminalPort,
    apply_correction,
    build,
    build_n_photon_circuit,
    build_single_photon_circuit,
    build_two_photon_circuit,
    correction_for,
)
from timebinsim.state import Pol, fidelity, norm_squared

S = 1 / math.sqrt(2)
CHANNEL_OF = {"p": (1, "a'"), "q": (1, "b'"), "k": (2, "a'"), "l": (2, "b'")}


def noise_draws(rng, proto):
    return {
        key: NoiseParams.from_angles(rng.uniform(0, 2 * math.pi), rng.uniform(0, math.pi / 2), rng.uniform(0, 2 * math.pi))
        for key in proto.channels
    }


def rand_spec(rng, n=1):
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    pol, sp = v[:2] / np.linalg.norm(v[:2]), v[2:] / np.linalg.norm(v[2:])
    return ProtocolSpec(complex(pol[0]), complex(pol[1]), complex(sp[0]), complex(sp[1]), n=n)


def port(j, cls, arm="A"):
    ch, out = CHANNEL_OF[cls]
    return TerminalPort(j, arm, ch, out)


def test_spec_validation():
    with pytest.raises(NormalizationError):
        ProtocolSpec(0.7, 0.7)
    with pytest.raises(ResourceError):
        ProtocolSpec(n=5)
    assert ProtocolSpec(n=6, max_photons=6).n == 6
    with pytest.raises(DomainError):
        ProtocolSpec(n=0)
    with pytest.raises(DomainError):
        ProtocolSpec(k=1)


def test_single_photon_structure():
    proto = build_single_photon_circuit(ProtocolSpec())
    assert proto.n == 1 and len(proto.ports()) == 8
    assert len(proto.circuit.terminals) == 16
    assert {str(k) for k in proto.channels} == {"p1.A1", "p1.A2", "p1.B1", "p1.B2"}
    out = execute(proto.circuit, proto.input_state(), proto.noise_bindings())
    assert abs(norm_squared(out) - 1) < 1e-12


def test_noiseless_single_photon_success_is_quarter():
    table = run_protocol(build(ProtocolSpec(S, S, S, S)))
    assert abs(table.success - 0.25) < 1e-12
    by_group: dict = {}
    for r in table.rows:
        (p,) = r.ports
        by_group[(p.arm, p.channel)] = by_group.get((p.arm, p.channel), 0) + r.probability
    assert len(by_group) == 4 and all(abs(v - 1 / 16) < 1e-12 for v in by_group.values())


@given(angles, st.floats(0, math.pi / 2), angles, unit_pairs(), unit_pairs())
@settings(max_examples=25)
def test_port_probabilities_follow_noise_weights(theta, chi, phi, pol, sp):
    proto = build(ProtocolSpec(*pol, *sp))
    nz = NoiseParams.from_angles(theta, chi, phi)
    table = run_protocol(proto, nz)
    probs = {r.ports[0]: r.probability for r in table.rows}
    for arm in "AB":
        for ch in (1, 2):
            assert abs(probs.get(TerminalPort(0, arm, ch, "a'"), 0) - abs(nz.gamma) ** 2 / 16) < 1e-9
            assert abs(probs.get(TerminalPort(0, arm, ch, "b'"), 0) - abs(nz.eta) ** 2 / 16) < 1e-9


def test_gamma_zero_empties_port_a():
    table = run_protocol(build(ProtocolSpec()), NoiseParams(0.0, 0.0, 1.0))
    probs = {r.ports[0]: r.probability for r in table.rows}
    assert all(p.output == "b'" for p in probs)
    assert all(abs(v - 1 / 16) < 1e-12 for v in probs.values()) and len(probs) == 4


@pytest.mark.parametrize("n, total", [(1, 1 / 4), (2, 1 / 16), (3, 1 / 64)])
def test_success_is_independent_of_noise(n, total):
    rng = np.random.default_rng(n)
    proto = build(rand_spec(rng, n))
    for _ in range(3):
        table = run_protocol(proto, noise_draws(rng, proto))
        assert abs(table.success - total) < 1e-9
        assert table.min_fidelity > 1 - 1e-9


def test_two_photon_spatial_marginal_is_quarter():
    rng = np.random.default_rng(7)
    proto = build(rand_spec(rng, 2))
    table = run_protocol(proto, noise_draws(rng, proto))
    assert abs(table.spatial_marginal - 0.25) < 1e-9


def test_builders_agree_on_photon_count():
    spec1, spec2 = ProtocolSpec(), ProtocolSpec(n=2)
    assert build_two_photon_circuit(spec1).n == 2
    assert build_single_photon_circuit(spec2).n == 1
    assert emit_canonical(build_n_photon_circuit(spec1).circuit) == emit_canonical(build_single_photon_circuit(spec1).circuit)
    assert emit_canonical(build_n_photon_circuit(spec2).circuit) == emit_canonical(build_two_photon_circuit(spec1).circuit)


def test_netlist_text_reproduces_builder():
    from timebinsim.netlist import compile_text

    proto = build(ProtocolSpec(n=2))
    assert emit_canonical(compile_text(proto.netlist())) == emit_canonical(proto.circuit)


def test_single_photon_correction_examples():
    proto = build(ProtocolSpec())
    a = correction_for(proto, TerminalPort(0, "A", 1, "a'")).photons[0]
    assert a.pol_flip and not a.pol_phase and not a.spatial_flip and not a.spatial_phase
    b = correction_for(proto, TerminalPort(0, "A", 1, "b'")).photons[0]
    assert not b.pol_flip and not b.pol_phase


def test_correction_rejects_unknown_ports():
    proto = build(ProtocolSpec(n=2))
    with pytest.raises(DomainError):
        correction_for(proto, (port(0, "p"),))
    with pytest.raises(DomainError):
        correction_for(proto, (port(1, "p"), port(0, "p")))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=10)
def test_corrections_restore_the_input(seed):
    rng = np.random.default_rng(seed)
    proto = build(rand_spec(rng, 2))
    out = execute(proto.circuit, proto.input_state(), proto.noise_bindings(noise_draws(rng, proto)))
    sel = postselect(out, proto.rule())
    assert len(sel.selected) == 64
    for ports, state in sel.selected.items():
        corrected = apply_correction(state, correction_for(proto, ports))
        assert abs(fidelity(corrected, proto.input_state()) - 1) < 1e-9


def test_no_vertical_amplitude_reaches_a_noise_channel():
    rng = np.random.default_rng(11)
    for n in (1, 2):
        proto = build(rand_spec(rng, n))
        bind = proto.noise_bindings(noise_draws(rng, proto))
        plan = list(proto.circuit.plan)
        state = proto.input_state()
        checked = 0
        for el in plan:
            if isinstance(el, NoiseChannel):
                rails = set(el.inputs)
                for key, amp in state.items():
                    for lab in key:
                        if lab.rail in rails:
                            assert lab.pol is Pol.H
                            checked += 1
            state = el.resolve(bind).apply(state)
        assert checked > 0
        assert state.max_abs_diff(execute(proto.circuit, proto.input_state(), bind)) < 1e-12
    assert len(list(iter_execute(proto.circuit, proto.input_state(), bind))) == len(plan)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=10)
def test_collective_phase_is_global(seed):
    rng = np.random.default_rng(seed)
    proto = build(rand_spec(rng, 2))
    base = noise_draws(rng, proto)
    shifted = {
        k: NoiseParams(v.theta + rng.uniform(0, 2 * math.pi), v.gamma, v.eta) for k, v in base.items()
    }
    t1, t2 = run_protocol(proto, base), run_protocol(proto, shifted)
    assert [r.ports for r in t1.rows] == [r.ports for r in t2.rows]
    for r1, r2 in zip(t1.rows, t2.rows):
        assert abs(r1.probability - r2.probability) < 1e-12
        assert abs(r1.fidelity - r2.fidelity) < 1e-12


def pair_pol_vector(proto, noise, ports):
    """Polarization amplitudes (HH, HV, VH, VV) of the selected pair state on the a,a spatial component."""
    out = execute(proto.circuit, proto.input_state(), proto.noise_bindings(noise))
    state = postselect(out, proto.rule()).selected[ports]
    (a1, _), (a2, _) = proto.input_rails
    vec = np.zeros(4, dtype=complex)
    for (l1, l2), amp in state.items():
        if l1.rail == a1 and l2.rail == a2:
            vec[2 * (l1.pol is Pol.V) + (l2.pol is Pol.V)] += amp
    return vec / np.linalg.norm(vec)


def same_up_to_phase(u, v):
    return abs(abs(np.vdot(u, v)) - 1) < 1e-9


PAIR_NOISE_SEED = 5


def pair_setup():
    rng = np.random.default_rng(PAIR_NOISE_SEED)
    alpha, beta = 0.6, 0.8j
    proto = build(ProtocolSpec(alpha, beta, S, S, n=2))
    return proto, noise_draws(rng, proto), alpha, beta


def test_pair_port_p1p2_needs_both_bit_flips():
    proto, noise, alpha, beta = pair_setup()
    ports = (port(0, "p"), port(1, "p"))
    assert same_up_to_phase(pair_pol_vector(proto, noise, ports), np.array([beta, 0, 0, alpha]))
    corr = correction_for(proto, ports)
    assert all(lc.pol_flip for lc in corr.photons)


def test_pair_port_q1l2_pattern_and_weight():
    proto, noise, alpha, beta = pair_setup()
    ports = (port(0, "q"), port(1, "l"))
    eta1 = noise[ChannelKey(0, "A", 1)].eta
    eta2p = noise[ChannelKey(1, "A", 2)].eta
    table = run_protocol(proto, noise)
    prob = {r.ports: r.probability for r in table.rows}[ports]
    # one of four arm pairs for this class
    assert abs(prob - abs(eta1 * eta2p) ** 2 / 256) < 1e-12
    assert same_up_to_phase(pair_pol_vector(proto, noise, ports), np.array([alpha, 0, 0, beta]))
    assert correction_for(proto, ports).describe() == "identity; identity"


def test_pair_port_k1l2_pattern():
    proto, noise, alpha, beta = pair_setup()
    ports = (port(0, "k"), port(1, "l"))
    assert same_up_to_phase(pair_pol_vector(proto, noise, ports), np.array([0, beta, -alpha, 0]))
    corr = correction_for(proto, ports)
    assert all(lc.pol_flip for lc in corr.photons)
    assert sum(bool(lc.pol_phase) for lc in corr.photons) == 1
