import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timebinsim.analysis import PostSelectionRule, arrival_time_decoder, postselect
from timebinsim.analysis.oracle import dense_oracle_execute, element_matrix, embedded_matrix, unitarity_error
from timebinsim.analysis.outcomes import OutcomeTable, outcome_table_from_state, run_protocol, summarize
from timebinsim.analysis.sweep import THREADS_ENV, SweepConfig, run_sweep, sweep_points, thread_count
from timebinsim.analysis.timing import arrival_class, decode_arrival
from timebinsim.elements import NoiseParams
from timebinsim.errors import DomainError, ResourceError
from timebinsim.netlist import compile, compile_text, execute
from timebinsim.netlist.generate import random_bindings, random_document
from timebinsim.protocols import ProtocolSpec, TerminalPort, build
from timebinsim.state import Label, MultiPhotonState, PhotonState, Pol, norm_squared

S = 1 / math.sqrt(2)


@pytest.fixture(scope="module")
def single():
    return build(ProtocolSpec(0.6, 0.8j, S, -S))


@pytest.fixture(scope="module")
def pair():
    return build(ProtocolSpec(0.6, 0.8j, S, S, n=2))


def random_input(circuit, rng):
    terms = {(Label(r, p, t),): complex(*rng.normal(size=2)) for r in circuit.sources for p in Pol for t in (0, 1)}
    s = MultiPhotonState(terms)
    return s * (1 / math.sqrt(norm_squared(s)))


# ---------------------------------------------------------------- timing


def test_decoder_k3_is_unique():
    rep = arrival_time_decoder(k=3)
    assert rep.unique and rep.collisions == ()
    assert "unique" in str(rep)


def test_decoder_k2_has_the_spatial_polarization_collision():
    rep = arrival_time_decoder(k=2)
    assert not rep.unique
    assert ((2, 0), (0, 2)) in rep.collisions


def test_decoder_k1_has_many_witnesses():
    rep = arrival_time_decoder(k=1)
    assert not rep.unique and len(rep.collisions) > 2
    with pytest.raises(DomainError):
        arrival_time_decoder(k=0)


@pytest.mark.parametrize("k", range(1, 8))
def test_decoder_agrees_with_brute_force(k):
    sums = [s + m * k for s in (0, 1, 2) for m in range(3)]
    assert arrival_time_decoder(k=k).unique == (len(set(sums)) == len(sums))


def test_arrival_classes():
    assert decode_arrival(4, 3) == (1, 3)
    assert arrival_class(4, 3) == "middle/SL/LS"
    assert arrival_class(0, 3) == "early/SS"
    assert arrival_class(2, 2) == "t=2"
    assert decode_arrival(9, 3) is None


# ---------------------------------------------------------------- post-selection


def test_all_early_state_is_discarded(single):
    rule = single.rule()
    rail = next(iter(rule.terminals))
    psi = PhotonState({Label(rail, Pol.H, 0): 0.6, Label(rail, Pol.V, 0): 0.8})
    ps = postselect(psi, rule)
    assert ps.success == 0 and abs(ps.discard - 1) < 1e-15 and ps.selected == {}


def test_rule_validation():
    with pytest.raises(DomainError):
        PostSelectionRule(0, 3)
    with pytest.raises(DomainError):
        PostSelectionRule(1, 0)
    with pytest.raises(DomainError):
        postselect(PhotonState({Label("nowhere", Pol.H, 4): 1}), PostSelectionRule(1, 3))


def test_noiseless_table(single):
    table = run_protocol(single)
    s = summarize(table)
    assert abs(s.total - 0.25) < 1e-12 and abs(s.worst_fidelity - 1) < 1e-12
    assert abs(table.spatial_marginal - 0.5) < 1e-12 and abs(table.pol_marginal - 0.5) < 1e-12
    groups: dict = {}
    for r in table.rows:
        (p,) = r.ports
        groups[(p.arm, p.channel)] = groups.get((p.arm, p.channel), 0) + r.probability
    assert all(abs(v - 1 / 16) < 1e-12 for v in groups.values())


def test_gamma_zero_ports(single):
    table = run_protocol(single, NoiseParams(0.0, 0.0, 1.0))
    probs = {r.ports[0]: r.probability for r in table.rows}
    for arm in "AB":
        for ch in (1, 2):
            assert probs.get(TerminalPort(0, arm, ch, "a'"), 0) == 0
            assert abs(probs[TerminalPort(0, arm, ch, "b'")] - 1 / 16) < 1e-12


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=15)
def test_selected_plus_discarded_is_complete(seed):
    rng = np.random.default_rng(seed)
    proto = build(ProtocolSpec(n=int(rng.integers(1, 3))))
    noise = {k: NoiseParams.from_angles(*rng.uniform(0, 1.5, 3)) for k in proto.channels}
    out = execute(proto.circuit, proto.input_state(), proto.noise_bindings(noise))
    ps = postselect(out, proto.rule())
    assert abs(ps.success + ps.discard - norm_squared(out)) < 1e-12
    assert all(abs(norm_squared(s) - 1) < 1e-12 for s in ps.selected.values())
    fast = run_protocol(proto, noise)
    assert abs(fast.success + fast.discard - 1) < 1e-12
    slow = outcome_table_from_state(proto, out)
    assert [r.ports for r in slow.rows] == [r.ports for r in fast.rows]
    for a, b in zip(slow.rows, fast.rows):
        assert abs(a.probability - b.probability) < 1e-12 and abs(a.fidelity - b.fidelity) < 1e-9
    assert slow.discarded.keys() == fast.discarded.keys()


def test_summaries(pair):
    empty = summarize(OutcomeTable(n=1, k=3, rows=[], discard=1.0))
    assert empty.total == 0 and empty.worst_fidelity is None and empty.pol_classes == {}
    s = summarize(run_protocol(pair, NoiseParams.from_angles(0.2, 0.7, 1.9)))
    assert len(s.pol_classes) == 16
    assert abs(sum(s.pol_classes.values()) - 1 / 16) < 1e-12
    assert len(s.per_port) == 64


# ---------------------------------------------------------------- dense oracle


def test_oracle_single_bs():
    c = compile_text("circuit c { rail a, b; bs a, b -> A, B; }")
    psi = PhotonState({Label("a", Pol.H): 0.6, Label("b", Pol.V, 1): 0.8})
    assert dense_oracle_execute(c, psi).max_abs_diff(execute(c, psi)) == 0


def test_oracle_on_built_circuit(pair):
    rng = np.random.default_rng(2)
    noise = {k: NoiseParams.from_angles(*rng.uniform(0, 1.5, 3)) for k in pair.channels}
    bind = pair.noise_bindings(noise)
    psi = pair.input_state()
    assert dense_oracle_execute(pair.circuit, psi, bind).max_abs_diff(execute(pair.circuit, psi, bind)) < 1e-12
    for el in pair.circuit.plan[:40]:
        bound = el.resolve(bind)
        assert unitarity_error(element_matrix(bound)) < 1e-12
        assert unitarity_error(embedded_matrix(bound)) < 1e-12


def test_oracle_resource_limit(single):
    with pytest.raises(ResourceError):
        dense_oracle_execute(single.circuit, single.input_state(), single.noise_bindings(), limit=64)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_oracle_agrees_on_random_circuits(seed):
    rng = np.random.default_rng(seed)
    c = compile(random_document(rng, shuffle=True))
    bind = random_bindings(c.symbols, rng)
    psi = random_input(c, rng)
    assert dense_oracle_execute(c, psi, bind).max_abs_diff(execute(c, psi, bind)) < 1e-12


# ---------------------------------------------------------------- sweeps


def test_single_photon_sweep_is_flat(single):
    rep = run_sweep(single, SweepConfig(draws=100, seed=4))
    assert len(rep.rows) == 100
    assert np.max(np.abs(rep.success() - 0.25)) < 1e-9


def test_pair_sweep_is_flat(pair):
    rep = run_sweep(pair, SweepConfig(draws=20, seed=4))
    assert np.max(np.abs(rep.success() - 0.0625)) < 1e-9


def test_sweep_is_deterministic_and_thread_order_stable(single):
    cfg = SweepConfig(draws=12, seed=9, random_inputs=True)
    one = run_sweep(single, cfg, threads=1)
    assert one.to_csv() == run_sweep(single, cfg, threads=1).to_csv()
    assert one.to_csv() == run_sweep(single, cfg, threads=4).to_csv()
    assert one.to_json() == run_sweep(single, cfg, threads=3).to_json()


def test_sweep_formats(single):
    rep = run_sweep(single, SweepConfig(draws=3, seed=1, collective=True))
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0][:4] == ["index", "theta", "chi", "phi"]
    assert rows[0][4:7] == ["total_success", "min_fidelity", "max_fidelity"]
    assert len(rows) == 4 and rows[1][0] == "0"
    doc = json.loads(rep.to_json())
    assert doc["columns"] == rows[0] and len(doc["rows"]) == 3
    assert abs(doc["rows"][0]["total_success"] - 0.25) < 1e-12


def test_sweep_grid(single):
    pts = sweep_points(single, SweepConfig(grid=3))
    assert len(pts) == 27
    chis = sorted({p.params["chi"] for p in pts})
    assert chis == [0.0, math.pi / 4, math.pi / 2]
    assert max(p.params["theta"] for p in pts) < 2 * math.pi


def test_sweep_per_channel_columns(single):
    (pt,) = sweep_points(single, SweepConfig(draws=1))
    assert "theta.p1.A1" in pt.params and "chi.p1.B2" in pt.params
    assert len(set(pt.noise.values())) == 4


def test_thread_count_from_environment(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)
    assert thread_count() == 1
    monkeypatch.setenv(THREADS_ENV, "3")
    assert thread_count() == 3
    monkeypatch.setenv(THREADS_ENV, "zero")
    with pytest.raises(DomainError):
        thread_count()


def test_sweep_config_validation():
    with pytest.raises(DomainError):
        SweepConfig(draws=-1)
    with pytest.raises(DomainError):
        SweepConfig(grid=0)
