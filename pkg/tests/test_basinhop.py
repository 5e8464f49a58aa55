"""Basin-hopping orbital optimizer."""

import io
import json

import numpy as np
import pytest

import emorb.basinhop as bh
from emorb.basinhop import (
    OptimizerState,
    RunConfig,
    TraceRecord,
    accept_reject,
    propose_move,
    read_rotation,
    run_emo,
    write_rotation,
    write_trace,
)
from emorb.dmrg import expectation
from emorb.entangle import total_entropy
from emorb.model import HubbardSpec, build_hubbard, transform_integrals
from emorb.mpo import build_mpo
from emorb.mps import random_mps


def _dimer():
    return build_hubbard(HubbardSpec(2, 1, t=1.0, u=4.0))


def test_run_config_validation():
    cfg = RunConfig(d=8)
    assert cfg.chi == 16
    with pytest.raises(ValueError):
        RunConfig(d=0)
    with pytest.raises(ValueError):
        RunConfig(d=8, chi=4)
    with pytest.raises(ValueError):
        RunConfig(epsilon=0.0)


def test_accept_reject_rules():
    st = OptimizerState(mps=None, u=None, e_min=-1.0, s_min=0.5)
    assert accept_reject(-1.1, 0.9, st, 1e-8) == "accept"
    assert accept_reject(-0.9, 0.1, st, 1e-8) == "reject"
    assert accept_reject(-1.0 + 1e-10, 0.4, st, 1e-8) == "accept"
    assert accept_reject(-1.0 + 1e-10, 0.6, st, 1e-8) == "reject"


def test_dimer_converges_to_exact():
    s = _dimer()
    st, emo = run_emo(s, RunConfig(d=8, n_max=5, n_sweep=4, seed=0))
    assert np.isclose(st.e_min, 2.0 - 2.0 * np.sqrt(2.0), atol=1e-10)
    # the state is expressed in the rotated basis: contracting it with
    # the rotated Hamiltonian reproduces the recorded energy
    assert np.isclose(
        expectation(st.mps, build_mpo(emo)), st.e_min, atol=1e-9
    )
    assert np.max(np.abs(st.u.T @ st.u - np.eye(2))) < 1e-12


def test_propose_move_energy_invariance(rng):
    s = build_hubbard(HubbardSpec(3, 1, t=1.0, u=2.0))
    cfg = RunConfig(d=16, n_macro=2, seed=3)
    m = random_mps(3, (2, 0), 8, rng).normalize()
    st = OptimizerState(
        mps=m, u=np.eye(3), e_min=0.0, s_min=0.0,
        rng=np.random.default_rng(5),
    )
    e0 = expectation(m, build_mpo(s))
    cand, u_i, layers = propose_move(st, cfg)
    assert np.max(np.abs(u_i.T @ u_i - np.eye(3))) < 1e-12
    s2 = transform_integrals(s, u_i)
    assert np.isclose(expectation(cand, build_mpo(s2)), e0, atol=1e-8)
    # the returned rotation is the ordered product of the layers
    prod = np.eye(3)
    for lay in layers:
        prod = prod @ lay.rotation(3)
    assert np.max(np.abs(prod - u_i)) < 1e-12


def test_run_is_deterministic():
    s = _dimer()
    cfg = RunConfig(d=8, n_max=4, seed=11)
    a, _ = run_emo(s, cfg)
    b, _ = run_emo(s, cfg)
    assert np.array_equal(a.u, b.u)
    assert a.mps.to_bytes() == b.mps.to_bytes()
    for ra, rb in zip(a.trace, b.trace):
        assert (ra.e, ra.s_tot, ra.accepted) == (rb.e, rb.s_tot, rb.accepted)


def test_rejected_moves_leave_state_untouched():
    s = _dimer()
    full, _ = run_emo(s, RunConfig(d=8, n_max=10, seed=0))
    rejected = [r.iteration for r in full.trace if not r.accepted]
    assert rejected, "expected at least one rejection in 10 dimer moves"
    last_accept = max(r.iteration for r in full.trace if r.accepted)
    short, _ = run_emo(s, RunConfig(d=8, n_max=last_accept, seed=0))
    assert np.array_equal(full.u, short.u)
    assert full.mps.to_bytes() == short.mps.to_bytes()
    assert full.e_min == short.e_min


def test_failed_iteration_is_logged_as_reject(monkeypatch):
    s = _dimer()
    real = bh.propose_move
    calls = {"n": 0}

    def flaky(st, cfg):
        calls["n"] += 1
        if calls["n"] == 1:
            raise np.linalg.LinAlgError("synthetic failure")
        return real(st, cfg)

    monkeypatch.setattr(bh, "propose_move", flaky)
    st, _ = run_emo(s, RunConfig(d=8, n_max=3, seed=0))
    assert len(st.trace) == 4
    assert not st.trace[1].accepted
    assert np.isnan(st.trace[1].e)
    assert np.isclose(st.e_min, 2.0 - 2.0 * np.sqrt(2.0), atol=1e-9)


def test_trace_hook_and_writer():
    s = _dimer()
    seen = []
    st, _ = run_emo(s, RunConfig(d=8, n_max=2, seed=0), trace_hook=seen.append)
    assert [r.iteration for r in seen] == [0, 1, 2]
    assert seen[0].accepted is True
    buf = io.StringIO()
    write_trace(st.trace, buf)
    lines = buf.getvalue().strip().split("\n")
    assert len(lines) == 3
    rec = json.loads(lines[0])
    assert rec["iteration"] == 0
    assert rec["e"] == st.trace[0].e


def test_rotation_round_trip(rng):
    q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    buf = io.StringIO()
    write_rotation(q, buf)
    buf.seek(0)
    back = read_rotation(buf)
    assert np.array_equal(back, q)


def test_entropy_decreases_along_accepts():
    s = build_hubbard(HubbardSpec(4, 1, t=1.0, u=4.0))
    st, _ = run_emo(s, RunConfig(d=16, n_max=6, seed=1))
    accepted = [r for r in st.trace if r.accepted]
    assert st.e_min <= accepted[0].e + 1e-12
    assert np.isclose(st.s_min, total_entropy(st.mps), atol=1e-10)
