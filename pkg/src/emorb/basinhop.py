"""Randomized global orbital optimization.

Each iteration proposes a random orbital-rotation move (a disentangling
sweep, then n_macro rounds of a random swap layer followed by another
disentangling sweep), transforms the integrals into the proposed basis,
runs a short DMRG, and accepts the move when the energy drops, or when
the energy is unchanged within epsilon and the total entropy drops.
Rotations always re-transform from the original integrals through the
accumulated orbital matrix, so round-off does not build up across
accepted moves.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .dmrg import SweepConfig, dmrg_run
from .entangle import (
    apply_gate,
    disentangle_sweep,
    random_swap_layer,
    total_entropy,
)
from .model import IntegralSet, transform_integrals
from .mpo import build_mpo
from .mps import MPS, random_mps

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    """Knobs for one optimization run."""

    d: int = 100
    chi: int = None
    epsilon: float = 1e-8
    n_macro: int = 5
    n_max: int = 20
    n_sweep: int = 4
    alpha: float = 0.5
    seed: int = 0
    convergence_tol: float = 1e-6
    max_passes: int = 20
    measure_p0: bool = None

    def __post_init__(self):
        if self.chi is None:
            object.__setattr__(self, "chi", 2 * self.d)
        if self.d < 1 or self.chi < self.d:
            raise ValueError("need d >= 1 and chi >= d")
        if self.epsilon <= 0 or self.n_macro < 0 or self.n_sweep < 1:
            raise ValueError("epsilon, n_macro, n_sweep out of range")


@dataclass(frozen=True)
class TraceRecord:
    """One optimizer iteration as logged to the trace."""

    iteration: int
    e: float
    s_tot: float
    accepted: bool
    p0_det: float = None
    ipr: float = None
    wall_time: float = 0.0

    def to_json(self):
        # wall_time stays out of the serialized trace so fixed-seed
        # reruns produce byte-identical files
        return json.dumps(
            {
                "iteration": self.iteration,
                "e": self.e,
                "sTot": self.s_tot,
                "accepted": self.accepted,
                "p0Det": self.p0_det,
                "ipr": self.ipr,
            }
        )


@dataclass
class OptimizerState:
    """Mutable optimizer state; updated only on accepted moves."""

    mps: MPS
    u: np.ndarray
    e_min: float
    s_min: float
    iteration: int = 0
    trace: list = field(default_factory=list)
    rng: np.random.Generator = None
    layers: list = field(default_factory=list)


def propose_move(st: OptimizerState, cfg: RunConfig):
    """One random move: disentangle, then n_macro swap+disentangle rounds.

    Returns (candidate MPS, induced K x K rotation, gate layers in
    application order).
    """
    k = st.mps.n_sites
    m, layers, _ = disentangle_sweep(
        st.mps, cfg.chi, cfg.convergence_tol, cfg.max_passes, cfg.alpha
    )
    layers = list(layers)
    for _ in range(cfg.n_macro):
        swap = random_swap_layer(k, st.rng)
        for g in swap.gates:
            m = m.move_center(g.site)
            m, _ = apply_gate(m, g, cfg.chi)
        layers.append(swap)
        m, more, _ = disentangle_sweep(
            m, cfg.chi, cfg.convergence_tol, cfg.max_passes, cfg.alpha
        )
        layers.extend(more)
    u_i = np.eye(k)
    for lay in layers:
        u_i = u_i @ lay.rotation(k)
    return m.normalize(), u_i, layers


def accept_reject(e, s_tot, st: OptimizerState, epsilon):
    """Algorithm decision: 'accept' iff dE < 0 or (|dE| < eps, dS < 0)."""
    de = e - st.e_min
    ds = s_tot - st.s_min
    if de < 0 or (abs(de) < epsilon and ds < 0):
        return "accept"
    return "reject"


def _measure_p0(m, cfg, iteration):
    if cfg.measure_p0 is False:
        return None
    if cfg.measure_p0 is None and m.n_sites > 36 and iteration % 5 != 0:
        return None
    from .analysis import largest_det

    _, c0 = largest_det(m)
    return c0 * c0


def run_emo(s: IntegralSet, cfg: RunConfig, initial=None, trace_hook=None):
    """Basin-hopping search for entanglement-minimized orbitals.

    Returns (final OptimizerState, integrals in the EMO basis).  The
    run is deterministic given cfg.seed; per-iteration failures are
    logged and treated as rejections.
    """
    k = s.n_orb
    rng = np.random.default_rng(cfg.seed)
    sector = (s.n_elec, s.two_s)
    sweep = SweepConfig(d=cfg.d, n_sweeps=cfg.n_sweep)
    if initial is None:
        initial = random_mps(k, sector, cfg.d, rng)
    psi, e_trace = dmrg_run(initial, build_mpo(s), sweep, rng=rng)
    psi = psi.normalize()
    st = OptimizerState(
        mps=psi,
        u=np.eye(k),
        e_min=e_trace[-1],
        s_min=total_entropy(psi, cfg.alpha),
        rng=rng,
    )
    st.trace.append(
        TraceRecord(0, st.e_min, st.s_min, True, _measure_p0(psi, cfg, 0))
    )
    if trace_hook is not None:
        trace_hook(st.trace[-1])

    for it in range(1, cfg.n_max + 1):
        t0 = time.perf_counter()
        st.iteration = it
        try:
            cand, u_i, layers = propose_move(st, cfg)
            u_new = st.u @ u_i
            s_new = transform_integrals(s, u_new)
            psi2, e_tr = dmrg_run(cand, build_mpo(s_new), sweep, rng=rng)
            psi2 = psi2.normalize()
            e = e_tr[-1]
            s_tot = total_entropy(psi2, cfg.alpha)
            decision = accept_reject(e, s_tot, st, cfg.epsilon)
        except Exception:
            log.exception("iteration %d failed; treating as reject", it)
            rec = TraceRecord(
                it, float("nan"), float("nan"), False,
                wall_time=time.perf_counter() - t0,
            )
            st.trace.append(rec)
            if trace_hook is not None:
                trace_hook(rec)
            continue
        accepted = decision == "accept"
        if accepted:
            st.mps = psi2
            st.u = u_new
            st.e_min = e
            st.s_min = s_tot
            st.layers.extend(layers)
        rec = TraceRecord(
            it, e, s_tot, accepted,
            _measure_p0(psi2, cfg, it) if accepted else None,
            wall_time=time.perf_counter() - t0,
        )
        st.trace.append(rec)
        if trace_hook is not None:
            trace_hook(rec)
    return st, transform_integrals(s, st.u)


def write_trace(trace, fh):
    """Trace records as JSONL, one record per line."""
    for rec in trace:
        fh.write(rec.to_json() + "\n")


def write_rotation(u, fh):
    """K x K rotation as whitespace-delimited text, 17 significant digits."""
    for row in np.asarray(u):
        fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def read_rotation(fh):
    return np.loadtxt(fh)
