"""Wavefunction diagnostics.

Perfect sampling from an MPS, pruned search for the largest-weight
determinant, inverse participation ratio estimation, one-body reduced
density matrices and natural orbitals.  Configurations are strings over
the alphabet '0ab2' with the leftmost character on the first orbital.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .blocktensor import ZERO, fuse
from .ed import exact_diag  # noqa: F401  (re-exported oracle)
from .model import IntegralSet
from .mps import ALPHABET, MPS, PHYS_SECTORS


@dataclass(frozen=True)
class AnalysisReport:
    """Summary of initial-state quality diagnostics for one MPS."""

    c0_det: float
    p0_det: float
    best_config: str
    s_tot: float
    ipr: float
    ipr_std_err: float
    n_samples: int

    def to_json(self):
        return json.dumps(
            {
                "c0Det": self.c0_det,
                "p0Det": self.p0_det,
                "bestConfig": self.best_config,
                "sTot": self.s_tot,
                "ipr": self.ipr,
                "iprStdErr": self.ipr_std_err,
                "nSamples": self.n_samples,
            }
        )


def amplitude(m: MPS, config):
    """Exact amplitude of one configuration; 0 on sector mismatch."""
    return m.amplitude(config)


def _site_step(site, sector, vec, p):
    """Advance a left partial contraction through one physical choice."""
    ps = PHYS_SECTORS[p]
    blk = site.blocks.get((sector, ps, fuse(sector, ps)))
    if blk is None:
        return None, None
    return fuse(sector, ps), vec @ blk[:, 0, :]


def perfect_sample(m: MPS, rng):
    """Draw one configuration with probability exactly |Psi(cfg)|^2.

    Sequential conditional sampling through a right-canonical chain; no
    rejection.  Returns (config, amplitude).
    """
    if abs(m.norm() - 1.0) > 1e-8:
        raise ValueError("perfect sampling requires a normalized MPS")
    m = m.move_center(0)
    sector = ZERO
    vec = np.ones((1, 1))
    chars = []
    for site in m.sites:
        branches = []
        weights = []
        for p in range(4):
            sec, w = _site_step(site, sector, vec, p)
            if sec is None:
                branches.append(None)
                weights.append(0.0)
            else:
                branches.append((sec, w))
                weights.append(float(np.sum(w * w)))
        total = sum(weights)
        r = rng.random() * total
        acc = 0.0
        p = 3
        for i in range(4):
            acc += weights[i]
            if r < acc:
                p = i
                break
        sector, vec = branches[p]
        chars.append(ALPHABET[p])
    return "".join(chars), float(vec[0, 0])


def largest_det(m: MPS):
    """The configuration maximizing |Psi(cfg)|, found exactly.

    Depth-first branch and bound: with right-canonical tails, the
    2-norm of the left partial contraction bounds every completion, so
    branches with bound below the current best are pruned.  Children
    are visited in descending bound order; ties within 1e-12 resolve
    to the lexicographically smallest configuration.
    """
    m = m.move_center(0)
    k_sites = m.n_sites
    best_amp = 0.0
    best_cfg = None
    # stack entries: (prefix, sector, vector); children pushed so the
    # highest bound is expanded next
    stack = [("", ZERO, np.ones((1, 1)))]
    while stack:
        prefix, sector, vec = stack.pop()
        k = len(prefix)
        if k == k_sites:
            amp = abs(float(vec[0, 0]))
            if amp > best_amp + 1e-12 or (
                amp >= best_amp - 1e-12
                and (best_cfg is None or prefix < best_cfg)
            ):
                best_amp, best_cfg = max(amp, best_amp), prefix
            continue
        children = []
        for p in range(4):
            sec, w = _site_step(m.sites[k], sector, vec, p)
            if sec is None:
                continue
            bound = float(np.linalg.norm(w))
            if bound >= best_amp - 1e-12:
                children.append((bound, ALPHABET[p], sec, w))
        # best bound ends up on top of the stack
        children.sort(key=lambda c: c[0])
        for bound, ch, sec, w in children:
            stack.append((prefix + ch, sec, w))
    return best_cfg, best_amp


def ipr(m: MPS, n_samples, rng):
    """Monte Carlo inverse participation ratio, sum_n |Psi^n|^4.

    Under perfect sampling the mean of |Psi(cfg)|^2 estimates the IPR;
    returns (estimate, standard error).
    """
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    probs = np.empty(n_samples)
    for i in range(n_samples):
        _, amp = perfect_sample(m, rng)
        probs[i] = amp * amp
    est = float(np.mean(probs))
    err = float(np.std(probs, ddof=1) / np.sqrt(n_samples))
    return est, err


def one_rdm(m: MPS):
    """Spin-summed 1RDM, D_pq = <Psi| sum_s a+_ps a_qs |Psi>."""
    from .dmrg import expectation
    from .mpo import build_mpo

    k = m.n_sites
    d = np.zeros((k, k))
    for p in range(k):
        for q in range(p + 1):
            h = np.zeros((k, k))
            h[p, q] = h[q, p] = 1.0
            val = expectation(
                m, build_mpo(IntegralSet(h=h, v=np.zeros((k,) * 4)))
            )
            d[p, q] = d[q, p] = val / (1.0 if p == q else 2.0)
    return d


def natural_orbitals(d):
    """Eigenvectors of the 1RDM ordered by descending occupation."""
    d = np.asarray(d, dtype=float)
    if np.max(np.abs(d - d.T)) > 1e-10:
        raise ValueError("1RDM must be symmetric")
    occ, vecs = np.linalg.eigh(d)
    order = np.argsort(occ)[::-1]
    u = vecs[:, order]
    # deterministic column signs
    for j in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
    return u
