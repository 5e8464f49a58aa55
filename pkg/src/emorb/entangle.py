"""Entanglement measurement and manipulation.

Schmidt spectra along the chain, Renyi entropies, the two-site gate
induced by a Givens rotation of two adjacent orbitals, local theta
optimization, the disentangling sweep, and random swap layers.

Sign convention: when the orbitals rotate by G(+theta), the wavefunction
amplitudes transform with the two-site gate at -theta, which keeps the
physical state unchanged.  Entropies use the natural logarithm.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .blocktensor import BlockTensor, NullStateError, fuse, svd_truncate
from .mps import MPS, PHYS_SECTORS

_NO_TRUNC = 10**9
_IDX = {s: i for i, s in enumerate(PHYS_SECTORS)}


@dataclass(frozen=True)
class SchmidtSpectrum:
    """Descending singular values at the bipartition (bond, bond+1)."""

    bond: int
    values: np.ndarray


@dataclass(frozen=True)
class GivensGate:
    """A rotation of orbitals (site, site + 1) by angle theta."""

    site: int
    theta: float


@dataclass(frozen=True)
class GateLayer:
    """An ordered sequence of Givens gates applied to an MPS."""

    kind: str
    gates: tuple

    def rotation(self, n_orb):
        """The K x K orbital rotation the layer induces, in gate order."""
        u = np.eye(n_orb)
        for g in self.gates:
            u = u @ embed_givens(n_orb, g.site, g.theta)
        return u

    def to_json(self):
        return json.dumps(
            {
                "kind": self.kind,
                "gates": [
                    {"site": g.site, "theta": g.theta} for g in self.gates
                ],
            }
        )

    @classmethod
    def from_json(cls, line):
        d = json.loads(line)
        gates = tuple(
            GivensGate(int(g["site"]), float(g["theta"])) for g in d["gates"]
        )
        return cls(kind=d["kind"], gates=gates)


def givens(theta):
    """The 2x2 rotation [[c, -s], [s, c]]."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def embed_givens(n_orb, site, theta):
    """G(theta) acting on orbitals (site, site + 1) inside the identity."""
    u = np.eye(n_orb)
    u[site:site + 2, site:site + 2] = givens(theta)
    return u


def gate_matrix(theta):
    """The 16 x 16 two-site gate on the product basis {0,a,b,2} x {0,a,b,2}.

    g[4*n1 + n2, 4*m1 + m2] is the amplitude of |n1 n2> in the rotated
    basis state |m1 m2>.  Block diagonal over the nine (N, 2Sz) sectors:
    four invariant singlets, four doublets transforming by G(theta), and
    one quartet on (|20>, |02>, |ab>, |ba>).
    """
    c, s = np.cos(theta), np.sin(theta)
    g = np.eye(16)

    def put(basis, block):
        ids = [4 * i + j for i, j in basis]
        g[np.ix_(ids, ids)] = block

    g2 = np.array([[c, -s], [s, c]])
    # (|sigma 0>, |0 sigma>) and (|sigma 2>, |2 sigma>) for sigma = a, b
    for sig in (1, 2):
        put(((sig, 0), (0, sig)), g2)
        put(((sig, 3), (3, sig)), g2)
    # (|20>, |02>, |ab>, |ba>)
    put(
        ((3, 0), (0, 3), (1, 2), (2, 1)),
        np.array(
            [
                [c * c, s * s, -c * s, c * s],
                [s * s, c * c, c * s, -c * s],
                [c * s, -c * s, c * c, s * s],
                [-c * s, c * s, s * s, c * c],
            ]
        ),
    )
    return g


def _rotate_twodot(t, g):
    """Apply a 16 x 16 two-site gate to a merged (l, p1, p2, r) tensor."""
    out = {}
    for (sl, s1, s2, sr), blk in t.blocks.items():
        n = 4 * _IDX[s1] + _IDX[s2]
        for m1 in range(4):
            for m2 in range(4):
                coeff = g[4 * m1 + m2, n]
                if coeff == 0.0:
                    continue
                key = (sl, PHYS_SECTORS[m1], PHYS_SECTORS[m2], sr)
                if key in out:
                    out[key] = out[key] + coeff * blk
                else:
                    out[key] = coeff * blk
    return BlockTensor(t.legs, t.charge, out, validate=False)


def schmidt_all(m: MPS):
    """Schmidt spectra at all K - 1 bonds of a normalized MPS."""
    specs = []
    for k in range(m.n_sites - 1):
        m = m.move_center(k)
        _, spec, _, _ = svd_truncate(m.sites[k], (0, 1), _NO_TRUNC)
        specs.append(SchmidtSpectrum(k, spec.values))
    return specs


def renyi(s, alpha=0.5, von_neumann=False):
    """Renyi entropy S_alpha = ln(sum lambda^(2 alpha)) / (1 - alpha).

    `s` is a SchmidtSpectrum or an array of singular values.  Pass
    von_neumann=True for the alpha -> 1 limit; alpha = 1 without the
    flag is an error.
    """
    vals = np.asarray(getattr(s, "values", s), dtype=float)
    p = vals**2
    p = p[p > 0.0]
    if von_neumann:
        return float(-np.sum(p * np.log(p)))
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if alpha == 1:
        raise ValueError("alpha = 1 requires von_neumann=True")
    return float(np.log(np.sum(p**alpha)) / (1.0 - alpha))


def total_entropy(m: MPS, alpha=0.5):
    """S_tot: the sum of bond Renyi entropies along the chain."""
    return sum(renyi(s, alpha) for s in schmidt_all(m))


def apply_gate(m: MPS, g: GivensGate, chi, center_after=None):
    """Rotate orbitals (g.site, g.site + 1) by G(g.theta).

    Amplitudes get the two-site gate at -g.theta.  The canonical center
    must already sit at g.site or g.site + 1.  Returns the rotated MPS
    (center at `center_after`, default: where it was) and the squared
    weight discarded by the chi-truncated re-split.
    """
    k = g.site
    if m.center not in (k, k + 1):
        raise ValueError(
            f"center must be at site {k} or {k + 1}, found {m.center}"
        )
    if center_after is None:
        center_after = "left" if m.center == k else "right"
    theta = _rotate_twodot(m.merge_two_site(k), gate_matrix(-g.theta))
    return m.split_two_site(k, theta, chi, center_after=center_after)


def _twodot_entropy(t, alpha=0.5):
    """S_alpha across the middle cut of a (l, p1, p2, r) tensor.

    Singular values only (no U/V), grouped per bond sector of the cut;
    cheaper than svd_truncate inside the theta objective loop.
    """
    groups = {}
    for (sl, s1, s2, sr), blk in t.blocks.items():
        q = fuse(sl, s1)
        rows, cols, mats = groups.setdefault(q, ({}, {}, {}))
        dl, dr = blk.shape[0], blk.shape[3]
        rows.setdefault((sl, s1), dl)
        cols.setdefault((s2, sr), dr)
        mats[(sl, s1), (s2, sr)] = blk.reshape(dl, dr)
    vals = []
    for rows, cols, mats in groups.values():
        roff, total = {}, 0
        for key, d in rows.items():
            roff[key] = total
            total += d
        coff, ctot = {}, 0
        for key, d in cols.items():
            coff[key] = ctot
            ctot += d
        mat = np.zeros((total, ctot))
        for (rk, ck), m in mats.items():
            mat[
                roff[rk]:roff[rk] + m.shape[0],
                coff[ck]:coff[ck] + m.shape[1],
            ] = m
        vals.append(np.linalg.svd(mat, compute_uv=False))
    lam = np.concatenate(vals)
    nrm = np.linalg.norm(lam)
    if nrm == 0.0:
        raise NullStateError("null two-dot tensor")
    return renyi(lam / nrm, alpha)


# basis functions spanning every entry of gate_matrix(theta):
# f = [1, cos, sin, cos^2, sin^2, cos*sin]
_N_SYM = 6


def _gate_symbolic():
    """gate_matrix(theta) as sparse symbolic entries.

    Returns a list over the source composite index n of (m, j, coeff)
    triples meaning g[m, n] = coeff * f_j(theta).
    """
    entries = {}

    def put(pairs, block):
        ids = [4 * a + b for a, b in pairs]
        for bi, m in enumerate(ids):
            for bj, n in enumerate(ids):
                entries[(m, n)] = block[bi][bj]

    c, s, c2, s2, cs = (1, 1.0), (2, 1.0), (3, 1.0), (4, 1.0), (5, 1.0)
    mc, ms, mcs = (1, -1.0), (2, -1.0), (5, -1.0)
    g2 = [[c, ms], [s, c]]
    for sig in (1, 2):
        put(((sig, 0), (0, sig)), g2)
        put(((sig, 3), (3, sig)), g2)
    put(
        ((3, 0), (0, 3), (1, 2), (2, 1)),
        [
            [c2, s2, mcs, cs],
            [s2, c2, cs, mcs],
            [cs, mcs, c2, s2],
            [mcs, cs, s2, c2],
        ],
    )
    for i in range(16):
        entries.setdefault((i, i), (0, 1.0))
    out = [[] for _ in range(16)]
    for (m, n), (j, coeff) in entries.items():
        out[n].append((m, j, coeff))
    return out


_GATE_SYM = _gate_symbolic()


def _f_values(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([1.0, c, s, c * c, s * s, c * s])


class _ThetaObjective:
    """S_alpha of the gate-rotated two-dot as a function of theta.

    The rotated tensor is linear in the six basis functions of theta,
    so each bond-sector matrix of the middle cut is preassembled as a
    stack of six coefficient matrices; evaluating one theta is then a
    weighted sum plus singular values.
    """

    def __init__(self, twodot, alpha=0.5):
        self.alpha = alpha
        dims = {}
        for (sl, s1, s2, sr), blk in twodot.blocks.items():
            n = 4 * _IDX[s1] + _IDX[s2]
            dl, dr = blk.shape[0], blk.shape[3]
            for m, j, coeff in _GATE_SYM[n]:
                m1, m2 = divmod(m, 4)
                q = fuse(sl, PHYS_SECTORS[m1])
                rows, cols = dims.setdefault(q, ({}, {}))
                rows.setdefault((sl, PHYS_SECTORS[m1]), dl)
                cols.setdefault((PHYS_SECTORS[m2], sr), dr)
        self.stacks = {}
        offsets = {}
        for q, (rows, cols) in dims.items():
            roff, rtot = {}, 0
            for key, d in sorted(rows.items()):
                roff[key] = rtot
                rtot += d
            coff, ctot = {}, 0
            for key, d in sorted(cols.items()):
                coff[key] = ctot
                ctot += d
            self.stacks[q] = np.zeros((_N_SYM, rtot, ctot))
            offsets[q] = (roff, coff)
        for (sl, s1, s2, sr), blk in twodot.blocks.items():
            n = 4 * _IDX[s1] + _IDX[s2]
            mat = blk.reshape(blk.shape[0], blk.shape[3])
            for m, j, coeff in _GATE_SYM[n]:
                m1, m2 = divmod(m, 4)
                q = fuse(sl, PHYS_SECTORS[m1])
                roff, coff = offsets[q]
                i0 = roff[(sl, PHYS_SECTORS[m1])]
                j0 = coff[(PHYS_SECTORS[m2], sr)]
                self.stacks[q][
                    j, i0:i0 + mat.shape[0], j0:j0 + mat.shape[1]
                ] += coeff * mat

    def __call__(self, theta):
        # amplitudes rotate with the gate at -theta
        f = _f_values(-theta)
        vals = [
            np.linalg.svd(
                np.tensordot(f, stack, axes=1), compute_uv=False
            )
            for stack in self.stacks.values()
        ]
        lam = np.concatenate(vals)
        nrm = np.linalg.norm(lam)
        if nrm == 0.0:
            raise NullStateError("null two-dot tensor")
        return renyi(lam / nrm, self.alpha)


def optimize_theta(twodot, alpha=0.5, grid_points=49):
    """Angle in [0, pi] minimizing S_alpha of the gate-rotated two-dot.

    The objective is a smooth pi-periodic function of theta with a
    handful of basins, so a coarse periodic grid finds every basin;
    each grid-local minimum is then refined by bounded Brent search and
    the best refined value wins.
    """

    objective = _ThetaObjective(twodot, alpha)

    # pi-periodic grid; the endpoint theta = pi duplicates theta = 0
    n = grid_points
    grid = np.arange(n) * (np.pi / n)
    vals = np.array([objective(t) for t in grid])
    h = np.pi / n
    best_t = float(grid[np.argmin(vals)])
    best_s = float(vals.min())
    for i in range(n):
        if vals[i] <= vals[(i - 1) % n] and vals[i] <= vals[(i + 1) % n]:
            res = minimize_scalar(
                objective, bounds=(grid[i] - h, grid[i] + h),
                method="bounded", options={"xatol": 1e-12},
            )
            if res.fun < best_s:
                best_s = float(res.fun)
                best_t = float(res.x)
    best_t = best_t % np.pi
    return best_t, best_s


def disentangle_sweep(
    m: MPS, chi, convergence_tol=1e-6, max_passes=20, alpha=0.5
):
    """Alternating passes of local theta optimization at every bond.

    Stops when S_tot changes by less than `convergence_tol` between
    passes or after `max_passes`.  Returns (mps, layers, s_tot_trace)
    where trace[0] is the entropy before any gate.
    """
    kbonds = m.n_sites - 1
    s_prev = total_entropy(m, alpha)
    trace = [s_prev]
    layers = []
    for p in range(max_passes):
        bonds = range(kbonds) if p % 2 == 0 else range(kbonds - 1, -1, -1)
        gates = []
        for k in bonds:
            m = m.move_center(k if p % 2 == 0 else k + 1)
            twodot = m.merge_two_site(k)
            s0 = _twodot_entropy(twodot, alpha)
            theta, s_star = optimize_theta(twodot, alpha)
            if s0 - s_star > 1e-12:
                g = GivensGate(k, theta)
                m, _ = apply_gate(
                    m, g, chi,
                    center_after="right" if p % 2 == 0 else "left",
                )
                gates.append(g)
        layers.append(GateLayer(kind="disentangle", gates=tuple(gates)))
        s_now = total_entropy(m, alpha)
        trace.append(s_now)
        if abs(s_prev - s_now) < convergence_tol:
            break
        s_prev = s_now
    return m, layers, trace


def random_swap_layer(n_orb, rng):
    """One gate per bond, theta drawn from {0, pi/2} with p = 1/2."""
    gates = tuple(
        GivensGate(k, float(rng.integers(0, 2)) * (np.pi / 2.0))
        for k in range(n_orb - 1)
    )
    return GateLayer(kind="randomSwap", gates=gates)
