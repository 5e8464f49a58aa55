"""Exact diagonalization oracle in the occupation-number basis.

Spin orbitals are interleaved, mu = 2k + sigma with sigma = 0 for alpha
and 1 for beta, and a determinant is the product of creation operators
in ascending mu order applied to the vacuum.  This matches the MPS
local basis where |2> = a+_alpha a+_beta |0>.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import IntegralSet

ALPHABET = "0ab2"


def config_to_bits(cfg):
    """Occupation string over '0ab2' -> spin-orbital bitmask."""
    bits = 0
    for k, ch in enumerate(cfg):
        i = ALPHABET.index(ch)
        if i in (1, 3):
            bits |= 1 << (2 * k)
        if i in (2, 3):
            bits |= 1 << (2 * k + 1)
    return bits


def bits_to_config(bits, n_orb):
    out = []
    for k in range(n_orb):
        a = (bits >> (2 * k)) & 1
        b = (bits >> (2 * k + 1)) & 1
        out.append(ALPHABET[a + 2 * b])
    return "".join(out)


def sector_basis(n_orb, sector):
    """All determinants in the (n_elec, 2Sz) sector, ascending bitmask."""
    n_elec, two_sz = sector
    n_a = (n_elec + two_sz) // 2
    n_b = (n_elec - two_sz) // 2
    if n_a < 0 or n_b < 0 or n_a + n_b != n_elec or (n_elec + two_sz) % 2:
        raise ValueError(f"sector {sector} is not physical")
    if n_a > n_orb or n_b > n_orb:
        raise ValueError(f"sector {sector} needs more than {n_orb} orbitals")
    from itertools import combinations

    dets = []
    for alphas in combinations(range(n_orb), n_a):
        abits = sum(1 << (2 * k) for k in alphas)
        for betas in combinations(range(n_orb), n_b):
            dets.append(abits + sum(1 << (2 * k + 1) for k in betas))
    return sorted(dets)


def _annihilate(bits, mu):
    if not (bits >> mu) & 1:
        return None, 0
    sign = -1 if bin(bits & ((1 << mu) - 1)).count("1") % 2 else 1
    return bits & ~(1 << mu), sign


def _create(bits, mu):
    if (bits >> mu) & 1:
        return None, 0
    sign = -1 if bin(bits & ((1 << mu) - 1)).count("1") % 2 else 1
    return bits | (1 << mu), sign


def _build_sector_matrix(s: IntegralSet, dets):
    k = s.n_orb
    index = {d: i for i, d in enumerate(dets)}
    rows, cols, vals = [], [], []

    hij = [
        (p, q, s.h[p, q])
        for p in range(k)
        for q in range(k)
        if s.h[p, q] != 0.0
    ]
    vset = [
        (int(p), int(q), int(r), int(t), s.v[p, q, r, t])
        for p, q, r, t in np.argwhere(s.v != 0.0)
    ]

    for col, det in enumerate(dets):
        amp = {}

        def add(target, coeff):
            amp[target] = amp.get(target, 0.0) + coeff

        for p, q, hpq in hij:
            for sig in (0, 1):
                b1, s1 = _annihilate(det, 2 * q + sig)
                if b1 is None:
                    continue
                b2, s2 = _create(b1, 2 * p + sig)
                if b2 is None:
                    continue
                add(b2, hpq * s1 * s2)

        for p, q, r, t, vpqrt in vset:
            for sig in (0, 1):
                b1, s1 = _annihilate(det, 2 * r + sig)
                if b1 is None:
                    continue
                for tau in (0, 1):
                    b2, s2 = _annihilate(b1, 2 * t + tau)
                    if b2 is None:
                        continue
                    b3, s3 = _create(b2, 2 * q + tau)
                    if b3 is None:
                        continue
                    b4, s4 = _create(b3, 2 * p + sig)
                    if b4 is None:
                        continue
                    add(b4, 0.5 * vpqrt * s1 * s2 * s3 * s4)

        for target, coeff in amp.items():
            row = index.get(target)
            if row is None:
                raise ValueError("Hamiltonian leaves the sector basis")
            rows.append(row)
            cols.append(col)
            vals.append(coeff)

    dim = len(dets)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    if s.e_core:
        mat = mat + s.e_core * sp.identity(dim, format="csr")
    return mat


def exact_diag(s: IntegralSet, sector, dim_cap=10**6):
    """Lowest eigenpair of H restricted to the (n_elec, 2Sz) sector.

    Returns (e0, vector, dets) where dets lists the basis bitmasks in
    the order the vector components refer to.
    """
    dets = sector_basis(s.n_orb, sector)
    dim = len(dets)
    if dim > dim_cap:
        raise ValueError(f"sector dimension {dim} exceeds cap {dim_cap}")
    mat = _build_sector_matrix(s, dets)
    if dim <= 400:
        w, vmat = np.linalg.eigh(mat.toarray())
        e0, vec = w[0], vmat[:, 0]
    else:
        w, vmat = spla.eigsh(mat, k=1, which="SA")
        e0, vec = w[0], vmat[:, 0]
    # fix the overall sign for reproducibility
    imax = int(np.argmax(np.abs(vec)))
    if vec[imax] < 0:
        vec = -vec
    return float(e0), vec, dets


def dense_hamiltonian(s: IntegralSet):
    """Full Fock-space H as a (4,)*K x (4,)*K dense array axis-ordered
    like MPS.to_dense; small K only."""
    k = s.n_orb
    if 4**k > 5000:
        raise ValueError("system too large for the dense oracle")
    dets = [config_to_bits(_index_to_config(i, k)) for i in range(4**k)]
    index = {d: i for i, d in enumerate(dets)}
    mat = np.zeros((4**k, 4**k))

    by_sector = {}
    for d in dets:
        n = bin(d).count("1")
        tsz = sum(
            (1 if (d >> (2 * a)) & 1 else 0) - (1 if (d >> (2 * a + 1)) & 1 else 0)
            for a in range(k)
        )
        by_sector.setdefault((n, tsz), []).append(d)
    for sec, group in by_sector.items():
        block = _build_sector_matrix(s, sorted(group)).toarray()
        ids = [index[d] for d in sorted(group)]
        mat[np.ix_(ids, ids)] = block
    return mat.reshape((4,) * k + (4,) * k)


def _index_to_config(i, k):
    # C-order flat index of a (4,)*K array: site 0 is the leading axis
    return "".join(ALPHABET[d] for d in np.unravel_index(i, (4,) * k))
