"""Block-sparse tensors with conserved U(1)xU(1) quantum numbers.

A sector is a pair ``(n, tsz)`` of particle number and doubled spin
projection.  Every tensor leg carries a direction (+1 outgoing / -1
incoming) and a map from sectors to dimensions; a dense block is stored
only for index combinations whose signed sector sum equals the tensor's
total charge.  All arithmetic is real (float64).
"""

from __future__ import annotations

import itertools

import numpy as np

Sector = tuple[int, int]

ZERO: Sector = (0, 0)


def fuse(a: Sector, b: Sector) -> Sector:
    return (a[0] + b[0], a[1] + b[1])


def negate(a: Sector) -> Sector:
    return (-a[0], -a[1])


class LegMismatchError(ValueError):
    """Raised when contracted legs disagree in direction or sector map."""


class BondSpectrum:
    """Singular values on a symmetric bond: flat descending plus per-sector."""

    __slots__ = ("values", "by_sector")

    def __init__(self, by_sector):
        self.by_sector = {q: np.asarray(v, dtype=float) for q, v in by_sector.items()}
        if self.by_sector:
            self.values = np.sort(np.concatenate(list(self.by_sector.values())))[::-1]
        else:
            self.values = np.zeros(0)

    def scaled(self, c):
        return BondSpectrum({q: c * v for q, v in self.by_sector.items()})

    def square_sum(self):
        return float(np.sum(self.values**2))

    def __len__(self):
        return len(self.values)


class NullStateError(ValueError):
    """Raised when a factorization is requested of an (all-)zero tensor."""


class Leg:
    """One tensor leg: a direction and an ordered sector -> dimension map."""

    __slots__ = ("dirn", "dims", "sectors")

    def __init__(self, dirn, dims):
        if dirn not in (1, -1):
            raise ValueError(f"leg direction must be +1 or -1, got {dirn}")
        self.dirn = dirn
        self.dims = dict(dims)
        for s, d in self.dims.items():
            if d <= 0:
                raise ValueError(f"sector {s} has non-positive dimension {d}")
        self.sectors = tuple(self.dims)

    def dual(self):
        return Leg(-self.dirn, self.dims)

    @property
    def dim(self):
        return sum(self.dims.values())

    def offsets(self):
        off, pos = {}, 0
        for s in self.sectors:
            off[s] = pos
            pos += self.dims[s]
        return off

    def compatible(self, other):
        """True if `other` can be contracted against this leg."""
        return self.dirn == -other.dirn and self.dims == other.dims

    def __eq__(self, other):
        return (
            isinstance(other, Leg)
            and self.dirn == other.dirn
            and self.dims == other.dims
        )

    def __hash__(self):
        return hash((self.dirn, tuple(sorted(self.dims.items()))))

    def __repr__(self):
        return f"Leg(dirn={self.dirn:+d}, dims={self.dims})"


class BlockTensor:
    """Immutable-by-convention block-sparse tensor.

    blocks: dict mapping a per-leg sector assignment (tuple of sectors,
    one per leg) to a dense ndarray whose shape matches the per-leg
    sector dimensions.
    """

    __slots__ = ("legs", "charge", "blocks")

    def __init__(self, legs, charge=ZERO, blocks=None, validate=True):
        self.legs = tuple(legs)
        self.charge = charge
        self.blocks = {} if blocks is None else dict(blocks)
        if validate:
            self._validate()

    def _validate(self):
        for key, arr in self.blocks.items():
            if len(key) != len(self.legs):
                raise ValueError(f"block key {key} has wrong rank")
            if not self.allowed(key):
                raise ValueError(
                    f"block {key} violates charge rule for total charge "
                    f"{self.charge}"
                )
            shape = tuple(leg.dims.get(s) for leg, s in zip(self.legs, key))
            if None in shape:
                raise ValueError(f"block {key} uses sector absent from leg")
            if arr.shape != shape:
                raise ValueError(
                    f"block {key} has shape {arr.shape}, expected {shape}"
                )

    def allowed(self, key):
        n = tsz = 0
        for leg, s in zip(self.legs, key):
            n += leg.dirn * s[0]
            tsz += leg.dirn * s[1]
        return (n, tsz) == self.charge

    def allowed_keys(self):
        """All structurally valid block keys (cartesian; small legs only)."""
        for key in itertools.product(*(leg.sectors for leg in self.legs)):
            if self.allowed(key):
                yield key

    @property
    def ndim(self):
        return len(self.legs)

    def norm(self):
        return np.sqrt(
            sum(float(np.vdot(b, b)) for b in self.blocks.values())
        )

    def max_abs(self):
        return max(
            (float(np.max(np.abs(b))) for b in self.blocks.values()),
            default=0.0,
        )

    def copy(self):
        return BlockTensor(
            self.legs,
            self.charge,
            {k: v.copy() for k, v in self.blocks.items()},
            validate=False,
        )

    def scale(self, c):
        return BlockTensor(
            self.legs,
            self.charge,
            {k: c * v for k, v in self.blocks.items()},
            validate=False,
        )

    __mul__ = scale
    __rmul__ = scale

    def __neg__(self):
        return self.scale(-1.0)

    def _binary(self, other, op):
        if not isinstance(other, BlockTensor):
            return NotImplemented
        if self.legs != other.legs or self.charge != other.charge:
            raise LegMismatchError("tensors have incompatible structure")
        out = {k: v.copy() for k, v in self.blocks.items()}
        for k, v in other.blocks.items():
            if k in out:
                out[k] = op(out[k], v)
            else:
                out[k] = op(0.0, v)
        return BlockTensor(self.legs, self.charge, out, validate=False)

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def transpose(self, perm):
        perm = tuple(perm)
        legs = tuple(self.legs[i] for i in perm)
        blocks = {
            tuple(k[i] for i in perm): np.ascontiguousarray(
                v.transpose(perm)
            )
            for k, v in self.blocks.items()
        }
        return BlockTensor(legs, self.charge, blocks, validate=False)

    def drop_small(self, cutoff):
        """Remove blocks whose max-abs entry is below `cutoff`."""
        blocks = {
            k: v
            for k, v in self.blocks.items()
            if np.max(np.abs(v)) >= cutoff
        }
        return BlockTensor(self.legs, self.charge, blocks, validate=False)

    def to_dense(self):
        shape = tuple(leg.dim for leg in self.legs)
        offs = [leg.offsets() for leg in self.legs]
        out = np.zeros(shape)
        for key, arr in self.blocks.items():
            idx = tuple(
                slice(off[s], off[s] + leg.dims[s])
                for leg, off, s in zip(self.legs, offs, key)
            )
            out[idx] = arr
        return out

    @classmethod
    def random(cls, legs, charge=ZERO, rng=None):
        """Gaussian-random tensor with every structurally allowed block."""
        rng = np.random.default_rng(rng)
        t = cls(legs, charge, validate=False)
        blocks = {}
        for key in t.allowed_keys():
            shape = tuple(
                leg.dims[s] for leg, s in zip(legs, key)
            )
            blocks[key] = rng.standard_normal(shape)
        return cls(legs, charge, blocks, validate=False)

    def __repr__(self):
        return (
            f"BlockTensor(rank={self.ndim}, charge={self.charge}, "
            f"nblocks={len(self.blocks)})"
        )


def contract(a, b, pairs):
    """Contract tensors over the given (leg-of-a, leg-of-b) index pairs.

    Paired legs must have opposite directions and identical sector maps.
    Returns a BlockTensor, or a float if no free legs remain.
    """
    axes_a = tuple(i for i, _ in pairs)
    axes_b = tuple(j for _, j in pairs)
    for i, j in pairs:
        la, lb = a.legs[i], b.legs[j]
        if not la.compatible(lb):
            raise LegMismatchError(
                f"cannot contract leg {i} of a ({la!r}) with leg {j} of b "
                f"({lb!r}): directions must be opposite and sector maps equal"
            )
    free_a = tuple(i for i in range(a.ndim) if i not in axes_a)
    free_b = tuple(j for j in range(b.ndim) if j not in axes_b)
    charge = fuse(a.charge, b.charge)

    by_ckey = {}
    for kb, arrb in b.blocks.items():
        ck = tuple(kb[j] for j in axes_b)
        by_ckey.setdefault(ck, []).append(
            (tuple(kb[j] for j in free_b), arrb)
        )

    out_blocks = {}
    for ka, arra in a.blocks.items():
        ck = tuple(ka[i] for i in axes_a)
        hits = by_ckey.get(ck)
        if not hits:
            continue
        fka = tuple(ka[i] for i in free_a)
        for fkb, arrb in hits:
            val = np.tensordot(arra, arrb, axes=(axes_a, axes_b))
            key = fka + fkb
            if key in out_blocks:
                out_blocks[key] = out_blocks[key] + val
            else:
                out_blocks[key] = val

    if not free_a and not free_b:
        return float(out_blocks.get((), np.zeros(())))
    legs = tuple(a.legs[i] for i in free_a) + tuple(
        b.legs[j] for j in free_b
    )
    return BlockTensor(legs, charge, out_blocks, validate=False)


def _split_key(key, rows, cols):
    return tuple(key[i] for i in rows), tuple(key[i] for i in cols)


def _signed_sum(legs, key, idxs):
    n = tsz = 0
    for i in idxs:
        s = key[i]
        n += legs[i].dirn * s[0]
        tsz += legs[i].dirn * s[1]
    return (n, tsz)


def svd_truncate(t, row_legs, chi, tol=0.0, renormalize=False):
    """Truncated blockwise SVD across the (row_legs | rest) bipartition.

    Kept singular values are the globally largest across all bond
    sectors, at most `chi` of them; values not exceeding ``tol * |t|``
    are discarded as well.  Ties at the cut keep the lexicographically
    smallest bond sector first.

    Returns ``(u, s, v, discarded_weight)`` where `s` is a BondSpectrum
    of kept singular values (renormalized to unit square-sum iff
    `renormalize`), `u` carries the row legs plus a new outgoing bond,
    `v` the dual bond plus the column legs, and `discarded_weight` is
    the square-sum of dropped values.  ``u @ diag(s) @ v`` reconstructs
    `t` up to truncation; `u`/`v` are isometries on the bond.
    """
    if chi < 1:
        raise ValueError("chi must be >= 1")
    rows = tuple(row_legs)
    cols = tuple(i for i in range(t.ndim) if i not in rows)
    nrm = t.norm()
    if not t.blocks or nrm == 0.0:
        raise NullStateError("null state")

    groups = {}
    for key, arr in t.blocks.items():
        q = _signed_sum(t.legs, key, rows)
        rk, ck = _split_key(key, rows, cols)
        g = groups.setdefault(q, {"rk": {}, "ck": {}, "blk": []})
        g["rk"].setdefault(rk, None)
        g["ck"].setdefault(ck, None)
        g["blk"].append((rk, ck, arr))

    fac = {}
    cand = []
    for q in sorted(groups):
        g = groups[q]
        rkeys = sorted(g["rk"])
        ckeys = sorted(g["ck"])
        rdims = [
            int(np.prod([t.legs[i].dims[s] for i, s in zip(rows, rk)]))
            if rows
            else 1
            for rk in rkeys
        ]
        cdims = [
            int(np.prod([t.legs[i].dims[s] for i, s in zip(cols, ck)]))
            if cols
            else 1
            for ck in ckeys
        ]
        roff = dict(zip(rkeys, np.concatenate([[0], np.cumsum(rdims)])))
        coff = dict(zip(ckeys, np.concatenate([[0], np.cumsum(cdims)])))
        mat = np.zeros((int(sum(rdims)), int(sum(cdims))))
        for rk, ck, arr in g["blk"]:
            i0 = roff[rk]
            j0 = coff[ck]
            m = arr.transpose(rows + cols).reshape(
                int(np.prod([t.legs[i].dims[s] for i, s in zip(rows, rk)]) or 1),
                -1,
            )
            mat[i0 : i0 + m.shape[0], j0 : j0 + m.shape[1]] += m
        try:
            uu, ss, vv = np.linalg.svd(mat, full_matrices=False)
        except np.linalg.LinAlgError:
            uu, ss, vv = np.linalg.svd(
                mat + 1e-300 * np.random.default_rng(0).standard_normal(mat.shape),
                full_matrices=False,
            )
        fac[q] = (uu, ss, vv, rkeys, ckeys, roff, coff)
        for i, lam in enumerate(ss):
            cand.append((lam, q, i))

    # Sort descending by value; ties keep the smaller sector first.
    cand.sort(key=lambda x: (-x[0], x[1], x[2]))
    cut = tol * nrm
    kept = [c for c in cand[:chi] if c[0] > cut]
    if not kept:
        raise NullStateError("null state")
    dw = sum(lam * lam for lam, _, _ in cand) - sum(
        lam * lam for lam, _, _ in kept
    )

    keep_by_q = {}
    for lam, q, i in kept:
        keep_by_q.setdefault(q, []).append(i)

    bond_dims = {q: len(ix) for q, ix in sorted(keep_by_q.items())}
    bond_u = Leg(-1, bond_dims)
    bond_v = Leg(+1, bond_dims)

    svals = {}
    ublocks, vblocks = {}, {}
    for q in sorted(keep_by_q):
        ix = sorted(keep_by_q[q])
        uu, ss, vv, rkeys, ckeys, roff, coff = fac[q]
        svals[q] = ss[ix]
        uq = uu[:, ix]
        vq = vv[ix, :]
        for rk in rkeys:
            shape = tuple(
                t.legs[i].dims[s] for i, s in zip(rows, rk)
            ) + (len(ix),)
            i0 = roff[rk]
            nrow = int(np.prod(shape[:-1]) or 1)
            blk = uq[i0 : i0 + nrow, :].reshape(shape)
            if np.any(blk):
                ublocks[rk + (q,)] = np.ascontiguousarray(blk)
        for ck in ckeys:
            shape = (len(ix),) + tuple(
                t.legs[i].dims[s] for i, s in zip(cols, ck)
            )
            j0 = coff[ck]
            ncol = int(np.prod(shape[1:]) or 1)
            blk = vq[:, j0 : j0 + ncol].reshape(shape)
            if np.any(blk):
                vblocks[(q,) + ck] = np.ascontiguousarray(blk)

    spectrum = BondSpectrum(svals)
    if renormalize:
        spectrum = spectrum.scaled(1.0 / np.sqrt(spectrum.square_sum()))

    u = BlockTensor(
        tuple(t.legs[i] for i in rows) + (bond_u,),
        ZERO,
        ublocks,
        validate=False,
    )
    v = BlockTensor(
        (bond_v,) + tuple(t.legs[i] for i in cols),
        t.charge,
        vblocks,
        validate=False,
    )
    return u, spectrum, v, float(dw)


def lq_split(t, col_legs):
    """Blockwise LQ across (rest | col_legs); Q is a right isometry.

    Returns ``(l, q)`` with ``l`` carrying the row legs plus a new
    incoming bond and ``q`` the dual bond plus the column legs, so that
    contracting the bonds reconstructs `t`.
    """
    cols = tuple(col_legs)
    rows = tuple(i for i in range(t.ndim) if i not in cols)
    groups = {}
    for key, arr in t.blocks.items():
        q = negate(_signed_sum(t.legs, key, cols))
        rk, ck = _split_key(key, rows, cols)
        g = groups.setdefault(q, {})
        g.setdefault("rk", {}).setdefault(rk, None)
        g.setdefault("ck", {}).setdefault(ck, None)
        g.setdefault("blk", []).append((rk, ck, arr))

    bond_dims = {}
    fac = {}
    for q in sorted(groups):
        g = groups[q]
        rkeys = sorted(g["rk"])
        ckeys = sorted(g["ck"])
        rdims = [
            int(np.prod([t.legs[i].dims[s] for i, s in zip(rows, rk)]) or 1)
            for rk in rkeys
        ]
        cdims = [
            int(np.prod([t.legs[i].dims[s] for i, s in zip(cols, ck)]) or 1)
            for ck in ckeys
        ]
        roff = dict(zip(rkeys, np.concatenate([[0], np.cumsum(rdims)])))
        coff = dict(zip(ckeys, np.concatenate([[0], np.cumsum(cdims)])))
        mat = np.zeros((int(sum(rdims)), int(sum(cdims))))
        for rk, ck, arr in g["blk"]:
            # block axes follow the original leg order; group rows first
            m = arr.transpose(rows + cols).reshape(
                -1,
                int(np.prod([t.legs[i].dims[s] for i, s in zip(cols, ck)]) or 1),
            )
            i0, j0 = roff[rk], coff[ck]
            mat[i0 : i0 + m.shape[0], j0 : j0 + m.shape[1]] += m
        # LQ via QR of the transpose
        qm_t, rm_t = np.linalg.qr(mat.T)
        lm = rm_t.T
        qm = qm_t.T
        k = qm.shape[0]
        bond_dims[q] = k
        fac[q] = (lm, qm, rkeys, ckeys, roff, coff, k)

    bond_l = Leg(-1, bond_dims)
    bond_q = Leg(+1, bond_dims)
    lblocks, qblocks = {}, {}
    for q, (lm, qm, rkeys, ckeys, roff, coff, k) in fac.items():
        for rk in rkeys:
            shape = tuple(t.legs[i].dims[s] for i, s in zip(rows, rk)) + (k,)
            i0 = roff[rk]
            nrow = int(np.prod(shape[:-1]) or 1)
            lblocks[rk + (q,)] = np.ascontiguousarray(
                lm[i0 : i0 + nrow, :].reshape(shape)
            )
        for ck in ckeys:
            shape = (k,) + tuple(t.legs[i].dims[s] for i, s in zip(cols, ck))
            j0 = coff[ck]
            ncol = int(np.prod(shape[1:]) or 1)
            qblocks[(q,) + ck] = np.ascontiguousarray(
                qm[:, j0 : j0 + ncol].reshape(shape)
            )

    lt = BlockTensor(
        tuple(t.legs[i] for i in rows) + (bond_l,),
        t.charge,
        lblocks,
        validate=False,
    )
    qt = BlockTensor(
        (bond_q,) + tuple(t.legs[i] for i in cols), ZERO, qblocks, validate=False
    )
    return lt, qt


def qr_split(t, row_legs):
    """Blockwise thin QR across (row_legs | rest); Q is a left isometry."""
    rows = tuple(row_legs)
    cols = tuple(i for i in range(t.ndim) if i not in rows)
    groups = {}
    for key, arr in t.blocks.items():
        q = _signed_sum(t.legs, key, rows)
        rk, ck = _split_key(key, rows, cols)
        g = groups.setdefault(q, {})
        g.setdefault("rk", {}).setdefault(rk, None)
        g.setdefault("ck", {}).setdefault(ck, None)
        g.setdefault("blk", []).append((rk, ck, arr))

    bond_dims = {}
    fac = {}
    for q in sorted(groups):
        g = groups[q]
        rkeys = sorted(g["rk"])
        ckeys = sorted(g["ck"])
        rdims = [
            int(np.prod([t.legs[i].dims[s] for i, s in zip(rows, rk)]) or 1)
            for rk in rkeys
        ]
        cdims = [
            int(np.prod([t.legs[i].dims[s] for i, s in zip(cols, ck)]) or 1)
            for ck in ckeys
        ]
        roff = dict(zip(rkeys, np.concatenate([[0], np.cumsum(rdims)])))
        coff = dict(zip(ckeys, np.concatenate([[0], np.cumsum(cdims)])))
        mat = np.zeros((int(sum(rdims)), int(sum(cdims))))
        for rk, ck, arr in g["blk"]:
            m = arr.transpose(rows + cols).reshape(
                -1,
                int(np.prod([t.legs[i].dims[s] for i, s in zip(cols, ck)]) or 1),
            )
            i0, j0 = roff[rk], coff[ck]
            mat[i0 : i0 + m.shape[0], j0 : j0 + m.shape[1]] += m
        qm, rm = np.linalg.qr(mat)
        k = qm.shape[1]
        bond_dims[q] = k
        fac[q] = (qm, rm, rkeys, ckeys, roff, coff, k)

    bond_q = Leg(-1, bond_dims)
    bond_r = Leg(+1, bond_dims)
    qblocks, rblocks = {}, {}
    for q, (qm, rm, rkeys, ckeys, roff, coff, k) in fac.items():
        for rk in rkeys:
            shape = tuple(t.legs[i].dims[s] for i, s in zip(rows, rk)) + (k,)
            i0 = roff[rk]
            nrow = int(np.prod(shape[:-1]) or 1)
            qblocks[rk + (q,)] = np.ascontiguousarray(
                qm[i0 : i0 + nrow, :].reshape(shape)
            )
        for ck in ckeys:
            shape = (k,) + tuple(t.legs[i].dims[s] for i, s in zip(cols, ck))
            j0 = coff[ck]
            ncol = int(np.prod(shape[1:]) or 1)
            rblocks[(q,) + ck] = np.ascontiguousarray(
                rm[:, j0 : j0 + ncol].reshape(shape)
            )

    qt = BlockTensor(
        tuple(t.legs[i] for i in rows) + (bond_q,), ZERO, qblocks, validate=False
    )
    rt = BlockTensor(
        (bond_r,) + tuple(t.legs[i] for i in cols),
        t.charge,
        rblocks,
        validate=False,
    )
    return qt, rt
