"""Matrix product states over the local fermionic space {0, a, b, 2}.

Site tensors are 3-leg BlockTensors with legs (left bond +1, physical
+1, right bond -1) and zero total charge, so the right bond sector
accumulates the particle/spin content of all sites to the left.  The
global (n_elec, 2*Sz) sector therefore sits on the rightmost dummy
bond.
"""

from __future__ import annotations

import io
import struct

import numpy as np

from .blocktensor import (
    ZERO,
    BlockTensor,
    Leg,
    NullStateError,
    contract,
    fuse,
    lq_split,
    qr_split,
    svd_truncate,
)

# Physical basis order matches the determinant alphabet "0", "a", "b", "2".
PHYS_SECTORS = ((0, 0), (1, 1), (1, -1), (2, 0))
PHYS_LEG = Leg(+1, {s: 1 for s in PHYS_SECTORS})
ALPHABET = "0ab2"
SECTOR_OF_CHAR = dict(zip(ALPHABET, PHYS_SECTORS))

_MAGIC = b"EMPS"
_VERSION = 1


def config_sector(config):
    """Total (n, 2Sz) sector of an occupation string over '0ab2'."""
    n = tsz = 0
    for ch in config:
        s = SECTOR_OF_CHAR[ch]
        n += s[0]
        tsz += s[1]
    return (n, tsz)


class MPS:
    """A chain of site tensors with canonical-form bookkeeping.

    Sites left of `center` are left isometries, sites right of it right
    isometries.  Instances are treated as immutable: all operations
    return new MPS values.
    """

    def __init__(self, sites, center, validate=False):
        self.sites = list(sites)
        self.center = center
        if validate:
            self.validate()

    @property
    def n_sites(self):
        return len(self.sites)

    @property
    def sector(self):
        """Global (n_elec, 2Sz) sector, read off the rightmost bond."""
        leg = self.sites[-1].legs[2]
        if len(leg.sectors) != 1:
            raise ValueError("rightmost bond is not a charge-fixing dummy")
        return leg.sectors[0]

    def bond_leg(self, k):
        """Leg of bond k (between sites k and k+1), as seen from the left."""
        return self.sites[k].legs[2]

    def bond_dims(self):
        return [self.bond_leg(k).dim for k in range(self.n_sites - 1)]

    def max_bond(self):
        return max(self.bond_dims(), default=1)

    def validate(self):
        for k, a in enumerate(self.sites):
            if a.ndim != 3:
                raise ValueError(f"site {k} is not a 3-leg tensor")
            a._validate()
            if a.legs[1].dims != PHYS_LEG.dims:
                raise ValueError(f"site {k} has wrong physical leg")
            if k > 0 and not self.sites[k - 1].legs[2].compatible(a.legs[0]):
                raise ValueError(f"bond mismatch between sites {k-1},{k}")
        if self.sites[0].legs[0].dims != {ZERO: 1}:
            raise ValueError("leftmost bond must be the trivial sector")

    def copy(self):
        return MPS([a.copy() for a in self.sites], self.center)

    def norm(self):
        env = _boundary_left()
        for a in self.sites:
            env = _transfer_left(env, a, a)
        return np.sqrt(abs(_close_right(env)))

    def normalize(self):
        c = self.sites[self.center].norm()
        if c == 0.0:
            raise NullStateError("null state")
        sites = list(self.sites)
        sites[self.center] = sites[self.center].scale(1.0 / c)
        return MPS(sites, self.center)

    def overlap(self, other):
        """<self|other>; both states must share K and global sector."""
        if self.n_sites != other.n_sites:
            raise ValueError("site count mismatch")
        env = _boundary_left()
        for a, b in zip(self.sites, other.sites):
            env = _transfer_left(env, a, b)
        return _close_right(env)

    def canonicalize(self, center):
        """Mixed-canonical form with the given orthogonality center."""
        K = self.n_sites
        if not 0 <= center < K:
            raise ValueError(f"center {center} out of range")
        sites = [a for a in self.sites]
        for k in range(center):
            q, r = qr_split(sites[k], (0, 1))
            sites[k] = q
            sites[k + 1] = contract(r, sites[k + 1], [(1, 0)])
        for k in range(K - 1, center, -1):
            r, q = lq_split(sites[k], (1, 2))
            sites[k] = q
            sites[k - 1] = contract(sites[k - 1], r, [(2, 0)])
        return MPS(sites, center)

    def move_center(self, target):
        """Shift the center stepwise via QR (state unchanged)."""
        m = self
        while m.center != target:
            k = m.center
            sites = list(m.sites)
            if target > k:
                q, r = qr_split(sites[k], (0, 1))
                sites[k] = q
                sites[k + 1] = contract(r, sites[k + 1], [(1, 0)])
                m = MPS(sites, k + 1)
            else:
                r, q = lq_split(sites[k], (1, 2))
                sites[k] = q
                sites[k - 1] = contract(sites[k - 1], r, [(2, 0)])
                m = MPS(sites, k - 1)
        return m

    def merge_two_site(self, k):
        """Fuse sites k, k+1 into one 4-leg tensor (l, p1, p2, r)."""
        return contract(self.sites[k], self.sites[k + 1], [(2, 0)])

    def split_two_site(self, k, theta, chi, tol=0.0, center_after="right"):
        """Split a 4-leg two-dot tensor back into sites k, k+1.

        Returns (mps, discarded_weight); the state is renormalized after
        truncation and the new center sits at k ('left') or k+1
        ('right').
        """
        u, s, v, dw = svd_truncate(
            theta, (0, 1), chi, tol=tol, renormalize=True
        )
        sites = list(self.sites)
        if center_after == "right":
            sites[k] = u
            sites[k + 1] = _scale_bond_left(v, s)
            return MPS(sites, k + 1), dw
        sites[k] = _scale_bond_right(u, s)
        sites[k + 1] = v
        return MPS(sites, k), dw

    def compress(self, chi, tol=0.0):
        """SVD-truncate every bond to at most chi, right to left.

        Pure state compression (no re-optimization): each bond keeps
        the chi largest Schmidt coefficients of the current state.
        Returns (mps, total_discarded_weight) with the center at 0.
        """
        m = self.move_center(self.n_sites - 1)
        total = 0.0
        for k in range(self.n_sites - 2, -1, -1):
            theta = m.merge_two_site(k)
            m, dw = m.split_two_site(
                k, theta, chi=chi, tol=tol, center_after="left"
            )
            total += dw
        return m, total

    def amplitude(self, config):
        """Exact amplitude of one occupation string (O(K D^2))."""
        if len(config) != self.n_sites:
            raise ValueError("configuration length mismatch")
        vec = {ZERO: np.ones((1, 1))}
        for k, ch in enumerate(config):
            p = SECTOR_OF_CHAR[ch]
            nxt = {}
            for sl, v in vec.items():
                sr = fuse(sl, p)
                blk = self.sites[k].blocks.get((sl, p, sr))
                if blk is None:
                    continue
                m = v @ blk[:, 0, :]
                if sr in nxt:
                    nxt[sr] += m
                else:
                    nxt[sr] = m
            vec = nxt
            if not vec:
                return 0.0
        out = vec.get(self.sector)
        return 0.0 if out is None else float(out[0, 0])

    def to_dense(self):
        """Dense amplitude tensor of shape (4,)*K; small K only."""
        K = self.n_sites
        if 4**K > 20_000_000:
            raise ValueError("state too large for dense embedding")
        res = None
        for a in self.sites:
            d = a.to_dense()  # (Dl, 4, Dr)
            res = d if res is None else np.tensordot(res, d, axes=(-1, 0))
        # res: (1, 4, 4, ..., 4, 1)
        return res.reshape((4,) * K)

    # -- binary serialization (format documented in docs/mps-format.md) --

    def dump(self, fh):
        w = fh.write
        w(_MAGIC)
        w(struct.pack("<IIIii", _VERSION, self.n_sites, self.center,
                      *self.sector))
        for a in self.sites:
            w(struct.pack("<I", len(a.legs)))
            for leg in a.legs:
                w(struct.pack("<bI", leg.dirn, len(leg.sectors)))
                for s in leg.sectors:
                    w(struct.pack("<iiI", s[0], s[1], leg.dims[s]))
            w(struct.pack("<ii", *a.charge))
            keys = sorted(a.blocks)
            w(struct.pack("<I", len(keys)))
            for key in keys:
                for leg, s in zip(a.legs, key):
                    w(struct.pack("<I", leg.sectors.index(s)))
                arr = np.ascontiguousarray(a.blocks[key], dtype="<f8")
                w(arr.tobytes())

    @classmethod
    def load(cls, fh):
        if fh.read(4) != _MAGIC:
            raise ValueError("not an EMPS file")
        version, K, center, n, tsz = struct.unpack("<IIIii", fh.read(20))
        if version != _VERSION:
            raise ValueError(f"unsupported EMPS version {version}")
        sites = []
        for _ in range(K):
            (nlegs,) = struct.unpack("<I", fh.read(4))
            legs = []
            for _ in range(nlegs):
                dirn, nsec = struct.unpack("<bI", fh.read(5))
                dims = {}
                for _ in range(nsec):
                    a, b, d = struct.unpack("<iiI", fh.read(12))
                    dims[(a, b)] = d
                legs.append(Leg(dirn, dims))
            charge = struct.unpack("<ii", fh.read(8))
            (nblk,) = struct.unpack("<I", fh.read(4))
            blocks = {}
            for _ in range(nblk):
                key = tuple(
                    leg.sectors[struct.unpack("<I", fh.read(4))[0]]
                    for leg in legs
                )
                shape = tuple(
                    leg.dims[s] for leg, s in zip(legs, key)
                )
                count = int(np.prod(shape))
                blocks[key] = np.frombuffer(
                    fh.read(8 * count), dtype="<f8"
                ).reshape(shape).copy()
            sites.append(BlockTensor(legs, charge, blocks, validate=False))
        m = cls(sites, center)
        if m.sector != (n, tsz):
            raise ValueError("EMPS sector header disagrees with tensors")
        return m

    def save(self, path):
        with open(path, "wb") as fh:
            self.dump(fh)

    @classmethod
    def open(cls, path):
        with open(path, "rb") as fh:
            return cls.load(fh)

    def to_bytes(self):
        buf = io.BytesIO()
        self.dump(buf)
        return buf.getvalue()


def _scale_bond(t, spectrum, axis):
    """Multiply bond `axis` of a tensor by per-sector singular values."""
    blocks = {}
    for key, arr in t.blocks.items():
        w = spectrum.by_sector[key[axis]]
        shape = [1] * arr.ndim
        shape[axis] = len(w)
        blocks[key] = arr * w.reshape(shape)
    return BlockTensor(t.legs, t.charge, blocks, validate=False)


def _scale_bond_left(v, spectrum):
    return _scale_bond(v, spectrum, axis=0)


def _scale_bond_right(u, spectrum):
    return _scale_bond(u, spectrum, axis=u.ndim - 1)


# -- transfer-matrix helpers (bra = ket structure, real arithmetic) --


def _boundary_left():
    return {(ZERO, ZERO): np.ones((1, 1))}


def _transfer_left(env, abra, aket):
    """env[sb, sk] -> contraction including one more bra/ket site pair."""
    out = {}
    for (sb, sk), mat in env.items():
        for (skl, p, skr), kblk in aket.blocks.items():
            if skl != sk:
                continue
            tmp = mat @ kblk[:, 0, :]  # (db_l, dk_r)
            for (sbl, pb, sbr), bblk in abra.blocks.items():
                if sbl != sb or pb != p:
                    continue
                add = bblk[:, 0, :].T @ tmp
                key = (sbr, skr)
                if key in out:
                    out[key] += add
                else:
                    out[key] = add
    return out


def _close_right(env):
    tot = 0.0
    for (sb, sk), mat in env.items():
        if sb == sk and mat.shape[0] == mat.shape[1]:
            tot += float(np.trace(mat))
    return tot


# -- constructors --


def product_state(config):
    """The determinant |config> as a bond-dimension-1 MPS."""
    sites = []
    acc = ZERO
    for ch in config:
        p = SECTOR_OF_CHAR[ch]
        nxt = fuse(acc, p)
        left = Leg(+1, {acc: 1})
        right = Leg(-1, {nxt: 1})
        sites.append(
            BlockTensor(
                (left, PHYS_LEG, right),
                ZERO,
                {(acc, p, nxt): np.ones((1, 1, 1))},
                validate=False,
            )
        )
        acc = nxt
    return MPS(sites, 0)


def _reachable_sectors(K, target):
    """Per-bond sector sets reachable from both chain ends."""
    n_t, tsz_t = target
    left = [{ZERO}]
    for _ in range(K):
        nxt = set()
        for s in left[-1]:
            for p in PHYS_SECTORS:
                nxt.add(fuse(s, p))
        left.append(nxt)
    right = [None] * (K + 1)
    right[K] = {target}
    for k in range(K - 1, -1, -1):
        prev = set()
        for s in right[k + 1]:
            for p in PHYS_SECTORS:
                prev.add((s[0] - p[0], s[1] - p[1]))
        right[k] = prev
    return [sorted(left[k] & right[k]) for k in range(K + 1)]


def random_mps(K, sector, d, rng=None):
    """Random normalized right-canonical MPS in the given global sector.

    Bond dimensions are capped at `d` in total per bond, allocated
    across sectors proportionally to the number of reachable paths.
    Deterministic given the seed/rng.
    """
    rng = np.random.default_rng(rng)
    reach = _reachable_sectors(K, sector)
    if not reach[K]:
        raise ValueError(f"sector {sector} unreachable with {K} orbitals")
    for k, r in enumerate(reach):
        if not r:
            raise ValueError(f"sector {sector} unreachable with {K} orbitals")

    # Path counts by DP, used to bound and apportion sector dimensions.
    counts = [dict.fromkeys(reach[0], 1)]
    for k in range(K):
        nxt = {}
        for s, c in counts[-1].items():
            for p in PHYS_SECTORS:
                f = fuse(s, p)
                if f in reach[k + 1]:
                    nxt[f] = nxt.get(f, 0) + c
        counts.append(nxt)
    back = [None] * (K + 1)
    back[K] = dict.fromkeys(reach[K], 1)
    for k in range(K - 1, -1, -1):
        prev = {}
        for s in reach[k]:
            tot = 0
            for p in PHYS_SECTORS:
                f = fuse(s, p)
                tot += back[k + 1].get(f, 0)
            if tot:
                prev[s] = tot
        back[k] = prev

    legs = []
    for k in range(K + 1):
        caps = {
            s: min(counts[k].get(s, 0), back[k].get(s, 0))
            for s in reach[k]
        }
        caps = {s: c for s, c in caps.items() if c > 0}
        total = sum(caps.values())
        if total <= d:
            dims = caps
        else:
            dims = {
                s: max(1, int(round(d * c / total))) for s, c in caps.items()
            }
            # trim greedily until the bond total is within d
            while sum(dims.values()) > d:
                big = max(dims, key=lambda s: (dims[s], s))
                if dims[big] == 1:
                    break
                dims[big] -= 1
        legs.append(Leg(+1, dict(sorted(dims.items()))))

    sites = []
    for k in range(K):
        lleg = legs[k]
        rleg = Leg(-1, legs[k + 1].dims)
        t = BlockTensor.random((lleg, PHYS_LEG, rleg), ZERO, rng)
        if not t.blocks:
            raise ValueError(f"sector {sector} unreachable with {K} orbitals")
        sites.append(t)
    m = MPS(sites, K - 1).canonicalize(0)
    return m.normalize()
