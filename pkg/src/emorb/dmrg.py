"""Two-dot DMRG ground-state search.

The effective two-site eigenproblem is solved by Davidson iteration
with a diagonal preconditioner.  Environments are stored per charge
sector as dense 3-d arrays (MPO bond, bra bond, ket bond), so updates
and the Hamiltonian matrix-vector product contract whole MPO bond
sectors in single BLAS calls; the per-step half-block operators are
precompiled into flat instruction lists.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .blocktensor import ZERO, BlockTensor, fuse
from .mps import MPS, PHYS_SECTORS, PHYS_LEG
from .mpo import MPO


@dataclass
class SweepConfig:
    """Knobs for one dmrg_run call."""

    d: int = 64
    n_sweeps: int = 4
    noise: tuple = (1e-4, 1e-5, 0.0, 0.0)
    eig_tol: float = 1e-8
    eig_max_iter: int = 40
    svd_tol: float = 1e-12
    max_space: int = 12

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("bond cutoff d must be >= 1")
        if self.n_sweeps < 1:
            raise ValueError("n_sweeps must be >= 1")

    def noise_at(self, sweep):
        """Noise for a given sweep; the schedule clamps at its last entry."""
        if not self.noise:
            return 0.0
        return float(self.noise[min(sweep, len(self.noise) - 1)])


def _phys_index(sector):
    return PHYS_SECTORS.index(sector)


class CompiledMpo:
    """Per-site charge-block view of an MPO.

    wblocks[k] maps (ql, m, n, qr) to the (dl, dr) coefficient matrix
    of the MPO site tensor, with m/n the physical bra/ket indices in
    the 0/a/b/2 order.
    """

    def __init__(self, mpo: MPO):
        self.n_sites = mpo.n_sites
        self.wblocks = []
        for a in mpo.sites:
            blk = {}
            for (ql, sm, sn, qr), arr in a.blocks.items():
                key = (ql, _phys_index(sm), _phys_index(sn), qr)
                blk[key] = np.ascontiguousarray(arr[:, 0, 0, :])
            self.wblocks.append(blk)


def _site_phys_blocks(a):
    """Site blocks reindexed as [n][ (sl, sr) ] -> (dl, dr) matrix."""
    out = [dict() for _ in range(4)]
    for (sl, p, sr), arr in a.blocks.items():
        out[_phys_index(p)][(sl, sr)] = arr[:, 0, :]
    return out


def left_boundary():
    return {(ZERO, ZERO): np.ones((1, 1, 1))}


def right_boundary(sector):
    return {(ZERO, sector): np.ones((1, 1, 1))}


def left_update(env, wblk, a):
    """Propagate a left environment through one bra/ket/MPO site.

    Environments map (mpo bond sector, bra bond sector) to arrays of
    shape (mpo dim, bra dim, ket dim); the ket sector is bra - mpo.
    """
    phys = _site_phys_blocks(a)
    byq = {}
    for (qw, sb), arr in env.items():
        byq.setdefault(qw, []).append((sb, arr))
    out = {}
    t1cache = {}
    for (ql, m, n, qr), w in wblk.items():
        rows = byq.get(ql)
        if rows is None:
            continue
        dm = PHYS_SECTORS[m]
        dn = PHYS_SECTORS[n]
        for sb, arr in rows:
            key1 = (ql, sb, n)
            t1 = t1cache.get(key1, False)
            if t1 is False:
                sk = (sb[0] - ql[0], sb[1] - ql[1])
                kblk = phys[n].get((sk, fuse(sk, dn)))
                t1 = (
                    None if kblk is None
                    else np.tensordot(arr, kblk, axes=(2, 0))
                )  # (dl, Db, Dkr)
                t1cache[key1] = t1
            if t1 is None:
                continue
            sbr = fuse(sb, dm)
            bblk = phys[m].get((sb, sbr))
            if bblk is None:
                continue
            t2 = np.tensordot(w, t1, axes=(0, 0))      # (dr, Db, Dkr)
            t3 = np.tensordot(bblk, t2, axes=(0, 1))   # (Dbr, dr, Dkr)
            t3 = t3.transpose(1, 0, 2)
            okey = (qr, sbr)
            if okey in out:
                out[okey] += t3
            else:
                out[okey] = np.ascontiguousarray(t3)
    return out


def right_update(env, wblk, a):
    """Propagate a right environment through one site (moving left)."""
    phys = _site_phys_blocks(a)
    byq = {}
    for (qw, sb), arr in env.items():
        byq.setdefault(qw, []).append((sb, arr))
    out = {}
    t1cache = {}
    for (ql, m, n, qr), w in wblk.items():
        rows = byq.get(qr)
        if rows is None:
            continue
        dm = PHYS_SECTORS[m]
        dn = PHYS_SECTORS[n]
        for sb, arr in rows:
            key1 = (qr, sb, n)
            t1 = t1cache.get(key1, False)
            if t1 is False:
                sk = (sb[0] - qr[0], sb[1] - qr[1])
                skl = (sk[0] - dn[0], sk[1] - dn[1])
                kblk = phys[n].get((skl, sk))
                t1 = (
                    None if kblk is None
                    else np.tensordot(arr, kblk, axes=(2, 1))
                )  # (dr, Db, Dkl)
                t1cache[key1] = t1
            if t1 is None:
                continue
            sbl = (sb[0] - dm[0], sb[1] - dm[1])
            bblk = phys[m].get((sbl, sb))
            if bblk is None:
                continue
            t2 = np.tensordot(w, t1, axes=(1, 0))      # (dl, Db, Dkl)
            t3 = np.tensordot(bblk, t2, axes=(1, 1))   # (Dbl, dl, Dkl)
            t3 = t3.transpose(1, 0, 2)
            okey = (ql, sbl)
            if okey in out:
                out[okey] += t3
            else:
                out[okey] = np.ascontiguousarray(t3)
    return out


def close_envs(left, right):
    """Energy from matching left/right environments at one bond."""
    tot = 0.0
    for key, arr in left.items():
        other = right.get(key)
        if other is not None:
            tot += float(np.sum(arr * other))
    return tot


def env_nbytes(env):
    return sum(arr.nbytes for arr in env.values())


class EnvStore:
    """Bond-indexed environment store with optional disk spill."""

    def __init__(self, spill_dir=None, ram_limit=1 << 30):
        self.spill_dir = spill_dir
        self.ram_limit = ram_limit
        self._ram = {}
        self._disk = set()
        if spill_dir is not None:
            import os

            os.makedirs(spill_dir, exist_ok=True)

    def _path(self, key):
        import os

        return os.path.join(self.spill_dir, f"env_{key[0]}_{key[1]}.pkl")

    def put(self, key, env):
        self._ram[key] = env
        self._disk.discard(key)
        self._maybe_spill(exclude=key)

    def get(self, key):
        if key in self._ram:
            return self._ram[key]
        if key in self._disk:
            import pickle

            with open(self._path(key), "rb") as fh:
                env = pickle.load(fh)
            self._ram[key] = env
            self._disk.discard(key)
            return env
        raise KeyError(key)

    def drop(self, key):
        self._ram.pop(key, None)
        if key in self._disk:
            import os

            os.unlink(self._path(key))
            self._disk.discard(key)

    def _maybe_spill(self, exclude):
        if self.spill_dir is None:
            return
        total = sum(env_nbytes(e) for e in self._ram.values())
        if total <= self.ram_limit:
            return
        import pickle

        for key in list(self._ram):
            if key == exclude:
                continue
            with open(self._path(key), "wb") as fh:
                pickle.dump(self._ram.pop(key), fh, protocol=4)
            self._disk.add(key)
            total = sum(env_nbytes(e) for e in self._ram.values())
            if total <= self.ram_limit:
                return


class BlockCodec:
    """Flat-vector layout for the allowed blocks of a two-dot tensor."""

    def __init__(self, left_leg, right_leg, charge):
        self.left_leg = left_leg
        self.right_leg = right_leg
        self.charge = charge
        self.keys = []
        self.shapes = []
        self.slices = []
        pos = 0
        for sl in left_leg.sectors:
            for n1 in range(4):
                for n2 in range(4):
                    sr = fuse(fuse(sl, PHYS_SECTORS[n1]), PHYS_SECTORS[n2])
                    sr = (sr[0] - charge[0], sr[1] - charge[1])
                    if sr not in right_leg.dims:
                        continue
                    shape = (left_leg.dims[sl], right_leg.dims[sr])
                    self.keys.append((sl, n1, n2, sr))
                    self.shapes.append(shape)
                    self.slices.append(
                        slice(pos, pos + shape[0] * shape[1])
                    )
                    pos += shape[0] * shape[1]
        self.size = pos
        self._where = {k: i for i, k in enumerate(self.keys)}

    def to_flat(self, blocks):
        vec = np.zeros(self.size)
        for key, arr in blocks.items():
            i = self._where.get(key)
            if i is None:
                raise ValueError(f"block {key} outside codec space")
            vec[self.slices[i]] = arr.ravel()
        return vec

    def to_blocks(self, vec):
        out = {}
        for key, shape, sl in zip(self.keys, self.shapes, self.slices):
            blk = vec[sl].reshape(shape)
            out[key] = blk
        return out

    def tensor_to_blocks(self, t):
        """4-leg BlockTensor -> codec block dict (2D arrays)."""
        out = {}
        for (sl, p1, p2, sr), arr in t.blocks.items():
            out[(sl, _phys_index(p1), _phys_index(p2), sr)] = arr[
                :, 0, 0, :
            ]
        return out

    def blocks_to_tensor(self, blocks):
        legs = (
            self.left_leg,
            PHYS_LEG,
            PHYS_LEG,
            self.right_leg.dual() if self.right_leg.dirn == 1 else self.right_leg,
        )
        bl = {}
        for (sl, n1, n2, sr), arr in blocks.items():
            if not np.any(arr):
                continue
            bl[(sl, PHYS_SECTORS[n1], PHYS_SECTORS[n2], sr)] = (
                arr[:, None, None, :]
            )
        return BlockTensor(legs, self.charge, bl, validate=False)


class TwoSiteProblem:
    """H_eff for the two-dot tensor at sites (k, k+1).

    On construction, the left environment is contracted with the first
    MPO site into half-block operators LW and the right environment
    with the second site into RW; the matvec is then a flat list of
    GEMMs through intermediate charge slots.
    """

    def __init__(self, left, right, w1, w2, codec):
        self.left = left
        self.right = right
        self.w1 = w1
        self.w2 = w2
        self.codec = codec
        self._compile()

    def _compile(self):
        codec = self.codec
        x_index = codec._where

        # LW[(qm, m1, n1, sbl)] = sum_ql W1^T . L, shape (dm*Db, Dk);
        # indexed for lookup by (n1, skl)
        left_byq = {}
        for (qw, sb), arr in self.left.items():
            left_byq.setdefault(qw, []).append((sb, arr))
        lw = {}
        lw_meta = {}
        for (ql, m1, n1, qm), w in self.w1.items():
            rows = left_byq.get(ql)
            if rows is None:
                continue
            for sbl, arr in rows:
                t = (w.T @ arr.reshape(arr.shape[0], -1)).reshape(
                    w.shape[1], arr.shape[1], arr.shape[2]
                )  # (dm, Db, Dk)
                key = (qm, m1, n1, sbl)
                if key in lw:
                    lw[key] += t
                else:
                    lw[key] = t
                    skl = (sbl[0] - ql[0], sbl[1] - ql[1])
                    lw_meta[key] = skl

        # RW[(qm, m2, n2, sry)] = sum_qr W2 . R, shape (dm*Dkr, Dbr)
        right_byq = {}
        for (qw, sb), arr in self.right.items():
            right_byq.setdefault(qw, []).append((sb, arr))
        rw = {}
        for (qm, m2, n2, qr), w in self.w2.items():
            rows = right_byq.get(qr)
            if rows is None:
                continue
            for sry, arr in rows:
                t = (w @ arr.reshape(arr.shape[0], -1)).reshape(
                    w.shape[0], arr.shape[1], arr.shape[2]
                )  # (dm, Dbr, Dkr)
                key = (qm, m2, n2, sry)
                if key in rw:
                    rw[key] += t
                else:
                    rw[key] = t
        rw_idx = {}
        for (qm, m2, n2, sry), t in rw.items():
            mat = np.ascontiguousarray(
                t.transpose(0, 2, 1).reshape(-1, t.shape[1])
            )  # (dm*Dkr, Dbr)
            rw_idx[(qm, n2, m2, sry)] = mat

        lw_idx = {}
        for key, skl in lw_meta.items():
            lw_idx.setdefault((key[2], skl), []).append(key)

        # stage A: slot[s] += LW @ x ; stage B: y += slot^T @ RW
        slot_of = {}
        slot_shape = []
        a_raw = {}
        b_raw = {}
        for xi, (skl, n1, n2, srk) in enumerate(codec.keys):
            cols = codec.shapes[xi][1]
            for key in lw_idx.get((n1, skl), ()):
                qm, m1, _, sbl = key
                skey = (qm, sbl, m1, n2, srk)
                s = slot_of.get(skey)
                if s is None:
                    # compile stage B for this slot up front; drop the
                    # slot if nothing closes it
                    dm1 = PHYS_SECTORS[m1]
                    sbm = fuse(sbl, dm1)
                    blist = []
                    for m2 in range(4):
                        sry = fuse(sbm, PHYS_SECTORS[m2])
                        rmat = rw_idx.get((qm, n2, m2, sry))
                        if rmat is None:
                            continue
                        yi = x_index.get((sbl, m1, m2, sry))
                        if yi is None:
                            continue
                        blist.append((rmat, yi))
                    if not blist:
                        slot_of[skey] = -1
                        continue
                    s = slot_of[skey] = len(slot_shape)
                    t = lw[key]
                    slot_shape.append((t.shape[0], t.shape[1], cols))
                    for rmat, yi in blist:
                        b_raw.setdefault(yi, []).append((s, rmat))
                if s < 0:
                    continue
                a_raw.setdefault(xi, []).append((key, s))

        # batch stage A per x block: one stacked GEMM, then row-range
        # views assigned (or added) to slots; the stacked left operator
        # is shared between x blocks that differ only in n2
        acat_cache = {}
        a_plan = []
        for xi, entries in a_raw.items():
            ckey = tuple(key for key, _ in entries)
            got = acat_cache.get(ckey)
            if got is None:
                mats = [
                    lw[key].reshape(-1, lw[key].shape[2])
                    for key, _ in entries
                ]
                offs = np.cumsum([0] + [m.shape[0] for m in mats])
                got = (np.concatenate(mats, axis=0), offs)
                acat_cache[ckey] = got
            acat, offs = got
            seg = [
                (int(offs[i]), int(offs[i + 1]), s)
                for i, (_, s) in enumerate(entries)
            ]
            a_plan.append((xi, acat, seg))

        # batch stage B per y block: concatenate slot rows, one GEMM
        # against the pre-stacked right operator
        b_plan = []
        for yi, entries in b_raw.items():
            s_list = [s for s, _ in entries]
            rcat = np.concatenate([rmat for _, rmat in entries], axis=0)
            b_plan.append((yi, s_list, rcat))
        self.a_plan = a_plan
        self.b_plan = b_plan
        self.slot_shape = slot_shape

    def matvec_flat(self, vec):
        codec = self.codec
        xv = [
            vec[sl].reshape(shape)
            for sl, shape in zip(codec.slices, codec.shapes)
        ]
        out = np.zeros(codec.size)
        yv = [
            out[sl].reshape(shape)
            for sl, shape in zip(codec.slices, codec.shapes)
        ]
        slots = [None] * len(self.slot_shape)
        for xi, acat, seg in self.a_plan:
            p = acat @ xv[xi]
            for r0, r1, s in seg:
                # row ranges of p are exclusive to one slot, so adding
                # into the view is safe
                if slots[s] is None:
                    slots[s] = p[r0:r1]
                else:
                    slots[s] += p[r0:r1]
        qts = [None] * len(slots)
        for s, q in enumerate(slots):
            dm, db, cols = self.slot_shape[s]
            qts[s] = np.ascontiguousarray(
                q.reshape(dm, db, cols).transpose(1, 0, 2)
            ).reshape(db, dm * cols)
        for yi, s_list, rcat in self.b_plan:
            if len(s_list) == 1:
                qcat = qts[s_list[0]]
            else:
                qcat = np.concatenate([qts[s] for s in s_list], axis=1)
            yv[yi] += qcat @ rcat
        return out

    def matvec_blocks(self, x):
        return self.codec.to_blocks(
            self.matvec_flat(self.codec.to_flat(x))
        )

    def diagonal(self):
        codec = self.codec
        ldiag = {}
        for (qw, sb), arr in self.left.items():
            if qw != ZERO:
                continue
            ldiag[sb] = np.diagonal(arr, axis1=1, axis2=2)  # (dwl, D)
        rdiag = {}
        for (qw, sb), arr in self.right.items():
            if qw != ZERO:
                continue
            rdiag[sb] = np.diagonal(arr, axis1=1, axis2=2)  # (dwr, D)
        w1d = {}
        for (ql, m, n, qm), w in self.w1.items():
            if ql == ZERO and m == n:
                w1d.setdefault(m, []).append((qm, w))
        w2d = {}
        for (qm, m, n, qr), w in self.w2.items():
            if qr == ZERO and m == n:
                w2d[(qm, m)] = w
        diag = {}
        for (sl, n1, n2, sr), shape in zip(codec.keys, codec.shapes):
            ld = ldiag.get(sl)
            rd = rdiag.get(sr)
            if ld is None or rd is None:
                continue
            blk = np.zeros(shape)
            for qm, wa in w1d.get(n1, ()):
                wb = w2d.get((qm, n2))
                if wb is None:
                    continue
                a = ld.T @ wa        # (D, dm)
                b = wb @ rd          # (dm, Dr)
                blk += a @ b
            diag[(sl, n1, n2, sr)] = blk
        return codec.to_flat(diag)


def davidson(matvec, diag, x0, tol=1e-9, max_iter=40, max_space=12):
    """Lowest eigenpair by Davidson iteration; returns (theta, x, n_mv)."""
    n = x0.size
    x = x0 / np.linalg.norm(x0)
    basis = [x]
    hbasis = [matvec(x)]
    n_mv = 1
    theta = float(x @ hbasis[0])
    best = (theta, x)
    for _ in range(max_iter):
        m = len(basis)
        hm = np.empty((m, m))
        for i in range(m):
            for j in range(i, m):
                hm[i, j] = hm[j, i] = float(basis[i] @ hbasis[j])
        w, vecs = np.linalg.eigh(hm)
        theta = float(w[0])
        coeff = vecs[:, 0]
        x = sum(c * b for c, b in zip(coeff, basis))
        hx = sum(c * b for c, b in zip(coeff, hbasis))
        resid = hx - theta * x
        rnorm = np.linalg.norm(resid)
        best = (theta, x)
        if rnorm < tol:
            return theta, x, n_mv, True
        if n_mv >= max_iter:
            break
        if m >= max_space or m >= n:
            basis = [x]
            hbasis = [hx]
        denom = diag - theta
        denom = np.where(np.abs(denom) < 1e-10, 1e-10, denom)
        t = resid / denom
        for b in basis:
            t -= (b @ t) * b
        for b in basis:
            t -= (b @ t) * b
        tn = np.linalg.norm(t)
        if tn < 1e-14:
            return theta, x, n_mv, True
        t /= tn
        basis.append(t)
        hbasis.append(matvec(t))
        n_mv += 1
    warnings.warn(
        f"Davidson did not reach tol={tol:g} within {max_iter} products"
    )
    return best[0], best[1], n_mv, False


def expectation(m: MPS, h: MPO) -> float:
    """<psi|H|psi> via a single left-to-right environment pass."""
    if m.n_sites != h.n_sites:
        raise ValueError("MPS/MPO site count mismatch")
    cm = CompiledMpo(h)
    env = left_boundary()
    for k, a in enumerate(m.sites):
        env = left_update(env, cm.wblocks[k], a)
    right = right_boundary(m.sector)
    return close_envs(env, right)


def dmrg_run(m: MPS, h: MPO, cfg: SweepConfig, rng=None, spill_dir=None,
             trace_hook=None):
    """Sweep to the ground state; returns (MPS, per-sweep energy list)."""
    if m.n_sites != h.n_sites:
        raise ValueError("MPS/MPO site count mismatch")
    K = m.n_sites
    rng = np.random.default_rng(rng)
    if K == 1:
        return _solve_single_site(m, h)

    cm = CompiledMpo(h)
    store = EnvStore(spill_dir=spill_dir)
    psi = m.canonicalize(0)

    # right environments for the first left-to-right sweep
    store.put(("R", K), right_boundary(psi.sector))
    for k in range(K - 1, 1, -1):
        store.put(
            ("R", k),
            right_update(store.get(("R", k + 1)), cm.wblocks[k],
                         psi.sites[k]),
        )
    store.put(("L", 0), left_boundary())

    trace = []
    for sweep in range(cfg.n_sweeps):
        noise = cfg.noise_at(sweep)
        sweep_best = np.inf
        positions = list(range(K - 1)) + list(range(K - 2, 0, -1))
        direction = ["R"] * (K - 1) + ["L"] * (K - 2)
        if K == 2:
            positions, direction = [0, 0], ["R", "L"]
        # loose eigensolver tolerance on early (noisy) sweeps; full
        # tolerance once the state is roughly converged
        eig_tol = max(cfg.eig_tol, 10.0 ** (-4 - sweep))
        for pos, dirn in zip(positions, direction):
            psi, e = _two_dot_step(
                psi, cm, store, pos, dirn, cfg, noise, eig_tol, rng
            )
            sweep_best = min(sweep_best, e)
            if trace_hook is not None:
                trace_hook(sweep, pos, e, psi.max_bond())
        trace.append(sweep_best)
    # independent energy of the final (truncated) state
    trace.append(expectation(psi, h))
    return psi, trace


def _two_dot_step(psi, cm, store, k, dirn, cfg, noise, eig_tol, rng):
    K = psi.n_sites
    psi = psi.move_center(k if dirn == "R" else k + 1)
    theta = psi.merge_two_site(k)
    left = store.get(("L", k))
    right = store.get(("R", k + 2))
    codec = BlockCodec(theta.legs[0], theta.legs[3].dual(), theta.charge)
    prob = TwoSiteProblem(left, right, cm.wblocks[k], cm.wblocks[k + 1],
                          codec)
    x0 = codec.to_flat(codec.tensor_to_blocks(theta))
    nx0 = np.linalg.norm(x0)
    if nx0 == 0.0:
        raise ValueError("two-dot tensor vanished")
    x0 /= nx0
    if codec.size <= 64:
        basis = np.eye(codec.size)
        hmat = np.column_stack(
            [prob.matvec_flat(basis[:, i]) for i in range(codec.size)]
        )
        w, vecs = np.linalg.eigh(0.5 * (hmat + hmat.T))
        e, x = float(w[0]), vecs[:, 0]
        if float(x @ x0) < 0:
            x = -x
    else:
        diag = prob.diagonal()
        e, x, _, _ = davidson(
            prob.matvec_flat,
            diag,
            x0,
            tol=eig_tol,
            max_iter=cfg.eig_max_iter,
            max_space=cfg.max_space,
        )
    if noise > 0.0:
        g = rng.standard_normal(x.size)
        g /= np.linalg.norm(g)
        x = x + noise * g
        x /= np.linalg.norm(x)
    theta_new = codec.blocks_to_tensor(codec.to_blocks(x))
    center_after = "right" if dirn == "R" else "left"
    sites = list(psi.sites)
    m_tmp = MPS(sites, psi.center)
    m_new, _ = m_tmp.split_two_site(
        k, theta_new, chi=cfg.d, tol=cfg.svd_tol, center_after=center_after
    )
    if dirn == "R":
        store.put(
            ("L", k + 1),
            left_update(store.get(("L", k)), cm.wblocks[k],
                        m_new.sites[k]),
        )
    else:
        store.put(
            ("R", k + 1),
            right_update(store.get(("R", k + 2)), cm.wblocks[k + 1],
                         m_new.sites[k + 1]),
        )
    return m_new, e


def _solve_single_site(m, h):
    """K=1 corner case: diagonalize the 4x4 (sector-projected) MPO."""
    cm = CompiledMpo(h)
    sector = m.sector
    mat = np.zeros((4, 4))
    for (ql, mm, nn, qr), w in cm.wblocks[0].items():
        mat[mm, nn] += float(w[0, 0])
    allowed = [i for i, s in enumerate(PHYS_SECTORS) if s == sector]
    sub = mat[np.ix_(allowed, allowed)]
    w, vecs = np.linalg.eigh(sub)
    e = float(w[0])
    amp = vecs[:, 0]
    site = m.sites[0]
    blocks = {}
    for i, a in zip(allowed, amp):
        blocks[(ZERO, PHYS_SECTORS[i], sector)] = np.full((1, 1, 1), a)
    new = BlockTensor(site.legs, ZERO, blocks, validate=False)
    return MPS([new], 0), [e, e]
