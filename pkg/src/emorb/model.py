"""Hamiltonian definition and integral I/O.

An IntegralSet carries the one- and two-electron integrals of the
second-quantized Hamiltonian

    H = sum_{pq,s} h_pq a+_ps a_qs
      + 1/2 sum_{pqrs,st} <pq|rs> a+_ps a+_qt a_st a_rs  + E_core

with the two-electron part stored in physicists' notation.  FCIDUMP
files use chemists' notation (ij|kl); the conversion <pq|rs> = (pr|qs)
happens at parse time.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

_SYM_TOL = 1e-10


@dataclass(frozen=True)
class IntegralSet:
    """One-/two-electron integrals plus core energy for an active space."""

    h: np.ndarray
    v: np.ndarray
    e_core: float = 0.0
    n_elec: int = 0
    two_s: int = 0
    orbsym: tuple = ()
    isym: int = 1

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("h must be a square matrix")
        k = h.shape[0]
        if v.shape != (k, k, k, k):
            raise ValueError("v must have shape (K, K, K, K)")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "v", v)

    @property
    def n_orb(self):
        return self.h.shape[0]

    def validate_symmetry(self, tol=1e-12):
        """Check hermiticity of h and 8-fold symmetry of <pq|rs>."""
        if np.max(np.abs(self.h - self.h.T)) > tol:
            raise ValueError("h is not symmetric")
        v = self.v
        for perm in ((1, 0, 3, 2), (2, 3, 0, 1), (3, 2, 1, 0)):
            if np.max(np.abs(v - v.transpose(perm))) > tol:
                raise ValueError(f"v violates index symmetry {perm}")

    def replace(self, **kw):
        from dataclasses import replace

        return replace(self, **kw)


class FcidumpError(ValueError):
    """Malformed FCIDUMP input; carries the offending line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


def _chem_images(i, j, k, l):
    return {
        (i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k),
        (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i),
    }


def parse_fcidump(stream) -> IntegralSet:
    """Read an FCIDUMP namelist + integral body into an IntegralSet."""
    if isinstance(stream, str):
        lines = stream.splitlines()
    else:
        lines = stream.read().splitlines()

    header_parts = []
    body_start = None
    for ln, raw in enumerate(lines, start=1):
        header_parts.append(raw)
        token = raw.strip().upper().replace(" ", "")
        if token.endswith("&END") or token.endswith("/"):
            body_start = ln
            break
    if body_start is None:
        raise FcidumpError("missing &END/'/' namelist terminator")

    header = " ".join(header_parts)
    if "&FCI" not in header.upper():
        raise FcidumpError("missing &FCI namelist", 1)
    fields = _parse_namelist(header)
    try:
        norb = int(fields["NORB"])
        n_elec = int(fields.get("NELEC", 0))
        two_s = int(fields.get("MS2", 0))
    except (KeyError, ValueError) as exc:
        raise FcidumpError(f"bad namelist field: {exc}", 1) from exc
    orbsym = tuple(
        int(x) for x in str(fields.get("ORBSYM", "")).split(",") if x.strip()
    )
    isym = int(fields.get("ISYM", 1))

    h = np.zeros((norb, norb))
    chem = np.zeros((norb, norb, norb, norb))
    seen_h = np.zeros((norb, norb), dtype=bool)
    seen_v = np.zeros((norb,) * 4, dtype=bool)
    e_core = 0.0

    for ln, raw in enumerate(lines[body_start:], start=body_start + 1):
        parts = raw.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise FcidumpError(f"expected 'value i j k l', got {raw!r}", ln)
        try:
            val = float(parts[0])
            i, j, k, l = (int(p) for p in parts[1:])
        except ValueError as exc:
            raise FcidumpError(f"non-numeric field in {raw!r}", ln) from exc
        for idx in (i, j, k, l):
            if idx < 0 or idx > norb:
                raise FcidumpError(
                    f"orbital index {idx} outside 1..{norb}", ln
                )
        if i == j == k == l == 0:
            e_core = val
        elif k == 0 and l == 0:
            if i == 0 or j == 0:
                # orbital-energy style line; carried by some producers
                continue
            a, b = i - 1, j - 1
            for p, q in ((a, b), (b, a)):
                if seen_h[p, q] and abs(h[p, q] - val) > _SYM_TOL:
                    warnings.warn(
                        f"FCIDUMP line {ln}: h({i},{j}) inconsistent with "
                        f"earlier value by {abs(h[p, q] - val):.3e}"
                    )
                h[p, q] = val
                seen_h[p, q] = True
        elif 0 in (i, j, k, l):
            raise FcidumpError(f"mixed zero/nonzero indices in {raw!r}", ln)
        else:
            key = (i - 1, j - 1, k - 1, l - 1)
            for img in _chem_images(*key):
                if seen_v[img] and abs(chem[img] - val) > _SYM_TOL:
                    warnings.warn(
                        f"FCIDUMP line {ln}: ({i}{j}|{k}{l}) inconsistent "
                        f"with earlier value by {abs(chem[img] - val):.3e}"
                    )
                chem[img] = val
                seen_v[img] = True

    # chemists' (pr|qs) -> physicists' <pq|rs>
    v = chem.transpose(0, 2, 1, 3).copy()
    return IntegralSet(
        h=h, v=v, e_core=e_core, n_elec=n_elec, two_s=two_s,
        orbsym=orbsym, isym=isym,
    )


def _parse_namelist(header):
    text = header
    for mark in ("&FCI", "&fci"):
        pos = text.find(mark)
        if pos >= 0:
            text = text[pos + len(mark):]
            break
    for mark in ("&END", "&end", "/"):
        pos = text.find(mark)
        if pos >= 0:
            text = text[:pos]
            break
    fields = {}
    # split on commas that are followed by KEY= (values may contain commas)
    import re

    for m in re.finditer(r"([A-Za-z0-9_]+)\s*=\s*([^=]*?)(?=,?\s*[A-Za-z0-9_]+\s*=|$)", text):
        key = m.group(1).upper()
        fields[key] = m.group(2).strip().rstrip(",").strip()
    return fields


def write_fcidump(s: IntegralSet, stream) -> None:
    """Emit an FCIDUMP in canonical order; parse(write(s)) == s."""
    k = s.n_orb
    w = stream.write
    orbsym = s.orbsym if s.orbsym else (1,) * k
    w(f"&FCI NORB={k},NELEC={s.n_elec},MS2={s.two_s},\n")
    w("  ORBSYM=" + ",".join(str(x) for x in orbsym) + ",\n")
    w(f"  ISYM={s.isym},\n")
    w("&END\n")
    chem = s.v.transpose(0, 2, 1, 3)
    for i in range(k - 1, -1, -1):
        for j in range(i, -1, -1):
            for a in range(i, -1, -1):
                for b in range(a, -1, -1):
                    if (a, b) > (i, j):
                        continue
                    val = float(chem[i, j, a, b])
                    if val != 0.0:
                        w(f"{val!r} {i+1} {j+1} {a+1} {b+1}\n")
    for i in range(k - 1, -1, -1):
        for j in range(i, -1, -1):
            if s.h[i, j] != 0.0:
                w(f"{float(s.h[i, j])!r} {i+1} {j+1} 0 0\n")
    w(f"{float(s.e_core)!r} 0 0 0 0\n")


@dataclass(frozen=True)
class HubbardSpec:
    """2D Hubbard lattice in zigzag (snake) orbital ordering."""

    lx: int
    ly: int
    t: float = 1.0
    u: float = 0.0
    boundary: str = "open"

    def __post_init__(self):
        if self.lx < 1 or self.ly < 1:
            raise ValueError("lattice extents must be >= 1")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def n_sites(self):
        return self.lx * self.ly


def zigzag_index(spec: HubbardSpec, x, y):
    """Orbital index of lattice site (x, y) under snake ordering."""
    if y % 2 == 0:
        return y * spec.lx + x
    return y * spec.lx + (spec.lx - 1 - x)


def hubbard_edges(spec: HubbardSpec):
    """Nearest-neighbor bonds as orbital-index pairs, each once."""
    edges = set()
    wrapx = spec.boundary == "periodic" and spec.lx > 2
    wrapy = spec.boundary == "periodic" and spec.ly > 2
    for y in range(spec.ly):
        for x in range(spec.lx):
            a = zigzag_index(spec, x, y)
            if x + 1 < spec.lx:
                edges.add(frozenset((a, zigzag_index(spec, x + 1, y))))
            elif wrapx:
                edges.add(frozenset((a, zigzag_index(spec, 0, y))))
            if y + 1 < spec.ly:
                edges.add(frozenset((a, zigzag_index(spec, x, y + 1))))
            elif wrapy:
                edges.add(frozenset((a, zigzag_index(spec, x, 0))))
    return sorted(tuple(sorted(e)) for e in edges if len(e) == 2)


def build_hubbard(spec: HubbardSpec) -> IntegralSet:
    """Hubbard model as an IntegralSet: -t hops plus <ii|ii> = U."""
    k = spec.n_sites
    h = np.zeros((k, k))
    for a, b in hubbard_edges(spec):
        h[a, b] = h[b, a] = -spec.t
    v = np.zeros((k, k, k, k))
    for i in range(k):
        v[i, i, i, i] = spec.u
    # default sector: half filling, lowest spin
    return IntegralSet(h=h, v=v, n_elec=k, two_s=k % 2)


def transform_integrals(s: IntegralSet, u: np.ndarray) -> IntegralSet:
    """Rotate integrals to the orbital basis phi'_p = sum_q phi_q u_qp."""
    u = np.asarray(u, dtype=float)
    k = s.n_orb
    if u.shape != (k, k):
        raise ValueError(f"rotation must be {k}x{k}, got {u.shape}")
    if np.max(np.abs(u.T @ u - np.eye(k))) > 1e-10:
        raise ValueError("rotation matrix is not orthogonal")
    h = u.T @ s.h @ u
    # O(K^5) via successive one-index transforms
    v = np.tensordot(u, s.v, axes=(0, 0))          # p' q r s
    v = np.tensordot(u, v, axes=(0, 1))            # q' p' r s
    v = v.transpose(1, 0, 2, 3)
    v = np.tensordot(v, u, axes=(2, 0))            # p' q' s r'
    v = np.tensordot(v, u, axes=(2, 0))            # p' q' r' s'
    return s.replace(h=h, v=v)
