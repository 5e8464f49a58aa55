"""Batch orchestration for orbital-optimization jobs.

A job loads a model (FCIDUMP file or Hubbard lattice), runs the
basin-hopping optimizer, then scans DMRG over a ladder of bond
dimensions in the optimized basis.  Data goes to files in the output
directory; logs go to standard error; standard out carries a single
final JSON summary line.

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import ipr as ipr_estimate
from .analysis import largest_det
from .basinhop import RunConfig, run_emo, write_rotation
from .blocktensor import NullStateError
from .dmrg import SweepConfig, dmrg_run, expectation
from .entangle import total_entropy
from .model import (
    FcidumpError,
    HubbardSpec,
    IntegralSet,
    build_hubbard,
    parse_fcidump,
    transform_integrals,
)
from .mpo import build_mpo
from .mps import random_mps

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class JobSpec:
    """One batch job: model source, optimizer config, D-scan, outputs."""

    fcidump: str = None
    hubbard: tuple = None  # (lx, ly, t, u, boundary)
    n_elec: int = None
    two_sz: int = 0
    run: RunConfig = field(default_factory=RunConfig)
    d_schedule: tuple = (100,)
    out: str = "."
    ipr_samples: int = 2000

    def __post_init__(self):
        if (self.fcidump is None) == (self.hubbard is None):
            raise ConfigError("exactly one of fcidump/hubbard is required")
        if list(self.d_schedule) != sorted(self.d_schedule):
            raise ConfigError("d_schedule must be ascending")

    def integrals(self) -> IntegralSet:
        if self.fcidump is not None:
            with open(self.fcidump) as fh:
                s = parse_fcidump(fh)
        else:
            lx, ly, t, u, boundary = self.hubbard
            s = build_hubbard(HubbardSpec(lx, ly, t=t, u=u, boundary=boundary))
        n_elec = self.n_elec if self.n_elec is not None else s.n_elec
        if n_elec < 1:
            raise ConfigError("electron count must be set and positive")
        return s.replace(n_elec=n_elec, two_s=self.two_sz)


_CONFIG_KEYS = {
    "fcidump", "hubbard", "nelec", "twosz", "d", "chi", "epsilon",
    "nmacro", "nmax", "nsweep", "alpha", "seed", "dschedule", "out",
    "iprsamples", "boundary",
}


def parse_config_file(path):
    """Flat key = value text; '#' starts a comment."""
    values = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        key = key.lower().replace("_", "")
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
        values[key] = val
    return values


def _build_jobspec(values):
    hubbard = None
    if "hubbard" in values:
        parts = str(values["hubbard"]).split()
        if len(parts) < 2:
            raise ConfigError("hubbard needs at least 'LX LY'")
        lx, ly = int(parts[0]), int(parts[1])
        t = float(parts[2]) if len(parts) > 2 else 1.0
        u = float(parts[3]) if len(parts) > 3 else 0.0
        hubbard = (lx, ly, t, u, values.get("boundary", "open"))
    try:
        run = RunConfig(
            d=int(values.get("d", 100)),
            chi=int(values["chi"]) if "chi" in values else None,
            epsilon=float(values.get("epsilon", 1e-8)),
            n_macro=int(values.get("nmacro", 5)),
            n_max=int(values.get("nmax", 20)),
            n_sweep=int(values.get("nsweep", 4)),
            alpha=float(values.get("alpha", 0.5)),
            seed=int(values.get("seed", 0)),
        )
        return JobSpec(
            fcidump=values.get("fcidump"),
            hubbard=hubbard,
            n_elec=int(values["nelec"]) if "nelec" in values else None,
            two_sz=int(values.get("twosz", 0)),
            run=run,
            d_schedule=tuple(
                int(x) for x in str(values.get("dschedule", "100")).split(",")
            ),
            out=values.get("out", "."),
            ipr_samples=int(values.get("iprsamples", 2000)),
        )
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def serialize_jobspec(j: JobSpec):
    lines = []
    if j.fcidump is not None:
        lines.append(f"fcidump = {j.fcidump}")
    else:
        lx, ly, t, u, boundary = j.hubbard
        lines.append(f"hubbard = {lx} {ly} {t!r} {u!r}")
        lines.append(f"boundary = {boundary}")
    if j.n_elec is not None:
        lines.append(f"nelec = {j.n_elec}")
    lines.append(f"twosz = {j.two_sz}")
    r = j.run
    lines.append(f"d = {r.d}")
    lines.append(f"chi = {r.chi}")
    lines.append(f"epsilon = {r.epsilon!r}")
    lines.append(f"nmacro = {r.n_macro}")
    lines.append(f"nmax = {r.n_max}")
    lines.append(f"nsweep = {r.n_sweep}")
    lines.append(f"alpha = {r.alpha!r}")
    lines.append(f"seed = {r.seed}")
    lines.append("dschedule = " + ",".join(str(d) for d in j.d_schedule))
    lines.append(f"out = {j.out}")
    lines.append(f"iprsamples = {j.ipr_samples}")
    return "\n".join(lines) + "\n"


def _scan_row(m, h, d, alpha, ipr_samples, rng):
    e = expectation(m, h)
    s_tot = total_entropy(m, alpha)
    cfg0, c0 = largest_det(m)
    est, err = ipr_estimate(m, ipr_samples, rng)
    return {
        "d": d,
        "e": e,
        "sTot": s_tot,
        "ipr": est,
        "iprStdErr": err,
        "c0Det": c0,
        "p0Det": c0 * c0,
        "config": cfg0,
    }


_SCAN_COLS = ("d", "e", "sTot", "ipr", "iprStdErr", "c0Det", "p0Det", "config")


def _write_scan(rows, fh, extra_cols=()):
    cols = tuple(extra_cols) + _SCAN_COLS
    fh.write(",".join(cols) + "\n")
    for row in rows:
        out = []
        for c in cols:
            v = row[c]
            out.append(f"{v:.17g}" if isinstance(v, float) else str(v))
        fh.write(",".join(out) + "\n")


def d_scan(s, d_schedule, run, initial, ipr_samples, rng):
    """DMRG at each D (ascending, warm-started) plus diagnostics."""
    rows = []
    m = initial
    h = build_mpo(s)
    for d in d_schedule:
        m, _ = dmrg_run(m, h, SweepConfig(d=d, n_sweeps=run.n_sweep), rng=rng)
        m = m.normalize()
        rows.append(_scan_row(m, h, d, run.alpha, ipr_samples, rng))
    return rows, m


def run_job(j: JobSpec) -> int:
    """Optimize, scan, and write trace.jsonl / scan.csv / u_final.txt."""
    out = Path(j.out)
    out.mkdir(parents=True, exist_ok=True)
    s = j.integrals()

    with open(out / "trace.jsonl", "w") as tr:
        def hook(rec):
            tr.write(rec.to_json() + "\n")
            tr.flush()

        state, emo = run_emo(s, j.run, trace_hook=hook)

    with open(out / "u_final.txt", "w") as fh:
        write_rotation(state.u, fh)
    with open(out / "layers.jsonl", "w") as fh:
        for lay in state.layers:
            fh.write(lay.to_json() + "\n")

    rng = np.random.default_rng(j.run.seed + 1)
    rows, m = d_scan(emo, j.d_schedule, j.run, state.mps, j.ipr_samples, rng)
    with open(out / "scan.csv", "w") as fh:
        _write_scan(rows, fh)
    m.save(out / "final.mps")

    summary = {
        "status": "ok",
        "eMin": state.e_min,
        "sMin": state.s_min,
        "out": str(out),
        "scan": [
            {"d": r["d"], "e": r["e"], "p0Det": r["p0Det"]} for r in rows
        ],
    }
    print(json.dumps(summary))
    return EXIT_OK


def compare_bases(j: JobSpec, bases=("site", "emo")) -> int:
    """Per-basis, per-D scan rows with p0 enhancement over the first basis.

    'site' uses the input orbitals, 'emo' requires u_final.txt from a
    completed run in the job's output directory, 'no' builds natural
    orbitals from a site-basis DMRG at the smallest scan D.
    """
    out = Path(j.out)
    s = j.integrals()
    sector = (s.n_elec, s.two_s)
    rotations = {}
    for basis in bases:
        if basis in ("site", "initial"):
            rotations[basis] = np.eye(s.n_orb)
        elif basis == "emo":
            path = out / "u_final.txt"
            if not path.exists():
                raise FileNotFoundError(
                    f"'emo' basis needs a completed run: {path} is missing"
                )
            rotations[basis] = np.loadtxt(path)
        elif basis == "no":
            from .analysis import natural_orbitals, one_rdm

            rng = np.random.default_rng(j.run.seed + 2)
            m0 = random_mps(s.n_orb, sector, min(j.d_schedule), rng)
            m0, _ = dmrg_run(
                m0, build_mpo(s),
                SweepConfig(d=min(j.d_schedule), n_sweeps=j.run.n_sweep),
                rng=rng,
            )
            rotations[basis] = natural_orbitals(one_rdm(m0.normalize()))
        else:
            raise ConfigError(f"unknown basis {basis!r}")

    all_rows = []
    reference = {}
    for bi, basis in enumerate(bases):
        rng = np.random.default_rng(j.run.seed + 3 + bi)
        sb = transform_integrals(s, rotations[basis])
        initial = random_mps(s.n_orb, sector, min(j.d_schedule), rng)
        rows, _ = d_scan(
            sb, j.d_schedule, j.run, initial, j.ipr_samples, rng
        )
        for row in rows:
            row["basis"] = basis
            if basis == bases[0]:
                reference[row["d"]] = row["p0Det"]
            row["enhancement"] = row["p0Det"] / reference[row["d"]]
            all_rows.append(row)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "compare.csv", "w") as fh:
        _write_scan(all_rows, fh, extra_cols=("basis", "enhancement"))
    print(json.dumps({"status": "ok", "out": str(out / "compare.csv")}))
    return EXIT_OK


def _parser():
    p = argparse.ArgumentParser(
        prog="emorb",
        description="Entanglement-minimized orbital optimization jobs.",
    )
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--fcidump")
    p.add_argument("--hubbard", nargs=2, type=int, metavar=("LX", "LY"))
    p.add_argument("--t", type=float)
    p.add_argument("--u", type=float)
    p.add_argument("--boundary", choices=("open", "periodic"))
    p.add_argument("--nelec", type=int)
    p.add_argument("--twosz", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--chi", type=int)
    p.add_argument("--nmax", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--nmacro", type=int)
    p.add_argument("--nsweep", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--dschedule", help="comma-separated ascending D list")
    p.add_argument("--iprsamples", type=int)
    p.add_argument("--out")
    p.add_argument(
        "--compare", nargs="+", metavar="BASIS",
        help="compare bases (site, emo, no) instead of optimizing",
    )
    return p


def main(argv=None):
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _parser().parse_args(argv)
    try:
        values = parse_config_file(args.config) if args.config else {}
        if args.hubbard:
            lx, ly = args.hubbard
            t = args.t if args.t is not None else 1.0
            u = args.u if args.u is not None else 0.0
            values["hubbard"] = f"{lx} {ly} {t} {u}"
        for key in (
            "fcidump", "boundary", "nelec", "twosz", "d", "chi", "epsilon",
            "nmacro", "nmax", "nsweep", "seed", "dschedule", "iprsamples",
            "out",
        ):
            val = getattr(args, key)
            if val is not None:
                values[key] = str(val)
        job = _build_jobspec(values)
    except (ConfigError, FcidumpError, FileNotFoundError) as exc:
        log.error("configuration error: %s", exc)
        print(json.dumps({"status": "config-error", "error": str(exc)}))
        return EXIT_CONFIG

    try:
        if args.compare:
            return compare_bases(job, tuple(args.compare))
        return run_job(job)
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        print(json.dumps({"status": "io-error", "error": str(exc)}))
        return EXIT_IO
    except (NullStateError, FcidumpError, ConfigError) as exc:
        log.error("configuration error: %s", exc)
        print(json.dumps({"status": "config-error", "error": str(exc)}))
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        log.error("numeric failure: %s", exc)
        print(json.dumps({"status": "numeric-error", "error": str(exc)}))
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
