"""Command-line front end: simulate, spectrum, verify and jlab.

Every command reads one :class:`RunConfig` (``--config`` or ``--example``),
writes its reports under the output directory and exits with

* 0 when every certificate passes (or the command has no verdicts),
* 1 when any certificate fails or a Monte-Carlo suite finds a violation,
* 2 when any certificate is indeterminate,
* 3 on a runtime error (including a rejected configuration).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import jlab
from .config import RunConfig, lorenz_config
from .errors import SinghypError
from .exterior import exterior_generator, induced_splitting
from .flow import find_singularities, integrate, load_orbit, save_orbit
from .lyapunov import domination_functional, lyapunov_exponents, p_sectional_exponents
from .verifier import (Certificate, SplittingField, Verdict, _plain, aggregate,
                       check_dominated, estimate_splitting, singularity_compatibility,
                       verify_orbit)

log = logging.getLogger("singhyp")

SCHEMA = 1
EXIT_PASS, EXIT_FAIL, EXIT_INDETERMINATE, EXIT_ERROR = 0, 1, 2, 3
EXAMPLE_DIAGONAL = (-3.0, 2.0, 4.0, 10.0)


def diagonal_config(**overrides) -> RunConfig:
    """The linear model ``diag(-3, 2, 4, 10)`` along its stationary orbit, ``E = e1``."""
    base = dict(field={"kind": "linear", "A": np.diag(EXAMPLE_DIAGONAL).tolist()},
                initial=[[0.0, 0.0, 0.0, 0.0]], T=50.0, dt=0.1, tau=0.5, d_E=1, p=[2, 3],
                singularity_seeds=[[0.0, 0.0, 0.0, 0.0]])
    base.update(overrides)
    return RunConfig(**base)


EXAMPLES = {"diagonal": diagonal_config, "lorenz": lorenz_config}
# name fixed by the command-line interface contract
EXAMPLES["paper-1.9"] = diagonal_config
DIAGONAL_EXAMPLES = ("diagonal", "paper-1.9")


# --------------------------------------------------------------------- io

def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def write_json(path: Path, payload: dict) -> None:
    """Schema-tagged JSON with sorted keys; only ``created`` varies between runs."""
    doc = {"schema": SCHEMA, "created": _timestamp(), **_plain(payload)}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_series(path: Path, header, rows, max_rows: int = 2000) -> None:
    rows = np.asarray(rows, dtype=float)
    stride = max(1, len(rows) // max_rows)
    idx = np.r_[np.arange(0, len(rows) - 1, stride), len(rows) - 1] if len(rows) else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in idx:
            w.writerow([repr(float(v)) for v in rows[i]])


# ---------------------------------------------------------------- orbits

def _cache_key(cfg: RunConfig, x0) -> str:
    blob = json.dumps({"field": cfg.vector_field.to_dict(), "x0": [float(v) for v in x0],
                       "T": cfg.T, "dt": cfg.dt, "transient": cfg.transient,
                       "rtol": cfg.tolerances["rtol"], "atol": cfg.tolerances["atol"]},
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _orbit_path(out: Path, k: int) -> Path:
    return out / "orbits" / f"orbit_{k:03d}.npz"


def _simulate_one(args):
    cfg, k, x0, out = args
    path = _orbit_path(out, k)
    key = _cache_key(cfg, x0)
    row = {"index": k, "x0": list(map(float, x0)), "path": str(path.relative_to(out)),
           "cache_key": key}
    if path.exists():
        try:
            if load_orbit(path).meta.get("cache_key") == key:
                return {**row, "status": "ok"}
        except Exception:  # unreadable cache is rebuilt
            pass
    try:
        orbit = integrate(cfg.vector_field, x0, cfg.T, cfg.dt, cfg.transient,
                          rtol=cfg.tolerances["rtol"], atol=cfg.tolerances["atol"], seed=cfg.seed)
    except SinghypError as exc:
        return {**row, "status": type(exc).__name__, "message": str(exc)}
    orbit = dataclasses.replace(orbit, meta={**orbit.meta, "cache_key": key})
    save_orbit(orbit, path)
    return {**row, "status": "ok"}


def _map(fn, jobs, workers: int):
    """Ordered map, optionally over a process pool."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
        return list(ex.map(fn, jobs))


def ensure_orbits(cfg: RunConfig, out: Path) -> list[dict]:
    (out / "orbits").mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, k, x0, out) for k, x0 in enumerate(cfg.initial_conditions())]
    return _map(_simulate_one, jobs, cfg.workers)


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    rows = ensure_orbits(cfg, out)
    for r in rows:
        if r["status"] != "ok":
            log.warning("orbit %d: %s %s", r["index"], r["status"], r.get("message", ""))
    write_json(out / "simulate.json", {"config": cfg.to_dict(), "orbits": rows})
    ok = sum(r["status"] == "ok" for r in rows)
    print(f"simulate: {ok}/{len(rows)} orbits cached under {out / 'orbits'}")
    return EXIT_PASS if ok == len(rows) else EXIT_ERROR


# -------------------------------------------------------------- spectrum

def _spectrum_one(args):
    cfg, row, out = args
    k = row["index"]
    result = {"index": k, "x0": row["x0"], "status": row["status"]}
    if row["status"] != "ok":
        return {**result, "message": row.get("message", "")}
    try:
        orbit = load_orbit(out / row["path"])
        rep = lyapunov_exponents(orbit, seed=cfg.seed)
        result.update(rep.to_dict())
        try:
            sp = estimate_splitting(orbit, cfg.d_E, cfg.window, cfg.seed)
            result["p_sectional"] = {
                str(p): list(map(float, p_sectional_exponents(orbit, sp.F, p, cfg.seed)))
                for p in cfg.p}
            dom = domination_functional(orbit, sp.E, sp.F)
            result["domination"] = dom.to_dict()
            write_series(out / f"domination_{k:03d}.csv", ["t", "f_t"],
                         np.column_stack([dom.times, dom.values]))
        except SinghypError as exc:
            result["splitting_error"] = f"{type(exc).__name__}: {exc}"
        rep.write_csv(out / f"spectrum_{k:03d}.csv")
    except SinghypError as exc:
        return {**result, "status": type(exc).__name__, "message": str(exc)}
    return result


def cmd_spectrum(cfg: RunConfig, out: Path) -> int:
    rows = ensure_orbits(cfg, out)
    results = _map(_spectrum_one, [(cfg, r, out) for r in rows], cfg.workers)
    write_json(out / "spectrum.json", {"config": cfg.to_dict(), "orbits": results})
    for r in results:
        if r["status"] != "ok":
            print(f"orbit {r['index']}: {r['status']} {r.get('message', '')}")
            continue
        flag = "  LowConfidence" if r["low_confidence"] else ""
        chi = ", ".join(f"{v:+.6f}" for v in r["exponents"])
        print(f"orbit {r['index']}: chi = ({chi})  sum {r['sum']:+.6f}{flag}")
        for p, v in r.get("p_sectional", {}).items():
            print(f"  p={p}: " + ", ".join(f"{x:+.6f}" for x in v))
        if "domination" in r:
            print(f"  domination slope {r['domination']['slope']:+.6f}")
    return EXIT_PASS if all(r["status"] == "ok" for r in results) else EXIT_ERROR


# ---------------------------------------------------------------- verify

def _verify_one(args):
    cfg, row, out, singularities = args
    if row["status"] != "ok":
        cert = Certificate("Dominated", Verdict.INDETERMINATE,
                           {"reason": f"{row['status']}: {row.get('message', '')}"},
                           stage="simulate")
        return [cert], {}
    orbit = load_orbit(out / row["path"])
    return verify_orbit(orbit, cfg.d_E, cfg.p, cfg.tau, singularities, cfg.window, cfg.seed,
                        tuple(cfg.grid), cfg.tolerances["margin"], cfg.adapt_horizon)


def _exit_code(certs) -> int:
    verdicts = [c.verdict for c in certs]
    if Verdict.FAIL in verdicts:
        return EXIT_FAIL
    if Verdict.INDETERMINATE in verdicts:
        return EXIT_INDETERMINATE
    return EXIT_PASS


def _ensemble(per_orbit, description) -> list[Certificate]:
    names = []
    for certs in per_orbit:
        for c in certs:
            if c.property not in names:
                names.append(c.property)
    out = []
    for name in names:
        members = [c for certs in per_orbit for c in certs if c.property == name]
        missing = len(per_orbit) - len(members)
        cert = aggregate(members, {**description, "members_missing": missing})
        if missing:
            # an orbit whose chain stopped early cannot support the property
            cert = dataclasses.replace(cert, verdict=Verdict.INDETERMINATE
                                       if cert.verdict is Verdict.PASS else cert.verdict)
        out.append(cert)
    return out


def _summary_lines(certs) -> list[str]:
    lines = []
    for c in certs:
        m = c.witnesses.get("margin")
        extra = f"  margin {m:.4g}" if isinstance(m, (int, float)) else ""
        T = c.witnesses.get("T")
        extra += f"  T {T:g}" if isinstance(T, (int, float)) else ""
        lines.append(f"{c.property:<28s} {c.verdict.value:<13s}{extra}")
    return lines


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    rows = ensure_orbits(cfg, out)
    field = cfg.vector_field
    seeds = cfg.singularity_seeds or [[0.0] * field.n]
    sings = find_singularities(field, seeds)
    results = _map(_verify_one, [(cfg, r, out, sings) for r in rows], cfg.workers)
    per_orbit = [certs for certs, _ in results]
    desc = {"orbits": len(rows), "T": cfg.T, "dt": cfg.dt, "seed": cfg.seed}
    ensemble = _ensemble(per_orbit, desc)
    ensemble.append(singularity_compatibility(field, cfg.d_E, sings))
    payload = {
        "config": cfg.to_dict(),
        "singularities": [s.to_dict() for s in sings],
        "ensemble": [c.to_dict() for c in ensemble],
        "orbits": [{"index": r["index"], "x0": r["x0"], "status": r["status"],
                    "certificates": [c.to_dict() for c in certs], "reports": rep}
                   for r, (certs, rep) in zip(rows, results)],
    }
    write_json(out / "verify.json", payload)
    lines = [f"ensemble of {len(rows)} orbit(s), T={cfg.T:g}, dt={cfg.dt:g}"]
    lines += _summary_lines(ensemble)
    (out / "verify_summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return _exit_code(ensemble)


def verify_diagonal_example(out: Path) -> int:
    """Domination of ``E = e1``, ``F = span(e2, e3, e4)`` for ``diag(-3, 2, 4, 10)``
    and of the splittings it induces on the second and third exterior powers."""
    cfg = diagonal_config(T=25.0)
    orbit = integrate(cfg.vector_field, cfg.initial[0], cfg.T, cfg.dt)
    I = np.eye(4)
    rows, certs = [], []
    for k in (1, 2, 3):
        if k == 1:
            orb, Eb, Fb, eE, eF = orbit, I[:1], I[1:], [-3.0], [2.0, 4.0, 10.0]
        else:
            ind = induced_splitting(I[:1], I[1:], k)
            orb, Eb, Fb = orbit.exterior(k), ind.E_tilde.T, ind.F_tilde.T
            gen = exterior_generator(np.diag(EXAMPLE_DIAGONAL), k).matrix
            eE = sorted(float(v) for v in np.diag(Eb @ gen @ Eb.T))
            eF = sorted(float(v) for v in np.diag(Fb @ gen @ Fb.T))
        cert = check_dominated(SplittingField.constant(orb, Eb, Fb), orb)
        cert = dataclasses.replace(cert, property=f"Dominated(k={k})")
        certs.append(cert)
        rates = cert.witnesses.get("rates", {})
        rows.append({"k": k, "verdict": cert.verdict.value, "rates_E": eE, "rates_F": eF,
                     "E_max": rates.get("E_max"), "F_min": rates.get("F_min"),
                     "certificate": cert.to_dict()})
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "verify.json", {"example": "diagonal", "splittings": rows})
    lines = [f"{'k':>2}  {'verdict':<8} {'max rate on E':>14} {'min rate on F':>14}"]
    for r in rows:
        lines.append(f"{r['k']:>2}  {r['verdict']:<8} {max(r['rates_E']):>14g} "
                     f"{min(r['rates_F']):>14g}")
    (out / "verify_summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return _exit_code(certs)


# ------------------------------------------------------------------ jlab

def cmd_jlab(cfg: RunConfig | None, out: Path, seed: int, trials: int | None) -> int:
    n = trials if trials is not None else (cfg.jlab_trials if cfg else 1000)
    results = jlab.run_suites(n, seed)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "jlab.json", {"seed": seed, "suites": [r.to_dict() for r in results]})
    for r in results:
        worst = ", ".join(f"{k} {v:.3g}" for k, v in r.worst.items())
        print(f"{r.name:<22s} trials {r.trials:<6d} violations {r.violations:<4d} {worst}")
        if r.first_violation:
            fv = r.first_violation
            print(f"  reproduce: seed {fv['seed']} trial {fv['trial']}: {fv['detail']}")
    return EXIT_PASS if all(r.ok for r in results) else EXIT_FAIL


# ------------------------------------------------------------------ main

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="singhyp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("simulate", "integrate and cache all configured orbits"),
                       ("spectrum", "Lyapunov and p-sectional exponents per orbit"),
                       ("verify", "hyperbolicity certificates for the orbit ensemble"),
                       ("jlab", "Monte-Carlo suites over random J-separated matrices")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="TOML run configuration")
        p.add_argument("--example", choices=sorted(EXAMPLES), help="built-in configuration")
        p.add_argument("--out", type=Path, help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
        p.add_argument("--workers", type=int, help="parallel orbit jobs")
        if name == "jlab":
            p.add_argument("--trials", type=int, help="trials per suite")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def load_config(args) -> RunConfig | None:
    if args.config and args.example:
        raise SinghypError("--config and --example are mutually exclusive")
    if args.config:
        cfg = RunConfig.load(args.config)
    elif args.example:
        cfg = EXAMPLES[args.example]()
    else:
        return None
    changes = {k: v for k, v in (("out", str(args.out) if args.out else None),
                                 ("seed", args.seed), ("workers", args.workers))
               if v is not None}
    return dataclasses.replace(cfg, **changes) if changes else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        if args.command == "jlab":
            out = Path(args.out or (cfg.out if cfg else "out"))
            seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
            return cmd_jlab(cfg, out, seed, args.trials)
        if cfg is None:
            raise SinghypError("a --config or --example is required")
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "verify" and args.example in DIAGONAL_EXAMPLES:
            return verify_diagonal_example(out)
        cmd = {"simulate": cmd_simulate, "spectrum": cmd_spectrum, "verify": cmd_verify}
        return cmd[args.command](cfg, out)
    except (SinghypError, OSError, ValueError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
