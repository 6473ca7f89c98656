"""Command-line entry point: ``rigidrec <subcommand> ...``.

Exit codes: 0 when every audited property holds, 1 on a property violation
(the witness is in the report), 2 on invalid input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import mpmath

from . import concentration, intsets, kronecker, pipeline, popdiff, systems, torus

SCHEMA = "rigidrec.audit/1"


class InputError(Exception):
    """Bad flags or unreadable input files (exit code 2)."""


@dataclass
class Config:
    seed: int = 0
    guard_band: float = torus.GUARD_BAND
    workers: int = 1
    out: Path | None = None
    max_group: int = concentration.MAX_ELEMENTS
    max_clique_n: int = popdiff.MAX_CLIQUE_N
    max_window: int = pipeline.MAX_WINDOW

    def __post_init__(self):
        if self.guard_band <= 0 or self.workers < 1:
            raise InputError("guard band and worker count must be positive")


@dataclass
class AuditReport:
    command: str
    inputs: dict
    properties: dict = field(default_factory=dict)    # name -> {"passed": bool, "witness": ...}
    data: dict = field(default_factory=dict)
    runtimes: dict = field(default_factory=dict)

    def check(self, name: str, passed: bool, witness=None):
        entry = {"passed": bool(passed)}
        if not passed or witness is not None:
            entry["witness"] = witness
        self.properties[name] = entry

    @property
    def passed(self) -> bool:
        return all(p["passed"] for p in self.properties.values())

    @property
    def inputs_hash(self) -> str:
        blob = json.dumps(self.inputs, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_json(self) -> dict:
        # runtimes go to a separate file so the report itself is reproducible
        return {"schema": SCHEMA, "command": self.command, "inputs": self.inputs,
                "inputs_hash": self.inputs_hash, "passed": self.passed,
                "properties": self.properties, "data": self.data}


def _num(x):
    """JSON form of a number: exact values as rational strings, reals with their precision."""
    if isinstance(x, Fraction):
        return torus.rational_str(x)
    if isinstance(x, (mpmath.mpf,)):
        return {"value": mpmath.nstr(x, 20), "precision_bits": torus.PREC_BITS}
    if isinstance(x, float):
        return {"value": repr(x), "precision": "float64"}
    return x


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _rational(s: str) -> Fraction:
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {s!r}") from exc


def _int_list(s: str) -> list[int]:
    try:
        return [int(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {s!r}") from exc


# -- subcommands ------------------------------------------------------------

def cmd_measures(args, cfg: Config) -> AuditReport:
    sigma = torus.AtomicMeasure.from_json(_load_json(args.measure))
    rep = AuditReport("measures " + args.action, {"measure": sigma.to_json()})
    rep.data["continuity_defect"] = _num(sigma.continuity_defect)
    if args.action == "fourier":
        ns = args.n or [0, 1]
        rep.data["fourier"] = {str(n): {"re": mpmath.nstr(z.real, 20), "im": mpmath.nstr(z.imag, 20)}
                               for n in ns for z in [torus.fourier(sigma, n)]}
        print("\n".join(f"sigma^({n}) = {v['re']} + {v['im']}i" for n, v in rep.data["fourier"].items()))
    else:
        target = torus.StepFunction.character(sigma, args.character)
        S = args.S or list(range(0, 10))
        res = torus.rigidity_defect(sigma, S, target)
        rep.inputs.update({"S": S, "character": args.character})
        rep.data["residuals"] = [mpmath.nstr(r, 17) for r in res]
        if cfg.out:
            torus.write_residual_csv(cfg.out / "residuals.csv", S, res)
        for n, r in zip(S, res):
            print(f"{n}\t{mpmath.nstr(r, 12)}")
    return rep


def cmd_kronecker(args, cfg: Config) -> AuditReport:
    if args.action == "family":
        fam = kronecker.build_family(args.b, args.r, args.M, args.seed)
        rep = AuditReport("kronecker family", {"b": args.b, "r": args.r, "M": args.M, "seed": args.seed})
        rep.data["family"] = fam.to_json()
        if cfg.out:
            (cfg.out / "family.json").write_text(json.dumps(fam.to_json(), indent=1))
        print(f"family b={args.b} r={args.r} M={args.M}: {len(fam.mixture)} atoms, "
              f"continuity defect {fam.mixture.continuity_defect}")
        return rep
    import random
    stage = kronecker.build_stage(args.b, args.r, args.perturb_seed)
    sigma = stage.measure()
    rng = random.Random(cfg.seed)
    rep = AuditReport("kronecker certify", {"b": args.b, "r": args.r, "targets": args.targets,
                                            "perturb_seed": args.perturb_seed, "seed": cfg.seed})
    worst, failures = mpmath.mpf(0), []
    for i in range(args.targets):
        turns = [Fraction(rng.randrange(args.b), args.b) for _ in range(len(sigma))]
        try:
            ap = kronecker.constructive_approximant(stage, torus.StepFunction(sigma, turns))
            worst = max(worst, ap.sup_error)
        except kronecker.CertificationError as exc:
            failures.append({"target": i, "turns": [str(t) for t in turns], "atom": exc.atom_index})
    bound = kronecker.certified_bound(args.b, args.r)
    rep.check("certified_sup_bound", not failures, failures[:5] or None)
    rep.data.update({"bound": mpmath.nstr(bound, 20), "worst_sup_error": mpmath.nstr(worst, 20)})
    print(f"{args.targets} targets, worst sup error {mpmath.nstr(worst, 10)} "
          f"vs bound {mpmath.nstr(bound, 10)}: {len(failures)} failures")
    return rep


def cmd_concentration(args, cfg: Config) -> AuditReport:
    if args.k ** args.r > cfg.max_group:
        raise InputError(f"k^r exceeds the guard {cfg.max_group}")
    radii = args.radii or [0.5, 1.5, 2.5, 3.5]
    if args.sample:
        audit = concentration.sampled_audit(args.k, args.r, args.sample, cfg.seed, radii)
    else:
        audit = concentration.exhaustive_audit(args.k, args.r, radii, workers=cfg.workers)
    rep = AuditReport("concentration-audit", {"k": args.k, "r": args.r, "radii": radii,
                                              "mode": audit.mode, "samples": args.sample, "seed": cfg.seed})
    rep.data["audit"] = audit.to_json()
    rep.check("growth_and_avoidance_bounds", audit.violations == 0, audit.witnesses or None)
    print(f"{audit.mode}: {audit.subsets_checked} subsets checked, violations {audit.violations}")
    return rep


def _periodic(spec: str) -> intsets.PeriodicSet:
    try:
        return intsets.PeriodicSet.parse(spec)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def cmd_sets(args, cfg: Config) -> AuditReport:
    A = _periodic(args.periodic)
    rep = AuditReport("sets " + args.action, {"periodic": A.to_json()})
    if args.action == "density":
        d = intsets.density(A)
        rep.data["density"] = _num(d)
        print(torus.rational_str(d))
    elif args.action == "hit":
        F = args.F or [0]
        n = intsets.translate_hitting(A, F)
        count = intsets.hit_counts(A, F)[n]
        rep.inputs["F"] = F
        rep.data.update({"n": n, "count": count})
        rep.check("pigeonhole", count >= intsets.density(A) * len(set(F)), {"n": n, "count": count})
        print(f"n={n} count={count}")
    else:
        D = intsets.difference_set(A)
        rep.data["difference_set"] = D.to_json()
        print(f"{D.N}:{','.join(map(str, D.sorted_residues()))}")
    return rep


def cmd_systems(args, cfg: Config) -> AuditReport:
    if args.action == "battery":
        bat = systems.default_battery(cfg.seed)
        rep = AuditReport("systems battery", {"seed": cfg.seed})
        rep.data.update({"digest": bat.digest(), "instances": len(bat)})
        if cfg.out:
            (cfg.out / "battery.json").write_text(json.dumps(bat.to_json(), indent=1))
        print(f"{len(bat)} instances, digest {bat.digest()}")
        return rep
    data = _load_json(args.system)
    try:
        sys_ = systems.FinitePermSystem.from_json(data)
        D = frozenset(data["D"])
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed system JSON: {exc}") from exc
    ns = args.n or list(range(sys_.order))
    vals = {n: systems.correlation(sys_, D, n) for n in ns}
    rep = AuditReport("systems correlation", {"system": sys_.to_json(D), "n": ns})
    rep.data["correlations"] = {str(n): _num(v) for n, v in vals.items()}
    avg, ok = systems.optimal_recurrence_average(range(sys_.order), sys_, D)
    rep.check("full_period_average_is_mu_squared", avg == systems.measure(sys_, D) ** 2, _num(avg))
    for n, v in vals.items():
        print(f"{n}\t{torus.rational_str(v)}")
    return rep


def cmd_popdiff(args, cfg: Config) -> AuditReport:
    if args.N > cfg.max_clique_n:
        raise InputError(f"N exceeds the clique guard {cfg.max_clique_n}")
    if args.action == "search":
        res = popdiff.extremal_search(args.N, args.target, args.c, args.budget, cfg.seed)
        rep = AuditReport("popdiff search", {"N": args.N, "c": str(args.c), "target": str(args.target),
                                             "budget": args.budget, "seed": cfg.seed})
        rep.data.update({"best": sorted(res.best.members), "density": _num(res.best.density),
                         "audit": res.audit.to_json()})
        rep.check("best_avoids_translated_difference_sets", not res.audit.scan.found)
        print(f"best |A|={len(res.best)} density {res.best.density}: {sorted(res.best.members)}")
        return rep
    if args.A:
        data = _load_json(args.A)
        members = data["members"] if isinstance(data, dict) and "members" in data else data
    else:
        members = args.members or []
    try:
        A = popdiff.CyclicSubset.of(args.N, members)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad set A: {exc}") from exc
    P = popdiff.popular_set(A, args.c)
    thr = args.threshold or (int(args.c * args.N) + 1)
    scan = popdiff.contains_translated_diffset(P, thr)
    rep = AuditReport("popdiff audit", {"N": args.N, "A": sorted(A.members), "c": str(args.c),
                                        "threshold": thr})
    rep.data.update({"popular": sorted(P.members), "per_n0_max_clique": scan.sizes})
    rep.check("no_translated_difference_set", not scan.found,
              {"n0": scan.n0, "B": sorted(scan.B)} if scan.found else None)
    print(f"P_c(A) = {sorted(P.members)}; max |B| per n0: {scan.sizes}")
    return rep


def _battery(args, cfg: Config):
    if getattr(args, "battery", None):
        return systems.Battery.from_json(_load_json(args.battery))
    if getattr(args, "cyclic", None):
        return systems.Battery(systems.BatteryInstance(systems.FinitePermSystem.cyclic(N),
                                                       frozenset({0}), label=f"cyclic{N}")
                               for N in args.cyclic)
    return systems.default_battery(cfg.seed)


def cmd_pipeline(args, cfg: Config) -> AuditReport:
    if args.family:
        fam = kronecker.KroneckerFamily.from_json(_load_json(args.family))
    else:
        fam = kronecker.build_family(args.b, args.r, args.M, args.family_seed)
    if args.window > cfg.max_window:
        raise InputError(f"window exceeds the cap {cfg.max_window}")
    bat = _battery(args, cfg)
    chain = pipeline.ChainSpec(fam, window=args.window, stages=args.stages)
    t0 = time.perf_counter()
    res = pipeline.diagonalize(chain, bat, guard=cfg.guard_band)
    rep = AuditReport("pipeline run", {"b": fam.b, "r": fam.r, "M": fam.M, "family_seed": fam.seed,
                                       "window": args.window, "stages": args.stages,
                                       "battery": bat.digest()})
    rep.runtimes["diagonalize"] = time.perf_counter() - t0
    rep.data["result"] = res.to_json()
    for st in res.stages:
        bad = {m: c.counterexample for m, c in st.certificates.items() if not c.passed}
        rep.check(f"stage_{st.j}_certificates", st.passed, {"failure": st.failure, "translates": bad}
                  if not st.passed else None)
    rows = []
    for m in range(-fam.M, fam.M + 1):
        rr = pipeline.verify_rigidity_per_translate(res, fam, m)
        rep.check(f"rigidity_translate_{m}", rr.passed, rr.violations() or None)
        rows.extend((m, n, j, r, b) for n, j, r, b in rr.rows)
    if cfg.out:
        import csv
        with open(cfg.out / "rigidity.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "n", "stage", "residual", "bound"])
            for m, n, j, r, b in rows:
                w.writerow([m, n, j, mpmath.nstr(r, 17), mpmath.nstr(b, 17)])
    print(f"S has {len(res.enumeration)} elements over {len(res.stages)} stages; "
          f"battery {bat.digest()}; certificates {'pass' if res.passed else 'FAIL'}")
    return rep


def cmd_classify(args, cfg: Config) -> AuditReport:
    if args.interval:
        lo, hi = args.interval
        S = intsets.WindowSet.interval(lo, hi)
    else:
        A = _periodic(args.periodic)
        S = intsets.WindowSet.from_members(A.members_in(0, args.window), 0, args.window)
    bat = _battery(args, cfg)
    flags = pipeline.hierarchy_classify(S, bat, translates=args.translates or (-1, 0, 1))
    rep = AuditReport("classify", {"interval": args.interval, "periodic": args.periodic,
                                   "window": args.window, "battery": bat.digest()})
    rep.data["flags"] = {k: {"value": f.value, "label": f.label,
                             "evidence": json.loads(json.dumps(f.evidence, default=str))}
                         for k, f in flags.items()}
    for k, f in flags.items():
        print(f"{k}: {f.value} ({f.label})")
    return rep


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    common.add_argument("--guard-band", type=float, default=torus.GUARD_BAND)
    common.add_argument("--out", type=Path, help="directory for report.json and CSV sidecars")

    p = argparse.ArgumentParser(prog="rigidrec", description="Finite audits for rigidity and recurrence sets.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("measures", parents=[common], help="Fourier data and rigidity residuals")
    s.add_argument("action", choices=["fourier", "rigidity"])
    s.add_argument("--measure", required=True, help="measure JSON file")
    s.add_argument("--n", type=_int_list)
    s.add_argument("--S", type=_int_list)
    s.add_argument("--character", type=int, default=0)
    s.set_defaults(func=cmd_measures)

    s = sub.add_parser("kronecker", parents=[common], help="digit stages and approximant certificates")
    s.add_argument("action", choices=["certify", "family"])
    s.add_argument("--b", type=int, default=16)
    s.add_argument("--r", type=int, default=8)
    s.add_argument("--M", type=int, default=1)
    s.add_argument("--targets", type=int, default=100)
    s.add_argument("--perturb-seed", type=int)
    s.set_defaults(func=cmd_kronecker)

    s = sub.add_parser("concentration-audit", parents=[common], help="concentration bounds on roots-of-unity groups")
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--r", type=int, default=4)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--exhaustive", action="store_true")
    g.add_argument("--sample", type=int)
    s.add_argument("--radii", type=lambda v: [float(x) for x in v.split(",")])
    s.set_defaults(func=cmd_concentration)

    s = sub.add_parser("sets", parents=[common], help="periodic integer sets")
    s.add_argument("action", choices=["density", "hit", "diff"])
    s.add_argument("--periodic", required=True, help="N:r1,r2,... e.g. 2:0 for the evens")
    s.add_argument("--F", type=_int_list)
    s.set_defaults(func=cmd_sets)

    s = sub.add_parser("systems", parents=[common], help="finite permutation systems")
    s.add_argument("action", choices=["correlation", "battery"])
    s.add_argument("--system", help="system JSON with size, perm and D")
    s.add_argument("--n", type=_int_list)
    s.set_defaults(func=cmd_systems)

    s = sub.add_parser("popdiff", parents=[common], help="popular differences in Z/N")
    s.add_argument("action", choices=["audit", "search"])
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--A", help="JSON file with a member list")
    s.add_argument("--members", type=_int_list)
    s.add_argument("--c", type=_rational, default=Fraction(0))
    s.add_argument("--threshold", type=int)
    s.add_argument("--target", type=_rational, default=Fraction(1, 3))
    s.add_argument("--budget", type=int, default=2000)
    s.set_defaults(func=cmd_popdiff)

    s = sub.add_parser("pipeline", parents=[common], help="diagonal rigidity set construction")
    s.add_argument("action", choices=["run"])
    s.add_argument("--family", help="family JSON (default: build from --b/--r/--M)")
    s.add_argument("--b", type=int, default=16)
    s.add_argument("--r", type=int, default=8)
    s.add_argument("--M", type=int, default=2)
    s.add_argument("--family-seed", type=int)
    s.add_argument("--battery", help="battery JSON (default: built-in battery)")
    s.add_argument("--window", type=int, default=10**5)
    s.add_argument("--stages", type=int, default=4)
    s.set_defaults(func=cmd_pipeline)

    s = sub.add_parser("classify", parents=[common], help="R1-R5 evidence for a finite set")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--interval", type=_int_list, help="lo,hi")
    g.add_argument("--periodic")
    s.add_argument("--window", type=int, default=1000)
    s.add_argument("--battery")
    s.add_argument("--cyclic", type=_int_list, help="battery of cyclic N with D={0}")
    s.add_argument("--translates", type=_int_list)
    s.set_defaults(func=cmd_classify)
    return p


def run_subcommand(argv) -> tuple[int, AuditReport | None]:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), None
    try:
        cfg = Config(args.seed, args.guard_band, args.workers, args.out)
        if cfg.out:
            cfg.out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        rep = args.func(args, cfg)
        rep.runtimes["total"] = time.perf_counter() - t0
    except (InputError, ValueError, KeyError, TypeError, OverflowError) as exc:
        print(f"rigidrec: error: {exc}", file=sys.stderr)
        return 2, None
    if cfg.out:
        (cfg.out / "report.json").write_text(json.dumps(rep.to_json(), indent=1, sort_keys=True) + "\n")
        (cfg.out / "timings.json").write_text(json.dumps(rep.runtimes, indent=1) + "\n")
    for name, prop in rep.properties.items():
        if not prop["passed"]:
            print(f"VIOLATION {name}: {json.dumps(prop.get('witness'), default=str)}", file=sys.stderr)
    return (0 if rep.passed else 1), rep


def main(argv=None) -> int:
    code, _ = run_subcommand(sys.argv[1:] if argv is None else argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
