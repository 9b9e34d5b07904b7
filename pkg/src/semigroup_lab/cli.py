"""Declarative experiment runner.

A run is described by a TOML file::

    seed = 0
    tasks = ["validate", "kato", "bounds-table"]

    [instance]
    kind = "two_point"      # two_point | cycle | complete | random
    n = 2
    rate = 1.0

    [norms]
    p = 2
    q = 2
    d = 1

    [params.bounds-table]
    q = [2, 3]
    m = [1, 2]

and produces ``report.csv`` and ``report.json`` in the output directory.
"""

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np
from scipy.special import gamma, hyp1f1

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import bounds, holo, lps
from .errors import ConvergenceError, SemigroupLabError
from .markov import (CHAIN_BUILDERS, build_chain, poisson_spectral, rota_deviation, semigroup_at,
                     subordinated_poisson, validate_markov)
from .report import BoundReport, ReportRow
from .spaces import MixedNormConfig, mixed_norm

EXIT_OK, EXIT_CHECK, EXIT_SPEC, EXIT_CONVERGENCE = 0, 1, 2, 3

DEFAULT_TOLERANCES = {
    "check": 1e-9,
    "quad": 1e-8,
    "contour": 1e-8,
    "rota": 1e-12,
    "subordination": 1e-6,
}


class SpecError(SemigroupLabError, ValueError):
    pass


# ---------------------------------------------------------------- tasks


def _instance_kernel(ctx):
    G = ctx["G"]
    if G.kernel is None:
        raise SpecError("instance has no Markov kernel")
    return G.kernel


def _random_fields(ctx, count, d=None):
    rng = np.random.default_rng(ctx["seed"])
    d = ctx["cfg"].d if d is None else d
    return [rng.standard_normal((ctx["G"].n, d)) for _ in range(count)]


def task_validate(ctx, prm):
    rep = validate_markov(_instance_kernel(ctx), tol=prm.get("tol", 1e-12))
    out = BoundReport("validate")
    out.add("valid", str(rep), inputs={"violations": "; ".join(f"{k}: {v}" for k, v in rep.violations.items())},
            provenance="symmetric Markovian operator axioms", check=rep.valid)
    out.add("L1 norm", rep.l1_norm, formula=1.0, provenance="contraction on L_1", check=rep.l1_norm <= 1 + 1e-12)
    out.add("Linf norm", rep.linf_norm, formula=1.0, provenance="contraction on L_inf",
            check=rep.linf_norm <= 1 + 1e-12)
    return out.rows


def task_hille_yosida(ctx, prm):
    re = prm.get("re", [0.1, 1.0, 10.0])
    im = prm.get("im", [-10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0])
    grid = [complex(a, b) for a in re for b in im]
    rep = holo.hille_yosida_check(ctx["G"], ctx["cfg"], grid, n_max=prm.get("n_max", 5),
                                  tol=ctx["tol"]["check"], seed=ctx["seed"])
    rows = rep.rows
    # resolvent identity R(a) - R(b) = (b - a) R(a) R(b)
    a, b = grid[0], grid[-1]
    Ra, Rb = holo.resolvent(ctx["G"], a), holo.resolvent(ctx["G"], b)
    dev = float(np.abs(Ra - Rb - (b - a) * Ra @ Rb).max())
    rows.append(ReportRow("hille-yosida", "resolvent identity deviation", dev,
                          inputs={"a": str(a), "b": str(b)}, provenance="resolvent identity",
                          check=dev <= 1e-11))
    return rows


def task_sector_scan(ctx, prm):
    r = prm.get("r", [1e-3, 1e-2, 1e-1, 1.0, 10.0])
    s = prm.get("s", list(np.geomspace(1e-2, 1e2, 9)) + list(-np.geomspace(1e-2, 1e2, 9)))
    C = holo.sector_constant(ctx["G"], ctx["cfg"], r, s, seed=ctx["seed"])
    out = BoundReport("sector-scan")
    out.add("empirical sector constant C", C, inputs={"r": len(r), "s": len(s)},
            provenance="sector resolvent condition ||R(r + is)|| <= C/|s|",
            note="lower estimate on the grid")
    Cc = max(C, 1.0)
    q = prm.get("q_conv", 0.5)
    out.add("enlarged-sector resolvent bound", bounds.resolvent_sector_bound(Cc, 1.0, q),
            inputs={"C": Cc, "M": 1.0, "q": q}, provenance="sqrt(C^2 + M^2)/(1 - q)")
    u = prm.get("u", 0.5)
    out.add("holomorphic semigroup bound", bounds.holo_semigroup_bound(Cc, 1.0, u),
            inputs={"C": Cc, "M": 1.0, "u": u}, provenance="sqrt(C^2 + M^2)/(1 - u) (1 + log(C/(1 - u)))",
            note="up to absolute constant")
    return out.rows


def task_contour_check(ctx, prm):
    G = ctx["G"]
    C = prm.get("C", 1.0)
    out = BoundReport("contour-check")
    tol = ctx["tol"]["contour"]
    for z in prm.get("z", [1.0, 2.0, [1.0, 0.1], [1.0, -0.1]]):
        z = complex(*z) if isinstance(z, list) else complex(z)
        E, con = holo.contour_exp(G, z, C=C, tol=tol * 1e-2, return_contour=True)
        ref = semigroup_at(G, z)
        err = float(np.abs(E - ref).max() / max(np.abs(ref).max(), 1e-300))
        out.add(f"relative error z={z}", err, inputs={"z": str(z), "q": con.q_param, "nodes": con.nodes},
                provenance="Cauchy integral of e^(mu z) R(mu) over arc + rays", error_budget=tol,
                check=err <= tol)
    return out.rows


def task_kato(ctx, prm):
    G, cfg = ctx["G"], ctx["cfg"]
    kw = dict(restarts=prm.get("restarts", 4), seed=ctx["seed"])
    ks = holo.kato_epsilon(G, cfg, **kw)
    td = holo.max_t_derivative(G, cfg, **kw)
    out = BoundReport("kato")
    out.add("epsilon", ks.value, inputs={"argmax_t": ks.argmax_t, "limit": ks.limit},
            provenance="eps = 2 - sup_t ||I - T_t||", check=ks.converged if ks.value > 0 else False,
            note="" if ks.value > 0 else "no Kato gap")
    out.add("sup_t ||t T'(t)||", td.value, inputs={"argmax_t": td.argmax_t},
            provenance="time derivative scan", check=td.converged)
    if ks.value > 0:
        theta, tz, tt = bounds.kato_bounds(1.0, min(ks.value, 2.0))
        out.add("sector angle theta", theta, provenance="theta = eps/M^2 (M = 1)")
        out.add("||T(z)|| bound", tz, provenance="(M^2/eps)(1 + log(M/eps))", note="up to absolute constant")
        out.add("sup_t ||t T'(t)|| bound", tt, provenance="(M^4/eps^2)(1 + log(M/eps))",
                note="up to absolute constant")
        out.add("measured / bound", td.value / tt, provenance="cross-module consistency")
    return out.rows


def task_rota(ctx, prm):
    S = _instance_kernel(ctx)
    dev = rota_deviation(S)
    S = S.matrix
    tol = ctx["tol"]["rota"]
    return [ReportRow("rota", "max |E_A E_B f - S^2 f|", dev, inputs={"n": S.shape[0]},
                      provenance="Rota dilation S^2 = E_A E_B", error_budget=tol, check=dev <= tol)]


def task_subordination(ctx, prm):
    G = ctx["G"]
    tol = ctx["tol"]["subordination"]
    out = BoundReport("subordination")
    for t in prm.get("t", [0.01, 1.0, 100.0]):
        P = subordinated_poisson(G, t, tol=tol * 1e-2)
        ref = poisson_spectral(G, t)
        err = float(np.abs(P - ref).max() / np.abs(ref).max())
        out.add(f"relative error t={t!r}", err, inputs={"t": t}, error_budget=tol,
                provenance="P_t = e^(-t sqrt(-A)) by subordination", check=err <= tol)
    return out.rows


def _hilbert(ctx, q_time):
    cfg = ctx["cfg"]
    return cfg.p == 2 and cfg.q == 2 and q_time == 2


def task_g_function(ctx, prm):
    G, cfg = ctx["G"], ctx["cfg"]
    q_time, k = prm.get("q_time", 2.0), prm.get("k", 1)
    fields = [np.asarray(prm["f"], dtype=float).reshape(G.n, -1)] if "f" in prm else _random_fields(ctx, prm.get("samples", 5))
    out = BoundReport("g-function")
    for i, f in enumerate(fields):
        r = lps.g_function(G, f, cfg, q_time, k, rtol=ctx["tol"]["quad"])
        row = out.add(f"||G f||_Lp sample {i}", r.lp_norm, inputs={"q_time": q_time, "k": k},
                      provenance="order-k g-function", error_budget=r.quad_error)
        if _hilbert(ctx, q_time) and k == 1:
            rest = f - G.kernel_projection @ f
            target = 0.5 * mixed_norm(rest, G.space, cfg)
            row.formula = target
            row.ratio = r.lp_norm / target if target else None
            row.provenance = "Hilbert identity ||G f|| = ||f - Pi f|| / 2"
            row.check = abs(r.lp_norm - target) <= max(1e-6, r.quad_error)
    return out.rows


def task_lps_ratio(ctx, prm):
    G, cfg = ctx["G"], ctx["cfg"]
    q_time, k, m = prm.get("q_time", 2.0), prm.get("k", 1), prm.get("m", 1.0)
    est = lps.lps_ratio(G, cfg, q_time, k, restarts=prm.get("restarts", 8), seed=ctx["seed"])
    sharp = cfg.p == cfg.q and k == 1
    const = bounds.theorem_heat_constant(k, cfg.p, max(cfg.q, 2.0), m, sharp_case=sharp)
    row = ReportRow("lps-ratio", "sup ||G f|| / ||f|| lower estimate", est.value,
                    inputs={"q_time": q_time, "k": k, "m": m, "sharp": sharp}, formula=const,
                    provenance="g-function constant B m" if sharp else "g-function constant k^(k-1) B^2 m",
                    check=est.value <= const + ctx["tol"]["check"],
                    note="" if est.converged else "ascent stagnated")
    rows = [row]
    if _hilbert(ctx, q_time) and k == 1 and G.ergodic:
        rows.append(ReportRow("lps-ratio", "Hilbert constant", est.value, formula=0.5,
                              provenance="Hilbert identity, sup = 1/2", check=abs(est.value - 0.5) <= 1e-4))
    return rows


def task_hn_difference(ctx, prm):
    G, cfg = ctx["G"], ctx["cfg"]
    q_time, m = prm.get("q_time", 2.0), prm.get("m", 1.0)
    fields = [np.asarray(prm["f"], dtype=float).reshape(G.n, -1)] if "f" in prm else _random_fields(ctx, prm.get("samples", 5))
    out = BoundReport("hn-difference")
    for a in prm.get("alpha", [2.0, 3.0, 10.0]):
        for i, f in enumerate(fields):
            r = lps.semigroup_difference_functional(G, f, cfg, a, q_time, m)
            out.add(f"alpha={a!r} sample {i}", r.value, inputs={"alpha": a, "m": m, "q_time": q_time},
                    formula=r.bound, provenance="(log alpha)^(1/q) m ||f||", error_budget=r.quad_error,
                    check=(r.value <= r.bound + 1e-8) if _hilbert(ctx, q_time) else None)
    return out.rows


def _fractional_oracle(G, f, alpha, t):
    x = t * G.eigenvalues
    a = complex(alpha)
    if a.imag == 0 and a.real == round(a.real) and a.real <= 0:
        k = int(-a.real)
        fac = x ** k * np.exp(x)
        return G.spectral(fac) @ f, "M^(-k) = t^k d^k T_t"
    if a.imag == 0:
        fac = hyp1f1(1.0, a.real + 1.0, x) / gamma(a.real + 1.0)
        return G.spectral(fac) @ f, "M^alpha eigen-factor 1F1(1; alpha + 1; -lambda t)/Gamma(alpha + 1)"
    return None, ""


def task_fractional(ctx, prm):
    G = ctx["G"]
    t = prm.get("t", 1.0)
    f = np.asarray(prm["f"], dtype=float).reshape(G.n, -1) if "f" in prm else _random_fields(ctx, 1)[0]
    out = BoundReport("fractional")
    for a in prm.get("alpha", [1.0, 0.5, 0.0, -0.5, -1.0, -2.0]):
        alpha = complex(*a) if isinstance(a, list) else float(a)
        M = lps.fractional_average(G, f, alpha, t)
        ref, prov = _fractional_oracle(G, f, alpha, t)
        nrm = float(np.abs(M).max())
        if ref is None:
            out.add(f"alpha={alpha}", nrm, inputs={"t": t}, provenance="fractional average, max entry")
        else:
            dev = float(np.abs(M - ref).max())
            out.add(f"alpha={alpha} deviation", dev, inputs={"t": t, "max_entry": nrm}, provenance=prov,
                    check=dev <= 1e-6)
    return out.rows


def task_analyticity(ctx, prm):
    G, cfg = ctx["G"], ctx["cfg"]
    beta0 = prm.get("beta0", math.pi / 4)
    val = lps.analyticity_constant(G, cfg, beta0, prm.get("angles", 24), prm.get("radii", 40),
                                   restarts=prm.get("restarts", 4), seed=ctx["seed"])
    l2 = cfg.p == 2 and cfg.q == 2
    return [ReportRow("analyticity", "T_beta0 lower estimate", val, inputs={"beta0": beta0},
                      formula=1.0 if l2 else None,
                      provenance="sup ||T_z|| over the sector of half-angle beta0",
                      check=(val <= 1 + ctx["tol"]["check"]) if l2 else None)]


def task_bounds_table(ctx, prm):
    rows = []
    for r in bounds.bounds_table(prm.get("q", [2.0, 3.0]), prm.get("m", [1.0, 2.0])):
        inputs = {"q": r["q"], "m": r["m"]}
        prov = {
            "eps_delta1": "eps = 2 delta/((1 + 2 delta) q), delta = 1",
            "B": "B = q^2 m^(2q+1)(1 + log q + q log m)",
            "sector_angle": "angle 1/(q m^q)",
            "Tz_bound": "q m^(q+1)(1 + log q + q log m), up to absolute constant",
            "heat_constant_k1": "k^(k-1) B^2 m at k = 1",
            "heat_constant_sharp": "B m (p = q, k = 1)",
            "xu_specialized": "(q m^q)^2 B m",
        }
        for key, p in prov.items():
            rows.append(ReportRow("bounds-table", key, r[key], inputs=inputs, provenance=p))
        ratio, formula = r["approach_ratio"], r["approach_ratio_formula"]
        rows.append(ReportRow("bounds-table", "approach_ratio", ratio, inputs=inputs, formula=formula,
                              provenance="second / first approach = (q m^q)^2",
                              check=abs(ratio - formula) <= 4 * np.finfo(float).eps * formula))
    return rows


TASKS = {
    "validate": (task_validate, "check the Markov kernel axioms"),
    "hille-yosida": (task_hille_yosida, "resolvent powers against the Hille-Yosida bound"),
    "sector-scan": (task_sector_scan, "empirical sector constant of the resolvent"),
    "contour-check": (task_contour_check, "contour exponential against spectral exp(zA)"),
    "kato": (task_kato, "Kato gap eps and sup_t ||t T'(t)||"),
    "rota": (task_rota, "Rota dilation S^2 = E_A E_B"),
    "subordination": (task_subordination, "subordinated Poisson semigroup against e^(-t sqrt(-A))"),
    "g-function": (task_g_function, "g-function norms (Hilbert identity when p = q = 2)"),
    "lps-ratio": (task_lps_ratio, "lower estimate of the g-function constant"),
    "hn-difference": (task_hn_difference, "semigroup difference functional against (log alpha)^(1/q)"),
    "fractional": (task_fractional, "fractional averages against closed forms"),
    "analyticity": (task_analyticity, "sup of ||T_z|| over a sector"),
    "bounds-table": (task_bounds_table, "closed-form constants"),
}


# ---------------------------------------------------------------- spec


def load_spec(path):
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"{path}: {exc}") from None
    except OSError as exc:
        raise SpecError(f"cannot read spec: {exc}") from None
    return validate_spec(raw)


def validate_spec(raw):
    allowed = {"seed", "tasks", "instance", "norms", "tolerances", "params", "grids"}
    extra = set(raw) - allowed
    if extra:
        raise SpecError(f"unknown top-level keys: {sorted(extra)}")
    tasks = raw.get("tasks")
    if not isinstance(tasks, list) or not tasks:
        raise SpecError("'tasks' must be a nonempty list")
    unknown = [t for t in tasks if t not in TASKS]
    if unknown:
        raise SpecError(f"unknown tasks {unknown}; see --list-tasks")
    inst = dict(raw.get("instance", {}))
    if inst.get("kind", "two_point") not in CHAIN_BUILDERS:
        raise SpecError(f"unknown chain kind {inst.get('kind')!r}")
    norms = raw.get("norms", {})
    try:
        MixedNormConfig(float(norms.get("p", 2)), float(norms.get("q", 2)), int(norms.get("d", 1)))
    except (SemigroupLabError, ValueError, TypeError) as exc:
        raise SpecError(f"invalid norms: {exc}") from None
    tol = raw.get("tolerances", {})
    bad = set(tol) - set(DEFAULT_TOLERANCES)
    if bad:
        raise SpecError(f"unknown tolerances {sorted(bad)}")
    params = raw.get("params", {})
    if set(params) - set(TASKS):
        raise SpecError(f"params for unknown tasks {sorted(set(params) - set(TASKS))}")
    # the grids table is an alias for per-task params
    for task, g in raw.get("grids", {}).items():
        if task not in TASKS:
            raise SpecError(f"grid for unknown task {task!r}")
        params.setdefault(task, {}).update(g)
    return {"seed": int(raw.get("seed", 0)), "tasks": tasks, "instance": inst, "norms": dict(norms),
            "tolerances": dict(tol), "params": params}


def build_context(spec, seed=None, tol=None):
    seed = spec["seed"] if seed is None else seed
    inst = spec["instance"]
    try:
        G = build_chain(inst.get("kind", "two_point"), n=int(inst.get("n", 2)),
                        seed=int(inst.get("seed", seed)), rate=float(inst.get("rate", 1.0)))
    except (SemigroupLabError, ValueError) as exc:
        raise SpecError(f"cannot build instance: {exc}") from None
    norms = spec["norms"]
    cfg = MixedNormConfig(float(norms.get("p", 2)), float(norms.get("q", 2)), int(norms.get("d", 1)))
    tols = {**DEFAULT_TOLERANCES, **spec["tolerances"]}
    if tol is not None:
        tols = {k: tol for k in tols}
    return {"G": G, "cfg": cfg, "seed": seed, "tol": tols}


# ---------------------------------------------------------------- reports


def _fmt(x):
    if isinstance(x, bool) or x is None:
        return x
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, (int, np.integer)):
        return int(x)
    return x


def _json(obj, indent=0):
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json(str(k))}: {_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + _json(v, indent + 1) for v in obj) + "\n" + "  " * indent + "]"
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return format(x, ".17g")
    if isinstance(obj, complex):
        return _json(str(obj))
    s = str(obj)
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


CSV_FIELDS = ["task", "name", "value", "formula", "ratio", "error_budget", "check", "provenance", "inputs", "note"]


def write_reports(rows, out_dir, meta):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in rows:
        d = asdict(r)
        d["inputs"] = _json({k: v for k, v in d["inputs"].items()}).replace("\n", "").replace("  ", "")
        w.writerow(["" if d[k] is None else _fmt(d[k]) for k in CSV_FIELDS])
    (out_dir / "report.csv").write_text(buf.getvalue())
    doc = {"meta": meta, "rows": [asdict(r) for r in rows]}
    (out_dir / "report.json").write_text(_json(doc) + "\n")


def _run_task(name, ctx, prm):
    try:
        return TASKS[name][0](ctx, prm), None
    except ConvergenceError as exc:
        return [ReportRow(name, "error", None, provenance="non-convergence", check=False, note=str(exc))], "convergence"
    except SemigroupLabError as exc:
        return [ReportRow(name, "error", None, provenance="task failure", check=False, note=str(exc))], "failure"


def run(spec, out_dir, seed=None, tol=None, fail_fast=False, jobs=1):
    """Execute the tasks of a validated spec; returns (rows, exit code)."""
    ctx = build_context(spec, seed, tol)
    tasks = spec["tasks"]
    params = [spec["params"].get(t, {}) for t in tasks]
    results = []
    if jobs > 1 and not fail_fast:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda a: _run_task(a[0], ctx, a[1]), zip(tasks, params)))
    else:
        for t, prm in zip(tasks, params):
            res = _run_task(t, ctx, prm)
            results.append(res)
            if fail_fast and (res[1] or any(r.check is False for r in res[0])):
                break
    rows = [r for res, _ in results for r in res]
    status = [s for _, s in results]
    meta = {"seed": ctx["seed"], "tasks": tasks, "instance": spec["instance"], "norms": spec["norms"],
            "tolerances": ctx["tol"]}
    write_reports(rows, out_dir, meta)
    if "convergence" in status:
        code = EXIT_CONVERGENCE
    elif any(r.check is False for r in rows):
        code = EXIT_CHECK
    else:
        code = EXIT_OK
    return rows, code


def main(argv=None):
    ap = argparse.ArgumentParser(prog="semigroup-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--spec", type=Path, help="TOML experiment spec")
    ap.add_argument("--out", type=Path, default=Path("reports"), help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="override the spec seed")
    ap.add_argument("--tol", type=float, default=None, help="override every tolerance")
    ap.add_argument("--fail-fast", action="store_true", help="stop at the first failing task")
    ap.add_argument("--jobs", type=int, default=1, help="run independent tasks in parallel")
    ap.add_argument("--list-tasks", action="store_true")
    args = ap.parse_args(argv)

    if args.list_tasks:
        for name, (_, desc) in TASKS.items():
            print(f"{name:14s} {desc}")
        return EXIT_OK
    if args.spec is None:
        ap.print_usage(sys.stderr)
        print("error: --spec is required", file=sys.stderr)
        return EXIT_SPEC
    try:
        spec = load_spec(args.spec)
        rows, code = run(spec, args.out, args.seed, args.tol, args.fail_fast, max(1, args.jobs))
    except SpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    failed = sum(r.check is False for r in rows)
    print(f"{len(rows)} rows, {failed} failed checks -> {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
