"""Command line interface: ``coulombgas <subcommand> [options]``.

Every subcommand writes its CSV/JSON artifacts plus ``manifest.json`` into the
output directory. Exit status: 0 success, 2 a check failed, 1 error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import analysis as an
from . import equilibrium as eq
from . import gas, rmt, thermo
from .config import RunConfig, from_dict, parse_config
from .errors import ConfigParse, CoulombGasError
from .geometry import Domain, from_complex, to_complex

# closed-form limit law for each preset (complex coordinates)
PRESET_LAW = {"goe": "semicircle", "gue": "semicircle", "gse": "semicircle",
              "ginibre": "uniform-disk", "quaternion-ginibre": "uniform-disk",
              "spherical": "uniform-sphere", "cauchy-normal": "stereographic",
              "conductor": "circle-boundary", "circular": "circle-boundary"}


# ---------------------------------------------------------------------------
# output helpers

def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def write_csv(path, header, rows, meta: dict | None = None):
    """CSV with a '# key=value' provenance line, a header and .17g numbers."""
    with open(path, "w", newline="") as fh:
        if meta:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def read_csv(path):
    """Header and float columns of a CSV written by :func:`write_csv`."""
    try:
        with open(path, newline="") as fh:
            lines = [ln for ln in fh if not ln.startswith("#") and ln.strip()]
    except OSError as exc:
        raise ConfigParse(f"cannot read samples {path}: {exc}") from exc
    if len(lines) < 2:
        raise ConfigParse(f"{path}: no data rows")
    rows = list(csv.reader(lines))
    header = rows[0]
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise ConfigParse(f"{path}: non-numeric entry ({exc})") from exc
    return header, {h: data[:, i] for i, h in enumerate(header)}


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    config: dict
    version: str = __version__
    wall_clock: float = 0.0
    checks: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.get("passed", True) for c in self.checks.values())

    def add_file(self, path):
        self.files[os.path.basename(path)] = sha256(path)

    def write(self, outdir):
        path = os.path.join(outdir, "manifest.json")
        with open(path, "w") as fh:
            json.dump({"config": self.config, "version": self.version,
                       "wall_clock_s": self.wall_clock, "checks": self.checks,
                       "results": self.results, "files": self.files},
                      fh, indent=2, default=_json_default)
            fh.write("\n")
        return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _check(value, threshold, passed, **extra):
    d = {"value": float(value), "threshold": threshold, "passed": bool(passed)}
    d.update(extra)
    return d


def _meta(cfg: RunConfig) -> dict:
    return {"coulombgas": __version__, "seed": cfg.seed,
            "preset": cfg.preset or "custom", "n": cfg.spec.n, "beta": fmt(cfg.spec.beta)}


# ---------------------------------------------------------------------------
# experiments

def _ensemble_sample(cfg: RunConfig, man: RunManifest, out: str):
    cls = cfg.matrix_class or rmt.PRESET_CLASS.get(cfg.preset or "")
    if cls is None:
        raise ConfigParse("ensemble-sample needs a matrix preset (goe, gue, gse, ginibre, "
                          "quaternion-ginibre) or matrix_class")
    mc = rmt.CLASSES[cls] if isinstance(cls, str) else cls
    rng = np.random.default_rng(cfg.seed)
    rows = []
    allev = []
    for k in range(cfg.matrices):
        ev = rmt.sample_eigenvalues(mc, cfg.spec.n, rng)
        allev.append(ev)
        rows.extend((k, float(np.real(e)), float(np.imag(e))) for e in ev)
    path = os.path.join(out, "eigenvalues.csv")
    write_csv(path, ["matrix_index", "re", "im"], rows, _meta(cfg))
    man.add_file(path)
    ev = np.concatenate(allev)
    man.results = {"matrix_class": mc.name, "matrices": cfg.matrices, "eigenvalues": int(ev.size)}
    law = cfg.law or PRESET_LAW.get(cfg.preset or "")
    if law:
        man.checks.update(law_checks(ev, law))


def _chain_loop(spec, settings, states, every, ckpt, extra):
    """Advance all chains to the end, checkpointing every ``every`` sweeps."""
    kept = [[[], [], [], [], []] for _ in states]

    def step_to(i, until):
        got = gas.advance(spec, states[i], settings, until)
        for acc, new in zip(kept[i], got):
            acc.extend(new)

    threads = extra.pop("_threads", 1)
    bounds = list(range(every, settings.sweeps, every)) if every > 0 else []
    bounds.append(settings.sweeps)
    for until in bounds:
        if threads > 1 and len(states) > 1:
            with ThreadPoolExecutor(threads) as ex:
                list(ex.map(lambda i: step_to(i, until), range(len(states))))
        else:
            for i in range(len(states)):
                step_to(i, until)
        if ckpt:
            gas.save_checkpoint(ckpt, states, extra)
    return kept


def _gas_run(cfg: RunConfig, man: RunManifest, out: str):
    spec, settings = cfg.spec, cfg.chain
    ckpt = cfg.checkpoint or os.path.join(out, "checkpoint.json")
    if cfg.resume:
        if not os.path.exists(ckpt):
            raise ConfigParse(f"--resume: no checkpoint at {ckpt}")
        states = gas.load_checkpoint(ckpt, spec)
        if len(states) != cfg.chains:
            raise ConfigParse(f"checkpoint has {len(states)} chains, config asks for {cfg.chains}")
    else:
        states = [gas.init_chain(spec, settings, s) for s in gas.chain_seeds(cfg.seed, cfg.chains)]
    extra = {"seed": cfg.seed, "preset": cfg.preset, "n": spec.n,
             "_threads": gas.thread_budget(cfg.threads)}
    kept = _chain_loop(spec, settings, states, cfg.checkpoint_every, ckpt, extra)
    rows = []
    allpts = []
    for c, (pts, idx, _, _, _) in enumerate(kept):
        for p, s in zip(pts, idx):
            z = to_complex(spec.domain, p)
            allpts.append(z)
            rows.extend((c, s, j, float(z[j].real), float(z[j].imag)) for j in range(len(z)))
    path = os.path.join(out, "samples.csv")
    write_csv(path, ["chain", "sweep", "particle", "re", "im"], rows, _meta(cfg))
    man.add_file(path)
    if os.path.dirname(os.path.abspath(ckpt)) == os.path.abspath(out):
        man.add_file(ckpt)
    man.results = {
        "chains": [{"acceptance": st.acceptance, "step": st.step, "sweeps": st.sweep_count,
                    "autocorr_time": gas.integrated_autocorr_time(np.asarray(k[4]))
                    if len(k[4]) > 8 else math.nan}
                   for st, k in zip(states, kept)],
        "samples": len(allpts), "checkpoint": os.path.abspath(ckpt),
    }
    law = cfg.law or PRESET_LAW.get(cfg.preset or "")
    if law and allpts:
        man.checks.update(law_checks(np.concatenate(allpts), law, cfg.preset))


def _equilibrium(cfg: RunConfig, man: RunManifest, out: str):
    opts = cfg.equilibrium
    spec = cfg.spec
    tol = float(opts.get("tol", 1e-3))
    m = eq.solve_grid(spec, int(opts.get("resolution", 512)), int(opts.get("iterations", 20000)),
                      tol, bound=opts.get("bound"))
    law = cfg.law or opts.get("law")
    header = ["node", "lo", "hi", "weight", "density"]
    cols = [m.nodes, m.edges[:-1], m.edges[1:], m.weights, m.density]
    res = {"energy": m.energy, "beta_energy": spec.beta * m.energy, "residual": m.residual,
           "level": m.info["level"], "iterations": m.iterations, "method": m.info["method"],
           "cells": int(m.weights.size)}
    if law:
        ref = eq.law_on_grid(law, m.edges, spec.domain)
        header += ["law_weight", "law_density"]
        cols += [ref.weights, ref.density]
        res["law"] = law
        res["law_energy"] = eq.energy_of_measure(spec, ref)
    path = os.path.join(out, "equilibrium.csv")
    write_csv(path, header, zip(*cols), _meta(cfg))
    man.add_file(path)
    if opts.get("discrete"):
        cc = eq.minimize_discrete(spec, int(opts["discrete"]), restarts=int(opts.get("restarts", 4)),
                                  seed=cfg.seed, threads=gas.thread_budget(cfg.threads))
        z = to_complex(spec.domain, cc.points)
        p2 = os.path.join(out, "charges.csv")
        write_csv(p2, ["particle", "re", "im"],
                  ((j, v.real, v.imag) for j, v in enumerate(z)), _meta(cfg))
        man.add_file(p2)
        res["discrete"] = {"n": cc.n, "energy": cc.energy, "residual": cc.residual,
                           "restart": cc.restart}
    man.results = res
    man.checks["euler_lagrange_residual"] = _check(m.residual, tol, m.residual < tol)


def reference_energy(spec) -> float | None:
    """beta * eps of the minimizer, from the grid solver (None if unavailable)."""
    try:
        return spec.beta * eq.solve_grid(spec, 512).energy
    except CoulombGasError:
        return None


def _free_energy(cfg: RunConfig, man: RunManifest, out: str):
    fe = cfg.free_energy
    spec = cfg.spec
    alphas = fe.get("alphas", 17)
    alphas = thermo.default_alphas(int(alphas)) if np.ndim(alphas) == 0 else np.asarray(alphas, float)
    r = thermo.integrate_ti(spec, alphas, cfg.chain, cfg.seed, int(fe.get("chains", 1)),
                            cfg.threads, fe.get("shift", "auto"))
    path = os.path.join(out, "ti.csv")
    write_csv(path, ["alpha", "gamma_prime", "stderr"],
              zip(r.alphas, r.gamma_prime, r.stderr), _meta(cfg))
    man.add_file(path)
    e0 = reference_energy(spec)
    summary = {"estimate": r.free_energy_estimate, "stderr": r.free_energy_err,
               "gamma_at_1": r.gamma_at_1, "shift": r.info["shift_added"], "n": r.n,
               "reference_E0": e0, "plugin_lower_bound": r.plugin_lower_bound}
    p2 = os.path.join(out, "free_energy.json")
    with open(p2, "w") as fh:
        json.dump(summary, fh, indent=2, default=_json_default)
        fh.write("\n")
    man.add_file(p2)
    man.results = summary
    man.checks["gamma_prime_nonincreasing"] = _check(float(np.max(np.diff(r.gamma_prime))), "2 sigma",
                                                     r.concave)
    if e0 is not None:
        rel = (r.free_energy_estimate - e0) / abs(e0)
        man.checks["within_5pct_of_E0"] = _check(rel, 0.05, abs(rel) < 0.05)


def load_samples(path, domain: Domain | None = None):
    """Complex coordinates and per-chain stacks from a samples CSV."""
    header, cols = read_csv(path)
    need = {"re", "im"}
    if not need <= set(header):
        raise ConfigParse(f"{path}: samples need columns re, im (got {header})")
    z = cols["re"] + 1j * cols["im"]
    return z, cols


def law_checks(z, law: str, preset_name: str | None = None) -> dict:
    """Pass/fail checks of pooled complex samples against a closed-form law."""
    z = np.asarray(z, dtype=complex).ravel()
    L = eq.closed_form(law)
    out = {}
    if law == "semicircle":
        x = z.real
        ks = an.ks_distance(x, L)
        out["ks_semicircle"] = _check(ks, 0.05, ks < 0.05)
        m2 = float(np.mean(x ** 2))
        out["second_moment"] = _check(m2, "0.25 +- 0.01", abs(m2 - 0.25) <= 0.01)
    elif law in ("uniform-disk", "stereographic", "uniform-sphere"):
        ref = eq.closed_form("stereographic") if law == "uniform-sphere" else L
        tol = 0.07 if preset_name == "quaternion-ginibre" else 0.05
        e = an.radial_cdf(z).sup_error(ref)
        out["radial_cdf_sup_error"] = _check(e, tol, e < tol)
        mr = an.mean_resultant_length(z)
        out["mean_resultant_length"] = _check(mr, 0.1, mr < 0.1)
        if law != "uniform-disk":
            f = an.mass_fraction(z, 1.0)
            out["unit_disk_mass"] = _check(f, "0.5 +- 0.03", abs(f - 0.5) <= 0.03)
        if preset_name == "quaternion-ginibre":
            s = an.strip_fraction(z, 0.02)
            ref_s = an.uniform_disk_strip(0.02)
            out["axis_depletion"] = _check(s, ref_s, s < ref_s)
    elif law == "circle-boundary":
        f = an.mass_fraction(z, 0.95)
        out["boundary_concentration"] = _check(1 - f, 0.9, 1 - f >= 0.9)
        re = float(np.mean(z.real))
        out["mean_re"] = _check(re, "0 +- 0.02", abs(re) <= 0.02)
        a2 = float(np.mean(np.abs(z) ** 2))
        out["mean_abs2"] = _check(a2, "1 +- 0.02", abs(a2 - 1) <= 0.02)
    return out


def _verify(cfg: RunConfig, man: RunManifest, out: str):
    if not cfg.samples:
        raise ConfigParse("verify needs a samples CSV")
    z, cols = load_samples(cfg.samples)
    law = cfg.law or PRESET_LAW.get(cfg.preset or "")
    if not law:
        raise ConfigParse("verify needs --law or a preset with a known limit law")
    checks = law_checks(z, law, cfg.preset)
    if cfg.spec.domain.kind == "sphere":
        cnt, _ = an.sphere_cells(from_complex(Domain("sphere"), z))
        _, p = an.uniformity_chi2(cnt)
        checks["sphere_cells_chi2_p"] = _check(p, 0.01, p > 0.01)
    path = os.path.join(out, "verify.json")
    with open(path, "w") as fh:
        json.dump(checks, fh, indent=2, default=_json_default)
        fh.write("\n")
    man.add_file(path)
    man.checks.update(checks)
    man.results = {"samples": int(z.size), "law": law}


def _plot_data(cfg: RunConfig, man: RunManifest, out: str):
    if not cfg.samples:
        raise ConfigParse("plot-data needs a samples CSV")
    z, _ = load_samples(cfg.samples)
    law_name = cfg.law or PRESET_LAW.get(cfg.preset or "")
    law = eq.closed_form(law_name) if law_name else None
    if cfg.spec.domain.kind == "line":
        rng = (-1.5, 1.5) if law_name == "semicircle" else None
        est = an.histogram(z.real, cfg.bins, rng)
    elif cfg.spec.domain.kind == "sphere":
        est = an.sphere_histogram(from_complex(Domain("sphere"), z))
    else:
        est = an.radial_histogram(z, cfg.bins)
    p1 = os.path.join(out, "histogram.csv")
    write_csv(p1, ["bin_center", "width", "density"],
              zip(est.centers, est.widths, est.density), _meta(cfg))
    p2 = os.path.join(out, "plot.csv")
    use_law = law if law is not None and law.kind != "circle-boundary" else None
    write_csv(p2, ["x", "density", "law_density"], an.plot_table(est, use_law), _meta(cfg))
    man.add_file(p1)
    man.add_file(p2)
    man.results = {"samples": int(z.size), "scheme": est.scheme, "bins": int(est.counts.size)}


DISPATCH = {"ensemble-sample": _ensemble_sample, "gas-run": _gas_run,
            "equilibrium": _equilibrium, "free-energy": _free_energy,
            "verify": _verify, "plot-data": _plot_data}


def run_experiment(cfg: RunConfig) -> RunManifest:
    """Run one experiment, write its artifacts and manifest, return the manifest."""
    t0 = time.perf_counter()
    out = cfg.output
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise ConfigParse(f"cannot create output directory {out}: {exc}") from exc
    man = RunManifest(cfg.echo())
    DISPATCH[cfg.kind](cfg, man, out)
    man.wall_clock = time.perf_counter() - t0
    man.write(out)
    return man


# ---------------------------------------------------------------------------
# argument parsing

def _common(p):
    p.add_argument("--config", help="YAML run configuration (flags override it)")
    p.add_argument("--preset", help="named ensemble: " + ", ".join(sorted(PRESET_LAW)))
    p.add_argument("--n", type=int, help="number of particles / matrix size")
    p.add_argument("--beta", type=float, help="inverse temperature (overrides the preset)")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--threads", type=int,
                   help="thread budget (default: $COULOMBGAS_THREADS or 1)")
    p.add_argument("--output", "-o", help="output directory (default ./out)")


def _chain_flags(p):
    p.add_argument("--sweeps", type=int, help="total sweeps per chain, burn-in included")
    p.add_argument("--burn-in", type=int, help="sweeps discarded for adaptation")
    p.add_argument("--thinning", type=int, help="keep every k-th post-burn-in sweep")
    p.add_argument("--chains", type=int, help="independent chains")
    p.add_argument("--step", type=float, help="initial proposal step")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coulombgas", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ensemble-sample", help="sample random matrices, write eigenvalues")
    _common(p)
    p.add_argument("--matrices", type=int, help="number of matrices (default 16)")
    p.add_argument("--class", dest="matrix_class", choices=sorted(rmt.CLASSES),
                   help="matrix class (default: from the preset)")
    p.add_argument("--law", help="limit law to check against")

    p = sub.add_parser("gas-run", help="Metropolis sampling of the log-gas")
    _common(p)
    _chain_flags(p)
    p.add_argument("--checkpoint", help="checkpoint JSON path (default OUTPUT/checkpoint.json)")
    p.add_argument("--checkpoint-every", type=int, help="write the checkpoint every k sweeps")
    p.add_argument("--resume", action="store_true", help="continue from the checkpoint")
    p.add_argument("--law", help="limit law to check against")

    p = sub.add_parser("equilibrium", help="solve for the equilibrium measure on a grid")
    _common(p)
    p.add_argument("--resolution", type=int, help="grid cells (default 512)")
    p.add_argument("--iterations", type=int, help="projected-gradient iterations (default 20000)")
    p.add_argument("--tol", type=float, help="Euler-Lagrange residual tolerance (default 1e-3)")
    p.add_argument("--bound", type=float, help="half-width / radius of the grid")
    p.add_argument("--law", help="also tabulate this closed-form law on the same grid")
    p.add_argument("--discrete", type=int, help="also minimize N point charges")

    p = sub.add_parser("free-energy", help="thermodynamic integration of -N^-2 ln Z")
    _common(p)
    _chain_flags(p)
    p.add_argument("--alphas", type=int, help="points of the alpha grid (default 17)")

    for name, hlp in (("verify", "check a samples CSV against the limit law"),
                      ("plot-data", "histogram and law tables from a samples CSV")):
        p = sub.add_parser(name, help=hlp)
        _common(p)
        p.add_argument("--samples", help="samples CSV (columns re, im)")
        p.add_argument("--law", help="closed-form law: " + ", ".join(eq.LAW_KINDS))
        p.add_argument("--bins", type=int, help="histogram bins (default ceil(sqrt(m)))")

    p = sub.add_parser("run", help="run the experiment described by a config file")
    p.add_argument("config", help="YAML run configuration")
    p.add_argument("--threads", type=int, help="thread budget (overrides the config)")
    p.add_argument("--output", "-o", help="output directory (overrides the config)")
    return ap


def config_from_args(args) -> RunConfig:
    if args.command == "run":
        cfg = parse_config(args.config)
        if args.threads is not None:
            cfg.threads = args.threads
        if args.output:
            cfg.output = args.output
        return cfg
    data: dict = {}
    if getattr(args, "config", None):
        import yaml
        try:
            with open(args.config) as fh:
                data = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigParse(f"cannot read config {args.config}: {exc}") from exc
    data["kind"] = args.command
    for key in ("preset", "n", "beta", "seed", "threads", "output", "matrices", "matrix_class",
                "chains", "checkpoint", "checkpoint_every", "samples", "law", "bins"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    if getattr(args, "resume", False):
        data["resume"] = True
    if "preset" not in data and "model" not in data:
        if args.command in ("verify", "plot-data") and data.get("law"):
            data["model"] = {"domain": {"semicircle": "line", "uniform-sphere": "sphere"}
                             .get(data["law"], "plane"), "potential": {"kind": "zero"}}
        else:
            raise ConfigParse("give --preset or a --config with a model")
    chain = dict(data.get("chain") or {})
    for flag, key in (("sweeps", "sweeps"), ("burn_in", "burn_in"), ("thinning", "thinning"),
                      ("step", "step")):
        val = getattr(args, flag, None)
        if val is not None:
            chain[key] = val
    if chain:
        data["chain"] = chain
    eqo = dict(data.get("equilibrium") or {})
    for key in ("resolution", "iterations", "tol", "bound", "discrete"):
        val = getattr(args, key, None)
        if val is not None:
            eqo[key] = val
    if eqo:
        data["equilibrium"] = eqo
    if getattr(args, "alphas", None) is not None:
        data["free_energy"] = dict(data.get("free_energy") or {}, alphas=args.alphas)
    return from_dict(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        man = run_experiment(cfg)
    except (CoulombGasError, OSError, ValueError, KeyError) as exc:
        print(f"coulombgas: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for name, c in man.checks.items():
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {name}: {c['value']:.6g} (threshold {c['threshold']})")
    print(f"wrote {len(man.files)} file(s) to {cfg.output}")
    return 0 if man.passed else 2


if __name__ == "__main__":
    sys.exit(main())
