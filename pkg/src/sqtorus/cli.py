"""Command line entry point: ``sqtorus <subcommand> CONFIG [--set key=value ...]``.

Exit codes: 0 ok, 1 usage or configuration error, 2 numerical blow-up,
3 statistical refusal (too few batches).
"""

import argparse
import csv
import json
import logging
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import config as config_mod
from .config import ConfigError
from .diagnostics import (
    default_test_functions,
    empirical_covariance,
    gaussianity_report,
    normalised,
    top_chaos_functional,
)
from .dynamics import (
    BlowUpError,
    Chain,
    Nonlocal,
    NonlinearitySpec,
    TrajectoryConfig,
    markov_crosscheck,
    solve,
)
from .noise import NoiseSpec, sample_gff, sigma2_renorm
from .oracle import GibbsAction, TuningError, mala_chain, moment_compare
from .regimes import regime_report
from .stats import InsufficientBatchesError
from .torus import Field, TestFunction, TorusGrid, besov_norm, pairing

log = logging.getLogger("sqtorus")

EXIT_OK, EXIT_USAGE, EXIT_BLOWUP, EXIT_BATCHES = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def code_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


# -- building blocks from a resolved config ---------------------------------

def build(cfg):
    g = cfg["grid"]
    grid = TorusGrid(g["dim"], g["n"], g["laplacian"])
    noise = NoiseSpec(cfg["noise"]["beta"], g["dim"])
    nlc = cfg["nonlinearity"]
    nonloc = None
    if "nonlocal" in nlc:
        nonloc = Nonlocal(nlc["nonlocal"].get("ell", 1), tuple(tuple(t) for t in nlc["nonlocal"]["terms"]))
    nl = NonlinearitySpec(tuple(nlc["coeffs"]), nlc["wick"], nonloc)
    t = cfg["trajectory"]
    traj = TrajectoryConfig(dt=t["dt"], t_end=t["t_end"], record_stride=t["stride"],
                            burn_in=t["burn_in"], seed=t["seed"], scheme=t["scheme"])
    return grid, noise, nl, traj


def make_phis(cfg, grid, noise):
    spec = cfg["diagnostics"]["phis"]
    if not spec:
        return default_test_functions(grid, noise)
    return [normalised(TestFunction.mode(grid, p["k"], p.get("kind", "cos")), noise) for p in spec]


def initial_data(cfg, grid, noise):
    t = cfg["trajectory"]
    if t["init"] == "zero":
        return np.zeros((t["chains"],) + grid.shape)
    return sample_gff(noise, grid, seed=t["seed"] + 10_000, size=t["chains"])


def sigma2_for(cfg, grid, noise, nl):
    s = cfg["diagnostics"].get("sigma2_override")
    if s is not None:
        return float(s)
    return sigma2_renorm(noise, grid).sigma2 if nl.wick else 0.0


def simulate(cfg, grid=None):
    g, noise, nl, traj = build(cfg)
    grid = grid or g
    u0 = initial_data(cfg, grid, noise)
    return solve(u0, nl, noise, traj, grid=grid, sigma2=sigma2_for(cfg, grid, noise, nl))


def manifest(cfg, command, grid=None, noise=None, **extra):
    out = {"command": command, "version": code_version(), "config": cfg}
    if grid is not None:
        out["sigma2_N"] = sigma2_renorm(noise, grid).sigma2
    out.update(extra)
    return out


# -- output ------------------------------------------------------------------

def _outdir(cfg, args):
    d = Path(args.out or cfg.get("outputs", {}).get("dir", "runs/out"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _json(path, obj):
    path.write_text(json.dumps(obj, indent=2, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def save_chain(path, chain):
    np.savez_compressed(path, values=chain.values, times=chain.times, sigma2=chain.sigma2,
                        dim=chain.grid.dim, n=chain.grid.n, laplacian=chain.grid.laplacian)


def load_chain(path):
    with np.load(path) as z:
        grid = TorusGrid(int(z["dim"]), int(z["n"]), str(z["laplacian"]))
        return Chain(grid, z["times"], z["values"], float(z["sigma2"]))


def write_observables(outdir, chain, phis):
    for phi in phis:
        X = np.atleast_2d(pairing(chain.values, phi))
        with open(outdir / f"obs_{_slug(phi.label)}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "chain", "value"])
            for i, t in enumerate(chain.times):
                for c in range(X.shape[1]):
                    w.writerow([repr(float(t)), c, repr(float(X[i, c]))])


def write_records(path, rows):
    if not rows:
        return
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in keys})


def _slug(label):
    return "".join(ch if ch.isalnum() else "_" for ch in label).strip("_") or "phi"


def plot_report(path, report):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(1, 2, figsize=(8, 3))
    for e in report["test_functions"]:
        st, ch = e["stationarity"], e["chaos"]
        ax[0].plot([r["k"] for r in st], [r["z"] for r in st], "o-", label=e["phi"])
        ax[1].plot([c["k"] for c in ch], [c["z_score"] for c in ch], "o-", label=e["phi"])
    for a, title in zip(ax, ("stationarity z", "chaos z")):
        a.axhspan(-3, 3, color="0.9")
        a.set_xlabel("k")
        a.set_title(title)
    ax[1].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


# -- subcommands ---------------------------------------------------------------

def _chain_for(cfg, args):
    if getattr(args, "chain", None):
        return load_chain(args.chain)
    return simulate(cfg)


def cmd_simulate(cfg, args):
    grid, noise, nl, _ = build(cfg)
    chain = simulate(cfg)
    out = _outdir(cfg, args)
    save_chain(out / "chain.npz", chain)
    write_observables(out, chain, make_phis(cfg, grid, noise))
    _json(out / "manifest.json", manifest(cfg, "simulate", grid, noise,
                                          sigma2_used=chain.sigma2, n_records=chain.n_records))
    print(f"wrote {chain.n_records} x {chain.n_chains} records to {out}")


def _diagnose(cfg, args, command):
    grid, noise, nl, _ = build(cfg)
    chain = _chain_for(cfg, args)
    d = cfg["diagnostics"]
    phis = make_phis(cfg, chain.grid, noise)
    k_max = d["k_max"] if command == "stationarity" else max(d["k_max"], nl.p + 1)
    report = gaussianity_report(chain, nl, phis, noise, k_max=k_max, n_batches=d["n_batches"])
    out = _outdir(cfg, args)
    if command == "nongauss" and nl.p % 2 == 1 and nl.theta:
        C = empirical_covariance(chain, n_batches=d["n_batches"])
        report["top_chaos"] = {e["phi"]: top_chaos_functional(C, phi, nl.p, nl.theta)
                               for e, phi in zip(report["test_functions"], phis)}
    key = "stationarity" if command == "stationarity" else "chaos"
    rows = [{"phi": e["phi"], **r} for e in report["test_functions"] for r in e[key]]
    fmts = cfg["outputs"]["formats"]
    if "csv" in fmts:
        write_records(out / f"{command}.csv", rows)
    if "svg" in fmts:
        plot_report(out / f"{command}.svg", report)
    if command == "stationarity":
        report = {k: v for k, v in report.items() if k != "verdict"}
        for e in report["test_functions"]:
            e.pop("chaos")
    _json(out / f"{command}.json", report)
    _json(out / "manifest.json", manifest(cfg, command, grid, noise, sigma2_used=chain.sigma2))
    for r in rows:
        z = r.get("z", r.get("z_score"))
        print(f"{r['phi']:>12}  k={r['k']}  z={z:+.2f}")
    if command == "nongauss":
        print("verdict:", report["verdict"])


def cmd_stationarity(cfg, args):
    _diagnose(cfg, args, "stationarity")


def cmd_nongauss(cfg, args):
    _diagnose(cfg, args, "nongauss")


def cmd_oracle(cfg, args):
    grid, noise, nl, _ = build(cfg)
    if grid.dim != 1 or nl.wick or nl.nonlocal_ is not None or noise.beta != 0:
        raise ConfigError("oracle needs dim 1, white noise and a local non-Wick nonlinearity")
    grid = TorusGrid(1, grid.n, "fd")
    dyn = simulate(cfg, grid=grid)
    o = cfg["oracle"]
    orc = mala_chain(GibbsAction(grid.n, nl.coeffs), o["samples"], seed=o["seed"],
                     n_chains=o["chains"], warmup=o["warmup"], thin=o["thin"])
    phis = make_phis(cfg, grid, noise)
    rep = moment_compare(dyn, orc, phis, cfg["diagnostics"]["k_max"],
                         n_batches=cfg["diagnostics"]["n_batches"])
    rep["acceptance"] = orc.meta["acceptance"]
    out = _outdir(cfg, args)
    _json(out / "oracle.json", rep)
    write_records(out / "oracle.csv", rep["rows"])
    _json(out / "manifest.json", manifest(cfg, "oracle", grid, noise))
    for r in rep["rows"]:
        print(f"{r['phi']:>12}  k={r['k']}  dyn={r['dynamic']:.5g}  oracle={r['oracle']:.5g}  z={r['z']:+.2f}")
    print("pass" if rep["pass"] else "FAIL")


def besov_study(cfg, ns=None):
    """Besov norm of the stationary field for each grid size in ``ns``.

    Averages ``besov_norm`` over every recorded time and chain; the error is
    the standard error of the per-chain averages.
    """
    d = cfg["diagnostics"]
    rows = []
    for n in ns or d["besov_ns"]:
        grid = TorusGrid(cfg["grid"]["dim"], n, cfg["grid"]["laplacian"])
        chain = simulate(cfg, grid=grid)
        per_chain = besov_norm(chain.values, d["alpha"], grid).mean(axis=0)
        se = float(np.std(per_chain, ddof=1) / np.sqrt(per_chain.size)) if per_chain.size > 1 else 0.0
        rows.append({"n": n, "sigma2": chain.sigma2, "besov_mean": float(per_chain.mean()), "besov_se": se})
    return rows


def cmd_besov(cfg, args):
    rows = besov_study(cfg)
    for r in rows:
        print(f"n={r['n']:4d}  sigma2={r['sigma2']:.4f}  besov={r['besov_mean']:.4f} +- {r['besov_se']:.4f}")
    out = _outdir(cfg, args)
    write_records(out / "besov.csv", rows)
    _json(out / "besov.json", {"alpha": cfg["diagnostics"]["alpha"], "rows": rows})
    _json(out / "manifest.json", manifest(cfg, "besov"))


def cmd_crosscheck(cfg, args):
    # only the state at t_end is compared, so burn-in is irrelevant here
    t = cfg["trajectory"]
    t["burn_in"] = min(t["burn_in"], t["t_end"])
    grid, noise, nl, traj = build(cfg)
    u0 = sample_gff(noise, grid, seed=traj.seed + 10_000)
    res = markov_crosscheck(Field(grid, u0.values), nl, noise, traj)
    out = _outdir(cfg, args)
    _json(out / "crosscheck.json", res)
    _json(out / "manifest.json", manifest(cfg, "crosscheck", grid, noise))
    print(json.dumps(res, indent=2))


def cmd_regime(cfg, args):
    if args.p is not None:
        if args.d is None or (args.rho is None) == (args.beta is None):
            raise UsageError("regime needs --p, --d and exactly one of --rho/--beta")
        rep = regime_report(args.p, args.d, beta=args.beta, rho=args.rho)
    elif cfg is not None and "regime" in cfg:
        r = cfg["regime"]
        if ("rho" in r) == ("beta" in r):
            raise ConfigError("regime section needs exactly one of rho and beta")
        rep = regime_report(r["p"], r["d"], beta=r.get("beta"), rho=r.get("rho"))
    else:
        raise UsageError("regime needs --p/--d/--rho (or --beta), or a config with a regime section")
    if args.json:
        print(json.dumps(rep.to_dict(), indent=2))
    else:
        print(rep.table())
        print("note:", rep.note)


COMMANDS = {
    "simulate": cmd_simulate,
    "stationarity": cmd_stationarity,
    "nongauss": cmd_nongauss,
    "oracle": cmd_oracle,
    "regime": cmd_regime,
    "besov": cmd_besov,
    "crosscheck": cmd_crosscheck,
}


def make_parser():
    p = _Parser(prog="sqtorus", description="Renormalised Langevin dynamics on the torus and their diagnostics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        needs_cfg = name != "regime"
        s.add_argument("config", nargs=None if needs_cfg else "?",
                       help="YAML file or preset name (" + ", ".join(config_mod.PRESETS) + ")")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key, dot-path style (repeatable)")
        s.add_argument("--out", help="output directory (overrides outputs.dir)")
        if name in ("stationarity", "nongauss"):
            s.add_argument("--chain", help="reuse a chain.npz written by simulate")
        if name == "regime":
            s.add_argument("--p", type=int)
            s.add_argument("--d", type=int)
            s.add_argument("--rho", type=str)
            s.add_argument("--beta", type=str)
            s.add_argument("--json", action="store_true")
    return p


def main(argv=None):
    try:
        args = make_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = config_mod.load(args.config, args.set) if args.config is not None else None
        if cfg is not None and args.command != "regime" and "grid" not in cfg:
            raise ConfigError(f"{args.command} needs grid and nonlinearity sections")
        COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValueError, TuningError) as exc:
        if isinstance(exc, InsufficientBatchesError):
            print(f"refused: {exc}", file=sys.stderr)
            return EXIT_BATCHES
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BlowUpError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
