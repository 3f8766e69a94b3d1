"""Command-line client for the experiment service.

Each subcommand posts one request to the HTTP service and writes the report
to files.  By default the service runs in-process (no socket); --server URL
targets a remote instance with the identical code path.  All file output is
client-side: tabular CSV/JSON series, law files, and a manifest recording
the fully-resolved config, so `skewlab replay manifest` reproduces any run
bit for bit (data files are byte-identical; only the manifest's timestamp
and timing differ).

Exit codes: 0 success; 1 selftest failure, server/transport failure, or an
unexpected error; 2 bad usage or a bad config value (argparse's own code).
"""
import argparse
import asyncio
import datetime
import json
import os
import sys

import httpx
import numpy as np

from . import __version__
from .config import (CONFIG_SCHEMA_VERSION, ConfigError, ExperimentConfig)
from .laws import EmpiricalLaw, save_law
from .stats import CorrelationSeries, series_to_csv

MANIFEST_SCHEMA_VERSION = 1

EXPERIMENTS = {
    "constants": "measure sigma^2(f), Sigma^2(phi), the homoclinic sum, and "
                 "the derived decay/growth constants",
    "correlations": "correlation of the fiber observable along the orbit "
                    "with its k^{-1/2} power-law fit",
    "variance-scan": "Var(S_n phi) across an n grid with its n^{3/2} fit",
    "distribution": "normalized-sum law against the random-scenery walk and "
                    "the Brownian local-time limit",
    "lemmas": "moderate-deviation tails, flow-block multicorrelations, and "
              "occupation-count moments",
    "decomposition": "residual between dynamical sums and their "
                     "scenery-quadrature reconstruction",
    "selftest": "fast invariant battery across every module",
}

# subcommand-specific meaning of the generic grid flags
_N_TARGET = {"variance-scan": "n_grid", "lemmas": "n_grid",
             "decomposition": "resid_n_grid", "distribution": "n"}


class TransportError(RuntimeError):
    pass


def _utc_now():
    return datetime.datetime.now(datetime.timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ")


def _post(server, path, payload):
    """POST to a remote server, or drive the ASGI app in-process when no
    server is configured.  No read timeout: experiments legitimately take
    minutes at default sizes."""
    try:
        if server:
            with httpx.Client(base_url=server, timeout=httpx.Timeout(
                    connect=10.0, read=None, write=60.0, pool=10.0)) as cl:
                return cl.post(path, json=payload)
        from .service import app

        async def go():
            transport = httpx.ASGITransport(app=app)
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://skewlab.internal",
                                         timeout=None) as cl:
                return await cl.post(path, json=payload)

        return asyncio.run(go())
    except httpx.HTTPError as e:
        raise TransportError(f"cannot reach experiment service: {e}")


def run_experiment(command, cfg, server=""):
    resp = _post(server, f"/experiments/{command}",
                 {"system": cfg.system, "run": cfg.run})
    if resp.status_code in (400, 422):
        detail = resp.json().get("detail", resp.text)
        raise ConfigError(f"rejected by service: {detail}")
    if resp.status_code != 200:
        raise TransportError(f"service returned {resp.status_code}: "
                             f"{resp.text[:500]}")
    return resp.json()


# --- client-side output files ---

def _dump_json(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _kv_csv(rows, path):
    with open(path, "w") as fh:
        fh.write("key,value\n")
        for k, v in rows:
            fh.write(f"{k},{v!r}\n" if isinstance(v, float) else f"{k},{v}\n")


def _series_csv(lags, values, stderrs, samples, seed, path, index_name):
    series = CorrelationSeries(tuple(lags), values, stderrs,
                               int(samples), int(seed))
    series_to_csv(series, path, index_name=index_name)


def write_outputs(command, report, cfg, out_dir):
    """Write the report's data files (deterministic: no timestamps, no
    timings) and return their names; the caller wraps them in a manifest."""
    slug = command.replace("-", "_")
    fmt = cfg.output.get("format", "csv")
    doc = {k: v for k, v in report.items() if k != "elapsed_s"}
    names = []

    def add(name):
        names.append(name)
        return os.path.join(out_dir, name)

    if command == "distribution":
        law_files = {}
        for key, vals in report["laws"].items():
            n_for = report["char_n"] if key.endswith("_char") else report["n"]
            expo = 0.0 if key == "limit" else report["exponent"]
            law = EmpiricalLaw(np.asarray(vals, dtype=float), int(n_for),
                               float(expo), int(report["seed"]))
            fname = f"{slug}_law_{key}.json"
            written = save_law(law, add(fname))
            for extra in written[1:]:
                names.append(os.path.basename(extra))
            law_files[key] = fname
        doc = {k: v for k, v in doc.items() if k != "laws"}
        doc["law_files"] = law_files

    _dump_json(doc, add(f"{slug}.json"))

    if fmt == "csv":
        if command == "constants":
            skip = {"experiment"}
            _kv_csv([(k, v) for k, v in doc.items() if k not in skip],
                    add(f"{slug}.csv"))
        elif command == "correlations":
            _series_csv(report["lags"], report["values"], report["stderrs"],
                        report["samples"], report["seed"],
                        add(f"{slug}.csv"), "k")
        elif command == "variance-scan":
            _series_csv(report["n_grid"], report["variances"],
                        report["stderrs"], report["samples"], report["seed"],
                        add(f"{slug}.csv"), "n")
        elif command == "distribution":
            rows = [("n", report["n"]), ("char_n", report["char_n"])]
            rows += [(f"ks_{k}", v) for k, v in report["ks"].items()]
            rows += [("char_distance", report["char_distance"])]
            _kv_csv(rows, add(f"{slug}.csv"))
        elif command == "lemmas":
            tl = report["tail"]
            with open(add(f"{slug}_tail.csv"), "w") as fh:
                fh.write("grid,n,probability,stderr\n")
                for n, p, e in zip(tl["n_grid"], tl["probabilities"],
                                   tl["stderrs"]):
                    fh.write(f"pinned,{n},{p!r},{e!r}\n")
                for n, p, e in zip(tl["aux_n_grid"], tl["aux_probabilities"],
                                   tl["aux_stderrs"]):
                    fh.write(f"aux,{n},{p!r},{e!r}\n")
            mc = report["multicov"]
            with open(add(f"{slug}_multicov.csv"), "w") as fh:
                fh.write("T,covariance,stderr\n")
                for T, c, e in zip(mc["T_grid"], mc["covariances"],
                                   mc["stderrs"]):
                    fh.write(f"{T!r},{c!r},{e!r}\n")
            occ = report["occupation"]
            keys = ["mean_I", "mean_I_err", "second_I", "second_I_err",
                    "third_I", "third_I_err", "cross_IJ_scaled",
                    "cross_IJ_scaled_err", "cross_JK_scaled",
                    "cross_JK_scaled_err"]
            with open(add(f"{slug}_occupation.csv"), "w") as fh:
                fh.write("n," + ",".join(keys) + "\n")
                for t in occ["tables"]:
                    fh.write(str(t["n"]) + ","
                             + ",".join(repr(t[k]) for k in keys) + "\n")
        elif command == "decomposition":
            with open(add(f"{slug}.csv"), "w") as fh:
                fh.write("n,exceedance,stderr,residual_rms,residual_max\n")
                for i, n in enumerate(report["n_grid"]):
                    fh.write(f"{n},{report['exceedance'][i]!r},"
                             f"{report['stderrs'][i]!r},"
                             f"{report['residual_rms'][i]!r},"
                             f"{report['residual_max'][i]!r}\n")
        elif command == "selftest":
            with open(add(f"{slug}.csv"), "w") as fh:
                fh.write("name,passed,detail\n")
                for c in report["checks"]:
                    detail = c["detail"].replace('"', "'")
                    fh.write(f"{c['name']},{int(c['passed'])},\"{detail}\"\n")
    return names


def write_manifest(command, report, cfg, out_dir, names, server):
    import scipy
    slug = command.replace("-", "_")
    manifest = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "command": command,
        "created": _utc_now(),
        "package_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "config_schema_version": CONFIG_SCHEMA_VERSION,
        "server": server,
        "elapsed_s": report.get("elapsed_s", 0.0),
        "config": cfg.to_dict(),
        "outputs": names,
    }
    path = os.path.join(out_dir, f"{slug}.manifest.json")
    _dump_json(manifest, path)
    return path


# --- stdout summaries ---

def _fit_line(fit, err):
    if fit is None:
        return f"fit unavailable ({err})"
    return (f"exponent {fit['exponent']:+.4f} +- {fit['stderr']:.4f}, "
            f"constant {fit['constant']:.4f}")


def summarize(command, report):
    out = []
    if command == "constants":
        out.append(f"sigma^2(f)   = {report['sigma2_base']:.6f} "
                   f"+- {report['sigma2_base_stderr']:.6f}")
        out.append(f"Sigma^2(phi) = {report['sigma2_fiber']:.6f} "
                   f"+- {report['sigma2_fiber_err']:.6f}")
        out.append(f"homoclinic sum = {report['homoclinic_sum']:.12f} "
                   f"(tail <= {report['homoclinic_tail']:.1e})")
        out.append(f"correlation constant = "
                   f"{report['correlation_constant']:.6f} "
                   f"(pinned {report['correlation_constant_pinned']:.6f})")
        out.append(f"variance constant    = "
                   f"{report['variance_constant']:.6f} "
                   f"(pinned {report['variance_constant_pinned']:.6f})")
    elif command == "correlations":
        out.append(f"lags {report['lags'][0]}..{report['lags'][-1]}, "
                   f"{report['samples']} orbits x {report['fiber_reps']} fibers")
        out.append(_fit_line(report["fit"], report["fit_error"]))
    elif command == "variance-scan":
        out.append(_fit_line(report["fit"], report["fit_error"]))
        out.append(f"ratio to target constant at n={report['n_grid'][-1]}: "
                   f"{report['constant_ratios'][-1]:.4f}")
    elif command == "distribution":
        ks = report["ks"]
        out.append("KS distances: " + ", ".join(
            f"{k.replace('_', ' vs ')} = {v:.4f}" for k, v in ks.items()))
        out.append(f"char-fn distance (weighted vs scenery walk, "
                   f"n={report['char_n']}): {report['char_distance']:.4f}")
    elif command == "lemmas":
        tl = report["tail"]
        out.append(f"tail P(S_n > n^{{1-beta}}): pinned grid "
                   f"{tl['probabilities']} non-increasing: "
                   f"{tl['non_increasing']}")
        out.append(f"  log p vs sqrt(n) slope {tl['sqrt_n_slope']:+.4f} "
                   f"+- {tl['sqrt_n_slope_bse']:.4f} (bootstrap)")
        mc = report["multicov"]
        if mc["fit"]:
            out.append(f"multicov rate {mc['fit']['rate']:+.4f} "
                       f"+- {mc['fit']['rate_stderr']:.4f} over T grid "
                       f"{mc['T_grid']}")
        else:
            out.append(f"multicov fit unavailable ({mc['fit_error']})")
        fits = report["occupation"]["fits"]
        parts = [f"{k} {v['exponent']:.3f}" if v else f"{k} n/a"
                 for k, v in fits.items()]
        out.append("occupation-moment exponents: " + ", ".join(parts))
    elif command == "decomposition":
        out.append(f"P(|residual| > {report['threshold']}) over n grid "
                   f"{report['n_grid']}: "
                   + ", ".join(f"{p:.4f}" for p in report["exceedance"])
                   + f" (non-increasing: {report['non_increasing']})")
    elif command == "selftest":
        for c in report["checks"]:
            mark = "PASS" if c["passed"] else "FAIL"
            out.append(f"{mark} {c['name']}: {c['detail']}")
        out.append(f"{report['passed']} passed, {report['failed']} failed "
                   f"in {report['elapsed_s']:.1f}s")
    return "\n".join(out)


# --- argument parsing ---

def _add_common(sp):
    sp.add_argument("--config", metavar="FILE",
                    help="INI config; flags below override it")
    sp.add_argument("--seed", type=int, help="master RNG seed")
    sp.add_argument("--samples", type=int, help="sample count")
    sp.add_argument("--threads", type=int,
                    help="cap BLAS threads (0 = leave alone)")
    sp.add_argument("--out", metavar="DIR", default=".",
                    help="output directory (default: current)")
    sp.add_argument("--format", choices=("csv", "json"),
                    help="tabular output format (default from config)")
    sp.add_argument("--server", default="",
                    help="experiment service URL (default: run in-process)")


def build_parser():
    p = argparse.ArgumentParser(
        prog="skewlab",
        description="Skew-product simulation laboratory: a hyperbolic toral "
                    "automorphism driving the geodesic flow on a compact "
                    "genus-2 hyperbolic surface.")
    p.add_argument("--version", action="version",
                   version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, help_ in EXPERIMENTS.items():
        sp = sub.add_parser(name, help=help_)
        _add_common(sp)
        if name == "correlations":
            sp.add_argument("--k", metavar="GRID",
                            help="comma-separated lag grid")
        if name in _N_TARGET:
            sp.add_argument("--n", metavar="N",
                            help="orbit length (distribution) or "
                                 "comma-separated n grid (scans)")
        if name == "lemmas":
            sp.add_argument("--beta", type=float,
                            help="tail exponent, P(S_n > n^{1-beta})")
            sp.add_argument("--epsilon", type=float,
                            help="occupation sub-interval scale n^{-eps}")
        if name == "constants":
            sp.add_argument("--bmax", type=float,
                            help="fiber autocorrelation integration range")
            sp.add_argument("--step", type=float,
                            help="fiber autocorrelation quadrature step")

    sp = sub.add_parser("replay",
                        help="re-run a manifest and rewrite its outputs")
    sp.add_argument("manifest", help="path to a *.manifest.json file")
    sp.add_argument("--out", metavar="DIR", default=None,
                    help="output directory (default: the manifest's)")
    sp.add_argument("--server", default="",
                    help="experiment service URL (default: in-process)")

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8777)

    sp = sub.add_parser("defaults",
                        help="print (or write) the default INI config")
    sp.add_argument("--out", metavar="FILE", default=None,
                    help="write to a file instead of stdout")
    return p


def _resolve_config(args):
    cfg = (ExperimentConfig.from_file(args.config) if args.config
           else ExperimentConfig())
    cfg.override("run", "seed", args.seed)
    cfg.override("run", "samples", args.samples)
    cfg.override("run", "threads", args.threads)
    cfg.override("output", "format", args.format)
    if getattr(args, "k", None) is not None:
        cfg.override("run", "k_grid", args.k)
    if getattr(args, "n", None) is not None:
        cfg.override("run", _N_TARGET[args.command], args.n)
        if (args.command == "distribution"
                and cfg.run["char_n"] > cfg.run["n"]):
            cfg.override("run", "char_n", cfg.run["n"])
            print(f"note: char_n lowered to {cfg.run['n']} to stay within "
                  f"the orbit length", file=sys.stderr)
    if getattr(args, "beta", None) is not None:
        cfg.override("run", "beta", args.beta)
    if getattr(args, "epsilon", None) is not None:
        cfg.override("run", "epsilon", args.epsilon)
    if getattr(args, "bmax", None) is not None:
        cfg.override("run", "b_max", args.bmax)
    if getattr(args, "step", None) is not None:
        cfg.override("run", "step", args.step)
    return cfg


def _execute(command, cfg, out_dir, server):
    os.makedirs(out_dir, exist_ok=True)
    report = run_experiment(command, cfg, server)
    names = write_outputs(command, report, cfg, out_dir)
    manifest = write_manifest(command, report, cfg, out_dir, names, server)
    print(summarize(command, report))
    print(f"wrote {', '.join(names)} and {os.path.basename(manifest)} "
          f"to {out_dir}")
    if command == "selftest" and not report["all_passed"]:
        return 1
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "defaults":
            cfg = ExperimentConfig()
            if args.out:
                cfg.write(args.out)
                print(f"wrote {args.out}")
            else:
                cfg.write(sys.stdout)
            return 0
        if args.command == "serve":
            try:
                import uvicorn
            except ImportError:
                print("serve requires uvicorn (pip install 'skewlab[dev]')",
                      file=sys.stderr)
                return 1
            uvicorn.run("skewlab.service:app", host=args.host,
                        port=args.port)
            return 0
        if args.command == "replay":
            with open(args.manifest) as fh:
                manifest = json.load(fh)
            if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
                raise ConfigError(
                    f"manifest schema_version "
                    f"{manifest.get('schema_version')!r} unsupported")
            command = manifest["command"]
            cfg = ExperimentConfig.from_dict(manifest["config"])
            out_dir = args.out or os.path.dirname(os.path.abspath(
                args.manifest))
            return _execute(command, cfg, out_dir, args.server)
        cfg = _resolve_config(args)
        return _execute(args.command, cfg, args.out, args.server)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except TransportError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
