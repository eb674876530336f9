"""Command-line driver: run experiments, baselines, and comparison reports.

Subcommands:

* ``run``  — adaptive (or global-DoE) surrogate run; writes report.json,
  history.csv, features.csv, spectrum.csv.
* ``mcs``  — crude Monte Carlo baseline; writes report.json.
* ``form`` — HL-RF first-order baseline; writes report.json.
* ``report`` — comparison table (CSV + markdown) across run directories,
  with relative error against a reference run.

Exit codes: 0 success/convergence, 2 stopped on the iteration budget,
1 error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from ashgp import config as cfgmod
from ashgp.baselines import form_hlrf, mcs
from ashgp.config import ConfigError
from ashgp.learner import LearnerError, RunRecord, run_adaptive
from ashgp.rv import InvalidParameterError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BUDGET = 2


def _out_dir(doc: dict, args) -> Path:
    if args.out is not None:
        d = Path(args.out)
    else:
        d = Path(doc.get("output", {}).get("directory", "."))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        w.writerow(header)
        w.writerows(rows)


def _write_report(out: Path, payload: dict, quiet: bool):
    path = out / "report.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    if not quiet:
        print(f"wrote {path}")


def _report_payload(doc: dict, method: str, body: dict) -> dict:
    return {"name": doc.get("name", "run"), "method": method, **body}


def _write_run_outputs(out: Path, record: RunRecord, quiet: bool):
    n_lam = 8
    rows = []
    for it in record.iterations:
        lam = list(np.asarray(it.eigenvalues)[:n_lam])
        lam += [""] * (n_lam - len(lam))
        rows.append([it.iteration, it.pf, it.eps1, it.eps2, it.d_r, *lam, it.n_s])
    _write_csv(
        out / "history.csv",
        ["iteration", "pf", "eps1", "eps2", "d_r",
         *[f"lambda_{i + 1}" for i in range(n_lam)], "n_s"],
        rows,
    )

    d_r = record.final_d_r
    psi_cols = [f"psi_{i + 1}" for i in range(d_r)]
    rows = []
    if record.training_features is not None:
        pred = record.training_pred
        for i, psi in enumerate(record.training_features):
            rows.append([*psi, pred[i] if pred is not None else "",
                         record.training_y[i], "train"])
    if record.candidate_features is not None:
        for psi, mu in zip(record.candidate_features, record.candidate_pred):
            rows.append([*psi, mu, "", "candidate"])
    _write_csv(out / "features.csv", [*psi_cols, "y_pred", "y_true_if_known", "label"], rows)

    rows = []
    if record.iterations:
        last = record.iterations[-1]
        for i, lam in enumerate(np.asarray(last.eigenvalues)):
            rows.append(["eigenvalue", i + 1, lam])
        if last.dim_errors is not None:
            for i, err in enumerate(np.asarray(last.dim_errors)):
                rows.append(["rmse", i + 1, err])
    _write_csv(out / "spectrum.csv", ["kind", "index", "value"], rows)
    if not quiet:
        print(f"wrote {out / 'history.csv'}, {out / 'features.csv'}, {out / 'spectrum.csv'}")


def cmd_run(args) -> int:
    doc = cfgmod.load_config(args.config)
    model = cfgmod.build_model(doc)
    spec = cfgmod.build_random_vector(doc, model.dimension)
    lcfg = cfgmod.build_learner_config(doc, seed_override=args.seed)
    out = _out_dir(doc, args)
    mode = doc["learner"].get("mode", "adaptive")

    try:
        record = run_adaptive(model, spec, lcfg)
    except LearnerError as exc:
        _write_report(out, _report_payload(doc, "aas_hgp", exc.record.to_dict()), args.quiet)
        print(f"error: {exc.record.error}", file=sys.stderr)
        return EXIT_ERROR
    _write_report(out, _report_payload(doc, "aas_hgp", record.to_dict()), args.quiet)
    _write_run_outputs(out, record, args.quiet)
    if not args.quiet:
        print(f"pf={record.pf:.6g} beta_g={record.beta_g:.4f} "
              f"n_s={record.n_s} d_r={record.final_d_r} stop={record.stop_reason}")
    if record.converged or mode == "global_doe":
        return EXIT_OK
    return EXIT_BUDGET


def cmd_mcs(args) -> int:
    doc = cfgmod.load_config(args.config)
    model = cfgmod.build_model(doc)
    spec = cfgmod.build_random_vector(doc, model.dimension)
    n = doc.get("baselines", {}).get("mcs_n", 1_000_000)
    seed = args.seed if args.seed is not None else doc["learner"].get("seed", 0)
    out = _out_dir(doc, args)
    result = mcs(model, spec, n, seed)
    _write_report(out, _report_payload(doc, "mcs", result.to_dict()), args.quiet)
    if not args.quiet:
        print(f"pf={result.pf:.6g} cov={result.cov:.4f} n={result.n}")
    return EXIT_OK


def cmd_form(args) -> int:
    doc = cfgmod.load_config(args.config)
    if not doc.get("baselines", {}).get("form", True):
        print("error: FORM is disabled in this config", file=sys.stderr)
        return EXIT_ERROR
    model = cfgmod.build_model(doc)
    spec = cfgmod.build_random_vector(doc, model.dimension)
    out = _out_dir(doc, args)
    result = form_hlrf(model, spec)
    _write_report(out, _report_payload(doc, "form", result.to_dict()), args.quiet)
    if not args.quiet:
        print(f"pf={result.pf:.6g} beta={result.beta:.6f} "
              f"iterations={result.iterations} converged={result.converged}")
    return EXIT_OK if result.converged else EXIT_BUDGET


def _load_report(run_dir: str) -> dict:
    path = Path(run_dir) / "report.json"
    if not path.exists():
        raise ConfigError(f"{path}: no report found")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def cmd_report(args) -> int:
    reports = [_load_report(d) for d in args.run_dirs]
    ref_idx = 0
    if args.ref is not None:
        reports.insert(0, _load_report(args.ref))
        args.run_dirs.insert(0, args.ref)
    pf_ref = reports[ref_idx].get("pf")
    header = ["run", "method", "pf", "beta_g", "n_s", "eps_p"]
    rows = []
    for d, rep in zip(args.run_dirs, reports):
        pf = rep.get("pf")
        beta = rep.get("beta_g", rep.get("beta"))
        if beta is None and pf is not None and 0 < pf < 1:
            from scipy.special import ndtri
            beta = float(-ndtri(pf))
        n_s = rep.get("n_s", rep.get("n"))
        eps_p = ""
        if pf is not None and pf_ref not in (None, 0):
            eps_p = abs(pf - pf_ref) / pf_ref
        rows.append([rep.get("name", d), rep.get("method", ""), pf, beta, n_s, eps_p])
    out = Path(args.out) if args.out is not None else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "comparison.csv", header, rows)
    lines = ["| " + " | ".join(header) + " |",
             "|" + "---|" * len(header)]
    for row in rows:
        cells = [f"{c:.6g}" if isinstance(c, float) else str(c) for c in row]
        lines.append("| " + " | ".join(cells) + " |")
    md = "\n".join(lines) + "\n"
    (out / "comparison.md").write_text(md, encoding="utf-8")
    if not args.quiet:
        print(md, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ashgp",
        description="Adaptive active-subspace hGP reliability analysis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--quiet", action="store_true")

    for name, fn, doc in [
        ("run", cmd_run, "adaptive surrogate run"),
        ("mcs", cmd_mcs, "crude Monte Carlo baseline"),
        ("form", cmd_form, "HL-RF first-order baseline"),
    ]:
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True,
                       help="config file path or bundled preset name")
        common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("report", help="comparison table across run directories")
    p.add_argument("run_dirs", nargs="+", help="run directories containing report.json")
    p.add_argument("--ref", help="reference run directory (default: first listed)")
    common(p)
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, InvalidParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # surface unexpected failures as exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
