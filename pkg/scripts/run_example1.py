"""Separable-product benchmark: crude MCS vs the adaptive surrogate.

Runs the bundled example1 presets for the requested dimensions and
prints a side-by-side failure-probability table.

Usage: python scripts/run_example1.py [--dims 30 50 100] [--seed 0]
"""

import argparse

from ashgp.baselines import mcs
from ashgp.config import build_learner_config, build_model, build_random_vector, load_config
from ashgp.learner import run_adaptive


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", type=int, nargs="+", default=[30, 50, 100])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mcs-n", type=int, default=1_000_000)
    args = ap.parse_args()

    print(f"{'D':>4} {'pf_mcs':>12} {'pf_aas_hgp':>12} {'rel_err':>8} {'n_s':>5} {'d_r':>4}")
    for d in args.dims:
        doc = load_config(f"example1_d{d}")
        model = build_model(doc)
        spec = build_random_vector(doc, model.dimension)
        ref = mcs(model, spec, args.mcs_n, args.seed)
        rec = run_adaptive(model, spec, build_learner_config(doc, seed_override=args.seed))
        rel = abs(rec.pf - ref.pf) / ref.pf
        print(f"{d:>4} {ref.pf:>12.4e} {rec.pf:>12.4e} {rel:>7.2%} {rec.n_s:>5} {rec.final_d_r:>4}")


if __name__ == "__main__":
    main()
