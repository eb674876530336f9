"""25-bar space truss: crude MCS vs the adaptive surrogate.

The 57-dimensional input collects 7 loads, 25 elastic moduli, and 25
cross-section areas; failure is a monitored-node displacement exceeding
the threshold.

Usage: python scripts/run_truss.py [--seed 0] [--mcs-n 100000]
"""

import argparse

from ashgp.baselines import mcs
from ashgp.config import build_learner_config, build_model, build_random_vector, load_config
from ashgp.learner import run_adaptive


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--mcs-n", type=int, default=100_000)
    args = ap.parse_args()

    doc = load_config("truss25")
    model = build_model(doc)
    spec = build_random_vector(doc, model.dimension)

    ref = mcs(model, spec, args.mcs_n, args.seed)
    rec = run_adaptive(model, spec, build_learner_config(doc, seed_override=args.seed))
    rel = abs(rec.pf - ref.pf) / ref.pf if ref.pf > 0 else float("inf")
    print(f"mcs      pf={ref.pf:.4e}  cov={ref.cov:.3f}  n={ref.n}")
    print(f"aas_hgp  pf={rec.pf:.4e}  n_s={rec.n_s}  d_r={rec.final_d_r}  "
          f"stop={rec.stop_reason}")
    print(f"relative error vs mcs: {rel:.2%}")


if __name__ == "__main__":
    main()
