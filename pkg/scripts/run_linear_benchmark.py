"""Linear Gaussian benchmark with a known exact answer.

The response is y = beta0*sqrt(D) - sum(x_j) with standard-normal
inputs, so the failure probability P(y >= 0) for beta0 = -3 is exactly
Phi(-3) ~= 1.35e-3 and the single active direction is 1/sqrt(D).
Compares MCS, FORM, and the adaptive surrogate against the exact value.

Usage: python scripts/run_linear_benchmark.py [--seed 0]
"""

import argparse

import numpy as np
from scipy.special import ndtr

from ashgp.baselines import form_hlrf, mcs
from ashgp.config import build_learner_config, build_model, build_random_vector, load_config
from ashgp.learner import run_adaptive


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    doc = load_config("appendixA_d100")
    model = build_model(doc)
    spec = build_random_vector(doc, model.dimension)
    exact = float(ndtr(-3.0))

    ref = mcs(model, spec, doc["baselines"]["mcs_n"], args.seed)
    form = form_hlrf(model, spec)
    rec = run_adaptive(model, spec, build_learner_config(doc, seed_override=args.seed))

    print(f"exact    pf={exact:.6e}")
    print(f"mcs      pf={ref.pf:.6e}  cov={ref.cov:.3f}")
    print(f"form     pf={form.pf:.6e}  beta={form.beta:.6f}  iters={form.iterations}")
    print(f"aas_hgp  pf={rec.pf:.6e}  n_s={rec.n_s}  d_r={rec.final_d_r}")
    print(f"aas_hgp relative error vs exact: {abs(rec.pf - exact) / exact:.2%}")
    print(f"form |beta - 3| = {abs(np.float64(form.beta) - 3.0):.2e}")


if __name__ == "__main__":
    main()
