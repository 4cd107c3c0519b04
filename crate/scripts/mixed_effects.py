#!/usr/bin/env python3
"""Fit p_correct on the z-normalized trial features with crossed random
intercepts for participant and paragraph.

usage: mixed_effects.py features.tsv [--schema-only]

Exit status 2 means the table does not match the expected schema.
"""

import argparse
import sys
import warnings

import numpy as np
import pandas as pd

PREDICTORS = [
    "tfd_before_span",
    "tfd_within_span",
    "tfd_after_span",
    "position_in_experiment",
    "comprehension_score",
    "paragraph_length",
    "span_length",
    "span_location",
    "difficulty_level",
    "question_span_rouge1_precision",
]
KEYS = ["trial_key", "participant_id", "article_id", "paragraph_id", "level"]
REQUIRED = KEYS + PREDICTORS + ["p_correct"] + ["z_" + p for p in PREDICTORS]


def check_schema(df):
    missing = [c for c in REQUIRED if c not in df.columns]
    if missing:
        return "missing columns: " + ", ".join(missing)
    numeric = PREDICTORS + ["p_correct"] + ["z_" + p for p in PREDICTORS]
    bad = [c for c in numeric if not np.issubdtype(df[c].dtype, np.number)]
    if bad:
        return "non-numeric columns: " + ", ".join(bad)
    if df[numeric].isna().any().any():
        return "missing values in numeric columns"
    if not df["p_correct"].between(0, 1).all():
        return "p_correct outside [0, 1]"
    for p in PREDICTORS:
        z = df["z_" + p]
        if z.std() > 0 and (abs(z.mean()) > 1e-6 or abs(z.std() - 1) > 1e-6):
            return "z_%s is not standardized" % p
    return None


def fit(df):
    import statsmodels.formula.api as smf

    used = [p for p in PREDICTORS if df["z_" + p].std() > 0]
    df = df.assign(paragraph=df["article_id"].astype(str) + ":" + df["paragraph_id"].astype(str), const_group=1)
    formula = "p_correct ~ " + (" + ".join("z_" + p for p in used) if used else "1")
    model = smf.mixedlm(
        formula,
        df,
        groups="const_group",
        re_formula="0",
        vc_formula={"participant": "0 + C(participant_id)", "paragraph": "0 + C(paragraph)"},
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = model.fit(method="lbfgs")
    return used, result


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("table")
    ap.add_argument("--schema-only", action="store_true")
    args = ap.parse_args()
    df = pd.read_csv(args.table, sep="\t", dtype={"participant_id": str, "article_id": str, "paragraph_id": str})
    err = check_schema(df)
    if err:
        print("schema error: " + err, file=sys.stderr)
        return 2
    print("schema ok: %d rows" % len(df))
    if args.schema_only:
        return 0
    used, result = fit(df)
    dropped = [p for p in PREDICTORS if p not in used]
    if dropped:
        print("constant predictors dropped: " + ", ".join(dropped))
    print("term\tcoef\tse\tp")
    for term in result.fe_params.index:
        print("%s\t%.6g\t%.6g\t%.6g" % (term, result.fe_params[term], result.bse[term], result.pvalues[term]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
