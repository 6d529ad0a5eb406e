"""Convert the raw German Credit and COMPAS files into the CSV layout read by
`oim::tabular::load_csv`.

Raw sources (both redistributed inside the `responsibly` 0.1.2 wheel):
  german.data                     UCI Statlog (German Credit Data), CC BY 4.0
  compas-scores-two-years.csv     ProPublica COMPAS analysis repository

Usage: python3 scripts/prepare_datasets.py <german.data> <compas-scores-two-years.csv>
"""
import csv
import sys

GERMAN_COLUMNS = [
    "checking_status", "duration", "credit_history", "purpose", "credit_amount",
    "savings", "employment", "installment_rate", "status_sex", "other_debtors",
    "residence_since", "property", "age", "other_installment_plans", "housing",
    "existing_credits", "job", "people_liable", "telephone", "foreign_worker",
    "credit",
]
# A91 male div/sep, A92 female div/sep/married, A93 male single,
# A94 male married/widowed, A95 female single
SEX = {"A91": "male", "A92": "female", "A93": "male", "A94": "male", "A95": "female"}
SINGLE = {"A91": "not_single", "A92": "not_single", "A93": "single", "A94": "not_single", "A95": "single"}


def german(src, dst):
    with open(src) as fh, open(dst, "w", newline="") as out:
        w = csv.writer(out)
        header = [c if c != "status_sex" else "personal_status" for c in GERMAN_COLUMNS[:-1]]
        w.writerow(header + ["sex", "credit"])
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            rec = dict(zip(GERMAN_COLUMNS, parts))
            row = []
            for c in GERMAN_COLUMNS[:-1]:
                row.append(SINGLE[rec[c]] if c == "status_sex" else rec[c])
            credit = "good" if rec["credit"] == "1" else "bad"
            w.writerow(row + [SEX[rec["status_sex"]], credit])


def compas(src, dst):
    keep = ["c_charge_degree", "priors_count", "age", "race", "two_year_recid"]
    with open(src) as fh, open(dst, "w", newline="") as out:
        r = csv.reader(fh)
        header = next(r)
        # the raw file repeats `priors_count`; the first occurrence is used
        idx = {k: header.index(k) for k in keep}
        w = csv.writer(out)
        w.writerow(keep)
        for row in r:
            w.writerow([row[idx[k]] for k in keep])


if __name__ == "__main__":
    german(sys.argv[1], "data/german_credit.csv")
    compas(sys.argv[2], "data/compas.csv")
