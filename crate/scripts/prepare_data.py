#!/usr/bin/env python3
"""Build the Adult and COMPAS CSV files under data/ from the raw public files.

The raw files are taken from the `responsibly` wheel, which vendors the UCI
Adult files (adult.data, adult.test) and ProPublica's
compas-scores-two-years.csv. Usage:

    pip download --no-deps responsibly==0.1.2 -d /tmp/wheel
    python3 scripts/prepare_data.py /tmp/wheel/responsibly-0.1.2-py3-none-any.whl

Adult: train and test files are concatenated, whitespace is trimmed, the
trailing '.' on test labels is removed and '?' becomes an empty cell. Rows
with missing cells are dropped later by the loader.

COMPAS: ProPublica's screening filter (|days_b_screening_arrest| <= 30,
is_recid != -1, c_charge_degree != 'O', score_text != 'N/A') is applied and
the race column is restricted to African-American and Caucasian.
"""
import csv
import io
import sys
import zipfile

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education_num",
    "marital_status", "occupation", "relationship", "race", "sex",
    "capital_gain", "capital_loss", "hours_per_week", "native_country",
    "income",
]

COMPAS_COLUMNS = [
    "sex", "age", "race", "juv_fel_count", "juv_misd_count",
    "juv_other_count", "priors_count", "c_charge_degree", "two_year_recid",
]


def adult_rows(text):
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("|"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(ADULT_COLUMNS):
            continue
        cells[-1] = cells[-1].rstrip(".")
        yield ["" if c == "?" else c for c in cells]


def main(wheel):
    z = zipfile.ZipFile(wheel)
    base = "responsibly/dataset/"
    with open("data/adult.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ADULT_COLUMNS)
        n = 0
        for name in ("adult/adult.data", "adult/adult.test"):
            for row in adult_rows(z.read(base + name).decode("utf-8")):
                w.writerow(row)
                n += 1
    print("adult rows:", n)

    raw = csv.DictReader(io.StringIO(
        z.read(base + "compas/compas-scores-two-years.csv").decode("utf-8")))
    with open("data/compas.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(COMPAS_COLUMNS)
        n = 0
        for r in raw:
            days = r["days_b_screening_arrest"]
            if days == "" or not -30 <= float(days) <= 30:
                continue
            if r["is_recid"] == "-1" or r["c_charge_degree"] == "O":
                continue
            if r["score_text"] == "N/A":
                continue
            if r["race"] not in ("African-American", "Caucasian"):
                continue
            w.writerow([r[c] for c in COMPAS_COLUMNS])
            n += 1
    print("compas rows:", n)


if __name__ == "__main__":
    main(sys.argv[1])
