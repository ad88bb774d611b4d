"""Regenerate the synthetic 200-row CRF-shaped CSV shipped in fairkit/data/crf.

The rows are random but seeded; they imitate an admission / follow-up /
outcome case record form and contain no real patient data.
"""

import csv
import random
from datetime import date, timedelta
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "fairkit" / "data" / "crf" / "crf.csv"
COLUMNS = [
    "patient_id", "site", "age", "sex", "admission_date", "fever", "temperature",
    "oxygen_saturation", "icu_admission", "comorbidity", "outcome", "outcome_date", "notes",
]
NOTES = [
    "", "", "", "stable", "required oxygen, then improved",
    'family reports "mild" symptoms', "transferred from clinic\nsecond line of note",
    "febre alta na admissão", "no remarks; see chart",
]


def main(rows=200, seed=20201):
    rng = random.Random(seed)
    records = []
    for i in range(1, rows + 1):
        admitted = date(2020, 4, 1) + timedelta(days=rng.randrange(120))
        stay = rng.randrange(2, 30)
        outcome = rng.choices(["discharged", "death", "transfer", "hospitalized", ""], [60, 15, 10, 10, 5])[0]
        age = str(rng.randrange(18, 95))
        if rng.random() < 0.05:
            age = ""
        elif rng.random() < 0.05:
            age = age.zfill(3)
        records.append([
            f"P{i:04d}",
            rng.choice(["RJ-01", "RJ-02", "SP-01"]),
            age,
            rng.choices(["male", "female", "unknown", ""], [48, 48, 3, 1])[0],
            admitted.isoformat(),
            rng.choice(["true", "false", "1", "0", ""]),
            "" if rng.random() < 0.1 else f"{rng.uniform(35.5, 40.5):.2f}",
            "" if rng.random() < 0.1 else str(rng.randrange(70, 100)),
            rng.choice(["true", "false", ""]),
            rng.choices(["", "diabetes", "hypertension", "asthma", "obesity"], [40, 20, 20, 10, 10])[0],
            outcome,
            (admitted + timedelta(days=stay)).isoformat() if outcome and outcome != "hospitalized" else "",
            rng.choice(NOTES),
        ])
    # deliberate type errors, recorded as row errors at ingest
    records[6][2] = "abc"
    records[41][6] = "38,5"
    records[99][4] = "2020-13-01"
    with OUT.open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\r\n")
        w.writerow(COLUMNS)
        w.writerows(records)


if __name__ == "__main__":
    main()
