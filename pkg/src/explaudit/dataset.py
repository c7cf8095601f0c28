"""Audit dataset construction and ingestion.

Canonical record schema (CSV header or JSONL keys):
``pair_id, subgroup, text, label``. Paired datasets hold two subgroup
variants per pair id; unpaired data (COMPAS-style) uses one row per
record with an empty pair id. Also provides the tabular-row-to-text
converter for COMPAS-style data and a synthetic paired-corpus generator
for desk-scale experiments.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

#: (male form, female form) pairs used by the synthetic generator and the
#: gender-tied embedding mode.
GENDER_PAIRS = (
    ("he", "she"), ("him", "her"), ("his", "hers"), ("himself", "herself"),
    ("man", "woman"), ("men", "women"), ("boy", "girl"),
    ("brother", "sister"), ("father", "mother"), ("son", "daughter"),
    ("uncle", "aunt"), ("king", "queen"), ("actor", "actress"),
    ("mr", "ms"), ("sir", "madam"),
)

#: pronouns whose male/female forms do not map one-to-one (e.g. "her"
#: covers both "him" and "his"), collapsed onto a single token when tying
_PRONOUNS = ("he", "she", "him", "his", "her", "hers", "himself", "herself")

#: every token that may differ between the two variants of a pair
GENDER_WORDS = frozenset(_PRONOUNS) | frozenset(
    w for pair in GENDER_PAIRS for w in pair)

SUBGROUP_A = "MALE"
SUBGROUP_B = "FEMALE"

INJECTIONS = ("NONE", "LENGTH", "NOISE")


@dataclass
class PairedRecord:
    pair_id: str
    text_a: str
    text_b: str
    label_a: str
    label_b: str
    subgroup_a: str = SUBGROUP_A
    subgroup_b: str = SUBGROUP_B

    def variants(self):
        return ((self.subgroup_a, self.text_a, self.label_a),
                (self.subgroup_b, self.text_b, self.label_b))


@dataclass
class UnpairedRecord:
    text: str
    subgroup: str
    label: str


@dataclass
class DatasetSplit:
    train: list
    test: list
    seed: int
    ratio: float


def tied_alias_map():
    """Token aliases collapsing gendered words onto shared embedding rows.

    Pronouns all map to one token ("her" is the counterpart of both "him"
    and "his", so a one-to-one mapping cannot make paired sentences
    identical); each gendered noun pair maps to its male form.
    """
    aliases = {p: "he" for p in _PRONOUNS}
    for male, female in GENDER_PAIRS:
        if male not in aliases:
            aliases[female] = male
    return aliases


# ---------------------------------------------------------------------------
# Loading / saving


def _rows_from_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        missing = {"pair_id", "subgroup", "text", "label"} \
            - set(reader.fieldnames)
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row


def _rows_from_jsonl(path):
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            missing = {"pair_id", "subgroup", "text", "label"} - set(row)
            if missing:
                raise DataError(
                    f"{path}:{lineno}: missing keys {sorted(missing)}")
            yield lineno, row


def load_paired(path, fmt="csv"):
    """Load PairedRecords from canonical CSV or JSONL.

    Errors (missing column, duplicate pair/subgroup, empty text) name the
    offending line.
    """
    if fmt not in ("csv", "jsonl"):
        raise ConfigError(f"unknown format: {fmt}")
    rows = _rows_from_csv(path) if fmt == "csv" else _rows_from_jsonl(path)
    pairs = {}
    order = []
    for lineno, row in rows:
        pid, sub = str(row["pair_id"]), str(row["subgroup"])
        text, label = str(row["text"]), str(row["label"])
        if not text.strip():
            raise DataError(f"{path}:{lineno}: empty text")
        if pid not in pairs:
            order.append(pid)
        variants = pairs.setdefault(pid, {})
        if sub in variants:
            raise DataError(
                f"{path}:{lineno}: duplicate pair_id {pid!r} for "
                f"subgroup {sub!r}")
        variants[sub] = (text, label)
    records = []
    for pid in order:
        variants = pairs[pid]
        if len(variants) != 2:
            raise DataError(
                f"{path}: pair {pid!r} has {len(variants)} variant(s), "
                "expected 2")
        (sub_a, (text_a, lab_a)), (sub_b, (text_b, lab_b)) = \
            sorted(variants.items(), key=lambda kv: _subgroup_order(kv[0]))
        records.append(PairedRecord(pid, text_a, text_b, lab_a, lab_b,
                                    sub_a, sub_b))
    if not records:
        raise DataError(f"{path}: no records")
    return records


def _subgroup_order(sub):
    # canonical A/B ordering: MALE before FEMALE, else lexicographic
    return {SUBGROUP_A: 0, SUBGROUP_B: 1}.get(sub, 2), sub


def load_unpaired(path, fmt="csv"):
    rows = _rows_from_csv(path) if fmt == "csv" else _rows_from_jsonl(path)
    records = []
    for lineno, row in rows:
        text = str(row["text"])
        if not text.strip():
            raise DataError(f"{path}:{lineno}: empty text")
        records.append(UnpairedRecord(text, str(row["subgroup"]),
                                      str(row["label"])))
    if not records:
        raise DataError(f"{path}: no records")
    return records


def save_paired(records, path, fmt="csv"):
    rows = []
    for rec in records:
        for sub, text, label in rec.variants():
            rows.append({"pair_id": rec.pair_id, "subgroup": sub,
                         "text": text, "label": label})
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.DictWriter(f, ["pair_id", "subgroup", "text", "label"])
            w.writeheader()
            w.writerows(rows)
    elif fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as f:
            for row in rows:
                f.write(json.dumps(row) + "\n")
    else:
        raise ConfigError(f"unknown format: {fmt}")


# ---------------------------------------------------------------------------
# COMPAS conversion

_COMPAS_REQUIRED = ("priors", "score_factor", "under_45", "under_25",
                    "race", "sex")


def compas_row_to_text(row):
    """Convert one COMPAS-style field map to its comma-separated string.

    Required fields: priors, score_factor, under_45, under_25, race, sex.
    Optional: misdemeanor. Age and charge clauses appear only when true.
    """
    missing = [k for k in _COMPAS_REQUIRED if k not in row]
    if missing:
        raise DataError(f"missing COMPAS fields: {missing}")
    parts = [f"{int(row['priors'])} priors",
             f"score factor {int(row['score_factor'])}"]
    if _truthy(row["under_45"]):
        parts.append("under 45")
    if _truthy(row["under_25"]):
        parts.append("under 25")
    parts.append(str(row["race"]))
    parts.append(str(row["sex"]))
    if _truthy(row.get("misdemeanor", False)):
        parts.append("misdemeanor")
    return ", ".join(parts)


def _truthy(v):
    if isinstance(v, str):
        return v.strip().lower() in ("1", "true", "yes", "y")
    return bool(v)


# ---------------------------------------------------------------------------
# Splitting


def split(data, ratio=0.8, seed=0):
    """Deterministic stratified train/test split.

    Units are whole records; paired variants always land on the same side.
    Stratification is by label (for pairs: the sorted label signature), so
    per-class counts on each side differ by at most one record.
    """
    data = list(data)
    if not data:
        raise DataError("cannot split empty dataset")
    if not 0 < ratio < 1:
        raise ConfigError("ratio must be in (0, 1)")

    def signature(rec):
        if isinstance(rec, PairedRecord):
            return tuple(sorted((rec.label_a, rec.label_b)))
        return (rec.label,)

    strata = {}
    for rec in data:
        strata.setdefault(signature(rec), []).append(rec)

    rng = np.random.default_rng(seed)
    train, test = [], []
    for sig in sorted(strata):
        bucket = strata[sig]
        order = rng.permutation(len(bucket))
        n_train = round(len(bucket) * ratio)
        for pos, idx in enumerate(order):
            (train if pos < n_train else test).append(bucket[idx])
    if not train or not test:
        raise DataError("split produced an empty side; need more records")
    return DatasetSplit(train=train, test=test, seed=seed, ratio=ratio)


# ---------------------------------------------------------------------------
# Synthetic paired corpus

#: Templates use {g0}, {g1}, ... slots, filled left to right with gendered
#: word pairs chosen per template. Non-slot text is shared by both variants.
DEFAULT_TEMPLATES = (
    "{g0} runs the corner bakery and {g1} loves the morning rush",
    "yesterday {g0} fixed the old radio in the attic",
    "{g0} writes long letters to {g1} every winter",
    "the neighbors say {g0} paints the fence each spring",
    "{g0} studied the map before the long drive north",
    "after dinner {g0} read quietly by the window",
    "{g0} planted tomatoes while {g1} watered the roses",
    "every friday {g0} visits the library downtown",
    "{g0} repaired the bicycle and rode it to the lake",
    "at the market {g0} bargained for fresh apples",
    "{g0} taught the evening class on river ecology",
    "during the storm {g0} secured the garden gate",
)

_FILLER = ("indeed", "certainly", "moreover", "however", "meanwhile",
           "notably", "apparently", "eventually")

_NOISE = ("gravel", "lantern", "meadow", "harbor", "thicket", "orchard")

_SLOT_WORDS = {
    "g0": [("he", "she"), ("the man", "the woman"),
           ("her brother", "his sister"), ("the actor", "the actress")],
    "g1": [("his father", "her mother"), ("him", "her"),
           ("the boy", "the girl"), ("his uncle", "her aunt")],
}


def generate_synthetic_paired(n_pairs, injection="NONE", seed=0,
                              templates=None):
    """Generate gendered sentence pairs with an optional disparity injection.

    NONE: the two variants differ only in gender words. LENGTH: filler
    tokens are appended to the female variant. NOISE: a noise token is
    inserted into the female variant's non-gender text.
    """
    injection = injection.upper()
    if injection not in INJECTIONS:
        raise ConfigError(f"unknown injection: {injection}")
    if n_pairs < 1:
        raise ConfigError("n_pairs must be >= 1")
    templates = list(templates or DEFAULT_TEMPLATES)
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_pairs):
        template = templates[int(rng.integers(len(templates)))]
        fills_m, fills_f = {}, {}
        for slot in ("g0", "g1"):
            if "{" + slot + "}" in template:
                male, female = _SLOT_WORDS[slot][
                    int(rng.integers(len(_SLOT_WORDS[slot])))]
                fills_m[slot], fills_f[slot] = male, female
        text_m = template.format(**fills_m)
        text_f = template.format(**fills_f)
        if injection == "LENGTH":
            extra = 2 + int(rng.integers(4))
            picks = rng.integers(len(_FILLER), size=extra)
            text_f = text_f + " " + " ".join(_FILLER[p] for p in picks)
        elif injection == "NOISE":
            words = text_f.split()
            pos = int(rng.integers(len(words)))
            noise = _NOISE[int(rng.integers(len(_NOISE)))]
            words.insert(pos, noise)
            text_f = " ".join(words)
        records.append(PairedRecord(
            pair_id=f"pair{i:05d}", text_a=text_m, text_b=text_f,
            label_a="male", label_b="female"))
    return records
