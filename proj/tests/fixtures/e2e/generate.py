#!/usr/bin/env python3
"""Regenerate the bundled end-to-end fixture.

Deterministic: rerunning produces byte-identical files. The corpus mentions
entities by their exact canonical names so the pipeline has real signal to
retrieve against, and every document repeats one mention to exercise
per-document synthesis.
"""

import json
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent

ADJECTIVES = [
    "acute", "chronic", "benign", "malign", "focal", "diffuse", "primary",
    "secondary", "latent", "severe", "mild", "recurrent", "congenital",
    "idiopathic", "systemic", "localized", "atypical", "juvenile", "senile",
    "transient",
]
NOUNS = [
    "nodule", "lesion", "fibrosis", "stenosis", "edema", "atrophy",
    "necrosis", "sclerosis", "dysplasia", "neuropathy",
]
TYPES = ["disease", "finding", "procedure", "chemical", "anatomy"]


def entity_name(i: int) -> str:
    return f"{ADJECTIVES[i % 20]} {NOUNS[i // 20]}"


def entity_id(i: int) -> str:
    return f"C{i + 1:04d}"


def write_kb() -> None:
    lines = []
    for i in range(200):
        name = entity_name(i)
        record = {
            "id": entity_id(i),
            "name": name,
            "aliases": [],
            "types": [TYPES[i % len(TYPES)]],
        }
        if i % 4 == 0:
            record["aliases"] = [name.replace(" ", "-")]
        if i % 2 == 0:
            record["description"] = (
                f"a {ADJECTIVES[i % 20]} presentation of {NOUNS[i // 20]} "
                f"documented in the reference literature"
            )
        lines.append(json.dumps(record))
    (HERE / "kb.jsonl").write_text("\n".join(lines) + "\n")


def write_mapping() -> None:
    mapping_lines = []
    gold_lines = []
    for i in range(1, 200, 2):  # the undescribed half
        source = entity_id(i)
        target = entity_id((i + 1) % 200)
        mapping_lines.append(
            json.dumps(
                {
                    "source_id": source,
                    "target_id": target,
                    "target_types": [f"extended {TYPES[i % len(TYPES)]}"],
                    "target_description": (
                        f"cross resource notes describing {entity_name(i)} "
                        f"in considerably more detail than the original entry"
                    ),
                }
            )
        )
        gold_lines.append(f"{source}\t{target}")
    (HERE / "mapping.jsonl").write_text("\n".join(mapping_lines) + "\n")
    (HERE / "gold_mapping.tsv").write_text("\n".join(gold_lines) + "\n")


def write_corpus() -> None:
    rng = random.Random(7)
    docs = []
    for d in range(50):
        picks = rng.sample(range(200), 3)
        names = [entity_name(p) for p in picks]
        ids = [entity_id(p) for p in picks]

        text = ""
        mentions = []

        def emit(piece: str, gold: str = "") -> None:
            nonlocal text
            if gold:
                mentions.append(
                    {
                        "start_char": len(text),
                        "end_char": len(text) + len(piece),
                        "gold_id": gold,
                    }
                )
            text += piece

        emit("The record notes ")
        emit(names[0], ids[0])
        emit(" during the visit. Later findings mention ")
        emit(names[1], ids[1])
        emit(" and also ")
        emit(names[0], ids[0])
        emit(" again. A final note lists ")
        emit(names[2], ids[2])
        emit(" before discharge.")

        docs.append(
            json.dumps({"doc_id": f"doc{d:03d}", "text": text, "mentions": mentions})
        )
    (HERE / "raw.jsonl").write_text("\n".join(docs) + "\n")


if __name__ == "__main__":
    write_kb()
    write_mapping()
    write_corpus()
    print("wrote kb.jsonl, mapping.jsonl, gold_mapping.tsv, raw.jsonl")
