#!/usr/bin/env python3
"""Writes the shipped OK-VQA-style fixture corpus and its manifest.

The manifest (relation counts, per-record CRC-32) is computed here, without
the C++ library, so tests can compare the library's histogram and
serializer against an independent recount.
"""
import json
import sys
import zlib
from pathlib import Path

RELATIONS = [
    "at_location", "next_to", "in_front_of", "surrounded_by", "covered_by", "includes", "holds",
    "has_property", "has_color", "made_of", "wears", "intends_to",
]

# (id, question, mentions, scene triples, concept triples, topic entities, gold answers)
FIXTURE = [
    ("okvqa-0001", "What season is it in this picture?",
     ["woman", "coat", "sakura", "tree"],
     [("woman", "wears", "coat"), ("coat", "has_color", "red"), ("sakura", "at_location", "tree"),
      ("woman", "in_front_of", "tree"), ("tree", "has_property", "blooming")],
     [("coat", "used_for", "keep warm"), ("sakura", "type_of", "spring blooming"), ("sakura", "related_to", "spring"),
      ("tree", "related_to", "spring"), ("season", "related_to", "spring")],
     ["season"], [("spring", 1.0)]),
    ("okvqa-0002", "What is the man holding used for?",
     ["man", "umbrella", "street", "rain"],
     [("man", "holds", "umbrella"), ("umbrella", "has_color", "black"), ("man", "at_location", "street"),
      ("street", "covered_by", "rain"), ("man", "wears", "jacket")],
     [("umbrella", "used_for", "keep dry"), ("rain", "related_to", "wet"), ("street", "used_for", "driving")],
     [], [("keep dry", 1.0)]),
    ("okvqa-0003", "What animal is this?",
     ["dog", "frisbee", "grass", "park"],
     [("dog", "holds", "frisbee"), ("dog", "has_color", "brown"), ("dog", "at_location", "grass"),
      ("grass", "includes", "park"), ("frisbee", "made_of", "plastic"), ("dog", "intends_to", "play")],
     [("dog", "is_a", "pet"), ("dog", "is_a", "animal"), ("frisbee", "used_for", "play"), ("park", "has_a", "grass")],
     ["animal"], [("dog", 1.0), ("pet", 0.6)]),
    ("okvqa-0004", "What is the vehicle made of?",
     ["bus", "road", "building", "windows"],
     [("bus", "at_location", "road"), ("bus", "next_to", "building"), ("bus", "includes", "windows"),
      ("bus", "has_color", "yellow"), ("building", "made_of", "brick"), ("windows", "made_of", "glass")],
     [("bus", "made_of", "metal"), ("metal", "related_to", "steel"), ("bus", "is_a", "vehicle"),
      ("building", "made_of", "brick"),
      ("windows", "made_of", "glass")],
     ["vehicle"], [("metal", 1.0), ("steel", 0.6)]),
    ("okvqa-0005", "Which sport is being played?",
     ["player", "racket", "court", "net", "ball"],
     [("player", "holds", "racket"), ("player", "at_location", "court"), ("net", "next_to", "player"),
      ("court", "surrounded_by", "fence"), ("ball", "has_color", "yellow"), ("player", "wears", "shorts"),
      ("player", "intends_to", "hit ball")],
     [("racket", "used_for", "tennis"), ("court", "used_for", "tennis"), ("ball", "used_for", "tennis"),
      ("net", "part_of", "court")],
     [], [("tennis", 1.0)]),
    ("okvqa-0006", "What food is on the plate?",
     ["plate", "pizza", "table", "fork"],
     [("pizza", "at_location", "plate"), ("plate", "at_location", "table"), ("fork", "next_to", "plate"),
      ("pizza", "has_property", "sliced"), ("pizza", "includes", "cheese"), ("table", "made_of", "wood"),
      ("plate", "has_color", "white")],
     [("pizza", "is_a", "food"), ("pizza", "has_a", "cheese"), ("fork", "used_for", "eating"),
      ("plate", "used_for", "serving food")],
     ["food"], [("pizza", 1.0)]),
    ("okvqa-0007", "Where would you find this animal in the wild?",
     ["zebra", "fence", "field"],
     [("zebra", "in_front_of", "fence"), ("zebra", "at_location", "field"), ("zebra", "has_property", "striped"),
      ("field", "surrounded_by", "trees"), ("fence", "covered_by", "vines")],
     [("zebra", "at_location", "africa"), ("zebra", "at_location", "savanna"), ("zebra", "is_a", "animal"),
      ("field", "related_to", "grass")],
     ["animal"], [("africa", 1.0), ("savanna", 0.6)]),
    ("okvqa-0008", "What is the girl going to do with the kite?",
     ["girl", "kite", "beach", "sky"],
     [("girl", "holds", "kite"), ("girl", "at_location", "beach"), ("kite", "in_front_of", "sky"),
      ("kite", "has_color", "rainbow"), ("girl", "wears", "hat"), ("girl", "intends_to", "fly kite"),
      ("beach", "includes", "sand"), ("sky", "has_property", "clear")],
     [("kite", "used_for", "fly"), ("beach", "has_a", "sand"), ("sky", "related_to", "blue")],
     [], [("fly", 1.0)]),
]


def record(entry):
    ident, question, mentions, scene_triples, concept_triples, topics, gold = entry
    scene_entities = set(mentions)
    for h, _, t in scene_triples:
        scene_entities.update((h, t))
    # Mentions and topic entities are the linking seeds, so they are always concept entities.
    concept_entities = set(mentions) | set(topics)
    for h, _, t in concept_triples:
        concept_entities.update((h, t))
    for answer, _ in gold:
        assert answer in concept_entities, (ident, answer)
    return {
        "id": ident,
        "scene": {
            "entities": sorted(scene_entities),
            "triples": [list(t) for t in scene_triples],
            "mentions": list(mentions),
        },
        "concept": {
            "entities": sorted(concept_entities),
            "triples": [list(t) for t in concept_triples],
            "provenance": ["kg"] * len(concept_triples),
        },
        "question": question,
        "topic_entities": list(topics),
        "gold_answers": [{"entity": a, "weight": w} for a, w in gold],
    }


def main(out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = out_dir / "okvqa_sample.jsonl"
    lines = [json.dumps(record(e), separators=(",", ":"), ensure_ascii=False) for e in FIXTURE]
    corpus.write_text("".join(line + "\n" for line in lines), encoding="utf-8")

    counts = {r: 0 for r in RELATIONS}
    for entry in FIXTURE:
        for _, rel, _ in entry[3]:
            counts[rel] += 1
    manifest = {
        "format": "mail-corpus-manifest",
        "version": 1,
        "instances": [
            {"id": e[0], "crc32": "%08x" % (zlib.crc32(line.encode("utf-8")) & 0xFFFFFFFF)}
            for e, line in zip(FIXTURE, lines)
        ],
        "relation_counts": counts,
        "total_scene_triples": sum(counts.values()),
    }
    (out_dir / "okvqa_sample.jsonl.manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "fixtures")
