#!/usr/bin/env python3
"""Regenerates data/toy: a small five-city offensive-language corpus, an
embeddings cache for it, and example configs. Output is deterministic."""

import hashlib
import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "toy"

OFFENSIVE = ["idiot", "stupid", "trash", "moron", "loser", "pathetic", "dumb", "clown", "garbage", "jerk"]
NEUTRAL = ["coffee", "traffic", "park", "game", "weather", "music", "tacos", "sunset", "bus", "festival",
           "river", "library", "team", "concert", "bike", "market", "pizza", "museum", "rain", "brunch"]
FILLER = ["the", "this", "is", "so", "really", "today", "again", "my", "our", "what", "a", "at", "with"]
# Ironic posts carry a marker word and the opposite label, so a lexical base
# model gets them wrong while an error model can learn the marker.
IRONY = ["lol", "jk", "haha", "smh"]
# (city, local words, share of ironic posts)
CITIES = [
    ("austin", ["bbq", "sxsw", "lake", "capitol"], 0.15),
    ("boston", ["harbor", "fenway", "chowder", "commons"], 0.05),
    ("chicago", ["loop", "deepdish", "lakefront", "el"], 0.20),
    ("denver", ["rockies", "altitude", "trail", "snow"], 0.30),
    ("seattle", ["ferry", "sound", "drizzle", "pike"], 0.40),
]
LABEL_NOISE = 0.03
PER_CITY = 200
DIM = 8


def word_vector(word):
    digest = hashlib.sha256(word.encode()).digest()
    return [(b - 127.5) / 127.5 for b in digest[:DIM]]


def embed(words):
    acc = [0.0] * DIM
    for w in words:
        for i, x in enumerate(word_vector(w)):
            acc[i] += x
    return [round(x, 6) for x in acc]


def make_text(rng, offensive, local, ironic):
    words = [rng.choice(IRONY) if ironic else rng.choice(FILLER), rng.choice(NEUTRAL), rng.choice(local)]
    if offensive:
        words += [rng.choice(OFFENSIVE), rng.choice(FILLER)]
    else:
        words += [rng.choice(NEUTRAL), rng.choice(FILLER)]
    rng.shuffle(words)
    return " ".join(words)


def main():
    rng = random.Random(7)
    records = []
    for city, local, irony_rate in CITIES:
        for i in range(PER_CITY):
            offensive = i % 2 == 0
            ironic = rng.random() < irony_rate
            text = make_text(rng, offensive, local, ironic)
            flipped = ironic != (rng.random() < LABEL_NOISE)
            label = "offensive" if offensive != flipped else "not offensive"
            records.append({"id": f"{city}-{i:03d}", "text": text, "label": label, "domain": city})

    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "corpus.jsonl", "w") as f:
        for r in records:
            f.write(json.dumps(r, sort_keys=True) + "\n")

    vectors = {"label:offensive": embed(OFFENSIVE), "label:not offensive": embed(NEUTRAL)}
    for r in records:
        vectors["text:" + r["id"]] = embed(r["text"].split())
    with open(OUT / "embeddings.jsonl", "w") as f:
        for key in sorted(vectors):
            f.write(json.dumps({"key": key, "vector": vectors[key]}, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
