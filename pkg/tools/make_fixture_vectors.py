"""Regenerate the bundled fixture word vectors.

Words in one topical group share a weak common direction; synonym groups share a
strong one.  Every non-synonym pair is rejection-sampled below ``MAX_OFF_PAIR``
cosine so the bundled matcher never conflates distinct object categories.

    python tools/make_fixture_vectors.py
"""

from pathlib import Path

import numpy as np

DIM = 64
SEED = 20240601
TOPIC_WEIGHT = 0.45
SYNONYM_NOISE = 0.35
MAX_OFF_PAIR = 0.42

TOPICS = {
    "people": "person man woman boy girl child kid player skier surfer rider people crowd group family",
    "animal": "animal dog puppy cat kitten horse cow sheep bird elephant zebra giraffe bear rhino mouse duck",
    "vehicle": "vehicle car automobile truck bus motorcycle bicycle bike train airplane plane aircraft boat ship vessel rocket",
    "furniture": "furniture chair seat bench sofa couch table desk bed shelf cabinet",
    "kitchen": "cup mug bottle vase bowl box container basket glass plate fork knife spoon pot jar",
    "food": "food pizza sandwich cake donut fruit banana apple orange vegetable broccoli carrot bread meat",
    "drink": "drink beverage beer wine coffee juice water tea soda",
    "device": "device computer laptop notebook phone cellphone television tv keyboard remote monitor screen clock",
    "sport": "ball basketball football baseball racket frisbee kite skateboard surfboard hoop net equipment toy",
    "nature": "plant flower rose tulip tree grass sky cloud water mountain beach field",
    "home": "book umbrella lamp window door wall floor room kitchen bathroom bathtub tub sink toilet fixture mirror",
    "clothing": "shirt hat jacket shoe bag backpack tie dress",
    "place": "street road city building house park sign light pole fence",
}

SYNONYMS = [
    ("car", "automobile"),
    ("cup", "mug"),
    ("sofa", "couch"),
    ("television", "tv"),
    ("bicycle", "bike"),
    ("airplane", "plane"),
    ("child", "kid"),
    ("phone", "cellphone"),
    ("laptop", "notebook"),
    ("boat", "ship"),
    ("bathtub", "tub"),
    ("drink", "beverage"),
    ("people", "crowd"),
]


def main() -> None:
    rng = np.random.default_rng(SEED)
    words: list[str] = []
    topic_of: dict[str, str] = {}
    for topic, vocab in TOPICS.items():
        for w in vocab.split():
            if w not in topic_of:
                topic_of[w] = topic
                words.append(w)
    syn_group = {}
    for gid, group in enumerate(SYNONYMS):
        for w in group:
            syn_group[w] = gid

    centers = {t: _unit(rng.standard_normal(DIM)) for t in TOPICS}
    syn_base = {gid: _unit(rng.standard_normal(DIM)) for gid in range(len(SYNONYMS))}
    vecs: dict[str, np.ndarray] = {}
    for w in words:
        for _ in range(10_000):
            if w in syn_group:
                base = syn_base[syn_group[w]]
                v = _unit(base + SYNONYM_NOISE * _unit(rng.standard_normal(DIM)))
            else:
                v = _unit(TOPIC_WEIGHT * centers[topic_of[w]] + _unit(rng.standard_normal(DIM)))
            ok = all(
                float(v @ u) < MAX_OFF_PAIR
                for other, u in vecs.items()
                if not (w in syn_group and syn_group.get(other) == syn_group[w])
            )
            if ok:
                vecs[w] = v
                break
        else:
            raise RuntimeError(f"could not place {w!r}")

    out = Path(__file__).resolve().parents[1] / "src/reducemt/caption_analysis/data/vectors.txt"
    with out.open("w") as fh:
        fh.write(f"{len(words)} {DIM}\n")
        for w in words:
            fh.write(w + " " + " ".join(f"{x:.6f}" for x in vecs[w]) + "\n")
    print(f"wrote {len(words)} vectors to {out}")


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


if __name__ == "__main__":
    main()
