#!/usr/bin/env python3
"""Generate the synthetic annotation pools and dev dataset used by the tests.

The real annotations are not redistributable, so the pools are built from
templated passages with the same shape: 98 bridge + 50 comparison records
in the train pool, 32 bridge + 24 comparison in the dev pool. Bridge records
cycle through every routing case (answer in one passage, in both, in
neither, answer identical to the bridge entity).

Output is deterministic; rerun after changing a template and commit the
result.

    python3 scripts/gen_fixtures.py crates/core/tests/fixtures
"""

import json
import sys
from pathlib import Path

FIRST = ["Aldo", "Brenna", "Cyril", "Delia", "Emrys", "Fenna", "Gideon", "Hollis",
         "Ines", "Jarek", "Kestrel", "Lorcan", "Mirela", "Nolan", "Odile", "Pascoe"]
LAST = ["Ashgrove", "Brightwater", "Coldbrook", "Dunmore", "Everleigh", "Fairhaven",
        "Greystone", "Holloway", "Ironside", "Juniper", "Kingsley", "Larkspur", "Merriweather",
        "Northcott", "Oakhurst", "Pembridge", "Quillon", "Rosewood", "Stanmore", "Thornbury"]
ADJ = ["Crimson", "Velvet", "Hollow", "Electric", "Silent", "Golden", "Paper", "Northern",
       "Wild", "Glass", "Midnight", "Broken", "Amber"]
NOUN = ["Lanterns", "Harbors", "Sparrows", "Engines", "Orchards", "Satellites", "Tides",
        "Canyons", "Mirrors", "Falcons", "Meadows"]
SONG_A = ["Silver", "Lonely", "Burning", "Distant", "Painted", "Restless", "Hidden", "Falling",
          "Velour", "Quiet", "Neon", "Hollow"]
SONG_B = ["Harbor", "Morning", "Highway", "Letters", "River", "Garden", "Summer", "Window", "Station",
          "Avenue", "Lullaby", "Horizon"]
CITY = ["Port Avalon", "Westmarch", "Kelburn", "Ostrava Bay", "Lindholm", "Carrow", "Meriden",
        "Tollport", "Ravensby", "Ashcombe", "Dunhallow"]
GENRE = ["folk rock", "synth pop", "post-punk", "blues rock", "dream pop", "art rock", "power pop"]
PROFESSION = ["novelist", "painter", "architect", "composer", "sculptor", "photographer", "poet"]


def pick(lst, i, stride=1):
    return lst[(i * stride) % len(lst)]


class Names:
    """Hands out unique names by walking the product of two word lists."""

    def __init__(self):
        self.counters = {}

    def _next(self, kind, a, b, fmt):
        k = self.counters.get(kind, 0)
        self.counters[kind] = k + 1
        if k >= len(a) * len(b):
            raise RuntimeError(f"ran out of {kind} names")
        return fmt(a[k % len(a)], b[(k // len(a) + k) % len(b)])

    def person(self):
        return self._next("person", FIRST, LAST, lambda x, y: f"{x} {y}")

    def band(self):
        return self._next("band", ADJ, NOUN, lambda x, y: f"The {x} {y}")

    def song(self):
        return self._next("song", SONG_A, SONG_B, lambda x, y: f"{x} {y}")


def passage(title, sentences, supporting):
    return {"title": title, "sentences": sentences, "supporting": supporting}


def bridge_record(rid, split, case, i, names):
    person, band, song = names.person(), names.band(), names.song()
    city, genre, year = pick(CITY, i, 3), pick(GENRE, i, 2), 1960 + (i * 7) % 40

    song_p = passage(song, [
        f"\"{song}\" is a {genre} song by {band}.",
        f"It was released as a single in {year}.",
    ], [0])
    band_p = passage(band, [
        f"{band} was a {genre} band formed in {city} by {person}.",
        f"The group toured widely before splitting up.",
    ], [0])

    if case == "answer_in_second":
        p1, p2, answer = song_p, band_p, person
        s1 = f"\"{song}\" is a song by {band}."
        s2 = f"{band} was formed by {person}."
        c = f"\"{song}\" is a song by {band}, which was formed by {person}."
        cb = f"\"{song}\" is a song by a band which was formed by {person}."
        cba = f"\"{song}\" is a song by a band which was formed by a certain musician."
        q = f"Who formed the band that recorded \"{song}\"?"
        flags = (False, True, False)
    elif case == "answer_in_first":
        p1, p2, answer = band_p, song_p, person
        s1 = f"{band} was formed by {person}."
        s2 = f"\"{song}\" is a song by {band}."
        c = f"\"{song}\" is a song by {band}, which was formed by {person}."
        cb = f"\"{song}\" is a song by a band which was formed by {person}."
        cba = f"\"{song}\" is a song by a band which was formed by a certain musician."
        q = f"Which musician founded the group behind \"{song}\"?"
        flags = (True, False, False)
    elif case == "answer_in_both":
        song_p = passage(song, [
            f"\"{song}\" is a {genre} song by {band}, written by {person}.",
            f"It was released as a single in {year}.",
        ], [0])
        p1, p2, answer = song_p, band_p, person
        s1 = f"\"{song}\" is a song by {band}, written by {person}."
        s2 = f"{band} was formed in {city} by {person}."
        c = f"{person} wrote \"{song}\" for {band}, the band {person} formed in {city}."
        cb = f"{person} wrote \"{song}\" for a band that {person} formed in {city}."
        cba = f"A certain musician wrote \"{song}\" for a band that the musician formed in {city}."
        q = f"Who wrote \"{song}\" for the band they formed in {city}?"
        flags = (True, True, False)
    elif case == "answer_is_bridge":
        p1, p2, answer = song_p, band_p, band
        s1 = f"\"{song}\" is a song by {band}."
        s2 = f"{band} was a band formed in {city}."
        c = f"\"{song}\" is a song by {band}, a band formed in {city}."
        cb = None
        cba = f"\"{song}\" is a song by a certain band formed in {city}."
        q = f"Which band formed in {city} recorded \"{song}\"?"
        flags = (True, True, True)
    elif case == "answer_in_neither":
        answer = f"{year}s {genre}"
        p1, p2 = song_p, band_p
        s1 = f"\"{song}\" is a {genre} song by {band} from {year}."
        s2 = f"{band} was a {genre} band formed in {city}."
        c = f"\"{song}\" is a {genre} song from {year} by {band}, a band formed in {city}."
        cb = f"\"{song}\" is a {genre} song from {year} by a band formed in {city}."
        cba = f"\"{song}\" is a song in a certain style by a band formed in {city}."
        q = f"What style of music is \"{song}\", recorded by a band from {city}?"
        flags = (False, False, False)
    else:
        raise ValueError(case)

    rec = {
        "id": rid, "split": split, "gold_type": "bridge",
        "p1": p1, "p2": p2, "answer": answer, "gold_question": q,
        "bridge": band, "s1": s1, "s2": s2, "combined": c,
    }
    if cb is not None:
        rec["combined_minus_bridge"] = cb
    rec.update({
        "combined_minus_bridge_answer": cba, "question": q,
        "in_a_p1": flags[0], "in_a_p2": flags[1], "same_a_b": flags[2],
    })
    return rec


def comparison_record(rid, split, i, names):
    a, b = names.person(), names.person()
    prof = pick(PROFESSION, i, 3)
    ya, yb = 1900 + (i * 11) % 60, 1901 + (i * 13) % 60
    if ya == yb:
        yb += 1
    pa = passage(a, [f"{a} (born {ya}) is a {prof} from {pick(CITY, i, 1)}.",
                     f"{a.split()[0]} has exhibited widely."], [0])
    pb = passage(b, [f"{b} (born {yb}) is a {prof} from {pick(CITY, i + 4, 1)}.",
                     f"{b.split()[0]} teaches part time."], [0])
    if i % 2 == 0:
        older = a if ya < yb else b
        s1, s2 = f"{a} was born in {ya}.", f"{b} was born in {yb}."
        c = f"{a} was born in {ya} and {b} was born in {yb}, so {older} is older."
        q = f"Who was born first, {a} or {b}?"
        answer = older
    else:
        s1, s2 = f"{a} is a {prof}.", f"{b} is a {prof}."
        c = f"Both {a} and {b} are {prof}s, so they share a profession."
        q = f"Are {a} and {b} both {prof}s?"
        answer = "yes"
    return {
        "id": rid, "split": split, "gold_type": "comparison",
        "p1": pa, "p2": pb, "answer": answer, "gold_question": q,
        "s1": s1, "s2": s2, "combined": c, "question": q,
    }


CASES = ["answer_in_second", "answer_in_first", "answer_is_bridge", "answer_in_both", "answer_in_neither"]


def pool(split, prefix, n_bridge, n_comp, names, offset):
    recs = []
    for i in range(n_bridge):
        recs.append(bridge_record(f"{prefix}-b{i:03d}", split, CASES[i % len(CASES)], offset + i, names))
    for i in range(n_comp):
        recs.append(comparison_record(f"{prefix}-c{i:03d}", split, offset + i, names))
    return recs


def line(rec):
    return json.dumps(rec, ensure_ascii=False, separators=(",", ":"))


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = Names()
    train = pool("train_pool", "train", 98, 50, names, 0)
    dev = pool("dev_pool", "dev", 32, 24, names, 500)
    (out / "train_pool.jsonl").write_text("".join(line(r) + "\n" for r in train))
    (out / "dev_pool.jsonl").write_text("".join(line(r) + "\n" for r in dev))
    dataset = [{k: r[k] for k in ("id", "p1", "p2", "answer", "gold_question", "gold_type")} for r in dev]
    (out / "dev_dataset.json").write_text(json.dumps(dataset, ensure_ascii=False, indent=2) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "crates/core/tests/fixtures")
