#!/usr/bin/env python3
"""Generate the synthetic desk fixtures under crates/harness/fixtures/desk.

Everything is drawn from a seeded RNG, so re-running reproduces the committed
files byte for byte. Scenes are (subject, action, object, place) tuples;
captions render a scene through a handful of templates, picking a synonym for
each slot. Five "models" caption held-out scenes with differing accuracy.
"""

import json
import os
import random

SEED = 20240517
OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "harness", "fixtures", "desk")

# Each slot value lists interchangeable surface forms; the first is canonical.
SUBJECTS = [
    ["man", "guy"],
    ["woman", "lady"],
    ["boy", "kid"],
    ["girl", "youngster"],
    ["dog", "puppy"],
    ["cat", "feline"],
    ["player", "athlete"],
    ["child", "toddler"],
    ["person", "individual"],
    ["horse", "pony"],
]
ADJECTIVES = [
    ["young", "youthful"],
    ["small", "little"],
    ["large", "big"],
    ["happy", "cheerful"],
    ["old", "elderly"],
]
ACTIONS = [
    # (verb phrase, object kinds it takes)
    (["riding", "driving"], ["bike", "skateboard", "horse_obj", "boat"]),
    (["holding", "carrying"], ["ball", "umbrella", "bag", "frisbee", "phone"]),
    (["throwing", "tossing"], ["ball", "frisbee"]),
    (["eating", "consuming"], ["sandwich", "pizza", "apple"]),
    (["watching", "viewing"], ["television", "boat", "bike"]),
    (["sitting on", "resting on"], ["couch", "bench", "chair"]),
    (["playing with", "toying with"], ["ball", "frisbee", "toy"]),
]
OBJECTS = {
    "bike": ["bike", "bicycle"],
    "skateboard": ["skateboard", "board"],
    "horse_obj": ["horse", "pony"],
    "boat": ["boat", "ship"],
    "ball": ["ball"],
    "umbrella": ["umbrella", "parasol"],
    "bag": ["bag", "purse"],
    "frisbee": ["frisbee", "disc"],
    "phone": ["phone", "cellphone"],
    "sandwich": ["sandwich", "sub"],
    "pizza": ["pizza", "pie"],
    "apple": ["apple"],
    "television": ["television", "tv"],
    "couch": ["couch", "sofa"],
    "bench": ["bench"],
    "chair": ["chair", "seat"],
    "toy": ["toy", "plaything"],
}
PLACES = [
    ["street", "road"],
    ["beach", "shore"],
    ["park", "garden"],
    ["field", "meadow"],
    ["kitchen"],
    ["room", "chamber"],
    ["city", "town"],
    ["river", "stream"],
]
PLACE_PREP = {"kitchen": "in", "room": "in", "city": "in", "river": "near"}

CAPTION_TEMPLATES = [
    "a {adj}{subj} is {act} a {obj} {prep} the {place}",
    "a {adj}{subj} {act} a {obj} {prep} the {place}",
    "the {adj}{subj} is {act} a {obj} {prep} a {place}",
    "there is a {adj}{subj} {act} a {obj} {prep} the {place}",
    "{prep_cap} the {place} a {adj}{subj} is {act} a {obj}",
]

GENERIC_TEMPLATES = [
    "the {subj} said that the {obj} was {adj}",
    "yesterday a {subj} went to the {place}",
    "my friend bought a {adj} {obj} for the {subj}",
    "we saw a {subj} near the {place} last week",
    "the {place} was full of people and a {subj}",
    "she gave the {obj} to a {adj} {subj}",
    "it is not easy to find a {obj} in the {place}",
    "he thinks the {subj} likes the {obj}",
    "they walked along the {place} with a {subj}",
    "a {adj} {subj} lives near the {place}",
    "the {obj} is on the table in the {place}",
    "everyone wanted a {adj} {obj} this year",
]

SYNONYMS = {}
for group in SUBJECTS + ADJECTIVES + PLACES + [a[0] for a in ACTIONS] + list(OBJECTS.values()):
    if len(group) > 1:
        canonical = group[0]
        if " " not in canonical and canonical not in SYNONYMS:
            SYNONYMS[canonical] = group[1]
# verb phrases: substitute the verb only
for forms, _ in ACTIONS:
    a, b = forms[0].split()[0], forms[1].split()[0]
    if a != b and a not in SYNONYMS:
        SYNONYMS[a] = b
SYNONYMS.pop("horse", None)  # "horse" is both a subject and an object


def surface(rng, forms, canonical_bias):
    if len(forms) == 1 or rng.random() < canonical_bias:
        return forms[0]
    return rng.choice(forms[1:])


def scene(rng):
    subj = rng.randrange(len(SUBJECTS))
    act = rng.randrange(len(ACTIONS))
    obj = rng.choice(ACTIONS[act][1])
    place = rng.randrange(len(PLACES))
    adj = rng.randrange(len(ADJECTIVES)) if rng.random() < 0.5 else None
    return {"subj": subj, "act": act, "obj": obj, "place": place, "adj": adj}


def render(rng, sc, template, bias):
    place = surface(rng, PLACES[sc["place"]], bias)
    prep = PLACE_PREP.get(PLACES[sc["place"]][0], "on")
    adj = ""
    if sc["adj"] is not None:
        adj = surface(rng, ADJECTIVES[sc["adj"]], bias) + " "
    text = template.format(
        adj=adj,
        subj=surface(rng, SUBJECTS[sc["subj"]], bias),
        act=surface(rng, ACTIONS[sc["act"]][0], bias),
        obj=surface(rng, OBJECTS[sc["obj"]], bias),
        prep=prep,
        prep_cap=prep,
        place=place,
    )
    return " ".join(text.split())


def references(rng, sc):
    return [render(rng, sc, rng.choice(CAPTION_TEMPLATES), 0.75) for _ in range(5)]


def distort(rng, sc, accuracy):
    out = dict(sc)
    if rng.random() > accuracy:
        out["subj"] = rng.randrange(len(SUBJECTS))
    if rng.random() > accuracy:
        out["act"] = rng.randrange(len(ACTIONS))
        out["obj"] = rng.choice(ACTIONS[out["act"]][1])
    elif rng.random() > accuracy:
        out["obj"] = rng.choice(ACTIONS[out["act"]][1])
    if rng.random() > accuracy:
        out["place"] = rng.randrange(len(PLACES))
    if rng.random() > accuracy:
        out["adj"] = None if out["adj"] is not None else rng.randrange(len(ADJECTIVES))
    return out


MODELS = [
    # (name, slot accuracy, template index pool)
    ("show-tell", 0.62, [0, 1]),
    ("top-down", 0.72, [0, 2]),
    ("atten2in", 0.68, [0, 1]),
    ("top-down+", 0.80, [0, 2]),
    ("atten2in+", 0.76, [0, 1, 3]),
]


def generic(rng):
    t = rng.choice(GENERIC_TEMPLATES)
    return t.format(
        subj=surface(rng, rng.choice(SUBJECTS), 0.5),
        obj=surface(rng, OBJECTS[rng.choice(list(OBJECTS))], 0.5),
        adj=surface(rng, rng.choice(ADJECTIVES), 0.5),
        place=surface(rng, rng.choice(PLACES), 0.5),
    )


def write_lines(name, lines):
    with open(os.path.join(OUT, name), "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")


def main():
    rng = random.Random(SEED)
    os.makedirs(os.path.join(OUT, "models"), exist_ok=True)

    # Held-out evaluation scenes with five references each.
    eval_scenes = [scene(rng) for _ in range(100)]
    eval_refs = [references(rng, sc) for sc in eval_scenes]
    annotations = []
    for i, refs in enumerate(eval_refs):
        for r in refs:
            annotations.append({"image_id": i + 1, "caption": r})
    with open(os.path.join(OUT, "references.json"), "w", encoding="utf-8") as f:
        json.dump({"annotations": annotations}, f, indent=1)
        f.write("\n")

    for name, accuracy, pool in MODELS:
        results = []
        for i, sc in enumerate(eval_scenes):
            guess = distort(rng, sc, accuracy)
            template = CAPTION_TEMPLATES[rng.choice(pool)]
            results.append({"image_id": i + 1, "caption": render(rng, guess, template, 1.0)})
        with open(os.path.join(OUT, "models", f"{name}.json"), "w", encoding="utf-8") as f:
            json.dump(results, f, indent=1)
            f.write("\n")

    # Single-model jsonl view of the same data (the first model).
    first = json.load(open(os.path.join(OUT, "models", f"{MODELS[0][0]}.json"), encoding="utf-8"))
    with open(os.path.join(OUT, "captions.jsonl"), "w", encoding="utf-8") as f:
        for item, refs in zip(first, eval_refs):
            row = {"id": str(item["image_id"]), "candidate": item["caption"], "references": refs}
            f.write(json.dumps(row) + "\n")

    # Training corpora: captions of disjoint scenes, then generic sentences.
    train_captions = []
    for _ in range(400):
        train_captions.extend(references(rng, scene(rng)))
    write_lines("captions_train.txt", train_captions)
    write_lines("generic.txt", [generic(rng) for _ in range(2000)])

    # Small reconstruction corpus: distinct canonical captions.
    toy = []
    seen = set()
    while len(toy) < 150:
        s = render(rng, scene(rng), CAPTION_TEMPLATES[0], 1.0)
        if s not in seen:
            seen.add(s)
            toy.append(s)
    write_lines("toy.txt", toy)

    write_lines("synonyms.tsv", [f"{k}\t{v}" for k, v in sorted(SYNONYMS.items())])


if __name__ == "__main__":
    main()
