"""Writes extracted.json (an export) and gold.json for the evaluation tests.

Anthology: 28 extracted, 27 gold, 25 shared.  Soap: 3 extracted, 4 gold,
3 shared; the fourth gold soap has the same text as an extracted anthology
arc and must not match across types.  Characters: 62 extracted, 63 gold,
61 matched (59 by preferred name, 2 through alternative names) and one
duplicate.
"""
import hashlib
import json
import pathlib

SERIES = "Harbor Lights"
here = pathlib.Path(__file__).parent


def hid(text):
    return hashlib.md5(text.encode()).hexdigest()


first = ["Ada", "Ben", "Cora", "Dev", "Eli", "Fay", "Gus", "Hana", "Ivo", "Jun", "Kai", "Lia", "Milo"]
last = ["Stone", "Marsh", "Quill", "Vance", "Rook"]
people = [f"{f} {l}" for l in last for f in first][:61]

characters = []
gold_characters = []
for i, name in enumerate(people):
    if i < 59:
        characters.append({"preferred_name": name, "alternative_names": []})
        gold_characters.append({"name": name, "alternative_names": []})
    else:
        # matched through an alias on one side or the other
        nick = "Doc " + name.split()[1] if i == 59 else "Captain " + name.split()[0]
        characters.append({"preferred_name": nick, "alternative_names": [name]})
        gold_characters.append({"name": name, "alternative_names": []})
characters.append({"preferred_name": "Cap", "alternative_names": ["Captain " + people[60].split()[0]]})
gold_characters[60]["alternative_names"] = ["Captain " + people[60].split()[0]]
gold_characters.append({"name": "Otto Brandt", "alternative_names": []})
gold_characters.append({"name": "Pia Brandt", "alternative_names": []})

for c in characters:
    c["series"] = SERIES
    c["character_id"] = hid("character|" + c["preferred_name"])
ids = [c["character_id"] for c in characters]


def arc(title, description, arc_type, n):
    arc_id = hid("arc|" + title)
    main = [ids[n % len(ids)]]
    return {
        "arc_id": arc_id,
        "arc_type": arc_type,
        "description": description,
        "main_characters": main,
        "progressions": [{
            "arc_id": arc_id,
            "content": f"{title} unfolds.",
            "episode": n % 10 + 1,
            "interfering_characters": [],
            "progression_id": hid("progression|" + title),
            "season": 1,
            "series": SERIES,
        }],
        "series": SERIES,
        "title": title,
    }


shared_anthology = [(f"Case {i}: The {w} Patient", f"A patient with a {w.lower()} condition is treated in week {i}.")
                    for i, w in enumerate(["Silent", "Burning", "Frozen", "Falling", "Sleeping", "Singing", "Hidden",
                                           "Broken", "Lucky", "Wandering", "Borrowed", "Frightened", "Forgotten",
                                           "Stubborn", "Spinning", "Glass", "Paper", "Iron", "Golden", "Hollow",
                                           "Twin", "Restless", "Quiet", "Crowded", "Last"], 1)]
extra_anthology = [
    ("Vending Machine Outage", "The staff lounge loses its snacks for a day."),
    ("Parking Lot Flood", "Rain floods the visitor parking lot."),
    ("Lena Price's Gala", "A donor gala is planned and postponed."),
]
gold_only_anthology = [
    ("The Diver's Lungs", "A free diver is treated for a collapsed lung."),
    ("Night of the Lost Ring", "A surgeon hunts for a ring swallowed by a toddler."),
]
shared_soap = [
    ("Ada and Ben's Engagement", "Ada Stone and Ben Stone plan a wedding amid hospital politics."),
    ("Cora's Custody Fight", "Cora Stone fights for custody of her son."),
    ("Dev's Recovery", "Dev Stone returns to work after addiction treatment."),
]
gold_soap_only = [("Lena Price's Gala", "A donor gala is planned and postponed.")]

arcs = []
n = 0
for title, desc in shared_anthology + extra_anthology:
    arcs.append(arc(title, desc, "Anthology", n))
    n += 1
for title, desc in shared_soap:
    arcs.append(arc(title, desc, "Soap", n))
    n += 1

export = {
    "arcs": sorted(arcs, key=lambda a: a["arc_id"]),
    "characters": sorted(characters, key=lambda c: c["character_id"]),
    "dismissed_duplicates": [],
    "embeddings": [],
    "episodes": [],
    "link_audit": [],
    "runs": [],
    "schema_version": 2,
    "season_summaries": [],
    "series": [{"genre": "medical drama", "name": SERIES}],
}


def gold_arc(title, desc, arc_type):
    return {"title": title, "description": desc, "arc_type": arc_type, "main_characters": [],
            "episodes": [{"season": 1, "episode": 1}]}


gold = {
    "series": SERIES,
    "arcs": [gold_arc(t, d, "Anthology") for t, d in shared_anthology + gold_only_anthology]
    + [gold_arc(t, d, "Soap") for t, d in shared_soap + gold_soap_only],
    "characters": gold_characters,
}

(here / "extracted.json").write_text(json.dumps(export, indent=2, sort_keys=True) + "\n")
(here / "gold.json").write_text(json.dumps(gold, indent=2) + "\n")
