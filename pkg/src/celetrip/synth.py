"""Planted-trip news corpus with known itineraries.

Each generated day has one celebrity and ``candidates_per_day`` candidate
places: the visited one and decoys.  Decoys are either named near the
celebrity without any travel wording, or visited by somebody else in an
article that names the celebrity elsewhere.  A fixed share of the trips is
implicit: their articles read exactly like the first decoy kind and the
visit shows only through the venue (linked in the knowledge base to a
conference-venue class) and the event (whose same-day coverage talks about
arrivals).  On half of the days one decoy is mentioned more often than the
visited place, which defeats frequency counting.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from celetrip.corpus import Article, Corpus, DictionaryTagger, write_corpus, write_ground_truth
from celetrip.extract_geo import GazetteerEntry, GazetteerIndex, write_gazetteer
from celetrip.extract_time import annotate_corpus_dates
from celetrip.features import WordVectors
from celetrip.graphs import KnowledgeBase, normalize_label, write_kb

PLACES = {
    "United States": ["New York", "Philadelphia", "Washington D.C.", "Chicago", "Boston", "Los Angeles",
                      "Houston", "Seattle", "Miami", "Denver"],
    "United Kingdom": ["London", "Manchester", "Edinburgh", "Glasgow"],
    "France": ["Paris", "Lyon", "Marseille", "Toulouse"],
    "Germany": ["Berlin", "Munich", "Hamburg", "Frankfurt"],
    "Japan": ["Tokyo", "Osaka", "Kyoto"],
    "Canada": ["Toronto", "Ottawa", "Montreal", "Vancouver"],
    "Italy": ["Rome", "Milan", "Naples"],
    "Australia": ["Sydney", "Melbourne"],
    "Brazil": ["Rio de Janeiro", "Brasilia"],
    "India": ["Mumbai", "Delhi"],
}
ALIASES = {"New York": ("NYC", "New York City"), "Los Angeles": ("LA",), "United States": ("USA",),
           "United Kingdom": ("Britain", "UK")}

CELEBRITIES = ["Angela Merkel", "Emmanuel Macron", "Justin Trudeau", "Shinzo Abe", "Taylor Swift",
               "Lionel Messi", "Oprah Winfrey", "Elon Musk"]
OTHER_PEOPLE = ["Boris Johnson", "Jacinda Ardern", "Roger Federer", "Serena Williams", "Bill Gates",
                "Tom Hanks", "Greta Thunberg", "Narendra Modi", "Xavier Bettel", "Mark Rutte"]

TRIP_PHRASES = ["visited", "arrived in", "landed in", "made a visit to", "traveled to", "flew into"]
TRIP_TAILS = ["for talks", "for a series of meetings", "on an official trip", "to meet local leaders",
              "ahead of the weekend"]
NEAR_PHRASES = ["commented on the {noun} debate in", "was asked about the {noun} plans of",
                "spoke by phone about the {noun} situation in", "criticized the {noun} record of",
                "praised the {noun} reforms in"]
NEAR_TAILS = ["during an interview", "in a statement", "in remarks to reporters", "on social media",
              "from her office", "from his office"]
NOUNS = ["budget", "economy", "trade", "security", "climate", "energy", "health", "education", "housing",
         "tax", "border", "transport", "pension", "water", "farming", "banking"]
ADJECTIVES = ["new", "regional", "national", "annual", "proposed", "current", "long", "local", "public"]
SUBJECTS = ["Officials", "Analysts", "Lawmakers", "Critics", "Economists", "Advisers", "Editors", "Voters"]
NEUTRAL_VERBS = ["discussed", "reviewed", "debated", "questioned", "examined", "welcomed", "rejected"]
SETTINGS = ["in a long report", "at a press briefing", "in an opinion column", "during a panel",
            "in parliament", "in a public letter"]

VENUE_FIRST = ["Ashford", "Belmont", "Carrow", "Dunmore", "Elston", "Fairleigh", "Garwood", "Halden",
               "Ivybridge", "Kelmar", "Lindell", "Marlow", "Norcott", "Oakhurst", "Pelham", "Quarry",
               "Redmere", "Stanwick", "Thornbury", "Upwood", "Vexley", "Whitcombe", "Yardley", "Zelden"]
VENUE_SECOND = ["Park", "Lane", "Gate", "Bridge", "Court", "Field", "Cross", "Row", "Wharf", "Square",
                "Green", "Hill", "Mill", "Point", "Quay", "Yard"]
VENUE_KIND = ["Hall", "Center", "Pavilion", "House"]
EVENT_ADJ = ["Aurora", "Meridian", "Cobalt", "Solstice", "Horizon", "Keystone", "Lantern", "Northwind",
             "Orchard", "Prism", "Quartz", "Sterling"]
EVENT_KIND = ["Forum", "Summit", "Conference", "Gala", "Expo"]

EVENT_TRIP_LINES = ["The president arrived at the {event} late in the evening.",
                    "A visiting delegation landed ahead of the {event}.",
                    "The prime minister flew in to open the {event}.",
                    "Guests of honour arrived for the {event} under heavy security.",
                    "A state visit coincided with the opening of the {event}."]
EVENT_NEUTRAL_LINES = ["The {event} was postponed because of rain.",
                       "Tickets for the {event} sold out within hours.",
                       "Local vendors prepared stalls for the {event}.",
                       "Organisers of the {event} published a new programme.",
                       "The {event} drew mostly local crowds this year."]
VENUE_LINES = ["The {event} at the {venue} in {loc} {tail}.",
               "Crowds gathered at the {venue} in {loc} where the {event} {tail}."]
VENUE_TAILS = ["continued through the day", "opened with speeches", "drew hundreds of people",
               "ran behind schedule", "closed with a reception"]

CONFERENCE_CLASS = "class:conference_venue"
ARENA_CLASS = "class:sports_arena"
RELATIONS = ("located_in", "instance_of", "held_in", "citizen_of")


@dataclass(frozen=True)
class PinnedTrip:
    celebrity: str
    date: date
    location: str
    decoys: tuple[str, ...]
    heavy_decoy: str | None = None


@dataclass
class SynthData:
    corpus: Corpus
    ground_truth: list[tuple[str, date, str]]
    gazetteer: list[GazetteerEntry]
    kb: KnowledgeBase
    kb_labels: dict[str, str]
    lexicon: dict[str, str]
    implicit: set[tuple[str, date]]
    heavy: set[tuple[str, date]]
    days: list[date]
    candidates: dict[tuple[str, date], list[str]] = field(default_factory=dict)

    def index(self) -> GazetteerIndex:
        return GazetteerIndex.from_entries(self.gazetteer)

    def write(self, outdir: str | Path) -> dict[str, Path]:
        """Write every artefact in the formats the command line reads."""
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {name: out / fname for name, fname in [
            ("corpus", "corpus.jsonl"), ("ground_truth", "ground_truth.csv"), ("gazetteer", "gazetteer.tsv"),
            ("kb_triples", "kb_triples.tsv"), ("kb_entities", "kb_entities.txt"),
            ("kb_relations", "kb_relations.txt"), ("kb_labels", "kb_labels.tsv"), ("lexicon", "lexicon.tsv"),
            ("implicit", "implicit.csv")]}
        write_corpus(self.corpus, paths["corpus"])
        write_ground_truth(self.ground_truth, paths["ground_truth"])
        write_gazetteer(self.gazetteer, paths["gazetteer"])
        write_kb(self.kb, paths["kb_triples"], paths["kb_entities"], paths["kb_relations"], paths["kb_labels"],
                 self.kb_labels)
        with open(paths["lexicon"], "w", encoding="utf-8") as fh:
            for surface, etype in self.lexicon.items():
                fh.write(f"{surface}\t{etype}\n")
        with open(paths["implicit"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["celebrity", "date"])
            for c, d in sorted(self.implicit, key=lambda k: (k[1], k[0])):
                w.writerow([c, d.isoformat()])
        return paths


def gazetteer_entries(places: dict[str, list[str]] = PLACES) -> list[GazetteerEntry]:
    entries = []
    for ci, (country, cities) in enumerate(places.items()):
        entries.append(GazetteerEntry(f"C{ci:02d}", country, ALIASES.get(country, ()), (), "country"))
        for ti, city in enumerate(cities):
            entries.append(GazetteerEntry(f"C{ci:02d}T{ti:02d}", city, ALIASES.get(city, ()), (country,), "city"))
    return entries


class _Writer:
    """Sentence builders sharing one random stream."""

    def __init__(self, rng: np.random.Generator, nouns: Sequence[str] = NOUNS):
        self.rng = rng
        self.nouns = list(nouns)

    def pick(self, seq):
        return seq[int(self.rng.integers(len(seq)))]

    def filler(self, subject: str | None = None) -> str:
        subj = subject or self.pick(SUBJECTS)
        return (f"{subj} {self.pick(NEUTRAL_VERBS)} the {self.pick(ADJECTIVES)} {self.pick(self.nouns)} "
                f"{self.pick(self.nouns)} plan {self.pick(SETTINGS)}.")

    def trip(self, person: str, loc: str) -> str:
        return f"{person} {self.pick(TRIP_PHRASES)} {loc} {self.pick(TRIP_TAILS)}."

    def near(self, person: str, loc: str) -> str:
        phrase = self.pick(NEAR_PHRASES).format(noun=self.pick(self.nouns))
        return f"{person} {phrase} {loc} {self.pick(NEAR_TAILS)}."

    def loc_filler(self, loc: str) -> str:
        return f"{self.pick(SUBJECTS)} in {loc} {self.pick(NEUTRAL_VERBS)} the {self.pick(self.nouns)} plan."

    def venue(self, event: str, venue: str, loc: str) -> str:
        return self.pick(VENUE_LINES).format(event=event, venue=venue, loc=loc, tail=self.pick(VENUE_TAILS))


def synth_generate(n_days: int = 200, candidates_per_day: int = 5, vocab: Sequence[str] | None = None,
                   seed: int = 7, implicit_frac: float = 0.2, start: date = date(2018, 9, 1),
                   celebrities: Sequence[str] | None = None, pinned: Sequence[PinnedTrip] = (),
                   kb_dim: int = 50, noise_articles: int = 2) -> SynthData:
    """Generate the planted-trip corpus.

    ``vocab`` replaces the neutral noun list used by filler sentences.
    Days are two calendar days apart starting at ``start``; ``pinned``
    trips are added on their own dates with the given decoys.
    """
    rng = np.random.default_rng(seed)
    w = _Writer(rng, vocab or NOUNS)
    celebs = list(celebrities or CELEBRITIES)
    cities = [c for cs in PLACES.values() for c in cs]
    country_of = {c: k for k, cs in PLACES.items() for c in cs}
    if candidates_per_day > len(cities):
        raise ValueError(f"at most {len(cities)} candidates per day")
    gaz = gazetteer_entries()

    plan = []
    days = [start + timedelta(days=2 * i) for i in range(n_days)]
    pinned_dates = {p.date for p in pinned}
    implicit_days = set(rng.permutation(n_days)[:int(round(implicit_frac * n_days))].tolist())
    heavy_days = set(rng.permutation(n_days)[:n_days // 2].tolist())
    for i, d in enumerate(days):
        if d in pinned_dates:
            continue
        chosen = [cities[j] for j in rng.permutation(len(cities))[:candidates_per_day]]
        plan.append((celebs[i % len(celebs)], d, chosen[0], chosen[1:], i in implicit_days,
                     chosen[1] if i in heavy_days else None))
    for p in pinned:
        plan.append((p.celebrity, p.date, p.location, list(p.decoys), False, p.heavy_decoy))
    plan.sort(key=lambda t: t[1])

    articles: list[tuple[str, date, str]] = []
    venues_used: set[str] = set()
    venue_class: dict[str, str] = {}
    venue_city: dict[str, str] = {}
    event_cities: dict[str, set[str]] = {}
    ground_truth, implicit, heavy = [], set(), set()
    candidates = {}
    aid = 0

    def new_id() -> str:
        nonlocal aid
        aid += 1
        return f"a{aid:06d}"

    def fresh_venue() -> str:
        while True:
            name = f"{w.pick(VENUE_FIRST)} {w.pick(VENUE_SECOND)} {w.pick(VENUE_KIND)}"
            if name not in venues_used:
                venues_used.add(name)
                return name

    all_events = [f"{a} {k}" for a in EVENT_ADJ for k in EVENT_KIND]
    others = [p for p in OTHER_PEOPLE if p not in celebs]

    for celeb, d, true_loc, decoys, is_implicit, heavy_decoy in plan:
        ground_truth.append((celeb, d, true_loc))
        candidates[(celeb, d)] = [true_loc, *decoys]
        if is_implicit:
            implicit.add((celeb, d))
        day_events = [all_events[j] for j in rng.permutation(len(all_events))[:len(decoys) + 1]]
        counts: Counter = Counter()
        day_articles: list[tuple[str, list[str], date]] = []  # (loc, sentences, publish date)

        def loc_extra(loc: str) -> list[str]:
            if rng.random() < 0.5:
                return []
            counts[loc] += 1
            return [w.loc_filler(loc)]

        def venue_block(loc: str, trip_like: bool, event: str) -> list[str]:
            v = fresh_venue()
            venue_class[v] = CONFERENCE_CLASS if trip_like else ARENA_CLASS
            venue_city[v] = loc
            event_cities.setdefault(event, set()).add(loc)
            counts[loc] += 1
            return [w.venue(event, v, loc)]

        # the visited place
        true_event = day_events[0]
        if is_implicit:
            n_art = int(rng.integers(1, 3))
            for k in range(n_art):
                sents = [w.near(celeb, true_loc), w.filler()]
                counts[true_loc] += 1
                if k == 0:
                    sents += venue_block(true_loc, True, true_event)
                sents += loc_extra(true_loc)
                sents.append(w.filler())
                day_articles.append((true_loc, sents, d))
        else:
            n_art = int(rng.integers(1, 4))
            for k in range(n_art):
                pub = d + timedelta(days=1) if k > 0 and rng.random() < 0.3 else d
                lead = w.trip(celeb, true_loc)
                if pub != d:
                    lead = lead[:-1] + " yesterday."
                sents = [lead, w.filler()]
                counts[true_loc] += 1
                if k == 0 and rng.random() < 0.8:
                    sents += venue_block(true_loc, rng.random() < 0.8, true_event)
                if rng.random() < 0.3:
                    sents.append(f"Officials across {country_of[true_loc]} welcomed the news.")
                sents += loc_extra(true_loc)
                sents.append(w.filler())
                day_articles.append((true_loc, sents, pub))

        # decoys
        for j, loc in enumerate(decoys):
            event = day_events[j + 1]
            if rng.random() < 0.6 or not others:
                sents = [w.near(celeb, loc), w.filler()]
            else:
                other = w.pick(others)
                sents = [w.trip(other, loc), w.filler(), w.filler(celeb)]
            counts[loc] += 1
            if rng.random() < 0.8:
                sents += venue_block(loc, False, event)
            sents += loc_extra(loc)
            sents.append(w.filler())
            day_articles.append((loc, sents, d))

        # frequency manipulation
        if heavy_decoy is not None:
            heavy.add((celeb, d))
            while counts[heavy_decoy] <= counts[true_loc]:
                day_articles.append((heavy_decoy, [w.near(celeb, heavy_decoy), w.loc_filler(heavy_decoy),
                                                   w.filler()], d))
                counts[heavy_decoy] += 2
        else:
            top_decoy = max((counts[l] for l in decoys), default=0)
            if counts[true_loc] <= top_decoy:
                first = next(a for a in day_articles if a[0] == true_loc)
                for _ in range(top_decoy - counts[true_loc] + 1):
                    first[1].insert(-1, w.loc_filler(true_loc))
                    counts[true_loc] += 1

        for _, sents, pub in day_articles:
            articles.append((new_id(), pub, " ".join(sents)))

        # same-day event coverage without the celebrity
        for j, event in enumerate(day_events):
            loc = true_loc if j == 0 else decoys[j - 1]
            trip_like = j == 0 and (is_implicit or rng.random() < 0.8)
            lines = EVENT_TRIP_LINES if trip_like else EVENT_NEUTRAL_LINES
            for _ in range(int(rng.integers(2, 4)) if trip_like else int(rng.integers(1, 3))):
                articles.append((new_id(), d, " ".join([w.pick(lines).format(event=event), w.filler()])))

        for _ in range(noise_articles):
            person = w.pick(others) if others else w.pick(SUBJECTS)
            city = w.pick(cities)
            articles.append((new_id(), d, " ".join([w.near(person, city), w.filler(), w.filler()])))

    lexicon = {}
    for p in [*celebs, *OTHER_PEOPLE, *(p.celebrity for p in pinned)]:
        lexicon[p] = "PERSON"
    for v in sorted(venues_used):
        lexicon[v] = "FACILITY"
    for e in all_events:
        lexicon[e] = "EVENT"
    for e in gaz:
        for s in (e.canonical, *e.aliases):
            lexicon[s] = "GPE_LOC"
    tagger = DictionaryTagger(lexicon)
    arts = []
    for art_id, pub, text in articles:
        art = Article.from_text(art_id, text, pub)
        art.mentions = tagger.tag(art.raw_sentences)
        arts.append(art)
    corpus = Corpus(arts)
    annotate_corpus_dates(corpus)

    kb, kb_labels = _build_kb(rng, kb_dim, celebs, others, country_of, venue_class, venue_city, event_cities,
                              pinned)
    return SynthData(corpus, ground_truth, gaz, kb, kb_labels, lexicon, implicit, heavy,
                     [p[1] for p in plan], candidates)


def _build_kb(rng, dim, celebs, others, country_of, venue_class, venue_city, event_cities, pinned):
    triples = []
    labels: dict[str, str] = {}

    def ent(kind: str, name: str) -> str:
        eid = f"{kind}:{normalize_label(name).replace(' ', '_')}"
        labels[eid] = name
        return eid

    for city, country in country_of.items():
        triples.append((ent("place", city), "located_in", ent("place", country)))
    countries = sorted(set(country_of.values()))
    for person in dict.fromkeys([*celebs, *others, *(p.celebrity for p in pinned)]):
        triples.append((ent("person", person), "citizen_of",
                        ent("place", countries[int(rng.integers(len(countries)))])))
    for v in sorted(venue_class):
        vid = ent("venue", v)
        triples.append((vid, "instance_of", venue_class[v]))
        triples.append((vid, "located_in", ent("place", venue_city[v])))
    for e in sorted(event_cities):
        for city in sorted(event_cities[e]):
            triples.append((ent("event", e), "held_in", ent("place", city)))
    ids = sorted({x for h, _, t in triples for x in (h, t)})
    ent_vecs = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(len(ids), dim))
    rel_vecs = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(len(RELATIONS), dim))
    kb_labels = {i: labels.get(i, i) for i in ids}
    kb = KnowledgeBase(triples, WordVectors({i: n for n, i in enumerate(ids)}, ent_vecs),
                       WordVectors({r: n for n, r in enumerate(RELATIONS)}, rel_vecs),
                       {normalize_label(label): i for i, label in kb_labels.items() if i in labels})
    return kb, kb_labels
