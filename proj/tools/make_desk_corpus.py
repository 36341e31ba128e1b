#!/usr/bin/env python3
"""Regenerates the bundled desk corpus and lexicons under data/.

The output is deterministic; rerunning it reproduces the committed files.
"""
import pathlib
import random

POSITIVE = ["great", "good", "wonderful", "excellent", "brilliant", "delightful",
            "superb", "charming", "moving", "fantastic", "enjoyable", "fun",
            "beautiful", "clever", "touching", "gripping", "lovely", "fresh"]
NEGATIVE = ["bad", "terrible", "awful", "boring", "dull", "poor", "horrible",
            "weak", "tedious", "messy", "bland", "lifeless", "clumsy",
            "forgettable", "painful", "stale", "ugly", "silly"]
SUBJECTS = ["the movie", "the film", "the plot", "the acting", "the soundtrack",
            "the cast", "the ending", "the script", "the director", "the story",
            "this picture", "the dialogue", "the pacing", "the photography",
            "the lead", "the sequel", "the score", "the humor"]
ADVERBS = ["really", "quite", "very", "truly", "rather", "simply", "mostly",
           "often", "always", "just"]
OPENERS = ["honestly ,", "overall ,", "frankly ,", "in the end ,", "to be fair ,",
           "at times ,", "for me ,", "sadly ,", "luckily ,", ""]
LINKS = ["and", "while", "and also", "as well as how", "plus"]

SYNONYMS = {
    "great": ["good", "excellent", "fantastic", "superb", "wonderful"],
    "good": ["great", "fine", "nice", "decent"],
    "wonderful": ["great", "lovely", "delightful", "fantastic"],
    "excellent": ["great", "superb", "brilliant"],
    "brilliant": ["excellent", "clever", "superb"],
    "delightful": ["charming", "lovely", "wonderful"],
    "superb": ["excellent", "great", "brilliant"],
    "charming": ["delightful", "lovely"],
    "moving": ["touching", "affecting"],
    "touching": ["moving", "affecting"],
    "fantastic": ["great", "wonderful"],
    "enjoyable": ["fun", "pleasant"],
    "fun": ["enjoyable", "entertaining"],
    "beautiful": ["lovely", "gorgeous"],
    "lovely": ["beautiful", "charming", "delightful"],
    "bad": ["poor", "awful", "terrible"],
    "terrible": ["awful", "horrible", "bad"],
    "awful": ["terrible", "horrible", "bad"],
    "horrible": ["awful", "terrible"],
    "boring": ["dull", "tedious"],
    "dull": ["boring", "tedious", "bland"],
    "tedious": ["boring", "dull"],
    "poor": ["bad", "weak"],
    "weak": ["poor", "feeble"],
    "bland": ["dull", "stale"],
    "stale": ["bland"],
    "movie": ["film", "picture"],
    "film": ["movie", "picture"],
    "picture": ["movie", "film"],
    "story": ["plot", "tale"],
    "plot": ["story"],
    "score": ["soundtrack", "music"],
    "soundtrack": ["score", "music"],
    "really": ["truly", "very"],
    "truly": ["really"],
    "very": ["really", "quite"],
}
ANTONYMS = {
    "great": ["terrible", "awful"],
    "good": ["bad", "poor"],
    "wonderful": ["awful"],
    "excellent": ["poor", "terrible"],
    "brilliant": ["dull"],
    "delightful": ["horrible"],
    "superb": ["awful"],
    "charming": ["ugly"],
    "moving": ["lifeless"],
    "fantastic": ["horrible"],
    "enjoyable": ["painful", "tedious"],
    "fun": ["boring"],
    "beautiful": ["ugly"],
    "clever": ["silly", "clumsy"],
    "touching": ["lifeless"],
    "gripping": ["boring"],
    "lovely": ["ugly"],
    "fresh": ["stale"],
    "bad": ["good"],
    "terrible": ["great", "excellent"],
    "awful": ["wonderful", "great"],
    "boring": ["gripping", "fun"],
    "dull": ["brilliant"],
    "poor": ["good", "excellent"],
    "horrible": ["delightful", "fantastic"],
    "weak": ["strong"],
    "tedious": ["enjoyable"],
    "bland": ["fresh"],
    "lifeless": ["moving"],
    "clumsy": ["clever"],
    "painful": ["enjoyable"],
    "stale": ["fresh"],
    "ugly": ["beautiful", "lovely"],
    "silly": ["clever"],
    "always": ["never"],
}
PAIRS = [
    ("great", "terrible", "desk-sentiment"),
    ("movie", "film", "desk-sentiment"),
    ("boring", "dull", "desk-sentiment"),
    ("yoga", "burg", "snli-example"),
    ("plot", "plot", "identity"),
]


def clause(rng, polarity):
    words = POSITIVE if polarity > 0 else NEGATIVE
    adv = rng.choice(ADVERBS) + " " if rng.random() < 0.5 else ""
    verb = rng.choice(["was", "is", "felt", "seemed"])
    return f"{rng.choice(SUBJECTS)} {verb} {adv}{rng.choice(words)}"


def sentence(rng):
    label = rng.randint(0, 1)
    polarity = 1 if label == 1 else -1
    roll = rng.random()
    if roll < 0.45:
        parts = [clause(rng, polarity)]
    elif roll < 0.85:
        parts = [clause(rng, polarity), rng.choice(LINKS), clause(rng, polarity)]
    else:
        parts = [clause(rng, polarity), rng.choice(LINKS), clause(rng, polarity),
                 ", but", clause(rng, -polarity)]
    opener = rng.choice(OPENERS) if rng.random() < 0.3 else ""
    text = " ".join(([opener] if opener else []) + parts) + " ."
    return label, text


def write_lexicon(path, table):
    lines = [f"{w}\t{','.join(vals)}" for w, vals in sorted(table.items())]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data"
    out.mkdir(exist_ok=True)
    rng = random.Random(20231016)
    seen = set()
    rows = []
    while len(rows) < 600:
        label, text = sentence(rng)
        if text in seen:
            continue
        seen.add(text)
        rows.append(f"{label}\t{text}")
    (out / "sentiment.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    write_lexicon(out / "synonyms.tsv", SYNONYMS)
    write_lexicon(out / "antonyms.tsv", ANTONYMS)
    (out / "pairs.tsv").write_text(
        "\n".join("\t".join(p) for p in PAIRS) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
