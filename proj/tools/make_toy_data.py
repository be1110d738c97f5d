#!/usr/bin/env python3
"""Writes the small fixtures under data/ (deterministic)."""
import random
import sys
from pathlib import Path

out = Path(sys.argv[1] if len(sys.argv) > 1 else "data")
out.mkdir(parents=True, exist_ok=True)
rng = random.Random(7)

OUTCOMES = {
    "Physiological": ["blood pressure", "wheezing", "pain score", "incisional hernia", "wound infection"],
    "Mortality": ["death", "overall survival", "mortality"],
    "Life-Impact": ["quality of life", "social functioning", "return to work"],
    "Resource-use": ["length of stay", "readmission", "hospital costs"],
    "Adverse-effects": ["nausea", "rash", "serious adverse events", "headache"],
}
FRAMES = [
    "the primary outcome was {} at one year",
    "{} was assessed at six months",
    "we observed fewer cases of {} in the treatment group",
    "{} did not differ between groups",
]
FILLERS = [
    "patients were randomised to two arms",
    "the trial was approved by the ethics board",
    "adults undergoing surgery were enrolled",
    "follow up lasted two years",
]


def sentence(text, types):
    lines = []
    inside = False
    for word in text.split():
        opens = word.startswith("[")
        closes = word.endswith("]")
        word = word.strip("[]")
        if opens:
            tag = "B"
        elif inside:
            tag = "I"
        else:
            tag = "O"
        if opens or inside:
            inside = not closes
        lines.append(f"{word}\t{tag}")
    lines.append("#types:" + "|".join(types))
    return "\n".join(lines)


def abstract(doc_id, n):
    body = [f"#doc {doc_id}"]
    for _ in range(n):
        if rng.random() < 0.25:
            body.append(sentence(rng.choice(FILLERS), []))
            continue
        t = rng.choice(list(OUTCOMES))
        phrase = rng.choice(OUTCOMES[t])
        body.append(sentence(rng.choice(FRAMES).format("[" + phrase + "]"), [t]))
    return "\n".join(body) + "\n"


def write_corpus(name, prefix, docs):
    (out / name).write_text("".join(abstract(f"{prefix}-{i}", rng.randint(4, 7)) for i in range(docs)))


write_corpus("train.corpus", "train", 12)
write_corpus("dev.corpus", "dev", 4)

vocab = set()
for text in FRAMES + FILLERS:
    vocab.update(text.replace("{}", "").split())
for phrases in OUTCOMES.values():
    for p in phrases:
        vocab.update(p.split())
dim = 16
with open(out / "embeddings.vec", "w") as f:
    for w in sorted(vocab):
        f.write(w + " " + " ".join(f"{rng.gauss(0, 1):.5f}" for _ in range(dim)) + "\n")

(out / "toy.conf").write_text(
    "# tiny model for the bundled fixtures\n"
    "embeddings_path = data/embeddings.vec\n"
    "hidden_dim = 16\n"
    "attention_b = 8\n"
    "batch_size = 2\n"
    "epochs = 60\n"
    "seed = 1\n"
)
