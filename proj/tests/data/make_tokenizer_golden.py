"""Writes tokenizer_golden.json from a from-scratch FNV-1a reference."""
import json
import re

OFFSET = 0xCBF29CE484222325
PRIME = 0x100000001B3
MASK = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = OFFSET
    for b in data:
        h = ((h ^ b) * PRIME) & MASK
    return h


def words(text: str):
    return [w.lower() for w in re.findall(rb"[A-Za-z0-9]+", text.encode())]


def trigrams(text: str):
    out = []
    for w in words(text):
        m = b"#" + w + b"#"
        out += [m[i:i + 3] for i in range(len(m) - 2)]
    return out


def buckets(tokens, vocab):
    if not tokens:
        return [0]
    return [1 + fnv1a64(t) % (vocab - 1) for t in tokens]


TEXTS = [
    "", "   ", "!!!", "a", "Cat", "cat litter", "CAT  litter,  40 LB",
    "stainless-steel 12\" skillet", "the quick brown fox", "e-commerce search",
    "café au lait", "x1 x2 x3", "Nonstick Pan for skillet", "a b c d e f g",
    "under_score and.dots", "TAB\tSEPARATED\nlines", "0", "9999999999",
]

cases = []
for vocab in (2, 3, 97, 16384, 1 << 20):
    for t in TEXTS:
        cases.append({"text": t, "vocab": vocab, "kind": "word", "buckets": buckets(words(t), vocab)})
        cases.append({"text": t, "vocab": vocab, "kind": "trigram", "buckets": buckets(trigrams(t), vocab)})
hashes = [{"text": t, "fnv1a64": str(fnv1a64(t.encode()))} for t in ["", "a", "foobar", "cat litter"]]

with open("tokenizer_golden.json", "w") as f:
    json.dump({"cases": cases, "hashes": hashes}, f, indent=1, ensure_ascii=False)
