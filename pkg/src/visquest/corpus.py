"""Question-corpus file handling and preprocessing.

The corpus format is JSON lines, one object per line:
{"image": str, "region": [4 ints], "target_word": str, "question": str}.
The filter keeps only "what ..." questions, drops "what color ..." ones,
and caps how often the same question may repeat, so a large noisy corpus
can be reduced to a balanced training set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError
from .qgen import tokenize

DEFAULT_CAP = 50


@dataclass
class CorpusEntry:
    image: str
    region: tuple
    target_word: str
    question: str

    def to_dict(self) -> dict:
        return {"image": self.image, "region": list(self.region),
                "target_word": self.target_word, "question": self.question}


def load_corpus(path) -> list:
    entries = []
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise DataError(f"corpus file not found: {path}")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            entries.append(CorpusEntry(
                image=obj["image"], region=tuple(obj["region"]),
                target_word=obj["target_word"], question=obj["question"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataError(f"bad corpus line {lineno}: {exc}")
    return entries


def save_corpus(entries, path) -> None:
    lines = [json.dumps(e.to_dict()) for e in entries]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def filter_corpus(entries, cap: int = DEFAULT_CAP) -> list:
    """Keep "what ..." questions, drop "what color ...", cap repeats.

    Identical questions are compared after tokenization, so punctuation
    and case differences do not defeat the cap. Order is preserved and the
    first `cap` occurrences win.
    """
    if cap < 1:
        raise DataError("cap must be >= 1")
    kept = []
    counts = {}
    for entry in entries:
        tokens = tokenize(entry.question)
        if not tokens or tokens[0] != "what":
            continue
        if len(tokens) >= 2 and tokens[1] == "color":
            continue
        key = " ".join(tokens)
        seen = counts.get(key, 0)
        if seen >= cap:
            continue
        counts[key] = seen + 1
        kept.append(entry)
    return kept
