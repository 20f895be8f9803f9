"""Caption normalization shared by ingestion, retrieval and scoring."""

from __future__ import annotations

import re
from dataclasses import dataclass

_APOSTROPHE = re.compile(r"['\u2019]")
_PUNCT = re.compile(r"[^\w\s]|_")


def tokenize(text: str) -> list[str]:
    """Lowercase, drop punctuation, split on whitespace."""
    text = _APOSTROPHE.sub("", text.lower())
    return _PUNCT.sub(" ", text).split()


@dataclass(frozen=True)
class CaptionRecord:
    """One reference caption of a training image."""

    caption_id: str
    image_id: str
    text: str
    tokens: tuple[str, ...]

    @classmethod
    def from_text(cls, image_id: str, index: int, text: str) -> "CaptionRecord":
        return cls(f"{image_id}#{index}", image_id, text, tuple(tokenize(text)))
