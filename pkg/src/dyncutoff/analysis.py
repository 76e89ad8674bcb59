"""Text analysis: tokenization, stopping and a light plural stemmer."""

from __future__ import annotations

import re
from dataclasses import dataclass

_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")

# Standard English stopword list (the common SMART/NLTK core).
STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because
    been before being below between both but by can could did do does doing
    down during each few for from further had has have having he her here hers
    herself him himself his how i if in into is it its itself just me more
    most my myself no nor not now of off on once only or other our ours
    ourselves out over own same she should so some such than that the their
    theirs them themselves then there these they this those through to too
    under until up very was we were what when where which while who whom why
    will with would you your yours yourself yourselves
    """.split()
)


def s_stem(word: str) -> str:
    """Harman's S-stemmer: strips common English plural endings only."""
    if len(word) > 3 and word.endswith("ies") and not word.endswith(("eies", "aies")):
        return word[:-3] + "y"
    if len(word) > 3 and word.endswith("es") and not word.endswith(("aes", "ees", "oes")):
        return word[:-1]
    if len(word) > 2 and word.endswith("s") and not word.endswith(("us", "ss")):
        return word[:-1]
    return word


@dataclass(frozen=True)
class AnalyzerConfig:
    lowercase: bool = True
    stopwords: bool = True
    stem: bool = True

    def describe(self) -> str:
        return (
            f"tokenizer=alnum lowercase={int(self.lowercase)} "
            f"stopwords={'english' if self.stopwords else 'none'} "
            f"stemmer={'s-stemmer' if self.stem else 'none'}"
        )


class Analyzer:
    def __init__(self, config: AnalyzerConfig | None = None):
        self.config = config or AnalyzerConfig()

    def __call__(self, text: str) -> list[str]:
        if self.config.lowercase:
            text = text.lower()
        tokens = _TOKEN_RE.findall(text)
        if self.config.stopwords:
            tokens = [t for t in tokens if t not in STOPWORDS]
        if self.config.stem:
            tokens = [s_stem(t) for t in tokens]
        return tokens
