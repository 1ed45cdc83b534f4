"""Character statistics, odds ratios, and keyword frequencies over
generated text, mirroring the corpus analyses of the original study."""

import re

from scipy import stats

from .codebook import CATEGORIES, category_char_weights

SAFETY_CATEGORY = "Safety"

THEMES = {
    "learning": ("learn", "learning", "understand", "concept", "principle",
                 "why", "explains", "flux", "induced", "current", "voltage",
                 "energy", "goal"),
    "safety": ("safe", "safely", "safety", "caution", "hazard", "careful",
               "hot", "clear", "distance", "injury", "stop"),
    "procedure": ("next", "step", "first", "then", "place", "move", "add",
                  "pour", "hold", "return", "repeat", "seal", "dip"),
    "observation": ("watch", "observe", "observed", "observation", "notice",
                    "see", "meter", "color", "bubbles", "fizz", "record"),
}

_WORD = re.compile(r"[a-z0-9]+(?:['\-][a-z0-9]+)*")


def _tokens(text):
    return _WORD.findall(text.lower())


def odds_ratio_from_table(a, b, c, d):
    """(a·d)/(b·c) with the Haldane-Anscombe +0.5 correction on zero cells."""
    if min(a, b, c, d) == 0:
        a, b, c, d = a + 0.5, b + 0.5, c + 0.5, d + 0.5
    return (a * d) / (b * c)


def chi_square_p(a, b, c, d):
    """Uncorrected chi-square (1 df) p-value for the 2x2 count table."""
    n = a + b + c + d
    denom = (a + b) * (c + d) * (a + c) * (b + d)
    if denom == 0:
        return 1.0
    chi2 = n * (a * d - b * c) ** 2 / denom
    return float(stats.chi2.sf(chi2, df=1))


def safety_char_counts(texts):
    """(safety-coded chars, other chars) over a list of texts."""
    safety = total = 0
    for text in texts:
        total += len(text)
        safety += category_char_weights(text)[SAFETY_CATEGORY]
    return safety, max(0, total - safety)


def safety_odds_ratio(hand_texts, nohand_texts):
    """Odds ratio of safety-coded characters, hand vs. no-hand chunks.

    Returns (OR, p_value, (a, b, c, d)) where the table rows are the hand
    conditions and the columns are safety vs. other characters.
    """
    hand_texts, nohand_texts = list(hand_texts), list(nohand_texts)
    if not hand_texts or not nohand_texts:
        raise ValueError("both text groups must be non-empty")
    a, b = safety_char_counts(hand_texts)
    c, d = safety_char_counts(nohand_texts)
    return odds_ratio_from_table(a, b, c, d), chi_square_p(a, b, c, d), (a, b, c, d)


def ratio_label(larger, smaller):
    """Fig.-style one-decimal ratio string, e.g. 697 vs 68 -> '10.2x'."""
    if smaller <= 0:
        raise ValueError("ratio denominator must be positive")
    return f"{larger / smaller:.1f}x"


def char_stats(groups: dict):
    """Per-group mean character length and category character shares.

    groups maps a group name to its list of texts.  With exactly two
    groups the longer/shorter mean-length ratio label is included.
    """
    out = {"groups": {}}
    for name, texts in groups.items():
        texts = list(texts)
        mean_chars = (sum(len(t) for t in texts) / len(texts)) if texts else 0.0
        weights = {cat: 0 for cat in CATEGORIES}
        for t in texts:
            for cat, w in category_char_weights(t).items():
                weights[cat] += w
        coded = sum(weights.values())
        shares = {cat: (100.0 * w / coded if coded else 0.0)
                  for cat, w in weights.items()}
        out["groups"][name] = {"n_texts": len(texts), "mean_chars": mean_chars,
                               "category_shares": shares}
    if len(groups) == 2:
        (na, ga), (nb, gb) = out["groups"].items()
        hi, lo = max(ga["mean_chars"], gb["mean_chars"]), min(ga["mean_chars"], gb["mean_chars"])
        if lo > 0:
            out["length_ratio"] = ratio_label(hi, lo)
    return out


def keyword_freq(texts, themes=None):
    """Theme keyword occurrences per 1000 tokens (case-insensitive)."""
    themes = themes if themes is not None else THEMES
    if not themes or any(not lex for lex in themes.values()):
        raise ValueError("every theme needs a non-empty lexicon")
    total = 0
    counts = {theme: 0 for theme in themes}
    for text in texts:
        toks = _tokens(text)
        total += len(toks)
        for theme, lex in themes.items():
            lex = {w.lower() for w in lex}
            counts[theme] += sum(1 for t in toks if t in lex)
    if total == 0:
        return {theme: 0.0 for theme in themes}
    return {theme: 1000.0 * c / total for theme, c in counts.items()}
