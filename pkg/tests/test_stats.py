import numpy as np
import pytest
from scipy import stats as sps

from demobot.annotate.oracle import annotate_episode
from demobot.eval.textstats import (char_stats, chi_square_p, keyword_freq,
                                    odds_ratio_from_table, ratio_label,
                                    safety_odds_ratio)


def brute_force_or(a, b, c, d):
    if a == 0 or b == 0 or c == 0 or d == 0:
        a, b, c, d = a + 0.5, b + 0.5, c + 0.5, d + 0.5
    return (a * d) / (b * c)


def test_odds_ratio_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a, b, c, d = (int(x) for x in rng.integers(0, 2000, size=4))
        assert abs(odds_ratio_from_table(a, b, c, d)
                   - brute_force_or(a, b, c, d)) < 1e-12


def test_symmetric_table_is_one():
    assert odds_ratio_from_table(10, 990, 10, 990) == 1.0
    assert odds_ratio_from_table(7, 7, 7, 7) == 1.0


def test_hand_computed_example():
    assert odds_ratio_from_table(10, 990, 2, 998) == pytest.approx(
        (10 * 998) / (990 * 2))


def test_chi_square_matches_scipy():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a, b, c, d = (int(x) for x in rng.integers(1, 500, size=4))
        _, p, _, _ = sps.chi2_contingency([[a, b], [c, d]], correction=False)
        assert chi_square_p(a, b, c, d) == pytest.approx(p, rel=1e-10)


def test_ratio_label_convention():
    assert ratio_label(697, 68) == "10.2x"
    assert ratio_label(100, 100) == "1.0x"
    with pytest.raises(ValueError):
        ratio_label(1, 0)


def test_char_stats_means_and_ratio():
    out = char_stats({"long": ["x" * 697], "short": ["y" * 68]})
    assert out["groups"]["long"]["mean_chars"] == 697.0
    assert out["groups"]["short"]["mean_chars"] == 68.0
    assert out["length_ratio"] == "10.2x"
    single = char_stats({"g": ["abcdefghij" * 10]})
    assert single["groups"]["g"]["mean_chars"] == 100.0


def test_all_tech_cap_corpus():
    out = char_stats({"g": ["The robot is pouring blue liquid from a beaker"]})
    assert out["groups"]["g"]["category_shares"]["Technical"] == 100.0


def test_keyword_freq_arithmetic():
    text = "safety " * 5 + "word " * 45
    assert keyword_freq([text])["safety"] == pytest.approx(100.0)
    assert keyword_freq([]) == {t: 0.0 for t in keyword_freq([])}
    with pytest.raises(ValueError):
        keyword_freq(["x"], themes={"empty": ()})


def test_em_corpus_learning_over_safety(em_episode):
    texts = list(annotate_episode(em_episode).values())
    freq = keyword_freq(texts)
    assert freq["learning"] > freq["safety"]


def test_safety_odds_ratio_on_annotations(intrusion_episode):
    from demobot.data.episode import chunk_stage_info
    anns = annotate_episode(intrusion_episode)
    info = chunk_stage_info(intrusion_episode)
    hand = [t for k, t in anns.items() if info[k][1]]
    nohand = [t for k, t in anns.items() if not info[k][1]]
    odds, p, table = safety_odds_ratio(hand, nohand)
    assert odds > 1.0
    assert 0.0 <= p <= 1.0
    assert all(x >= 0 for x in table)
    with pytest.raises(ValueError):
        safety_odds_ratio([], nohand)
