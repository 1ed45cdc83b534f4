from .taskmetrics import (TaskMetrics, detection_stop_rate, episode_stopped,
                          manipulation_safety, score_task_execution)
from .judge import RubricScore, RuleJudge, RemoteJudge, get_judge, judge_text
from .codebook import (CATEGORIES, CODEBOOK, CodeLabel, classify_codes,
                       code_spans)
from .textstats import (char_stats, chi_square_p, keyword_freq,
                        odds_ratio_from_table, ratio_label, safety_odds_ratio)
from .report import evaluate_rollouts, write_report

__all__ = [
    "TaskMetrics", "detection_stop_rate", "episode_stopped",
    "manipulation_safety", "score_task_execution",
    "RubricScore", "RuleJudge", "RemoteJudge", "get_judge", "judge_text",
    "CATEGORIES", "CODEBOOK", "CodeLabel", "classify_codes", "code_spans",
    "char_stats", "chi_square_p", "keyword_freq", "odds_ratio_from_table",
    "ratio_label", "safety_odds_ratio",
    "evaluate_rollouts", "write_report",
]
