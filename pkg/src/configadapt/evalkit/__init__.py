from .matching import MatchConfig, ap_from_pr, match_class, match_pooled
from .report import CSV_HEADER, EvalReport, evaluate
