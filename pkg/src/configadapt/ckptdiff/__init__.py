from .diff import (
    MODULES,
    PAIRWISE_COLUMNS,
    UNCATEGORIZED,
    DiffReport,
    categorize_layer,
    count_params,
    diff,
    pairwise_report,
)
