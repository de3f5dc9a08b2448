"""Layer-wise L1 parameter drift between checkpoints.

A checkpoint here is an ordered mapping of parameter name -> numpy array
plus optional metadata. For each module tag the absolute drift is the sum of
elementwise L1 differences over parameter names shared by both checkpoints;
relative mode divides by the L1 norm of the base parameters, falling back to
the absolute value when that norm is zero. Accumulation is float64 in
lexicographic name order so reports are byte-stable.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch

MODULES = ("Encoder", "Backbone", "Neck", "Head")
_PREFIXES = {
    "encoder.": "Encoder",
    "backbone.": "Backbone",
    "neck.": "Neck",
    "head.": "Head",
}
UNCATEGORIZED = "Uncategorized"


def categorize_layer(name: str) -> str:
    for prefix, tag in _PREFIXES.items():
        if name.startswith(prefix):
            return tag
    return UNCATEGORIZED


@dataclass
class DiffReport:
    is_relative: bool
    d_diff: dict[str, float]
    d_sum: dict[str, float]
    d: dict[str, float]
    n_params: dict[str, int]
    warnings: list[str] = field(default_factory=list)

    def rows(self):
        for module in list(MODULES) + [UNCATEGORIZED]:
            if module == UNCATEGORIZED and self.n_params[module] == 0:
                continue
            yield {
                "module": module,
                "n_params": self.n_params[module],
                "d_diff": self.d_diff[module],
                "d_sum": self.d_sum[module],
                "d": self.d[module],
                "mode": "relative" if self.is_relative else "absolute",
            }


def diff(base: dict, target: dict, is_relative: bool = False) -> DiffReport:
    tags = list(MODULES) + [UNCATEGORIZED]
    d_diff = {m: 0.0 for m in tags}
    d_sum = {m: 0.0 for m in tags}
    n_params = {m: 0 for m in tags}
    warnings = []

    for name in sorted(base):
        arr_b = np.asarray(base[name])
        if name not in target or not np.issubdtype(arr_b.dtype, np.floating):
            continue
        arr_t = np.asarray(target[name])
        if arr_b.shape != arr_t.shape:
            raise ShapeMismatch(f"{name}: base {arr_b.shape} vs target {arr_t.shape}")
        module = categorize_layer(name)
        if module == UNCATEGORIZED:
            warnings.append(f"uncategorized parameter: {name}")
        delta = float(np.abs(arr_b.astype(np.float64) - arr_t.astype(np.float64)).sum())
        norm = float(np.abs(arr_b.astype(np.float64)).sum())
        d_diff[module] += delta
        d_sum[module] += norm
        n_params[module] += arr_b.size

    d = {}
    for module in tags:
        if is_relative and d_sum[module] > 0.0:
            d[module] = d_diff[module] / d_sum[module]
        else:
            d[module] = d_diff[module]
            if is_relative and d_diff[module] > 0.0:
                warnings.append(f"{module}: zero base norm, reporting absolute drift")
    return DiffReport(is_relative=is_relative, d_diff=d_diff, d_sum=d_sum, d=d,
                      n_params=n_params, warnings=warnings)


def count_params(ckpt: dict) -> dict[str, int]:
    counts = {m: 0 for m in list(MODULES) + [UNCATEGORIZED, "Total"]}
    for name, arr in ckpt.items():
        size = int(np.asarray(arr).size)
        counts[categorize_layer(name)] += size
        counts["Total"] += size
    return counts


PAIRWISE_COLUMNS = ["base_name", "target_name", "module", "n_params",
                    "d_diff", "d_sum", "d", "mode"]


def pairwise_report(checkpoints: list[tuple[str, dict]], is_relative: bool = False) -> str:
    """CSV over all ordered pairs of named checkpoints, one row per module."""
    if len(checkpoints) < 2:
        raise ValueError("pairwise_report needs at least 2 checkpoints")
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=PAIRWISE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for bname, bparams in checkpoints:
        for tname, tparams in checkpoints:
            if bname == tname:
                continue
            report = diff(bparams, tparams, is_relative)
            for row in report.rows():
                writer.writerow({"base_name": bname, "target_name": tname, **row})
    return buf.getvalue()
