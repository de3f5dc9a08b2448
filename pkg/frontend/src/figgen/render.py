"""Figure rendering: CSV in, image + sidecar JSON out, no recomputation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .errors import SchemaError  # noqa: E402

MODULE_ORDER = ("Encoder", "Backbone", "Neck", "Head")

KINDS = ("param_counts", "abs_diff_pair", "rel_diff_pair",
         "abs_diff_vs_base", "rel_diff_vs_base", "table_markdown")

_DIFF_COLUMNS = {"base_name", "target_name", "module", "n_params",
                 "d_diff", "d_sum", "d", "mode"}


@dataclass(frozen=True)
class FigureSpec:
    csv_path: Path
    kind: str
    out_path: Path
    sidecar_path: Path | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; "
                              f"expected one of {KINDS}")


def _read_rows(path: Path, required: set[str]) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = set(reader.fieldnames or [])
        missing = required - header
        if missing:
            raise SchemaError(f"{path}: missing columns {sorted(missing)}")
        return list(reader)


def _module_values(rows: list[dict], value_column: str,
                   parse) -> dict[str, object]:
    by_module = {r["module"]: parse(r[value_column]) for r in rows}
    missing = [m for m in MODULE_ORDER if m not in by_module]
    if missing:
        raise SchemaError(f"missing rows for modules {missing}")
    return {m: by_module[m] for m in MODULE_ORDER}


def _bar_figure(out_path: Path, title: str, labels, series: dict) -> None:
    """series: legend label -> list of bar heights aligned with labels."""
    fig, ax = plt.subplots(figsize=(6, 4))
    width = 0.8 / len(series)
    for i, (name, values) in enumerate(series.items()):
        x = [j + i * width for j in range(len(labels))]
        ax.bar(x, values, width=width, label=name)
    ax.set_xticks([j + 0.4 - width / 2 for j in range(len(labels))])
    ax.set_xticklabels(labels)
    ax.set_title(title)
    if len(series) > 1 or next(iter(series)) != "":
        ax.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def _render_param_counts(spec: FigureSpec) -> dict:
    rows = _read_rows(spec.csv_path, {"module", "n_params"})
    values = _module_values(rows, "n_params", int)
    _bar_figure(spec.out_path, "Parameters per module",
                list(MODULE_ORDER), {"": [values[m] for m in MODULE_ORDER]})
    return {"kind": spec.kind, "modules": list(MODULE_ORDER),
            "values": [values[m] for m in MODULE_ORDER]}


def _render_diff_pair(spec: FigureSpec, mode: str) -> dict:
    rows = _read_rows(spec.csv_path, _DIFF_COLUMNS)
    rows = [r for r in rows if r["mode"] == mode]
    if not rows:
        raise SchemaError(f"{spec.csv_path}: no rows with mode={mode!r}")
    base, target = rows[0]["base_name"], rows[0]["target_name"]
    pair = [r for r in rows
            if r["base_name"] == base and r["target_name"] == target]
    values = _module_values(pair, "d", float)
    _bar_figure(spec.out_path, f"{mode.capitalize()} drift: {base} vs {target}",
                list(MODULE_ORDER), {"": [values[m] for m in MODULE_ORDER]})
    return {"kind": spec.kind, "base": base, "target": target, "mode": mode,
            "modules": list(MODULE_ORDER),
            "values": [values[m] for m in MODULE_ORDER]}


def _render_diff_vs_base(spec: FigureSpec, mode: str) -> dict:
    rows = _read_rows(spec.csv_path, _DIFF_COLUMNS)
    rows = [r for r in rows if r["mode"] == mode]
    if not rows:
        raise SchemaError(f"{spec.csv_path}: no rows with mode={mode!r}")
    base = rows[0]["base_name"]
    targets: list[str] = []
    per_target: dict[str, list[dict]] = {}
    for r in rows:
        if r["base_name"] != base:
            continue
        per_target.setdefault(r["target_name"], []).append(r)
        if r["target_name"] not in targets:
            targets.append(r["target_name"])
    values = {t: _module_values(per_target[t], "d", float) for t in targets}
    series = {t: [values[t][m] for m in MODULE_ORDER] for t in targets}
    _bar_figure(spec.out_path, f"{mode.capitalize()} drift vs {base}",
                list(MODULE_ORDER), series)
    return {"kind": spec.kind, "base": base, "targets": targets, "mode": mode,
            "modules": list(MODULE_ORDER), "values": series}


def _render_table_markdown(spec: FigureSpec) -> dict:
    with open(spec.csv_path, newline="") as fh:
        reader = csv.reader(fh)
        table = list(reader)
    if not table or not table[0]:
        raise SchemaError(f"{spec.csv_path}: empty CSV")
    header, body = table[0], table[1:]
    if any(len(row) != len(header) for row in body):
        raise SchemaError(f"{spec.csv_path}: ragged rows")
    lines = ["| " + " | ".join(header) + " |",
             "| " + " | ".join("---" for _ in header) + " |"]
    lines += ["| " + " | ".join(row) + " |" for row in body]
    spec.out_path.write_text("\n".join(lines) + "\n")
    return {"kind": spec.kind, "columns": header, "rows": body}


def render(spec: FigureSpec) -> dict:
    """Render one figure; returns the sidecar payload (also written to disk)."""
    if spec.kind == "param_counts":
        payload = _render_param_counts(spec)
    elif spec.kind in ("abs_diff_pair", "rel_diff_pair"):
        payload = _render_diff_pair(
            spec, "absolute" if spec.kind.startswith("abs") else "relative")
    elif spec.kind in ("abs_diff_vs_base", "rel_diff_vs_base"):
        payload = _render_diff_vs_base(
            spec, "absolute" if spec.kind.startswith("abs") else "relative")
    else:
        payload = _render_table_markdown(spec)
    sidecar = spec.sidecar_path or spec.out_path.with_suffix(".json")
    Path(sidecar).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    return payload
