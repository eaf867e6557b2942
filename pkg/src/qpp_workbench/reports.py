"""TSV and Markdown rendering of sensitivity and contingency reports."""

from __future__ import annotations

from typing import Optional, Sequence

from .harness import Axis, ContingencyReport, QppOutcome, SensitivityReport

NA = "n/a"


def fmt(value: Optional[float], places: int = 4) -> str:
    return NA if value is None else f"{value:.{places}f}"


def _mark(values: Sequence[Optional[float]]) -> tuple[Optional[float], Optional[float]]:
    defined = [v for v in values if v is not None]
    if len(defined) < 2:
        return None, None
    return min(defined), max(defined)


def sensitivity_tsv(report: SensitivityReport) -> str:
    header = ["correlation", "model", *report.metrics, "sigma_theta", "excluded"]
    lines = ["\t".join(header)]
    for kind in report.correlations:
        for model in report.models:
            row = [kind.symbol, model]
            row += [fmt(report.cells[kind, model, m], 6) for m in report.metrics]
            row += [fmt(report.sigma_theta[kind, model], 6), str(report.excluded_theta[kind, model])]
            lines.append("\t".join(row))
        row = [kind.symbol, "sigma_S"]
        row += [fmt(report.sigma_S[kind, m], 6) for m in report.metrics]
        row += ["", str(sum(report.excluded_S[kind, m] for m in report.metrics))]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def sensitivity_markdown(report: SensitivityReport) -> str:
    """Outcome grid per correlation kind; lowest spread in bold, highest in italics."""
    def cell(v, lo, hi):
        s = fmt(v)
        if v is not None and lo is not None and lo != hi:
            if v == lo:
                return f"**{s}**"
            if v == hi:
                return f"_{s}_"
        return s

    out = [f"### {report.predictor}", ""]
    out.append("| | Model | " + " | ".join(report.metrics) + " | σ(θ) |")
    out.append("|---|---|" + "---:|" * (len(report.metrics) + 1))
    for kind in report.correlations:
        theta = [report.sigma_theta[kind, m] for m in report.models]
        lo, hi = _mark(theta)
        for i, model in enumerate(report.models):
            vals = " | ".join(fmt(report.cells[kind, model, m]) for m in report.metrics)
            out.append(f"| {kind.symbol if i == 0 else ''} | {model} | {vals} | {cell(theta[i], lo, hi)} |")
        cols = [report.sigma_S[kind, m] for m in report.metrics]
        lo, hi = _mark(cols)
        out.append("| | σ(S) | " + " | ".join(cell(v, lo, hi) for v in cols) + " | |")
    excluded = sum(report.excluded_theta.values())
    out.append("")
    out.append(f"Bold: lowest spread in its group; italics: highest. Undefined cells excluded: {excluded}.")
    return "\n".join(out) + "\n"


def _contingency_rows(report: ContingencyReport):
    """Yield ((fixed, row_item), cells, row_item); cells left of the diagonal are ''."""
    for i, a in enumerate(report.varying[:-1]):
        for f in report.fixed:
            cells = [report.cell(f, a, b) if j > i else "" for j, b in enumerate(report.varying) if j > 0]
            yield (f, a), cells, a


def _header(report: ContingencyReport) -> list[str]:
    if report.axis is Axis.METRIC_PAIRS:
        return ["Model", "Metric", *report.varying[1:]]
    return ["Metric", "Model", *report.varying[1:]]


def contingency_tsv(report: ContingencyReport) -> str:
    lines = ["\t".join(_header(report))]
    for labels, cells, _ in _contingency_rows(report):
        lines.append("\t".join([*labels, *(c if c == "" else fmt(c, 6) for c in cells)]))
    return "\n".join(lines) + "\n"


def contingency_markdown(report: ContingencyReport) -> str:
    """Upper-triangular tau table; the lowest value of each row group is bold."""
    what = "metrics" if report.axis is Axis.METRIC_PAIRS else "retrieval models"
    out = [
        f"### Stability of predictor ranking across {what} (ranked by {report.rank_by.symbol})",
        "",
        "| " + " | ".join(_header(report)) + " |",
        "|---|---|" + "---:|" * (len(report.varying) - 1),
    ]
    rows = list(_contingency_rows(report))
    group_min: dict[str, float] = {}
    for _, cells, group in rows:
        for c in cells:
            if c != "" and c is not None:
                group_min[group] = min(group_min.get(group, 2.0), c)
    last_group = None
    for labels, cells, group in rows:
        shown = []
        for c in cells:
            if c == "":
                shown.append("")
            elif c is not None and c == group_min.get(group):
                shown.append(f"**{fmt(c)}**")
            else:
                shown.append(fmt(c))
        second = labels[1] if group != last_group else ""
        last_group = group
        out.append(f"| {labels[0]} | {second} | " + " | ".join(shown) + " |")
    out.append("")
    out.append(f"Battery: {', '.join(report.battery)}.")
    return "\n".join(out) + "\n"


def outcomes_tsv(outcomes: Sequence[QppOutcome]) -> str:
    kinds = sorted({k for o in outcomes for k in o.by_correlation}, key=lambda k: list(type(k)).index(k))
    lines = ["\t".join(["predictor", "model", "metric", "kappa", *(k.symbol for k in kinds)])]
    for o in outcomes:
        ctx = o.context
        vals = [fmt(o.by_correlation.get(k), 6) for k in kinds]
        lines.append("\t".join([o.predictor, ctx.model.label, ctx.metric.label, str(ctx.kappa), *vals]))
    return "\n".join(lines) + "\n"


def orderings_tsv(report: ContingencyReport) -> str:
    lines = ["\t".join(["fixed", "varying", "ordering"])]
    for (f, v), order in report.orderings.items():
        lines.append("\t".join([f, v, " > ".join(order)]))
    return "\n".join(lines) + "\n"
