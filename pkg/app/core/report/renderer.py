"""Fixed-width text rendering of trace summaries, evaluation, ablation, policy and scenario reports."""

from pathlib import Path
from typing import Optional, Sequence

import pandas as pd
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from app.core.eval.ablation import AblationReport
from app.core.eval.report import EvalReport
from app.core.ml.model import KIND_TITLES
from app.core.sim.replay import PolicyOutcome, no_loss_events
from app.core.sim.trace import TraceSummary
from config import LABELS, MODEL_KINDS

KIND_SHORT = {kind: alias.upper() for kind, alias, _ in MODEL_KINDS}


def fixed2(value: float) -> str:
    return f"{value:.2f}"


class ReportRenderer:
    """Renders reports with the jinja2 templates under ``templates/``.

    Output depends only on the report contents, so rendering a report loaded
    back from JSON gives the same bytes.
    """

    def __init__(self, template_dir: Optional[str] = None):
        if template_dir:
            self.template_dir = str(template_dir)
        else:
            module_path = Path(__file__).parent.parent.parent.parent  # project root
            self.template_dir = str(module_path / "templates")
        self.env = Environment(
            loader=FileSystemLoader(self.template_dir),
            undefined=StrictUndefined,
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True,
        )
        self.env.filters["fixed2"] = fixed2

    def _render(self, name: str, **context) -> str:
        return self.env.get_template(name).render(**context)

    def trace_summary(self, summary: TraceSummary) -> str:
        return self._render("trace_summary.txt.j2", summary=summary)

    def eval_report(self, report: EvalReport) -> str:
        meta = report.meta
        return self._render(
            "eval_report.txt.j2",
            title=KIND_TITLES.get(meta.model_kind, meta.model_kind),
            meta=meta,
            per_class=report.per_class,
            macro_recall=report.macro_recall,
            macro_f1=report.macro_f1,
            accuracy=report.accuracy,
            undefined=report.undefined_metrics,
            labels=LABELS,
            confusion=report.confusion,
        )

    def ablation(self, report: AblationReport) -> str:
        kinds = [{"alias": KIND_SHORT.get(k, k), "title": KIND_TITLES.get(k, k)} for k in report.kinds]
        rows = []
        failures = []
        for row in report.rows:
            cells = [row.cell(kind) for kind in report.kinds]
            rows.append(
                {
                    "title": row.title,
                    "recall": [cell.macro_recall for cell in cells],
                    "f1": [cell.macro_f1 for cell in cells],
                }
            )
            for cell in cells:
                if any(result.permutation_changes for result in cell.per_seed):
                    failures.append(f"{row.title}/{KIND_SHORT.get(cell.kind, cell.kind)}")
        return self._render(
            "ablation.txt.j2",
            seeds=report.seeds,
            kinds=kinds,
            rows=rows,
            permutation_failures=failures,
        )

    def scenario_comparison(self, table: pd.DataFrame) -> str:
        return self._render("scenario_comparison.txt.j2", rows=table.to_dict("records"))

    def policy_comparison(self, outcomes: Sequence[PolicyOutcome]) -> str:
        digests = {outcome.trace_digest for outcome in outcomes}
        return self._render(
            "policy_comparison.txt.j2",
            outcomes=outcomes,
            no_loss_events=no_loss_events(outcomes),
            identical=len(outcomes) > 1 and len(digests) == 1,
        )


__all__ = ["KIND_SHORT", "ReportRenderer", "fixed2"]
