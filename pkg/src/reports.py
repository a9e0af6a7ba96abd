"""
Rendering of reports as JSON and CSV text.

Output never carries timestamps, so identical runs produce identical bytes.
"""

import csv
import io
import json
import math
from typing import Any, Dict, Iterable, List, Optional, Sequence

from pydantic import BaseModel

from .dynamics import DecayReport, HypercyclicityVerdict
from .shadowing import ShadowErrorTable

INFINITY = "∞"


def format_value(value: Any) -> Any:
    if isinstance(value, float) and math.isinf(value):
        return INFINITY if value > 0 else "-" + INFINITY
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def _jsonable(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return _jsonable(value.model_dump())
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    return format_value(value)


def to_json(value: Any) -> str:
    return json.dumps(_jsonable(value), ensure_ascii=False, indent=2) + "\n"


def to_csv(rows: Iterable[Dict[str, Any]], fieldnames: Sequence[str], header_lines: Sequence[str] = ()) -> str:
    buffer = io.StringIO()
    for line in header_lines:
        buffer.write(f"# {line}\n")
    writer = csv.DictWriter(buffer, fieldnames=list(fieldnames), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: format_value(value) for key, value in row.items()})
    return buffer.getvalue()


def decay_csv(report: DecayReport) -> str:
    """Rows ``vertex,n,value``, verdicts in a leading comment block."""
    header = [
        f"quantity={report.quantity} q={report.q}",
        f"verdict={report.verdict}",
        f"shared_n={' '.join(str(n) for n in report.shared_n)}",
    ]
    for probe in report.probes:
        ratio = report.ratios[probe]
        header.append(
            f"probe={probe} verdict={report.probe_verdicts[probe]} "
            f"ratio={format_value(ratio)} subsequence={report.subsequence[probe]}"
        )
    header.append(report.note)
    rows = (
        {"vertex": probe, "n": n, "value": value}
        for probe in report.probes
        for n, value in zip(report.grid, report.values[probe])
    )
    return to_csv(rows, ["vertex", "n", "value"], header)


def verdict_csv(verdict: HypercyclicityVerdict) -> str:
    header = [
        f"operator={verdict.operator} status={verdict.status} reason={verdict.reason}",
        f"theorem={verdict.theorem}",
        f"witness={verdict.witness} evidence_graded={verdict.evidence_graded}",
    ]
    if verdict.note:
        header.append(verdict.note)
    blocks = [to_csv([], ["vertex", "n", "value"], header)]
    blocks.extend(decay_csv(report) for report in verdict.reports)
    return "".join(blocks)


def shadow_csv(table: ShadowErrorTable) -> str:
    rows = ({"k": row.k, "n_k": row.n_k, "error": row.error} for row in table.rows)
    header = [f"epsilon={table.epsilon} vector_norm={table.vector_norm}"]
    return to_csv(rows, ["k", "n_k", "error"], header)


NORM_FIELDS = ["quantity", "closed_form", "tag", "oracle", "delta"]


def norm_row(quantity: str, closed_form: float, tag: str, oracle: Optional[float] = None) -> Dict[str, Any]:
    delta = None if oracle is None or math.isinf(closed_form) else abs(closed_form - oracle)
    return {"quantity": quantity, "closed_form": closed_form, "tag": tag, "oracle": oracle, "delta": delta}


def norms_csv(rows: List[Dict[str, Any]]) -> str:
    return to_csv(rows, NORM_FIELDS)


def equivalence_csv(residuals: Sequence[float]) -> str:
    rows = ({"sample": index, "residual": residual} for index, residual in enumerate(residuals))
    header = [f"samples={len(residuals)} max_residual={max(residuals, default=0.0)}"]
    return to_csv(rows, ["sample", "residual"], header)


def emit(text: str, out: Optional[str] = None) -> None:
    """Write to the output path, or stdout when none is given."""
    if out:
        with open(out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        print(text, end="")
