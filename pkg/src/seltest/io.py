"""CSV ingestion and report emission (JSON, CSV, text, optional plots)."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import ConfigurationError, DataError
from .reports import Test2Report, TestReport

__all__ = ["ColumnRoles", "load_csv", "emit_report", "report_to_dict", "save_plots"]


@dataclass
class ColumnRoles:
    """Column-name assignment for a CSV file."""

    outcome: str
    selection: str
    x: list[str]
    zc: list[str] = field(default_factory=list)
    zd: list[str] = field(default_factory=list)
    p: str | None = None

    def validate(self):
        if not self.x:
            raise ConfigurationError("at least one x column is required")
        named = [self.outcome, self.selection, *self.zd]
        seen = set()
        for c in named:
            if c in seen:
                raise ConfigurationError(f"column {c!r} assigned to several roles")
            seen.add(c)
        overlap = (set(self.x) | set(self.zc)) & {self.outcome, self.selection, *self.zd}
        if overlap:
            raise ConfigurationError(
                f"columns {sorted(overlap)} assigned to incompatible roles"
            )


def _parse_float(value: str, row: int, col: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise DataError(
            f"non-numeric value {value!r} in column {col!r}, data row {row}"
        ) from None


def load_csv(path, roles: ColumnRoles) -> tuple[Dataset, np.ndarray | None]:
    """Read a headered CSV into a typed Dataset.

    The selection column must be 0/1. The outcome may be empty on rows
    with selection 0; rows with selection 1 and a missing outcome are
    dropped with a warning. Discrete columns are kept as category codes.
    Returns (dataset, oracle propensity scores or None).
    """
    roles.validate()
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file {path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError("input file is empty; a header row is required")
        needed = [roles.outcome, roles.selection, *roles.x, *roles.zc, *roles.zd]
        if roles.p:
            needed.append(roles.p)
        missing = [c for c in needed if c not in reader.fieldnames]
        if missing:
            raise DataError(f"missing columns: {', '.join(missing)}")
        rows = list(reader)
    if not rows:
        raise DataError("input file has a header but no data rows")

    y, s, xs, zcs, zds, ps = [], [], [], [], [], []
    dropped = 0
    categories = {c: {} for c in roles.zd}
    for i, row in enumerate(rows, start=1):
        sval = row[roles.selection].strip()
        if sval not in ("0", "1"):
            raise DataError(
                f"selection column {roles.selection!r} must be 0 or 1; "
                f"found {sval!r} in data row {i}"
            )
        si = int(sval)
        yval = row[roles.outcome].strip()
        if yval in ("", "NA", "NaN", "nan"):
            if si == 1:
                dropped += 1
                continue
            yi = np.nan
        else:
            yi = _parse_float(yval, i, roles.outcome)
            if si == 0:
                yi = np.nan
        y.append(yi)
        s.append(si)
        xs.append([_parse_float(row[c].strip(), i, c) for c in roles.x])
        zcs.append([_parse_float(row[c].strip(), i, c) for c in roles.zc])
        codes = []
        for c in roles.zd:
            lut = categories[c]
            codes.append(lut.setdefault(row[c].strip(), len(lut)))
        zds.append(codes)
        if roles.p:
            ps.append(_parse_float(row[roles.p].strip(), i, roles.p))
    if dropped:
        warnings.warn(f"dropped {dropped} selected rows with missing outcome")
    if not y:
        raise DataError("no usable data rows")
    data = Dataset(
        y=np.array(y),
        x=np.array(xs),
        s=np.array(s),
        zc=np.array(zcs) if roles.zc else None,
        zd=np.array(zds, dtype=np.int64) if roles.zd else None,
    )
    p = np.array(ps) if roles.p else None
    return data, p


def _tau_label(tau: float) -> str:
    pct = 100.0 * tau
    return f"{pct:.0f}%" if abs(pct - round(pct)) < 1e-9 else f"tau={tau:g}"


def report_to_dict(report) -> dict:
    """JSON-ready view of a report."""
    if isinstance(report, Test2Report):
        per_tau = [{"tau": t, "value": v} for t, v in sorted(report.per_tau.items())]
        extra = {"n_window": report.n_window, "eta": report.eta_used}
    else:
        per_tau = [
            {"tau": t, "value": v} for t, v in sorted(report.per_tau_sup.items())
        ]
        extra = {"argmax": report.argmax, "n_obs": report.n_selected}
    return {
        "statistic": report.statistic,
        "per_tau": per_tau,
        "critical_values": {f"{a:g}": cv for a, cv in report.critical_values.items()},
        "p_value": report.p_value,
        "diagnostics": report.diagnostics,
        "config_echo": report.config,
        "seed": report.config.get("seed"),
        **extra,
    }


def _text_report(report) -> str:
    lines = []
    n_obs = (
        report.n_window if isinstance(report, Test2Report) else report.n_selected
    )
    per_tau = (
        report.per_tau if isinstance(report, Test2Report) else report.per_tau_sup
    )
    lines.append(f"{'Statistic':<12}{report.statistic:.4g}")
    for tau in sorted(per_tau):
        lines.append(f"{_tau_label(tau):<12}{per_tau[tau]:.4g}")
    for alpha in sorted(report.critical_values, reverse=True):
        label = f"{100 * (1 - alpha):.0f}%-CV"
        lines.append(f"{label:<12}{report.critical_values[alpha]:.4g}")
    lines.append(f"{'P-Value':<12}{report.p_value:.4g}")
    lines.append(f"{'# obs':<12}{n_obs}")
    return "\n".join(lines) + "\n"


def emit_report(report, fmt: str = "json", path=None) -> str:
    """Serialise a report; writes to ``path`` when given, returns the text.

    ``csv`` additionally writes the bootstrap draws (one per row) next to
    the main file with a ``_bootstrap.csv`` suffix.
    """
    if fmt == "json":
        text = json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n"
    elif fmt == "text":
        text = _text_report(report)
    elif fmt == "csv":
        d = report_to_dict(report)
        rows = [("field", "key", "value"), ("statistic", "", repr(d["statistic"]))]
        rows += [("per_tau", f"{e['tau']:g}", repr(e["value"])) for e in d["per_tau"]]
        rows += [
            ("critical_value", k, repr(v)) for k, v in sorted(d["critical_values"].items())
        ]
        rows.append(("p_value", "", repr(d["p_value"])))
        rows.append(("n_obs", "", str(d.get("n_obs", d.get("n_window", "")))))
        text = "\n".join(",".join(str(c) for c in row) for row in rows) + "\n"
    else:
        raise ConfigurationError(f"unknown report format {fmt!r}")
    if path is not None:
        path = Path(path)
        path.write_text(text)
        if fmt == "csv":
            boot = path.with_name(path.stem + "_bootstrap.csv")
            with open(boot, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["draw"])
                for v in np.asarray(report.boot_draws):
                    writer.writerow([repr(float(v))])
    return text


def save_plots(report, prefix) -> list[str]:
    """Static plots: per-tau statistic profile and bootstrap histogram."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    prefix = Path(prefix)
    per_tau = (
        report.per_tau if isinstance(report, Test2Report) else report.per_tau_sup
    )
    written = []
    if per_tau:
        fig, ax = plt.subplots(figsize=(6, 4))
        taus = sorted(per_tau)
        ax.plot(taus, [per_tau[t] for t in taus], marker="o")
        ax.set_xlabel("quantile rank")
        ax.set_ylabel("statistic")
        fig.tight_layout()
        out = str(prefix) + "_profile.png"
        fig.savefig(out, dpi=120)
        plt.close(fig)
        written.append(out)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(np.asarray(report.boot_draws), bins=40, color="steelblue")
    ax.axvline(report.statistic, color="crimson", label="statistic")
    ax.legend()
    ax.set_xlabel("bootstrap draw")
    fig.tight_layout()
    out = str(prefix) + "_bootstrap.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    written.append(out)
    return written
