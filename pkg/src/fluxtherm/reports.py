"""Deterministic CSV/JSON emission.

CSV files use '.' decimals, ',' separators, LF line endings and 17
significant digits so that re-reading reproduces the floats exactly and
identical runs produce byte-identical files. JSON output is sorted and
indented for the same reason.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import ValidationError
from .tpm import TPMRecord


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, header: list[str], rows, preamble: list[str] = ()) -> Path:
    path = Path(path)
    lines = list(preamble)
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def write_json(path: Path, payload) -> Path:
    path = Path(path)
    text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=True)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")
    return path


def record_to_csv(record: TPMRecord, path: Path) -> Path:
    """Long-format export: one row per (step, i, f) with its probability.

    Two commented preamble lines carry the level energies and, when
    attached, the initial probabilities.
    """
    preamble = ["# energies," + ",".join(fmt(e) for e in record.energies)]
    if record.initial_probs is not None:
        preamble.append("# P_i," + ",".join(fmt(p) for p in record.initial_probs))
    rows = []
    for t_idx, t in enumerate(record.times):
        for i in range(record.n_levels):
            for f in range(record.n_levels):
                rows.append([int(t), i, f, record.cond_probs[t_idx, f, i]])
    return write_csv(path, ["step", "i", "f", "P_f_given_i"], rows, preamble)


def record_from_csv(path: Path) -> TPMRecord:
    """Re-read a record written by record_to_csv (used for re-validation)."""
    from .core import readonly
    from .tpm import validate_record

    lines = Path(path).read_text(encoding="utf-8").splitlines()
    energies = None
    p_init = None
    data_lines = []
    for line in lines:
        if line.startswith("# energies,"):
            energies = np.array([float(v) for v in line.split(",")[1:]])
        elif line.startswith("# P_i,"):
            p_init = np.array([float(v) for v in line.split(",")[1:]])
        elif line and not line.startswith("#") and not line.startswith("step,"):
            data_lines.append(line)
    if energies is None:
        raise ValidationError(f"{path} has no energies preamble")
    n = len(energies)
    steps = sorted({int(line.split(",")[0]) for line in data_lines})
    cond = np.zeros((len(steps), n, n))
    index = {s: k for k, s in enumerate(steps)}
    for line in data_lines:
        s, i, f, p = line.split(",")
        cond[index[int(s)], int(f), int(i)] = float(p)
    record = TPMRecord(energies=readonly(energies, dtype=float),
                       times=readonly(np.array(steps), dtype=int),
                       cond_probs=readonly(cond, dtype=float),
                       initial_probs=None)
    validate_record(record)
    if p_init is not None:
        record = record.with_initial_probs(p_init)
    return record
