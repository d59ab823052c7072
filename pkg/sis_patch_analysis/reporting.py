"""Deterministic JSON, CSV and YAML output for analysis results."""

import dataclasses
import json
import math
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd
import yaml

from sis_patch_analysis.dynamics import Trajectory
from sis_patch_analysis.equilibria import SweepResult
from sis_patch_analysis.model import EquilibriumSolution, Model
from sis_patch_analysis.schemas import EquilibriumRecord

CSV_FLOAT_FORMAT = "%.17g"


def to_jsonable(obj: object) -> Any:
    """Convert result dataclasses, arrays and numpy scalars into plain JSON values.

    Non-finite floats become ``None``.
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def strip_none(obj: object) -> object:
    """Recursively remove ``None``-valued keys from nested dicts."""
    if isinstance(obj, dict):
        return {k: strip_none(v) for k, v in obj.items() if v is not None}
    if isinstance(obj, list):
        return [strip_none(i) for i in obj]
    return obj


def dumps_json(data: object) -> str:
    return json.dumps(to_jsonable(data), indent=2, allow_nan=False) + "\n"


def write_json(data: object, path: Path | None) -> str:
    """Serialise *data*; write it to *path* when given and return the text."""
    text = dumps_json(data)
    if path is not None:
        path.write_text(text, encoding="utf-8")
    return text


def write_csv(frame: pd.DataFrame, path: Path | None) -> str:
    text: str = frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    if path is not None:
        path.write_text(text, encoding="utf-8")
    return text


# ---------------------------------------------------------------------------
# frames
# ---------------------------------------------------------------------------


def equilibria_frame(equilibria: Sequence[EquilibriumSolution]) -> pd.DataFrame:
    """One row per equilibrium with ``S_j`` and ``I_j`` columns."""
    rows = []
    for eq in equilibria:
        row: dict[str, object] = {
            "kind": eq.kind,
            "l": eq.l,
            "kappa_star": eq.kappa_star,
            "stability": eq.stability,
            "spectral_bound": eq.spectral_bound,
            "marginal_root": eq.marginal_root,
        }
        row.update({f"S_{j}": float(v) for j, v in enumerate(eq.S)})
        row.update({f"I_{j}": float(v) for j, v in enumerate(eq.I)})
        rows.append(row)
    return pd.DataFrame(rows)


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    n = traj.S.shape[1]
    columns = {"t": traj.times}
    columns.update({f"S_{j}": traj.S[:, j] for j in range(n)})
    columns.update({f"I_{j}": traj.I[:, j] for j in range(n)})
    return pd.DataFrame(columns)


def sweep_frame(result: SweepResult) -> pd.DataFrame:
    """Columns ``dS,count,l_roots,stability``; roots and tags are ``;``-joined."""
    return pd.DataFrame(
        {
            "dS": [p.d_s for p in result.points],
            "count": [p.count for p in result.points],
            "l_roots": [";".join(repr(float(l)) for l in p.l_roots) for p in result.points],
            "stability": [";".join(p.stability) for p in result.points],
        }
    )


# ---------------------------------------------------------------------------
# scenarios and read-back
# ---------------------------------------------------------------------------


def model_document(m: Model) -> dict[str, object]:
    """Normalised scenario: ``L`` with its recomputed diagonal and the Perron vector."""
    return {
        "n": m.n,
        "L": to_jsonable(m.L),
        "alpha": to_jsonable(m.alpha),
        "beta": to_jsonable(m.beta),
        "gamma": to_jsonable(m.gamma),
        "dS": m.d_s,
        "dI": m.d_i,
        "N": m.N,
    }


def dump_yaml(data: object) -> str:
    text: str = yaml.safe_dump(to_jsonable(data), default_flow_style=False, sort_keys=False)
    return text


def load_equilibria(path: Path) -> list[EquilibriumRecord]:
    """Read an ``equilibria.json`` document back into validated records."""
    document = json.loads(path.read_text(encoding="utf-8"))
    items = document["equilibria"] if isinstance(document, dict) else document
    return [EquilibriumRecord.model_validate(item) for item in items]
