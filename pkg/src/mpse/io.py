"""Versioned on-disk format for solved policy/value tables (``.npz``)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .backward import BackwardResult
from .game import GameSpec, dump_spec, parse_spec
from .grid import BeliefGrid, SimplexGrid
from .infinite import IHSolution

TABLES_FORMAT = "mpse-tables/1"


def save_tables(path, tables, spec: GameSpec | None = None) -> Path:
    """Write a ``BackwardResult`` or ``IHSolution`` with its grid and (optionally) spec."""
    path = Path(path)
    grid = tables.grid
    meta = {
        "format": TABLES_FORMAT,
        "kind": "infinite" if isinstance(tables, IHSolution) else "finite",
        "resolution": grid.leader.resolution,
        "n_xl": grid.leader.n,
        "n_xf": grid.follower.n,
        "nearest": bool(tables.nearest),
        "spec": dump_spec(spec) if spec is not None else None,
    }
    arrays = {"gamma_l": tables.gamma_l, "gamma_f": tables.gamma_f,
              "v_l": tables.v_l, "v_f": tables.v_f}
    if isinstance(tables, IHSolution):
        arrays["residual_history"] = np.asarray(tables.residual_history, dtype=float)
        arrays["iterations"] = np.asarray(tables.iterations)
        arrays["converged"] = np.asarray(tables.converged)
    if tables.failed is not None:
        arrays["failed"] = tables.failed
    with open(path, "wb") as fh:
        np.savez_compressed(fh, meta=np.asarray(json.dumps(meta, sort_keys=True)), **arrays)
    return path


def load_tables(path):
    """Inverse of ``save_tables``; returns ``(tables, spec_or_None)``."""
    with np.load(Path(path), allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format") != TABLES_FORMAT:
            raise ValueError(f"unsupported tables format {meta.get('format')!r}")
        data = {k: z[k] for k in z.files if k != "meta"}
    res = meta["resolution"]
    grid = BeliefGrid(SimplexGrid(meta["n_xl"], res), SimplexGrid(meta["n_xf"], res), res)
    spec = parse_spec(meta["spec"]) if meta.get("spec") else None
    if meta["kind"] == "infinite":
        tables = IHSolution(
            grid=grid, gamma_l=data["gamma_l"], gamma_f=data["gamma_f"],
            v_l=data["v_l"], v_f=data["v_f"],
            residual_history=data["residual_history"].tolist(),
            iterations=int(data["iterations"]), converged=bool(data["converged"]),
            failed=data.get("failed"), nearest=meta["nearest"])
    else:
        tables = BackwardResult(
            grid=grid, gamma_l=data["gamma_l"], gamma_f=data["gamma_f"],
            v_l=data["v_l"], v_f=data["v_f"], failed=data["failed"], nearest=meta["nearest"])
    return tables, spec
