"""On-disk formats: CSV matrices, dataset directories, fit directories,
partition reports, and experiment outputs.

All writers are deterministic: floats are rendered with repr (shortest
round-trip form), JSON is dumped with sorted keys, and nothing records
wall-clock timestamps except the explicit wall_time metric column.
"""

import hashlib
import json
import os

import numpy as np

from . import datagen
from .errors import InvalidInput
from .losses import LossSpec


def format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: str, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def save_matrix(path: str, arr) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInput(f"can only save 2-D arrays, got ndim={arr.ndim}")
    with open(path, "w", encoding="utf-8") as fh:
        for row in arr:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_matrix(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read().strip()
    if not text:
        return np.empty((0, 0))
    rows = [[float(c) for c in line.split(",")] for line in text.splitlines()]
    return np.asarray(rows, dtype=np.float64)


def save_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def blob_sha1(data: bytes) -> str:
    """Content hash in the style of a version-control blob object."""
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def model_hash(params: datagen.ModelParams) -> str:
    h = hashlib.sha256()
    for arr in (params.u1_star, params.u2_star, params.sigma_z, params.sigma_zt,
                params.sigma_xi, params.sigma_xit):
        h.update(str(arr.shape).encode())
        h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    h.update(params.family.encode())
    return h.hexdigest()


def _write_edge_rows(path: str, edges: np.ndarray, truth_mask) -> None:
    rows = [(int(i), int(j), int(t)) for (i, j), t in zip(edges, truth_mask)]
    write_csv(path, ("i", "j", "is_truth"), rows)


def read_edge_csv(path: str) -> np.ndarray:
    """Edge list from a CSV with an i,j[,is_truth] header; truth column ignored."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        return np.empty((0, 2), dtype=np.int64)
    start = 1 if not lines[0].split(",")[0].lstrip("-").isdigit() else 0
    out = []
    for ln in lines[start:]:
        parts = ln.split(",")
        if len(parts) < 2:
            raise InvalidInput(f"bad edge row {ln!r} in {path}")
        out.append((int(parts[0]), int(parts[1])))
    return np.asarray(out, dtype=np.int64).reshape(-1, 2)


def save_dataset(path: str, ds, model: datagen.ModelParams | None = None) -> None:
    """Write a dataset directory: x.csv, xt.csv, edges.csv, meta.json.

    Co-indexed data stores the observed pairs with is_truth marking the
    genuine ones (the hidden partners of broken pairs are not persisted);
    unpaired pools store the hidden matching itself; labeled bipartite
    data stores the corrupted edge set with is_truth marking label
    agreement, plus label files.
    """
    os.makedirs(path, exist_ok=True)
    save_matrix(os.path.join(path, "x.csv"), ds.x)
    save_matrix(os.path.join(path, "xt.csv"), ds.xt)
    meta = {
        "d1": int(ds.x.shape[1]),
        "d2": int(ds.xt.shape[1]),
        "n": int(ds.x.shape[0]),
        "model_hash": model_hash(model) if model is not None else "",
        "seed": ds.meta.get("seed_repr", ""),
    }
    if isinstance(ds, datagen.LabeledBipartite):
        truth = ds.labels_x[ds.edges[:, 0]] == ds.labels_xt[ds.edges[:, 1]]
        _write_edge_rows(os.path.join(path, "edges.csv"), ds.edges, truth)
        write_csv(os.path.join(path, "labels_left.csv"), ("label",),
                  [(int(v),) for v in ds.labels_x])
        write_csv(os.path.join(path, "labels_right.csv"), ("label",),
                  [(int(v),) for v in ds.labels_xt])
        meta.update({
            "kind": "labeled-bipartite",
            "p_n": float(ds.meta.get("p_prime", 0.0)),
            "k": int(ds.k),
        })
    else:
        kind = ds.meta.get("kind", "paired")
        meta.update({"kind": kind, "p_n": float(ds.distortion)})
        if kind == "unpaired":
            _write_edge_rows(os.path.join(path, "edges.csv"), ds.truth_edges,
                             np.ones(ds.truth_edges.shape[0], dtype=np.int64))
        else:
            truth_set = {(int(i), int(j)) for i, j in ds.truth_edges}
            mask = [(int(i), int(j)) in truth_set for i, j in ds.observed_edges]
            _write_edge_rows(os.path.join(path, "edges.csv"), ds.observed_edges, mask)
    save_json(os.path.join(path, "meta.json"), meta)


def _read_labels(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    return np.asarray([int(v) for v in lines[1:]], dtype=np.int64)


def load_dataset(path: str):
    """Load a dataset directory written by save_dataset."""
    meta = load_json(os.path.join(path, "meta.json"))
    x = load_matrix(os.path.join(path, "x.csv"))
    xt = load_matrix(os.path.join(path, "xt.csv"))
    kind = meta.get("kind", "paired")
    edge_path = os.path.join(path, "edges.csv")
    with open(edge_path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    rows = [tuple(int(v) for v in ln.split(",")) for ln in lines[1:]]
    edges = np.asarray([(i, j) for i, j, _ in rows], dtype=np.int64).reshape(-1, 2)
    truth_mask = np.asarray([t for _, _, t in rows], dtype=bool)
    if kind == "labeled-bipartite":
        labels_x = _read_labels(os.path.join(path, "labels_left.csv"))
        labels_xt = _read_labels(os.path.join(path, "labels_right.csv"))
        return datagen.LabeledBipartite(
            x=x, xt=xt, labels_x=labels_x, labels_xt=labels_xt, edges=edges,
            k=int(meta["k"]), centers=None,
            meta={"kind": kind, "p_prime": float(meta.get("p_n", 0.0))},
        )
    if kind == "unpaired":
        return datagen.PairedDataset(
            x=x, xt=xt, observed_edges=np.empty((0, 2), dtype=np.int64),
            truth_edges=edges, distortion=float(meta.get("p_n", 1.0)),
            meta={"kind": kind},
        )
    return datagen.PairedDataset(
        x=x, xt=xt, observed_edges=edges, truth_edges=edges[truth_mask],
        distortion=float(meta.get("p_n", 0.0)), meta={"kind": kind},
    )


def save_fit(path: str, fit, spec: LossSpec | None = None, extra: dict | None = None) -> None:
    """Write a fit directory: product.csv, g1.csv, g2.csv, fit.json."""
    os.makedirs(path, exist_ok=True)
    save_matrix(os.path.join(path, "product.csv"), fit.product)
    save_matrix(os.path.join(path, "g1.csv"), fit.enc.g1)
    save_matrix(os.path.join(path, "g2.csv"), fit.enc.g2)
    info = {
        "iterations": int(fit.iterations),
        "final_loss": float(fit.final_loss),
        "flags": list(fit.flags),
        "r": int(fit.enc.r),
    }
    if fit.trace is not None:
        info["trace"] = [float(v) for v in fit.trace]
    if spec is not None:
        info["loss_spec"] = spec.to_json()
    if extra:
        info.update(extra)
    save_json(os.path.join(path, "fit.json"), info)


def save_partition(path: str, part, seed, restarts: int) -> None:
    """Write a partition directory: labels, kept edges, report.json."""
    os.makedirs(path, exist_ok=True)
    write_csv(os.path.join(path, "labels_left.csv"), ("label",),
              [(int(v),) for v in part.labels_left])
    write_csv(os.path.join(path, "labels_right.csv"), ("label",),
              [(int(v),) for v in part.labels_right])
    write_csv(os.path.join(path, "kept_edges.csv"), ("i", "j"),
              [(int(i), int(j)) for i, j in part.kept_edges])
    report = {
        "k": int(part.k),
        "l": int(part.l),
        "inertia": float(part.inertia),
        "kept": int(part.kept_edges.shape[0]),
        "dropped": int(part.dropped_edges.shape[0]),
        "degenerate": bool(part.degenerate),
        "best_restart": int(part.best_restart),
        "seed": repr(seed),
        "restarts": int(restarts),
    }
    save_json(os.path.join(path, "report.json"), report)
