"""Correlation metrics, cross-validation, ablation groups, and sweeps.

Cross-validation is leave-one-content-out: folds partition the manifest
by content group so no distorted variant of a test model ever appears in
training.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import CorrelationUndefinedError
from .nss import MESH_DOMAINS, PC_DOMAINS, QualityFeatureVector
from .regression import predict, train_svr

FEATURE_GROUPS = ("F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8")
SWEEP_FRACTIONS = (0.2, 0.4, 0.6, 0.8)


@dataclass
class Metrics:
    plcc: float
    srcc: float
    krcc: float
    rmse: float

    def to_dict(self):
        return {"plcc": self.plcc, "srcc": self.srcc,
                "krcc": self.krcc, "rmse": self.rmse}


def correlations(pred, mos) -> Metrics:
    """PLCC, SRCC (average ranks), KRCC (tau-b), and RMSE.

    PLCC is Pearson on the raw values, with no nonlinear mapping.
    """
    p = np.asarray(pred, dtype=np.float64)
    m = np.asarray(mos, dtype=np.float64)
    if p.shape != m.shape or p.ndim != 1 or len(p) < 3:
        raise ValueError("need two equal-length vectors of at least 3 values")
    rmse = float(np.sqrt(np.mean((p - m) ** 2)))
    if p.std() == 0.0 or m.std() == 0.0:
        raise CorrelationUndefinedError(
            "correlation undefined on zero-variance input", rmse=rmse)
    with np.errstate(invalid="ignore", divide="ignore", under="ignore"):
        plcc = float(np.corrcoef(p, m)[0, 1])
        rp = stats.rankdata(p, method="average")
        rm = stats.rankdata(m, method="average")
        srcc = float(np.corrcoef(rp, rm)[0, 1])
        krcc = float(stats.kendalltau(p, m).correlation)
    if not (np.isfinite(plcc) and np.isfinite(srcc) and np.isfinite(krcc)):
        # Variance can underflow to denormals without being exactly zero.
        raise CorrelationUndefinedError(
            "correlation undefined on (near) zero-variance input", rmse=rmse)
    return Metrics(plcc=plcc, srcc=srcc, krcc=krcc, rmse=rmse)


@dataclass
class ManifestRow:
    path: str
    mos: float
    group: str


@dataclass
class DatasetManifest:
    """Rows of (model path, MOS, content group) plus the MOS scale."""

    rows: list
    mos_scale: float = 1.0

    def __post_init__(self):
        for row in self.rows:
            if not np.isfinite(row.mos):
                raise ValueError(f"non-finite MOS for {row.path!r}")

    def groups(self):
        return sorted({row.group for row in self.rows})

    def mos(self):
        return np.array([row.mos for row in self.rows])

    def paths(self):
        return [row.path for row in self.rows]


def read_manifest(fh, mos_scale=1.0) -> DatasetManifest:
    """Parse a manifest CSV with header path,mos,group.

    Lines starting with '#' are comments.
    """
    rows = []
    lines = (ln for ln in fh if not ln.lstrip().startswith("#"))
    reader = csv.reader(lines)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["path", "mos", "group"]:
        raise ValueError("manifest must start with header 'path,mos,group'")
    for rec in reader:
        if not rec:
            continue
        if len(rec) != 3:
            raise ValueError(f"malformed manifest row: {rec!r}")
        rows.append(ManifestRow(path=rec[0], mos=float(rec[1]),
                                group=rec[2]))
    return DatasetManifest(rows=rows, mos_scale=mos_scale)


def write_manifest(manifest: DatasetManifest, fh, comment=None):
    if comment:
        for line in comment.splitlines():
            fh.write(f"# {line}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["path", "mos", "group"])
    for row in manifest.rows:
        writer.writerow([row.path, repr(row.mos), row.group])


def loocv_folds(manifest: DatasetManifest):
    """Leave-one-content-out folds: (train groups, test group) per group."""
    groups = manifest.groups()
    if len(groups) < 2:
        raise ValueError("cross-validation needs at least 2 content groups")
    return [([g for g in groups if g != test], test) for test in groups]


@dataclass
class FoldResult:
    test_group: str
    n_test: int
    metrics: Metrics


@dataclass
class EvalReport:
    folds: list
    average: Metrics
    extraction_ms_mean: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        doc = {
            "folds": [
                {"test_group": f.test_group, "n_test": f.n_test,
                 **f.metrics.to_dict()}
                for f in self.folds
            ],
            "average": self.average.to_dict(),
        }
        if self.extraction_ms_mean is not None:
            doc["extraction_ms_mean"] = self.extraction_ms_mean
        doc.update(self.extra)
        return doc

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self):
        """Aligned text table derived from the JSON content."""
        rows = [("fold", "n", "plcc", "srcc", "krcc", "rmse")]
        for f in self.folds:
            m = f.metrics
            rows.append((f.test_group, str(f.n_test), f"{m.plcc:.4f}",
                         f"{m.srcc:.4f}", f"{m.krcc:.4f}", f"{m.rmse:.4f}"))
        a = self.average
        rows.append(("average", "-", f"{a.plcc:.4f}", f"{a.srcc:.4f}",
                     f"{a.krcc:.4f}", f"{a.rmse:.4f}"))
        widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
        return "\n".join(
            "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
            for row in rows)


def _mean_metrics(metrics_list):
    return Metrics(
        plcc=float(np.mean([m.plcc for m in metrics_list])),
        srcc=float(np.mean([m.srcc for m in metrics_list])),
        krcc=float(np.mean([m.krcc for m in metrics_list])),
        rmse=float(np.mean([m.rmse for m in metrics_list])),
    )


def _evaluate_split(X, y, train_mask, test_mask, mos_scale, svr_params):
    model = train_svr(X[train_mask], y[train_mask] / mos_scale,
                      mos_scale=mos_scale, **svr_params)
    preds = predict(model, X[test_mask])
    return correlations(preds, y[test_mask])


def run_cv(manifest: DatasetManifest, X, svr_params=None) -> EvalReport:
    """Leave-one-content-out cross-validation over a feature matrix.

    X rows align with manifest rows.  MOS is divided by the manifest's
    mos_scale for training; predictions come back in native units before
    the metrics are computed.  Fold metrics are averaged unweighted.
    """
    svr_params = dict(svr_params or {})
    X = np.asarray(X, dtype=np.float64)
    if len(X) != len(manifest.rows):
        raise ValueError("feature matrix does not align with the manifest")
    y = manifest.mos()
    group_arr = np.array([row.group for row in manifest.rows])
    folds = []
    for train_groups, test_group in loocv_folds(manifest):
        test_mask = group_arr == test_group
        train_mask = ~test_mask
        metrics = _evaluate_split(X, y, train_mask, test_mask,
                                  manifest.mos_scale, svr_params)
        folds.append(FoldResult(test_group=test_group,
                                n_test=int(test_mask.sum()), metrics=metrics))
    return EvalReport(folds=folds, average=_mean_metrics([f.metrics
                                                          for f in folds]))


def _layout(kind):
    if kind == "pointcloud":
        d, g = len(PC_DOMAINS), 5
    elif kind == "mesh":
        d, g = len(MESH_DOMAINS), 4
    else:
        raise ValueError(f"unknown model kind {kind!r}")
    return d, g


def select_feature_indices(kind, groups):
    """0-based feature indices of the requested ablation groups.

    F1/F5 cover mean+std+entropy of the geometry/color domains, F2/F6
    the GGD parameters, F3/F7 the AGGD parameters, F4/F8 the Gamma
    parameters.
    """
    if not groups:
        raise ValueError("groups must be nonempty")
    d, g = _layout(kind)
    ranges = {
        "F1": [(0, 2 * g), (2 * d, 2 * d + g)],
        "F5": [(2 * g, 2 * d), (2 * d + g, 3 * d)],
        "F2": [(3 * d, 3 * d + 2 * g)],
        "F6": [(3 * d + 2 * g, 5 * d)],
        "F3": [(5 * d, 5 * d + 4 * g)],
        "F7": [(5 * d + 4 * g, 9 * d)],
        "F4": [(9 * d, 9 * d + 2 * g)],
        "F8": [(9 * d + 2 * g, 11 * d)],
    }
    idx = []
    for label in groups:
        if label not in ranges:
            raise ValueError(f"unknown feature group {label!r}")
        for lo, hi in ranges[label]:
            idx.extend(range(lo, hi))
    return np.array(sorted(set(idx)), dtype=np.int64)


def select_feature_groups(vector: QualityFeatureVector, groups):
    """Reduce a feature vector to the requested ablation groups."""
    idx = select_feature_indices(vector.kind, groups)
    return vector.values[idx]


def data_sensitivity_sweep(manifest: DatasetManifest, X, fractions=None,
                           svr_params=None, seed=0):
    """Evaluate with shrinking training sets sampled at the group level.

    For each fraction, round(fraction * G) whole groups (seeded sample)
    train and the remaining groups test.  Returns a list of (fraction,
    EvalReport) pairs.
    """
    fractions = list(fractions if fractions is not None else SWEEP_FRACTIONS)
    svr_params = dict(svr_params or {})
    X = np.asarray(X, dtype=np.float64)
    if len(X) != len(manifest.rows):
        raise ValueError("feature matrix does not align with the manifest")
    groups = manifest.groups()
    big_g = len(groups)
    y = manifest.mos()
    group_arr = np.array([row.group for row in manifest.rows])
    out = []
    for frac in fractions:
        if not 0.0 < frac < 1.0:
            raise ValueError(f"fraction {frac} outside (0, 1)")
        n_train = int(round(frac * big_g))
        if n_train < 1:
            raise ValueError(f"fraction {frac} yields 0 training groups")
        if n_train >= big_g:
            raise ValueError(f"fraction {frac} leaves no test groups")
        rng = np.random.default_rng(seed)
        train_groups = sorted(rng.choice(groups, size=n_train, replace=False))
        train_mask = np.isin(group_arr, train_groups)
        metrics = _evaluate_split(X, y, train_mask, ~train_mask,
                                  manifest.mos_scale, svr_params)
        report = EvalReport(
            folds=[FoldResult(test_group=",".join(g for g in groups
                                                  if g not in train_groups),
                              n_test=int((~train_mask).sum()),
                              metrics=metrics)],
            average=metrics,
            extra={"fraction": frac, "train_groups": list(train_groups)})
        out.append((frac, report))
    return out
