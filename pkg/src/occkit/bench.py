"""Experiment harness: grid search, UCI suite, noise sweeps and reports.

Model selection maximizes test AUC by default, which is optimistic (no
validation split). ``Protocol(selection="validation")`` instead selects on a
seeded half of the test set and reports the other half.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .core import Dataset, SplitSpec, apply_scaler, derive_rng, fit_scaler, split_one_class
from .evaluation import REPORT_FIELDS, MetricsReport, evaluate
from .exceptions import DomainError, MissingDataset, OCCError, SolverDidNotConverge
from .kernels import KERNEL_FAMILIES, KernelSpec, scale_gamma
from .models import decision_function, train_model
from .solver import SolverConfig
from .uci import REGISTRY, load_uci, lookup

log = logging.getLogger(__name__)

DEFAULT_NU = (0.01, 0.05, 0.1, 0.2, 0.3, 0.5)
DEFAULT_TAU = (0.0, 0.1, 0.3, 0.5, 0.8, 1.0)
DEFAULT_GAMMA_EXP = (-3, -2, -1, 0, 1, 2, 3)


@dataclass(frozen=True)
class GridSpec:
    """Hyperparameter grid.

    RBF widths are ``scale * 2**k`` for ``k`` in ``gamma_exponents``, where
    ``scale = 1 / (d var(X_train))``. Polynomial cells use ``degrees``.
    """

    nu: Sequence[float] = DEFAULT_NU
    tau: Sequence[float] = DEFAULT_TAU
    kernels: Sequence[str] = ("rbf",)
    gamma_exponents: Sequence[int] = DEFAULT_GAMMA_EXP
    degrees: Sequence[int] = (2, 3)
    coef0: float = 1.0

    def __post_init__(self):
        for name in ("nu", "tau", "kernels"):
            if len(getattr(self, name)) == 0:
                raise DomainError(f"grid axis {name} is empty")
        for v in self.nu:
            if not 0 < v <= 1:
                raise DomainError(f"nu must lie in (0, 1], got {v}")
        for v in self.tau:
            if not 0 <= v <= 1:
                raise DomainError(f"tau must lie in [0, 1], got {v}")
        for k in self.kernels:
            if k not in KERNEL_FAMILIES:
                raise DomainError(f"unknown kernel {k!r}")

    def kernel_cells(self):
        """``(family, hyper)`` pairs in a fixed, sortable order."""
        out = []
        for fam in self.kernels:
            if fam == "rbf":
                out += [("rbf", float(k)) for k in self.gamma_exponents]
            elif fam == "polynomial":
                out += [("polynomial", float(d)) for d in self.degrees]
            else:
                out.append(("linear", 0.0))
        return out

    def cells(self, kind):
        taus = self.tau if kind == "pb_ocsvm" else (0.0,)
        return [
            {"nu": float(nu), "tau": float(tau), "kernel": fam, "hyper": hyper}
            for nu in self.nu for tau in taus for fam, hyper in self.kernel_cells()
        ]

    @classmethod
    def singleton(cls, nu, tau=0.0, kernel="rbf", gamma_exponent=0):
        return cls(nu=(nu,), tau=(tau,), kernels=(kernel,), gamma_exponents=(gamma_exponent,))

    def to_dict(self):
        return {k: list(v) if isinstance(v, (tuple, list)) else v for k, v in asdict(self).items()}


@dataclass(frozen=True)
class Protocol:
    target_train_fraction: float = 0.8
    scaler: str = "minmax"
    test_includes_train: bool = False
    selection: str = "test"
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        if self.selection not in ("test", "validation"):
            raise DomainError("selection must be 'test' or 'validation'")


def _cell_key(cell):
    """Total order used to break AUC ties."""
    return (cell["nu"], cell["tau"], cell["kernel"], cell["hyper"])


def _kernel_for(cell, X_train, coef0=1.0) -> KernelSpec:
    if cell["kernel"] == "rbf":
        return KernelSpec("rbf", scale_gamma(X_train) * 2.0 ** cell["hyper"])
    if cell["kernel"] == "polynomial":
        return KernelSpec("polynomial", degree=int(cell["hyper"]), coef0=coef0)
    return KernelSpec("linear")


@dataclass
class RunRecord:
    dataset: str
    seed: int
    kind: str
    params: dict
    metrics: Optional[MetricsReport]
    wall_ms: float
    diagnostics: dict = field(default_factory=dict)
    error: Optional[str] = None
    selection: str = "test"

    @property
    def auc(self) -> Optional[float]:
        return None if self.metrics is None else self.metrics.auc

    @property
    def ok(self) -> bool:
        return self.error is None and self.auc is not None

    def row(self) -> dict:
        out = {
            "dataset": self.dataset,
            "seed": self.seed,
            "kind": self.kind,
            "params": json.dumps(self.params, sort_keys=True),
            "wall_ms": round(self.wall_ms, 3),
            "error": self.error or "",
            "selection": self.selection,
            "kkt_residual": self.diagnostics.get("kkt_residual", ""),
            "iterations": self.diagnostics.get("iterations", ""),
            "n_support": self.diagnostics.get("n_support", ""),
            "converged": self.diagnostics.get("converged", ""),
        }
        m = self.metrics.to_dict() if self.metrics is not None else {}
        for k in REPORT_FIELDS:
            v = m.get(k)
            out[k] = "" if v is None else v
        return out


RUN_FIELDS = (
    "dataset", "seed", "kind", "params", "wall_ms", "error", "selection",
    "kkt_residual", "iterations", "n_support", "converged",
) + REPORT_FIELDS


def prepare_split(ds: Dataset, protocol: Protocol, seed: int):
    """Split, fit the scaler on the training targets, scale both sides."""
    spec = SplitSpec(protocol.target_train_fraction, seed, protocol.test_includes_train)
    train, test = split_one_class(ds, spec)
    params = fit_scaler(train.X, protocol.scaler)
    return apply_scaler(train.X, params), apply_scaler(test.X, params), test.labels


def _validation_mask(labels, seed):
    """Seeded half of each class of the test set."""
    rng = derive_rng(seed, 3)
    mask = np.zeros(labels.shape[0], dtype=bool)
    for cls in (True, False):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        mask[idx[: len(idx) // 2]] = True
    return mask


def run_cell(kind, cell, X_train, X_test, y_test, dataset="", seed=0,
             solver: SolverConfig = SolverConfig(), n_for_ci=None, coef0=1.0) -> RunRecord:
    """Train one model and evaluate it; training errors are recorded, not raised."""
    t0 = time.perf_counter()
    params = dict(cell)
    try:
        kernel = _kernel_for(cell, X_train, coef0)
        params["kernel_spec"] = kernel.to_dict()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SolverDidNotConverge)
            model = train_model(kind, X_train, nu=cell["nu"], tau=cell["tau"],
                                kernel=kernel, solver=solver)
        scores = decision_function(model, X_test)
        report = evaluate(y_test, scores, n_for_ci)
        return RunRecord(dataset, seed, kind, params, report,
                         1e3 * (time.perf_counter() - t0), dict(model.diagnostics))
    except OCCError as exc:
        return RunRecord(dataset, seed, kind, params, None,
                         1e3 * (time.perf_counter() - t0), error=f"{type(exc).__name__}: {exc}")


def select_best(records: Sequence[RunRecord], score=lambda r: r.auc) -> Optional[RunRecord]:
    """Highest score; ties go to smaller nu, then tau, then kernel parameters."""
    ok = [r for r in records if r.ok and score(r) is not None]
    if not ok:
        return None
    return min(ok, key=lambda r: (-score(r),) + _cell_key(r.params))


def grid_search(ds: Dataset, grid: GridSpec = GridSpec(), protocol: Protocol = Protocol(),
                kind="pb_ocsvm", seed=42, n_jobs=1):
    """Evaluate every grid cell on one split.

    Returns
    -------
    best : RunRecord or None
        None when every cell failed.
    records : list of RunRecord
        All cells, in grid order.
    """
    X_train, X_test, y_test = prepare_split(ds, protocol, seed)
    cells = grid.cells(kind)
    if protocol.selection == "validation":
        val = _validation_mask(y_test, seed)
        jobs = [delayed(run_cell)(kind, c, X_train, X_test[val], y_test[val], ds.name, seed,
                                  protocol.solver, coef0=grid.coef0) for c in cells]
    else:
        jobs = [delayed(run_cell)(kind, c, X_train, X_test, y_test, ds.name, seed,
                                  protocol.solver, coef0=grid.coef0) for c in cells]
    records = Parallel(n_jobs=n_jobs)(jobs) if n_jobs != 1 else [j[0](*j[1], **j[2]) for j in jobs]
    best = select_best(records)
    if best is not None and protocol.selection == "validation":
        cell = {k: best.params[k] for k in ("nu", "tau", "kernel", "hyper")}
        best = run_cell(kind, cell, X_train, X_test[~val], y_test[~val], ds.name, seed,
                        protocol.solver, coef0=grid.coef0)
        best.selection = "validation"
    return best, records


def repetition_seed(base: int, rep: int) -> int:
    """Split seed of repetition ``rep``; repetition 0 keeps ``base``."""
    if rep == 0:
        return int(base)
    state = np.random.SeedSequence(int(base), spawn_key=(2, rep)).generate_state(1, np.uint64)
    return int(state[0] >> np.uint64(1))


@dataclass(frozen=True)
class BenchmarkSuite:
    datasets: Sequence[str] = tuple(REGISTRY)
    kinds: Sequence[str] = ("ocsvm", "pb_ocsvm")
    grid: GridSpec = GridSpec()
    protocol: Protocol = Protocol()
    repetitions: int = 5
    seed: int = 42
    data_dir: Optional[str] = None


def run_uci_suite(suite: BenchmarkSuite, n_jobs=1, skipped: Optional[list] = None) -> list:
    """Best-cell record per dataset x model x repetition.

    Missing datasets are logged and listed in ``skipped``.
    """
    out = []
    if not suite.datasets:
        warnings.warn("benchmark suite has no datasets", RuntimeWarning, stacklevel=2)
    for name in suite.datasets:
        try:
            ds = load_uci(name, suite.data_dir)
        except MissingDataset as exc:
            log.info("skipping %s: %s", name, exc)
            if skipped is not None:
                skipped.append(name)
            continue
        for rep in range(suite.repetitions):
            seed = repetition_seed(suite.seed, rep)
            for kind in suite.kinds:
                best, records = grid_search(ds, suite.grid, suite.protocol, kind, seed, n_jobs)
                if best is None:
                    err = records[0].error if records else "empty grid"
                    best = RunRecord(name, seed, kind, {}, None, 0.0, error=err)
                out.append(best)
    return out


def summarize(records: Sequence[RunRecord]) -> list:
    """Mean and std AUC per dataset and model, with the reference AUC."""
    groups = {}
    for r in records:
        groups.setdefault((r.dataset, r.kind), []).append(r)
    rows = []
    for (name, kind), recs in groups.items():
        aucs = np.array([r.auc for r in recs if r.ok], dtype=float)
        try:
            e = lookup(name)
            ref = e.auc_pb if kind == "pb_ocsvm" else e.auc_ocsvm
        except KeyError:
            ref = None
        rows.append({
            "dataset": name,
            "kind": kind,
            "runs": len(recs),
            "failed": int(sum(not r.ok for r in recs)),
            "auc_mean": float(aucs.mean()) if aucs.size else None,
            "auc_std": float(aucs.std()) if aucs.size else None,
            "accuracy_mean": _mean([r.metrics.accuracy for r in recs if r.ok]),
            "reference_auc": ref,
        })
    return rows


def _mean(values):
    v = [x for x in values if x is not None]
    return float(np.mean(v)) if v else None


def write_runs(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, RUN_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow(r.row())


def write_summary(rows, path_csv, path_md=None, protocol: Protocol = Protocol(), seed=None):
    cols = ("dataset", "kind", "runs", "failed", "auc_mean", "auc_std", "accuracy_mean", "reference_auc")
    with open(path_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, cols, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if row[k] is None else row[k]) for k in cols})
    if path_md is not None:
        Path(path_md).write_text(summary_markdown(rows, protocol, seed), encoding="utf-8")


def _fmt(v, nd=3):
    return "n/a" if v is None or (isinstance(v, float) and math.isnan(v)) else f"{v:.{nd}f}"


def summary_markdown(rows, protocol: Protocol = Protocol(), seed=None) -> str:
    """Reference-table layout: one line per dataset, both models side by side."""
    by = {(r["dataset"], r["kind"]): r for r in rows}
    names = list(dict.fromkeys(r["dataset"] for r in rows))
    lines = [
        "# One-class benchmark summary",
        "",
        f"Scaler: {protocol.scaler}; train fraction {protocol.target_train_fraction}; "
        f"test includes train: {protocol.test_includes_train}; seed: {seed}.",
        "",
    ]
    if protocol.selection == "test":
        lines += ["Model selection maximizes AUC on the test split, so the numbers are optimistic.", ""]
    lines += [
        "| Dataset | N target | N outliers | Attributes | N train | N test "
        "| AUC OCSVM (ours) | AUC PB-OCSVM (ours) | AUC OCSVM (ref) | AUC PB-OCSVM (ref) |",
        "|---|---|---|---|---|---|---|---|---|---|",
    ]
    for name in names:
        try:
            e = lookup(name)
            ref = (e.n_target, e.n_outliers, e.n_attributes, e.n_train, e.n_test,
                   _fmt(e.auc_ocsvm, 2), _fmt(e.auc_pb, 2))
        except KeyError:
            ref = ("",) * 5 + ("n/a", "n/a")
        o = by.get((name, "ocsvm"), {})
        p = by.get((name, "pb_ocsvm"), {})
        ours = [
            f"{_fmt(x.get('auc_mean'))} ± {_fmt(x.get('auc_std'))}" if x.get("auc_mean") is not None else "n/a"
            for x in (o, p)
        ]
        lines.append(
            f"| {name} | {ref[0]} | {ref[1]} | {ref[2]} | {ref[3]} | {ref[4]} "
            f"| {ours[0]} | {ours[1]} | {ref[5]} | {ref[6]} |"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# noise robustness
# ---------------------------------------------------------------------------


def planted_images(n_target=40, n_outlier=40, size=16, seed=0, shift=None):
    """Piecewise-constant synthetic images with a class-specific layout.

    Every image is a dark background with one bright square whose position
    and brightness jitter per image. Outlier squares sit ``shift`` pixels
    further down and right than target squares (default: half the image,
    which makes the classes disjoint).
    """
    from .imageprep import GrayImage

    rng = derive_rng(seed, 4)
    images, labels = [], []
    q = size // 4
    shift = 2 * q if shift is None else int(shift)
    side = 2 * q - q // 2
    for k in range(n_target + n_outlier):
        target = k < n_target
        px = np.full((size, size), 0.25 + 0.05 * rng.uniform())
        oy, ox = rng.integers(0, q // 2 + 1, size=2)
        y0 = oy + (0 if target else shift)
        x0 = ox + (0 if target else shift)
        px[y0:y0 + side, x0:x0 + side] = 0.75 + 0.05 * rng.uniform()
        images.append(GrayImage(px, "unit"))
        labels.append(target)
    return images, np.array(labels)


def load_image_folder(path):
    """Images under ``path/target`` and ``path/outlier`` (PNG or PGM)."""
    from .imageprep import load_image

    root = Path(path)
    images, labels = [], []
    for sub, lab in (("target", True), ("outlier", False)):
        d = root / sub
        if not d.is_dir():
            raise MissingDataset(f"{d} not found")
        for f in sorted(d.iterdir()):
            if f.suffix.lower() in (".png", ".pgm", ".pnm"):
                images.append(load_image(f))
                labels.append(lab)
    if not images:
        raise MissingDataset(f"no images under {root}")
    return images, np.array(labels)


def run_noise_sweep(images, labels, kinds=("gaussian", "laplacian", "uniform"),
                    scales=(0.0, 0.05, 0.1, 0.2), model_kinds=("ocsvm", "pb_ocsvm"),
                    cell=None, protocol: Protocol = Protocol(scaler="none"), seed=42,
                    denoise=None, name="images") -> list:
    """AUC per noise kind x scale x model on image features.

    Each image gets independent noise from a seed derived from ``seed``, the
    image index and the noise kind. ``denoise`` is an optional callable
    applied to each noised image (for example ``tv_denoise``).
    """
    from .core import dataset_from_arrays
    from .imageprep import NOISE_KINDS, add_noise, image_to_features

    for kind in kinds:
        if kind not in NOISE_KINDS:
            raise DomainError(f"unknown noise kind {kind!r}; expected one of {NOISE_KINDS}")
    cell = cell or {"nu": 0.1, "tau": 0.5, "kernel": "rbf", "hyper": 0.0}
    out = []
    for kind in kinds:
        for scale in scales:
            feats = []
            for i, img in enumerate(images):
                noisy = add_noise(img, kind, scale, seed=repetition_seed(seed, i + 1))
                if denoise is not None:
                    noisy = denoise(noisy)
                feats.append(image_to_features(noisy))
            ds = dataset_from_arrays(np.array(feats), labels, name=name)
            X_train, X_test, y_test = prepare_split(ds, protocol, seed)
            for mk in model_kinds:
                c = dict(cell, tau=cell["tau"] if mk == "pb_ocsvm" else 0.0)
                rec = run_cell(mk, c, X_train, X_test, y_test, name, seed, protocol.solver)
                rec.params.update(noise_kind=kind, noise_scale=scale)
                out.append(rec)
    return out


def write_noise_summary(records, path):
    cols = ("noise_kind", "noise_scale", "kind", "auc", "accuracy")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in records:
            w.writerow([r.params["noise_kind"], r.params["noise_scale"], r.kind,
                        "" if r.auc is None else r.auc,
                        "" if r.metrics is None or r.metrics.accuracy is None else r.metrics.accuracy])
