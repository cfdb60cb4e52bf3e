"""Experiment configuration and end-to-end pipelines behind the CLI."""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ClassKind, FunctionClass, KernelConfig, TrainingCorpus, feature_map
from .errors import ClassSpecError, ConfigError, CorpusError
from .evaluate import METRICS, score
from .fusion import FusionPlan, fuse
from .io import read_corpus, read_csv
from .oracle.discrete import DiscreteJoint
from .oracle.gaussian import GaussianModel, Mixture, build_corpus, preset
from .pca import fit_pca
from .projection import (
    cross_domain,
    project,
    project_split_half,
    shared_representation,
    side_info_linear_nonlinear,
)
from .single import fit_class

TASKS = ("fit", "fuse", "project", "shared-rep", "cross-domain", "side-info")

_STATIC_KEYS = {
    "task",
    "classA.kind",
    "classA.basis",
    "classB.kind",
    "classB.basis",
    "kernel.bandwidth",
    "kernel.regularization",
    "kernel.order",
    "fit.domain",
    "data.labeled1",
    "data.labeled2",
    "data.unlabeled",
    "data.test",
    "model.preset",
    "model.kind",
    "model.dims",
    "model.sigma",
    "model.table",
    "counts.L1",
    "counts.L2",
    "counts.U",
    "counts.test",
    "split.train",
    "split.seed",
    "metric",
    "pca.x1",
    "pca.x2",
    "preprocess.center",
    "project.split_half",
    "output",
}
_COMPONENT_KEY = re.compile(r"^model\.component(\d+)\.(sigma|weight)$")


def _int(cfg, key, default=None, minimum=None):
    if key not in cfg:
        return default
    try:
        v = int(cfg[key])
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got '{cfg[key]}'") from None
    if minimum is not None and v < minimum:
        raise ConfigError(f"{key}: must be at least {minimum}")
    return v


def _float(cfg, key, default=None):
    if key not in cfg:
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got '{cfg[key]}'") from None


def _bool(cfg, key, default=False):
    if key not in cfg:
        return default
    v = cfg[key].lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected true or false, got '{cfg[key]}'")


def parse_matrix(text: str) -> np.ndarray:
    """``"1,0;0,1"`` -> 2x2 array (rows separated by ``;``)."""
    try:
        rows = [[float(v) for v in r.split(",")] for r in text.split(";") if r.strip()]
        return np.array(rows, dtype=float)
    except ValueError:
        raise ConfigError(f"cannot parse matrix '{text}'") from None


def _class(cfg, prefix, kernel) -> FunctionClass:
    kind = cfg.get(f"{prefix}.kind", "zero").lower()
    try:
        kind = ClassKind("nonparametric" if kind in ("all", "all-functions") else kind)
    except ValueError:
        raise ConfigError(f"{prefix}.kind: unknown class '{cfg[prefix + '.kind']}'") from None
    basis = cfg.get(f"{prefix}.basis")
    if kind is ClassKind.BASIS:
        if not basis:
            raise ConfigError(f"{prefix}.basis is required for a basis class")
        try:
            return FunctionClass.basis([feature_map(s) for s in basis.split(",")])
        except ClassSpecError as exc:
            raise ConfigError(f"{prefix}.basis: {exc}") from None
    if basis:
        raise ConfigError(f"{prefix}.basis given for a {kind.value} class")
    if kind is ClassKind.NONPARAMETRIC:
        return FunctionClass.nonparametric(kernel)
    return FunctionClass(kind)


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    class_a: FunctionClass
    class_b: FunctionClass
    kernel: KernelConfig | None = None
    fit_domain: int = 1
    data: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    split_train: float = 1.0
    split_seed: int = 0
    metric: str = "rmse"
    pca: dict = field(default_factory=dict)
    center: bool = False
    split_half: bool = False
    output: str | None = None

    @classmethod
    def from_mapping(cls, cfg: dict, task: str | None = None, base_dir=None) -> "ExperimentConfig":
        """Validate a parsed config; ``task`` (from the subcommand) overrides the file.

        Relative data paths are resolved against ``base_dir``.
        """
        for key in cfg:
            if key not in _STATIC_KEYS and not _COMPONENT_KEY.match(key):
                raise ConfigError(f"unknown key '{key}'")
        task = task or cfg.get("task")
        if task not in TASKS:
            raise ConfigError(f"task must be one of {', '.join(TASKS)}; got '{task}'")
        kernel = None
        if any(k.startswith("kernel.") for k in cfg):
            try:
                kernel = KernelConfig(
                    bandwidth_constant=_float(cfg, "kernel.bandwidth", KernelConfig.bandwidth_constant),
                    regularization=_float(cfg, "kernel.regularization", KernelConfig.regularization),
                    order=_int(cfg, "kernel.order", KernelConfig.order),
                )
            except ClassSpecError as exc:
                raise ConfigError(str(exc)) from None
        base = Path(base_dir) if base_dir else None
        data = {}
        for role in ("labeled1", "labeled2", "unlabeled", "test"):
            v = cfg.get(f"data.{role}")
            if v:
                p = Path(v)
                data[role] = str(base / p) if base is not None and not p.is_absolute() else str(p)
        model = {k[len("model.") :]: v for k, v in cfg.items() if k.startswith("model.")}
        if "table" in model and base is not None and not Path(model["table"]).is_absolute():
            model["table"] = str(base / model["table"])
        if data and model:
            raise ConfigError("give either data.* paths or a model.* spec, not both")
        if not data and not model:
            raise ConfigError("no input: give data.* paths or a model.* spec")
        if data and "unlabeled" not in data:
            raise ConfigError("data.unlabeled is required")
        counts = {k: _int(cfg, f"counts.{k}", 0, minimum=0) for k in ("L1", "L2", "U", "test")}
        if model and counts["U"] < 1:
            raise ConfigError("counts.U must be at least 1")
        split_train = _float(cfg, "split.train", 1.0)
        if not 0.0 < split_train <= 1.0:
            raise ConfigError("split.train must lie in (0, 1]")
        metric = cfg.get("metric", "rmse")
        if metric not in METRICS:
            raise ConfigError(f"metric must be one of {', '.join(METRICS)}")
        fit_domain = _int(cfg, "fit.domain", 1)
        if fit_domain not in (1, 2):
            raise ConfigError("fit.domain must be 1 or 2")
        pca = {d: _int(cfg, f"pca.x{d}", minimum=1) for d in (1, 2) if f"pca.x{d}" in cfg}
        return cls(
            task=task,
            class_a=_class(cfg, "classA", kernel),
            class_b=_class(cfg, "classB", kernel),
            kernel=kernel,
            fit_domain=fit_domain,
            data=data,
            model=model,
            counts=counts,
            split_train=split_train,
            split_seed=_int(cfg, "split.seed", 0),
            metric=metric,
            pca=pca,
            center=_bool(cfg, "preprocess.center"),
            split_half=_bool(cfg, "project.split_half"),
            output=cfg.get("output"),
        )


def build_model(spec: dict):
    """Sampling model from the ``model.*`` keys."""
    if "preset" in spec:
        extra = set(spec) - {"preset"}
        if extra:
            raise ConfigError(f"model.preset cannot be combined with {sorted('model.' + k for k in extra)}")
        try:
            return preset(spec["preset"])
        except CorpusError as exc:
            raise ConfigError(str(exc)) from None
    kind = spec.get("kind")
    try:
        if kind == "gaussian":
            dims = tuple(int(v) for v in spec.get("dims", "1,1,1").split(","))
            if "sigma" not in spec:
                raise ConfigError("model.sigma is required for a gaussian model")
            return GaussianModel(parse_matrix(spec["sigma"]), dims)
        if kind == "mixture":
            dims = tuple(int(v) for v in spec.get("dims", "1,1,1").split(","))
            idx = sorted({int(_COMPONENT_KEY.match("model." + k).group(1)) for k in spec if k.startswith("component")})
            if not idx:
                raise ConfigError("a mixture needs model.componentK.sigma entries")
            comps, weights = [], []
            for i in idx:
                if f"component{i}.sigma" not in spec:
                    raise ConfigError(f"model.component{i}.sigma is missing")
                comps.append(GaussianModel(parse_matrix(spec[f"component{i}.sigma"]), dims))
                weights.append(float(spec.get(f"component{i}.weight", 1.0)))
            w = np.array(weights)
            return Mixture(tuple(comps), w / w.sum())
        if kind == "discrete":
            if "table" not in spec:
                raise ConfigError("model.table is required for a discrete model")
            try:
                text = Path(spec["table"]).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read {spec['table']}: {exc.strerror}") from None
            return DiscreteJoint.from_text(text)
    except (CorpusError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid model: {exc}") from None
    raise ConfigError(f"model.kind must be gaussian, mixture or discrete; got '{kind}'")


def synthesize(cfg: ExperimentConfig, seed: int) -> tuple[TrainingCorpus, dict | None]:
    """Seeded corpus plus an optional paired test sample from the configured model."""
    model = build_model(cfg.model)
    c = cfg.counts
    corpus = build_corpus(model, c["L1"], c["L2"], c["U"], seed)
    test = None
    if c["test"]:
        # child 3 of the same seed sequence; children 0-2 feed the corpus
        rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(4)[3])
        x1, x2, y = model.sample(c["test"], rng)
        test = {"x1": x1, "x2": x2, "y": y}
    return corpus, test


def load_inputs(cfg: ExperimentConfig, seed: int) -> tuple[TrainingCorpus, dict | None]:
    if cfg.model:
        return synthesize(cfg, seed)
    d = cfg.data
    corpus = read_corpus(d.get("labeled1"), d.get("labeled2"), d["unlabeled"])
    test = read_csv(d["test"], ("y",)) if "test" in d else None
    return corpus, test


def _replace(corpus: TrainingCorpus, **kw) -> TrainingCorpus:
    fields = dict(
        labeled1_x=corpus.labeled1_x,
        labeled1_y=corpus.labeled1_y,
        labeled2_x=corpus.labeled2_x,
        labeled2_y=corpus.labeled2_y,
        unlabeled_x1=corpus.unlabeled_x1,
        unlabeled_x2=corpus.unlabeled_x2,
    )
    fields.update(kw)
    return TrainingCorpus(**fields)


def _holdout(cfg: ExperimentConfig, corpus: TrainingCorpus):
    """Split the labeled set the predictor reads into train and test parts."""
    domain = cfg.fit_domain if cfg.task == "fit" else 1
    if cfg.task == "fuse":
        raise ConfigError("split.train < 1 needs paired test rows; fuse has none, give data.test or counts.test")
    x = corpus.labeled1_x if domain == 1 else corpus.labeled2_x
    y = corpus.labeled1_y if domain == 1 else corpus.labeled2_y
    n_train = int(round(cfg.split_train * x.shape[0]))
    if n_train < 1 or n_train >= x.shape[0]:
        raise CorpusError(f"split.train leaves no {'training' if n_train < 1 else 'test'} rows")
    perm = np.random.default_rng(cfg.split_seed).permutation(x.shape[0])
    tr, te = perm[:n_train], perm[n_train:]
    if domain == 1:
        corpus = _replace(corpus, labeled1_x=x[tr], labeled1_y=y[tr])
    else:
        corpus = _replace(corpus, labeled2_x=x[tr], labeled2_y=y[tr])
    return corpus, {f"x{domain}": x[te], "y": y[te]}


@dataclass
class RunResult:
    predictor: object
    report: dict
    predictions: np.ndarray | None
    seconds: float


def _preprocess(cfg: ExperimentConfig, corpus: TrainingCorpus, test: dict | None):
    """Optional centring and PCA; statistics come from the training data only."""
    notes, y_shift = [], None
    x1 = {"l": corpus.labeled1_x, "u": corpus.unlabeled_x1}
    x2 = {"l": corpus.labeled2_x, "u": corpus.unlabeled_x2}
    y1, y2 = corpus.labeled1_y, corpus.labeled2_y
    test = dict(test) if test else None
    if cfg.center:
        for role, parts in (("x1", x1), ("x2", x2)):
            mu = parts["u"].mean(axis=0)
            for k in parts:
                parts[k] = parts[k] - mu
            if test and role in test:
                test[role] = test[role] - mu
        ys = np.vstack([y1, y2])
        y_shift = ys.mean(axis=0) if ys.shape[0] else None
        if y_shift is not None:
            y1, y2 = y1 - y_shift, y2 - y_shift
        notes.append("inputs and labels mean-centred before fitting; predictions shifted back")
    for d, dim in sorted(cfg.pca.items()):
        parts = x1 if d == 1 else x2
        p = fit_pca(parts["u"], dim)
        for k in parts:
            parts[k] = p.transform(parts[k]) if parts[k].shape[0] else np.zeros((0, dim))
        if test and f"x{d}" in test:
            test[f"x{d}"] = p.transform(test[f"x{d}"])
        notes.append(f"x{d} reduced to {dim} principal components fitted on the unlabeled set")
    corpus = TrainingCorpus(x1["l"], y1, x2["l"], y2, x1["u"], x2["u"])
    return corpus, test, y_shift, notes


def run_experiment(cfg: ExperimentConfig, seed: int = 0) -> RunResult:
    """Load or synthesise data, fit the configured estimator and score it."""
    corpus, test = load_inputs(cfg, seed)
    if test is None and cfg.split_train < 1.0:
        corpus, test = _holdout(cfg, corpus)
    corpus, test, y_shift, notes = _preprocess(cfg, corpus, test)
    start = time.perf_counter()
    predictor, inputs_from, extra = _fit(cfg, corpus)
    seconds = time.perf_counter() - start
    notes += extra

    evaluation, predictions = None, None
    if test is not None:
        missing = [r for r in inputs_from if r not in test]
        if missing:
            raise CorpusError(f"test set lacks column role(s) {missing} needed by the predictor")
        predictions = np.atleast_2d(predictor.predict(*(test[r] for r in inputs_from)))
        if predictions.shape[0] != test["y"].shape[0]:
            predictions = predictions.reshape(test["y"].shape[0], -1)
        if y_shift is not None:
            predictions = predictions + y_shift
        value, per = score(test["y"], predictions, cfg.metric)
        evaluation = {"metric": cfg.metric, "value": value, "per_target": per, "n_test": int(test["y"].shape[0])}
    else:
        notes.append("no test set: nothing to score")
    report = {
        "task": cfg.task,
        "cardinalities": corpus.cardinalities(),
        "dims": list(corpus.dims),
        "seed": seed,
        "classes": {"A": cfg.class_a.describe(), "B": cfg.class_b.describe()},
        "estimator": predictor.describe(),
        "evaluation": evaluation,
        "notes": notes,
    }
    return RunResult(predictor, report, predictions, seconds)


def _fit(cfg: ExperimentConfig, corpus: TrainingCorpus):
    """Returns the predictor, the test roles it reads and report notes."""
    task, k = cfg.task, cfg.kernel
    if task == "fit":
        d = cfg.fit_domain
        cls = cfg.class_a if d == 1 else cfg.class_b
        x, y = (corpus.labeled1_x, corpus.labeled1_y) if d == 1 else (corpus.labeled2_x, corpus.labeled2_y)
        if cls.kind is not ClassKind.ZERO and x.shape[0] == 0:
            raise CorpusError(f"fit on domain {d} needs labeled domain-{d} examples")
        return fit_class(x, y, cls, d, k), (f"x{d}",), []
    plan = FusionPlan(cfg.class_a, cfg.class_b)
    if task == "fuse":
        return fuse(corpus, plan, k, cross_check=True), ("x1", "x2"), []
    if task == "project":
        if cfg.class_b.kind is ClassKind.ZERO:
            note = (
                "class B is zero: the single-domain minimax predictor is the domain-1 fit phi_A itself; "
                "domain-2 data cannot improve it"
            )
            return cross_domain(corpus, cfg.class_a, k), ("x1",), [note]
        if cfg.split_half:
            return project_split_half(corpus, plan, k), ("x1",), ["split-half: fused and projected on disjoint halves"]
        return project(fuse(corpus, plan, k), corpus, k), ("x1",), []
    if task == "shared-rep":
        return shared_representation(corpus, cfg.class_b, k), ("x1",), []
    if task == "cross-domain":
        return cross_domain(corpus, cfg.class_a, k), ("x1",), []
    return side_info_linear_nonlinear(corpus, k), ("x1",), []
