"""Streaming driver for the random-feature multiple-kernel learners.

Variants
--------
``raker``
    Every kernel, every label; Hedge-weighted average over the full dictionary.
``omkl_aks``
    As ``raker`` but each prediction uses a sampled kernel subset.
``amkl``
    ``raker`` with stream-based label requests.
``amkl_aks``
    Subset selection and label requests together.
``single_kernel``
    One kernel; no selection, no label requests.
``budgeted_kernel``
    Budgeted kernel-expansion baseline (see :mod:`amkl.baselines`).

One step predicts with the state left by the previous step, then decides
whether to ask for the label. Without a label the whole state is frozen.
With a label every kernel takes a gradient step, the Hedge losses grow, and
(for the ``*_aks`` variants) a fresh subset is drawn for the next prediction.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _random
from .active_labeling import ActiveConfig, LabelHistory, confidence_check, decide, pairwise_discrepancy
from .ensemble_weights import WeightState, accumulate, distribution, restricted_distribution
from .errors import ConfigError, InvalidArgumentError, LabelingError
from .kernel_selection import SelectionParams, choose_K, collection_for, sample_subset, subset_pmf
from .local_learners import LocalModel, LossSpec, loss, ogd_step, ridge_hindsight
from .rf_features import FeatureBank, KernelSpec, gaussian_dictionary, rf_map_batch, sample_frequencies

VARIANTS = ("raker", "omkl_aks", "amkl", "amkl_aks", "single_kernel", "budgeted_kernel")
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class AlgorithmConfig:
    """Hyperparameters of one learner.

    ``eta_l``/``eta_g`` left as ``None`` resolve to ``1/sqrt(T)`` once the
    stream length is known. ``weight_loss`` chooses what the Hedge weights
    are charged: the full regularized loss (``"regularized"``) or the squared
    prediction error only (``"prediction"``).
    """

    variant: str = "amkl_aks"
    eta_l: float | None = None
    eta_g: float | None = None
    lam: float = 0.01
    D: int = 50
    kernels: tuple = field(default_factory=lambda: tuple(gaussian_dictionary()))
    selection: SelectionParams = field(default_factory=SelectionParams)
    active: ActiveConfig = field(default_factory=ActiveConfig)
    seed: int = 0
    weight_loss: str = "regularized"
    clip: float | None = None
    budget: int = 50

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(self.kernels))
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not self.kernels:
            raise ConfigError("kernel dictionary is empty")
        if self.variant == "single_kernel" and len(self.kernels) != 1:
            raise ConfigError("single_kernel needs exactly one kernel")
        for name in ("eta_l", "eta_g"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if not self.lam >= 0:
            raise ConfigError(f"lam must be nonnegative, got {self.lam!r}")
        if int(self.D) != self.D or self.D < 1:
            raise ConfigError(f"D must be a positive integer, got {self.D!r}")
        if self.weight_loss not in ("regularized", "prediction"):
            raise ConfigError(f"unknown weight_loss {self.weight_loss!r}")
        if self.budget < 1:
            raise ConfigError("budget must be positive")

    @property
    def P(self):
        return len(self.kernels)

    @property
    def uses_selection(self):
        return self.variant in ("omkl_aks", "amkl_aks")

    @property
    def uses_active(self):
        return self.variant in ("amkl", "amkl_aks") and self.active.enabled

    def resolved(self, T):
        """Copy with unset step sizes replaced by ``1/sqrt(T)``."""
        if T < 1:
            raise InvalidArgumentError("stream is empty")
        step = 1.0 / math.sqrt(T)
        return dataclasses.replace(
            self,
            eta_l=self.eta_l if self.eta_l is not None else step,
            eta_g=self.eta_g if self.eta_g is not None else step,
        )

    def to_dict(self):
        return {
            "variant": self.variant,
            "eta_l": self.eta_l,
            "eta_g": self.eta_g,
            "lam": self.lam,
            "D": self.D,
            "kernels": [{"family": k.family.value, "sigma2": k.sigma2} for k in self.kernels],
            "selection": dataclasses.asdict(self.selection),
            "active": {**dataclasses.asdict(self.active), "eta_c": _encode_float(self.active.eta_c)},
            "seed": self.seed,
            "weight_loss": self.weight_loss,
            "clip": self.clip,
            "budget": self.budget,
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "kernels" in data:
            data["kernels"] = tuple(
                KernelSpec(k["sigma2"], k.get("family", "gaussian")) if isinstance(k, dict) else KernelSpec(float(k))
                for k in data["kernels"]
            )
        if "selection" in data:
            data["selection"] = SelectionParams(**data["selection"])
        if "active" in data:
            active = dict(data["active"])
            if "eta_c" in active:
                active["eta_c"] = float(active["eta_c"])
            data["active"] = ActiveConfig(**active)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def _encode_float(v):
    return "inf" if math.isinf(v) else v


@dataclass(frozen=True, eq=False)
class EngineState:
    """Everything that changes along the stream.

    ``theta`` stacks the per-kernel parameters row-wise. ``rng_state`` holds
    the bit-generator states of the collection and subset streams so that a
    restored state continues the exact same draws.
    """

    theta: np.ndarray
    weights: WeightState
    subset: np.ndarray
    history: LabelHistory
    step: int
    rng_state: dict
    K: int
    shadow_loss: np.ndarray | None = None

    @property
    def models(self):
        return [LocalModel(row, i) for i, row in enumerate(self.theta)]

    def __eq__(self, other):
        if not isinstance(other, EngineState):
            return NotImplemented
        same_shadow = (self.shadow_loss is None and other.shadow_loss is None) or (
            self.shadow_loss is not None
            and other.shadow_loss is not None
            and np.array_equal(self.shadow_loss, other.shadow_loss)
        )
        return (
            np.array_equal(self.theta, other.theta)
            and self.weights == other.weights
            and np.array_equal(self.subset, other.subset)
            and self.history == other.history
            and self.step == other.step
            and self.rng_state == other.rng_state
            and self.K == other.K
            and same_shadow
        )

    __hash__ = None


@dataclass(frozen=True)
class TraceRecord:
    t: int
    prediction: float
    y: float | None
    a: int
    K: int
    subset: tuple
    mse: float | None = None
    al_eff: float | None = None
    losses: tuple | None = None
    penalty: float = 0.0
    discrepancy: float | None = None
    shadow_prediction: float | None = None


def _rng_from(state):
    g = np.random.Generator(np.random.PCG64())
    g.bit_generator.state = state
    return g


class Engine:
    """Immutable learner definition: resolved config plus its feature maps.

    ``shadow=True`` additionally tracks the full-information Hedge weights
    over the same kernel functions (a test oracle; it needs every label).
    """

    def __init__(self, config: AlgorithmConfig, d: int, feature_maps=None, shadow=False):
        if config.eta_l is None or config.eta_g is None:
            raise ConfigError("step sizes unresolved; call config.resolved(T) first")
        if config.variant == "budgeted_kernel":
            raise ConfigError("budgeted_kernel runs through amkl.baselines")
        self.config = config
        self.d = int(d)
        if feature_maps is None:
            feature_maps = [
                sample_frequencies(k, config.D, d, _random.derive_seed(config.seed, _random.FEATURES, i))
                for i, k in enumerate(config.kernels)
            ]
        if len(feature_maps) != config.P:
            raise ConfigError(f"{len(feature_maps)} feature maps for {config.P} kernels")
        self.bank = FeatureBank(feature_maps)
        self.loss_spec = LossSpec(config.lam)
        self.shadow = shadow

    @property
    def feature_maps(self):
        return self.bank.maps

    def init(self) -> EngineState:
        cfg = self.config
        P = cfg.P
        return EngineState(
            theta=np.zeros((P, self.bank.dim)),
            weights=WeightState.fresh(P, cfg.eta_g),
            subset=np.arange(P),
            history=LabelHistory(),
            step=0,
            rng_state={
                "collection": _random.generator(cfg.seed, _random.COLLECTION).bit_generator.state,
                "subset": _random.generator(cfg.seed, _random.SUBSET).bit_generator.state,
            },
            K=P,
            shadow_loss=np.zeros(P) if self.shadow else None,
        )

    def predict(self, state: EngineState, x):
        """Per-kernel outputs, their features and the combined prediction for ``x``."""
        Z = self.bank.transform(x)
        f = np.einsum("ij,ij->i", state.theta, Z)
        q = restricted_distribution(state.weights, state.subset)
        return float(q @ f[state.subset]), f, Z

    def step(self, state: EngineState, x, oracle, shadow_label=None):
        """Process one input; returns ``(prediction, record, new_state)``.

        ``oracle`` is called with no arguments, and only when the label is
        requested. ``shadow_label`` feeds the full-information shadow and is
        never seen by the learner.
        """
        cfg = self.config
        t = state.step + 1
        yhat, f, Z = self.predict(state, x)

        discrepancy = None
        shadow_pred = None
        if self.shadow:
            shadow_pred = float(distribution(WeightState(state.shadow_loss, cfg.eta_g)) @ f)

        if cfg.uses_active:
            p = distribution(state.weights)
            discrepancy = pairwise_discrepancy(f, p, state.subset, cfg.active.pair_loss)
            confident = confidence_check(f, p, state.subset, cfg.active.eta_c, cfg.active.pair_loss)
            a, history = decide(state.history, confident, cfg.active)
        else:
            a, history = 1, state.history.record(1)

        penalty = 0.0
        if cfg.lam:
            q = restricted_distribution(state.weights, state.subset)
            norms = np.einsum("ij,ij->i", state.theta, state.theta)
            penalty = cfg.lam * float(q @ norms[state.subset])

        shadow_loss = state.shadow_loss
        if self.shadow:
            if shadow_label is None:
                raise InvalidArgumentError("shadow mode needs the label of every sample")
            shadow_loss = shadow_loss + loss(state.theta, Z, shadow_label, self.loss_spec)

        if a == 0:
            new_state = dataclasses.replace(state, history=history, step=t, shadow_loss=shadow_loss)
            record = TraceRecord(t, yhat, None, 0, state.K, tuple(int(i) for i in state.subset),
                                 penalty=penalty, discrepancy=discrepancy, shadow_prediction=shadow_pred)
            return yhat, record, new_state

        try:
            y = float(oracle())
        except Exception as exc:
            raise LabelingError(f"label oracle failed at step {t}: {exc}") from exc
        if not math.isfinite(y):
            raise LabelingError(f"label oracle returned non-finite value at step {t}")

        losses = loss(state.theta, Z, y, self.loss_spec)
        charged = losses if cfg.weight_loss == "regularized" else (y - f) ** 2
        theta = ogd_step(state.theta, Z, y, cfg.eta_l, self.loss_spec, clip=cfg.clip)
        weights = accumulate(state.weights, charged, labeled=True)

        rng_state = state.rng_state
        subset, K = state.subset, state.K
        if cfg.uses_selection:
            p_next = distribution(weights)
            K = cfg.selection.fixed_k if cfg.selection.fixed_k is not None else choose_K(p_next, cfg.selection.delta)
            K = min(K, cfg.P)
            coll_rng = _rng_from(rng_state["collection"])
            sub_rng = _rng_from(rng_state["subset"])
            collection = collection_for(cfg.P, K, cfg.selection, coll_rng)
            pmf = subset_pmf(collection, weights)
            subset = collection.subsets[sample_subset(pmf, sub_rng)]
            rng_state = {
                "collection": coll_rng.bit_generator.state,
                "subset": sub_rng.bit_generator.state,
            }

        new_state = EngineState(theta, weights, subset, history, t, rng_state, K, shadow_loss)
        record = TraceRecord(
            t, yhat, y, 1, state.K, tuple(int(i) for i in state.subset),
            losses=tuple(float(v) for v in losses), penalty=penalty,
            discrepancy=discrepancy, shadow_prediction=shadow_pred,
        )
        return yhat, record, new_state


def _as_arrays(dataset):
    if isinstance(dataset, tuple) and len(dataset) == 2:
        X, y = dataset
        return np.asarray(X, dtype=float), np.asarray(y, dtype=float)
    X = np.array([s.x for s in dataset], dtype=float)
    y = np.array([s.y for s in dataset], dtype=float)
    return X, y


def run(config: AlgorithmConfig, dataset, shadow=False, feature_maps=None, return_state=False):
    """Run a learner over a labelled stream in file order.

    ``dataset`` is a list of samples with ``x``/``y`` attributes or an
    ``(X, y)`` pair. Labels go to the learner only when it asks for them;
    the trace always carries the true ``y`` for scoring. Returns the list of
    :class:`TraceRecord` (and the final state when ``return_state``).
    """
    X, y = _as_arrays(dataset)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InvalidArgumentError("dataset is empty")
    if y.shape != (X.shape[0],):
        raise InvalidArgumentError("features and labels disagree on sample count")
    cfg = config.resolved(X.shape[0])
    if cfg.variant == "budgeted_kernel":
        from .baselines import budgeted_mkl_run

        return budgeted_mkl_run(cfg, (X, y))
    engine = Engine(cfg, X.shape[1], feature_maps=feature_maps, shadow=shadow)
    state = engine.init()
    trace = []
    sq_sum = 0.0
    labeled = 0
    for t in range(X.shape[0]):
        label = y[t]
        yhat, rec, state = engine.step(state, X[t], lambda: label, shadow_label=label if shadow else None)
        err = yhat - label
        sq_sum += err * err
        labeled += rec.a
        trace.append(dataclasses.replace(rec, y=float(label), mse=float(sq_sum / (t + 1)), al_eff=labeled / (t + 1)))
    if return_state:
        return trace, state, engine
    return trace


def hindsight_features(engine_or_maps, X):
    """Yield each kernel's ``(T, n)`` feature matrix for the inputs ``X``, one kernel at a time."""
    maps = engine_or_maps.feature_maps if isinstance(engine_or_maps, Engine) else engine_or_maps
    for m in maps:
        yield rf_map_batch(m, X)


def regret(trace, features, labels, lam):
    """Learner's cumulative loss minus the best fixed kernel model in hindsight.

    The learner is charged ``(yhat - y)^2`` plus its weight-averaged
    regularizer at each step; each kernel's comparator is the ridge solution
    over the whole stream (see :func:`amkl.local_learners.ridge_hindsight`).
    """
    labels = np.asarray(labels, dtype=float)
    spec = LossSpec(lam)
    learner = sum((r.prediction - yt) ** 2 + r.penalty for r, yt in zip(trace, labels))
    best = math.inf
    for Z in features:
        theta = ridge_hindsight(Z, labels, lam).theta
        total = float(np.sum(loss(np.broadcast_to(theta, Z.shape), Z, labels, spec)))
        best = min(best, total)
    return float(learner - best)


def save_checkpoint(path, engine: Engine, state: EngineState):
    """Write a versioned ``.npz`` snapshot that :func:`load_checkpoint` restores exactly."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "prng": _random.PRNG_NAME,
        "config": engine.config.to_dict(),
        "d": engine.d,
        "shadow": engine.shadow,
        "step": state.step,
        "K": state.K,
        "history": dataclasses.asdict(state.history),
        "rng_state": state.rng_state,
        "eta_g": state.weights.eta_g,
        "map_seeds": [getattr(m, "seed", None) for m in engine.feature_maps],
    }
    arrays = {
        "theta": state.theta,
        "cumulative_loss": state.weights.cumulative_loss,
        "subset": np.asarray(state.subset, dtype=np.int64),
        "frequencies": np.stack([m.frequencies for m in engine.feature_maps]),
    }
    if state.shadow_loss is not None:
        arrays["shadow_loss"] = state.shadow_loss
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path):
    """Return ``(engine, state)`` from a snapshot written by :func:`save_checkpoint`."""
    from .rf_features import RandomFeatureMap

    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise InvalidArgumentError(f"unsupported checkpoint version {meta.get('version')!r}")
        config = AlgorithmConfig.from_dict(meta["config"])
        freqs = data["frequencies"]
        maps = []
        for i, k in enumerate(config.kernels):
            f = np.array(freqs[i])
            f.setflags(write=False)
            maps.append(RandomFeatureMap(f, k, meta["map_seeds"][i]))
        engine = Engine(config, meta["d"], feature_maps=maps, shadow=meta["shadow"])
        state = EngineState(
            theta=np.array(data["theta"]),
            weights=WeightState(np.array(data["cumulative_loss"]), meta["eta_g"]),
            subset=np.array(data["subset"], dtype=int),
            history=LabelHistory(**meta["history"]),
            step=meta["step"],
            rng_state=_restore_rng_state(meta["rng_state"]),
            K=meta["K"],
            shadow_loss=np.array(data["shadow_loss"]) if "shadow_loss" in data else None,
        )
    return engine, state


def _restore_rng_state(rs):
    # json turns the PCG64 integers into python ints already; nothing else to fix
    return {k: dict(v) for k, v in rs.items()}
