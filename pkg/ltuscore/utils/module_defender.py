import json
import logging
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.special import log_softmax, softmax

from ltuscore.utils.errors import (
    ArgumentError,
    CapabilityError,
    ParseError,
    ShapeMismatchError,
    TrainingError,
)
from ltuscore.utils.module_data import LabeledDataset, Sample
from ltuscore.utils.utils import make_rng

logger = logging.getLogger(__name__)

MODEL_FORMAT = "ltuscore-model"
MODEL_VERSION = 1
MAX_HIDDEN_WIDTH = 64


class Algorithm(str, Enum):
    LOGISTIC_GD = "logistic_gd"
    GAUSSIAN_NB = "gaussian_nb"
    KNN = "knn"
    PERCEPTRON_SGD = "perceptron_sgd"
    LINEAR_SVC_SGD = "linear_svc_sgd"
    MLP_SGD = "mlp_sgd"


class LossKind(str, Enum):
    ZERO_ONE = "zero_one"
    BOUNDED_TRUE_CLASS = "bounded_true_class"


# trainers without any source of randomness
_SEED_FREE = {Algorithm.LOGISTIC_GD, Algorithm.GAUSSIAN_NB, Algorithm.KNN}
_DIFFERENTIABLE = {
    Algorithm.LOGISTIC_GD,
    Algorithm.PERCEPTRON_SGD,
    Algorithm.LINEAR_SVC_SGD,
    Algorithm.MLP_SGD,
}
_LINEAR = {Algorithm.LOGISTIC_GD, Algorithm.PERCEPTRON_SGD, Algorithm.LINEAR_SVC_SGD}

_DEFAULT_LEARNING_RATE = {
    Algorithm.LOGISTIC_GD: 0.5,
    Algorithm.PERCEPTRON_SGD: 1.0,
    Algorithm.LINEAR_SVC_SGD: 0.01,
    Algorithm.MLP_SGD: 0.1,
}
_DEFAULT_EPOCHS = {
    Algorithm.LOGISTIC_GD: 200,
    Algorithm.PERCEPTRON_SGD: 20,
    Algorithm.LINEAR_SVC_SGD: 20,
    Algorithm.MLP_SGD: 200,
}


@dataclass(frozen=True)
class TrainerCapabilities:
    deterministic: bool
    order_invariant: bool
    example_based: bool
    differentiable: bool


@dataclass(frozen=True)
class TrainerConfig:
    """
    Defender trainer and its hyper-parameters

    Args:
        algorithm (Algorithm): training algorithm
        learning_rate (float, optional): step size. Defaults to a per-algorithm value.
        epochs (int, optional): passes over the data. Defaults to a per-algorithm value.
        l2 (float, optional): L2 regularization strength. Defaults to 0.
        fit_intercept (bool, optional): learn a bias term (linear models). Defaults to True.
        k_neighbors (int, optional): neighbors of KNN. Defaults to 5.
        hidden_width (int, optional): MLP hidden units, at most 64. Defaults to 32.
        batch_size (int, optional): MLP minibatch size. Defaults to 32.
        init_scale (float, optional): std of the random init of perceptron / SVC weights. Defaults to 0.01.
        var_smoothing (float, optional): Gaussian NB variance smoothing. Defaults to 1e-9.
        shuffle_each_epoch (bool, optional): SGD visits samples in a seeded random order. Defaults to True.
        init_seed (int, optional): fixed seed (`Fixed` policy); None takes the evaluator's seed. Defaults to None.
        early_stopping (bool, optional): MLP stops on a held-out validation split. Defaults to False.
        validation_fraction (float, optional): MLP validation split. Defaults to 0.1.
        patience (int, optional): MLP epochs without improvement before stopping. Defaults to 10.

    """

    algorithm: Algorithm = Algorithm.LOGISTIC_GD
    learning_rate: Optional[float] = None
    epochs: Optional[int] = None
    l2: float = 0.0
    fit_intercept: bool = True
    k_neighbors: int = 5
    hidden_width: int = 32
    batch_size: int = 32
    init_scale: float = 0.01
    var_smoothing: float = 1e-9
    shuffle_each_epoch: bool = True
    init_seed: Optional[int] = None
    early_stopping: bool = False
    validation_fraction: float = 0.1
    patience: int = 10

    def __post_init__(self):
        try:
            algorithm = Algorithm(self.algorithm)
        except ValueError as error:
            raise ArgumentError(f"unknown algorithm `{self.algorithm}`") from error
        object.__setattr__(self, "algorithm", algorithm)

        if self.learning_rate is None:
            object.__setattr__(self, "learning_rate", _DEFAULT_LEARNING_RATE.get(algorithm, 0.0))
        if self.epochs is None:
            object.__setattr__(self, "epochs", _DEFAULT_EPOCHS.get(algorithm, 0))

        if algorithm in _DIFFERENTIABLE and not self.learning_rate > 0:
            raise ArgumentError(f"`learning_rate` must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ArgumentError(f"`epochs` must be non-negative, got {self.epochs}")
        if self.l2 < 0:
            raise ArgumentError(f"`l2` must be non-negative, got {self.l2}")
        if self.k_neighbors < 1:
            raise ArgumentError(f"`k_neighbors` must be at least 1, got {self.k_neighbors}")
        if not 1 <= self.hidden_width <= MAX_HIDDEN_WIDTH:
            raise ArgumentError(f"`hidden_width` must lie in [1, {MAX_HIDDEN_WIDTH}], got {self.hidden_width}")
        if self.batch_size < 1:
            raise ArgumentError(f"`batch_size` must be at least 1, got {self.batch_size}")
        if self.init_scale < 0 or self.var_smoothing < 0:
            raise ArgumentError("`init_scale` and `var_smoothing` must be non-negative")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ArgumentError(f"`validation_fraction` must lie in (0, 1), got {self.validation_fraction}")
        if self.patience < 1:
            raise ArgumentError(f"`patience` must be at least 1, got {self.patience}")
        if self.init_seed is not None and self.init_seed < 0:
            raise ArgumentError(f"`init_seed` must be non-negative, got {self.init_seed}")

    @property
    def init_seed_policy(self) -> str:
        return "fixed" if self.init_seed is not None else "from_evaluator"

    @property
    def capabilities(self) -> TrainerCapabilities:
        return TrainerCapabilities(
            deterministic=self.algorithm in _SEED_FREE or self.init_seed is not None,
            order_invariant=self.algorithm in _SEED_FREE,
            example_based=self.algorithm == Algorithm.KNN,
            differentiable=self.algorithm in _DIFFERENTIABLE,
        )

    def effective_seed(self, seed: Optional[int]) -> Optional[int]:
        return self.init_seed if self.init_seed is not None else seed

    def to_dict(self) -> Dict:
        result = asdict(self)
        result["algorithm"] = self.algorithm.value
        return result

    @classmethod
    def from_dict(cls, values: Dict) -> "TrainerConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ArgumentError(f"unknown trainer keys: {sorted(unknown)}")
        return cls(**values)


@dataclass(frozen=True, eq=False)
class DefenderModel:
    """
    Trained Defender model M_D

    Args:
        config (TrainerConfig): trainer configuration it was trained with
        num_classes (int): number of classes c
        dim (int): feature dimension k
        params (Dict[str, np.ndarray]): named parameter arrays, in a fixed order
        seed (int, optional): effective training seed
        memory (LabeledDataset, optional): stored training set of example-based models

    """

    config: TrainerConfig
    num_classes: int
    dim: int
    params: Dict[str, np.ndarray] = field(default_factory=dict)
    seed: Optional[int] = None
    memory: Optional[LabeledDataset] = None

    def __post_init__(self):
        frozen = dict()
        for name, value in self.params.items():
            value = np.array(value, dtype=np.float64, copy=True)
            value.setflags(write=False)
            frozen[name] = value
        object.__setattr__(self, "params", frozen)

    @property
    def algorithm(self) -> Algorithm:
        return self.config.algorithm

    @property
    def capabilities(self) -> TrainerCapabilities:
        return self.config.capabilities

    @property
    def parameter_vector(self) -> np.ndarray:
        if not self.params:
            return np.zeros(0)
        return np.concatenate([value.ravel() for value in self.params.values()])

    def fingerprint(self) -> Dict:
        return {"config": self.config.to_dict(), "seed": self.seed}


def _canonical(data: LabeledDataset) -> Tuple[np.ndarray, np.ndarray]:
    """Rows sorted lexicographically by (features, label): the same matrix for any permutation"""
    keys = np.column_stack([data.features, data.labels.astype(np.float64)])
    order = np.lexsort(keys.T[::-1])
    return data.features[order], data.labels[order]


def _one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    return np.eye(num_classes)[labels]


def _fit_logistic(config: TrainerConfig, data: LabeledDataset, seed: Optional[int]) -> Dict:
    X, y = _canonical(data)
    n, k = X.shape
    Y = _one_hot(y, data.num_classes)

    W = np.zeros((data.num_classes, k))
    b = np.zeros(data.num_classes)

    for _ in range(config.epochs):
        P = softmax(X @ W.T + b, axis=1)
        G = (P - Y) / n
        W = W - config.learning_rate * (G.T @ X + config.l2 * W)
        if config.fit_intercept:
            b = b - config.learning_rate * G.sum(axis=0)

    if config.fit_intercept:
        return {"weights": W, "bias": b}
    return {"weights": W}


def _fit_gaussian_nb(config: TrainerConfig, data: LabeledDataset, seed: Optional[int]) -> Dict:
    X, y = _canonical(data)
    c, k = data.num_classes, X.shape[1]
    epsilon = config.var_smoothing * max(float(np.var(X, axis=0).max()), 1.0)

    priors = np.zeros(c)
    means = np.zeros((c, k))
    variances = np.ones((c, k))

    for label in range(c):
        rows = X[y == label]
        if len(rows) == 0:
            continue
        priors[label] = len(rows) / len(X)
        means[label] = rows.mean(axis=0)
        variances[label] = rows.var(axis=0) + epsilon

    return {"priors": priors, "means": means, "variances": variances}


def _fit_perceptron(config: TrainerConfig, data: LabeledDataset, seed: Optional[int]) -> Dict:
    rng = make_rng(seed)
    X, y = data.features, data.labels
    W = config.init_scale * rng.standard_normal((data.num_classes, X.shape[1]))
    b = np.zeros(data.num_classes)
    lr = config.learning_rate

    for _ in range(config.epochs):
        order = rng.permutation(len(X)) if config.shuffle_each_epoch else np.arange(len(X))
        for i in order:
            z = W @ X[i] + b
            j = int(np.argmax(z))
            if config.l2:
                W *= 1.0 - lr * config.l2
            if j != y[i]:
                W[y[i]] += lr * X[i]
                W[j] -= lr * X[i]
                if config.fit_intercept:
                    b[y[i]] += lr
                    b[j] -= lr

    if config.fit_intercept:
        return {"weights": W, "bias": b}
    return {"weights": W}


def _fit_linear_svc(config: TrainerConfig, data: LabeledDataset, seed: Optional[int]) -> Dict:
    rng = make_rng(seed)
    X, y = data.features, data.labels
    W = config.init_scale * rng.standard_normal((data.num_classes, X.shape[1]))
    b = np.zeros(data.num_classes)
    lr = config.learning_rate

    for _ in range(config.epochs):
        order = rng.permutation(len(X)) if config.shuffle_each_epoch else np.arange(len(X))
        for i in order:
            z = W @ X[i] + b
            margins = 1.0 + z - z[y[i]]
            margins[y[i]] = 0.0
            j = int(np.argmax(margins))
            if config.l2:
                W *= 1.0 - lr * config.l2
            if margins[j] > 0:
                W[y[i]] += lr * X[i]
                W[j] -= lr * X[i]
                if config.fit_intercept:
                    b[y[i]] += lr
                    b[j] -= lr

    if config.fit_intercept:
        return {"weights": W, "bias": b}
    return {"weights": W}


def _mlp_forward(params: Dict, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    H = np.tanh(X @ params["hidden_weights"].T + params["hidden_bias"])
    Z = H @ params["output_weights"].T + params["output_bias"]
    return H, Z


def _mlp_mean_loss(params: Dict, X: np.ndarray, y: np.ndarray) -> float:
    _, Z = _mlp_forward(params, X)
    return float(-log_softmax(Z, axis=1)[np.arange(len(y)), y].mean())


def _fit_mlp(config: TrainerConfig, data: LabeledDataset, seed: Optional[int]) -> Dict:
    rng = make_rng(seed)
    X, y = data.features, data.labels
    k, h, c = X.shape[1], config.hidden_width, data.num_classes

    hidden_bound = np.sqrt(6.0 / (k + h))
    output_bound = np.sqrt(6.0 / (h + c))
    params = {
        "hidden_weights": rng.uniform(-hidden_bound, hidden_bound, (h, k)),
        "hidden_bias": np.zeros(h),
        "output_weights": rng.uniform(-output_bound, output_bound, (c, h)),
        "output_bias": np.zeros(c),
    }

    train_index = np.arange(len(X))
    val_index = None
    if config.early_stopping:
        n_val = int(round(config.validation_fraction * len(X)))
        if 1 <= n_val < len(X):
            perm = rng.permutation(len(X))
            val_index, train_index = np.sort(perm[:n_val]), np.sort(perm[n_val:])
        else:
            logger.warning("Too few samples (%d) for early stopping, training on all of them", len(X))

    best_loss, best_params, stale = np.inf, None, 0
    lr, l2 = config.learning_rate, config.l2

    for epoch in range(config.epochs):
        order = rng.permutation(train_index) if config.shuffle_each_epoch else train_index
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            Xb, Yb = X[batch], _one_hot(y[batch], c)

            H, Z = _mlp_forward(params, Xb)
            dZ = (softmax(Z, axis=1) - Yb) / len(batch)
            dA = (dZ @ params["output_weights"]) * (1.0 - H ** 2)

            params["output_weights"] = params["output_weights"] - lr * (dZ.T @ H + l2 * params["output_weights"])
            params["output_bias"] = params["output_bias"] - lr * dZ.sum(axis=0)
            params["hidden_weights"] = params["hidden_weights"] - lr * (dA.T @ Xb + l2 * params["hidden_weights"])
            params["hidden_bias"] = params["hidden_bias"] - lr * dA.sum(axis=0)

        if val_index is not None:
            val_loss = _mlp_mean_loss(params, X[val_index], y[val_index])
            if val_loss < best_loss:
                best_loss, best_params, stale = val_loss, dict(params), 0
            else:
                stale += 1
                if stale >= config.patience:
                    logger.debug("Early stopping after %d epochs (validation loss %.4f)", epoch + 1, best_loss)
                    break

    return best_params if best_params is not None else params


_TRAINERS: Dict[Algorithm, Callable[[TrainerConfig, LabeledDataset, Optional[int]], Dict]] = {
    Algorithm.LOGISTIC_GD: _fit_logistic,
    Algorithm.GAUSSIAN_NB: _fit_gaussian_nb,
    Algorithm.PERCEPTRON_SGD: _fit_perceptron,
    Algorithm.LINEAR_SVC_SGD: _fit_linear_svc,
    Algorithm.MLP_SGD: _fit_mlp,
}


def train(config: TrainerConfig, data: LabeledDataset, seed: Optional[int] = None) -> DefenderModel:
    """
    Train a Defender model

    Deterministic trainers (LogisticGD, GaussianNB, KNN) fit the data in a canonical
    row order, so permuting `data` yields bit-identical parameters.

    Args:
        config (TrainerConfig): trainer configuration
        data (LabeledDataset): training data
        seed (int, optional): evaluator seed, used only where the trainer draws randomness. Defaults to None.

    Returns:
        DefenderModel: trained model

    """
    if len(data) == 0:
        raise ArgumentError("cannot train on an empty dataset")

    seed = config.effective_seed(seed)
    if seed is None and config.algorithm not in _SEED_FREE:
        raise ArgumentError(f"`{config.algorithm.value}` needs a seed")

    if config.algorithm == Algorithm.KNN:
        X, y = _canonical(data)
        return DefenderModel(
            config=config,
            num_classes=data.num_classes,
            dim=data.dim,
            seed=seed,
            memory=LabeledDataset(X, y, data.num_classes),
        )

    with np.errstate(over="ignore", invalid="ignore"):
        params = _TRAINERS[config.algorithm](config, data, seed)

    model = DefenderModel(config=config, num_classes=data.num_classes, dim=data.dim, params=params, seed=seed)
    if not np.all(np.isfinite(model.parameter_vector)):
        raise TrainingError(f"`{config.algorithm.value}` diverged to non-finite parameters")
    return model


def _as_matrix(model: DefenderModel, features: np.ndarray) -> Tuple[np.ndarray, bool]:
    X = np.asarray(features, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise ShapeMismatchError(f"expected features of dimension {model.dim}, got shape {np.shape(features)}")
    return X, single


def _logits(model: DefenderModel, X: np.ndarray) -> np.ndarray:
    if model.algorithm in _LINEAR:
        return X @ model.params["weights"].T + model.params.get("bias", 0.0)
    if model.algorithm == Algorithm.MLP_SGD:
        return _mlp_forward(model.params, X)[1]
    if model.algorithm == Algorithm.GAUSSIAN_NB:
        priors, means, variances = model.params["priors"], model.params["means"], model.params["variances"]
        with np.errstate(divide="ignore"):
            log_prior = np.log(priors)
        log_norm = -0.5 * np.log(2.0 * np.pi * variances).sum(axis=1)
        sq = ((X[:, None, :] - means[None, :, :]) ** 2 / variances[None, :, :]).sum(axis=2)
        return log_prior + log_norm - 0.5 * sq
    raise CapabilityError(f"`{model.algorithm.value}` has no logits")


def _knn_proba(model: DefenderModel, X: np.ndarray) -> np.ndarray:
    memory = model.memory
    k = min(model.config.k_neighbors, len(memory))
    distances = ((X[:, None, :] - memory.features[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argsort(distances, axis=1, kind="stable")[:, :k]
    votes = memory.labels[nearest]
    counts = np.stack([(votes == label).sum(axis=1) for label in range(model.num_classes)], axis=1)
    return counts / float(k)


def predict_proba(model: DefenderModel, features: np.ndarray) -> np.ndarray:
    """
    Class probabilities of one feature vector (returns shape (c,)) or of a matrix (returns (n, c))

    Args:
        model (DefenderModel): trained model
        features (np.ndarray): (k,) vector or (n, k) matrix

    Returns:
        np.ndarray: probabilities, each row summing to 1

    """
    X, single = _as_matrix(model, features)
    if model.algorithm == Algorithm.KNN:
        P = _knn_proba(model, X)
    else:
        P = softmax(_logits(model, X), axis=1)
    return P[0] if single else P


def predict(model: DefenderModel, features: np.ndarray) -> np.ndarray:
    return np.argmax(predict_proba(model, features), axis=-1)


def losses(model: DefenderModel, data: LabeledDataset, kind: LossKind) -> np.ndarray:
    """Vectorized `loss` over a dataset"""
    kind = LossKind(kind)
    if len(data) == 0:
        return np.zeros(0)
    P = predict_proba(model, data.features)
    if kind == LossKind.ZERO_ONE:
        return (np.argmax(P, axis=1) != data.labels).astype(np.float64)
    return np.clip(1.0 - P[np.arange(len(data)), data.labels], 0.0, 1.0)


def loss(model: DefenderModel, sample: Sample, kind: LossKind) -> float:
    """
    Bounded per-sample loss in [0, 1]

    Args:
        model (DefenderModel): trained model
        sample (Sample): labeled sample
        kind (LossKind): ZERO_ONE or BOUNDED_TRUE_CLASS (1 - probability of the true class)

    Returns:
        float: loss value

    """
    p = predict_proba(model, sample.features)
    if LossKind(kind) == LossKind.ZERO_ONE:
        return float(np.argmax(p) != sample.label)
    return float(min(max(1.0 - p[sample.label], 0.0), 1.0))


def _check_differentiable(model: DefenderModel):
    if not model.capabilities.differentiable:
        raise CapabilityError(f"`{model.algorithm.value}` is not differentiable")


def training_loss(model: DefenderModel, sample: Sample) -> float:
    """Per-sample value of the loss the trainer minimizes (cross-entropy, perceptron criterion or hinge)"""
    _check_differentiable(model)
    X, _ = _as_matrix(model, sample.features)
    z = _logits(model, X)[0]
    y = sample.label

    if model.algorithm in (Algorithm.LOGISTIC_GD, Algorithm.MLP_SGD):
        return float(-log_softmax(z)[y])
    if model.algorithm == Algorithm.PERCEPTRON_SGD:
        return float(z.max() - z[y])
    margins = 1.0 + z - z[y]
    margins[y] = 0.0
    return float(max(margins.max(), 0.0))


def _logit_gradient(model: DefenderModel, z: np.ndarray, y: int, kind: Optional[LossKind]) -> np.ndarray:
    c = model.num_classes
    if kind is not None:
        p = softmax(z)
        return -p[y] * (np.eye(c)[y] - p)
    if model.algorithm in (Algorithm.LOGISTIC_GD, Algorithm.MLP_SGD):
        return softmax(z) - np.eye(c)[y]

    dz = np.zeros(c)
    if model.algorithm == Algorithm.PERCEPTRON_SGD:
        j = int(np.argmax(z))
    else:
        margins = 1.0 + z - z[y]
        margins[y] = -np.inf
        j = int(np.argmax(margins))
        if margins[j] <= 0:
            return dz
    if j != y:
        dz[j] += 1.0
        dz[y] -= 1.0
    return dz


def gradient(model: DefenderModel, sample: Sample, kind: Optional[LossKind] = None) -> np.ndarray:
    """
    Gradient of a per-sample loss with respect to the flat parameter vector

    Args:
        model (DefenderModel): differentiable model
        sample (Sample): labeled sample
        kind (LossKind, optional): BOUNDED_TRUE_CLASS, or None for the trainer's own loss. Defaults to None.

    Returns:
        np.ndarray: gradient, laid out like `model.parameter_vector`

    """
    _check_differentiable(model)
    if kind is not None:
        kind = LossKind(kind)
        if kind == LossKind.ZERO_ONE:
            raise CapabilityError("the 0-1 loss has no gradient")

    X, _ = _as_matrix(model, sample.features)
    x = X[0]

    if model.algorithm == Algorithm.MLP_SGD:
        h, z = _mlp_forward(model.params, X)
        h, z = h[0], z[0]
        dz = _logit_gradient(model, z, sample.label, kind)
        da = (model.params["output_weights"].T @ dz) * (1.0 - h ** 2)
        grads = {
            "hidden_weights": np.outer(da, x),
            "hidden_bias": da,
            "output_weights": np.outer(dz, h),
            "output_bias": dz,
        }
    else:
        z = _logits(model, X)[0]
        dz = _logit_gradient(model, z, sample.label, kind)
        grads = {"weights": np.outer(dz, x), "bias": dz}

    return np.concatenate([grads[name].ravel() for name in model.params])


def param_distance(m1: DefenderModel, m2: DefenderModel) -> float:
    """
    L2 distance between the parameter vectors of two models of the same trainer

    Args:
        m1 (DefenderModel): first model
        m2 (DefenderModel): second model

    Returns:
        float: distance, 0 iff the parameters are identical

    """
    if m1.capabilities.example_based or m2.capabilities.example_based:
        raise CapabilityError("example-based models have no parameter vector, use `output_distance`")
    if m1.algorithm != m2.algorithm:
        raise ShapeMismatchError(f"cannot compare `{m1.algorithm.value}` with `{m2.algorithm.value}`")
    shapes1 = {name: value.shape for name, value in m1.params.items()}
    shapes2 = {name: value.shape for name, value in m2.params.items()}
    if shapes1 != shapes2:
        raise ShapeMismatchError(f"parameter shapes differ: {shapes1} vs {shapes2}")
    return float(np.linalg.norm(m1.parameter_vector - m2.parameter_vector))


def output_distance(m1: DefenderModel, m2: DefenderModel, probe: np.ndarray, method: str = "proba") -> float:
    """
    Distance between two models measured on their outputs over probe points

    Args:
        m1 (DefenderModel): first model
        m2 (DefenderModel): second model
        probe (np.ndarray): (n, k) probe features
        method (str, optional): `proba` (Frobenius distance of probabilities) or
            `predict` (number of disagreeing argmax predictions). Defaults to "proba".

    Returns:
        float: distance

    """
    if m1.num_classes != m2.num_classes or m1.dim != m2.dim:
        raise ShapeMismatchError("models disagree on classes or dimension")
    if len(probe) == 0:
        return 0.0
    if method == "proba":
        return float(np.linalg.norm(predict_proba(m1, probe) - predict_proba(m2, probe)))
    if method == "predict":
        return float(np.sum(predict(m1, probe) != predict(m2, probe)))
    raise ArgumentError(f"unknown output distance `{method}`")


def dumps_model(model: DefenderModel) -> str:
    """Serialize a model to a versioned, self-describing JSON blob"""
    blob = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "algorithm": model.algorithm.value,
        "num_classes": model.num_classes,
        "dim": model.dim,
        "seed": model.seed,
        "config": model.config.to_dict(),
        "params": {
            name: {"shape": list(value.shape), "values": value.ravel().tolist()}
            for name, value in model.params.items()
        },
    }
    if model.memory is not None:
        blob["memory"] = {
            "features": model.memory.features.tolist(),
            "labels": model.memory.labels.tolist(),
        }
    return json.dumps(blob)


def loads_model(blob: str) -> DefenderModel:
    """Inverse of `dumps_model`"""
    try:
        data = json.loads(blob)
    except json.JSONDecodeError as error:
        raise ParseError(f"model blob is not valid JSON ({error})", line=error.lineno) from error

    if data.get("format") != MODEL_FORMAT:
        raise ParseError(f"not a `{MODEL_FORMAT}` blob")
    if data.get("version") != MODEL_VERSION:
        raise ParseError(f"unsupported model blob version `{data.get('version')}`")

    config = TrainerConfig.from_dict(data["config"])
    params = {
        name: np.array(entry["values"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in data["params"].items()
    }
    memory = None
    if "memory" in data:
        memory = LabeledDataset(
            np.array(data["memory"]["features"], dtype=np.float64).reshape(-1, data["dim"]),
            np.array(data["memory"]["labels"], dtype=np.int64),
            data["num_classes"],
        )
    return DefenderModel(
        config=config,
        num_classes=data["num_classes"],
        dim=data["dim"],
        params=params,
        seed=data["seed"],
        memory=memory,
    )
