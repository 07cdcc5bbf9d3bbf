"""The small CNN, its SGD training loop, and the multi-seed experiment grid.

Architecture (one conv layer, LeNet-style head): 5x5 conv with 64 kernels
and same-padding on 32x32 inputs, max-pool 2/2, ReLU, max-pool 4/4, then a
fully connected 1024 - 64 - 10 head.  The two pools reconcile the stated
layer list with the 1024-wide head input: 32x32x64 -> 16x16x64 -> 4x4x64.

In every non-baseline arm the conv bank is sampled once and frozen;
gradients reach only the head.  Training is deterministic in
(model, data, config).
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import LabeledDataset, SubsampleSpec, compute_norm_stats, normalize, subsample_per_class
from .numerics import (
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    derive_seed,
    make_rng,
    maxpool_backward,
    maxpool_forward,
    relu,
    relu_backward,
    softmax_cross_entropy_batch,
)
from .sampling import (
    CENTER_SURROUND,
    LOGNORMAL,
    NORMAL,
    KernelBank,
    SynapseDistribution,
    generate_kernel_bank,
    rescale_to_unit_fanin,
)

__all__ = [
    "FULLY_TRAINED",
    "DEFAULT_ARMS",
    "Model",
    "TrainConfig",
    "TrainHistory",
    "ExperimentResult",
    "default_distribution",
    "config_for_arm",
    "build_model",
    "forward",
    "loss_and_gradients",
    "train",
    "predict",
    "evaluate",
    "single_run",
    "run_experiment",
]

FULLY_TRAINED = "fully-trained"
DEFAULT_ARMS = (NORMAL, LOGNORMAL, CENTER_SURROUND, FULLY_TRAINED)

NUM_KERNELS = 64
FIELD_SIZE = 5
CONV_PAD = 2
POOL1 = (2, 2)  # size, stride
POOL2 = (4, 4)
FLAT_DIM = 1024  # 64 channels x 4 x 4 for 32x32 inputs
HIDDEN_DIM = 64
NUM_CLASSES = 10

_EVAL_CHUNK = 256


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 60
    seed: int = 0
    freeze_conv: bool = True
    fc_init: str = "glorot"  # "glorot" | "same_as_conv"
    distribution: SynapseDistribution | None = None  # None: fully-trained baseline
    scale_to_unit_fanin: bool = False

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.fc_init not in ("glorot", "same_as_conv"):
            raise ValueError(f"fc_init must be glorot or same_as_conv, got {self.fc_init!r}")


@dataclass
class Model:
    conv: KernelBank
    conv_biases: np.ndarray  # [K]; zero and never trained in any arm
    fc1_weights: np.ndarray  # [64, 1024]
    fc1_bias: np.ndarray
    fc2_weights: np.ndarray  # [10, 64]
    fc2_bias: np.ndarray

    def copy(self) -> "Model":
        return Model(
            conv=replace(self.conv, weights=self.conv.weights.copy()),
            conv_biases=self.conv_biases.copy(),
            fc1_weights=self.fc1_weights.copy(),
            fc1_bias=self.fc1_bias.copy(),
            fc2_weights=self.fc2_weights.copy(),
            fc2_bias=self.fc2_bias.copy(),
        )


@dataclass
class TrainHistory:
    loss: list = field(default_factory=list)            # per-epoch mean sample loss
    train_accuracy: list = field(default_factory=list)  # per-epoch, post-update


@dataclass
class ExperimentResult:
    """Accuracies of one (dataset, arm) cell across seeded runs."""

    dataset: str
    arm: str
    seeds: list
    per_seed_accuracy: list  # fractions in [0, 1]
    n_test: int = 0
    error: str | None = None
    duration_s: float = 0.0

    @property
    def failed(self) -> bool:
        return self.error is not None

    @property
    def mean_pct(self) -> float:
        if not self.per_seed_accuracy:
            return float("nan")
        return float(np.mean(self.per_seed_accuracy) * 100.0)

    @property
    def std_pct(self) -> float:
        # population std (divisor N) over the per-seed accuracies
        if not self.per_seed_accuracy:
            return float("nan")
        return float(np.std(self.per_seed_accuracy) * 100.0)


def default_distribution(arm: str) -> SynapseDistribution | None:
    if arm == NORMAL:
        return SynapseDistribution.normal()
    if arm == LOGNORMAL:
        return SynapseDistribution.lognormal()
    if arm == CENTER_SURROUND:
        return SynapseDistribution.center_surround()
    if arm == FULLY_TRAINED:
        return None
    raise ValueError(f"unknown arm {arm!r}")


def config_for_arm(
    base: TrainConfig,
    arm: str,
    seed: int,
    distributions: dict | None = None,
) -> TrainConfig:
    """Specialize a base config for one experiment arm and run seed."""
    if arm == FULLY_TRAINED:
        dist = None
    elif distributions and arm in distributions:
        dist = distributions[arm]
    else:
        dist = default_distribution(arm)
    return replace(base, seed=seed, distribution=dist, freeze_conv=arm != FULLY_TRAINED)


def _glorot_uniform(rng, shape, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def build_model(
    config: TrainConfig,
    c_in: int,
    rng: np.random.Generator,
    num_kernels: int = NUM_KERNELS,
    hidden_dim: int = HIDDEN_DIM,
    num_classes: int = NUM_CLASSES,
) -> Model:
    """Assemble a model for one arm; deterministic in (config, c_in, rng state).

    The size keywords exist for shrunken test models (for example a 4-kernel
    net for gradient checks); defaults give the standard 64-kernel,
    1024-64-10 network.
    """
    if c_in not in (1, 3):
        raise ValueError(f"c_in must be 1 or 3, got {c_in}")
    flat_dim = num_kernels * 16  # channels x 4 x 4 after both pools on 32x32
    conv_fan_in = c_in * FIELD_SIZE * FIELD_SIZE
    conv_fan_out = num_kernels * FIELD_SIZE * FIELD_SIZE
    bank_seed = int(rng.integers(0, 2**63))
    if config.distribution is None:
        weights = _glorot_uniform(
            make_rng(bank_seed), (num_kernels, c_in, FIELD_SIZE, FIELD_SIZE),
            conv_fan_in, conv_fan_out,
        )
        bank = KernelBank(weights, None, seed=bank_seed, frozen=config.freeze_conv)
    else:
        bank = generate_kernel_bank(config.distribution, num_kernels, c_in, seed=bank_seed)
        bank = replace(bank, frozen=config.freeze_conv)
        if config.scale_to_unit_fanin:
            bank = rescale_to_unit_fanin(bank, fan_in=conv_fan_in)

    if config.fc_init == "same_as_conv" and config.distribution is not None:
        fc_rng = rng
        dist = config.distribution
        if dist.variant == NORMAL:
            fc1 = fc_rng.standard_normal((hidden_dim, flat_dim))
            fc2 = fc_rng.standard_normal((num_classes, hidden_dim))
        elif dist.variant == LOGNORMAL:
            fc1 = np.exp(dist.mu + np.sqrt(dist.sigma2) * fc_rng.standard_normal((hidden_dim, flat_dim)))
            fc2 = np.exp(dist.mu + np.sqrt(dist.sigma2) * fc_rng.standard_normal((num_classes, hidden_dim)))
        else:
            # flattened FC weights have no receptive-field geometry; use the
            # marginal N(0, K(0) + jitter) of the center-surround model
            marginal = np.sqrt(dist.second_moment())
            fc1 = marginal * fc_rng.standard_normal((hidden_dim, flat_dim))
            fc2 = marginal * fc_rng.standard_normal((num_classes, hidden_dim))
    else:
        fc1 = _glorot_uniform(rng, (hidden_dim, flat_dim), flat_dim, hidden_dim)
        fc2 = _glorot_uniform(rng, (num_classes, hidden_dim), hidden_dim, num_classes)

    return Model(
        conv=bank,
        conv_biases=np.zeros(num_kernels),
        fc1_weights=fc1,
        fc1_bias=np.zeros(hidden_dim),
        fc2_weights=fc2,
        fc2_bias=np.zeros(num_classes),
    )


def _conv_features(model: Model, images: np.ndarray) -> np.ndarray:
    """Frozen path: conv -> pool 2/2 -> ReLU -> pool 4/4 -> flatten.

    The flattened width must match the head (1024 for the standard model on
    32x32 inputs).
    """
    conv_out = conv2d_forward(images, model.conv.weights, model.conv_biases, CONV_PAD)
    pool1, _ = maxpool_forward(conv_out, *POOL1)
    act = relu(pool1)
    pool2, _ = maxpool_forward(act, *POOL2)
    n = images.shape[0]
    flat = pool2.reshape(n, -1)
    expected = model.fc1_weights.shape[1]
    if flat.shape[1] != expected:
        raise ValueError(
            f"conv path produced {flat.shape[1]} features, head expects {expected}; "
            f"input shape {images.shape}"
        )
    return flat


def _features_chunked(model: Model, images: np.ndarray, chunk: int = _EVAL_CHUNK) -> np.ndarray:
    parts = [
        _conv_features(model, images[i : i + chunk]) for i in range(0, images.shape[0], chunk)
    ]
    return np.concatenate(parts) if len(parts) > 1 else parts[0]


def _head_logits(model: Model, feats: np.ndarray):
    fc1_out = dense_forward(feats, model.fc1_weights, model.fc1_bias)
    fc1_act = relu(fc1_out)
    logits = dense_forward(fc1_act, model.fc2_weights, model.fc2_bias)
    return logits, fc1_out, fc1_act


def forward(model: Model, images) -> np.ndarray:
    """Raw logits for one [C,32,32] image or an [N,C,32,32] batch."""
    images = np.asarray(images, dtype=np.float64)
    single = images.ndim == 3
    if single:
        images = images[None]
    feats = _conv_features(model, images)
    logits, _, _ = _head_logits(model, feats)
    return logits[0] if single else logits


def predict(model: Model, images) -> np.ndarray:
    """Predicted class per image; argmax ties break to the lowest index."""
    images = np.asarray(images, dtype=np.float64)
    out = []
    for i in range(0, images.shape[0], _EVAL_CHUNK):
        feats = _conv_features(model, images[i : i + _EVAL_CHUNK])
        logits, _, _ = _head_logits(model, feats)
        out.append(np.argmax(logits, axis=1))
    return np.concatenate(out)


def evaluate(model: Model, testset: LabeledDataset) -> float:
    """Fraction of the full test split predicted correctly."""
    preds = predict(model, testset.images)
    return float((preds == testset.labels).mean())


def loss_and_gradients(model: Model, images: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over a batch and its gradients for every layer.

    Returns ``(mean_loss, grads)`` where ``grads`` maps ``conv_weights``,
    ``fc1_weights``, ``fc1_bias``, ``fc2_weights``, ``fc2_bias`` to arrays
    shaped like the parameters.  Computes the full backward pass; callers
    that freeze the conv bank simply ignore ``conv_weights``.
    """
    images = np.asarray(images, dtype=np.float64)
    batch_n = images.shape[0]
    conv_out = conv2d_forward(images, model.conv.weights, model.conv_biases, CONV_PAD)
    pool1, idx1 = maxpool_forward(conv_out, *POOL1)
    act1 = relu(pool1)
    pool2, idx2 = maxpool_forward(act1, *POOL2)
    feats = pool2.reshape(batch_n, -1)
    logits, fc1_out, fc1_act = _head_logits(model, feats)
    losses, grad_logits = softmax_cross_entropy_batch(logits, labels)
    grad_logits /= batch_n  # gradient of the batch-mean loss

    gw2, gb2, g_act = dense_backward(fc1_act, model.fc2_weights, grad_logits)
    g_fc1 = relu_backward(fc1_out, g_act)
    gw1, gb1, g_feats = dense_backward(feats, model.fc1_weights, g_fc1)
    g_pool2 = g_feats.reshape(pool2.shape)
    g_act1 = maxpool_backward(idx2, g_pool2, pool1.shape[-2:])
    g_pool1 = relu_backward(pool1, g_act1)
    g_conv = maxpool_backward(idx1, g_pool1, conv_out.shape[-2:])
    g_kernels, _, _ = conv2d_backward(images, model.conv.weights, g_conv, CONV_PAD)

    grads = {
        "conv_weights": g_kernels,
        "fc1_weights": gw1,
        "fc1_bias": gb1,
        "fc2_weights": gw2,
        "fc2_bias": gb2,
    }
    return float(losses.sum()) / batch_n, grads


def train(model: Model, trainset: LabeledDataset, config: TrainConfig):
    """Mini-batch SGD with momentum on softmax cross-entropy.

    Returns ``(trained_model, history)``; the input model is left
    untouched.  Gradients always reach the fully connected head; they reach
    the conv kernels only when ``config.freeze_conv`` is false (conv biases
    stay zero in every arm).  When the conv bank is frozen its features are
    computed once up front, which is mathematically identical to running
    the full stack per batch.
    """
    images, labels = trainset.images, trainset.labels
    n = len(trainset)
    out = model.copy()
    rng = make_rng(derive_seed(config.seed, "shuffle"))
    history = TrainHistory()

    frozen = config.freeze_conv
    if frozen:
        feats_all = _features_chunked(out, images)

    params = [out.fc1_weights, out.fc1_bias, out.fc2_weights, out.fc2_bias]
    if not frozen:
        params.append(out.conv.weights)
    velocity = [np.zeros_like(p) for p in params]

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            batch_n = idx.size
            if frozen:
                feats = feats_all[idx]
                logits, fc1_out, fc1_act = _head_logits(out, feats)
                losses, grad_logits = softmax_cross_entropy_batch(logits, labels[idx])
                mean_loss = float(losses.sum()) / batch_n
                grad_logits /= batch_n  # gradient of the batch-mean loss
                gw2, gb2, g_act = dense_backward(fc1_act, out.fc2_weights, grad_logits)
                g_fc1 = relu_backward(fc1_out, g_act)
                gw1, gb1, _ = dense_backward(feats, out.fc1_weights, g_fc1)
                grads = [gw1, gb1, gw2, gb2]
            else:
                mean_loss, grad_map = loss_and_gradients(out, images[idx], labels[idx])
                grads = [
                    grad_map["fc1_weights"],
                    grad_map["fc1_bias"],
                    grad_map["fc2_weights"],
                    grad_map["fc2_bias"],
                    grad_map["conv_weights"],
                ]
            if not np.isfinite(mean_loss):
                raise RuntimeError(
                    f"non-finite training loss at epoch {epoch}, batch {start // config.batch_size}"
                )
            loss_sum += mean_loss * batch_n

            for p, g, v in zip(params, grads, velocity):
                v *= config.momentum
                v += g
                p -= config.learning_rate * v

        history.loss.append(loss_sum / n)
        if frozen:
            epoch_logits, _, _ = _head_logits(out, feats_all)
            epoch_preds = np.argmax(epoch_logits, axis=1)
        else:
            epoch_preds = predict(out, images)
        history.train_accuracy.append(float((epoch_preds == labels).mean()))

    return out, history


def single_run(
    train_raw: LabeledDataset,
    test_raw: LabeledDataset,
    arm: str,
    seed: int,
    per_class: int = 38,
    base_config: TrainConfig | None = None,
    distributions: dict | None = None,
) -> float:
    """One complete seeded run of an arm; the unit the experiment grid repeats.

    Resamples the per-class training subset, normalizes both splits with the
    subset's statistics, builds and trains a model for the arm, and returns
    the full-test-split accuracy.  Deterministic in every argument, so a run
    is exactly reproducible from its recorded seed.
    """
    base_config = base_config or TrainConfig()
    c_in = train_raw.images.shape[1]
    subset = subsample_per_class(
        train_raw, SubsampleSpec(per_class=per_class, seed=derive_seed(seed, "subset"))
    )
    stats = compute_norm_stats(subset)
    train_norm = normalize(subset, stats)
    test_norm = normalize(test_raw, stats)
    config = config_for_arm(base_config, arm, seed, distributions)
    model = build_model(config, c_in, make_rng(derive_seed(seed, "model")))
    trained, _ = train(model, train_norm, config)
    return evaluate(trained, test_norm)


def _run_cell(
    name: str,
    pair,
    arm: str,
    n_runs: int,
    base_seed: int,
    per_class: int,
    base_config: TrainConfig,
    distributions,
) -> ExperimentResult:
    train_raw, test_raw = pair
    started = time.perf_counter()
    seeds, accs = [], []
    for r in range(n_runs):
        seed_r = derive_seed(base_seed, name, arm, r)
        seeds.append(seed_r)
        accs.append(
            single_run(train_raw, test_raw, arm, seed_r, per_class, base_config, distributions)
        )
    return ExperimentResult(
        dataset=name, arm=arm, seeds=seeds, per_seed_accuracy=accs,
        n_test=len(test_raw), duration_s=time.perf_counter() - started,
    )


def run_experiment(
    datasets: dict,
    arms=DEFAULT_ARMS,
    n_runs: int = 3,
    base_seed: int = 0,
    per_class: int = 38,
    base_config: TrainConfig | None = None,
    distributions: dict | None = None,
    jobs: int = 1,
) -> list:
    """Run the (dataset x arm) grid, ``n_runs`` seeded runs per cell.

    ``datasets`` maps name -> (train, test) of raw 32x32 datasets.  Each run
    derives its seed from (base_seed, dataset, arm, run), resamples the
    per-class subset, normalizes with the subset's statistics, trains, and
    evaluates on the full test split.  A failing run marks its cell failed
    without aborting the rest of the grid; cells may execute concurrently
    (``jobs``) because every run owns its seed, model, and subset.
    """
    base_config = base_config or TrainConfig()
    cells = [(name, arm) for name in datasets for arm in arms]

    def guarded(name, arm):
        started = time.perf_counter()
        try:
            return _run_cell(
                name, datasets[name], arm, n_runs, base_seed, per_class,
                base_config, distributions,
            )
        except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
            return ExperimentResult(
                dataset=name, arm=arm, seeds=[], per_seed_accuracy=[],
                error=f"{type(exc).__name__}: {exc}",
                duration_s=time.perf_counter() - started,
            )

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {cell: pool.submit(guarded, *cell) for cell in cells}
            return [futures[cell].result() for cell in cells]
    return [guarded(*cell) for cell in cells]
