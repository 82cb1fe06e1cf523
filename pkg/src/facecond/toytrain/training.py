"""Two-stage training of the toy pipeline.

Stage "pretrain" trains only the landmark modules (projector gamma,
attention alpha) with everything else frozen; stage "finetune" trains
all four parameter groups at a lower learning rate. AdamW with a
half-period cosine learning-rate schedule, batch size 1, no warmup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Iterable, Sequence

import numpy as np

from ..frgca import FrgcaParams, frgca_backward, frgca_forward, init_frgca
from ..frlp import (
    FrlpParams,
    frlp_backward,
    frlp_forward,
    init_frlp,
    select_tokens,
)
from ..geometry import (
    PatchGrid,
    RegionPartition,
    clip_global_masks,
    clip_rpp_masks,
    default_partition,
)
from .decoder import (
    ToyDecoderParams,
    autoregressive_loss,
    decoder_backward,
    init_decoder,
    response_predictions,
    sequence_assemble,
)
from .projector import VisionProjectorParams, init_vision_projector, vision_backward, vision_project
from .synth import SynthSample

STAGES = ("pretrain", "finetune")
STAGE_DEFAULT_LR = {"pretrain": 1e-4, "finetune": 2e-5}

# parameter groups: gamma = FRLP, alpha = FRGCA, theta = vision projector,
# phi = decoder
GROUPS = ("gamma", "alpha", "theta", "phi")
_STAGE_TRAINABLE = {
    "pretrain": ("gamma", "alpha"),
    "finetune": ("gamma", "alpha", "theta", "phi"),
}


@dataclass
class TrainConfig:
    stage: str = "pretrain"
    learning_rate: float | None = None  # stage default when None
    epochs: int = 1
    schedule: str = "cosine"
    seed: int = 0
    frames: int = 1
    grid_rows: int = 4
    grid_cols: int = 4
    d: int = 16
    d_attn: int | None = None
    heads: int = 4
    d_raw: int = 8
    vocab: int = 16
    variant: str = "frgca"
    tokens: str = "both"
    max_context: int = 2048

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValueError(f"stage must be one of {STAGES}")
        if self.schedule != "cosine":
            raise ValueError("only the cosine schedule is supported")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.vocab < 2:
            raise ValueError("vocab must be >= 2")

    @property
    def resolved_lr(self) -> float:
        if self.learning_rate is not None:
            return float(self.learning_rate)
        return STAGE_DEFAULT_LR[self.stage]

    @property
    def n_patches(self) -> int:
        return self.grid_rows * self.grid_cols

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class ModelParams:
    frlp: FrlpParams
    frgca: FrgcaParams
    vision: VisionProjectorParams
    decoder: ToyDecoderParams
    partition: RegionPartition = field(default_factory=default_partition)
    grid: PatchGrid = field(default_factory=PatchGrid)


def init_model(config: TrainConfig) -> ModelParams:
    """Seed-deterministic initialization of all four parameter groups."""
    partition = default_partition()
    grid = PatchGrid(config.grid_rows, config.grid_cols)
    return ModelParams(
        frlp=init_frlp(config.d, partition, seed=config.seed),
        frgca=init_frgca(
            config.d, d_attn=config.d_attn, heads=config.heads, seed=config.seed + 1
        ),
        vision=init_vision_projector(config.d_raw, config.d, seed=config.seed + 2),
        decoder=init_decoder(config.vocab, config.d, seed=config.seed + 3),
        partition=partition,
        grid=grid,
    )


def model_arrays(model: ModelParams) -> dict[str, np.ndarray]:
    """Checkpoint-keyed views of every parameter array."""
    arrays: dict[str, np.ndarray] = {}
    for i, w in enumerate(model.frlp.local_weights):
        arrays[f"frlp.local.{i}.weight"] = w
        arrays[f"frlp.local.{i}.bias"] = model.frlp.local_biases[i]
    arrays["frlp.global.weight"] = model.frlp.global_weight
    arrays["frlp.global.bias"] = model.frlp.global_bias
    for name in ("w_q", "w_k", "w_v", "w_o"):
        arrays[f"frgca.{name}.weight"] = getattr(model.frgca, name)
        arrays[f"frgca.{name}.bias"] = getattr(model.frgca, "b_" + name[-1])
    arrays["vision.fc1.weight"] = model.vision.w1
    arrays["vision.fc1.bias"] = model.vision.b1
    arrays["vision.fc2.weight"] = model.vision.w2
    arrays["vision.fc2.bias"] = model.vision.b2
    arrays["decoder.embedding.weight"] = model.decoder.embedding
    arrays["decoder.readout.weight"] = model.decoder.readout_w
    arrays["decoder.readout.bias"] = model.decoder.readout_b
    return arrays


def parameter_group(key: str) -> str:
    prefix = key.split(".", 1)[0]
    return {"frlp": "gamma", "frgca": "alpha", "vision": "theta", "decoder": "phi"}[prefix]


def trainable_keys(model: ModelParams, stage: str) -> list[str]:
    groups = _STAGE_TRAINABLE[stage]
    return [k for k in model_arrays(model) if parameter_group(k) in groups]


def _masks_for(sample: SynthSample, model: ModelParams, config: TrainConfig):
    if config.variant != "frgca":
        return None
    if config.tokens == "global_only":
        return clip_global_masks(sample.clip, model.grid)
    return clip_rpp_masks(sample.clip, model.partition, model.grid)


def forward_loss(
    model: ModelParams,
    sample: SynthSample,
    config: TrainConfig,
    return_state: bool = False,
):
    """Full pipeline loss for one sample; optionally keep caches for backward."""
    h_v, vision_cache = vision_project(sample.raw, model.vision, return_cache=True)
    tokens = frlp_forward(sample.clip, model.partition, model.frlp)
    h_l = select_tokens(tokens, config.tokens)
    masks = _masks_for(sample, model, config)
    enriched, attn_cache = frgca_forward(
        h_v, h_l, masks, model.frgca, variant=config.variant, return_cache=True
    )
    sequence = sequence_assemble(
        enriched,
        sample.instruction_ids,
        sample.response_ids,
        model.decoder,
        max_context=config.max_context,
    )
    loss, decoder_cache = autoregressive_loss(
        sequence, sample.response_ids, model.decoder, return_cache=True
    )
    if return_state:
        return loss, (vision_cache, attn_cache, decoder_cache)
    return loss


def backward_pass(
    model: ModelParams, sample: SynthSample, config: TrainConfig, state
) -> dict[str, np.ndarray]:
    """Gradients for every parameter array, keyed like model_arrays."""
    vision_cache, attn_cache, decoder_cache = state
    dec = decoder_backward(decoder_cache)
    att = frgca_backward(dec.d_visual, attn_cache)
    vis = vision_backward(att.d_h_v, vision_cache)

    grads: dict[str, np.ndarray] = {}
    if config.variant == "none":
        for i, w in enumerate(model.frlp.local_weights):
            grads[f"frlp.local.{i}.weight"] = np.zeros_like(w)
            grads[f"frlp.local.{i}.bias"] = np.zeros_like(model.frlp.local_biases[i])
        grads["frlp.global.weight"] = np.zeros_like(model.frlp.global_weight)
        grads["frlp.global.bias"] = np.zeros_like(model.frlp.global_bias)
    else:
        frl = frlp_backward(
            att.d_h_l, sample.clip, model.partition, model.frlp, mode=config.tokens
        )
        for i in range(len(model.frlp.local_weights)):
            grads[f"frlp.local.{i}.weight"] = frl.local_weights[i]
            grads[f"frlp.local.{i}.bias"] = frl.local_biases[i]
        grads["frlp.global.weight"] = frl.global_weight
        grads["frlp.global.bias"] = frl.global_bias

    for name in ("w_q", "w_k", "w_v", "w_o"):
        grads[f"frgca.{name}.weight"] = getattr(att, "d_" + name)
        grads[f"frgca.{name}.bias"] = getattr(att, "d_b_" + name[-1])
    grads["vision.fc1.weight"] = vis.d_w1
    grads["vision.fc1.bias"] = vis.d_b1
    grads["vision.fc2.weight"] = vis.d_w2
    grads["vision.fc2.bias"] = vis.d_b2
    grads["decoder.embedding.weight"] = dec.d_embedding
    grads["decoder.readout.weight"] = dec.d_readout_w
    grads["decoder.readout.bias"] = dec.d_readout_b
    return grads


def cosine_lr(base: float, step: int, total_steps: int) -> float:
    """Half-period cosine from base at step 0 to 0 at the final step."""
    if total_steps <= 1:
        return base
    return base * 0.5 * (1.0 + math.cos(math.pi * step / (total_steps - 1)))


class AdamW:
    """AdamW with bias correction; weight decay defaults to 0."""

    def __init__(
        self,
        keys: Iterable[str],
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ) -> None:
        self.keys = list(keys)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(
        self,
        arrays: dict[str, np.ndarray],
        grads: dict[str, np.ndarray],
        lr: float,
    ) -> None:
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for key in self.keys:
            g = grads[key]
            if key not in self._m:
                self._m[key] = np.zeros_like(g)
                self._v[key] = np.zeros_like(g)
            m = self._m[key]
            v = self._v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * arrays[key]
            arrays[key] -= lr * update


@dataclass
class TrainResult:
    model: ModelParams
    trace: list[tuple[int, float, float]]  # (step, lr, loss)


def train(
    config: TrainConfig,
    dataset: Sequence[SynthSample],
    model: ModelParams | None = None,
) -> TrainResult:
    """Run the configured stage over the dataset; frozen groups are never
    touched. Aborts with a diagnostic if the loss goes non-finite."""
    if model is None:
        model = init_model(config)
    arrays = model_arrays(model)
    keys = trainable_keys(model, config.stage)
    optimizer = AdamW(keys)
    base_lr = config.resolved_lr
    total_steps = config.epochs * len(dataset)
    order_rng = np.random.default_rng(config.seed)

    trace: list[tuple[int, float, float]] = []
    step = 0
    for _ in range(config.epochs):
        order = order_rng.permutation(len(dataset))
        for idx in order:
            sample = dataset[int(idx)]
            lr = cosine_lr(base_lr, step, total_steps)
            loss, state = forward_loss(model, sample, config, return_state=True)
            if not math.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss {loss!r} at step {step} (sample {idx})"
                )
            grads = backward_pass(model, sample, config, state)
            optimizer.step(arrays, grads, lr)
            trace.append((step, lr, loss))
            step += 1
    return TrainResult(model=model, trace=trace)


def evaluate(
    model: ModelParams, dataset: Sequence[SynthSample], config: TrainConfig
) -> tuple[float, float]:
    """Mean loss and response-token accuracy over a dataset."""
    if not dataset:
        raise ValueError("empty evaluation set")
    losses = []
    correct = 0
    total = 0
    for sample in dataset:
        loss, (_, _, decoder_cache) = forward_loss(model, sample, config, return_state=True)
        losses.append(loss)
        preds = response_predictions(decoder_cache)
        for pred, target in zip(preds, sample.response_ids):
            correct += int(pred == target)
            total += 1
    return float(np.mean(losses)), correct / total


def ablation_experiment(
    variants: Sequence[str],
    seeds: Sequence[int],
    train_size: int,
    eval_size: int,
    config: TrainConfig | None = None,
    task_kind: str = "region",
) -> dict[str, dict[str, float]]:
    """Train each attention variant across seeds on the synthetic task and
    report mean final evaluation loss and accuracy."""
    from .synth import synth_dataset

    base = config or TrainConfig(stage="finetune", learning_rate=3e-3)
    results: dict[str, dict[str, float]] = {}
    for variant in variants:
        losses, accuracies = [], []
        for seed in seeds:
            cfg = TrainConfig(
                **{**base.to_dict(), "variant": variant, "seed": int(seed)}
            )
            train_set = synth_dataset(
                seed=seed,
                size=train_size,
                task_kind=task_kind,
                frames=cfg.frames,
                n_patches=cfg.n_patches,
                d_raw=cfg.d_raw,
                vocab=cfg.vocab,
            )
            eval_set = synth_dataset(
                seed=seed + 10_000,
                size=eval_size,
                task_kind=task_kind,
                frames=cfg.frames,
                n_patches=cfg.n_patches,
                d_raw=cfg.d_raw,
                vocab=cfg.vocab,
            )
            result = train(cfg, train_set)
            loss, accuracy = evaluate(result.model, eval_set, cfg)
            losses.append(loss)
            accuracies.append(accuracy)
        results[variant] = {
            "mean_eval_loss": float(np.mean(losses)),
            "mean_eval_accuracy": float(np.mean(accuracies)),
            "per_seed_loss": [float(x) for x in losses],
            "per_seed_accuracy": [float(x) for x in accuracies],
        }
    return results
