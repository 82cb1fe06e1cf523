"""Central finite-difference verification of the hand-written backward passes.

Every trainable array is perturbed element by element and the resulting
difference quotient is compared against the analytic gradient. The
relative-error floor keeps near-zero gradient pairs from being flagged by
finite-difference noise.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

DEFAULT_STEP = 1e-5
# Error denominator floor: gradients in the suites are O(1e-3..1), while
# central-difference roundoff on a true-zero gradient is O(1e-10); the
# floor keeps that noise from registering as relative error.
REL_ERR_FLOOR = 1e-5

MODULE_TOLERANCE = 1e-4
PIPELINE_TOLERANCE = 1e-3


def finite_difference_gradient(
    loss_fn: Callable[[], float], array: np.ndarray, step: float = DEFAULT_STEP
) -> np.ndarray:
    """Central differences of loss_fn with respect to every element of array.

    The array is mutated in place during probing and restored afterwards;
    loss_fn must read the live array.
    """
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    grad_flat = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        plus = loss_fn()
        flat[i] = original - step
        minus = loss_fn()
        flat[i] = original
        grad_flat[i] = (plus - minus) / (2.0 * step)
    return grad


def max_relative_error(
    analytic: np.ndarray, numeric: np.ndarray, floor: float = REL_ERR_FLOOR
) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def check_named_gradients(
    loss_fn: Callable[[], float],
    arrays: Mapping[str, np.ndarray],
    analytic: Mapping[str, np.ndarray],
    step: float = DEFAULT_STEP,
) -> dict[str, float]:
    """Max relative error per named array between analytic and FD gradients."""
    errors: dict[str, float] = {}
    for name, arr in arrays.items():
        numeric = finite_difference_gradient(loss_fn, arr, step=step)
        errors[name] = max_relative_error(analytic[name], numeric)
    return errors


# ---------------------------------------------------------------------------
# per-module suites driven by the gradcheck CLI subcommand


def frlp_suite(seed: int = 0) -> float:
    """FRLP parameter gradients vs finite differences; returns max rel error."""
    from .frlp import frlp_backward, frlp_forward, init_frlp, select_tokens
    from .geometry import default_partition, frames_from_array

    rng = np.random.default_rng(seed)
    partition = default_partition()
    params = init_frlp(8, partition, seed=seed)
    clip = frames_from_array(rng.uniform(0.0, 1.0, size=(2, 68, 2)))
    weights = rng.normal(size=(2, 9, 8))

    def loss() -> float:
        tokens = frlp_forward(clip, partition, params)
        return float((select_tokens(tokens, "both") * weights).sum())

    grads = frlp_backward(weights, clip, partition, params, mode="both")
    arrays = {"frlp.global.weight": params.global_weight, "frlp.global.bias": params.global_bias}
    analytic = {"frlp.global.weight": grads.global_weight, "frlp.global.bias": grads.global_bias}
    for i in range(9):
        arrays[f"frlp.local.{i}.weight"] = params.local_weights[i]
        arrays[f"frlp.local.{i}.bias"] = params.local_biases[i]
        analytic[f"frlp.local.{i}.weight"] = grads.local_weights[i]
        analytic[f"frlp.local.{i}.bias"] = grads.local_biases[i]
    return max(check_named_gradients(loss, arrays, analytic).values())


def frgca_suite(seed: int = 0) -> float:
    """FRGCA parameter and input gradients vs finite differences."""
    from .frgca import frgca_backward, frgca_forward, init_frgca

    rng = np.random.default_rng(seed)
    params = init_frgca(8, heads=2, seed=seed)
    h_v = rng.normal(size=(2, 8, 8))
    h_l = rng.normal(size=(2, 9, 8))
    mask = -np.abs(rng.normal(size=(2, 8, 9)))
    weights = rng.normal(size=h_v.shape)

    def loss() -> float:
        return float((frgca_forward(h_v, h_l, mask, params) * weights).sum())

    _, cache = frgca_forward(h_v, h_l, mask, params, return_cache=True)
    grads = frgca_backward(weights, cache)
    arrays = {
        "frgca.w_q.weight": params.w_q,
        "frgca.w_q.bias": params.b_q,
        "frgca.w_k.weight": params.w_k,
        "frgca.w_k.bias": params.b_k,
        "frgca.w_v.weight": params.w_v,
        "frgca.w_v.bias": params.b_v,
        "frgca.w_o.weight": params.w_o,
        "frgca.w_o.bias": params.b_o,
        "h_v": h_v,
        "h_l": h_l,
    }
    analytic = {
        "frgca.w_q.weight": grads.d_w_q,
        "frgca.w_q.bias": grads.d_b_q,
        "frgca.w_k.weight": grads.d_w_k,
        "frgca.w_k.bias": grads.d_b_k,
        "frgca.w_v.weight": grads.d_w_v,
        "frgca.w_v.bias": grads.d_b_v,
        "frgca.w_o.weight": grads.d_w_o,
        "frgca.w_o.bias": grads.d_b_o,
        "h_v": grads.d_h_v,
        "h_l": grads.d_h_l,
    }
    return max(check_named_gradients(loss, arrays, analytic).values())


def vision_suite(seed: int = 0) -> float:
    """Vision projector gradients vs finite differences."""
    from .toytrain.projector import init_vision_projector, vision_backward, vision_project

    rng = np.random.default_rng(seed)
    params = init_vision_projector(6, 8, seed=seed)
    raw = rng.normal(size=(2, 8, 6))
    weights = rng.normal(size=(2, 8, 8))

    def loss() -> float:
        return float((vision_project(raw, params) * weights).sum())

    _, cache = vision_project(raw, params, return_cache=True)
    grads = vision_backward(weights, cache)
    arrays = {
        "vision.fc1.weight": params.w1,
        "vision.fc1.bias": params.b1,
        "vision.fc2.weight": params.w2,
        "vision.fc2.bias": params.b2,
        "raw": raw,
    }
    analytic = {
        "vision.fc1.weight": grads.d_w1,
        "vision.fc1.bias": grads.d_b1,
        "vision.fc2.weight": grads.d_w2,
        "vision.fc2.bias": grads.d_b2,
        "raw": grads.d_raw,
    }
    return max(check_named_gradients(loss, arrays, analytic).values())


def pipeline_suite(seed: int = 0) -> float:
    """End-to-end pipeline gradients (all four groups) vs finite differences."""
    from .geometry import frames_from_array
    from .toytrain.synth import SynthSample
    from .toytrain.training import (
        TrainConfig,
        backward_pass,
        forward_loss,
        init_model,
        model_arrays,
    )

    rng = np.random.default_rng(seed)
    config = TrainConfig(
        stage="finetune",
        frames=1,
        grid_rows=2,
        grid_cols=2,
        d=4,
        d_attn=4,
        heads=2,
        d_raw=3,
        vocab=5,
        variant="frgca",
        tokens="both",
        seed=seed,
    )
    model = init_model(config)
    sample = SynthSample(
        raw=rng.normal(size=(1, 4, 3)),
        clip=frames_from_array(rng.uniform(0.1, 0.9, size=(1, 68, 2))),
        instruction_ids=(3, 4),
        response_ids=(1, 2),
        label=1,
    )

    def loss() -> float:
        return forward_loss(model, sample, config)

    value, state = forward_loss(model, sample, config, return_state=True)
    assert np.isfinite(value)
    grads = backward_pass(model, sample, config, state)
    arrays = model_arrays(model)
    return max(check_named_gradients(loss, arrays, grads).values())


def run_full_suite(seed: int = 0) -> dict:
    """All gradient suites with their tolerances; used by the CLI."""
    results = {
        "frlp": {"max_rel_error": frlp_suite(seed), "tolerance": MODULE_TOLERANCE},
        "frgca": {"max_rel_error": frgca_suite(seed), "tolerance": MODULE_TOLERANCE},
        "vision": {"max_rel_error": vision_suite(seed), "tolerance": MODULE_TOLERANCE},
        "pipeline": {"max_rel_error": pipeline_suite(seed), "tolerance": PIPELINE_TOLERANCE},
    }
    passed = all(r["max_rel_error"] < r["tolerance"] for r in results.values())
    return {"seed": seed, "checks": results, "passed": passed}
