"""Reverse-mode gradients for the YCDa block, finite-difference checking and
a small momentum trainer for the synthetic salient/camouflaged task.

Each differentiable stage has its own ``*_backward`` function; :func:`backward`
walks a recorded :class:`~ycda.trace.Tape` in reverse and dispatches to them.
Leading batch axes are allowed everywhere; parameter gradients are summed
over them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .colorspace import ColorTransform, apply_color_matrix
from .ica import ChannelStats, IcaParams, descriptor
from .model import YcdaBlock, init_block
from .stem import DWConvParams, StemConfig, pixel_shuffle
from .tensor import as_tensor, sigmoid
from .trace import Tape


class MissingTraceError(RuntimeError):
    """backward() was called without a recorded forward pass."""


def _sum_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``sum over leading axes of a[..., i] * b[..., j]``."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def _sum_lead(g: np.ndarray, ndim: int) -> np.ndarray:
    return g.reshape(-1, *g.shape[g.ndim - ndim:]).sum(axis=0)


# -- per-stage backward passes ----------------------------------------------


def color_backward(g: np.ndarray, transform: ColorTransform) -> np.ndarray:
    return apply_color_matrix(g, transform.matrix.T)


def unshuffle_backward(g: np.ndarray, r: int) -> np.ndarray:
    # unshuffle is a permutation; its adjoint is the inverse permutation
    return pixel_shuffle(g, r)


def dwconv_backward(g: np.ndarray, u: np.ndarray, p: DWConvParams):
    """Gradients of depthwise conv w.r.t. input, kernels and bias."""
    k = p.kernel_size
    pad = k // 2
    *lead, c, h, w = u.shape
    m = p.multiplier
    src = np.pad(u.reshape(-1, c, h, w), ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    g = g.reshape(-1, c, m, h, w)
    kern = p.kernels.reshape(c, m, k, k)
    g_src = np.zeros_like(src)
    g_k = np.empty_like(kern)
    for dy in range(k):
        for dx in range(k):
            window = src[:, :, dy:dy + h, dx:dx + w]
            g_k[:, :, dy, dx] = np.einsum("ncmhw,nchw->cm", g, window)
            g_src[:, :, dy:dy + h, dx:dx + w] += np.einsum("ncmhw,cm->nchw", g, kern[:, :, dy, dx])
    g_u = g_src[:, :, pad:pad + h, pad:pad + w].reshape(*lead, c, h, w)
    g_b = g.sum(axis=(0, 3, 4)).reshape(c * m)
    return g_u, g_k.reshape(c * m, k, k), g_b


def act_backward(g: np.ndarray, pre: np.ndarray, name: str) -> np.ndarray:
    if name == "identity":
        return g
    s = sigmoid(pre)
    return g * s * (1.0 + pre * (1.0 - s))


def mean_backward(g_mean: np.ndarray, shape) -> np.ndarray:
    hw = shape[-1] * shape[-2]
    return np.broadcast_to(g_mean[..., None, None] / hw, shape).copy()


def var_backward(g_var: np.ndarray, f: np.ndarray, mean: np.ndarray) -> np.ndarray:
    hw = f.shape[-1] * f.shape[-2]
    return g_var[..., None, None] * 2.0 * (f - mean[..., None, None]) / hw


def fuse_backward(g_z: np.ndarray, stats: ChannelStats, p: IcaParams):
    """Returns ``(g_mean, g_var, g_fuse_weight, g_fuse_bias)``."""
    d = descriptor(stats, p.variant)
    g_d = g_z @ p.fuse_weight
    c = p.channels
    first, second = g_d[..., :c], g_d[..., c:]
    zero = np.zeros_like(first)
    g_mean, g_var = {
        "ica": (first, second),
        "gap_only": (first + second, zero),
        "var_only": (zero, first + second),
    }[p.variant]
    return g_mean, g_var, _sum_outer(g_z, d), _sum_lead(g_z, 1)


def excite_backward(g_alpha, z, hidden, alpha, p: IcaParams):
    """Returns ``(g_z, {param_name: grad})`` for the bottleneck MLP."""
    g_o = g_alpha * alpha * (1.0 - alpha)
    q = np.maximum(hidden, 0.0)
    grads = {"ica.w2": _sum_outer(g_o, q)}
    g_h = (g_o @ p.w2) * (hidden > 0)
    grads["ica.w1"] = _sum_outer(g_h, z)
    if p.has_bias:
        grads["ica.b2"] = _sum_lead(g_o, 1)
        grads["ica.b1"] = _sum_lead(g_h, 1)
    return g_h @ p.w1, grads


def gate_backward(g_out: np.ndarray, f: np.ndarray, alpha: np.ndarray):
    """Returns ``(g_f, g_alpha)`` for ``out = alpha[c] * f[c]``."""
    return alpha[..., None, None] * g_out, (f * g_out).sum(axis=(-2, -1))


def backward(
    grad_out, tape: Optional[Tape], grad_alpha=None
) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss given ``dL/d out`` (and optionally ``dL/d alpha``).

    Returns a dict keyed by parameter name (``stem.kernels``, ``ica.w1``, ...)
    plus ``"input"`` for the RGB image.
    """
    if tape is None or not tape.nodes:
        raise MissingTraceError("no recorded forward pass; call forward with a Tape first")
    grads = {"out": as_tensor(grad_out)}
    if grad_alpha is not None:
        grads["alpha"] = as_tensor(grad_alpha)
    params: dict[str, np.ndarray] = {}

    def acc(name, g):
        grads[name] = grads[name] + g if name in grads else g

    for node in reversed(tape.nodes):
        g = grads.pop(node.output, None)
        if g is None:
            continue
        s = node.saved
        if node.op == "gate":
            g_f, g_a = gate_backward(g, s["f"], s["alpha"])
            acc(node.inputs[0], g_f)
            acc("alpha", g_a)
        elif node.op == "excite":
            g_z, pg = excite_backward(g, s["z"], s["hidden"], s["alpha"], s["params"])
            params.update(pg)
            acc("z", g_z)
        elif node.op == "fuse":
            g_m, g_v, params["ica.fuse_weight"], params["ica.fuse_bias"] = fuse_backward(
                g, s["stats"], s["params"]
            )
            acc("mean", g_m)
            acc("var", g_v)
        elif node.op == "var":
            acc(node.inputs[0], var_backward(g, s["f"], s["mean"]))
        elif node.op == "mean":
            acc(node.inputs[0], mean_backward(g, s["shape"]))
        elif node.op == "act":
            acc("a", act_backward(g, s["pre"], s["name"]))
        elif node.op == "dwconv":
            g_u, params["stem.kernels"], params["stem.bias"] = dwconv_backward(
                g, s["u"], s["params"]
            )
            acc("u", g_u)
        elif node.op == "unshuffle":
            acc("ycc", unshuffle_backward(g, s["r"]))
        elif node.op == "color":
            acc("input", color_backward(g, s["transform"]))
        else:
            raise ValueError(f"no backward rule for op {node.op!r}")
    params["input"] = grads.pop("input")
    return params


# -- finite-difference checking ---------------------------------------------


@dataclass
class GradReport:
    per_param: dict[str, float]
    eps: float
    coords_checked: dict[str, int] = field(default_factory=dict)

    @property
    def overall_max(self) -> float:
        return max(self.per_param.values()) if self.per_param else 0.0

    def passed(self, threshold: float = 1e-6) -> bool:
        return self.overall_max < threshold

    def format(self) -> str:
        lines = [f"eps = {self.eps:g}"]
        for name, err in self.per_param.items():
            n = self.coords_checked.get(name, 0)
            lines.append(f"{name:<16} {err:.3e}  ({n} coords)")
        lines.append(f"{'overall_max':<16} {self.overall_max:.3e}")
        return "\n".join(lines)


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def avoid_relu_kinks(block: YcdaBlock, img, margin: float = 1e-2) -> YcdaBlock:
    """Shift ``b1`` so every bottleneck pre-activation is at least ``margin`` from 0.

    Only meaningful for a single image (one set of pre-activations); a block
    without MLP biases is returned unchanged.
    """
    if not block.ica.has_bias:
        return block
    tape = Tape()
    block.forward(img, tape=tape, check_range=False)
    hidden = next(n for n in tape.nodes if n.op == "excite").saved["hidden"]
    hidden = hidden.reshape(-1, hidden.shape[-1])[0]
    target = np.where(hidden >= 0, np.maximum(hidden, margin), np.minimum(hidden, -margin))
    return block.with_parameters({"ica.b1": block.ica.b1 + (target - hidden)})


def sum_squares_loss(block: YcdaBlock, img) -> float:
    out, _ = block.forward(img, check_range=False)
    return float(np.sum(out * out))


def loss_difference(out_plus: np.ndarray, out_minus: np.ndarray) -> float:
    """``sum(p**2) - sum(m**2)`` evaluated as ``fsum((p - m) * (p + m))``.

    Subtracting two rounded loss totals loses ~``ulp(L)`` per evaluation,
    which swamps the difference for coordinates with tiny gradients.
    """
    return math.fsum(((out_plus - out_minus) * (out_plus + out_minus)).ravel())


def grad_check(
    block: YcdaBlock,
    img,
    eps: float = 1e-4,
    seed: int = 0,
    max_coords: int = 200,
    relu_margin: Optional[float] = 1e-2,
) -> GradReport:
    """Compare analytic gradients of ``sum(out**2)`` with central differences.

    Every coordinate of each parameter (and of the input image) is checked,
    or a seeded subsample of ``max_coords`` when a tensor is larger.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    img = as_tensor(img)
    if relu_margin is not None:
        block = avoid_relu_kinks(block, img, relu_margin)
    tape = Tape()
    out, _ = block.forward(img, tape=tape, check_range=False)
    analytic = backward(2.0 * out, tape)
    rng = np.random.default_rng(seed)
    tensors = dict(block.named_parameters(), input=img)
    report = GradReport({}, eps)
    for name, value in tensors.items():
        flat = value.ravel()
        if flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        else:
            coords = np.arange(flat.size)

        def output_at(i, delta):
            moved = flat.copy()
            moved[i] += delta
            arr = moved.reshape(value.shape)
            if name == "input":
                return block.forward(arr, check_range=False)[0]
            return block.with_parameters({name: arr}).forward(img, check_range=False)[0]

        worst = 0.0
        g_flat = analytic[name].ravel()
        for i in coords:
            diff = loss_difference(output_at(i, eps), output_at(i, -eps))
            worst = max(worst, relative_error(g_flat[i], diff / (2.0 * eps)))
        report.per_param[name] = worst
        report.coords_checked[name] = int(coords.size)
    return report


def gradcheck_input(seed: int, height: int = 8, width: int = 8) -> np.ndarray:
    """Seeded uniform [0, 1) RGB image used by the gradient-check runner."""
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=(3, height, width))


# -- toy training -----------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    step_size: float = 0.01
    momentum: float = 0.937
    steps: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError(f"step_size must be > 0, got {self.step_size}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")


@dataclass(frozen=True)
class LabeledImages:
    """RGB images ``(N, 3, H, W)`` with integer labels (1 salient, 0 camouflaged)."""

    images: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class ToyResult:
    block: YcdaBlock
    head_weight: np.ndarray
    head_bias: np.ndarray
    loss_trace: list[float]
    group_alpha: dict[str, float]


GROUP_NAMES = ("Y", "Cb", "Cr")


def group_mean_alpha(alpha: np.ndarray, group_size: int) -> dict[str, float]:
    """Mean gate per colour-derived channel group over all given images."""
    per_channel = alpha.reshape(-1, alpha.shape[-1]).mean(axis=0)
    return {
        g: float(per_channel[i * group_size:(i + 1) * group_size].mean())
        for i, g in enumerate(GROUP_NAMES)
    }


def _head_loss(feats, labels, w, b):
    logits = feats @ w.T + b
    logits = logits - logits.max(axis=1, keepdims=True)
    logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    n = len(labels)
    loss = -logp[np.arange(n), labels].mean()
    g_logits = np.exp(logp)
    g_logits[np.arange(n), labels] -= 1.0
    return float(loss), g_logits / n


def train_toy(
    train: LabeledImages,
    cfg: TrainConfig = TrainConfig(),
    test: Optional[LabeledImages] = None,
    block: Optional[YcdaBlock] = None,
) -> ToyResult:
    """Full-batch momentum descent on block + linear head, softmax cross-entropy.

    The head mean-pools the block output over space and maps the 24 pooled
    features to two logits. ``loss_trace[0]`` is the initial loss and one
    entry is appended per step. ``group_alpha`` is measured on the
    camouflaged images of ``test`` (``train`` when no test split is given).
    """
    if len(train) == 0:
        raise ValueError("training set is empty")
    if block is None:
        block = init_block(StemConfig(), seed=cfg.seed)
    c = block.config.out_channels
    rng = np.random.default_rng(cfg.seed + 1)
    bound = 1.0 / np.sqrt(c)
    head_w = rng.uniform(-bound, bound, size=(2, c))
    head_b = np.zeros(2)
    images = as_tensor(train.images)
    labels = np.asarray(train.labels, dtype=np.int64)

    params = dict(block.named_parameters(), **{"head.w": head_w, "head.b": head_b})
    velocity = {k: np.zeros_like(v) for k, v in params.items()}

    def evaluate(params, need_grad):
        blk = block.with_parameters({k: v for k, v in params.items() if not k.startswith("head.")})
        tape = Tape() if need_grad else None
        out, _ = blk.forward(images, tape=tape, check_range=False)
        feats = out.mean(axis=(-2, -1))
        loss, g_logits = _head_loss(feats, labels, params["head.w"], params["head.b"])
        if not need_grad:
            return loss, None
        hw = out.shape[-1] * out.shape[-2]
        g_feats = g_logits @ params["head.w"]
        g_out = np.broadcast_to(g_feats[..., None, None] / hw, out.shape)
        grads = backward(g_out, tape)
        grads.pop("input")
        grads["head.w"] = g_logits.T @ feats
        grads["head.b"] = g_logits.sum(axis=0)
        return loss, grads

    trace = []
    for _ in range(cfg.steps):
        loss, grads = evaluate(params, True)
        trace.append(loss)
        for k in params:
            velocity[k] = cfg.momentum * velocity[k] + grads[k]
            params[k] = params[k] - cfg.step_size * velocity[k]
    trace.append(evaluate(params, False)[0])

    trained = block.with_parameters({k: v for k, v in params.items() if not k.startswith("head.")})
    probe = test if test is not None else train
    camo = as_tensor(probe.images)[np.asarray(probe.labels) == 0]
    if len(camo):
        _, alpha = trained.forward(camo, check_range=False)
        groups = group_mean_alpha(alpha, trained.config.group_size)
    else:
        groups = {g: float("nan") for g in GROUP_NAMES}
    return ToyResult(trained, params["head.w"], params["head.b"], trace, groups)
