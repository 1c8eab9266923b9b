"""Encoder-decoder LSTM written directly on numpy.

Layout: two stacked encoder LSTMs, the top encoder's last hidden state
repeated once per output step, two stacked decoder LSTMs, and a
time-distributed dense unit with ReLU producing one normalized distance per
step.  Gate blocks are ordered input, forget, cell, output.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping

import numpy as np

from .._backend import kernels
from ..errors import ConfigError, ShapeMismatch
from .norm import N_FEATURES, NormParams

ROLES = ("pedestrian", "vehicle_through", "vehicle_left")
ROLE_INPUT_STEPS = {"pedestrian": 4, "vehicle_through": 10, "vehicle_left": 10}
# vehicle windows are fewer and noisier per metre; they need the longer schedule
ROLE_EPOCHS = {"pedestrian": 100, "vehicle_through": 200, "vehicle_left": 200}
LAYERS = ("enc1", "enc2", "dec1", "dec2")


@dataclass(frozen=True)
class ModelConfig:
    role: str = "pedestrian"
    input_steps: int = 4
    output_steps: int = 8
    features_in: int = N_FEATURES
    enc1_units: int = 128
    enc2_units: int = 128
    dec_units: int = 64
    learning_rate: float = 0.01
    lr_final_fraction: float = 0.01
    warmup_steps: int = 100
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ConfigError(f"unknown role {self.role!r}")
        counts = (self.input_steps, self.output_steps, self.features_in, self.enc1_units,
                  self.enc2_units, self.dec_units, self.epochs, self.batch_size)
        if any(int(c) != c or c <= 0 for c in counts):
            raise ConfigError("all counts must be positive integers")
        if not self.learning_rate > 0.0:
            raise ConfigError("learning rate must be positive")
        if int(self.warmup_steps) != self.warmup_steps or self.warmup_steps < 0:
            raise ConfigError("warmup_steps must be a non-negative integer")
        if not 0.0 < self.lr_final_fraction <= 1.0:
            raise ConfigError("lr_final_fraction must lie in (0, 1]")
        if self.input_steps != ROLE_INPUT_STEPS[self.role]:
            raise ConfigError(
                f"role {self.role} requires {ROLE_INPUT_STEPS[self.role]} input steps, got {self.input_steps}"
            )

    @classmethod
    def for_role(cls, role: str, **overrides) -> ModelConfig:
        if role not in ROLES:
            raise ConfigError(f"unknown role {role!r}")
        overrides.setdefault("input_steps", ROLE_INPUT_STEPS[role])
        overrides.setdefault("epochs", ROLE_EPOCHS[role])
        return cls(role=role, **overrides)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> ModelConfig:
        return cls(**dict(d))

    def layer_dims(self) -> dict[str, tuple[int, int]]:
        """(input size, hidden size) of every recurrent layer."""
        return {
            "enc1": (self.features_in, self.enc1_units),
            "enc2": (self.enc1_units, self.enc2_units),
            "dec1": (self.enc2_units, self.dec_units),
            "dec2": (self.dec_units, self.dec_units),
        }


@dataclass
class LstmLayerParams:
    w_x: np.ndarray  # (4H, D)
    w_h: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)

    def __post_init__(self) -> None:
        four_h, d = self.w_x.shape
        if four_h % 4 or self.w_h.shape != (four_h, four_h // 4) or self.b.shape != (four_h,):
            raise ShapeMismatch(f"inconsistent LSTM shapes {self.w_x.shape}, {self.w_h.shape}, {self.b.shape}")

    @property
    def hidden(self) -> int:
        return self.w_h.shape[1]


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    for name, (d, h) in config.layer_dims().items():
        shapes[f"{name}.w_x"] = (4 * h, d)
        shapes[f"{name}.w_h"] = (4 * h, h)
        shapes[f"{name}.b"] = (4 * h,)
    shapes["dense.w"] = (1, config.dec_units)
    shapes["dense.b"] = (1,)
    return shapes


@dataclass
class EncoderDecoderModel:
    config: ModelConfig
    params: dict[str, np.ndarray]
    norm: NormParams

    @property
    def role(self) -> str:
        return self.config.role

    def __post_init__(self) -> None:
        expected = param_shapes(self.config)
        if list(self.params) != list(expected):
            raise ShapeMismatch(f"parameter names {list(self.params)} do not match {list(expected)}")
        for k, shp in expected.items():
            if self.params[k].shape != shp:
                raise ShapeMismatch(f"{k}: shape {self.params[k].shape}, expected {shp}")

    def layer(self, name: str) -> LstmLayerParams:
        p = self.params
        return LstmLayerParams(p[f"{name}.w_x"], p[f"{name}.w_h"], p[f"{name}.b"])

    def copy(self) -> EncoderDecoderModel:
        return EncoderDecoderModel(self.config, {k: v.copy() for k, v in self.params.items()}, self.norm)


HEAD_BIAS_INIT = 0.5


def init_model(config: ModelConfig, norm: NormParams | None = None, seed: int | None = None) -> EncoderDecoderModel:
    """Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation."""
    rng = np.random.default_rng(config.seed if seed is None else seed)
    dims = config.layer_dims()
    params: dict[str, np.ndarray] = {}
    for k, shp in param_shapes(config).items():
        layer = k.split(".")[0]
        fan_in = config.dec_units if layer == "dense" else sum(dims[layer])
        bound = 1.0 / np.sqrt(fan_in)
        params[k] = rng.uniform(-bound, bound, size=shp)
    # start the ReLU head at mid-range of the normalized target; a negative
    # start can leave it dead for every sample, with no gradient to recover
    params["dense.b"][:] = HEAD_BIAS_INIT
    return EncoderDecoderModel(config, params, norm or NormParams.identity())


def zero_model(config: ModelConfig, norm: NormParams | None = None) -> EncoderDecoderModel:
    params = {k: np.zeros(shp) for k, shp in param_shapes(config).items()}
    return EncoderDecoderModel(config, params, norm or NormParams.identity())


def lstm_cell_step(params: LstmLayerParams, x, h_prev, c_prev) -> tuple[np.ndarray, np.ndarray]:
    """One LSTM step for a single sample (1-D vectors) or a batch (2-D)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    h2 = np.atleast_2d(np.asarray(h_prev, dtype=float))
    c2 = np.ascontiguousarray(np.atleast_2d(np.asarray(c_prev, dtype=float)))
    if x2.shape[1] != params.w_x.shape[1] or h2.shape[1] != params.hidden:
        raise ShapeMismatch("input or state width does not match layer")
    z = np.ascontiguousarray(x2 @ params.w_x.T + h2 @ params.w_h.T + params.b)
    _, c, _, h = kernels.lstm_gates_forward(z, c2)
    if single:
        return h[0], c[0]
    return h, c


def _layer_forward(p: LstmLayerParams, xs: np.ndarray, keep: bool):
    """Unroll one layer over ``xs`` (T, N, D); returns hidden states and cache."""
    t_len, n, _ = xs.shape
    hid = p.hidden
    zx = (xs.reshape(t_len * n, -1) @ p.w_x.T).reshape(t_len, n, 4 * hid) + p.b
    h = np.zeros((n, hid))
    c = np.zeros((n, hid))
    hs = np.empty((t_len, n, hid))
    cache = [] if keep else None
    for t in range(t_len):
        z = np.ascontiguousarray(zx[t] + h @ p.w_h.T)
        act, c_new, tanh_c, h_new = kernels.lstm_gates_forward(z, c)
        if keep:
            cache.append((h, c, act, tanh_c))
        h, c = h_new, c_new
        hs[t] = h
    return hs, cache


def _layer_backward(p: LstmLayerParams, xs: np.ndarray, cache, dhs: np.ndarray):
    """BPTT through one layer. ``dhs`` (T, N, H) are upstream hidden-state grads."""
    t_len, n, _ = xs.shape
    hid = p.hidden
    dz_all = np.empty((t_len, n, 4 * hid))
    dh_next = np.zeros((n, hid))
    dc_next = np.zeros((n, hid))
    d_wh = np.zeros_like(p.w_h)
    for t in range(t_len - 1, -1, -1):
        h_prev, c_prev, act, tanh_c = cache[t]
        dh = np.ascontiguousarray(dhs[t] + dh_next)
        dz, dc_next = kernels.lstm_gates_backward(dh, dc_next, act, c_prev, tanh_c)
        dz_all[t] = dz
        d_wh += dz.T @ h_prev
        dh_next = dz @ p.w_h
    flat_dz = dz_all.reshape(t_len * n, 4 * hid)
    d_wx = flat_dz.T @ xs.reshape(t_len * n, -1)
    d_b = flat_dz.sum(axis=0)
    dxs = (flat_dz @ p.w_x).reshape(t_len, n, -1)
    return d_wx, d_wh, d_b, dxs


def _check_input(model: EncoderDecoderModel, x: np.ndarray) -> np.ndarray:
    cfg = model.config
    if x.ndim != 3 or x.shape[1:] != (cfg.input_steps, cfg.features_in):
        raise ShapeMismatch(f"expected (N, {cfg.input_steps}, {cfg.features_in}) input, got {x.shape}")
    return x


def forward_normalized(model: EncoderDecoderModel, x: np.ndarray, keep: bool = False):
    """Forward pass on normalized windows (N, T, F) -> normalized outputs (N, K)."""
    x = _check_input(model, np.asarray(x, dtype=float))
    k_out = model.config.output_steps
    xs = np.ascontiguousarray(x.transpose(1, 0, 2))
    h1, c1 = _layer_forward(model.layer("enc1"), xs, keep)
    h2, c2 = _layer_forward(model.layer("enc2"), h1, keep)
    rep = np.broadcast_to(h2[-1], (k_out,) + h2[-1].shape)
    rep = np.ascontiguousarray(rep)
    h3, c3 = _layer_forward(model.layer("dec1"), rep, keep)
    h4, c4 = _layer_forward(model.layer("dec2"), h3, keep)
    pre = h4 @ model.params["dense.w"][0] + model.params["dense.b"][0]  # (K, N)
    y = np.maximum(pre, 0.0).T
    if not keep:
        return y
    cache = {"xs": xs, "h1": h1, "h2": h2, "rep": rep, "h3": h3, "h4": h4, "pre": pre,
             "c1": c1, "c2": c2, "c3": c3, "c4": c4}
    return y, cache


def forward(model: EncoderDecoderModel, window) -> np.ndarray:
    """Predicted travelled distances in metres.

    ``window`` is a normalized (T, F) window, a batch (N, T, F), or a
    :class:`~vrutwin.ingest.FeatureWindow` with ``normalized`` set.
    """
    values = getattr(window, "values", window)
    if getattr(window, "normalized", True) is False:
        raise ShapeMismatch("window must be normalized with the model's NormParams")
    x = np.asarray(values, dtype=float)
    single = x.ndim == 2
    y = forward_normalized(model, x[None] if single else x)
    out = model.norm.denormalize_target(y)
    return out[0] if single else out


def predict_raw(model: EncoderDecoderModel, raw_windows: np.ndarray) -> np.ndarray:
    """Normalize raw windows with the model's bounds, then :func:`forward`."""
    x = model.norm.normalize_features(np.asarray(raw_windows, dtype=float))
    return forward(model, x)


def mae_loss(y_pred: np.ndarray, y_true: np.ndarray) -> float:
    return float(np.mean(np.abs(y_pred - y_true)))


def loss_and_grads(model: EncoderDecoderModel, x: np.ndarray, y: np.ndarray):
    """Mean absolute error (normalized units) and its gradient for every parameter.

    The subgradient of ``|e|`` at ``e = 0`` is taken as 0.
    """
    y = np.asarray(y, dtype=float)
    y_pred, cache = forward_normalized(model, x, keep=True)
    n, k_out = y.shape
    if y_pred.shape != y.shape:
        raise ShapeMismatch(f"targets {y.shape} vs outputs {y_pred.shape}")
    loss = mae_loss(y_pred, y)
    dy = (np.sign(y_pred - y) / (n * k_out)).T  # (K, N)
    dpre = dy * (cache["pre"] > 0.0)
    w = model.params["dense.w"][0]
    grads: dict[str, np.ndarray] = {}
    g_dense_w = np.einsum("kn,knh->h", dpre, cache["h4"])[None, :]
    g_dense_b = np.array([dpre.sum()])
    dh4 = dpre[:, :, None] * w[None, None, :]

    gw, gh, gb, dh3 = _layer_backward(model.layer("dec2"), cache["h3"], cache["c4"], dh4)
    grads.update({"dec2.w_x": gw, "dec2.w_h": gh, "dec2.b": gb})
    gw, gh, gb, drep = _layer_backward(model.layer("dec1"), cache["rep"], cache["c3"], dh3)
    grads.update({"dec1.w_x": gw, "dec1.w_h": gh, "dec1.b": gb})
    dh2 = np.zeros_like(cache["h2"])
    dh2[-1] = drep.sum(axis=0)
    gw, gh, gb, dh1 = _layer_backward(model.layer("enc2"), cache["h1"], cache["c2"], dh2)
    grads.update({"enc2.w_x": gw, "enc2.w_h": gh, "enc2.b": gb})
    gw, gh, gb, _ = _layer_backward(model.layer("enc1"), cache["xs"], cache["c1"], dh1)
    grads.update({"enc1.w_x": gw, "enc1.w_h": gh, "enc1.b": gb})
    grads["dense.w"] = g_dense_w
    grads["dense.b"] = g_dense_b
    return loss, {k: grads[k] for k in model.params}


def backward(model: EncoderDecoderModel, batch) -> dict[str, np.ndarray]:
    """Gradients of the batch-mean MAE for a normalized ``(windows, targets)`` batch."""
    x, y = batch
    return loss_and_grads(model, np.asarray(x, dtype=float), y)[1]
