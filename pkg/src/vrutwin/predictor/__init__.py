"""Encoder-decoder LSTM distance predictors."""

from .adam import AdamState, adam_step
from .model import (
    ROLE_EPOCHS,
    ROLE_INPUT_STEPS,
    ROLES,
    EncoderDecoderModel,
    LstmLayerParams,
    ModelConfig,
    backward,
    forward,
    init_model,
    loss_and_grads,
    lstm_cell_step,
    predict_raw,
    zero_model,
)
from .norm import FEATURES, NormParams
from .persist import load_model, save_model
from .train import TrainReport, constant_velocity_predict, evaluate, mae, rmse, train

__all__ = [
    "AdamState", "EncoderDecoderModel", "FEATURES", "LstmLayerParams", "ModelConfig", "NormParams",
    "ROLES", "ROLE_EPOCHS", "ROLE_INPUT_STEPS", "TrainReport", "adam_step", "backward", "constant_velocity_predict",
    "evaluate", "forward", "init_model", "load_model", "loss_and_grads", "lstm_cell_step", "mae",
    "predict_raw", "rmse", "save_model", "train", "zero_model",
]
