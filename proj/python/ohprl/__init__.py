"""Python bindings for the ohprl trainer."""

from ._ohprl import (
    CheckpointError,
    ConfigError,
    Env,
    Nets,
    NumericalError,
    ParamSet,
    ProtocolError,
    SamplingError,
    ShapeError,
    ValidationError,
    config_text,
    ema_intervention,
    evaluate,
    export_gate_field,
    forward,
    forward_batch,
    gate_target,
    gate_value,
    init_params,
    load_checkpoint,
    make_nets,
    observation_dim,
    policy_mean_action,
    policy_sample,
    polyak_update,
    q_value,
    rolling_success,
    train,
)


def run(overrides=None, text=""):
    """Train with ``key=value`` overrides given as a dict of plain Python values."""
    settings = {}
    for key, value in (overrides or {}).items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        settings[key] = str(value)
    return train(text, settings)


__all__ = [name for name in dir() if not name.startswith("_")]
