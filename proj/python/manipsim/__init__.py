"""Price-manipulation models: Riccati coefficients, closed-loop simulation,
no-arbitrage pricing and verification."""

from ._core import (
    AdmissibilityError,
    DEFAULT_STEPS,
    DivergenceError,
    Measure,
    ModelKind,
    Params,
    RawParams,
    coefficients,
    hjb_residual,
    lambda_threshold,
    price,
    q_star,
    reference_params,
    run_cli,
    simulate,
    sweep,
    t_max,
)

__version__ = "0.1.0"


def params(model: int = 1, lam: float = 0.0, **overrides) -> Params:
    """Validated parameters: the reference set with keyword overrides.

    Use ``lam`` for the position; ``lambda_`` is also accepted.
    """
    raw = reference_params(model, lam)
    for key, value in overrides.items():
        if not hasattr(raw, key):
            raise ValueError(f"unknown parameter '{key}'")
        setattr(raw, key, value)
    return Params(raw)


__all__ = [
    "AdmissibilityError",
    "DEFAULT_STEPS",
    "DivergenceError",
    "Measure",
    "ModelKind",
    "Params",
    "RawParams",
    "coefficients",
    "hjb_residual",
    "lambda_threshold",
    "params",
    "price",
    "q_star",
    "reference_params",
    "run_cli",
    "simulate",
    "sweep",
    "t_max",
]
