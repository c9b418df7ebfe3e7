"""Reference discrete-time dynamics for the two case studies."""

import numpy as np

PENDULUM = {
    "m": 1.0,
    "l": 1.0,
    "g": 9.8,
    "tau": 0.01,
    "state_box": np.array([[-np.pi / 4, np.pi / 4]] * 2),
    "safe_box": np.array([[-np.pi / 6, np.pi / 6]] * 2),
    "u_box": (-10.0, 10.0),
    "dim": 2,
}

BICYCLE = {
    "m": 20.0,
    "l": 1.0,
    "b": 1.0,
    "g": 9.8,
    "v": 10.0,
    "a": 0.5,
    "state_box": np.array([[-2.2, 2.2]] * 3),
    "safe_box": np.array([[-2.0, 2.0]] * 3),
    "u_box": (-10.0, 10.0),
    "dim": 3,
}
BICYCLE["J"] = BICYCLE["m"] * BICYCLE["l"] / 3.0


def pendulum_step(x, u):
    """x: (k, 2), u: (k,) -> (k, 2)."""
    p = PENDULUM
    x1, x2 = x[:, 0], x[:, 1]
    nx1 = x1 + p["tau"] * x2
    nx2 = x2 + p["tau"] * (p["g"] / p["l"] * np.sin(x1) + u / (p["m"] * p["l"] ** 2))
    return np.stack([nx1, nx2], axis=1)


def bicycle_step(x, u):
    """x: (k, 3), u: (k,) -> (k, 3); the handlebar angle is set directly."""
    p = BICYCLE
    x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
    ml_J = p["m"] * p["l"] / p["J"]
    drift2 = ml_J * (p["g"] * np.sin(x1) + p["v"] ** 2 / p["b"] * np.cos(x1) * np.tan(x3))
    gain2 = p["a"] * p["m"] * p["l"] * p["v"] / (p["J"] * p["b"]) * np.cos(x1) * np.cos(x3) ** 2
    nx1 = x2
    nx2 = drift2 + gain2 * u
    nx3 = u
    return np.stack([nx1, nx2, nx3], axis=1)


def pendulum_step_torch(x, u):
    """Differentiable version of pendulum_step; x: (k, 2), u: (k, 1)."""
    import torch

    p = PENDULUM
    x1, x2 = x[:, 0], x[:, 1]
    nx1 = x1 + p["tau"] * x2
    nx2 = x2 + p["tau"] * (p["g"] / p["l"] * torch.sin(x1) + u[:, 0] / (p["m"] * p["l"] ** 2))
    return torch.stack([nx1, nx2], dim=1)


def bicycle_step_torch(x, u):
    """Differentiable version of bicycle_step; x: (k, 3), u: (k, 1)."""
    import torch

    p = BICYCLE
    x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
    ml_J = p["m"] * p["l"] / p["J"]
    drift2 = ml_J * (p["g"] * torch.sin(x1) + p["v"] ** 2 / p["b"] * torch.cos(x1) * torch.tan(x3))
    gain2 = p["a"] * p["m"] * p["l"] * p["v"] / (p["J"] * p["b"]) * torch.cos(x1) * torch.cos(x3) ** 2
    nx1 = x2
    nx2 = drift2 + gain2 * u[:, 0]
    nx3 = u[:, 0]
    return torch.stack([nx1, nx2, nx3], dim=1)


SYSTEMS = {
    "pendulum": (PENDULUM, pendulum_step),
    "bicycle": (BICYCLE, bicycle_step),
}

TORCH_STEPS = {
    "pendulum": pendulum_step_torch,
    "bicycle": bicycle_step_torch,
}
