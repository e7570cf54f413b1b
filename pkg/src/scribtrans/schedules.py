"""Learning-rate schedules: polynomial decay (pre-training) and per-epoch
exponential decay (fine-tuning). Both evaluate in double precision."""

from __future__ import annotations

from .errors import ScheduleError


def poly_lr(iteration: int, max_iter: int, base_lr: float, power: float = 0.9) -> float:
    """base_lr * (1 - iteration/max_iter) ** power."""
    if base_lr <= 0:
        raise ScheduleError(f"base_lr must be positive, got {base_lr}")
    if max_iter <= 0:
        raise ScheduleError(f"max_iter must be positive, got {max_iter}")
    if iteration < 0 or iteration > max_iter:
        raise ScheduleError(f"iteration {iteration} outside [0, {max_iter}]")
    return base_lr * (1.0 - iteration / max_iter) ** power


def exp_lr(epoch: int, base_lr: float = 1e-4, factor: float = 0.94) -> float:
    """base_lr * factor ** epoch (applied per epoch)."""
    if epoch < 0:
        raise ScheduleError(f"epoch must be >= 0, got {epoch}")
    return base_lr * factor**epoch
