"""학습 손실 모듈"""

from .hutchinson import (
    RademacherVector,
    draw_rademacher,
    coo_matvec_scatter,
    llt_matvec_scatter,
    hutchinson_loss,
    hutchinson_loss_grad,
    hutchinson_loss_and_grad,
    frobenius_distance_sq,
    monte_carlo_loss,
)

__all__ = [
    "RademacherVector",
    "draw_rademacher",
    "coo_matvec_scatter",
    "llt_matvec_scatter",
    "hutchinson_loss",
    "hutchinson_loss_grad",
    "hutchinson_loss_and_grad",
    "frobenius_distance_sq",
    "monte_carlo_loss",
]
