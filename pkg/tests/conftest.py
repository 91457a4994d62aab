import numpy as np


def grad_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-wise relative error with an absolute floor for near-zero grads."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    denom = max(np.linalg.norm(numeric), 1.0)
    return float(np.linalg.norm(analytic - numeric) / denom)
