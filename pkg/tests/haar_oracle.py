"""Independent recursive Haar transform used as a test oracle."""
import numpy as np


def haar_fwt(X, levels):
    """Coefficients in the library's order: approximation, then coarse to fine (H, V, D)."""
    A = np.asarray(X, dtype=np.float64)
    details = []
    for _ in range(levels):
        a, b = A[0::2, 0::2], A[0::2, 1::2]
        c, d = A[1::2, 0::2], A[1::2, 1::2]
        details.append(((a - b + c - d) / 2, (a + b - c - d) / 2, (a - b - c + d) / 2))
        A = (a + b + c + d) / 2
    out = [A.ravel()]
    for H, V, D in reversed(details):
        out += [H.ravel(), V.ravel(), D.ravel()]
    return np.concatenate(out)
