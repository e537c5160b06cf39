"""Independent reference implementations used as test oracles.

Plain loops over Python floats; nothing here touches the autodiff code.
"""
import math


def xcorr_loop(zA, zB, center=True, eps=1e-12):
    """Normalised cross-correlation of two B x D batches by explicit loops."""
    zA = [list(map(float, row)) for row in zA]
    zB = [list(map(float, row)) for row in zB]
    B, D = len(zA), len(zA[0])
    if center:
        for j in range(D):
            ma = sum(zA[b][j] for b in range(B)) / B
            mb = sum(zB[b][j] for b in range(B)) / B
            for b in range(B):
                zA[b][j] -= ma
                zB[b][j] -= mb
    C = [[0.0] * D for _ in range(D)]
    for i in range(D):
        na = math.sqrt(sum(zA[b][i] ** 2 for b in range(B)))
        for j in range(D):
            nb = math.sqrt(sum(zB[b][j] ** 2 for b in range(B)))
            C[i][j] = sum(zA[b][i] * zB[b][j] for b in range(B)) / (na * nb + eps)
    return C


def bt_loop(C, lam):
    D = len(C)
    on = sum((1 - C[i][i]) ** 2 for i in range(D))
    off = sum(C[i][j] ** 2 for i in range(D) for j in range(D) if i != j)
    return on + lam * off


def reference_adamw(theta, grads_seq, lr, b1, b2, eps, wd):
    """Scalar-by-scalar transcription of the AdamW update."""
    theta = list(theta)
    m = [0.0] * len(theta)
    v = [0.0] * len(theta)
    for t, g in enumerate(grads_seq, start=1):
        for i in range(len(theta)):
            m[i] = b1 * m[i] + (1 - b1) * g[i]
            v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i]
            mh = m[i] / (1 - b1**t)
            vh = v[i] / (1 - b2**t)
            theta[i] = theta[i] - lr * mh / (math.sqrt(vh) + eps) - lr * wd * theta[i]
    return theta
