"""Pure-numpy compute kernels.

Fallback twin of the compiled ``_core_cy`` extension; same API, same math.
Kept vectorized so it stays usable when the extension is not built.
"""

import numpy as np


def mlp_forward(weights, biases, X):
    """ReLU-hidden forward pass. Returns raw logits, shape (n, C)."""
    h = X
    for W, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ W.T + b, 0.0)
    return h @ weights[-1].T + biases[-1]


def mlp_loss_grads(weights, biases, X, y):
    """Mean softmax cross-entropy with exact backprop.

    Returns (loss, [dW...], [db...], dX) where dX is the gradient of the
    mean loss with respect to the inputs.
    """
    n = X.shape[0]
    acts = [X]
    for W, b in zip(weights[:-1], biases[:-1]):
        acts.append(np.maximum(acts[-1] @ W.T + b, 0.0))
    logits = acts[-1] @ weights[-1].T + biases[-1]

    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    sumz = expz.sum(axis=1)
    idx = np.arange(n)
    loss = float(np.mean(np.log(sumz) - shifted[idx, y]))

    delta = expz / sumz[:, None]
    delta[idx, y] -= 1.0
    delta /= n

    L = len(weights)
    dWs = [None] * L
    dbs = [None] * L
    dX = None
    for i in range(L - 1, -1, -1):
        dWs[i] = delta.T @ acts[i]
        dbs[i] = delta.sum(axis=0)
        back = delta @ weights[i]
        if i > 0:
            delta = back * (acts[i] > 0)
        else:
            dX = back
    return loss, dWs, dbs, dX


def mlp_input_grads(weights, biases, X, y):
    """Input gradient of the mean loss only; the dX of ``mlp_loss_grads``.

    Same operations in the same order as the full backprop minus the
    parameter-gradient accumulations, so the result is bit-identical.
    """
    n = X.shape[0]
    acts = [X]
    for W, b in zip(weights[:-1], biases[:-1]):
        acts.append(np.maximum(acts[-1] @ W.T + b, 0.0))
    logits = acts[-1] @ weights[-1].T + biases[-1]

    shifted = logits - logits.max(axis=1, keepdims=True)
    expz = np.exp(shifted)
    sumz = expz.sum(axis=1)
    idx = np.arange(n)

    delta = expz / sumz[:, None]
    delta[idx, y] -= 1.0
    delta /= n

    for i in range(len(weights) - 1, -1, -1):
        back = delta @ weights[i]
        if i > 0:
            delta = back * (acts[i] > 0)
        else:
            return back


def svgd_direction(X, G, sigma):
    """Kernel-smoothed drift minus kernel repulsion, averaged over particles.

    Returns S with S[i] = (1/N) sum_j k(xi,xj) * (G[j] - (xi-xj)/sigma^2),
    so a descent step is x <- x - alpha * S.
    """
    n = X.shape[0]
    d2 = np.sum(X * X, axis=1)
    sq = d2[:, None] + d2[None, :] - 2.0 * (X @ X.T)
    np.maximum(sq, 0.0, out=sq)
    K = np.exp(-sq / (2.0 * sigma * sigma))
    smoothed = K @ G
    repulsion = (K.sum(axis=1)[:, None] * X - K @ X) / (sigma * sigma)
    return (smoothed - repulsion) / n


def median_sqdist(X):
    """Median of pairwise squared distances over i < j. Zero when n < 2."""
    n = X.shape[0]
    if n < 2:
        return 0.0
    d2 = np.sum(X * X, axis=1)
    sq = d2[:, None] + d2[None, :] - 2.0 * (X @ X.T)
    np.maximum(sq, 0.0, out=sq)
    iu = np.triu_indices(n, 1)
    return float(np.median(sq[iu]))
