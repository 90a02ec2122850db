"""Pure numpy versions of the compiled kernels.

Both modules expose the same two functions with the same contracts, and
``_backend`` picks one at import time.
"""
import numpy as np
import scipy.sparse as sp

# dense scratch budget (floats) when gathering sampled rows
_GATHER_BUDGET = 1 << 22


def consensus_rounds(W, Wn, polyak, x_indptr, x_indices, x_data, y, rows, comm,
                     p_indptr, p_indices, p_data, t0, mu, loss, guard):
    """Run ``R = rows.shape[0]`` engine rounds in place.

    Round ``t = t0 + r`` adds the current iterates to ``polyak``, evaluates
    each node's ``b`` sampled (sub)gradients at its current iterate, mixes
    with ``P`` (CSR arrays) when ``comm[r]`` is set, and steps with
    ``eta = 1/(mu t)``::

        W_next[i] = sum_j P_ij W[j] - eta * (mu W[i] + mean_s coef_s x_s)

    ``W`` and ``Wn`` are ping-pong buffers.  Returns ``(swapped, bad)``:
    ``swapped`` is 1 when the final iterates live in ``Wn``; ``bad`` is the
    local index of the first round whose output has a non-finite row or a
    row norm above ``guard`` (-1 if none, guard <= 0 disables the check).
    """
    R, m, b = rows.shape
    d = W.shape[1]
    X = sp.csr_matrix((x_data, x_indices, x_indptr), shape=(len(x_indptr) - 1, d))
    P = sp.csr_matrix((p_data, p_indices, p_indptr), shape=(m, m))
    cur, nxt = W, Wn
    swapped = 0
    per_round = m * b * d
    step = max(1, _GATHER_BUDGET // max(per_round, 1))
    for r0 in range(0, R, step):
        r1 = min(R, r0 + step)
        flat = rows[r0:r1].reshape(-1)
        block = X[flat].toarray().reshape(r1 - r0, m, b, d)
        labels = y[flat].reshape(r1 - r0, m, b)
        for r in range(r1 - r0):
            t = t0 + r0 + r
            polyak += cur
            xs = block[r]
            lab = labels[r]
            z = lab * np.einsum("mbd,md->mb", xs, cur)
            if loss == 0:
                coef = np.where(z < 1.0, -lab, 0.0)
            else:
                coef = (z - 1.0) * lab
            grad = np.einsum("mb,mbd->md", coef, xs)
            if comm[r0 + r]:
                nxt[...] = P @ cur
                nxt -= cur / t
            else:
                nxt[...] = cur - cur / t
            nxt -= grad / (mu * t * b)
            cur, nxt = nxt, cur
            swapped = 1 - swapped
            if guard > 0:
                norms = np.sqrt(np.einsum("ij,ij->i", cur, cur))
                if not np.all(np.isfinite(norms)) or np.any(norms > guard):
                    return swapped, r0 + r
    return swapped, -1


def sdca_epoch(x_indptr, x_indices, x_data, y, sqnorm, alpha, w, order, mu_n):
    """One pass of dual coordinate ascent for the hinge-loss SVM, in place.

    Maintains ``w = sum_i alpha_i y_i x_i / (mu N)`` with ``mu_n = mu * N``
    and each ``alpha_i`` in [0, 1].
    """
    for i in order:
        if sqnorm[i] == 0.0:
            alpha[i] = 1.0
            continue
        lo, hi = x_indptr[i], x_indptr[i + 1]
        idx = x_indices[lo:hi]
        val = x_data[lo:hi]
        a_new = alpha[i] + (1.0 - y[i] * (w[idx] @ val)) * mu_n / sqnorm[i]
        a_new = min(1.0, max(0.0, a_new))
        delta = a_new - alpha[i]
        if delta != 0.0:
            alpha[i] = a_new
            w[idx] += (delta * y[i] / mu_n) * val
