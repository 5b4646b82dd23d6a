"""Pure-Python versions of the kernels in ``_kernels.pyx``.

Used when the extension is not built (or ``RPS_PURE_PYTHON=1``). The loops
follow the compiled code step for step so both backends return identical
arrays.
"""

import bisect
import math

import numpy as np


def _search(cum, x, last):
    j = bisect.bisect_right(cum, x)
    return last if j >= len(cum) else j


def walks_first_order(cum, last, starts, uniforms, out):
    cum_rows = cum.tolist()
    last = last.tolist()
    u = uniforms.tolist()
    n_walks, length = out.shape
    for w in range(n_walks):
        cur = int(starts[w])
        row = [cur]
        uw = u[w]
        for s in range(1, length):
            c = cum_rows[cur]
            cur = _search(c, uw[s - 1] * c[-1], last[cur])
            row.append(cur)
        out[w] = row


def walks_second_order(weights, cum, last, starts, uniforms, inv_p, inv_q, out):
    wts = weights.tolist()
    cum_rows = cum.tolist()
    last = last.tolist()
    u = uniforms.tolist()
    n = len(wts)
    n_walks, length = out.shape
    for w in range(n_walks):
        cur = int(starts[w])
        row = [cur]
        uw = u[w]
        if length > 1:
            prev = cur
            c = cum_rows[cur]
            cur = _search(c, uw[0] * c[-1], last[cur])
            row.append(cur)
        for s in range(2, length):
            acc = 0.0
            buf = [0.0] * n
            wc, wp = wts[cur], wts[prev]
            for x in range(n):
                b = wc[x]
                if x == prev:
                    b = b * inv_p
                elif wp[x] <= 0.0:
                    b = b * inv_q
                acc = acc + b
                buf[x] = acc
            prev = cur
            cur = _search(buf, uw[s - 1] * acc, last[cur])
            row.append(cur)
        out[w] = row


def sgns_epoch(walks, w_in, w_out, negatives, window, n_neg, lr0, start, total):
    tied = w_out is w_in
    wi = w_in.tolist()
    wo = wi if tied else w_out.tolist()
    negs = negatives.tolist()
    dim = w_in.shape[1]
    dims = range(dim)
    p = 0
    exp = math.exp
    for walk in walks.tolist():
        length = len(walk)
        for i in range(length):
            center = walk[i]
            h = wi[center]
            for j in range(max(0, i - window), min(length - 1, i + window) + 1):
                if j == i:
                    continue
                context = walk[j]
                frac = 1.0 - (start + p) / total
                if frac < 1e-4:
                    frac = 1e-4
                lr = lr0 * frac
                neu = [0.0] * dim
                base = p * n_neg
                targets = [(context, 1.0)]
                for t in range(n_neg):
                    target = negs[base + t]
                    if target != context:
                        targets.append((target, 0.0))
                for target, label in targets:
                    v = wo[target]
                    f = 0.0
                    for k in dims:
                        f = f + h[k] * v[k]
                    if f > 30.0:
                        f = 30.0
                    elif f < -30.0:
                        f = -30.0
                    g = (label - 1.0 / (1.0 + exp(-f))) * lr
                    for k in dims:
                        neu[k] = neu[k] + g * v[k]
                        v[k] = v[k] + g * h[k]
                for k in dims:
                    h[k] = h[k] + neu[k]
                p += 1
    w_in[...] = np.array(wi, dtype=float).reshape(w_in.shape)
    if not tied:
        w_out[...] = np.array(wo, dtype=float).reshape(w_out.shape)
    return p
