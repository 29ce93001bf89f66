"""Independent pure-Python reference computations.

Nothing here calls into ``ycda``; every quantity is spelled out with scalar
loops so it can serve as a check on the vectorised code.
"""

import math


def naive_depthwise_conv(f, kernels, bias, multiplier):
    """Direct zero-padded depthwise cross-correlation, one scalar at a time.

    ``f``: nested lists / array ``[C][H][W]``; ``kernels``: ``[C*m][k][k]``.
    """
    c_in = len(f)
    h, w = len(f[0]), len(f[0][0])
    k = len(kernels[0])
    pad = k // 2
    out = []
    for j in range(c_in * multiplier):
        src = f[j // multiplier]
        plane = []
        for y in range(h):
            row = []
            for x in range(w):
                acc = float(bias[j])
                for p in range(k):
                    for q in range(k):
                        yy, xx = y + p - pad, x + q - pad
                        if 0 <= yy < h and 0 <= xx < w:
                            acc += float(kernels[j][p][q]) * float(src[yy][xx])
                row.append(acc)
            plane.append(row)
        out.append(plane)
    return out


def _sigmoid(v):
    return 1.0 / (1.0 + math.exp(-v)) if v >= 0 else math.exp(v) / (1.0 + math.exp(v))


def naive_ica(f, fuse_w, fuse_b, w1, b1, w2, b2, variant="ica"):
    """Channel attention written out line by line.

    Returns ``(out, alpha)`` as nested lists.
    """
    c = len(f)
    h, w = len(f[0]), len(f[0][0])
    n = h * w
    means, variances = [], []
    for ch in range(c):
        total = 0.0
        for y in range(h):
            for x in range(w):
                total += float(f[ch][y][x])
        mu = total / n
        sq = 0.0
        for y in range(h):
            for x in range(w):
                d = float(f[ch][y][x]) - mu
                sq += d * d
        means.append(mu)
        variances.append(sq / n)
    if variant == "ica":
        desc = means + variances
    elif variant == "gap_only":
        desc = means + means
    else:
        desc = variances + variances
    z = []
    for i in range(c):
        acc = float(fuse_b[i])
        for j in range(2 * c):
            acc += float(fuse_w[i][j]) * desc[j]
        z.append(acc)
    hidden = []
    for i in range(len(w1)):
        acc = float(b1[i]) if b1 is not None else 0.0
        for j in range(c):
            acc += float(w1[i][j]) * z[j]
        hidden.append(acc if acc > 0 else 0.0)
    alpha = []
    for i in range(c):
        acc = float(b2[i]) if b2 is not None else 0.0
        for j in range(len(hidden)):
            acc += float(w2[i][j]) * hidden[j]
        alpha.append(_sigmoid(acc))
    out = [[[alpha[ch] * float(f[ch][y][x]) for x in range(w)] for y in range(h)] for ch in range(c)]
    return out, alpha


def central_difference(fn, x, i, eps):
    """``(fn(x + eps e_i) - fn(x - eps e_i)) / (2 eps)`` on a flat list copy."""
    plus = list(x)
    minus = list(x)
    plus[i] += eps
    minus[i] -= eps
    return (fn(plus) - fn(minus)) / (2.0 * eps)
