"""Hot numeric kernels: LSTM + dense forward and backprop-through-time.

Written in a numba-compilable numpy subset; `goalimpact.kernels` compiles
these with @njit when the numba backend is active and uses them as plain
numpy otherwise. Every function here must stay self-contained (no calls
into other Python functions) so both paths share one source of truth.

Conventions:
  * windows are time-major: x[T, B, I], C-contiguous
  * trace lengths tl[B] are sorted descending; member b consumes
    x[0 .. tl[b]-1, b] from a zero initial state
  * gate blocks along the last weight axis: input, forget, candidate,
    output (each of width H); w_gates has shape [I+H, 4H]
  * dense layers use relu with derivative 0 at exactly 0
  * float64 throughout
"""

import numpy as np


def active_counts(tl, t_max):
    """ks[t] = number of batch members with tl > t (tl sorted descending)."""
    b_total = tl.shape[0]
    ks = np.zeros(t_max, dtype=np.int64)
    for t in range(t_max):
        k = 0
        for b in range(b_total):
            if tl[b] > t:
                k += 1
            else:
                break
        ks[t] = k
    return ks


def lstm_forward_cached(wg, bg, w1, b1, w2, b2, wo, bo, x, tl):
    """Full forward pass keeping every activation for backprop.

    Returns (probs, h_last, a1, a2, zs, gates, cs, tcs, hs).
    """
    t_max, b_total, n_in = x.shape
    hidden = wg.shape[1] // 4

    zs = np.zeros((t_max, b_total, n_in + hidden))
    gates = np.zeros((t_max, b_total, 4 * hidden))
    cs = np.zeros((t_max, b_total, hidden))
    tcs = np.zeros((t_max, b_total, hidden))
    hs = np.zeros((t_max, b_total, hidden))

    for t in range(t_max):
        k = 0
        for b in range(b_total):
            if tl[b] > t:
                k += 1
            else:
                break
        if k == 0:
            break
        z = zs[t, :k]
        z[:, :n_in] = x[t, :k]
        if t > 0:
            z[:, n_in:] = hs[t - 1, :k]
        a = np.dot(z, wg) + bg
        gi = 1.0 / (1.0 + np.exp(-a[:, :hidden]))
        gf = 1.0 / (1.0 + np.exp(-a[:, hidden:2 * hidden]))
        gg = np.tanh(a[:, 2 * hidden:3 * hidden])
        go = 1.0 / (1.0 + np.exp(-a[:, 3 * hidden:]))
        gates[t, :k, :hidden] = gi
        gates[t, :k, hidden:2 * hidden] = gf
        gates[t, :k, 2 * hidden:3 * hidden] = gg
        gates[t, :k, 3 * hidden:] = go
        if t > 0:
            c = gf * cs[t - 1, :k] + gi * gg
        else:
            c = gi * gg
        tc = np.tanh(c)
        cs[t, :k] = c
        tcs[t, :k] = tc
        hs[t, :k] = go * tc

    h_last = np.empty((b_total, hidden))
    for b in range(b_total):
        h_last[b] = hs[tl[b] - 1, b]

    a1 = np.dot(h_last, w1) + b1
    a1 = a1 * (a1 > 0.0)
    a2 = np.dot(a1, w2) + b2
    a2 = a2 * (a2 > 0.0)
    logits = np.dot(a2, wo) + bo

    probs = np.empty((b_total, 3))
    for b in range(b_total):
        m = logits[b, 0]
        for j in range(1, 3):
            if logits[b, j] > m:
                m = logits[b, j]
        s = 0.0
        for j in range(3):
            probs[b, j] = np.exp(logits[b, j] - m)
            s += probs[b, j]
        for j in range(3):
            probs[b, j] /= s

    return probs, h_last, a1, a2, zs, gates, cs, tcs, hs


def lstm_forward_probs(wg, bg, w1, b1, w2, b2, wo, bo, x, tl):
    """Cache-free forward pass (evaluation path). Returns probs [B, 3]."""
    t_max, b_total, n_in = x.shape
    hidden = wg.shape[1] // 4

    h = np.zeros((b_total, hidden))
    c = np.zeros((b_total, hidden))
    for t in range(t_max):
        k = 0
        for b in range(b_total):
            if tl[b] > t:
                k += 1
            else:
                break
        if k == 0:
            break
        z = np.empty((k, n_in + hidden))
        z[:, :n_in] = x[t, :k]
        z[:, n_in:] = h[:k]
        a = np.dot(z, wg) + bg
        gi = 1.0 / (1.0 + np.exp(-a[:, :hidden]))
        gf = 1.0 / (1.0 + np.exp(-a[:, hidden:2 * hidden]))
        gg = np.tanh(a[:, 2 * hidden:3 * hidden])
        go = 1.0 / (1.0 + np.exp(-a[:, 3 * hidden:]))
        c[:k] = gf * c[:k] + gi * gg
        h[:k] = go * np.tanh(c[:k])

    a1 = np.dot(h, w1) + b1
    a1 = a1 * (a1 > 0.0)
    a2 = np.dot(a1, w2) + b2
    a2 = a2 * (a2 > 0.0)
    logits = np.dot(a2, wo) + bo

    probs = np.empty((b_total, 3))
    for b in range(b_total):
        m = logits[b, 0]
        for j in range(1, 3):
            if logits[b, j] > m:
                m = logits[b, j]
        s = 0.0
        for j in range(3):
            probs[b, j] = np.exp(logits[b, j] - m)
            s += probs[b, j]
        for j in range(3):
            probs[b, j] /= s
    return probs


def lstm_backward(wg, bg, w1, b1, w2, b2, wo, bo, tl, dprobs,
                  probs, h_last, a1, a2, zs, gates, cs, tcs, hs):
    """Exact reverse-mode gradients for a cached forward pass.

    dprobs is the upstream gradient on the 3 output probabilities; the
    softmax Jacobian is applied here. Returns gradients in parameter order
    (dwg, dbg, dw1, db1, dw2, db2, dwo, dbo).
    """
    t_max = zs.shape[0]
    b_total = zs.shape[1]
    hidden = wg.shape[1] // 4
    n_in = zs.shape[2] - hidden

    dlogits = np.empty((b_total, 3))
    for b in range(b_total):
        s = 0.0
        for j in range(3):
            s += dprobs[b, j] * probs[b, j]
        for j in range(3):
            dlogits[b, j] = probs[b, j] * (dprobs[b, j] - s)

    dwo = np.dot(a2.T, dlogits)
    dbo = np.zeros(3)
    for b in range(b_total):
        for j in range(3):
            dbo[j] += dlogits[b, j]

    da2 = np.dot(dlogits, wo.T) * (a2 > 0.0)
    dw2 = np.dot(a1.T, da2)
    db2 = np.zeros(w2.shape[1])
    for b in range(b_total):
        for j in range(w2.shape[1]):
            db2[j] += da2[b, j]

    da1 = np.dot(da2, w2.T) * (a1 > 0.0)
    dw1 = np.dot(h_last.T, da1)
    db1 = np.zeros(w1.shape[1])
    for b in range(b_total):
        for j in range(w1.shape[1]):
            db1[j] += da1[b, j]

    dh_last = np.dot(da1, w1.T)

    dhs = np.zeros((t_max, b_total, hidden))
    for b in range(b_total):
        dhs[tl[b] - 1, b] = dh_last[b]

    dwg = np.zeros(wg.shape)
    dbg = np.zeros(bg.shape)
    dc = np.zeros((b_total, hidden))

    for t in range(t_max - 1, -1, -1):
        k = 0
        for b in range(b_total):
            if tl[b] > t:
                k += 1
            else:
                break
        if k == 0:
            continue
        gi = gates[t, :k, :hidden]
        gf = gates[t, :k, hidden:2 * hidden]
        gg = gates[t, :k, 2 * hidden:3 * hidden]
        go = gates[t, :k, 3 * hidden:]
        tc = tcs[t, :k]
        dh = dhs[t, :k]

        do = dh * tc
        dct = dc[:k] + dh * go * (1.0 - tc * tc)
        di = dct * gg
        dg = dct * gi

        da = np.empty((k, 4 * hidden))
        da[:, :hidden] = di * gi * (1.0 - gi)
        if t > 0:
            df = dct * cs[t - 1, :k]
            da[:, hidden:2 * hidden] = df * gf * (1.0 - gf)
        else:
            da[:, hidden:2 * hidden] = 0.0
        da[:, 2 * hidden:3 * hidden] = dg * (1.0 - gg * gg)
        da[:, 3 * hidden:] = do * go * (1.0 - go)

        z = zs[t, :k]
        dwg += np.dot(z.T, da)
        for b in range(k):
            for j in range(4 * hidden):
                dbg[j] += da[b, j]
        dz = np.dot(da, wg.T)
        if t > 0:
            dhs[t - 1, :k] += dz[:, n_in:]
        dc[:k] = dct * gf

    return dwg, dbg, dw1, db1, dw2, db2, dwo, dbo
