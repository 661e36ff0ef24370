"""Pure-Python reassignment sweeps.

Same signatures and arithmetic as the compiled ``_sweep`` extension; used when
the extension is not built or ``DPGLS_PURE_PYTHON`` is set. Arrays are
mutated in place and the new number of groups is returned.
"""

import math

LOG_2PI = math.log(2.0 * math.pi)


def _drop_group(c, K, assign, values, counts):
    last = K - 1
    if c != last:
        values[c] = values[last]
        counts[c] = counts[last]
        assign[assign == last] = c
    counts[last] = 0
    return last


def sweep_scalar(e, assign, values, counts, K, alpha, a, b, u, g):
    n = e.shape[0]
    log_alpha = math.log(alpha)
    new_const = math.lgamma(a + 0.5) - math.lgamma(a) - 0.5 * math.log(2.0 * b * math.pi)
    lw = [0.0] * (n + 1)
    for i in range(n):
        c = int(assign[i])
        counts[c] -= 1
        if counts[c] == 0:
            K = _drop_group(c, K, assign, values, counts)
        ei = float(e[i])
        e2 = ei * ei
        top = -math.inf
        for k in range(K):
            v = float(values[k])
            w = math.log(counts[k]) - 0.5 * (LOG_2PI + math.log(v)) - 0.5 * e2 / v
            lw[k] = w
            if w > top:
                top = w
        w = log_alpha + new_const - (a + 0.5) * math.log1p(e2 / (2.0 * b))
        lw[K] = w
        if w > top:
            top = w
        total = 0.0
        for k in range(K + 1):
            lw[k] = math.exp(lw[k] - top)
            total += lw[k]
        target = float(u[i]) * total
        acc = 0.0
        pick = K
        for k in range(K + 1):
            acc += lw[k]
            if target < acc:
                pick = k
                break
        if pick == K:
            values[K] = (b + 0.5 * e2) / float(g[i])
            counts[K] = 0
            K += 1
        assign[i] = pick
        counts[pick] += 1
    return K


def _chol_small(m, q):
    L = [[0.0] * q for _ in range(q)]
    for j in range(q):
        s = m[j][j]
        for p in range(j):
            s -= L[j][p] * L[j][p]
        if not s > 0.0:
            raise ArithmeticError("non positive pivot in new-group covariance")
        L[j][j] = math.sqrt(s)
        for r in range(j + 1, q):
            s = m[r][j]
            for p in range(j):
                s -= L[r][p] * L[j][p]
            L[r][j] = s / L[j][j]
    return L


def _forward(L, x, q):
    z = [0.0] * q
    for r in range(q):
        s = x[r]
        for p in range(r):
            s -= L[r][p] * z[p]
        z[r] = s / L[r][r]
    return z


def sweep_matrix(E, assign, chols, halflogdet, counts, K, alpha, nu, W, W_chol, A, u):
    n, q = E.shape[0], E.shape[1]
    log_alpha = math.log(alpha)
    Wl = [[float(W_chol[r, c]) for c in range(q)] for r in range(q)]
    Wm = [[float(W[r, c]) for c in range(q)] for r in range(q)]
    w_half = sum(math.log(Wl[j][j]) for j in range(q))
    new_const = (math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * (nu - q + 1.0))
                 - 0.5 * q * math.log(math.pi) - w_half)
    lw = [0.0] * (n + 1)
    for i in range(n):
        c = int(assign[i])
        counts[c] -= 1
        if counts[c] == 0:
            last = K - 1
            if c != last:
                chols[c] = chols[last]
                halflogdet[c] = halflogdet[last]
                counts[c] = counts[last]
                assign[assign == last] = c
            counts[last] = 0
            K = last
        ei = [float(E[i, r]) for r in range(q)]
        top = -math.inf
        for k in range(K):
            Lk = chols[k]
            z = [0.0] * q
            quad = 0.0
            for r in range(q):
                s = ei[r]
                for p in range(r):
                    s -= Lk[r, p] * z[p]
                z[r] = s / Lk[r, r]
                quad += z[r] * z[r]
            w = (math.log(counts[k]) - 0.5 * q * LOG_2PI - halflogdet[k] - 0.5 * quad)
            lw[k] = w
            if w > top:
                top = w
        zw = _forward(Wl, ei, q)
        quad = sum(v * v for v in zw)
        w = log_alpha + new_const - 0.5 * (nu + 1.0) * math.log1p(quad)
        lw[K] = w
        if w > top:
            top = w
        total = 0.0
        for k in range(K + 1):
            lw[k] = math.exp(lw[k] - top)
            total += lw[k]
        target = float(u[i]) * total
        acc = 0.0
        pick = K
        for k in range(K + 1):
            acc += lw[k]
            if target < acc:
                pick = k
                break
        if pick == K:
            # IW(nu + 1, W + e e'): with Psi = C C', draw = (C A^-T)(C A^-T)'
            psi = [[Wm[r][s] + ei[r] * ei[s] for s in range(q)] for r in range(q)]
            C = _chol_small(psi, q)
            Ai = [[float(A[i, r, s]) for s in range(q)] for r in range(q)]
            B = [_forward(Ai, C[r], q) for r in range(q)]
            sig = [[sum(B[r][p] * B[s][p] for p in range(q)) for s in range(q)] for r in range(q)]
            Ls = _chol_small(sig, q)
            for r in range(q):
                for s in range(q):
                    chols[K, r, s] = Ls[r][s]
            halflogdet[K] = sum(math.log(Ls[j][j]) for j in range(q))
            counts[K] = 0
            K += 1
        assign[i] = pick
        counts[pick] += 1
    return K
