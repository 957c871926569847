"""Compiled inner loops. All kernels release the GIL."""

import numba as nb
import numpy as np

_jit = nb.njit(cache=True, nogil=True)


@_jit
def renewal_kernel(q, N, cap):
    """u(n) = sum_{j=1}^{min(n, cap, M)} q[j-1] u(n-j), u(0) = 1."""
    c = min(cap, q.size)
    u = np.empty(N + 1)
    u[0] = 1.0
    for n in range(1, N + 1):
        jmax = min(n, c)
        s = 0.0
        for j in range(1, jmax + 1):
            s += q[j - 1] * u[n - j]
        u[n] = s
    return u


@_jit
def pinned_kernel(rng, q, u, N, out):
    """Backward sampling of a composition of N; fills ``out`` and returns its length.

    The running sum walks j in the same order as ``renewal_kernel``, so it
    reaches u[rem] bit-for-bit and a draw is always found.
    """
    rem = N
    k = 0
    M = q.size
    while rem > 0:
        target = rng.random() * u[rem]
        jmax = min(rem, M)
        acc = 0.0
        pick = 0
        last = 0
        for j in range(1, jmax + 1):
            w = q[j - 1] * u[rem - j]
            if w > 0.0:
                last = j
            acc += w
            if acc > target:
                pick = j
                break
        if pick == 0:
            pick = last
        out[k] = pick
        k += 1
        rem -= pick
    return k


@_jit
def alias_draw(rng, prob, alias):
    M = prob.size
    i = int(rng.random() * M)
    if i >= M:
        i = M - 1
    if rng.random() < prob[i]:
        return i + 1
    return alias[i] + 1


@_jit
def free_kernel(rng, prob, alias, N, out):
    """Draw lengths until their sum first reaches N; returns the count."""
    total = 0
    k = 0
    while total < N:
        t = alias_draw(rng, prob, alias)
        out[k] = t
        k += 1
        total += t
    return k


@_jit
def overshoot_kernel(rng, prob, alias, i, j, steps, counts):
    """Run the (length, residual) chain; tallies ``counts[i-1]`` at every visit to j = 0."""
    zero_visits = 0
    for _ in range(steps):
        if j >= 1:
            j -= 1
        else:
            i = alias_draw(rng, prob, alias)
            j = i - 1
        if j == 0:
            zero_visits += 1
            counts[i - 1] += 1
    return i, j, zero_visits
