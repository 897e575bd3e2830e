"""Jitted event loop for the continuous-time market simulator.

Everything here is numba nopython code. The RNG is an explicit
xoshiro256** state vector seeded through splitmix64, so runs are
bit-for-bit reproducible for a given seed and safe to run on worker
threads (no shared global generator).

State per good is the pair (available, sold_present): sold items keep
their perish clock running, so the aggregate perish rate of a good is
(available + sold_present) * mu and the perishing item is available
with probability available / (available + sold_present). That aggregate
chain has the same law as tracking every item clock separately.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U5 = np.uint64(5)
_U7 = np.uint64(7)
_U9 = np.uint64(9)
_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U19 = np.uint64(19)
_U27 = np.uint64(27)
_U30 = np.uint64(30)
_U31 = np.uint64(31)
_U45 = np.uint64(45)
_U57 = np.uint64(57)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, nogil=True)
def _seed_state(seed):
    state = np.empty(4, np.uint64)
    x = np.uint64(seed)
    for i in range(4):
        x = x + _GOLDEN
        z = x
        z = (z ^ (z >> _U30)) * _MIX1
        z = (z ^ (z >> _U27)) * _MIX2
        state[i] = z ^ (z >> _U31)
    if state[0] == 0 and state[1] == 0 and state[2] == 0 and state[3] == 0:
        state[0] = np.uint64(1)
    return state


@njit(cache=True, nogil=True)
def _next_u64(state):
    tmp = state[1] * _U5
    result = ((tmp << _U7) | (tmp >> _U57)) * _U9
    t = state[1] << _U17
    state[2] ^= state[0]
    state[3] ^= state[1]
    state[1] ^= state[2]
    state[0] ^= state[3]
    state[2] ^= t
    state[3] = (state[3] << _U45) | (state[3] >> _U19)
    return result


@njit(cache=True, nogil=True)
def _unif(state):
    return (_next_u64(state) >> _U11) * _INV53


@njit(cache=True, nogil=True)
def market_kernel(seed, lam, mu, gamma, p, capacity, horizon, burn_in, nb,
                  time_avail, seen, arrivals, type_arrivals, sales,
                  reach_avail, tilde_reach, discards, perish_unsold):
    """Run one trajectory and accumulate per-batch statistics in place.

    capacity < 0 means unbounded. The measurement window is
    [burn_in, burn_in + horizon), split into nb equal batches; events
    and occupancy before burn_in update the state but not the counters.

    Per buyer arrival, a fresh uniform permutation of goods and one
    permit coin per good are always drawn (even for goods after a
    purchase), so the recorded reach events have their stationary law.
    tilde_reach[b, i, j] counts type-j arrivals where no good earlier in
    the permutation was simultaneously available and permitted;
    reach_avail[b, i, j] counts arrivals that reach good i unmatched
    while it is available.
    """
    n = lam.shape[0]
    m = gamma.shape[0]
    state = _seed_state(seed)
    avail = np.zeros(n, np.int64)
    sold = np.zeros(n, np.int64)
    perm = np.empty(n, np.int64)
    permit = np.empty(n, np.bool_)
    lam_sum = 0.0
    for i in range(n):
        lam_sum += lam[i]
    gam_sum = 0.0
    for j in range(m):
        gam_sum += gamma[j]
    t_end = burn_in + horizon
    batch_len = horizon / nb
    t = 0.0

    while True:
        perish_tot = 0.0
        for i in range(n):
            perish_tot += (avail[i] + sold[i]) * mu[i]
        total = lam_sum + gam_sum + perish_tot
        t_next = t - np.log1p(-_unif(state)) / total
        stop = t_next >= t_end
        hi = t_end if stop else t_next
        # occupancy of {avail >= 1} over [t, hi), clipped to the window
        lo = t if t > burn_in else burn_in
        if hi > lo:
            b0 = int((lo - burn_in) / batch_len)
            b1 = int((hi - burn_in) / batch_len)
            if b0 >= nb:
                b0 = nb - 1
            if b1 >= nb:
                b1 = nb - 1
            for bb in range(b0, b1 + 1):
                s = burn_in + bb * batch_len
                e = burn_in + (bb + 1) * batch_len
                if lo > s:
                    s = lo
                if hi < e:
                    e = hi
                if e > s:
                    for i in range(n):
                        if avail[i] >= 1:
                            time_avail[bb, i] += e - s
        if stop:
            break
        t = t_next
        measure = t >= burn_in
        bi = 0
        if measure:
            bi = int((t - burn_in) / batch_len)
            if bi >= nb:
                bi = nb - 1

        u = _unif(state) * total
        acc = 0.0
        handled = False
        for i in range(n):
            acc += lam[i]
            if u < acc:
                if capacity >= 0 and avail[i] >= capacity:
                    if measure:
                        discards[bi, i] += 1.0
                else:
                    avail[i] += 1
                handled = True
                break
        if handled:
            continue
        for j in range(m):
            acc += gamma[j]
            if u < acc:
                if measure:
                    arrivals[bi] += 1.0
                    type_arrivals[bi, j] += 1.0
                    for i in range(n):
                        if avail[i] >= 1:
                            seen[bi, i] += 1.0
                for i in range(n):
                    perm[i] = i
                for k in range(n - 1, 0, -1):
                    r = int(_next_u64(state) % np.uint64(k + 1))
                    swap = perm[k]
                    perm[k] = perm[r]
                    perm[r] = swap
                for i in range(n):
                    permit[i] = _unif(state) < p[i, j]
                matched = False
                blocked = False
                for k in range(n):
                    i = perm[k]
                    present = avail[i] >= 1
                    if measure:
                        if not blocked:
                            tilde_reach[bi, i, j] += 1.0
                        if (not matched) and present:
                            reach_avail[bi, i, j] += 1.0
                    if (not matched) and present and permit[i]:
                        avail[i] -= 1
                        sold[i] += 1
                        if measure:
                            sales[bi, i, j] += 1.0
                        matched = True
                    if present and permit[i]:
                        blocked = True
                handled = True
                break
        if handled:
            continue
        for i in range(n):
            acc += (avail[i] + sold[i]) * mu[i]
            if u < acc:
                r = _next_u64(state) % np.uint64(avail[i] + sold[i])
                if int(r) < avail[i]:
                    avail[i] -= 1
                    if measure:
                        perish_unsold[bi, i] += 1.0
                else:
                    sold[i] -= 1
                handled = True
                break
        # u can land past the last cumulative weight by a rounding ulp;
        # treat that as a null event and move on
