# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Array-state twin of the pure engine's round loop.

Same emit / deliver / consume discipline, same RNG, same stop and cap
rules, but node state lives in flat arrays and the hot loop is C.  Must
stay bit-identical to the pure engine; the parity tests hold it to that.
"""

import numpy as np

from libc.stdint cimport int8_t, int32_t, int64_t, uint8_t, uint64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15u

# lifecycle codes (match protocols.Lifecycle)
cdef enum:
    ASLEEP = 0
    WAKE_BEEP = 1
    WAKE_SENT = 2
    WAITING = 3
    RUNNING = 4
    DONE = 5

# terminal codes (match graphs.Status)
cdef enum:
    NEVER_WOKE = 0
    IN_MIS = 1
    INACTIVE = 2
    FAILED = 3

# protocol kinds
cdef enum:
    K_ALGO1 = 0
    K_NOCD = 1
    K_ALGO2 = 2


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z ^= z >> 30
    z *= 0xBF58476D1CE4E5B9u
    z ^= z >> 27
    z *= 0x94D049BB133111EBu
    z ^= z >> 31
    return z


cdef inline uint64_t next_u64(uint64_t* state) noexcept nogil:
    state[0] += GOLDEN
    return mix64(state[0])


cdef inline int coin_heads(uint64_t* state, int i, int L) noexcept nogil:
    # heads iff draw < 2^(64+i-L); one draw regardless of outcome
    cdef uint64_t draw = next_u64(state)
    cdef int shift
    if i >= L:
        return 1
    shift = 64 + i - L
    if shift < 0:
        return 0
    return draw < ((<uint64_t>1) << shift)


def run(int kind, indptr_obj, indices_obj, spont_obj, seed_obj,
        int L, int S, int W, int LN, int beep_only, cap_obj):
    """Simulate one run; returns (status, wake, exit, algo_beeps,
    wake_beeps, total_rounds, cap_hit) with the engine's array dtypes."""
    cdef const int64_t[::1] indptr = indptr_obj
    cdef const int32_t[::1] indices = indices_obj
    cdef uint64_t seed = <uint64_t>seed_obj
    cdef int64_t round_cap = <int64_t>cap_obj
    cdef Py_ssize_t n = indptr.shape[0] - 1

    spont_np = np.ascontiguousarray(spont_obj, dtype=np.int64)
    nodes = np.flatnonzero(spont_np >= 0)
    order_np = nodes[np.argsort(spont_np[nodes], kind="stable")].astype(np.int64)
    rounds_np = np.ascontiguousarray(spont_np[order_np])
    cdef const int64_t[::1] order = order_np
    cdef const int64_t[::1] rounds = rounds_np
    cdef Py_ssize_t n_order = order.shape[0]

    status_np = np.zeros(n, dtype=np.int8)
    wake_np = np.full(n, -1, dtype=np.int64)
    exit_np = np.full(n, -1, dtype=np.int64)
    abeeps_np = np.zeros(n, dtype=np.int64)
    wbeeps_np = np.zeros(n, dtype=np.int64)
    cdef int8_t[::1] status = status_np
    cdef int64_t[::1] wake = wake_np
    cdef int64_t[::1] exitr = exit_np
    cdef int64_t[::1] abeeps = abeeps_np
    cdef int64_t[::1] wbeeps = wbeeps_np

    cdef int8_t[::1] lifecycle = np.zeros(n, dtype=np.int8)
    cdef int32_t[::1] phase = np.zeros(n, dtype=np.int32)
    cdef int32_t[::1] step = np.zeros(n, dtype=np.int32)
    cdef int32_t[::1] pos = np.zeros(n, dtype=np.int32)
    cdef uint8_t[::1] vflag = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] heardex = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] suppressed = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] coin = np.zeros(n, dtype=np.uint8)
    cdef uint64_t[::1] rng = np.empty(n, dtype=np.uint64)

    cdef Py_ssize_t slot_w = W if W > 0 else 1
    cdef uint8_t[:, ::1] slots = np.zeros((n if kind == K_NOCD else 1, slot_w),
                                          dtype=np.uint8)
    cdef int32_t[::1] perm = np.empty(slot_w, dtype=np.int32)
    cdef int half = W // 2

    cdef int32_t[::1] active = np.empty(n, dtype=np.int32)
    cdef int32_t[::1] beepers = np.empty(n, dtype=np.int32)
    cdef int32_t[::1] touched = np.empty(n, dtype=np.int32)
    cdef uint8_t[::1] heard = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[::1] beeped = np.zeros(n, dtype=np.uint8)

    cdef Py_ssize_t n_active = 0, n_beep = 0, n_touch = 0, sp = 0
    cdef Py_ssize_t k, m, e, old_active
    cdef int64_t t = 0, total = 0
    cdef int cap_hit = 0, beep, h, heads, p, lc, x, tt, j
    cdef int32_t v, u, w
    cdef uint64_t st

    for k in range(n):
        st = seed + GOLDEN * (<uint64_t>k + 1u)
        rng[k] = mix64(mix64(st))

    while True:
        while sp < n_order and lifecycle[order[sp]] != ASLEEP:
            sp += 1
        if n_active == 0:
            if sp == n_order:
                break
            if rounds[sp] > t:
                t = rounds[sp]
        if t >= round_cap:
            cap_hit = 1
            for k in range(n_active):
                status[active[k]] = FAILED
            total = round_cap
            break

        # ---- emit ----
        n_beep = 0
        old_active = n_active
        for k in range(old_active):
            v = active[k]
            lc = lifecycle[v]
            beep = 0
            if lc == WAKE_BEEP:
                lifecycle[v] = WAKE_SENT
                wbeeps[v] += 1
                beep = 1
            elif lc == RUNNING:
                p = pos[v]
                if kind == K_NOCD:
                    if p == 0:
                        vflag[v] = 0
                        suppressed[v] = 0
                        coin[v] = 0
                    elif p == 1:
                        heads = coin_heads(&rng[v], phase[v], L)
                        coin[v] = <uint8_t>heads
                        if heads:
                            vflag[v] = 1
                            for x in range(W):
                                slots[v, x] = 0
                                perm[x] = x
                            for tt in range(half):
                                j = tt + <int>(next_u64(&rng[v]) % <uint64_t>(W - tt))
                                x = perm[tt]
                                perm[tt] = perm[j]
                                perm[j] = x
                                slots[v, perm[tt]] = 1
                    elif 2 <= p <= W + 1:
                        if coin[v] and not suppressed[v] and slots[v, p - 2]:
                            abeeps[v] += 1
                            beep = 1
                    elif p == W + 4 and vflag[v]:
                        abeeps[v] += 1
                        beep = 1
                else:
                    if p == 0:
                        vflag[v] = 0
                        heardex[v] = 0
                    elif p == 1:
                        if kind == K_ALGO1:
                            heads = coin_heads(&rng[v], phase[v], L)
                        else:
                            heads = coin_heads(&rng[v], step[v], LN)
                        if heads:
                            vflag[v] = 1
                            abeeps[v] += 1
                            beep = 1
                    elif p == 3:
                        heardex[v] = 0
                    elif p == 4 and vflag[v]:
                        abeeps[v] += 1
                        beep = 1
            if beep:
                beepers[n_beep] = v
                n_beep += 1
                beeped[v] = 1

        while sp < n_order and rounds[sp] == t:
            v = <int32_t>order[sp]
            sp += 1
            if lifecycle[v] == ASLEEP:
                lifecycle[v] = WAKE_SENT
                wake[v] = t
                wbeeps[v] += 1
                beepers[n_beep] = v
                n_beep += 1
                beeped[v] = 1
                active[n_active] = v
                n_active += 1

        # ---- deliver ----
        n_touch = 0
        for k in range(n_beep):
            u = beepers[k]
            for e in range(indptr[u], indptr[u + 1]):
                w = indices[e]
                if not heard[w]:
                    heard[w] = 1
                    touched[n_touch] = w
                    n_touch += 1

        # ---- consume ----
        m = 0
        for k in range(n_active):
            v = active[k]
            h = heard[v]
            if beep_only and beeped[v]:
                h = 0
            lc = lifecycle[v]
            if lc == WAKE_SENT:
                lifecycle[v] = WAITING
            elif lc == WAITING:
                lifecycle[v] = RUNNING
                pos[v] = 0
            else:  # RUNNING
                p = pos[v]
                if kind == K_NOCD:
                    if p <= W + 2:
                        if h:
                            vflag[v] = 0
                            suppressed[v] = 1
                        pos[v] = p + 1
                    elif p == W + 4 and vflag[v]:
                        status[v] = IN_MIS
                        lifecycle[v] = DONE
                        exitr[v] = t
                    elif h:
                        status[v] = INACTIVE
                        lifecycle[v] = DONE
                        exitr[v] = t
                    elif p == W + 5:
                        step[v] += 1
                        if step[v] >= S:
                            step[v] = 0
                            phase[v] += 1
                        if phase[v] > L:
                            status[v] = FAILED
                            lifecycle[v] = DONE
                            exitr[v] = t
                        else:
                            pos[v] = 0
                    else:
                        pos[v] = p + 1
                else:
                    if p <= 2:
                        if h:
                            heardex[v] = 1
                        if p == 2 and heardex[v]:
                            vflag[v] = 0
                        pos[v] = p + 1
                    elif p == 4 and vflag[v]:
                        status[v] = IN_MIS
                        lifecycle[v] = DONE
                        exitr[v] = t
                    elif h:
                        status[v] = INACTIVE
                        lifecycle[v] = DONE
                        exitr[v] = t
                    elif p == 5:
                        step[v] += 1
                        if kind == K_ALGO1:
                            if step[v] >= S:
                                step[v] = 0
                                phase[v] += 1
                            if phase[v] > L:
                                status[v] = FAILED
                                lifecycle[v] = DONE
                                exitr[v] = t
                            else:
                                pos[v] = 0
                        else:
                            if step[v] > LN:
                                step[v] = 0
                                phase[v] += 1
                            pos[v] = 0
                    else:
                        pos[v] = p + 1
            if lifecycle[v] != DONE:
                active[m] = v
                m += 1
        n_active = m

        for k in range(n_touch):
            w = touched[k]
            if lifecycle[w] == ASLEEP:
                lifecycle[w] = WAKE_BEEP
                wake[w] = t
                active[n_active] = w
                n_active += 1

        for k in range(n_beep):
            beeped[beepers[k]] = 0
        for k in range(n_touch):
            heard[touched[k]] = 0
        total = t + 1
        t += 1

    return (status_np, wake_np, exit_np, abeeps_np, wbeeps_np,
            int(total), int(cap_hit))
