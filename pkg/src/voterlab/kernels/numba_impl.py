"""Numba implementations of the hot kernels.

Contracts shared with ``numpy_impl``:

* graphs arrive as CSR arrays (``indptr``, ``indices``) with int64 dtype and
  per-node ascending neighbour order;
* uniforms are pre-drawn by the caller and consumed positionally, slot
  ``[round, node]`` (or ``[round, pebble]``), so results are bit-identical
  across backends;
* a single uniform per node encodes both the neighbour pick and the adoption
  coin: for degree d, ``x = u * 2d`` picks neighbour ``int(x)`` when
  ``int(x) < d`` (the lazy coin), and for the biased rule ``x = u * d`` picks
  neighbour ``int(x)`` with the fractional part serving as the popularity
  coin. The fractional part is independent of the integer part for uniform u.

State arrays (``opin``, ``lam``, ``counts``, ``pos``) are updated in place so
batches can be chained across calls.
"""

import numpy as np
from numba import njit

JIT = dict(cache=True, nogil=True)


@njit(**JIT)
def lambda_counts(indptr, indices, opin, lam):
    n = opin.shape[0]
    for u in range(n):
        c = 0
        for e in range(indptr[u], indptr[u + 1]):
            if opin[indices[e]] != opin[u]:
                c += 1
        lam[u] = c


@njit(**JIT)
def standard_round(indptr, indices, degrees, opin_in, rand_u, opin_out):
    n = opin_in.shape[0]
    for u in range(n):
        d = degrees[u]
        x = rand_u[u] * (2.0 * d)
        j = int(x)
        if j < d:
            opin_out[u] = opin_in[indices[indptr[u] + j]]
        else:
            opin_out[u] = opin_in[u]


@njit(**JIT)
def biased_round(indptr, indices, degrees, opin_in, alphas, rand_u, opin_out):
    n = opin_in.shape[0]
    for u in range(n):
        d = degrees[u]
        x = rand_u[u] * d
        j = int(x)
        frac = x - j
        v_op = opin_in[indices[indptr[u] + j]]
        if frac < alphas[v_op]:
            opin_out[u] = v_op
        else:
            opin_out[u] = opin_in[u]


@njit(**JIT)
def _recount_affected(indptr, indices, opin, lam, stamp, r, flip_nodes, nflip):
    for t in range(nflip):
        u = flip_nodes[t]
        if stamp[u] != r:
            stamp[u] = r
            c = 0
            for e in range(indptr[u], indptr[u + 1]):
                if opin[indices[e]] != opin[u]:
                    c += 1
            lam[u] = c
        for e in range(indptr[u], indptr[u + 1]):
            w = indices[e]
            if stamp[w] != r:
                stamp[w] = r
                c = 0
                for e2 in range(indptr[w], indptr[w + 1]):
                    if opin[indices[e2]] != opin[w]:
                        c += 1
                lam[w] = c


@njit(**JIT)
def consensus_standard_batch(indptr, indices, degrees, opin, lam, counts, rand_block):
    """Run up to ``rand_block.shape[0]`` lazy standard rounds in place.

    Only boundary nodes (lam > 0) can change opinion; interior slots of the
    uniform block are skipped, which does not alter the outcome. Returns
    ``(rounds consumed, consensus flag)``.
    """
    R = rand_block.shape[0]
    n = opin.shape[0]
    flip_nodes = np.empty(n, np.int64)
    flip_new = np.empty(n, np.int64)
    flip_old = np.empty(n, np.int64)
    stamp = np.full(n, -1, np.int64)
    for r in range(R):
        nflip = 0
        for u in range(n):
            if lam[u] > 0:
                d = degrees[u]
                x = rand_block[r, u] * (2.0 * d)
                j = int(x)
                if j < d:
                    ov = opin[indices[indptr[u] + j]]
                    if ov != opin[u]:
                        flip_nodes[nflip] = u
                        flip_new[nflip] = ov
                        nflip += 1
        if nflip == 0:
            continue
        for t in range(nflip):
            flip_old[t] = opin[flip_nodes[t]]
        for t in range(nflip):
            counts[flip_old[t]] -= 1
            counts[flip_new[t]] += 1
            opin[flip_nodes[t]] = flip_new[t]
        _recount_affected(indptr, indices, opin, lam, stamp, r, flip_nodes, nflip)
        for t in range(nflip):
            if counts[flip_new[t]] == n:
                return r + 1, True
    return R, False


@njit(**JIT)
def consensus_biased_batch(
    indptr, indices, degrees, opin, lam, counts, alphas, rand_block, prefer, regen_node
):
    """Biased rounds in place; stops when the preferred opinion prevails.

    ``regen_node >= 0`` re-seeds that node with the preferred opinion at the
    end of any round in which it vanished. Returns ``(rounds consumed,
    status)`` with status 0 = still running, 1 = preferred prevailed,
    2 = some other opinion prevailed (only when regeneration is off).
    """
    R = rand_block.shape[0]
    n = opin.shape[0]
    flip_nodes = np.empty(n, np.int64)
    flip_new = np.empty(n, np.int64)
    flip_old = np.empty(n, np.int64)
    stamp = np.full(n, -1, np.int64)
    for r in range(R):
        nflip = 0
        for u in range(n):
            if lam[u] > 0:
                d = degrees[u]
                x = rand_block[r, u] * d
                j = int(x)
                frac = x - j
                v_op = opin[indices[indptr[u] + j]]
                if v_op != opin[u] and frac < alphas[v_op]:
                    flip_nodes[nflip] = u
                    flip_new[nflip] = v_op
                    nflip += 1
        if nflip > 0:
            for t in range(nflip):
                flip_old[t] = opin[flip_nodes[t]]
            for t in range(nflip):
                counts[flip_old[t]] -= 1
                counts[flip_new[t]] += 1
                opin[flip_nodes[t]] = flip_new[t]
            _recount_affected(indptr, indices, opin, lam, stamp, r, flip_nodes, nflip)
        if counts[prefer] == n:
            return r + 1, 1
        if counts[prefer] == 0 and regen_node >= 0:
            counts[opin[regen_node]] -= 1
            counts[prefer] += 1
            opin[regen_node] = prefer
            flip_nodes[0] = regen_node
            _recount_affected(indptr, indices, opin, lam, stamp, -2 - r, flip_nodes, 1)
        elif regen_node < 0 and nflip > 0:
            for t in range(nflip):
                if counts[flip_new[t]] == n:
                    return r + 1, 2
    return R, 0


@njit(**JIT)
def coalescing_batch(indptr, indices, degrees, pos, alive, occ, rand_block):
    """Lazy coalescing walks; ``pos[p] = -1`` marks a merged pebble.

    ``occ`` is an int64 scratch array of size n filled with -1 on first use;
    entries are stamped with the running round counter encoded in occ itself,
    so the caller must not reuse it elsewhere. Returns ``(rounds consumed,
    alive count)``.
    """
    R = rand_block.shape[0]
    P = pos.shape[0]
    for r in range(R):
        for p in range(P):
            u = pos[p]
            if u >= 0:
                d = degrees[u]
                x = rand_block[r, p] * (2.0 * d)
                j = int(x)
                if j < d:
                    pos[p] = indices[indptr[u] + j]
        for p in range(P):
            u = pos[p]
            if u >= 0:
                if occ[u] == r:
                    pos[p] = -1
                    alive -= 1
                else:
                    occ[u] = r
        if alive == 1:
            return r + 1, alive
    return R, alive


@njit(**JIT)
def conductance_enumerate(indptr, indices, degrees):
    """Exact conductance by Gray-code subset enumeration.

    Walks all subsets not containing the last node (each complementary pair
    is visited once) with O(deg) incremental cut updates. Returns
    ``(cut, vol, mask)`` of the minimising side with vol <= m; ties are
    broken toward the smallest bitmask.
    """
    n = degrees.shape[0]
    two_m = 0
    for u in range(n):
        two_m += degrees[u]
    m = two_m // 2
    inside = np.zeros(n, np.uint8)
    cut = 0
    vol = 0
    best_cut = np.int64(0)
    best_vol = np.int64(0)
    best_mask = np.int64(0)
    full = (np.int64(1) << n) - 1
    mask = np.int64(0)
    g_prev = np.int64(0)
    total = np.int64(1) << (n - 1)
    for i in range(1, total):
        g = i ^ (i >> 1)
        diff = g ^ g_prev
        g_prev = g
        u = 0
        while (diff >> u) & 1 == 0:
            u += 1
        inb = 0
        for e in range(indptr[u], indptr[u + 1]):
            if inside[indices[e]] == 1:
                inb += 1
        if inside[u] == 0:
            inside[u] = 1
            cut += degrees[u] - 2 * inb
            vol += degrees[u]
            mask |= np.int64(1) << u
        else:
            inside[u] = 0
            cut -= degrees[u] - 2 * inb
            vol -= degrees[u]
            mask &= ~(np.int64(1) << u)
        if 0 < vol <= m:
            if (
                best_vol == 0
                or cut * best_vol < best_cut * vol
                or (cut * best_vol == best_cut * vol and mask < best_mask)
            ):
                best_cut = cut
                best_vol = vol
                best_mask = mask
        cvol = two_m - vol
        if 0 < cvol <= m:
            cmask = full ^ mask
            if (
                best_vol == 0
                or cut * best_vol < best_cut * cvol
                or (cut * best_vol == best_cut * cvol and cmask < best_mask)
            ):
                best_cut = cut
                best_vol = cvol
                best_mask = cmask
    return best_cut, best_vol, best_mask


@njit(**JIT)
def iid_sums(rand_block, p, out_z):
    """Column sums of Bernoulli(p) indicators; rand_block is (ell, trials)."""
    ell = rand_block.shape[0]
    t = rand_block.shape[1]
    for c in range(t):
        z = 0
        for i in range(ell):
            if rand_block[i, c] < p:
                z += 1
        out_z[c] = z


@njit(**JIT)
def adaptive_sums(rand_block, b, base_p, spend_mode, out_z, out_b):
    """Prefix-adaptive binary sequences with a certified probability budget.

    ``spend_mode`` 0: conditional probabilities are capped so the running sum
    never exceeds b (upper certificate; a lucky prefix makes the generator
    spend the remaining budget at once). ``spend_mode`` 1: probabilities are
    floored at b/ell so the running sum is at least b (lower certificate; a
    lucky prefix drops the probability to the floor).
    """
    ell = rand_block.shape[0]
    t = rand_block.shape[1]
    for c in range(t):
        z = 0
        bsum = 0.0
        for i in range(ell):
            if spend_mode == 0:
                remaining = b - bsum
                if remaining < 0.0:
                    remaining = 0.0
                if z > (base_p * i):
                    p = remaining if remaining < 1.0 else 1.0
                else:
                    p = base_p if base_p < remaining else remaining
            else:
                floor = b / ell
                if z > (floor * i):
                    p = floor
                else:
                    p = 2.0 * floor if 2.0 * floor < 1.0 else 1.0
            bsum += p
            if rand_block[i, c] < p:
                z += 1
        out_z[c] = z
        out_b[c] = bsum


@njit(**JIT)
def voter_window_sums(indptr, indices, degrees, opin0, alphas, k_budget, rand_block):
    """One biased-voter observation window starting from ``opin0``.

    Rounds are decomposed into the balanced step order (two ascending-id
    boundary queues, the side with the smaller running cut-degree sum goes
    next). The window closes at the first step where the running cut-degree
    sum of non-preferred steps reaches ``k_budget``. Returns ``(z, bsum,
    completed)`` where z counts preferred-to-other flips inside the window
    and bsum accumulates their conditional probabilities alpha_1 * lam / d.
    """
    n = opin0.shape[0]
    d = degrees[0]
    R = rand_block.shape[0]
    opin = opin0.copy()
    lam = np.zeros(n, np.int64)
    lambda_counts(indptr, indices, opin, lam)
    side0 = np.empty(n, np.int64)  # preferred boundary, o = 1
    side1 = np.empty(n, np.int64)  # non-preferred boundary, o = 0
    flip = np.zeros(n, np.uint8)
    newop = np.zeros(n, np.int64)
    big_l = 0
    big_lp = 0
    z = 0
    bsum = 0.0
    a1 = alphas[1]
    for r in range(R):
        n0 = 0
        n1 = 0
        for u in range(n):
            if lam[u] > 0:
                if opin[u] == 0:
                    side0[n0] = u
                    n0 += 1
                else:
                    side1[n1] = u
                    n1 += 1
            flip[u] = 0
        if n0 == 0 and n1 == 0:
            return z, bsum, 0
        i0 = 0
        i1 = 0
        for _ in range(n0 + n1):
            take1 = big_l <= big_lp
            if take1 and i1 >= n1:
                take1 = False
            if not take1 and i0 >= n0:
                take1 = True
            if take1:
                u = side1[i1]
                i1 += 1
                o = 0
            else:
                u = side0[i0]
                i0 += 1
                o = 1
            lu = lam[u]
            x = rand_block[r, u] * d
            j = int(x)
            frac = x - j
            v_op = opin[indices[indptr[u] + j]]
            flipped = v_op != opin[u] and frac < alphas[v_op]
            if flipped:
                flip[u] = 1
                newop[u] = v_op
            if o == 0:
                big_l += lu
            else:
                big_lp += lu
                bsum += a1 * lu / d
                if flipped:
                    z += 1
            if big_l >= k_budget:
                return z, bsum, 1
        for u in range(n):
            if flip[u] == 1:
                opin[u] = newop[u]
        lambda_counts(indptr, indices, opin, lam)
    return z, bsum, 0


@njit(**JIT)
def one_step_vol_samples(indptr, indices, degrees, opin, boundary, rand_block, out_vol):
    """Replicated one-round volume of opinion 0 under the lazy standard rule.

    ``boundary`` lists the nodes with lam > 0; only their slots of each
    uniform row are read. ``out_vol[r]`` receives vol(opinion 0) after one
    round from the fixed input state.
    """
    R = rand_block.shape[0]
    nb = boundary.shape[0]
    vol0 = 0
    for u in range(opin.shape[0]):
        if opin[u] == 0:
            vol0 += degrees[u]
    for r in range(R):
        delta = 0
        for t in range(nb):
            u = boundary[t]
            d = degrees[u]
            x = rand_block[r, u] * (2.0 * d)
            j = int(x)
            if j < d:
                ov = opin[indices[indptr[u] + j]]
                if ov != opin[u]:
                    if ov == 0:
                        delta += d
                    else:
                        delta -= d
        out_vol[r] = vol0 + delta
