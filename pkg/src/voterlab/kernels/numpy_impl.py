"""Pure-numpy fallbacks for the hot kernels.

Same signatures, in-place conventions, and positional uniform consumption as
``numba_impl``, so both backends produce identical results from the same
pre-drawn uniforms. Vectorised over nodes/trials where the algorithm allows;
the inherently sequential pieces (subset walk bookkeeping, per-trial step
windows) fall back to plain Python loops and are correspondingly slower.
"""

import numpy as np


def lambda_counts(indptr, indices, opin, lam):
    edge_diff = opin[indices] != np.repeat(opin, np.diff(indptr))
    lam[:] = np.add.reduceat(edge_diff, indptr[:-1])


def standard_round(indptr, indices, degrees, opin_in, rand_u, opin_out):
    x = rand_u * (2.0 * degrees)
    j = x.astype(np.int64)
    adopt = j < degrees
    nbr = indices[indptr[:-1] + np.minimum(j, degrees - 1)]
    opin_out[:] = np.where(adopt, opin_in[nbr], opin_in)


def biased_round(indptr, indices, degrees, opin_in, alphas, rand_u, opin_out):
    x = rand_u * degrees
    j = x.astype(np.int64)
    frac = x - j
    v_op = opin_in[indices[indptr[:-1] + j]]
    adopt = frac < alphas[v_op]
    opin_out[:] = np.where(adopt, v_op, opin_in)


def consensus_standard_batch(indptr, indices, degrees, opin, lam, counts, rand_block):
    n = opin.shape[0]
    kappa = counts.shape[0]
    new = np.empty_like(opin)
    for r in range(rand_block.shape[0]):
        standard_round(indptr, indices, degrees, opin, rand_block[r], new)
        if not np.array_equal(new, opin):
            opin[:] = new
            counts[:] = np.bincount(opin, minlength=kappa)
            lambda_counts(indptr, indices, opin, lam)
            if counts.max() == n:
                return r + 1, True
    return rand_block.shape[0], False


def consensus_biased_batch(
    indptr, indices, degrees, opin, lam, counts, alphas, rand_block, prefer, regen_node
):
    n = opin.shape[0]
    kappa = counts.shape[0]
    new = np.empty_like(opin)
    for r in range(rand_block.shape[0]):
        biased_round(indptr, indices, degrees, opin, alphas, rand_block[r], new)
        changed = not np.array_equal(new, opin)
        if changed:
            opin[:] = new
            counts[:] = np.bincount(opin, minlength=kappa)
            lambda_counts(indptr, indices, opin, lam)
        if counts[prefer] == n:
            return r + 1, 1
        if counts[prefer] == 0 and regen_node >= 0:
            opin[regen_node] = prefer
            counts[:] = np.bincount(opin, minlength=kappa)
            lambda_counts(indptr, indices, opin, lam)
        elif regen_node < 0 and changed and counts.max() == n:
            return r + 1, 2
    return rand_block.shape[0], 0


def coalescing_batch(indptr, indices, degrees, pos, alive, occ, rand_block):
    for r in range(rand_block.shape[0]):
        live = np.flatnonzero(pos >= 0)
        u = pos[live]
        x = rand_block[r, live] * (2.0 * degrees[u])
        j = x.astype(np.int64)
        move = j < degrees[u]
        dest = indices[indptr[u] + np.minimum(j, degrees[u] - 1)]
        pos[live] = np.where(move, dest, u)
        # lowest-index pebble at a node survives
        vals = pos[live]
        _, first = np.unique(vals, return_index=True)
        keep = np.zeros(live.shape[0], dtype=bool)
        keep[first] = True
        pos[live[~keep]] = -1
        alive = int(keep.sum())
        if alive == 1:
            return r + 1, alive
    return rand_block.shape[0], alive


def conductance_enumerate(indptr, indices, degrees):
    n = degrees.shape[0]
    two_m = int(degrees.sum())
    m = two_m // 2
    eu = np.repeat(np.arange(n), np.diff(indptr))
    ev = indices
    upper = eu < ev
    eu, ev = eu[upper], ev[upper]
    full = (1 << n) - 1
    best = None  # (cut, vol, mask)

    def consider(cut, vol, mask, best):
        if 0 < vol <= m:
            if (
                best is None
                or cut * best[1] < best[0] * vol
                or (cut * best[1] == best[0] * vol and mask < best[2])
            ):
                return (cut, vol, mask)
        return best

    chunk = 1 << 14
    total = 1 << (n - 1)
    for start in range(1, total, chunk):
        ids = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = (ids[:, None] >> np.arange(n)) & 1
        vol = bits @ degrees
        cut = (bits[:, eu] != bits[:, ev]).sum(axis=1)
        cvol = two_m - vol
        ratio = np.where(vol > 0, cut / np.maximum(vol, 1), np.inf)
        cratio = np.where(cvol > 0, cut / np.maximum(cvol, 1), np.inf)
        ratio = np.where(vol <= m, ratio, np.inf)
        cratio = np.where(cvol <= m, cratio, np.inf)
        cur = np.inf if best is None else best[0] / best[1]
        near = np.flatnonzero(
            (ratio <= cur + 1e-12) | (cratio <= cur + 1e-12)
        )
        for i in near:
            best = consider(int(cut[i]), int(vol[i]), int(ids[i]), best)
            best = consider(int(cut[i]), int(cvol[i]), int(full ^ ids[i]), best)
    return np.int64(best[0]), np.int64(best[1]), np.int64(best[2])


def iid_sums(rand_block, p, out_z):
    out_z[:] = (rand_block < p).sum(axis=0)


def adaptive_sums(rand_block, b, base_p, spend_mode, out_z, out_b):
    ell, t = rand_block.shape
    z = np.zeros(t, np.int64)
    bsum = np.zeros(t, np.float64)
    for i in range(ell):
        if spend_mode == 0:
            remaining = np.maximum(b - bsum, 0.0)
            lucky = z > base_p * i
            p = np.where(lucky, np.minimum(remaining, 1.0), np.minimum(base_p, remaining))
        else:
            floor = b / ell
            lucky = z > floor * i
            p = np.where(lucky, floor, min(2.0 * floor, 1.0))
        bsum += p
        z += rand_block[i] < p
    out_z[:] = z
    out_b[:] = bsum


def voter_window_sums(indptr, indices, degrees, opin0, alphas, k_budget, rand_block):
    n = opin0.shape[0]
    d = int(degrees[0])
    opin = opin0.copy()
    lam = np.zeros(n, np.int64)
    lambda_counts(indptr, indices, opin, lam)
    big_l = 0
    big_lp = 0
    z = 0
    bsum = 0.0
    a1 = float(alphas[1])
    for r in range(rand_block.shape[0]):
        boundary = np.flatnonzero(lam > 0)
        if boundary.shape[0] == 0:
            return z, bsum, 0
        side0 = [int(u) for u in boundary if opin[u] == 0]
        side1 = [int(u) for u in boundary if opin[u] != 0]
        x = rand_block[r] * d
        j = x.astype(np.int64)
        frac = x - j
        v_op = opin[indices[indptr[:-1] + j]]
        flips = (v_op != opin) & (frac < alphas[v_op])
        i0 = i1 = 0
        for _ in range(len(side0) + len(side1)):
            take1 = big_l <= big_lp
            if take1 and i1 >= len(side1):
                take1 = False
            if not take1 and i0 >= len(side0):
                take1 = True
            if take1:
                u = side1[i1]
                i1 += 1
                o = 0
            else:
                u = side0[i0]
                i0 += 1
                o = 1
            lu = int(lam[u])
            if o == 0:
                big_l += lu
            else:
                big_lp += lu
                bsum += a1 * lu / d
                if flips[u]:
                    z += 1
            if big_l >= k_budget:
                return z, bsum, 1
        opin = np.where(flips, v_op, opin)
        lambda_counts(indptr, indices, opin, lam)
    return z, bsum, 0


def one_step_vol_samples(indptr, indices, degrees, opin, boundary, rand_block, out_vol):
    vol0 = int(degrees[opin == 0].sum())
    if boundary.shape[0] == 0:
        out_vol[:] = vol0
        return
    db = degrees[boundary]
    x = rand_block[:, boundary] * (2.0 * db)
    j = x.astype(np.int64)
    adopt = j < db
    nbr_op = opin[indices[indptr[boundary] + np.minimum(j, db - 1)]]
    differs = nbr_op != opin[boundary]
    sign = np.where(nbr_op == 0, 1, -1)
    delta = np.where(adopt & differs, sign * db, 0).sum(axis=1)
    out_vol[:] = vol0 + delta
