"""Pure-Python version of the band-placement counter (see ``bandcount``)."""


def count_band_placements(n, rho, parent, nb_start, nb_list, fixed, reserved):
    """Count injective placements of items 0..c-1 into positions 0..n-1.

    Items are visited in the given order.  ``parent[i]`` is an earlier item
    adjacent to i (or -1 for a component root); the band constraints of item
    i against earlier items are ``nb_list[nb_start[i]:nb_start[i+1]]``.
    ``fixed[i]`` pins item i to a position (or -1).  ``reserved`` lists the
    pinned positions, which no other item may take.
    """
    c = len(parent)
    if c == 0:
        return 1
    occ = [False] * n
    res = [False] * n
    for p in reserved:
        res[p] = True
    pos = [0] * c

    def rec(idx):
        f = fixed[idx]
        if f >= 0:
            lo = hi = f
        elif parent[idx] >= 0:
            q = pos[parent[idx]]
            lo, hi = max(0, q - rho), min(n - 1, q + rho)
        else:
            lo, hi = 0, n - 1
        nbs = [pos[j] for j in nb_list[nb_start[idx]:nb_start[idx + 1]]]
        last = idx == c - 1
        total = 0
        for p in range(lo, hi + 1):
            if occ[p] or (f < 0 and res[p]):
                continue
            ok = True
            for q in nbs:
                if p - q > rho or q - p > rho:
                    ok = False
                    break
            if not ok:
                continue
            if last:
                total += 1
            else:
                occ[p] = True
                pos[idx] = p
                total += rec(idx + 1)
                occ[p] = False
        return total

    return rec(0)
