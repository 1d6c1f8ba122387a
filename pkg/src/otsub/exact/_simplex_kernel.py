"""Transportation simplex on a dense cost block.

The basis is a spanning tree over ``m`` supply nodes (ids ``0..m-1``) and
``n`` demand nodes (ids ``m..m+n-1``). Basic arcs live in ``m+n-1`` slots;
each node keeps a doubly linked list of its incident slots so the subtree
cut off by a pivot can be re-hung by a plain DFS.

Entering arc: the most negative reduced cost in the current row, rows
visited cyclically. After more than ``m+n`` consecutive degenerate pivots
the rule switches to Bland (first negative arc in row-major order,
lowest-index blocking arc leaves) until the objective moves again.
Outside Bland mode, ties for the leaving arc follow the strongly
feasible tree convention, which keeps degenerate pivots rare.
"""

import numpy as np

from .._accel import njit

STATUS_OPTIMAL = 0
STATUS_ITERATION_LIMIT = 1


@njit
def _link(k, node, m, head, nxt, prv):
    # row endpoints use list 0, column endpoints list 1
    side = 0 if node < m else 1
    h = head[node]
    nxt[side, k] = h
    prv[side, k] = -1
    if h >= 0:
        prv[side, h] = k
    head[node] = k


@njit
def _unlink(k, node, m, head, nxt, prv):
    side = 0 if node < m else 1
    a = prv[side, k]
    b = nxt[side, k]
    if a >= 0:
        nxt[side, a] = b
    else:
        head[node] = b
    if b >= 0:
        prv[side, b] = a


@njit
def _rehang(root, par, slot, C, m, arow, acol, head, nxt, prv, parent, pslot, depth, pot, stack):
    """Attach ``root`` below ``par`` via ``slot`` and refresh its subtree."""
    parent[root] = par
    pslot[root] = slot
    depth[root] = depth[par] + 1
    c = C[arow[slot], acol[slot]]
    pot[root] = c - pot[par]
    top = 0
    stack[top] = root
    top += 1
    while top > 0:
        top -= 1
        v = stack[top]
        side = 0 if v < m else 1
        k = head[v]
        while k >= 0:
            if k != pslot[v]:
                w = acol[k] + m if side == 0 else arow[k]
                parent[w] = v
                pslot[w] = k
                depth[w] = depth[v] + 1
                pot[w] = C[arow[k], acol[k]] - pot[v]
                stack[top] = w
                top += 1
            k = nxt[side, k]


@njit
def transport_simplex(a, b, C, max_iter, tol):
    """Solve min <C, X> s.t. X 1 = a, X^T 1 = b, X >= 0.

    ``a`` and ``b`` must be positive with equal totals. Returns the basic
    arcs ``(arow, acol, flow)``, the potentials ``(u, v)``, the iteration
    and Bland-pivot counts, and a status code.
    """
    m = a.shape[0]
    n = b.shape[0]
    nn = m + n
    K = nn - 1

    arow = np.empty(K, dtype=np.int64)
    acol = np.empty(K, dtype=np.int64)
    flow = np.zeros(K)
    head = np.full(nn, -1, dtype=np.int64)
    nxt = np.full((2, K), -1, dtype=np.int64)
    prv = np.full((2, K), -1, dtype=np.int64)
    basic = np.zeros(m * n, dtype=np.bool_)

    # north-west corner start; ties advance one index and leave a
    # degenerate zero so the basis is always a spanning tree
    ra = a.copy()
    rb = b.copy()
    i = 0
    j = 0
    for k in range(K):
        x = min(ra[i], rb[j])
        arow[k] = i
        acol[k] = j
        flow[k] = x
        basic[i * n + j] = True
        ra[i] -= x
        rb[j] -= x
        _link(k, i, m, head, nxt, prv)
        _link(k, m + j, m, head, nxt, prv)
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1

    parent = np.full(nn, -1, dtype=np.int64)
    pslot = np.full(nn, -1, dtype=np.int64)
    depth = np.zeros(nn, dtype=np.int64)
    pot = np.zeros(nn)
    stack = np.empty(nn, dtype=np.int64)

    # root the tree at supply node 0
    top = 0
    stack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        v = stack[top]
        side = 0 if v < m else 1
        k = head[v]
        while k >= 0:
            if k != pslot[v]:
                w = acol[k] + m if side == 0 else arow[k]
                parent[w] = v
                pslot[w] = k
                depth[w] = depth[v] + 1
                pot[w] = C[arow[k], acol[k]] - pot[v]
                stack[top] = w
                top += 1
            k = nxt[side, k]

    it = 0
    n_bland = 0
    degenerate_run = 0
    bland = False
    row_ptr = 0
    status = STATUS_OPTIMAL
    while True:
        ei = -1
        ej = -1
        if not bland:
            for t in range(m):
                ii = row_ptr + t
                if ii >= m:
                    ii -= m
                ui = pot[ii]
                best = -tol
                bj = -1
                base = ii * n
                for jj in range(n):
                    rc = C[ii, jj] - ui - pot[m + jj]
                    if rc < best and not basic[base + jj]:
                        best = rc
                        bj = jj
                if bj >= 0:
                    ei = ii
                    ej = bj
                    row_ptr = ii + 1 if ii + 1 < m else 0
                    break
        else:
            for ii in range(m):
                ui = pot[ii]
                base = ii * n
                for jj in range(n):
                    if C[ii, jj] - ui - pot[m + jj] < -tol and not basic[base + jj]:
                        ei = ii
                        ej = jj
                        break
                if ei >= 0:
                    break
        if ei < 0:
            break
        if it >= max_iter:
            status = STATUS_ITERATION_LIMIT
            break
        it += 1
        if bland:
            n_bland += 1

        # walk the cycle: pushing flow on (ei, ej) decreases the arcs met
        # going up from ei at row nodes and going up from ej at column nodes
        x = ei
        y = m + ej
        th_i = np.inf
        th_j = np.inf
        li = -1
        lj = -1
        key_i = -1
        key_j = -1
        node_i = -1
        node_j = -1
        while x != y:
            if depth[x] >= depth[y]:
                k = pslot[x]
                if x < m:
                    f = flow[k]
                    key = arow[k] * n + acol[k]
                    if f < th_i or (bland and f == th_i and key < key_i):
                        th_i = f
                        li = k
                        key_i = key
                        node_i = x
                x = parent[x]
            else:
                k = pslot[y]
                if y >= m:
                    f = flow[k]
                    key = arow[k] * n + acol[k]
                    if bland:
                        take = f < th_j or (f == th_j and key < key_j)
                    else:
                        take = f <= th_j
                    if take:
                        th_j = f
                        lj = k
                        key_j = key
                        node_j = y
                y = parent[y]
        # outside Bland mode ties go to the blocking arc met last when the
        # cycle is traversed from its apex along the entering direction
        if bland:
            use_j = th_j < th_i or (th_j == th_i and key_j < key_i)
        else:
            use_j = th_j <= th_i
        if use_j:
            theta = th_j
            leave = lj
            leave_node = node_j
            leave_src_side = 1
        else:
            theta = th_i
            leave = li
            leave_node = node_i
            leave_src_side = 0
        apex = x

        if theta > 0.0:
            x = ei
            while x != apex:
                k = pslot[x]
                if x < m:
                    flow[k] -= theta
                else:
                    flow[k] += theta
                x = parent[x]
            y = m + ej
            while y != apex:
                k = pslot[y]
                if y >= m:
                    flow[k] -= theta
                else:
                    flow[k] += theta
                y = parent[y]
            degenerate_run = 0
            bland = False
        else:
            degenerate_run += 1
            if degenerate_run > nn:
                bland = True

        # swap the leaving slot for the entering arc and re-hang the subtree
        lnode = leave_node
        lpar = parent[lnode]
        basic[arow[leave] * n + acol[leave]] = False
        _unlink(leave, lnode, m, head, nxt, prv)
        _unlink(leave, lpar, m, head, nxt, prv)
        arow[leave] = ei
        acol[leave] = ej
        flow[leave] = theta
        basic[ei * n + ej] = True
        _link(leave, ei, m, head, nxt, prv)
        _link(leave, m + ej, m, head, nxt, prv)
        if leave_src_side == 0:
            _rehang(ei, m + ej, leave, C, m, arow, acol, head, nxt, prv, parent, pslot, depth, pot, stack)
        else:
            _rehang(m + ej, ei, leave, C, m, arow, acol, head, nxt, prv, parent, pslot, depth, pot, stack)

    for k in range(K):
        if flow[k] < 0.0:
            flow[k] = 0.0
    return arow, acol, flow, pot[:m].copy(), pot[m:].copy(), it, n_bland, status
