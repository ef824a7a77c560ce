"""Numpy implementation of the batch kernel, vectorized across paths."""
import numpy as np


def _depths(parent):
    depth = np.zeros(len(parent), dtype=np.int64)
    for node in range(1, len(parent)):
        depth[node] = depth[parent[node]] + 1
    return depth


def _advance(val, h, Fseg, parent, member, depth, at0, comp, dw):
    pre = np.empty_like(val)
    pre[:, 0] = val[:, 0]
    coefs = [[val[:, 0]]]
    for node in range(1, val.shape[1]):
        par, r, Fv = parent[node], member[node], Fseg[node]
        a = -comp[r] * Fv
        c = [val[:, node]] + [a * coefs[par][k] / (k + 1) for k in range(depth[node])]
        coefs.append(c)
        acc = c[-1]
        for k in range(len(c) - 2, -1, -1):
            acc = acc * h + c[k]
        if dw is not None:
            acc = acc + at0[r] * Fv * val[:, par] * dw
        pre[:, node] = acc
    return pre


def _jump(val, Fseg, parent, member, jv):
    out = val.copy()
    for node in range(1, val.shape[1]):
        out[:, node] = val[:, node] + Fseg[node] * val[:, parent[node]] * jv[member[node]]
    return out


def tree_terminal(knots, grid_inc, seg_F, parent, member, root_value, at0, comp, dW,
                  offsets, jtimes, jvals):
    S = len(knots) - 1
    Nn = len(parent)
    P = len(offsets) - 1
    depth = _depths(parent)
    val = np.zeros((P, Nn))
    val[:, 0] = root_value
    last = np.zeros(P)
    counts = np.diff(offsets)
    jpath = np.repeat(np.arange(P), counts)
    jseg = np.searchsorted(knots, jtimes, side="right") - 1
    jseg = np.clip(jseg, 0, S)
    order = np.argsort(jseg, kind="stable")
    seg_sorted = jseg[order]
    key = seg_sorted * P + jpath[order]
    run_start = np.r_[True, key[1:] != key[:-1]] if len(key) else np.zeros(0, dtype=bool)
    start_pos = np.maximum.accumulate(np.where(run_start, np.arange(len(key)), 0)) if len(key) else np.zeros(0, dtype=np.int64)
    rank = np.arange(len(key)) - start_pos
    bounds = np.searchsorted(seg_sorted, np.arange(S + 2))

    def do_jumps(s, Fseg):
        lo, hi = bounds[s], bounds[s + 1]
        if hi <= lo:
            return
        idx, rk = order[lo:hi], rank[lo:hi]
        for r in range(int(rk.max()) + 1):
            sel = idx[rk == r]
            paths = jpath[sel]
            h = jtimes[sel] - last[paths]
            pre = _advance(val[paths], h, Fseg, parent, member, depth, at0, comp, None)
            val[paths] = _jump(pre, Fseg, parent, member, jvals[:, sel])
            last[paths] = jtimes[sel]

    for s in range(S):
        do_jumps(s, seg_F[s])
        dw = dW[:, grid_inc[s + 1]] if grid_inc[s + 1] >= 0 else None
        val[:] = _advance(val, knots[s + 1] - last, seg_F[s], parent, member, depth, at0, comp, dw)
        last[:] = knots[s + 1]
    do_jumps(S, seg_F[S - 1])
    return val
