import numpy as np
from numba import njit

PENDING = 1
ON_ROAD = 2
ARRIVED = 3

EPS = 1e-9


@njit(cache=True)
def _push(head, tail, nxt, s, v):
    nxt[v] = -1
    if tail[s] >= 0:
        nxt[tail[s]] = v
    else:
        head[s] = v
    tail[s] = v


@njit(cache=True)
def _pop(head, tail, nxt, s):
    v = head[s]
    head[s] = nxt[v]
    if head[s] < 0:
        tail[s] = -1
    nxt[v] = -1
    return v


@njit(cache=True)
def tick(
    t,
    seg_len,
    seg_speed,
    head,
    tail,
    pend_head,
    pend_tail,
    last_cross,
    pos,
    prev,
    seg,
    ptr,
    last,
    nxt,
    state,
    waiting,
    stamp,
    red,
    route_seg,
    route_move,
    perm,
    spacing,
    headway,
):
    """Advance every vehicle by one second.

    Followers are limited by their leader's position at the start of the
    tick. A head vehicle reaching the stop line crosses when its movement is
    green, the approach headway has elapsed and the exit has room; the time
    left over is spent on the exit segment. Returns (arrived, stopped at red).
    """
    for v in range(pos.shape[0]):
        prev[v] = pos[v]
        red[v] = 0

    arrived = 0
    at_red = 0
    for s in range(seg_len.shape[0]):
        L = seg_len[s]
        sp = seg_speed[s]
        lead = -1.0
        has_lead = False
        v = head[s]
        while v >= 0:
            following = nxt[v]
            if stamp[v] == t:
                v = following
                continue
            stamp[v] = t
            old = prev[v]
            desired = old + sp
            moved = False
            if not has_lead and desired >= L - EPS:
                if ptr[v] == last[v]:
                    _pop(head, tail, nxt, s)
                    state[v] = ARRIVED
                    arrived += 1
                    moved = True
                else:
                    mv = route_move[ptr[v]]
                    e = route_seg[ptr[v] + 1]
                    crossed = False
                    if perm[mv] and t - last_cross[s] >= headway:
                        tl = tail[e]
                        if tl < 0 or pos[tl] >= spacing:
                            cap = seg_len[e] if tl < 0 else pos[tl] - spacing
                            ahead = (desired - L) / sp * seg_speed[e]
                            _pop(head, tail, nxt, s)
                            _push(head, tail, nxt, e, v)
                            pos[v] = min(ahead, cap)
                            seg[v] = e
                            ptr[v] += 1
                            last_cross[s] = t
                            crossed = True
                            moved = True
                    if not crossed:
                        pos[v] = L
                        moved = L > old + EPS
            else:
                limit = L if not has_lead else lead - spacing
                new = min(desired, limit)
                if new > old + EPS:
                    pos[v] = new
                    moved = True
            if not moved and state[v] == ON_ROAD and ptr[v] < last[v]:
                if not perm[route_move[ptr[v]]]:
                    waiting[v] += 1
                    red[v] = 1
                    at_red += 1
            lead = old
            has_lead = True
            v = following

    for s in range(seg_len.shape[0]):
        if pend_head[s] < 0:
            continue
        tl = tail[s]
        if tl < 0 or pos[tl] >= spacing:
            v = _pop(pend_head, pend_tail, nxt, s)
            _push(head, tail, nxt, s, v)
            pos[v] = 0.0
            state[v] = ON_ROAD
            stamp[v] = t
    return arrived, at_red
