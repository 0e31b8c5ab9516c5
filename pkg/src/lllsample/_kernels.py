"""Numba kernels behind the inverse-sampling subroutine and the Glauber chain.

All formula data arrive as the CSR arrays of :class:`lllsample.core.FlatFormula`.
Random numbers come from a ``numpy.random.Generator`` passed in by the
caller, so every chain owns its stream.

Return codes of the sampling kernels: ``OK``, ``GIANT`` (a component grew
past ``L`` constraints) and ``OVERFLOW`` (rejection sampling used up ``R``
trials).
"""

import numpy as np
from numba import njit

# Reference counting is disabled: the kernels never allocate, and the
# atomic increments it adds around every nested call dominated step time.
kernel = njit(cache=True, _nrt=False)
# Hot helpers take many array arguments; inlining them avoids passing every
# array field on each call.
inline_kernel = njit(cache=True, _nrt=False, inline="always")

OK = 0
GIANT = 1
OVERFLOW = 2

# indices into the per-call statistics array
ST_COMPONENTS = 0
ST_TRIALS = 1
ST_SCANNED = 2
ST_CONSTRAINTS = 3  # constraints in the found components
N_STATS = 4

_TWO53 = 9007199254740992


@inline_kernel
def uniform_below(rng, q):
    """Unbiased integer in ``[0, q)`` from the 53 random bits of ``rng.random()``."""
    limit = _TWO53 - _TWO53 % q
    while True:
        k = np.int64(rng.random() * _TWO53)
        if k < limit:
            return k % q


@inline_kernel
def project_value(q, s, x):
    b = q // s
    r = q - b * s
    cut = r * (b + 1)
    if x < cut:
        return x // (b + 1)
    return r + (x - cut) // b


@inline_kernel
def invert_value(q, s, y, rng):
    b = q // s
    r = q - b * s
    if y < r:
        lo = y * (b + 1)
        size = b + 1
    else:
        lo = r * (b + 1) + (y - r) * b
        size = b
    if size == 1:
        return lo
    return lo + uniform_below(rng, size)


@inline_kernel
def satisfied_by_projection(c, cons_ptr, cons_var, cons_tau, y, in_lam):
    """True iff some pinned variable of ``c`` carries a symbol other than ``tau_c``."""
    for i in range(cons_ptr[c], cons_ptr[c + 1]):
        u = cons_var[i]
        if in_lam[u] and y[u] != cons_tau[i]:
            return True
    return False


@inline_kernel
def _add_vars(c, cons_ptr, cons_var, vmark, stamp, comp_vars, nv):
    for i in range(cons_ptr[c], cons_ptr[c + 1]):
        u = cons_var[i]
        if vmark[u] != stamp:
            vmark[u] = stamp
            comp_vars[nv] = u
            nv += 1
    return nv


@inline_kernel
def factorize(cons_ptr, cons_var, cons_tau, var_ptr, var_cons, adj_ptr, adj,
              y, in_lam, seeds, L, ws_cmark, ws_vmark, ws_stamp, ws_stack,
              comp_cons, comp_vars, comp_cptr, comp_vptr, stats):
    """Components of the unsatisfied-constraint hypergraph that meet ``seeds``.

    Components are written as ranges ``comp_cptr[i]:comp_cptr[i+1]`` into
    ``comp_cons`` and ``comp_vptr[i]:comp_vptr[i+1]`` into ``comp_vars``.
    Returns ``(code, n_components)``; the search stops as soon as one
    component holds more than ``L`` constraints.
    """
    stamp = ws_stamp[0] + 1
    ws_stamp[0] = stamp
    ncomp = 0
    nc = 0
    nv = 0
    comp_cptr[0] = 0
    comp_vptr[0] = 0
    scanned = 0
    for si in range(seeds.shape[0]):
        v = seeds[si]
        if ws_vmark[v] == stamp:
            continue
        ws_vmark[v] = stamp
        comp_vars[nv] = v
        nv += 1
        start = nc
        sp = 0
        for j in range(var_ptr[v], var_ptr[v + 1]):
            c = var_cons[j]
            scanned += 1
            if ws_cmark[c] == stamp:
                continue
            ws_cmark[c] = stamp
            if not satisfied_by_projection(c, cons_ptr, cons_var, cons_tau, y, in_lam):
                comp_cons[nc] = c
                nc += 1
                if nc - start > L:
                    stats[ST_SCANNED] += scanned
                    return GIANT, ncomp
                ws_stack[sp] = c
                sp += 1
                nv = _add_vars(c, cons_ptr, cons_var, ws_vmark, stamp, comp_vars, nv)
        while sp > 0:
            sp -= 1
            c = ws_stack[sp]
            for j in range(adj_ptr[c], adj_ptr[c + 1]):
                c2 = adj[j]
                scanned += 1
                if ws_cmark[c2] == stamp:
                    continue
                ws_cmark[c2] = stamp
                if not satisfied_by_projection(c2, cons_ptr, cons_var, cons_tau, y, in_lam):
                    comp_cons[nc] = c2
                    nc += 1
                    if nc - start > L:
                        stats[ST_SCANNED] += scanned
                        return GIANT, ncomp
                    ws_stack[sp] = c2
                    sp += 1
                    nv = _add_vars(c2, cons_ptr, cons_var, ws_vmark, stamp, comp_vars, nv)
        ncomp += 1
        comp_cptr[ncomp] = nc
        comp_vptr[ncomp] = nv
    stats[ST_SCANNED] += scanned
    stats[ST_COMPONENTS] += ncomp
    stats[ST_CONSTRAINTS] += nc
    return OK, ncomp


@inline_kernel
def _draw_component(vs, ve, comp_vars, q, s, y, in_lam, x, rng):
    for i in range(vs, ve):
        u = comp_vars[i]
        if in_lam[u]:
            x[u] = invert_value(q[u], s[u], y[u], rng)
        else:
            x[u] = uniform_below(rng, q[u])


@inline_kernel
def _component_ok(cs, ce, comp_cons, cons_ptr, cons_var, cons_forb, x):
    for i in range(cs, ce):
        c = comp_cons[i]
        hit = True
        for j in range(cons_ptr[c], cons_ptr[c + 1]):
            if x[cons_var[j]] != cons_forb[j]:
                hit = False
                break
        if hit:
            return False
    return True


@inline_kernel
def rejection_sample(cs, ce, vs, ve, comp_cons, comp_vars, cons_ptr, cons_var,
                     cons_forb, q, s, y, in_lam, R, x, rng, stats):
    """Draw the component's variables until its constraints all hold (at most ``R`` trials).

    A component without constraints needs no trial and is drawn once.
    """
    if ce == cs:
        _draw_component(vs, ve, comp_vars, q, s, y, in_lam, x, rng)
        return True
    for _ in range(R):
        stats[ST_TRIALS] += 1
        _draw_component(vs, ve, comp_vars, q, s, y, in_lam, x, rng)
        if _component_ok(cs, ce, comp_cons, cons_ptr, cons_var, cons_forb, x):
            return True
    return False


@inline_kernel
def inverse_sample(cons_ptr, cons_var, cons_tau, cons_forb, var_ptr, var_cons,
                   adj_ptr, adj, q, s, y, in_lam, seeds, L, R, rng, x,
                   ws_cmark, ws_vmark, ws_stamp, ws_stack,
                   comp_cons, comp_vars, comp_cptr, comp_vptr, stats):
    """One call of the inverse-sampling subroutine; writes ``x`` on ``seeds``.

    On either exception the seeds are redrawn from the plain uniform product
    distribution.
    """
    code, ncomp = factorize(cons_ptr, cons_var, cons_tau, var_ptr, var_cons, adj_ptr, adj,
                            y, in_lam, seeds, L, ws_cmark, ws_vmark, ws_stamp, ws_stack,
                            comp_cons, comp_vars, comp_cptr, comp_vptr, stats)
    if code == OK:
        for i in range(ncomp):
            ok = rejection_sample(comp_cptr[i], comp_cptr[i + 1], comp_vptr[i], comp_vptr[i + 1],
                                  comp_cons, comp_vars, cons_ptr, cons_var, cons_forb,
                                  q, s, y, in_lam, R, x, rng, stats)
            if not ok:
                code = OVERFLOW
                break
    if code != OK:
        for i in range(seeds.shape[0]):
            u = seeds[i]
            x[u] = uniform_below(rng, q[u])
    return code


@kernel
def inverse_sample_batch(cons_ptr, cons_var, cons_tau, cons_forb, var_ptr, var_cons,
                         adj_ptr, adj, q, s, y, in_lam, seeds, L, R, rng, N, out, codes, x,
                         ws_cmark, ws_vmark, ws_stamp, ws_stack,
                         comp_cons, comp_vars, comp_cptr, comp_vptr, stats):
    """``N`` independent calls with the same conditioning; row ``t`` of ``out`` holds call ``t``."""
    for t in range(N):
        codes[t] = inverse_sample(cons_ptr, cons_var, cons_tau, cons_forb, var_ptr, var_cons,
                                  adj_ptr, adj, q, s, y, in_lam, seeds, L, R, rng, x,
                                  ws_cmark, ws_vmark, ws_stamp, ws_stack,
                                  comp_cons, comp_vars, comp_cptr, comp_vptr, stats)
        for i in range(seeds.shape[0]):
            out[t, i] = x[seeds[i]]


@kernel
def run_chain(cons_ptr, cons_var, cons_tau, cons_forb, var_ptr, var_cons,
              adj_ptr, adj, q, s, T, L, R, rng, x, y, counts, stats, max_scanned,
              in_lam, seed, everyone, step_stats, ws_cmark, ws_vmark, ws_stamp, ws_stack,
              comp_cons, comp_vars, comp_cptr, comp_vptr):
    """Projected Glauber dynamics followed by the final full inversion.

    ``counts[code]`` tallies the outcome of every subroutine call and
    ``max_scanned[0]`` records the largest number of constraints scanned by
    a single-site call.  ``in_lam`` (length n), ``seed`` (length 1),
    ``everyone`` (``0..n-1``) and ``step_stats`` are scratch arrays.
    """
    n = q.shape[0]
    for v in range(n):
        in_lam[v] = True
    for i in range(N_STATS):
        step_stats[i] = 0
    if n == 0:
        return
    for v in range(n):
        x[v] = uniform_below(rng, q[v])
        y[v] = project_value(q[v], s[v], x[v])
    for _ in range(T):
        v = uniform_below(rng, n)
        seed[0] = v
        in_lam[v] = False
        before = step_stats[ST_SCANNED]
        code = inverse_sample(cons_ptr, cons_var, cons_tau, cons_forb, var_ptr, var_cons,
                              adj_ptr, adj, q, s, y, in_lam, seed, L, R, rng, x,
                              ws_cmark, ws_vmark, ws_stamp, ws_stack,
                              comp_cons, comp_vars, comp_cptr, comp_vptr, step_stats)
        in_lam[v] = True
        scanned = step_stats[ST_SCANNED] - before
        if scanned > max_scanned[0]:
            max_scanned[0] = scanned
        y[v] = project_value(q[v], s[v], x[v])
        counts[code] += 1
    for i in range(N_STATS):
        stats[i] += step_stats[i]
    code = inverse_sample(cons_ptr, cons_var, cons_tau, cons_forb, var_ptr, var_cons,
                          adj_ptr, adj, q, s, y, in_lam, everyone, L, R, rng, x,
                          ws_cmark, ws_vmark, ws_stamp, ws_stack,
                          comp_cons, comp_vars, comp_cptr, comp_vptr, stats)
    counts[code] += 1


@kernel
def invert_batch(q, s, y, rng, N, out):
    """``N`` independent draws from the preimage of symbol ``y``."""
    for t in range(N):
        out[t] = invert_value(q, s, y, rng)
