"""Compiled inner loops.

Both kernels use the off-diagonal local field ``f_k = sum_{j != k} J_kj s_j``;
flipping ``s_k`` changes ``H = -(1/2) s.J.s`` by ``2 s_k f_k`` (old ``s_k``)
whatever the diagonal holds.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _ctz(k):
    c = 0
    while (k & 1) == 0:
        k >>= 1
        c += 1
    return c


@njit(cache=True, nogil=True)
def gray_energies(J, start, count, out):
    """Energies of Gray-code configurations ``start .. start+count-1``.

    Configuration index ``k`` is the bit pattern ``k ^ (k >> 1)``; bit
    ``i`` set means spin ``i`` is up.  The first energy is computed from
    scratch, the rest by single-flip updates.
    """
    n = J.shape[0]
    code = start ^ (start >> 1)
    s = np.empty(n)
    for i in range(n):
        s[i] = 1.0 if (code >> i) & 1 else -1.0
    f = np.zeros(n)
    e = 0.0
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if j != i:
                acc += J[i, j] * s[j]
        f[i] = acc
        e += J[i, i] + s[i] * acc
    e = -0.5 * e
    out[0] = e
    for t in range(1, count):
        k = _ctz(start + t)
        sk = s[k]
        e += 2.0 * sk * f[k]
        for i in range(n):
            if i != k:
                f[i] -= 2.0 * sk * J[i, k]
        s[k] = -sk
        out[t] = e


@njit(cache=True, nogil=True)
def local_fields(J, s):
    n = J.shape[0]
    f = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for j in range(n):
            if j != i:
                acc += J[i, j] * s[j]
        f[i] = acc
    return f


@njit(cache=True, nogil=True)
def metropolis_sweeps(J, beta, s, f, energy, sites, uniforms, n_sweeps, thinning, offset,
                      pairs, out_e, out_pairs):
    """Run ``n_sweeps`` Metropolis sweeps in place.

    ``sites`` and ``uniforms`` hold ``n_sweeps * n`` pre-drawn proposals.
    Sweeps are numbered from ``offset``; after every sweep whose number is
    a multiple of ``thinning`` the energy and the products ``s_a s_b`` for
    each row of ``pairs`` are recorded; ``thinning <= 0`` records nothing.
    Returns the new energy, number of accepted flips and number of records
    written.
    """
    n = J.shape[0]
    accepted = 0
    rec = 0
    p = 0
    for sweep in range(n_sweeps):
        for _ in range(n):
            k = sites[p]
            u = uniforms[p]
            p += 1
            sk = s[k]
            dE = 2.0 * sk * f[k]
            if dE <= 0.0 or u < np.exp(-beta * dE):
                for i in range(n):
                    if i != k:
                        f[i] -= 2.0 * sk * J[i, k]
                s[k] = -sk
                energy += dE
                accepted += 1
        if thinning > 0 and (offset + sweep + 1) % thinning == 0:
            out_e[rec] = energy
            for q in range(pairs.shape[0]):
                out_pairs[rec, q] = s[pairs[q, 0]] * s[pairs[q, 1]]
            rec += 1
    return energy, accepted, rec


@njit(cache=True, nogil=True)
def metropolis_histogram(J, beta, s, f, sites, uniforms, n_sweeps, hist):
    """Sweeps that record the visited state index (bit i = spin i up) after each sweep."""
    n = J.shape[0]
    p = 0
    accepted = 0
    for sweep in range(n_sweeps):
        for _ in range(n):
            k = sites[p]
            u = uniforms[p]
            p += 1
            sk = s[k]
            dE = 2.0 * sk * f[k]
            if dE <= 0.0 or u < np.exp(-beta * dE):
                for i in range(n):
                    if i != k:
                        f[i] -= 2.0 * sk * J[i, k]
                s[k] = -sk
                accepted += 1
        idx = 0
        for i in range(n):
            if s[i] > 0:
                idx |= 1 << i
        hist[idx] += 1
    return accepted
