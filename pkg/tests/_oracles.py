"""Independent brute-force oracles shared by the test modules.

Everything here recomputes quantities definitionally (explicit loops over
node pairs, explicit subset filtering, dense eigensolves) so the fast paths
in the package are checked against a genuinely different computation.
"""

from __future__ import annotations

import numpy as np

from bitree_embed.operators import MassFunction, energy_density
from bitree_embed.trees import BiTreeTopology


def brute_forward(topo: BiTreeTopology, vals: np.ndarray) -> np.ndarray:
    out = topo.zeros(dtype=vals.dtype)
    for a in topo.nodes():
        out[a] = sum(vals[b] for b in topo.nodes() if topo.leq(a, b))
    return out


def brute_adjoint(topo: BiTreeTopology, vals: np.ndarray) -> np.ndarray:
    out = topo.zeros(dtype=vals.dtype)
    for a in topo.nodes():
        out[a] = sum(vals[b] for b in topo.nodes() if topo.leq(b, a))
    return out


def brute_box(mu, w):
    topo = mu.topo
    e = energy_density(mu, w)
    ist = brute_adjoint(topo, mu.values)
    best = 0.0
    for node in topo.nodes():
        if ist[node] > 0:
            num = sum(e[a] for a in topo.nodes() if topo.leq(a, node))
            best = max(best, num / ist[node])
    return best


def downsets_by_filtering(topo: BiTreeTopology):
    """All down-sets of a tiny bi-tree by filtering every subset."""
    nodes = list(topo.nodes())
    n = len(nodes)
    assert n <= 15, "filter oracle is for tiny instances"
    out = []
    for bits in range(1 << n):
        members = {nodes[i] for i in range(n) if bits >> i & 1}
        closed = all(
            (b in members) or not topo.leq(b, a)
            for a in members
            for b in nodes
        )
        if closed:
            out.append(frozenset(members))
    return out


def brute_carleson(mu, w):
    """Max ratio over down-sets found by subset filtering (tiny only)."""
    topo = mu.topo
    e = energy_density(mu, w)
    best = 0.0
    for members in downsets_by_filtering(topo):
        md = sum(mu.values[n] for n in members)
        if md > 0:
            best = max(best, sum(e[n] for n in members) / md)
    return best


def brute_hereditary(mu, w):
    """Definitional max over subsets of the support, energies from scratch."""
    topo = mu.topo
    supp = [(int(a), int(b)) for a, b in zip(*np.nonzero(mu.values > 0))]
    n = len(supp)
    assert n <= 14
    best = 0.0
    for bits in range(1, 1 << n):
        mask = np.zeros(topo.shape, dtype=bool)
        for i in range(n):
            if bits >> i & 1:
                mask[supp[i]] = True
        restricted = MassFunction(topo, mu.values * mask)
        den = float(restricted.total_mass)
        if den > 0:
            best = max(best, float(energy_density(restricted, w).sum()) / den)
    return best


def dense_embedding_eig(mu, w):
    """Top eigenvalue of the explicitly assembled kernel matrix."""
    from bitree_embed.constants import lca_kernel

    topo = mu.topo
    supp = [(int(a), int(b)) for a, b in zip(*np.nonzero(mu.values > 0))]
    if not supp:
        return 0.0
    k = lca_kernel(topo, supp, w)
    m = np.array([mu.values[s] for s in supp])
    b = np.sqrt(m)[:, None] * k * np.sqrt(m)[None, :]
    return float(np.linalg.eigvalsh(b)[-1])
