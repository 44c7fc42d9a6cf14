"""Shared fixtures: standard graphs, seeded random structures, and LP oracles.

The scipy covering-LP oracle and the brute-force enumerations here are kept
independent of the library's own simplex / backtracking code on purpose:
golden values asserted in the tests were computed through these paths.
"""

import itertools
import random
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from graphtail.coupling import build_tree_joint, latent_tree_spec
from graphtail.covers import lipschitz_profile
from graphtail.graph import Graph, build_graph


# ---------------------------------------------------------------------------
# Standard graphs

@pytest.fixture
def k3() -> Graph:
    return build_graph(3, [(1, 2), (2, 3), (1, 3)])


@pytest.fixture
def path3() -> Graph:
    return build_graph(3, [(1, 2), (2, 3)])


@pytest.fixture
def empty3() -> Graph:
    return build_graph(3, [])


@pytest.fixture
def example9() -> Graph:
    """Triangle on {1,2,3} plus six isolated vertices."""
    return build_graph(9, [(1, 2), (1, 3), (2, 3)])


def complete_graph(n: int) -> Graph:
    return build_graph(n, [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)])


def cycle_graph(n: int) -> Graph:
    return build_graph(n, [(i, i % n + 1) for i in range(1, n + 1)])


# ---------------------------------------------------------------------------
# Brute-force enumeration oracles

def brute_independent_sets(g: Graph) -> set[frozenset[int]]:
    out = set()
    verts = list(g.vertices)
    for r in range(1, g.n + 1):
        for combo in itertools.combinations(verts, r):
            cset = set(combo)
            if not any(u in cset and v in cset for u, v in g.edges):
                out.add(frozenset(combo))
    return out


def brute_induced_forests(g: Graph) -> set[frozenset[int]]:
    out = set()
    verts = list(g.vertices)
    for r in range(1, g.n + 1):
        for combo in itertools.combinations(verts, r):
            if _acyclic_brute(g, set(combo)):
                out.add(frozenset(combo))
    return out


def _acyclic_brute(g: Graph, subset: set[int]) -> bool:
    edges = [(u, v) for u, v in g.edges if u in subset and v in subset]
    parent = {v: v for v in subset}

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for u, v in edges:
        ru, rv = find(u), find(v)
        if ru == rv:
            return False
        parent[ru] = rv
    return True


# ---------------------------------------------------------------------------
# Covering-LP oracle (floating point, scipy HiGHS)

def lp_cover_oracle(n: int, columns: list[frozenset[int]], costs: list[float]) -> float:
    """Optimal value of min c'w s.t. coverage >= 1, via an independent solver."""
    a_ub = np.zeros((n, len(columns)))
    for j, col in enumerate(columns):
        for v in col:
            a_ub[v - 1, j] = -1.0
    res = linprog(costs, A_ub=a_ub, b_ub=-np.ones(n), bounds=(0, None), method="highs")
    assert res.status == 0, res.message
    return float(res.fun)


# ---------------------------------------------------------------------------
# Random structures (all seeded by the caller)

def random_tree_edges(n: int, rng: random.Random) -> list[tuple[int, int]]:
    """Uniform-ish random labeled tree via random attachment."""
    order = list(range(1, n + 1))
    rng.shuffle(order)
    return [(order[i], order[rng.randrange(i)]) for i in range(1, n)]


def random_forest_edges(n: int, k: int, rng: random.Random) -> list[tuple[int, int]]:
    """A labeled forest on n vertices with exactly k trees."""
    comp = {v: v for v in range(1, n + 1)}

    def find(x):
        while comp[x] != x:
            x = comp[x]
        return x

    edges = []
    while len({find(v) for v in range(1, n + 1)}) > k:
        u, v = rng.randrange(1, n + 1), rng.randrange(1, n + 1)
        ru, rv = find(u), find(v)
        if ru != rv:
            edges.append((u, v))
            comp[ru] = rv
    return edges


def random_profile(n: int, rng: random.Random, allow_zero: bool = False):
    lo = 0 if allow_zero else 1
    return lipschitz_profile([Fraction(rng.randint(lo, 8), rng.randint(1, 4)) for _ in range(n)])


def random_finite_dist(size: int, rng: random.Random) -> list[tuple[int, Fraction]]:
    weights = [rng.randint(1, 5) for _ in range(size)]
    total = sum(weights)
    return [(v, Fraction(w, total)) for v, w in enumerate(weights)]


def random_tree_joint(n: int, rng: random.Random, max_alphabet: int = 3):
    """A random latent-tree joint: tree, per-vertex/edge latents, random emit tables."""
    g = build_graph(n, random_tree_edges(n, rng)) if n > 1 else build_graph(1, [])
    vertex_latents = {v: random_finite_dist(rng.randint(2, 3), rng) for v in g.vertices}
    edge_latents = {e: random_finite_dist(rng.randint(2, 3), rng) for e in g.edges}
    emit = {}
    for v in g.vertices:
        incident = sorted(e for e in g.edges if v in e)
        out_size = rng.randint(2, max_alphabet)
        table = {}
        combos = itertools.product(
            range(len(vertex_latents[v])),
            *[range(len(edge_latents[e])) for e in incident],
        )
        for combo in combos:
            table[combo] = rng.randrange(out_size)
        emit[v] = _table_emit(incident, table)
    profile = random_profile(n, rng)
    spec = latent_tree_spec(g, vertex_latents, edge_latents, emit, profile=profile)
    return build_tree_joint(spec), spec.tree, g


def _table_emit(incident, table):
    def fn(xi, ev):
        return table[(xi,) + tuple(ev[e] for e in incident)]

    return fn


TOY_JOINT_SIZES = [2, 2, 2, 3, 3, 3, 3, 4, 4, 4, 4, 4, 5, 5, 5, 5, 6, 6, 3, 4]


@pytest.fixture(scope="session")
def toy_joints():
    """Twenty seeded tree-dependent joints (n <= 6, alphabets <= 4)."""
    rng = random.Random(20240817)
    out = []
    for n in TOY_JOINT_SIZES:
        max_alpha = 4 if n <= 4 else (3 if n == 5 else 2)
        out.append(random_tree_joint(n, rng, max_alphabet=max_alpha))
    return out
