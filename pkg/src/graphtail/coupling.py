"""Exact finite-probability engine for tree-dependent joints and their couplings.

Everything here is an exhaustive finite sum: joints are explicit pmfs over a
small product space, couplings are explicit pmfs over the product of two
copies of that space, and every lemma-style statement becomes a deviation
that is exactly zero (rational arithmetic) or bounded by 1e-12 (floats).
The module refuses instances beyond its caps rather than subsampling; its
whole value is exactness.

Coordinate conventions: a joint's coordinates are the vertex labels 1..n of
its dependency graph.  Coupling-related operations re-express the joint in
the relabeled order of a rooted ``OrderedTree`` (descendants before
ancestors, root last); contexts such as ``(i, prefix, a, b)`` always refer to
that relabeled order.  ``relabel_joint`` exposes the permutation.
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from . import graph as graphmod
from .covers import LipschitzProfile, lipschitz_profile, uniform_profile
from .errors import InputError, KindError, ScaleError
from .graph import Graph, OrderedTree, rooted_order

MAX_COORDINATES = 8
MAX_ALPHABET = 6
MAX_LATENT_CONFIGS = 10**6
FLOAT_TOL = 1e-12

_ZERO = Fraction(0)


# ---------------------------------------------------------------------------
# Joints

@dataclass(frozen=True)
class FiniteJoint:
    """Exact joint distribution of a random vector over a finite product space."""

    spaces: tuple[tuple, ...]
    pmf: dict[tuple, Fraction]
    dependency: Graph | None = None

    @property
    def n(self) -> int:
        return len(self.spaces)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(p, Fraction) for p in self.pmf.values())


def finite_joint(
    spaces: Sequence[Sequence],
    pmf: Mapping[tuple, object],
    dependency: Graph | None = None,
) -> FiniteJoint:
    spaces_t = tuple(tuple(sorted(set(s))) for s in spaces)
    n = len(spaces_t)
    if n > MAX_COORDINATES:
        raise ScaleError(f"exhaustive verification supports n <= {MAX_COORDINATES}, got {n}")
    for k, s in enumerate(spaces_t, start=1):
        if not s:
            raise InputError(f"alphabet of coordinate {k} is empty")
        if len(s) > MAX_ALPHABET:
            raise ScaleError(
                f"alphabet of coordinate {k} has {len(s)} symbols; cap is {MAX_ALPHABET}"
            )
    clean: dict[tuple, Fraction] = {}
    total = _ZERO
    exact = all(isinstance(p, Fraction) for p in pmf.values())
    for x, p in pmf.items():
        if len(x) != n:
            raise InputError(f"assignment {x!r} has wrong arity")
        for k, (xi, space) in enumerate(zip(x, spaces_t), start=1):
            if xi not in space:
                raise InputError(f"value {xi!r} of coordinate {k} outside its alphabet")
        prob = p if isinstance(p, Fraction) else float(p)
        if prob < 0:
            raise InputError(f"negative probability {p} at {x!r}")
        if prob == 0:
            continue
        clean[tuple(x)] = clean.get(tuple(x), _ZERO) + prob
        total += prob
    if exact:
        if total != 1:
            raise InputError(f"probabilities sum to {total}, need exactly 1")
    elif abs(float(total) - 1.0) > FLOAT_TOL:
        raise InputError(f"probabilities sum to {float(total)}, need 1 within {FLOAT_TOL}")
    if dependency is not None and dependency.n != n:
        raise InputError(f"dependency graph has {dependency.n} vertices, joint has {n}")
    return FiniteJoint(spaces=spaces_t, pmf=clean, dependency=dependency)


def product_joint(marginals: Sequence[Sequence[tuple]]) -> FiniteJoint:
    """Independent product of per-coordinate (value, probability) lists."""
    spaces = [tuple(v for v, _ in m) for m in marginals]
    pmf: dict[tuple, Fraction] = {}
    for combo in itertools.product(*marginals):
        x = tuple(v for v, _ in combo)
        p = Fraction(1)
        for _, q in combo:
            p *= q if isinstance(q, Fraction) else Fraction(q)
        if p:
            pmf[x] = p
    return finite_joint(spaces, pmf)


def marginal(joint: FiniteJoint, coords: Iterable[int]) -> dict[tuple, Fraction]:
    """Marginal pmf over the given 1-based coordinates (in ascending order)."""
    cs = sorted(set(coords))
    out: dict[tuple, Fraction] = {}
    for x, p in joint.pmf.items():
        key = tuple(x[c - 1] for c in cs)
        out[key] = out.get(key, _ZERO) + p
    return out


def conditional(joint: FiniteJoint, fixed: Mapping[int, object]) -> FiniteJoint:
    """Exact conditional joint over the coordinates not in ``fixed``.

    The result's coordinates are the remaining original coordinates in
    ascending order; conditioning on every coordinate yields a point mass on
    the empty tuple.  Conditioning on a null event is an error.
    """
    for c in fixed:
        if not (1 <= c <= joint.n):
            raise InputError(f"coordinate {c} outside 1..{joint.n}")
    rest = [c for c in range(1, joint.n + 1) if c not in fixed]
    num: dict[tuple, Fraction] = {}
    z = _ZERO
    for x, p in joint.pmf.items():
        if all(x[c - 1] == v for c, v in fixed.items()):
            key = tuple(x[c - 1] for c in rest)
            num[key] = num.get(key, _ZERO) + p
            z += p
    if z == 0:
        raise InputError(f"conditioning event {dict(fixed)!r} has probability zero")
    spaces = tuple(joint.spaces[c - 1] for c in rest)
    return FiniteJoint(
        spaces=spaces, pmf={k: p / z for k, p in num.items()}, dependency=None
    )


# ---------------------------------------------------------------------------
# Latent-tree construction of dependent joints

@dataclass(frozen=True)
class LatentTreeSpec:
    """Generative model whose output is dependent exactly along a tree.

    Each vertex emits a symbol from its own latent plus the latents of its
    incident edges, so two vertex sets sharing no edge see disjoint latents
    and are independent by construction.
    """

    graph: Graph
    tree: OrderedTree
    vertex_latents: dict[int, tuple[tuple[object, Fraction], ...]]
    edge_latents: dict[tuple[int, int], tuple[tuple[object, Fraction], ...]]
    emit: dict[int, Callable[[object, dict[tuple[int, int], object]], object]]


def finite_dist(pairs: Iterable[tuple[object, object]]) -> tuple[tuple[object, Fraction], ...]:
    out = []
    total = _ZERO
    for v, p in pairs:
        q = p if isinstance(p, Fraction) else Fraction(p)
        if q < 0:
            raise InputError(f"negative latent probability {p}")
        if q:
            out.append((v, q))
            total += q
    if total != 1:
        raise InputError(f"latent probabilities sum to {total}, need 1")
    return tuple(out)


def latent_tree_spec(
    g: Graph,
    vertex_latents: Mapping[int, Iterable[tuple[object, object]]],
    edge_latents: Mapping[tuple[int, int], Iterable[tuple[object, object]]],
    emit: Mapping[int, Callable],
    profile: LipschitzProfile | None = None,
) -> LatentTreeSpec:
    cls = graphmod.classify(g)
    if not (cls.is_forest and cls.tree_count == 1):
        raise KindError("latent-tree specs need a single tree as dependency graph")
    prof = profile if profile is not None else uniform_profile(g.n)
    tree = rooted_order(g, g.vertices, prof.values)
    try:
        vl = {v: finite_dist(vertex_latents[v]) for v in g.vertices}
    except KeyError as exc:
        raise InputError(f"no vertex latent for vertex {exc}") from exc
    normalized_edges = {}
    for (a, b), dist in edge_latents.items():
        normalized_edges[(a, b) if a < b else (b, a)] = dist
    el = {}
    for edge in g.edges:
        if edge not in normalized_edges:
            raise InputError(f"no edge latent for edge {edge}")
        el[edge] = finite_dist(normalized_edges[edge])
    try:
        em = {v: emit[v] for v in g.vertices}
    except KeyError as exc:
        raise InputError(f"no emit rule for vertex {exc}") from exc
    return LatentTreeSpec(graph=g, tree=tree, vertex_latents=vl, edge_latents=el, emit=em)


def build_tree_joint(spec: LatentTreeSpec) -> FiniteJoint:
    """Exact pmf of the emitted vector, by summing over all latent configurations."""
    g = spec.graph
    vorder = list(g.vertices)
    eorder = list(g.edges)
    configs = 1
    for v in vorder:
        configs *= len(spec.vertex_latents[v])
    for e in eorder:
        configs *= len(spec.edge_latents[e])
    if configs > MAX_LATENT_CONFIGS:
        raise ScaleError(f"{configs} latent configurations exceed cap {MAX_LATENT_CONFIGS}")

    incident = {v: [e for e in eorder if v in e] for v in vorder}
    pmf: dict[tuple, Fraction] = {}
    vertex_choices = [spec.vertex_latents[v] for v in vorder]
    edge_choices = [spec.edge_latents[e] for e in eorder]
    for vcombo in itertools.product(*vertex_choices):
        pv = Fraction(1)
        for _, q in vcombo:
            pv *= q
        xi = {v: val for v, (val, _) in zip(vorder, vcombo)}
        for ecombo in itertools.product(*edge_choices):
            p = pv
            for _, q in ecombo:
                p *= q
            eps = {e: val for e, (val, _) in zip(eorder, ecombo)}
            x = tuple(
                spec.emit[v](xi[v], {e: eps[e] for e in incident[v]}) for v in vorder
            )
            pmf[x] = pmf.get(x, _ZERO) + p
    spaces = [sorted({x[k] for x in pmf}) for k in range(g.n)]
    return finite_joint(spaces, pmf, dependency=g)


# ---------------------------------------------------------------------------
# Dependency verification

@dataclass(frozen=True)
class DependencyReport:
    deviation: Fraction | float
    worst_pair: tuple[frozenset[int], frozenset[int]] | None

    def ok(self, tol: float = FLOAT_TOL) -> bool:
        return self.deviation <= tol


def verify_dependency(joint: FiniteJoint, g: Graph) -> DependencyReport:
    """Largest total-variation gap over disjoint non-adjacent vertex-set pairs.

    For every disjoint non-adjacent pair (S, T), compares the joint law on
    S and T against the product of their marginals; a declared dependency
    graph is honest iff the worst gap is zero.
    """
    if g.n != joint.n:
        raise InputError(f"graph has {g.n} vertices, joint has {joint.n}")
    verts = list(range(1, joint.n + 1))
    marg_cache: dict[frozenset[int], dict[tuple, Fraction]] = {}

    def marg(coords: frozenset[int]) -> dict[tuple, Fraction]:
        if coords not in marg_cache:
            marg_cache[coords] = marginal(joint, coords)
        return marg_cache[coords]

    worst: Fraction | float = _ZERO if joint.is_exact else 0.0
    worst_pair = None
    nonempty = [frozenset(c) for r in range(1, joint.n) for c in itertools.combinations(verts, r)]
    for s_set in nonempty:
        for t_set in nonempty:
            if min(t_set) <= min(s_set):
                continue  # unordered pairs once
            if s_set & t_set:
                continue
            if any((u in s_set and w in t_set) or (w in s_set and u in t_set) for u, w in g.edges):
                continue
            union = sorted(s_set | t_set)
            pos = {c: k for k, c in enumerate(union)}
            joint_st = marg(frozenset(union))
            ps, pt = marg(s_set), marg(t_set)
            s_coords = sorted(s_set)
            t_coords = sorted(t_set)
            gap = _ZERO if joint.is_exact else 0.0
            for skey, sp in ps.items():
                for tkey, tp in pt.items():
                    merged = [None] * len(union)
                    for c, v in zip(s_coords, skey):
                        merged[pos[c]] = v
                    for c, v in zip(t_coords, tkey):
                        merged[pos[c]] = v
                    actual = joint_st.get(tuple(merged), _ZERO)
                    gap += abs(actual - sp * tp)
            gap = gap / 2
            if gap > worst:
                worst, worst_pair = gap, (s_set, t_set)
    return DependencyReport(deviation=worst, worst_pair=worst_pair)


# ---------------------------------------------------------------------------
# Lipschitz functions

@dataclass(frozen=True)
class LipschitzFunction:
    """A function on the product space with an exhaustively validated profile."""

    spaces: tuple[tuple, ...]
    table: dict[tuple, Fraction]
    profile: LipschitzProfile

    def value(self, x: tuple) -> Fraction:
        return self.table[x]


def _full_table(spaces: Sequence[Sequence], fn: Callable[[tuple], object]) -> dict[tuple, Fraction]:
    table = {}
    for x in itertools.product(*spaces):
        v = fn(x)
        table[x] = v if isinstance(v, Fraction) else Fraction(v)
    return table


def check_lipschitz(
    spaces: Sequence[Sequence], table: Mapping[tuple, Fraction], profile: LipschitzProfile
) -> None:
    """Exhaustive validation of a declared profile.

    Checks every pair of assignments differing in a single coordinate, which
    bounds every pair by the triangle inequality along a coordinate-by-
    coordinate path, so the Hamming-weighted condition holds for all pairs
    iff it holds here.  Raises naming the first violating pair.
    """
    spaces_t = [tuple(s) for s in spaces]
    for i, space in enumerate(spaces_t):
        ci = profile.values[i]
        for x in itertools.product(*spaces_t):
            fx = table[x]
            for alt in space:
                if alt <= x[i]:
                    continue
                y = x[:i] + (alt,) + x[i + 1 :]
                if abs(fx - table[y]) > ci:
                    raise InputError(
                        f"not {ci}-Lipschitz in coordinate {i + 1}:"
                        f" |f{x} - f{y}| = {abs(fx - table[y])}"
                    )


def derive_profile(spaces: Sequence[Sequence], table: Mapping[tuple, Fraction]) -> LipschitzProfile:
    """Tightest per-coordinate profile of a finite function (exact)."""
    spaces_t = [tuple(s) for s in spaces]
    coeffs = []
    for i, space in enumerate(spaces_t):
        worst = _ZERO
        for x in itertools.product(*spaces_t):
            for alt in space:
                if alt <= x[i]:
                    continue
                y = x[:i] + (alt,) + x[i + 1 :]
                worst = max(worst, abs(table[x] - table[y]))
        coeffs.append(worst)
    return LipschitzProfile(values=tuple(coeffs))


def lipschitz_function(
    spaces: Sequence[Sequence],
    fn: Callable[[tuple], object] | Mapping[tuple, object],
    profile: LipschitzProfile | Sequence | None = None,
) -> LipschitzFunction:
    """Build a function with a validated profile (derived tight when omitted)."""
    spaces_t = tuple(tuple(sorted(set(s))) for s in spaces)
    if callable(fn):
        table = _full_table(spaces_t, fn)
    else:
        table = {tuple(k): (v if isinstance(v, Fraction) else Fraction(v)) for k, v in fn.items()}
        for x in itertools.product(*spaces_t):
            if x not in table:
                raise InputError(f"function table is missing assignment {x!r}")
    if profile is None:
        prof = derive_profile(spaces_t, table)
    else:
        prof = profile if isinstance(profile, LipschitzProfile) else lipschitz_profile(profile)
        if len(prof) != len(spaces_t):
            raise InputError(f"profile length {len(prof)} != {len(spaces_t)} coordinates")
        check_lipschitz(spaces_t, table, prof)
    return LipschitzFunction(spaces=spaces_t, table=table, profile=prof)


def coordinate_sum(spaces: Sequence[Sequence]) -> LipschitzFunction:
    """f(x) = sum of coordinates, with the tight derived profile."""
    return lipschitz_function(spaces, lambda x: sum(Fraction(v) for v in x))


def exact_mean(joint: FiniteJoint, f: LipschitzFunction) -> Fraction:
    return sum((p * f.value(x) for x, p in joint.pmf.items()), _ZERO)


def exact_tail(joint: FiniteJoint, f: LipschitzFunction, t) -> Fraction:
    """P(f - E f >= t), exactly."""
    mean = exact_mean(joint, f)
    threshold = mean + (t if isinstance(t, Fraction) else Fraction(t))
    return sum((p for x, p in joint.pmf.items() if f.value(x) >= threshold), _ZERO)


# ---------------------------------------------------------------------------
# Relabeling to the rooted order

def _check_tree_matches(joint: FiniteJoint, tree: OrderedTree, n: int) -> None:
    if tree.size != n or set(tree.order) != set(range(1, n + 1)):
        raise InputError("ordered tree does not cover the joint's coordinates")


def relabel_joint(joint: FiniteJoint, tree: OrderedTree) -> FiniteJoint:
    """The same distribution with coordinate k = relabeled vertex k of the tree."""
    _check_tree_matches(joint, tree, joint.n)
    perm = [tree.original(k) - 1 for k in range(1, joint.n + 1)]
    spaces = tuple(joint.spaces[p] for p in perm)
    pmf = {tuple(x[p] for p in perm): prob for x, prob in joint.pmf.items()}
    dep = None
    if joint.dependency is not None:
        dep = graphmod.build_graph(
            joint.n,
            [(tree.rank(u), tree.rank(v)) for u, v in joint.dependency.edges],
        )
    return FiniteJoint(spaces=spaces, pmf=pmf, dependency=dep)


def coupling_effective_profile(tree: OrderedTree, profile: LipschitzProfile) -> tuple[Fraction, ...]:
    """Per-step conditional-difference bounds in relabeled order.

    Step i < size is bounded by c_i + c_{parent(i)}; the root step (exposed
    last) is bounded by its own coefficient, the tree minimum.
    """
    eff = []
    for i in range(1, tree.size + 1):
        ci = profile.coefficient(tree.original(i))
        par = tree.parent[i - 1]
        eff.append(ci + profile.coefficient(tree.original(par)) if par else ci)
    return tuple(eff)


# ---------------------------------------------------------------------------
# The coupling construction

@dataclass(frozen=True)
class CouplingContext:
    i: int
    prefix: tuple
    lhs_value: object  # substituted value on the Y side
    rhs_value: object  # substituted value on the Z side


@dataclass(frozen=True)
class CouplingPair:
    """Explicit joint pmf of (Y, Z) in relabeled coordinates.

    Y's first i coordinates equal (prefix, lhs_value); Z's equal
    (prefix, rhs_value); Z copies Y verbatim outside {i, parent(i)}, and
    Z's parent coordinate is redrawn from its conditional law given the
    copied coordinates under the rhs prefix.
    """

    spaces: tuple[tuple, ...]
    pmf: dict[tuple[tuple, tuple], Fraction]
    context: CouplingContext
    parent_coord: int


def _suffix_conditionals(
    pmf: Mapping[tuple, Fraction], i: int
) -> dict[tuple, dict[tuple, Fraction]]:
    """Map (first i coordinates) -> normalized pmf of the remaining ones."""
    grouped: dict[tuple, dict[tuple, Fraction]] = {}
    totals: dict[tuple, Fraction] = {}
    for x, p in pmf.items():
        head, tail = x[:i], x[i:]
        grouped.setdefault(head, {})
        grouped[head][tail] = grouped[head].get(tail, _ZERO) + p
        totals[head] = totals.get(head, _ZERO) + p
    for head, dist in grouped.items():
        z = totals[head]
        for tail in dist:
            dist[tail] /= z
    return grouped


def _maximal_coupling(p: Mapping, q: Mapping) -> dict[tuple, Fraction]:
    """Deterministic maximal coupling of two pmfs over the same value set.

    Shared mass sits on the diagonal; the leftovers are matched in sorted
    value order.  Equal inputs couple to the identity.
    """
    out: dict[tuple, Fraction] = {}
    left_p: list[list] = []
    left_q: list[list] = []
    for v in sorted(set(p) | set(q)):
        shared = min(p.get(v, _ZERO), q.get(v, _ZERO))
        if shared:
            out[(v, v)] = shared
        if p.get(v, _ZERO) > shared:
            left_p.append([v, p[v] - shared])
        if q.get(v, _ZERO) > shared:
            left_q.append([v, q[v] - shared])
    a = b = 0
    while a < len(left_p) and b < len(left_q):
        y, wp = left_p[a]
        z, wq = left_q[b]
        w = min(wp, wq)
        out[(y, z)] = out.get((y, z), _ZERO) + w
        left_p[a][1] -= w
        left_q[b][1] -= w
        if left_p[a][1] == 0:
            a += 1
        if left_q[b][1] == 0:
            b += 1
    return out


def build_coupling(
    joint: FiniteJoint,
    tree: OrderedTree,
    i: int,
    prefix: tuple,
    lhs_value,
    rhs_value,
    check_dependency: bool = True,
) -> CouplingPair:
    """Couple the two conditional laws that differ only in coordinate i.

    ``prefix`` fixes relabeled coordinates 1..i-1; the Y side conditions on
    coordinate i = lhs_value, the Z side on rhs_value.  Requires a
    tree-dependent joint (checked unless the caller has already verified it):
    without tree-dependence the redraw of the parent coordinate can hit a
    zero-probability conditioning event while carrying mass.
    """
    n = joint.n
    if not (1 <= i <= n - 1):
        raise InputError(f"coordinate i must be in 1..{n - 1}, got {i}")
    if len(prefix) != i - 1:
        raise InputError(f"prefix has {len(prefix)} values, needs {i - 1}")
    if check_dependency:
        dep_graph = joint.dependency
        if dep_graph is None:
            raise InputError("joint declares no dependency graph to verify against")
        report = verify_dependency(joint, dep_graph)
        tol = 0 if joint.is_exact else FLOAT_TOL
        if not report.ok(tol):
            raise KindError(
                f"joint is not dependent along its declared tree"
                f" (deviation {report.deviation} on pair {report.worst_pair})"
            )

    rl = relabel_joint(joint, tree)
    rest = tree.exposure_rest[i - 1]
    parent_coord = tree.parent[i - 1]
    rest_pos = sorted(rest)

    conds = _suffix_conditionals(rl.pmf, i)
    lhs_head = prefix + (lhs_value,)
    rhs_head = prefix + (rhs_value,)
    if lhs_head not in conds:
        raise InputError(f"conditioning event {lhs_head!r} has probability zero")
    if rhs_head not in conds:
        raise InputError(f"conditioning event {rhs_head!r} has probability zero")
    lhs_suffix = conds[lhs_head]
    rhs_suffix = conds[rhs_head]

    def split(tail: tuple) -> tuple[tuple, object]:
        return tuple(tail[c - i - 1] for c in rest_pos), tail[parent_coord - i - 1]

    def parent_laws(suffix: Mapping[tuple, Fraction]):
        by_key: dict[tuple, dict[object, Fraction]] = {}
        totals: dict[tuple, Fraction] = {}
        for tail, p in suffix.items():
            key, par = split(tail)
            by_key.setdefault(key, {})
            by_key[key][par] = by_key[key].get(par, _ZERO) + p
            totals[key] = totals.get(key, _ZERO) + p
        return by_key, totals

    lhs_by_key, lhs_totals = parent_laws(lhs_suffix)
    rhs_by_key, rhs_totals = parent_laws(rhs_suffix)

    def assemble(key: tuple, par) -> tuple:
        tail = [None] * (n - i)
        for idx, c in enumerate(rest_pos):
            tail[c - i - 1] = key[idx]
        tail[parent_coord - i - 1] = par
        return tuple(tail)

    # The copied coordinates keep the lhs law; given them, the parent
    # coordinate of the Z side is redrawn with its rhs conditional law,
    # coupled maximally to the Y side so equal laws coincide pointwise.
    pair_pmf: dict[tuple[tuple, tuple], Fraction] = {}
    for key, mass in lhs_totals.items():
        if key not in rhs_by_key:
            raise KindError(
                "coupling context unreachable: the copied coordinates have zero"
                " probability under the substituted prefix, so the joint is not"
                " tree-dependent for this tree"
            )
        p_dist = {v: w / mass for v, w in lhs_by_key[key].items()}
        q_dist = {v: w / rhs_totals[key] for v, w in rhs_by_key[key].items()}
        for (y_par, z_par), w in _maximal_coupling(p_dist, q_dist).items():
            y_point = lhs_head + assemble(key, y_par)
            z_point = rhs_head + assemble(key, z_par)
            weight = mass * w
            if weight:
                pair_pmf[(y_point, z_point)] = (
                    pair_pmf.get((y_point, z_point), _ZERO) + weight
                )
    return CouplingPair(
        spaces=rl.spaces,
        pmf=pair_pmf,
        context=CouplingContext(i=i, prefix=prefix, lhs_value=lhs_value, rhs_value=rhs_value),
        parent_coord=parent_coord,
    )


def coupling_disagreements(pair: CouplingPair) -> dict[int, Fraction]:
    """P(Y_j != Z_j) per relabeled coordinate, from the coupled pmf."""
    n = len(pair.spaces)
    out = {j: _ZERO for j in range(1, n + 1)}
    for (y, z), p in pair.pmf.items():
        for j in range(1, n + 1):
            if y[j - 1] != z[j - 1]:
                out[j] += p
    return out


def _tv(a: Mapping[tuple, Fraction], b: Mapping[tuple, Fraction]):
    keys = set(a) | set(b)
    gap = sum((abs(a.get(k, _ZERO) - b.get(k, _ZERO)) for k in keys), _ZERO)
    return gap / 2


def verify_coupling_marginals(
    pair: CouplingPair, joint: FiniteJoint, tree: OrderedTree
) -> Fraction | float:
    """Worst TV gap between the coupled suffix marginals and their target laws."""
    rl = relabel_joint(joint, tree)
    i = pair.context.i
    conds = _suffix_conditionals(rl.pmf, i)
    lhs_target = conds[pair.context.prefix + (pair.context.lhs_value,)]
    rhs_target = conds[pair.context.prefix + (pair.context.rhs_value,)]
    y_marg: dict[tuple, Fraction] = {}
    z_marg: dict[tuple, Fraction] = {}
    for (y, z), p in pair.pmf.items():
        y_marg[y[i:]] = y_marg.get(y[i:], _ZERO) + p
        z_marg[z[i:]] = z_marg.get(z[i:], _ZERO) + p
    return max(_tv(y_marg, lhs_target), _tv(z_marg, rhs_target))


def all_coupling_contexts(joint: FiniteJoint, tree: OrderedTree):
    """Every (i, prefix, a, b) with positive prefix-value probabilities, a < b."""
    rl = relabel_joint(joint, tree)
    n = joint.n
    for i in range(1, n):
        heads = sorted({x[:i] for x in rl.pmf})
        by_prefix: dict[tuple, set] = {}
        for head in heads:
            by_prefix.setdefault(head[:-1], set()).add(head[-1])
        for prefix in sorted(by_prefix):
            values = sorted(by_prefix[prefix])
            for a, b in itertools.combinations(values, 2):
                yield i, prefix, a, b


def verify_all_couplings(joint: FiniteJoint, tree: OrderedTree) -> Fraction | float:
    """Max marginal deviation of the coupling over every valid context."""
    dep = joint.dependency
    if dep is None:
        raise InputError("joint declares no dependency graph")
    report = verify_dependency(joint, dep)
    if not report.ok(0 if joint.is_exact else FLOAT_TOL):
        raise KindError(f"joint is not tree-dependent (deviation {report.deviation})")
    worst: Fraction | float = _ZERO if joint.is_exact else 0.0
    for i, prefix, a, b in all_coupling_contexts(joint, tree):
        pair = build_coupling(joint, tree, i, prefix, a, b, check_dependency=False)
        worst = max(worst, verify_coupling_marginals(pair, joint, tree))
    return worst


# ---------------------------------------------------------------------------
# Lemma-style exhaustive checks

def verify_independence_lemma(joint: FiniteJoint, tree: OrderedTree, i: int) -> Fraction | float:
    """Largest change in the copied coordinates' law when coordinate i is swapped.

    For each positive prefix of length i-1, compares the conditional law of
    the non-parent future coordinates across the possible values at i; under
    tree-dependence the value at i cannot matter.
    """
    n = joint.n
    if not (1 <= i <= n - 1):
        raise InputError(f"coordinate i must be in 1..{n - 1}, got {i}")
    rl = relabel_joint(joint, tree)
    rest = sorted(tree.exposure_rest[i - 1])
    conds = _suffix_conditionals(rl.pmf, i)
    by_prefix: dict[tuple, list[tuple]] = {}
    for head in conds:
        by_prefix.setdefault(head[:-1], []).append(head)
    worst: Fraction | float = _ZERO if joint.is_exact else 0.0
    for prefix, heads in by_prefix.items():
        dists = []
        for head in sorted(heads, key=lambda h: repr(h[-1])):
            proj: dict[tuple, Fraction] = {}
            for tail, p in conds[head].items():
                key = tuple(tail[c - i - 1] for c in rest)
                proj[key] = proj.get(key, _ZERO) + p
            dists.append(proj)
        for da, db in itertools.combinations(dists, 2):
            for key in set(da) | set(db):
                gap = abs(da.get(key, _ZERO) - db.get(key, _ZERO))
                if gap > worst:
                    worst = gap
    return worst


def verify_difference_bound(
    joint: FiniteJoint, tree: OrderedTree, f: LipschitzFunction
) -> Fraction | float:
    """Worst excess of conditional-expectation swings over c_i + c_{parent(i)}.

    Nonpositive means the one-substitution bound holds at every non-root
    step, for every positive prefix and value pair.
    """
    n = joint.n
    rl = relabel_joint(joint, tree)
    inv = [tree.rank(v) for v in range(1, n + 1)]  # original -> relabel
    f_rl: dict[tuple, Fraction] = {}
    for x, _ in rl.pmf.items():
        original = tuple(x[inv[v - 1] - 1] for v in range(1, n + 1))
        f_rl[x] = f.value(original)
    worst = None
    for i in range(1, n):
        ci = f.profile.coefficient(tree.original(i))
        cp = f.profile.coefficient(tree.original(tree.parent[i - 1]))
        budget = ci + cp
        sums: dict[tuple, Fraction] = {}
        totals: dict[tuple, Fraction] = {}
        for x, p in rl.pmf.items():
            head = x[:i]
            sums[head] = sums.get(head, _ZERO) + p * f_rl[x]
            totals[head] = totals.get(head, _ZERO) + p
        by_prefix: dict[tuple, list[Fraction]] = {}
        for head, tot in totals.items():
            by_prefix.setdefault(head[:-1], []).append(sums[head] / tot)
        for prefix, means in by_prefix.items():
            if len(means) < 2:
                continue
            excess = max(means) - min(means) - budget
            if worst is None or excess > worst:
                worst = excess
    return worst if worst is not None else -max(f.profile.values, default=_ZERO)


class SupInfViolation(InputError):
    """The per-step swing condition failed; carries the violating step and prefix."""

    def __init__(self, i: int, prefix: tuple, swing, budget):
        self.i = i
        self.prefix = prefix
        self.swing = swing
        self.budget = budget
        super().__init__(
            f"conditional swing {swing} at coordinate {i}, prefix {prefix!r},"
            f" exceeds the declared bound {budget}"
        )


def mgf_check(
    joint: FiniteJoint,
    f: LipschitzFunction,
    effective_c: Sequence,
    s_grid: Sequence[float],
) -> float:
    """Worst ratio of the exact mgf to its sub-Gaussian envelope.

    First exhaustively verifies the swing condition in the joint's own
    coordinate order: for every step i and positive prefix, the spread of
    E[f | prefix, value] over values at i must be within effective_c[i-1]
    (raising ``SupInfViolation`` otherwise).  Then returns
    max over s of  E exp(s (f - Ef)) / exp(s^2 sum_i c_i^2 / 8).
    """
    n = joint.n
    eff = [c if isinstance(c, Fraction) else Fraction(c) for c in effective_c]
    if len(eff) != n:
        raise InputError(f"effective profile has {len(eff)} entries, needs {n}")
    for i in range(1, n + 1):
        sums: dict[tuple, Fraction] = {}
        totals: dict[tuple, Fraction] = {}
        for x, p in joint.pmf.items():
            head = x[:i]
            sums[head] = sums.get(head, _ZERO) + p * f.value(x)
            totals[head] = totals.get(head, _ZERO) + p
        by_prefix: dict[tuple, list[Fraction]] = {}
        for head, tot in totals.items():
            by_prefix.setdefault(head[:-1], []).append(sums[head] / tot)
        for prefix, means in by_prefix.items():
            if len(means) < 2:
                continue
            swing = max(means) - min(means)
            if swing > eff[i - 1]:
                raise SupInfViolation(i, prefix, swing, eff[i - 1])

    mean = exact_mean(joint, f)
    var_budget = float(sum((c * c for c in eff), _ZERO))
    worst = 0.0
    for s in s_grid:
        if s <= 0:
            raise InputError(f"mgf grid points must be positive, got {s}")
        mgf = sum(float(p) * math.exp(s * float(f.value(x) - mean)) for x, p in joint.pmf.items())
        envelope = math.exp(s * s * var_budget / 8.0)
        worst = max(worst, mgf / envelope)
    return worst
