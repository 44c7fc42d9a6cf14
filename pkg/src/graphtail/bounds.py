"""Closed-form tail-bound denominators and cross-method comparison reports.

Every method produces a denominator D such that

    P( f(X) - E f(X) >= t )  <=  exp( -2 t^2 / D )

under its own validity assumptions.  ``compare_bounds`` never silently
applies an inapplicable method: reports carry the assumption each method
needs, and methods whose structural precondition fails (a tree bound on a
non-forest, say) are listed with the reason instead of a number.
"""

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

from . import covers as coversmod
from . import graph as graphmod
from .covers import CoverSolution, LipschitzProfile, Strategy
from .errors import DegenerateProfileError, InputError, KindError, ScaleError
from .graph import BlockPartition, Graph

MCDIARMID = "mcdiarmid"
JANSON = "janson"
TREE = "tree"
FOREST = "forest"
DECOMPOSABLE = "decomposable"
M_DEPENDENT = "m_dependent"
M_DEPENDENT_PAULIN = "m_dependent_paulin"

ALL_METHODS = (MCDIARMID, JANSON, TREE, FOREST, DECOMPOSABLE, M_DEPENDENT, M_DEPENDENT_PAULIN)

MIN_BLOCK = "min_block"
PAULIN = "paulin"


@dataclass(frozen=True)
class BoundReport:
    method: str
    t: float
    denominator: float | None
    denominator_exact: Fraction | None
    bound: float | None
    valid_under: str  # "dependence" or "independence-only"
    assumes: str | None = None
    witness: object | None = None  # CoverSolution | BlockPartition | tree decomposition
    applicable: bool = True
    reason: str | None = None


def mcdiarmid_denominator(profile: LipschitzProfile) -> Fraction:
    """Sum of squared coefficients (valid for independent coordinates only)."""
    return profile.norm_sq


def janson_denominator(
    g: Graph, profile: LipschitzProfile, cap: int = coversmod.DEFAULT_COLUMN_CAP
) -> tuple[Fraction, CoverSolution]:
    """Fractional chromatic number times the squared coefficient norm."""
    _check_profile(g, profile)
    chi = coversmod.fractional_chromatic_number(g, cap=cap)
    assert chi.objective_exact is not None
    return chi.objective_exact * profile.norm_sq, chi


def forest_denominator(g: Graph, profile: LipschitzProfile) -> Fraction:
    """One squared minimum per tree plus the squared coefficient sum per edge.

    Requires the dependency graph to be a forest; on an edgeless graph this
    collapses to the independent-case denominator.
    """
    _check_profile(g, profile)
    cls = graphmod.classify(g)
    if not cls.is_forest:
        raise KindError(
            "graph contains a cycle; the forest bound does not apply"
            " (use the decomposable bound instead)"
        )
    total = Fraction(0)
    for comp in cls.components:
        m = min(profile.coefficient(v) for v in comp)
        total += m * m
    for u, v in g.edges:
        s = profile.coefficient(u) + profile.coefficient(v)
        total += s * s
    return total


def decomposable_denominator(
    g: Graph,
    profile: LipschitzProfile,
    strategy: Strategy = Strategy.ENUMERATED_LP,
    cap: int = coversmod.DEFAULT_COLUMN_CAP,
) -> tuple[float, CoverSolution]:
    """Optimal (or upper-bounded) squared weighted forest-cover cost."""
    _check_profile(g, profile)
    sol = coversmod.optimize_decomposable_denominator(g, profile, strategy=strategy, cap=cap)
    return sol.objective, sol


def m_dependent_denominator(
    n: int,
    m: int,
    profile: LipschitzProfile,
    variant: str = MIN_BLOCK,
    blocks: BlockPartition | None = None,
) -> tuple[Fraction, BlockPartition]:
    """Block-path denominator for an m-dependent sequence.

    With block sums S_1..S_p over consecutive size-m blocks, this is
    sum_{i<p} (S_i + S_{i+1})^2 plus min_i S_i^2 (or the last block's S_p^2
    under the "paulin" variant, which is never smaller).  A custom grouping
    may be supplied via ``blocks``; no grouping search is attempted.
    """
    if len(profile) != n:
        raise InputError(f"profile length {len(profile)} != n = {n}")
    if variant not in (MIN_BLOCK, PAULIN):
        raise InputError(f"unknown m-dependent variant {variant!r}")
    part = blocks if blocks is not None else graphmod.block_partition(n, m)
    sums = [sum((profile.coefficient(v) for v in blk), Fraction(0)) for blk in part.blocks]
    total = Fraction(0)
    for a, b in zip(sums, sums[1:]):
        total += (a + b) ** 2
    if variant == MIN_BLOCK:
        total += min(s * s for s in sums)
    else:
        total += sums[-1] ** 2
    return total, part


def tail_bound(denominator, t) -> float:
    """exp(-2 t^2 / denominator), clamped to at most 1."""
    if t <= 0:
        raise InputError(f"deviation threshold must be positive, got {t}")
    if denominator <= 0:
        raise DegenerateProfileError(
            "denominator is zero (all-zero Lipschitz profile); the bound is undefined"
        )
    return min(1.0, math.exp(-2.0 * float(t) * float(t) / float(denominator)))


def _check_profile(g: Graph, profile: LipschitzProfile) -> None:
    if len(profile) != g.n:
        raise InputError(f"profile length {len(profile)} != vertex count {g.n}")


def _report(method: str, t: float, den, witness=None, assumes=None, valid="dependence") -> BoundReport:
    exact = den if isinstance(den, Fraction) else None
    den_f = float(den)
    if den_f <= 0:
        return BoundReport(
            method=method,
            t=float(t),
            denominator=den_f,
            denominator_exact=exact,
            bound=None,
            valid_under=valid,
            assumes=assumes,
            witness=witness,
            applicable=False,
            reason="degenerate: all-zero Lipschitz profile",
        )
    return BoundReport(
        method=method,
        t=float(t),
        denominator=den_f,
        denominator_exact=exact,
        bound=tail_bound(den_f, t),
        valid_under=valid,
        assumes=assumes,
        witness=witness,
    )


def _skipped(method: str, t: float, reason: str, valid="dependence") -> BoundReport:
    return BoundReport(
        method=method,
        t=float(t),
        denominator=None,
        denominator_exact=None,
        bound=None,
        valid_under=valid,
        applicable=False,
        reason=reason,
    )


def compare_bounds(
    g: Graph,
    profile: LipschitzProfile,
    t: float,
    methods: tuple[str, ...] | None = None,
    m: int | None = None,
    include_mcdiarmid: bool = False,
    strategy: Strategy = Strategy.ENUMERATED_LP,
    cap: int = coversmod.DEFAULT_COLUMN_CAP,
) -> list[BoundReport]:
    """Every applicable bound at threshold t, best (smallest) first.

    Inapplicable methods are appended with the reason.  The independence-only
    McDiarmid line is included only on request, as a reference that is not
    valid under dependence.  ``m`` activates the m-dependent methods, which
    treat the coordinates as an m-dependent sequence (the caller asserts that
    reading).
    """
    _check_profile(g, profile)
    if methods is None:
        methods = tuple(mm for mm in ALL_METHODS if mm != MCDIARMID or include_mcdiarmid)
    if include_mcdiarmid and MCDIARMID not in methods:
        methods = methods + (MCDIARMID,)

    cls = graphmod.classify(g)
    reports: list[BoundReport] = []
    for method in methods:
        try:
            reports.append(_one_report(g, profile, t, method, cls, m, strategy, cap))
        except ScaleError as exc:
            reports.append(_skipped(method, t, f"scale: {exc}"))
        except DegenerateProfileError as exc:
            reports.append(_skipped(method, t, str(exc)))
    applicable = [r for r in reports if r.applicable]
    skipped = [r for r in reports if not r.applicable]
    applicable.sort(key=lambda r: (r.bound, r.method))
    return applicable + skipped


def _one_report(
    g: Graph,
    profile: LipschitzProfile,
    t: float,
    method: str,
    cls,
    m: int | None,
    strategy: Strategy,
    cap: int,
) -> BoundReport:
    if method == MCDIARMID:
        return _report(
            MCDIARMID,
            t,
            mcdiarmid_denominator(profile),
            assumes="independent coordinates",
            valid="independence-only",
        )
    if method == JANSON:
        den, chi = janson_denominator(g, profile, cap=cap)
        return _report(JANSON, t, den, witness=chi, assumes="sum-type statistic (interval-valued coordinates)")
    if method == TREE:
        if not (cls.is_forest and cls.tree_count == 1):
            return _skipped(TREE, t, "graph is not a single tree")
        return _report(TREE, t, forest_denominator(g, profile), witness=_tree_witness(cls, profile))
    if method == FOREST:
        if not cls.is_forest:
            return _skipped(FOREST, t, "graph is not a forest (use the decomposable bound)")
        return _report(FOREST, t, forest_denominator(g, profile), witness=_tree_witness(cls, profile))
    if method == DECOMPOSABLE:
        den, sol = decomposable_denominator(g, profile, strategy=strategy, cap=cap)
        exact = sol.objective_exact
        return _report(
            DECOMPOSABLE,
            t,
            exact if exact is not None else den,
            witness=sol,
            assumes="forest-decomposable statistic (sums qualify)",
        )
    if method == M_DEPENDENT:
        if m is None:
            return _skipped(M_DEPENDENT, t, "no dependence gap m supplied")
        den, part = m_dependent_denominator(g.n, m, profile, variant=MIN_BLOCK)
        return _report(M_DEPENDENT, t, den, witness=part, assumes=f"coordinates form an {m}-dependent sequence")
    if method == M_DEPENDENT_PAULIN:
        if m is None:
            return _skipped(M_DEPENDENT_PAULIN, t, "no dependence gap m supplied")
        den, part = m_dependent_denominator(g.n, m, profile, variant=PAULIN)
        return _report(M_DEPENDENT_PAULIN, t, den, witness=part, assumes=f"coordinates form an {m}-dependent sequence")
    raise InputError(f"unknown bound method {method!r}")


def _tree_witness(cls, profile: LipschitzProfile) -> list[tuple[tuple[int, ...], Fraction]]:
    """The trees of the forest with the minimum coefficient each contributes."""
    return [
        (tuple(sorted(comp)), min(profile.coefficient(v) for v in comp))
        for comp in cls.components
    ]


# ---------------------------------------------------------------------------
# Report serialization

def _witness_json(witness) -> object:
    if witness is None:
        return None
    if isinstance(witness, list):  # forest witness: (tree vertices, minimum) pairs
        return {"trees": [{"vertices": list(t), "minimum": str(m)} for t, m in witness]}
    if isinstance(witness, CoverSolution):
        return {
            "objective": witness.objective,
            "objective_exact": (
                str(witness.objective_exact) if witness.objective_exact is not None else None
            ),
            "optimality": witness.optimality.value,
            "cover": coversmod.cover_to_json_dict(witness.cover),
        }
    if isinstance(witness, BlockPartition):
        return {"m": witness.m, "blocks": [list(b) for b in witness.blocks]}
    return str(witness)


def report_to_json_dict(r: BoundReport) -> dict:
    return {
        "method": r.method,
        "t": r.t,
        "denominator": r.denominator,
        "denominator_exact": str(r.denominator_exact) if r.denominator_exact is not None else None,
        "bound": r.bound,
        "valid_under": r.valid_under,
        "assumes": r.assumes,
        "applicable": r.applicable,
        "reason": r.reason,
        "witness": _witness_json(r.witness),
    }


REPORT_CSV_COLUMNS = (
    "method",
    "t",
    "denominator",
    "denominator_exact",
    "bound",
    "valid_under",
    "assumes",
    "applicable",
    "reason",
)


def reports_to_csv(reports: list[BoundReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_CSV_COLUMNS)
    for r in reports:
        writer.writerow(
            [
                r.method,
                repr(r.t),
                repr(r.denominator) if r.denominator is not None else "",
                str(r.denominator_exact) if r.denominator_exact is not None else "",
                repr(r.bound) if r.bound is not None else "",
                r.valid_under,
                r.assumes or "",
                "yes" if r.applicable else "no",
                r.reason or "",
            ]
        )
    return buf.getvalue()
