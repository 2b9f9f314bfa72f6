"""Projective space over split vectors, its standard charts, and atlas checking.

A point of the (n, m) projective space is a shape (n + 1, m + 1) vector with
at least one invertible head entry and at least one nonzero tail entry, up
to independent rescaling of the heads (by an invertible dual scalar) and the
tails (by a nonzero real).  Chart (i, j) divides out head slot i and tail
slot j; transitions between charts are rational expressions suitable for
smoothness checking.

verify_atlas samples points and checks that chart images are open (probe
balls stay inside the image), that charts are injective on samples, and
that every transition passes the derivative block test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dualmod.core import (
    ONE,
    DualNumber,
    DualVector,
    ShapeMismatch,
    inv,
    mul,
    resolve_tol,
    vector_norm,
    with_head_entry,
    with_tail_entry,
)
from dualmod.diff import (
    DualFunc,
    EvaluationFailed,
    Expr,
    compose_funcs,
    const,
    coord,
    cr_check,
    eval_expr,
    eval_func,
    inv_expr,
    sharp_expr,
)
from dualmod.core import NotInvertible
from dualmod.linalg import realify, unrealify


class InvalidRepresentative(ValueError):
    """The vector lies in one of the two excluded closed sets."""


class NotInChart(ValueError):
    """The point misses the chart's invertibility requirements."""


def is_valid_rep(x: DualVector, n: int, m: int, tol: float | None = None) -> bool:
    """Valid iff some head entry is invertible and some tail entry nonzero."""
    if x.shape != (n + 1, m + 1):
        raise ShapeMismatch(
            "representative shape %r != ambient %r" % (x.shape, (n + 1, m + 1))
        )
    tol = resolve_tol(tol)
    return any(abs(h.re) > tol for h in x.head) and any(
        abs(r) > tol for r in x.tail
    )


@dataclass(frozen=True)
class ProjectivePoint:
    """A validated representative; (n, m) are the chart dimensions."""

    rep: DualVector

    def __post_init__(self):
        rep = self.rep
        if rep.n < 1 or rep.m < 1:
            raise InvalidRepresentative(
                "ambient shape %r leaves no projective directions" % (rep.shape,)
            )
        if not is_valid_rep(rep, rep.n - 1, rep.m - 1):
            raise InvalidRepresentative(
                "representative needs an invertible head and a nonzero tail"
            )

    @property
    def n(self) -> int:
        return self.rep.n - 1

    @property
    def m(self) -> int:
        return self.rep.m - 1


def _rep_of(x) -> DualVector:
    return x.rep if isinstance(x, ProjectivePoint) else x


def equivalent(x, y, tol: float | None = None) -> bool:
    """Decide y = (s heads, t tails) . x for invertible dual s, real t != 0."""
    x, y = _rep_of(x), _rep_of(y)
    if x.shape != y.shape:
        raise ShapeMismatch("shapes %r and %r differ" % (x.shape, y.shape))
    n, m = x.shape[0] - 1, x.shape[1] - 1
    tol = resolve_tol(tol)
    for v in (x, y):
        if not is_valid_rep(v, n, m, tol):
            raise InvalidRepresentative("equivalence needs valid representatives")
    scale = 1.0 + max(
        float(np.abs(realify(x)).max()), float(np.abs(realify(y)).max())
    )
    i0 = _argmax_head_re(x)
    s = mul(y.head[i0], inv(x.head[i0], tol=0.0))
    if abs(s.re) <= tol:
        return False
    for a in range(n + 1):
        d = y.head[a] - mul(s, x.head[a])
        if abs(d.re) > tol * scale or abs(d.ze) > tol * scale:
            return False
    j0 = _argmax_tail(x)
    t = y.tail[j0] / x.tail[j0]
    if abs(t) <= tol:
        return False
    for b in range(m + 1):
        if abs(y.tail[b] - t * x.tail[b]) > tol * scale:
            return False
    return True


def _argmax_head_re(x: DualVector) -> int:
    best, best_mag = 0, -1.0
    for a, h in enumerate(x.head):
        if abs(h.re) > best_mag:
            best, best_mag = a, abs(h.re)
    return best


def _argmax_tail(x: DualVector) -> int:
    best, best_mag = 0, -1.0
    for b, r in enumerate(x.tail):
        if abs(r) > best_mag:
            best, best_mag = b, abs(r)
    return best


def canonical_rep(x, tol: float | None = None) -> DualVector:
    """Normalize: pivot heads so the largest-re slot is exactly 1, pivot
    tails so the largest slot is exactly 1.  Idempotent; equivalent inputs
    agree on the output."""
    x = _rep_of(x)
    n, m = x.shape[0] - 1, x.shape[1] - 1
    if not is_valid_rep(x, n, m, tol):
        raise InvalidRepresentative("cannot normalize an invalid representative")
    i0 = _argmax_head_re(x)
    s = inv(x.head[i0], tol=0.0)
    head = tuple(mul(s, h) for h in x.head)
    j0 = _argmax_tail(x)
    t = x.tail[j0]
    tail = tuple(r / t for r in x.tail)
    out = DualVector(head, tail)
    out = with_head_entry(out, i0, ONE)
    out = with_tail_entry(out, j0, 1.0)
    return out


def in_chart(i: int, j: int, p, tol: float | None = None) -> bool:
    x = _rep_of(p)
    tol = resolve_tol(tol)
    return abs(x.head[i].re) > tol and abs(x.tail[j]) > tol


def chart_map(i: int, j: int, p, tol: float | None = None) -> DualVector:
    """Divide out head slot i and tail slot j."""
    x = _rep_of(p)
    n, m = x.shape[0] - 1, x.shape[1] - 1
    _check_chart_index(i, j, n, m)
    if not in_chart(i, j, p, tol):
        raise NotInChart("point misses chart (%d, %d)" % (i, j))
    pivot = inv(x.head[i], tol=0.0)
    head = tuple(mul(x.head[a], pivot) for a in range(n + 1) if a != i)
    tail = tuple(x.tail[b] / x.tail[j] for b in range(m + 1) if b != j)
    return DualVector(head, tail)


def chart_inverse(i: int, j: int, u: DualVector) -> ProjectivePoint:
    """Insert 1 at head slot i and a unit eps coefficient at tail slot j."""
    n, m = u.shape
    _check_chart_index(i, j, n, m)
    head = list(u.head)
    head.insert(i, ONE)
    tail = list(u.tail)
    tail.insert(j, 1.0)
    return ProjectivePoint(DualVector(tuple(head), tuple(tail)))


def _check_chart_index(i, j, n, m):
    if not (0 <= i <= n and 0 <= j <= m):
        raise IndexError("chart (%d, %d) out of range for (%d, %d)" % (i, j, n, m))


@dataclass(frozen=True)
class TransitionMap:
    """A chart-to-chart change of coordinates with its domain predicate.

    The point is inside the domain when the predicate evaluates with
    invertible re part.
    """

    func: DualFunc
    domain: Expr


def transition(i: int, j: int, k: int, l: int, n: int, m: int) -> TransitionMap:
    """Coordinates of chart (k, l) as expressions in chart (i, j) coordinates.

    Head outputs are dual ratios; tail outputs are real ratios re-embedded
    as eps coefficients, which keeps the whole map inside the expression
    language."""
    _check_chart_index(i, j, n, m)
    _check_chart_index(k, l, n, m)
    heads = []
    for a in range(n + 1):
        if a == i:
            heads.append(const(ONE))
        else:
            heads.append(coord("head", a if a < i else a - 1))
    # real coefficients of the homogeneous tail entries
    coeffs = []
    for b in range(m + 1):
        if b == j:
            coeffs.append(const(ONE))
        else:
            coeffs.append(coord("tail", b if b < j else b - 1, "ze"))
    comps = []
    inv_pivot = inv_expr(heads[k])
    for a in range(n + 1):
        if a != k:
            comps.append(Expr("mul", (heads[a], inv_pivot)))
    inv_coeff = inv_expr(coeffs[l])
    for b in range(m + 1):
        if b != l:
            comps.append(sharp_expr(Expr("mul", (coeffs[b], inv_coeff))))
    func = DualFunc((n, m), (n, m), tuple(comps))
    predicate = Expr("mul", (heads[k], coeffs[l]))
    return TransitionMap(func, predicate)


def in_transition_domain(trans: TransitionMap, u: DualVector, tol=None) -> bool:
    tol = resolve_tol(tol)
    try:
        return abs(eval_expr(trans.domain, u).re) > tol
    except (NotInvertible, EvaluationFailed):
        return False


@dataclass(frozen=True)
class ProjectiveAtlas:
    """The standard chart family on the (n, m) projective space."""

    n: int
    m: int
    charts: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if not self.charts:
            object.__setattr__(
                self,
                "charts",
                tuple(
                    (i, j)
                    for i in range(self.n + 1)
                    for j in range(self.m + 1)
                ),
            )
        else:
            object.__setattr__(
                self, "charts", tuple((int(i), int(j)) for i, j in self.charts)
            )

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "charts": [{"i": i, "j": j} for i, j in self.charts],
        }

    @classmethod
    def from_json(cls, data) -> "ProjectiveAtlas":
        charts = tuple(
            (int(c["i"]), int(c["j"])) for c in data.get("charts", [])
        )
        return cls(int(data["n"]), int(data["m"]), charts)


@dataclass(frozen=True)
class ExprChart:
    """A user chart on an open subset of a split vector space."""

    forward: DualFunc
    inverse: DualFunc
    domain: Expr

    def to_json(self) -> dict:
        return {
            "forward": self.forward.to_json(),
            "inverse": self.inverse.to_json(),
            "domain": self.domain.to_json(),
        }

    @classmethod
    def from_json(cls, data) -> "ExprChart":
        for key in ("forward", "inverse", "domain"):
            if key not in data:
                raise ValueError("chart is missing field %r" % key)
        return cls(
            DualFunc.from_json(data["forward"]),
            DualFunc.from_json(data["inverse"]),
            Expr.from_json(data["domain"]),
        )


@dataclass(frozen=True)
class ExprAtlas:
    charts: tuple[ExprChart, ...]

    def __post_init__(self):
        object.__setattr__(self, "charts", tuple(self.charts))
        if not self.charts:
            raise ValueError("atlas needs at least one chart")

    @property
    def ambient(self) -> tuple[int, int]:
        return self.charts[0].forward.domain

    def to_json(self) -> dict:
        return {"charts": [c.to_json() for c in self.charts]}

    @classmethod
    def from_json(cls, data) -> "ExprAtlas":
        return cls(tuple(ExprChart.from_json(c) for c in data.get("charts", [])))


def atlas_from_json(data):
    if not isinstance(data, dict) or "charts" not in data and "n" not in data:
        raise ValueError("atlas must carry either n/m or a chart list")
    if "n" in data and "m" in data:
        return ProjectiveAtlas.from_json(data)
    return ExprAtlas.from_json(data)


@dataclass(frozen=True)
class AtlasCheck:
    axiom: str
    chart_pair: tuple
    passed: bool
    witness: dict | None = None

    def to_json(self) -> dict:
        return {
            "axiom": self.axiom,
            "chart_pair": list(self.chart_pair),
            "passed": self.passed,
            "witness": self.witness,
        }


@dataclass(frozen=True)
class AtlasReport:
    entries: tuple[AtlasCheck, ...]

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "entries": [e.to_json() for e in self.entries],
        }


def random_rep(rng, n, m, active=(), sparsity=0.3) -> ProjectivePoint:
    """A random valid representative, guaranteed active on the given chart
    indices; other slots may be zeroed to exercise partial overlaps."""
    need_heads = {i for i, _ in active}
    need_tails = {j for _, j in active}
    head = []
    for a in range(n + 1):
        re = (1.0 if rng.uniform() < 0.5 else -1.0) * rng.uniform(0.5, 1.5)
        if a not in need_heads and rng.uniform() < sparsity:
            re = 0.0
        head.append(DualNumber(re, rng.uniform(-1.0, 1.0)))
    if all(h.re == 0.0 for h in head):
        head[min(need_heads, default=0)] = DualNumber(1.0, head[0].ze)
    tail = []
    for b in range(m + 1):
        r = (1.0 if rng.uniform() < 0.5 else -1.0) * rng.uniform(0.5, 1.5)
        if b not in need_tails and rng.uniform() < sparsity:
            r = 0.0
        tail.append(r)
    if all(r == 0.0 for r in tail):
        tail[min(need_tails, default=0)] = 1.0
    return ProjectivePoint(DualVector(tuple(head), tuple(tail)))


def verify_atlas(atlas, samples: int = 50, tol: float = 1e-4, seed: int = 0) -> AtlasReport:
    """Sample-based check of openness (ii), injectivity (iii), and
    transition smoothness (iv)."""
    if isinstance(atlas, ProjectiveAtlas):
        return _verify_projective(atlas, samples, tol, seed)
    if isinstance(atlas, ExprAtlas):
        return _verify_expr(atlas, samples, tol, seed)
    raise TypeError("not an atlas: %r" % (atlas,))


def _unit_dirs(rng, dim, count):
    dirs = rng.normal(size=(count, dim))
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _verify_projective(atlas, samples, tol, seed) -> AtlasReport:
    rng = np.random.default_rng(seed)
    n, m = atlas.n, atlas.m
    dim = 2 * n + m
    entries = []

    for c in atlas.charts:
        pts = [random_rep(rng, n, m, active=(c,)) for _ in range(min(samples, 25))]
        images = [chart_map(c[0], c[1], p) for p in pts]

        # (ii): probe a small ball around each image through the inverse
        ok, witness = True, None
        for u in images[: min(len(images), 12)]:
            for d in _unit_dirs(rng, dim, 6):
                probe = unrealify(realify(u) + tol * d, n, m)
                back = chart_map(c[0], c[1], chart_inverse(c[0], c[1], probe))
                gap = vector_norm(back - probe)
                if gap > 0.05 * tol * (1.0 + vector_norm(probe)):
                    ok, witness = False, {"point": probe.to_json(), "gap": gap}
                    break
            if not ok:
                break
        entries.append(AtlasCheck("ii", (list(c),), ok, witness))

        # (iii): images may coincide only for equivalent points
        ok, witness = True, None
        for a in range(len(pts)):
            for b in range(a + 1, len(pts)):
                gap = vector_norm(images[a] - images[b])
                if gap <= 1e-9 and not equivalent(pts[a], pts[b]):
                    ok = False
                    witness = {
                        "first": pts[a].rep.to_json(),
                        "second": pts[b].rep.to_json(),
                    }
                    break
            if not ok:
                break
        entries.append(AtlasCheck("iii", (list(c),), ok, witness))

    for c1 in atlas.charts:
        for c2 in atlas.charts:
            trans = transition(c1[0], c1[1], c2[0], c2[1], n, m)
            ok, witness = True, None
            for _ in range(samples):
                p = random_rep(rng, n, m, active=(c1, c2))
                u = chart_map(c1[0], c1[1], p)
                if not in_transition_domain(trans, u):
                    continue
                report = cr_check(trans.func, u, tol=tol)
                if not report.passed:
                    ok = False
                    witness = {
                        "point": u.to_json(),
                        "residuals": report.residuals,
                    }
                    break
            entries.append(AtlasCheck("iv", (list(c1), list(c2)), ok, witness))
    return AtlasReport(tuple(entries))


def _expr_chart_contains(chart, x, tol):
    try:
        return abs(eval_expr(chart.domain, x).re) > tol
    except (NotInvertible, EvaluationFailed):
        return False


def _verify_expr(atlas, samples, tol, seed) -> AtlasReport:
    rng = np.random.default_rng(seed)
    n, m = atlas.ambient
    dim = 2 * n + m
    entries = []

    def sample_in(charts, count, tries=40):
        out = []
        for _ in range(count * tries):
            x = unrealify(rng.uniform(-1.5, 1.5, size=dim), n, m)
            if all(_expr_chart_contains(c, x, tol) for c in charts):
                out.append(x)
                if len(out) == count:
                    break
        return out

    for idx, chart in enumerate(atlas.charts):
        pts = sample_in([chart], min(samples, 25))
        images, ok, witness = [], True, None
        for x in pts:
            try:
                images.append(eval_func(chart.forward, x))
            except (NotInvertible, EvaluationFailed) as exc:
                ok, witness = False, {"point": x.to_json(), "error": str(exc)}
                break

        if ok:
            s_out, t_out = chart.forward.codomain
            dim_out = 2 * s_out + t_out
            for u in images[: min(len(images), 12)]:
                for d in _unit_dirs(rng, dim_out, 6):
                    probe = unrealify(realify(u) + tol * d, s_out, t_out)
                    try:
                        x_back = eval_func(chart.inverse, probe)
                        if not _expr_chart_contains(chart, x_back, tol):
                            raise EvaluationFailed("preimage left the domain")
                        gap = vector_norm(eval_func(chart.forward, x_back) - probe)
                    except (NotInvertible, EvaluationFailed) as exc:
                        ok, witness = False, {
                            "point": probe.to_json(),
                            "error": str(exc),
                        }
                        break
                    if gap > 0.05 * tol * (1.0 + vector_norm(probe)):
                        ok, witness = False, {"point": probe.to_json(), "gap": gap}
                        break
                if not ok:
                    break
        entries.append(AtlasCheck("ii", (idx,), ok, witness))

        ok, witness = True, None
        for a in range(len(images)):
            for b in range(a + 1, len(images)):
                if (
                    vector_norm(images[a] - images[b]) <= 1e-9
                    and vector_norm(pts[a] - pts[b]) > 1e-6
                ):
                    ok = False
                    witness = {
                        "first": pts[a].to_json(),
                        "second": pts[b].to_json(),
                    }
                    break
            if not ok:
                break
        entries.append(AtlasCheck("iii", (idx,), ok, witness))

    for a, ca in enumerate(atlas.charts):
        for b, cb in enumerate(atlas.charts):
            try:
                trans = compose_funcs(cb.forward, ca.inverse)
            except ShapeMismatch as exc:
                entries.append(
                    AtlasCheck("iv", (a, b), False, {"error": str(exc)})
                )
                continue
            pts = sample_in([ca, cb], min(samples, 25))
            ok, witness = True, None
            for x in pts:
                try:
                    u = eval_func(ca.forward, x)
                    report = cr_check(trans, u, tol=tol)
                except (NotInvertible, EvaluationFailed) as exc:
                    ok, witness = False, {"point": x.to_json(), "error": str(exc)}
                    break
                if not report.passed:
                    ok = False
                    witness = {"point": u.to_json(), "residuals": report.residuals}
                    break
            entries.append(AtlasCheck("iv", (a, b), ok, witness))
    return AtlasReport(tuple(entries))
