"""Sampled property suites shared by the ``check`` command and the tests.

Each suite draws random inputs from one seeded generator, evaluates an
invariant and records the worst observed value against a tolerance.  A
failing invariant becomes a report row, never an exception.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import dissipation as dis
from . import linearized as lin
from . import projection as proj
from . import tensor3 as t3

# Default tolerances keyed by "suite.check"; a row passes when its worst
# sampled value is finite and <= its tolerance.
TOLERANCES: dict[str, float] = {
    "tensor3.roundtrip": 1e-10,
    "tensor3.det_exp": 1e-10,
    "tensor3.minor_symmetry": 0.0,
    "tensor3.log_lipschitz_max": 1.0,
    "tensor3.log_lipschitz_spread": 0.10,
    "tensor3.power_lipschitz_max": 100.0,
    "dissipation.triangle": 1e-10,
    "dissipation.symmetry": 0.0,
    "dissipation.nondegeneracy": 1e-9,
    "dissipation.point_bound": 0.0,
    "dissipation.oracle_dominance": 1e-8,
    "dissipation.oracle_commuting": 1e-4,
    "projection.identity_inside": 0.0,
    "projection.norm_on_exit": 1e-8,
    "projection.contraction": 1e-8,
    "projection.idempotence": 1e-8,
    "projection.invariance": 1e-9,
    "projection.monotone_approach": 1e-9,
    "linearized.return_vs_brute": 1e-8,
    "linearized.subgradient": 1e-9,
}

# sample counts at full size; "quick" divides by QUICK_DIVISOR
FULL_SIZES: dict[str, int] = {
    "tensor3": 10_000,
    "dissipation": 10_000,
    "oracle": 1_000,
    "commuting": 32,
    "projection": 10_000,
    "approach": 50,
    "linearized": 1_000,
}
QUICK_DIVISOR = 10

# reduced path-oracle budget for the sampled dominance scan
ORACLE_SCAN_KNOTS = 2
ORACLE_SCAN_ITERATIONS = 20

# distances at or below this count as zero in the nondegeneracy check
ZERO_DISTANCE = 1e-12

SUITES = ("tensor3", "dissipation", "projection", "linearized")


@dataclass
class CheckRow:
    """One sampled invariant."""

    suite: str
    check: str
    worst: float
    tolerance: float
    samples: int

    @property
    def passed(self) -> bool:
        return bool(math.isfinite(self.worst) and self.worst <= self.tolerance)

    @property
    def key(self) -> str:
        return f"{self.suite}.{self.check}"


@dataclass
class CheckReport:
    """Rows of all suites run plus per-suite wall time."""

    rows: list[CheckRow] = field(default_factory=list)
    seconds: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def suite_passed(self, suite: str) -> bool:
        return all(r.passed for r in self.rows if r.suite == suite)

    def row(self, key: str) -> CheckRow:
        for r in self.rows:
            if r.key == key:
                return r
        raise KeyError(key)

    def table(self) -> str:
        head = f"{'check':36s} {'worst':>12s} {'tolerance':>10s} {'samples':>8s}  status"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(f"{r.key:36s} {r.worst:12.3e} {r.tolerance:10.1e} {r.samples:8d}  "
                         f"{'PASS' if r.passed else 'FAIL'}")
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("suite,check,worst,tolerance,samples,passed\n")
            for r in self.rows:
                fh.write(f"{r.suite},{r.check},{r.worst:.17g},{r.tolerance:.17g},"
                         f"{r.samples},{int(r.passed)}\n")


# ------------------------------------------------------------------ samplers

def _bounded_dev(rng, max_log: float) -> np.ndarray:
    return t3.random_dev(rng) * rng.uniform(0.0, max_log)


def _lipschitz_constant(rng, n: int, cap: float = 10.0) -> float:
    """Largest sampled log-Lipschitz ratio over nearby pairs with ``|C| <= cap``."""
    worst = 0.0
    got = 0
    while got < n:
        l1 = _bounded_dev(rng, 3.0)
        l2 = l1 + 10.0 ** rng.uniform(-4.0, 0.0) * t3.random_dev(rng)
        c1, c2 = t3.exp_dev(l1), t3.exp_dev(l2)
        if max(t3.norm(c1), t3.norm(c2)) > cap:
            continue
        worst = max(worst, t3.lipschitz_log_check(c1, c2)[2])
        got += 1
    return worst


def _in_compact(c, bound: float = 4.0) -> bool:
    return t3.norm(c) <= bound and t3.norm(t3.inverse(c)) <= bound


def _commuting_pair(rng) -> tuple[np.ndarray, np.ndarray]:
    q = t3.random_rotation(rng)
    out = []
    for _ in range(2):
        d = rng.normal(size=3)
        d -= d.mean()
        d *= rng.uniform(0.0, 2.0) / max(float(np.linalg.norm(d)), 1e-300)
        out.append(q @ np.diag(np.exp(d)) @ q.T)
    return out[0], out[1]


# -------------------------------------------------------------------- suites

def suite_tensor3(rng, sizes, tol) -> list[CheckRow]:
    n = sizes["tensor3"]
    rt = de = ms = 0.0
    for _ in range(n):
        c = t3.exp_dev(_bounded_dev(rng, 5.0))
        rt = max(rt, t3.norm(t3.exp_sym(t3.log_spd(c)) - c) / t3.norm(c))
        de = max(de, abs(t3.det(c) - 1.0))
    t66 = rng.normal(size=(6, 6))
    t66 = t66 + t66.T
    for _ in range(min(n, 1000)):
        a = rng.normal(size=(3, 3))
        ms = max(ms, t3.norm(t3.apply4(t66, a) - t3.apply4(t66, t3.sym(a))))
    # three independent sub-streams for the seed-stability of the constant
    consts = [_lipschitz_constant(np.random.default_rng(rng.integers(2**63)), n)
              for _ in range(3)]
    spread = (max(consts) - min(consts)) / float(np.mean(consts))
    pw = 0.0
    got = 0
    while got < n // 10:
        c1 = t3.exp_dev(_bounded_dev(rng, 1.2))
        c2 = t3.exp_dev(_bounded_dev(rng, 1.2))
        if not (_in_compact(c1) and _in_compact(c2)):
            continue
        for alpha in (-1.0, -0.5, 0.5):
            pw = max(pw, t3.lipschitz_power_check(c1, c2, alpha))
        got += 1
    return [
        CheckRow("tensor3", "roundtrip", rt, tol["tensor3.roundtrip"], n),
        CheckRow("tensor3", "det_exp", de, tol["tensor3.det_exp"], n),
        CheckRow("tensor3", "minor_symmetry", ms, tol["tensor3.minor_symmetry"], min(n, 1000)),
        CheckRow("tensor3", "log_lipschitz_max", max(consts), tol["tensor3.log_lipschitz_max"], 3 * n),
        CheckRow("tensor3", "log_lipschitz_spread", spread, tol["tensor3.log_lipschitz_spread"], 3 * n),
        CheckRow("tensor3", "power_lipschitz_max", pw, tol["tensor3.power_lipschitz_max"], n // 10),
    ]


def suite_dissipation(rng, sizes, tol, r: float = 1.0) -> list[CheckRow]:
    n = sizes["dissipation"]
    spec = dis.DissipationSpec(r)
    tri = sym = nd = pb = 0.0
    for _ in range(n):
        a, b, c = (t3.exp_dev(_bounded_dev(rng, 3.0)) for _ in range(3))
        dab, dba = dis.distance(a, b, spec), dis.distance(b, a, spec)
        tri = max(tri, dis.distance(a, c, spec) - dab - dis.distance(b, c, spec))
        sym = max(sym, abs(dab - dba))
        pb = max(pb, dab - dis.point_bound(a, b, r))
        # nondegeneracy: pairs at (numerically) zero distance must coincide;
        # the same state rebuilt from its log is the hardest such pair
        same = t3.exp_dev(t3.log_dev(a))
        for x, y in ((a, b), (a, same)):
            if dis.distance(x, y, spec) <= ZERO_DISTANCE:
                nd = max(nd, t3.norm(x - y))
    tri = max(tri, 0.0)

    m = sizes["oracle"]
    dom = -math.inf
    for _ in range(m):
        a = t3.exp_dev(_bounded_dev(rng, 1.5))
        b = t3.exp_dev(_bounded_dev(rng, 1.5))
        cost, _ = dis.path_oracle(a, b, r, knots=ORACLE_SCAN_KNOTS,
                                  iterations=ORACLE_SCAN_ITERATIONS)
        dom = max(dom, cost - dis.distance(a, b, spec))
    k = sizes["commuting"]
    com = 0.0
    for _ in range(k):
        a, b = _commuting_pair(rng)
        cost, _ = dis.path_oracle(a, b, r)
        com = max(com, abs(cost - dis.distance(a, b, spec)))
    return [
        CheckRow("dissipation", "triangle", tri, tol["dissipation.triangle"], n),
        CheckRow("dissipation", "symmetry", sym, tol["dissipation.symmetry"], n),
        CheckRow("dissipation", "nondegeneracy", nd, tol["dissipation.nondegeneracy"], n),
        CheckRow("dissipation", "point_bound", pb, tol["dissipation.point_bound"], n),
        CheckRow("dissipation", "oracle_dominance", dom, tol["dissipation.oracle_dominance"], m),
        CheckRow("dissipation", "oracle_commuting", com, tol["dissipation.oracle_commuting"], k),
    ]


def suite_projection(rng, sizes, tol, cfg: proj.FlowConfig = proj.FlowConfig()) -> list[CheckRow]:
    n = sizes["projection"]
    ident = nrm = con = idem = inv = 0.0
    n_in = n_out = 0
    for _ in range(n):
        c1 = t3.random_unit_det_spd(rng, 2.5)
        c2 = t3.random_unit_det_spd(rng, 2.5)
        p1, p2 = proj.project(c1, cfg), proj.project(c2, cfg)
        con = max(con, t3.norm(p1 - p2) - t3.norm(c1 - c2))
        for c, p in ((c1, p1), (c2, p2)):
            if t3.norm(c) <= cfg.r_k:
                ident = max(ident, float(np.max(np.abs(p - c))))
                n_in += 1
            else:
                nrm = max(nrm, abs(t3.norm(p) - cfg.r_k))
                n_out += 1
        idem = max(idem, t3.norm(proj.project(p1, cfg) - p1))
        inv = max(inv, proj.invariance_defect(c1))
    k = sizes["approach"]
    app = -math.inf
    for _ in range(k):
        c = proj.exterior_sample(rng, cfg)
        target = t3.random_unit_det_spd(rng, 1.0)
        slopes = proj.approach_defects(c, target, 2.0, samples=20, cfg=cfg)
        if slopes:
            app = max(app, max(slopes))
    app = max(app, 0.0)
    return [
        CheckRow("projection", "identity_inside", ident, tol["projection.identity_inside"], n_in),
        CheckRow("projection", "norm_on_exit", nrm, tol["projection.norm_on_exit"], n_out),
        CheckRow("projection", "contraction", max(con, 0.0), tol["projection.contraction"], n),
        CheckRow("projection", "idempotence", idem, tol["projection.idempotence"], n),
        CheckRow("projection", "invariance", inv, tol["projection.invariance"], n),
        CheckRow("projection", "monotone_approach", app, tol["projection.monotone_approach"], k),
    ]


def random_linear_case(rng) -> tuple[np.ndarray, np.ndarray, lin.LinearModel]:
    """Random ``(z_prev, e, model)`` with isotropic moduli, for return-map tests."""
    mu = rng.uniform(0.1, 10.0)
    lam = rng.uniform(0.0, 10.0)
    h = rng.uniform(0.01, 5.0)
    rho = rng.uniform(0.01, 2.0)
    lm = lin.LinearModel.isotropic(mu, lam, h, rho)
    e = rng.normal(size=(3, 3)) * rng.uniform(0.0, 1.0)
    z_prev = t3.random_dev(rng) * rng.uniform(0.0, 0.5)
    return z_prev, t3.sym(e), lm


def suite_linearized(rng, sizes, tol) -> list[CheckRow]:
    n = sizes["linearized"]
    gap = res = 0.0
    for _ in range(n):
        z_prev, e, lm = random_linear_case(rng)
        z = lin.return_map(z_prev, e, lm)
        z_gen = lin.return_map(z_prev, e, lm, generic=True)
        z_bf = lin.brute_force_step(z_prev, e, lm, rng, starts=8, iterations=2000)
        scale = 1.0 + float(np.linalg.norm(z))
        gap = max(gap, float(np.linalg.norm(z - z_bf)) / scale,
                  float(np.linalg.norm(z - z_gen)) / scale)
        res = max(res, lin.subgradient_residual(z, z_prev, e, lm))
    return [
        CheckRow("linearized", "return_vs_brute", gap, tol["linearized.return_vs_brute"], n),
        CheckRow("linearized", "subgradient", res, tol["linearized.subgradient"], n),
    ]


_RUNNERS = {
    "tensor3": suite_tensor3,
    "dissipation": suite_dissipation,
    "projection": suite_projection,
    "linearized": suite_linearized,
}


def check_suites(seed: int = 0, tolerances: dict[str, float] | None = None,
                 suites=SUITES, quick: bool = False) -> CheckReport:
    """Run the sampled property suites.

    Parameters
    ----------
    seed : int
        Seed of the single generator shared by all samplers.
    tolerances : dict, optional
        Overrides of ``TOLERANCES`` entries (keys ``"suite.check"``).
    suites : iterable of str
        Subset of ``SUITES`` to run.
    quick : bool
        Use a tenth of the full sample counts.

    Returns
    -------
    CheckReport
        Failures are report rows; nothing is raised for a violated invariant.
    """
    tol = dict(TOLERANCES)
    for key, value in (tolerances or {}).items():
        if key not in tol:
            raise KeyError(f"unknown tolerance key {key!r}")
        tol[key] = float(value)
    sizes = {k: max(1, v // QUICK_DIVISOR) if quick else v for k, v in FULL_SIZES.items()}
    report = CheckReport(seed=seed)
    for name in suites:
        if name not in _RUNNERS:
            raise KeyError(f"unknown suite {name!r}")
        # independent stream per suite so subsets reproduce the full run's rows
        rng = np.random.default_rng([seed, SUITES.index(name)])
        start = time.perf_counter()
        report.rows.extend(_RUNNERS[name](rng, sizes, tol))
        report.seconds[name] = time.perf_counter() - start
    return report
