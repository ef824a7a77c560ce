"""Verification suites and their machine-readable reports."""
from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from . import __version__
from .chaos import (chaos_coefficients, multiple_vs_iterated_check, multiple_vs_iterated_mc,
                    product_formula_check)
from .config import SUITES, ExperimentConfig
from .errors import ConfigInvalid, IoFailure
from .functions import Indicator, Monomial, TestFunction
from .iterated import iterate, moment_matrix_check, second_moment_reference
from .kernels import BACKEND
from .measure import Atomic, LevyTriplet, MuMeasure, eta_inner, mu_inner
from .oracle import (dimension_audit, exact_iterate, exact_second_moment, random_scenario,
                     scenario_objects, scenario_path)
from .paths import (constant_series, lebesgue_integral, martingale_path, quadratic_covariation,
                    simulate_levy)
from .systems import (closure_index, gram_schmidt, haar_system, hermite_weighted_system,
                      indicator_system, teugels_system)
from .tensors import ElementaryTensor, IteratedSpec, StepFunction

SCHEMA_PATH = Path(__file__).with_name("report_schema.json")
RUNTIME_FIELDS = ("runtime", "total_runtime")
CSV_COLUMNS = ("id", "anchor", "kind", "estimate", "se", "gap", "reference", "tolerance",
               "passed", "note", "runtime")
WIDE = 0.1  # relative s.e. above which an estimate is flagged, not failed


@dataclass
class CheckRecord:
    """One verification outcome.

    ``kind`` is ``"statistical"`` (pass iff ``|estimate - reference| <= tolerance * se``)
    or ``"exact"`` (pass iff ``gap <= tolerance``).
    """

    id: str
    family: str
    anchor: str
    kind: str
    estimate: Optional[float]
    reference: Optional[float]
    tolerance: float
    se: Optional[float] = None
    gap: Optional[float] = None
    passed: bool = False
    note: str = ""
    runtime: float = 0.0

    def __post_init__(self):
        if self.kind == "statistical":
            z = 0.0 if self.se == 0 and self.estimate == self.reference else (
                abs(self.estimate - self.reference) / self.se if self.se else float("inf"))
            self.passed = bool(z <= self.tolerance)
            if self.reference and self.se > WIDE * abs(self.reference):
                self.note = (self.note + "; " if self.note else "") + "wide error bars"
        else:
            self.passed = bool(self.gap <= self.tolerance)

    @property
    def z(self) -> Optional[float]:
        if self.kind != "statistical" or not self.se:
            return None
        return (self.estimate - self.reference) / self.se

    def describe(self) -> str:
        if self.kind == "statistical":
            body = f"estimate {self.estimate:.6g} +- {self.se:.3g} vs {self.reference:.6g} (|z| <= {self.tolerance:g})"
        else:
            body = f"gap {self.gap:.3e} (<= {self.tolerance:.1e})"
        return f"{'PASS' if self.passed else 'FAIL'} {self.id}: {body} [{self.anchor}]"


@dataclass
class VerificationReport:
    suites: List[str]
    environment: dict
    records: List[CheckRecord] = field(default_factory=list)
    tables: Dict[str, List[dict]] = field(default_factory=dict)
    total_runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def failures(self) -> List[CheckRecord]:
        return [r for r in self.records if not r.passed]

    def to_dict(self, runtime: bool = True) -> dict:
        d = {"suites": list(self.suites), "environment": dict(self.environment),
             "records": [asdict(r) for r in self.records], "tables": self.tables,
             "passed": self.passed}
        if runtime:
            d["total_runtime"] = self.total_runtime
        else:
            for r in d["records"]:
                r.pop("runtime")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        recs = []
        for r in d["records"]:
            rec = CheckRecord(**{k: v for k, v in r.items() if k not in ("passed", "note", "runtime")})
            rec.note, rec.passed, rec.runtime = r["note"], r["passed"], r.get("runtime", 0.0)
            recs.append(rec)
        return cls(list(d["suites"]), dict(d["environment"]), recs, dict(d.get("tables", {})),
                   float(d.get("total_runtime", 0.0)))

    def numerics(self) -> str:
        """Canonical JSON without timing fields."""
        return json.dumps(self.to_dict(runtime=False), sort_keys=True)


# -- building blocks from the configuration ------------------------------------

def build_system(cfg: ExperimentConfig, triplet: LevyTriplet) -> List[TestFunction]:
    """The function system named in the ``[basis]`` section."""
    mu, nu = triplet.mu, triplet.nu
    kind = cfg.basis_kind
    if kind == "teugels":
        raw = teugels_system(cfg.n_max, mu)
    elif kind == "monomial":
        raw = [TestFunction(0.0, Monomial(n), name=f"x^{n}") for n in range(1, cfg.n_max + 1)]
    elif kind == "indicator":
        if not cfg.intervals:
            raise ConfigInvalid([("basis.intervals", "required for kind = indicator")])
        return indicator_system(cfg.intervals)
    elif kind == "hermite":
        return hermite_weighted_system(cfg.n_max, nu, triplet.sigma2)
    else:
        return haar_system(0, cfg.n_max - 1, -2, 1, nu, triplet.sigma2)
    return list(gram_schmidt(raw, mu)) if cfg.orthonormalize else raw


def _timed(fn: Callable[[], List[CheckRecord]]) -> List[CheckRecord]:
    t0 = time.perf_counter()
    out = fn()
    dt = (time.perf_counter() - t0) / max(len(out), 1)
    for r in out:
        r.runtime = dt
    return out


def _stream(cfg: ExperimentConfig, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(10_000_000 + tag,)))


def _random_atoms(rng, k):
    locs = []
    while len(locs) < k:
        x = float(np.round(rng.uniform(-3, 3), 3))
        if abs(x) > 0.1 and all(abs(x - y) > 0.05 for y in locs):
            locs.append(x)
    return Atomic.of([(x, float(np.round(rng.uniform(0.2, 3.0), 3))) for x in locs])


def _indicators_around(nu: Atomic):
    """Disjoint intervals, each holding one atom, none touching the origin."""
    locs = np.sort(nu.loc)
    out = []
    for i, x in enumerate(locs):
        lo = x - 0.02 if i == 0 else 0.5 * (locs[i - 1] + x)
        hi = x + 0.02 if i == len(locs) - 1 else 0.5 * (x + locs[i + 1])
        if x > 0:
            lo = max(lo, x / 2)
        else:
            hi = min(hi, x / 2)
        out.append((lo, hi))
    return out


# -- suites -------------------------------------------------------------------------

def suite_oracle(cfg: ExperimentConfig) -> List[CheckRecord]:
    tol = cfg.tolerances
    rng = _stream(cfg, 1)
    it_gap, rel_gap, dim_gap, gram = 0.0, 0.0, 0, 0.0
    for _ in range(cfg.scenarios):
        sc = random_scenario(rng, 3, cfg.horizon)
        spec, family, nu = scenario_objects(sc)
        path = scenario_path(sc)
        J = iterate(spec, [martingale_path(family[a], path, nu) for a in spec.indices])
        E = exact_iterate(spec, sc["jump_times"], sc["jump_sizes"], family, nu, 0.0, sc["horizon"])
        g = max(np.max(np.abs(J.values - E(J.timeline))),
                np.max(np.abs(J.pre[1:] - E.left_limit(J.timeline[1:]))))
        it_gap = max(it_gap, float(g))
        mu = MuMeasure(0.0, nu)
        exact = float(exact_second_moment(spec, sc["horizon"], mu, family))
        approx = second_moment_reference(spec, spec, family, mu, sc["horizon"])
        rel_gap = max(rel_gap, abs(approx - exact) / max(abs(exact), 1e-300))
        # dimension law on a random atomic measure with up to 6 atoms
        k = int(rng.integers(1, 7))
        s2 = float(rng.integers(0, 2))
        numu = MuMeasure(s2, _random_atoms(rng, k))
        gens = [TestFunction(1.0, Monomial(1), name="h1")] + [
            TestFunction(0.0, Monomial(p), name=f"x^{p}") for p in range(2, k + 3)]
        onb = gram_schmidt(gens, numu)
        dim_gap = max(dim_gap, abs(len(onb) - dimension_audit(numu.nu, s2)))
        gram = max(gram, onb.gram_residual)
    n = cfg.scenarios
    return [
        CheckRecord("oracle.iterate", "oracle", "J_n recursion evaluated event by event equals the "
                    "grid evaluation on pure-jump paths", "exact", it_gap, 0.0, tol.exact_gap,
                    gap=it_gap, note=f"{n} scenarios, n <= 3"),
        CheckRecord("oracle.simplex", "oracle", "||J_n(F)_t||^2 = simplex integral of prod c_k F_k^2",
                    "exact", rel_gap, 0.0, tol.relative, gap=rel_gap, note="relative, rational arithmetic"),
        CheckRecord("oracle.dimension", "oracle", "dim L2(mu) = #atoms + 1{sigma2 > 0}", "exact",
                    float(dim_gap), 0.0, 0.5, gap=float(dim_gap)),
        CheckRecord("oracle.gram", "oracle", "Gram-Schmidt output is orthonormal in L2(mu)", "exact",
                    gram, 0.0, tol.exact_gap, gap=gram),
    ]


def _specs(cfg: ExperimentConfig, n_members: int):
    T = cfg.horizon
    step = StepFunction((0.0, T / 2, T), (1.0, 2.0))
    specs = [("flat n=1", IteratedSpec.flat((0,), T)),
             ("flat n=2", IteratedSpec.flat((0, 0), T)),
             ("flat n=3", IteratedSpec.flat((0, 0, 0), T)),
             ("step n=2", IteratedSpec((0, 0), ElementaryTensor(1.0, (step, StepFunction.constant(T)))))]
    if n_members > 1:
        specs.append(("flat (0,1)", IteratedSpec.flat((0, 1), T)))
    return specs


def suite_isometry(cfg: ExperimentConfig) -> List[CheckRecord]:
    triplet = cfg.triplet()
    system = build_system(cfg, triplet)
    specs = _specs(cfg, len(system))
    est, se, ref, _ = moment_matrix_check([s for _, s in specs], system, triplet, cfg.horizon,
                                          cfg.n_paths, cfg.seed, cfg.grid_step, cfg.workers)
    return [CheckRecord(f"isometry.{name}", "isometry", "E[J_n(F)_t^2] = ||F||^2 with bracket rates "
                        "mu(f_a f_a)", "statistical", float(est[i, i]), float(ref[i, i]), cfg.tolerances.z,
                        se=float(se[i, i]))
            for i, (name, _) in enumerate(specs)]


def suite_orthogonality(cfg: ExperimentConfig) -> List[CheckRecord]:
    triplet = cfg.triplet()
    system = build_system(cfg, triplet)
    specs = _specs(cfg, len(system))
    est, se, ref, _ = moment_matrix_check([s for _, s in specs], system, triplet, cfg.horizon,
                                          cfg.n_paths, cfg.seed, cfg.grid_step, cfg.workers)
    out = []
    for i, (ni, si) in enumerate(specs):
        for j, (nj, sj) in enumerate(specs):
            if j <= i or (si.order == sj.order and si.indices == sj.indices):
                continue  # same word: an isometry pair, not an orthogonality pair
            out.append(CheckRecord(f"orthogonality.[{ni}]x[{nj}]", "orthogonality",
                                   "E[J_n J_m] = 0 for n != m, and for tuples with a mu-orthogonal slot",
                                   "statistical", float(est[i, j]), float(ref[i, j]), cfg.tolerances.z,
                                   se=float(se[i, j])))
    return out


def suite_covariation(cfg: ExperimentConfig) -> List[CheckRecord]:
    tol = cfg.tolerances
    rng = _stream(cfg, 2)
    worst = 0.0
    for s in range(cfg.scenarios):
        nu = _random_atoms(rng, int(rng.integers(1, 4)))
        sigma2 = float(rng.integers(0, 2))
        mu = MuMeasure(sigma2, nu)
        system = indicator_system(_indicators_around(nu), float(np.round(rng.uniform(0.5, 2), 3)))
        path = simulate_levy(LevyTriplet(0.0, sigma2, nu), cfg.horizon, 0.05, cfg.seed, s)
        i, j = (int(v) for v in rng.integers(0, len(system), size=2))
        f, g = system[i], system[j]
        Xf, Xg = martingale_path(f, path, nu), martingale_path(g, path, nu)
        comp = quadratic_covariation(Xf, f, Xg, g, sigma2) - lebesgue_integral(
            constant_series(path, 1.0, Xf.timeline), mu_inner(f, g, mu))
        member = system[closure_index(system, i, j)]
        worst = max(worst, comp.sup_gap(martingale_path(member, path, nu)))
    out = [CheckRecord("covariation.indicator", "covariation", "[X^f,X^g] - <X^f,X^g> = X^{f~g~}, "
                       "a member of the family", "exact", worst, 0.0, tol.exact_gap, gap=worst,
                       note=f"{cfg.scenarios} scenarios, sigma2 in {{0,1}}, <= 3 atoms")]
    for lam in (0.5, 1.0, 5.0):
        nu = Atomic.of([(1.0, lam)])
        f = TestFunction(0.0, Indicator(0.5, 1.5), name="Nbar")
        path = simulate_levy(LevyTriplet(0.0, 0.0, nu), cfg.horizon, 0.05, cfg.seed, 0)
        X = martingale_path(f, path, nu)
        comp = quadratic_covariation(X, f, X, f, 0.0) - lebesgue_integral(
            constant_series(path, 1.0, X.timeline), lam)
        gap = comp.sup_gap(X)
        out.append(CheckRecord(f"covariation.poisson[{lam:g}]", "covariation",
                               "[Nbar,Nbar] - <Nbar,Nbar> = Nbar", "exact", gap, 0.0, 1e-12, gap=gap))
    return out


def suite_product(cfg: ExperimentConfig) -> List[CheckRecord]:
    tol = cfg.tolerances
    rng = _stream(cfg, 3)
    worst = 0.0
    for s in range(max(cfg.scenarios // 10, 1)):
        nu = _random_atoms(rng, int(rng.integers(1, 4)))
        system = indicator_system(_indicators_around(nu), 1.0)
        path = simulate_levy(LevyTriplet(0.0, 0.0, nu), cfg.horizon, 0.05, cfg.seed, s)
        m = int(rng.integers(1, 5))
        idx = [int(v) for v in rng.integers(0, len(system), size=m)]
        worst = max(worst, product_formula_check(idx, system, path, MuMeasure(0.0, nu))["max_abs_gap"])
    out = [CheckRecord("product.pure_jump", "product", "prod X^{a_i} expands over index subsets "
                       "(terms without predictable jumps)", "exact", worst, 0.0, tol.exact_gap, gap=worst,
                       note="m <= 4, indicator systems")]
    nu = Atomic.of([(1.0, 1.0), (-0.5, 1.0)])
    system = indicator_system([(0.5, 1.5), (-1.0, -0.25)], 1.0)
    path = simulate_levy(LevyTriplet(0.0, 1.0, nu), cfg.horizon, cfg.grid_step, cfg.seed, 0)
    gap = product_formula_check([0, 2], system, path, MuMeasure(1.0, nu))["max_abs_gap"]
    out.append(CheckRecord("product.brownian", "product", "product formula with a Gaussian part, "
                           "Euler grid", "exact", gap, 0.0, tol.grid_gap, gap=gap,
                           note=f"grid_step {cfg.grid_step:g}"))
    return out


def suite_permutation(cfg: ExperimentConfig) -> List[CheckRecord]:
    tol = cfg.tolerances
    T = cfg.horizon
    F = [StepFunction.indicator(0.0, T / 2, T), StepFunction.indicator(T / 2, T, T)]
    worst = 0.0
    nu = Atomic.of([(1.5, 2.0), (-0.75, 1.0)])
    mu = MuMeasure(0.0, nu)
    gs = [TestFunction(0.0, Indicator(1.0, 2.0)), TestFunction(0.0, Indicator(-1.0, -0.5))]
    gs = [g * (1.0 / np.sqrt(eta_inner(g, g, mu))) for g in gs]
    for s in range(max(cfg.scenarios // 10, 1)):
        path = simulate_levy(LevyTriplet(0.0, 0.0, nu), T, 0.05, cfg.seed, s)
        worst = max(worst, multiple_vs_iterated_check(F, gs, path, mu)["max_abs_gap"])
    out = [CheckRecord("permutation.pathwise", "permutation", "I_n(F g) = sum over permutations of "
                       "iterated integrals, disjoint time supports", "exact", worst, 0.0, tol.exact_gap,
                       gap=worst, note="n = 2, pure jump")]
    triplet = LevyTriplet(0.0, 1.0, nu)
    g = TestFunction(1.0, Indicator(1.0, 2.0))
    g = g * (1.0 / np.sqrt(eta_inner(g, g, triplet.mu)))
    steps = [StepFunction((0.0, T / 4, T / 2, T), (1.0, -1.0, 2.0)),
             StepFunction((0.0, T / 2, 3 * T / 4, T), (0.5, 1.0, 1.5))]
    res = multiple_vs_iterated_mc(steps, [g, g], triplet, T, 2, cfg.n_paths, cfg.seed,
                                  cfg.grid_step, cfg.workers)
    out.append(CheckRecord("permutation.mean_square", "permutation", "E[(I_n - sum_pi J_n)^2] equals the "
                           "diagonal-cell energy", "statistical", res.estimate, res.reference,
                           tol.z, se=res.std_error, note="n = 2, step tensors, Brownian + jumps"))
    return out


def suite_crp(cfg: ExperimentConfig, tables: Optional[dict] = None) -> List[CheckRecord]:
    triplet = cfg.triplet()
    system = build_system(cfg, triplet)
    rep = chaos_coefficients(cfg.target, system, triplet, cfg.horizon, cfg.order, cfg.n_paths,
                             cfg.seed, cfg.cell_depth, cfg.grid_step, cfg.workers)
    z = cfg.tolerances.z
    if tables is not None:
        tables["crp_residuals"] = [dict(r) for r in rep.residuals]
    top = rep.residual(cfg.order)
    out = [CheckRecord("crp.residual", "crp", f"truncation residual of {cfg.target} at order {cfg.order}",
                       "statistical", top["residual2"], 0.0, z, se=top["se"])]
    worst_bessel = max(max(-r["parseval_residual2"] - z * r["parseval_se"], 0.0) for r in rep.residuals)
    out.append(CheckRecord("crp.bessel", "crp", "captured energy <= E[target^2] (Bessel)", "exact",
                           worst_bessel, 0.0, 1e-12, gap=worst_bessel, note=f"slack of {z:g} s.e."))
    worst_mono = 0.0
    for a, b in zip(rep.residuals, rep.residuals[1:]):
        slack = z * np.hypot(a["se"], b["se"])
        worst_mono = max(worst_mono, b["residual2"] - a["residual2"] - slack)
    out.append(CheckRecord("crp.monotone", "crp", "residual decreases with the order", "exact",
                           worst_mono, 0.0, 1e-12, gap=worst_mono, note=f"slack of {z:g} s.e."))
    return out


_SUITES = {"oracle": suite_oracle, "isometry": suite_isometry, "orthogonality": suite_orthogonality,
           "covariation": suite_covariation, "product": suite_product,
           "permutation": suite_permutation, "crp": suite_crp}


def environment(cfg: ExperimentConfig) -> dict:
    return {"version": __version__, "seed": int(cfg.seed), "config_hash": cfg.digest(),
            "backend": BACKEND}


def run_suite(cfg: ExperimentConfig, log: Optional[Callable[[str], None]] = None) -> VerificationReport:
    """Run the configured suites in a fixed order; deterministic given the seed."""
    suites = [s for s in SUITES if s in cfg.suites]
    report = VerificationReport(suites, environment(cfg))
    t0 = time.perf_counter()
    for name in suites:
        if name == "crp":
            recs = _timed(lambda: suite_crp(cfg, report.tables))
        else:
            recs = _timed(lambda: _SUITES[name](cfg))
        report.records.extend(recs)
        if log is not None:
            for r in recs:
                log(r.describe())
    report.total_runtime = time.perf_counter() - t0
    return report


def emit_tables(report: VerificationReport, fmt: str, outdir) -> List[Path]:
    """Write ``fmt = "csv"`` (one file per family) or ``"json"`` (one document).

    Raises
    ------
    IoFailure
        If the directory or a file cannot be written.
    """
    outdir = Path(outdir)
    written = []
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            p = outdir / "report.json"
            p.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n")
            return [p]
        if fmt != "csv":
            raise ValueError(f"unknown format {fmt!r}")
        for fam in report.suites:
            p = outdir / f"{fam}.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(CSV_COLUMNS)
                for r in report.records:
                    if r.family == fam:
                        d = asdict(r)
                        w.writerow(["" if d[c] is None else d[c] for c in CSV_COLUMNS])
            written.append(p)
        for name, rows in report.tables.items():
            p = outdir / f"{name}.csv"
            with open(p, "w", newline="") as fh:
                cols = list(rows[0]) if rows else ["order"]
                w = csv.DictWriter(fh, fieldnames=cols)
                w.writeheader()
                w.writerows(rows)
            written.append(p)
    except OSError as exc:
        raise IoFailure(f"cannot write to {outdir}: {exc.strerror}") from exc
    return written
