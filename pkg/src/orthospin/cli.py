"""Command-line driver: sweep (model, beta, n) grids and check the factorization claims.

Usage::

    orthospin verify --spec sweep.cfg --out results/ [--threads K] [--verbose]
    orthospin table --out results/

Sweep files are flat ``key = value`` lines; ``#`` starts a comment and
list values are comma separated.  Integer lists also accept ``lo..hi`` and
``lo..hi:step`` ranges.  Keys:

    model      curie_weiss | sine | random_orthogonal       (required)
    betas      inverse temperatures                         (required)
    ns         system sizes                                 (required)
    outputs    quantities to compute                        (required)
    engine     exact | mc | auto                            (default auto)
    seed       integer, random_orthogonal matrices and MC   (default 0)
    signs      alternating | plus | comma list of +-1       (default alternating)
    lambdas    mgf_check arguments                          (default 0, 1)
    mc_sweeps  sweeps per chain                             (default 100000)
    mc_chains  chains                                       (default 4)

Exit codes: 0 all checks pass, 1 usage error, 2 capacity violation,
3 invariant or slope-band failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analytics, correlations, gibbs_exact, interactions, montecarlo
from .errors import CapacityError, OrthospinError
from .gibbs_exact import GibbsContext
from .reports import ResultRow, dumps, fmt, read_results_csv, write_results_csv

log = logging.getLogger("orthospin")

EXIT_OK, EXIT_USAGE, EXIT_CAPACITY, EXIT_INVARIANT = 0, 1, 2, 3

MODELS = ("curie_weiss", "sine", "random_orthogonal")
ENGINES = ("exact", "mc", "auto")
QUANTITIES = ("log_z", "h_mean", "h_var", "two_point", "factorization_gap", "starred_sum_2",
              "starred_sum_3", "lemma_terms", "subadditivity", "mgf_check")
MC_QUANTITIES = {"h_mean", "h_var", "two_point"}
AUTO_EXACT_MAX_N = 20
# largest n each exact-only quantity can handle
EXACT_CAPS = {
    "log_z": gibbs_exact.MAX_ENUM_N,
    "h_mean": gibbs_exact.MAX_ENUM_N,
    "h_var": gibbs_exact.MAX_ENUM_N,
    "two_point": gibbs_exact.MAX_TWO_POINT_N,
    "factorization_gap": gibbs_exact.MAX_TWO_POINT_N,
    "lemma_terms": gibbs_exact.MAX_TWO_POINT_N,
    "mgf_check": gibbs_exact.MAX_TWO_POINT_N,
    "starred_sum_2": correlations.MAX_FOUR_POINT_N,
    "starred_sum_3": correlations.MAX_SIX_POINT_N,
    "subadditivity": gibbs_exact.MAX_ENUM_N // 2,
}
# (lo, hi) accepted log-log slopes for O(1/N) quantities
SLOPE_BANDS = {
    "factorization_gap": (-1.6, -0.6),
    "h_var": (-1.5, -0.7),
    "starred_sum_2": (-1.8, -0.6),
    "starred_sum_3": (-1.8, -0.6),
}
CW_GAP_BAND = (-1.8, -0.6)


class SpecError(OrthospinError, ValueError):
    pass


@dataclass
class SweepSpec:
    model: str
    betas: list
    ns: list
    outputs: list
    engine: str = "auto"
    seed: int = 0
    signs: str | list = "alternating"
    lambdas: list = field(default_factory=lambda: [0.0, 1.0])
    mc_sweeps: int = 100_000
    mc_chains: int = 4

    def matrix(self, n: int) -> interactions.InteractionMatrix:
        if self.model == "curie_weiss":
            return interactions.build_curie_weiss(n)
        if self.model == "sine":
            return interactions.build_sine(n)
        if self.signs == "alternating":
            signs = interactions.alternating_signs(n)
        elif self.signs == "plus":
            signs = np.ones(n)
        else:
            if len(self.signs) != n:
                raise SpecError(f"signs has {len(self.signs)} entries but n={n}")
            signs = self.signs
        return interactions.build_random_orthogonal(n, signs, self.seed)

    def engine_for(self, quantity: str, n: int) -> str:
        if self.engine == "auto":
            if quantity in MC_QUANTITIES and n > AUTO_EXACT_MAX_N:
                return "mc"
            return "exact"
        return self.engine


def _int_list(text: str) -> list[int]:
    out = []
    for tok in (t.strip() for t in text.split(",")):
        if ".." in tok:
            lo, _, rest = tok.partition("..")
            hi, _, step = rest.partition(":")
            out.extend(range(int(lo), int(hi) + 1, int(step) if step else 1))
        elif tok:
            out.append(int(tok))
    return out


def _float_list(text: str) -> list[float]:
    return [float(t) for t in (t.strip() for t in text.split(",")) if t]


_PARSERS = {
    "model": str.strip,
    "engine": str.strip,
    "betas": _float_list,
    "ns": _int_list,
    "outputs": lambda v: [t.strip() for t in v.split(",") if t.strip()],
    "seed": int,
    "lambdas": _float_list,
    "mc_sweeps": int,
    "mc_chains": int,
}


def parse_spec(text: str, source: str = "<spec>") -> SweepSpec:
    """Parse the ``key = value`` sweep grammar; errors name the line and field."""
    fields: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key = key.strip()
        where = f"{source}:{lineno}: field '{key}'"
        if not eq:
            raise SpecError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key == "signs":
            v = value.strip()
            try:
                fields[key] = v if v in ("alternating", "plus") else [int(t) for t in v.split(",")]
            except ValueError as exc:
                raise SpecError(f"{where}: {exc}") from None
            continue
        if key not in _PARSERS:
            raise SpecError(f"{where}: unknown key")
        try:
            fields[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise SpecError(f"{where}: {exc}") from None
    for req in ("model", "betas", "ns", "outputs"):
        if req not in fields:
            raise SpecError(f"{source}: missing required field '{req}'")
    spec = SweepSpec(**fields)
    if spec.model not in MODELS:
        raise SpecError(f"{source}: field 'model': expected one of {MODELS}, got {spec.model!r}")
    if spec.engine not in ENGINES:
        raise SpecError(f"{source}: field 'engine': expected one of {ENGINES}, got {spec.engine!r}")
    bad = [q for q in spec.outputs if q not in QUANTITIES]
    if bad:
        raise SpecError(f"{source}: field 'outputs': unknown quantities {bad}")
    if not spec.betas or any(b < 0 for b in spec.betas):
        raise SpecError(f"{source}: field 'betas': need non-negative values")
    if not spec.ns or any(n < 2 for n in spec.ns) or len(set(spec.ns)) != len(spec.ns):
        raise SpecError(f"{source}: field 'ns': need distinct sizes >= 2")
    if isinstance(spec.signs, list):
        if any(s not in (-1, 1) for s in spec.signs):
            raise SpecError(f"{source}: field 'signs': entries must be +1 or -1")
        if any(n != len(spec.signs) for n in spec.ns):
            raise SpecError(f"{source}: field 'signs': {len(spec.signs)} entries but ns = {spec.ns}")
    return spec


def capacity_violations(spec: SweepSpec) -> list[tuple[str, int, str]]:
    """``(quantity, n, reason)`` for every grid point that cannot run."""
    out = []
    for q in spec.outputs:
        for n in spec.ns:
            eng = spec.engine_for(q, n)
            if eng == "mc":
                if q not in MC_QUANTITIES:
                    out.append((q, n, f"{q} has no Monte Carlo estimator"))
                elif n < 2:
                    out.append((q, n, "n too small"))
            elif n > EXACT_CAPS[q]:
                cap = EXACT_CAPS[q]
                what = "2n" if q == "subadditivity" else "n"
                out.append((q, n, f"exact {q} needs {what} <= {cap * (2 if what == '2n' else 1)}"))
    return out


@dataclass
class Check:
    name: str
    ok: bool
    detail: str


def _grid_point(spec: SweepSpec, beta: float, n: int, skip: set) -> tuple[list, list]:
    """All rows and hard checks for one ``(beta, n)``."""
    rows, checks = [], []
    J = spec.matrix(n)
    ctx = GibbsContext(J, beta)
    model = spec.model
    todo = [q for q in spec.outputs if (q, n) not in skip]
    exact_needs = {q for q in todo if spec.engine_for(q, n) == "exact"}

    summary = None
    if exact_needs & {"h_mean", "h_var", "two_point", "factorization_gap", "lemma_terms"}:
        want_tp = bool(exact_needs & {"two_point", "factorization_gap", "lemma_terms"})
        summary = gibbs_exact.enumerate(ctx, k_max=2, want_two_point=want_tp)

    mc = None
    mc_needs = [q for q in todo if spec.engine_for(q, n) == "mc"]
    if mc_needs:
        cfg = montecarlo.ChainConfig(seed=spec.seed, n_sweeps=spec.mc_sweeps, n_chains=spec.mc_chains)
        obs = [montecarlo.ENERGY_DENSITY, montecarlo.ENERGY_DENSITY_SQ, montecarlo.two_point((0, 1))]
        mc = montecarlo.run_chain(ctx, cfg, obs)
        if mc.stale:
            log.warning("n=%d beta=%g: %s", n, beta, "; ".join(mc.warnings))

    def row(q, v, method="exact", se=0.0):
        rows.append(ResultRow(model, beta, n, q, float(v), method, float(se)))

    for q in todo:
        eng = spec.engine_for(q, n)
        if q == "log_z":
            lz = gibbs_exact.log_partition(ctx)
            row("log_z", lz)
            g = analytics.free_energy_density(ctx)
            row("free_energy_density", g)
            if beta < 1:
                row("free_energy_gap", g - analytics.free_energy_limit(ctx))
        elif q == "h_mean":
            if eng == "mc":
                e = mc.estimates[montecarlo.ENERGY_DENSITY]
                row(q, e.value, "mc", e.std_error)
            else:
                row(q, summary.moments[1])
        elif q == "h_var":
            if eng == "mc":
                e = mc.energy_density_variance()
                row(q, e.value, "mc", e.std_error)
            else:
                row(q, gibbs_exact.cumulants(summary, 2)[2])
        elif q == "two_point":
            if eng == "mc":
                e = mc.estimates[("two_point", (0, 1))]
                row(q, e.value, "mc", e.std_error)
            else:
                row(q, summary.two_point[0, 1])
        elif q == "factorization_gap":
            row(q, correlations.factorization_gap(ctx, "contraction", summary=summary))
        elif q in ("starred_sum_2", "starred_sum_3"):
            row(q, correlations.starred_sum(ctx, int(q[-1])))
        elif q == "lemma_terms":
            tr = correlations.lemma_trace_term(ctx, summary)
            rs = correlations.lemma_resolvent_term(ctx, summary)
            row("lemma_trace_term", tr)
            row("lemma_resolvent_term", rs)
            tag = f"{model} beta={fmt(beta)} n={n}"
            if interactions.orthogonality_defect(J) <= 1e-10:
                checks.append(Check("lemma_resolvent = 1/n", abs(rs - 1.0 / n) <= 1e-10,
                                    f"{tag}: {rs!r} vs {1.0 / n!r}"))
            if J.kind is interactions.Kind.SINE:
                checks.append(Check("lemma_trace <= 1/(2n)", tr <= 0.5 / n + 1e-12,
                                    f"{tag}: {tr!r} vs {0.5 / n!r}"))
        elif q == "subadditivity":
            r = analytics.subadditivity_report([beta], [n])[0] if model == "curie_weiss" else None
            if r is None:
                single = gibbs_exact.log_partition(ctx) / n
                doubled = gibbs_exact.log_partition(GibbsContext(spec.matrix(2 * n), beta)) / (2 * n)
                r = analytics.SubadditivityRow(beta, n, doubled, single)
            row("subadditivity_diff", r.difference)
            checks.append(Check("subadditivity", r.ok,
                                f"{model} beta={fmt(beta)} n={n}: (1/2n)logZ_2n - (1/n)logZ_n = {r.difference!r}"))
        elif q == "mgf_check":
            for lam in spec.lambdas:
                lhs, rhs = gibbs_exact.mgf_check(ctx, lam)
                d = abs(lhs - rhs)
                row(f"mgf_abs_diff(lambda={lam:g})", d)
                checks.append(Check("mgf identity", d <= 1e-10,
                                    f"{model} beta={fmt(beta)} n={n} lambda={lam:g}: |lhs-rhs| = {d!r}"))
    return rows, checks


def _fits(spec: SweepSpec, rows: list[ResultRow]) -> tuple[list, list]:
    groups = defaultdict(list)
    for r in rows:
        groups[(r.quantity, r.beta)].append((r.n, r.value))
    fits, checks = [], []
    for (q, beta), pts in sorted(groups.items()):
        if q not in SLOPE_BANDS:
            continue
        if sum(1 for _, v in pts if v != 0) < 4:
            continue
        s = analytics.fit_decay(pts, quantity=q)
        rec = s.fit_record()
        rec.update(model=spec.model, beta=beta)
        fits.append(rec)
        if q.startswith("starred_sum") and beta >= 1:
            continue
        lo, hi = CW_GAP_BAND if (q == "factorization_gap" and spec.model == "curie_weiss") else SLOPE_BANDS[q]
        checks.append(Check(f"{q} slope band", lo <= s.slope <= hi,
                            f"{spec.model} beta={fmt(beta)}: slope {s.slope:.4f} in [{lo}, {hi}]"))
    return fits, checks


def cmd_verify(spec: SweepSpec, out: Path, threads: int = 1) -> int:
    out.mkdir(parents=True, exist_ok=True)
    violations = capacity_violations(spec)
    for q, n, why in violations:
        log.error("capacity: %s at n=%d: %s", q, n, why)
    skip = {(q, n) for q, n, _ in violations}

    grid = [(b, n) for b in spec.betas for n in spec.ns]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda p: _grid_point(spec, p[0], p[1], skip), grid))
    else:
        parts = [_grid_point(spec, b, n, skip) for b, n in grid]
    rows = [r for p in parts for r in p[0]]
    checks = [c for p in parts for c in p[1]]
    fits, fit_checks = _fits(spec, rows)
    checks += fit_checks

    write_results_csv(rows, out / "results.csv")
    (out / "fits.json").write_text(dumps(fits, indent=2) + "\n")
    lines = [f"{'PASS' if c.ok else 'FAIL'}  {c.name}: {c.detail}" for c in checks]
    lines += [f"CAPACITY  {q} n={n}: {why}" for q, n, why in violations]
    n_fail = sum(not c.ok for c in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} checks passed, "
                 f"{len(violations)} capacity violations")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        log.info(line)
    if violations:
        return EXIT_CAPACITY
    return EXIT_INVARIANT if n_fail else EXIT_OK


def render_table(rows: list[ResultRow]) -> str:
    header = ["model", "beta", "n", "quantity", "value", "method", "std_error"]
    body = [[r.model, f"{r.beta:g}", str(r.n), r.quantity, f"{r.value:.10g}", r.method,
             f"{r.std_error:.3g}"] for r in rows]
    widths = [max(len(x) for x in col) for col in zip(header, *body)]
    fmt_row = lambda cells: "  ".join(c.rjust(w) if i in (1, 2, 4, 6) else c.ljust(w)
                                      for i, (c, w) in enumerate(zip(cells, widths)))
    return "\n".join([fmt_row(header), fmt_row(["-" * w for w in widths])] + [fmt_row(b) for b in body])


def write_dat_files(rows: list[ResultRow], out: Path) -> list[Path]:
    """One ``<quantity>_vs_n.dat`` per quantity; blank-line separated blocks per (model, beta)."""
    by_q = defaultdict(lambda: defaultdict(list))
    for r in rows:
        by_q[r.quantity][(r.model, r.beta)].append((r.n, r.value, r.std_error))
    paths = []
    for q, blocks in by_q.items():
        safe = "".join(c if c.isalnum() or c in "_-." else "_" for c in q)
        path = out / f"{safe}_vs_n.dat"
        chunks = []
        for (model, beta), pts in sorted(blocks.items()):
            lines = [f"# {q}  model={model}  beta={fmt(beta)}  (plot on log-log axes)",
                     "# n value std_error"]
            lines += [f"{n} {fmt(v)} {fmt(se)}" for n, v, se in sorted(pts)]
            chunks.append("\n".join(lines))
        path.write_text("\n\n\n".join(chunks) + "\n")
        paths.append(path)
    return paths


def cmd_table(out: Path) -> int:
    path = out / "results.csv"
    if not path.exists():
        print(f"error: {path} not found; run 'orthospin verify' first", file=sys.stderr)
        return EXIT_USAGE
    rows = read_results_csv(path)
    if not rows:
        print(f"error: {path} has no result rows", file=sys.stderr)
        return EXIT_USAGE
    print(render_table(rows))
    write_dat_files(rows, out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="orthospin",
                                description="Exact and Monte Carlo checks of mean-field factorization.")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="run a sweep and check invariants")
    v.add_argument("--spec", required=True, type=Path, help="sweep file (key = value lines)")
    v.add_argument("--out", required=True, type=Path, help="output directory")
    v.add_argument("--threads", type=int, default=1, help="grid points evaluated concurrently")
    v.add_argument("--verbose", action="store_true")
    t = sub.add_parser("table", help="print results.csv and write .dat files")
    t.add_argument("--out", required=True, type=Path, help="directory holding results.csv")
    t.add_argument("--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "table":
        return cmd_table(args.out)
    try:
        spec = parse_spec(args.spec.read_text(), str(args.spec))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        code = cmd_verify(spec, args.out, args.threads)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    summary = (args.out / "summary.txt").read_text()
    print(summary, end="")
    return code


if __name__ == "__main__":
    sys.exit(main())
