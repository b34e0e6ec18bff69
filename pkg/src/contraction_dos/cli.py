"""Experiment driver: ``contraction-dos <subcommand> --config cfg.json``.

Config schema (JSON object, unknown keys rejected)::

    {
      "model":     {"family": "nsa", "g": 1.0, "B": 4.0},     # required
      "windows":   [8, 16, 32],           # half-widths, strictly increasing
      "seeds":     [0, 1, 2]  or  {"master_seed": 7, "count": 16},
      "functions": [[0, 0, 0, 1], {"name": "z^2", "coefficients": [0, 0, 1]}],
      "outputs":   "out",                 # directory, overridden by --out
      "checks":    [],                    # names to gate the exit code; [] = all
      "tol":       1e-8,                  # cross-check tolerance, in (0, 1e-2]
      "moments":   8                      # number of trace moments b_1..b_K
    }

Complex coefficients are written as ``[re, im]`` pairs. Families: ``nsa``,
``anderson``, ``band`` and ``scaled_unitary`` (see ``models.model_from_dict``).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels, validation
from .dos import (DOSReport, HoloPoly, boundary_defect_trace_norm, eval_L_finite, eval_L_tilde,
                  expectation_L, moments_trace, phi_Lambda, psi_Lambda)
from .models import (NSA, AndersonHermitian, LatticeWindow, ModelError, NonUnitaryBand,
                     ScaledUnitaryBand, build, model_from_dict, nsa_reference_region)
from .reporting import write_csv, write_json, write_svg_lines, write_svg_scatter
from .spectral import (EmpiricalMeasure, counting_measure, moment_distance, spectral_radius,
                       spectrum_of)
from .validation import CHECK_HEADER, CheckResult, Realization

CONFIG_KEYS = {"model", "windows", "seeds", "functions", "outputs", "checks", "tol", "moments"}
SOLVER_TOL = 1e-12
ROUNDOFF = 1e-12

KNOWN_CHECKS = {
    "contraction", "residual", "trace", "determinant", "nsa_reality", "nsa_containment",
    "similarity", "band_closed_form", "unitary_moduli", "normalization", "moment_consistency",
    "three_route_quad", "three_route_pairing", "L_of_one", "finite_propagation", "gauge",
    "mc_zero", "psi_real_axis", "poisson_normalization", "poisson_positivity", "poisson_two_route",
    "uniform_circle_psi", "herglotz", "psi_two_route", "psi_g_two_route", "psi_g_taylor",
    "nsa_moments_vs_dk", "bergman_reproducing", "harmonic_fd_vs_closed_form",
    "harmonic_laplacian_order", "trend_diff_decreasing", "trend_spr_approach",
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    model: object
    windows: list
    seeds: list
    functions: list
    outputs: Path
    checks: list = field(default_factory=list)
    tol: float = 1e-8
    moments: int = 8

    @property
    def is_band(self) -> bool:
        return isinstance(self.model, (NonUnitaryBand, ScaledUnitaryBand))

    def window(self, n: int) -> LatticeWindow:
        return LatticeWindow.band(n) if self.is_band else LatticeWindow(n)

    def echo(self) -> dict:
        return {"model": self.model.to_dict(), "windows": self.windows, "seeds": self.seeds,
                "functions": [{"name": f.name, "coefficients": list(f.coefficients)}
                              for f in self.functions],
                "checks": self.checks, "tol": self.tol, "moments": self.moments}


def load_config(source) -> ExperimentConfig:
    """Parse a config from a path or an already-decoded dict."""
    if isinstance(source, (str, Path)):
        try:
            data = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from None
    else:
        data = dict(source)
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("model", "windows", "seeds", "functions"):
        if key not in data:
            raise ConfigError(f"missing config key {key!r}")
    try:
        model = model_from_dict(data["model"])
    except (ModelError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad model: {exc}") from None

    windows = data["windows"]
    if (not isinstance(windows, list) or not windows
            or any(not isinstance(n, int) or isinstance(n, bool) or n < 1 for n in windows)):
        raise ConfigError("windows must be a non-empty list of positive integers")
    if any(b <= a for a, b in zip(windows, windows[1:])):
        raise ConfigError("windows must be strictly increasing")

    seeds = _parse_seeds(data["seeds"])
    functions = _parse_functions(data["functions"])

    tol = data.get("tol", 1e-8)
    if not isinstance(tol, (int, float)) or not 0 < tol <= 1e-2:
        raise ConfigError("tol must lie in (0, 1e-2]")
    moments = data.get("moments", 8)
    if not isinstance(moments, int) or moments < 1:
        raise ConfigError("moments must be a positive integer")
    moments = max(moments, max(f.degree for f in functions))

    checks = data.get("checks", [])
    if not isinstance(checks, list) or any(c not in KNOWN_CHECKS for c in checks):
        bad = [c for c in checks if c not in KNOWN_CHECKS] if isinstance(checks, list) else checks
        raise ConfigError(f"unknown checks: {bad}")

    return ExperimentConfig(model, windows, seeds, functions, Path(data.get("outputs", "out")),
                            list(checks), float(tol), moments)


def _parse_seeds(raw) -> list:
    if isinstance(raw, dict):
        if set(raw) != {"master_seed", "count"}:
            raise ConfigError("seed block needs exactly 'master_seed' and 'count'")
        count = raw["count"]
        if not isinstance(count, int) or count < 1:
            raise ConfigError("seed count must be a positive integer")
        state = np.random.SeedSequence(int(raw["master_seed"])).generate_state(count, np.uint64)
        return [int(s) for s in state]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("seeds must be a non-empty list or {master_seed, count}")
    if any(not isinstance(s, int) or isinstance(s, bool) or s < 0 for s in raw):
        raise ConfigError("seeds must be non-negative integers")
    if len(set(raw)) != len(raw):
        raise ConfigError("seeds must be distinct")
    return list(raw)


def _parse_functions(raw) -> list:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("at least one function is required")
    out = []
    for item in raw:
        name = None
        if isinstance(item, dict):
            if set(item) - {"name", "coefficients"} or "coefficients" not in item:
                raise ConfigError(f"bad function entry {item!r}")
            name, item = item.get("name"), item["coefficients"]
        if not isinstance(item, list) or not item:
            raise ConfigError(f"function coefficients must be a non-empty list, got {item!r}")
        coeffs = tuple(complex(c[0], c[1]) if isinstance(c, list) else complex(c) for c in item)
        try:
            out.append(HoloPoly(coeffs, name) if name else HoloPoly(coeffs))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    return out


# ---------------------------------------------------------------------------
# work items


def independent_seeds(seeds) -> list:
    """Seeds unrelated to ``seeds`` (for comparisons that need independent samples)."""
    return [int(np.random.SeedSequence([int(s), 0x6B]).generate_state(1, np.uint64)[0])
            for s in seeds]


def realize(cfg: ExperimentConfig, n: int, seed: int) -> Realization:
    m = build(cfg.model, cfg.window(n), seed)
    try:
        s = spectrum_of(m, SOLVER_TOL)
    except Exception as exc:
        raise RuntimeError(f"solver failed for n={n} seed={seed}: {exc}") from exc
    return Realization(n, seed, m, s)


def realize_all(cfg: ExperimentConfig, threads: int, windows=None, seeds=None) -> list:
    """Realizations for every (window, seed), in window-major order regardless of ``threads``."""
    items = [(n, s) for n in (windows or cfg.windows) for s in (seeds or cfg.seeds)]
    return _map(lambda item: realize(cfg, *item), items, threads)


def _map(func, items, threads: int) -> list:
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(func, items))
    return [func(x) for x in items]


def _prepare(cfg: ExperimentConfig) -> Path:
    cfg.outputs.mkdir(parents=True, exist_ok=True)
    return cfg.outputs


def _write_checks(out: Path, stem: str, checks) -> None:
    write_csv(out / f"{stem}_checks.csv", CHECK_HEADER, [c.row() for c in checks])


# ---------------------------------------------------------------------------
# subcommands


def run_spectrum(cfg: ExperimentConfig, threads: int = 1) -> list[CheckResult]:
    out = _prepare(cfg)
    checks, radius_rows = [], []
    region = None
    if isinstance(cfg.model, NSA):
        region = nsa_reference_region(cfg.model.g, cfg.model.B)
    for r in realize_all(cfg, threads):
        ev = r.spectrum.eigenvalues
        stem = f"spectrum_n{r.n}_seed{r.seed}"
        write_csv(out / f"{stem}.csv", ["re", "im"], [[z.real, z.imag] for z in ev])
        circles = [1.0]
        if cfg.is_band:
            circles.append(_band_ring_radius(cfg.model))
        write_svg_scatter(out / f"{stem}.svg", ev, curves=region.curves if region else (),
                          circles=[c for c in circles if c is not None],
                          title=f"{cfg.model.family} {r.context}")
        limit = cfg.model.limit_spectral_radius() if isinstance(cfg.model, NSA) else math.nan
        radius_rows.append([r.n, r.seed, r.matrix.size, spectral_radius(r.spectrum), limit,
                            r.spectrum.residual])
        checks.extend(validation.matrix_checks(r, SOLVER_TOL))
    write_csv(out / "spectral_radius.csv", ["n", "seed", "size", "spr", "spr_limit", "residual"],
              radius_rows)
    _write_checks(out, "spectrum", checks)
    return checks


def _band_ring_radius(spec):
    if isinstance(spec, ScaledUnitaryBand):
        return spec.r
    c = spec.coupling
    if c[0, 1] == 0 and c[1, 0] == 0 and c[0, 0] == 1:
        return math.sqrt(abs(c[1, 1])) * spec.scale
    return None


def _phases_uniform(spec) -> bool:
    return isinstance(spec, (NonUnitaryBand, ScaledUnitaryBand)) and spec.phases == "uniform"


def run_dos(cfg: ExperimentConfig, threads: int = 1) -> list[CheckResult]:
    out = _prepare(cfg)
    checks = []
    for n in cfg.windows:
        window = cfg.window(n)
        r = realize(cfg, n, cfg.seeds[0])
        K = cfg.moments
        b = moments_trace(r.matrix, K)
        rho = spectral_radius(r.spectrum)
        cnu = rho < 1 - validation.CNU_GAP
        L, Lt, quad, pair, mc_mean, mc_se = {}, {}, {}, {}, {}, {}
        for f in cfg.functions:
            vals = validation.route_values(f, r, b, min(cfg.tol, 1e-10) / 10)
            L[f.name] = vals["L"]
            Lt[f.name] = eval_L_tilde(f, cfg.model, window, r.seed)
            pair[f.name] = vals["pairing"]
            quad[f.name] = vals.get("quad", math.nan)
            if len(cfg.seeds) >= 2:
                est = expectation_L(f, cfg.model, window, cfg.seeds, "tilde", threads)
                mc_mean[f.name], mc_se[f.name] = est.mean, est.stderr
                if _phases_uniform(cfg.model):
                    checks.append(_mc_zero_check(f, est, f"n={n}"))
        checks.extend(validation.dos_checks(r, cfg.functions, cfg.tol, K))

        t = 2 * np.pi * np.arange(64) / 64
        phi = phi_Lambda(r.spectrum, t) if cnu else np.full(t.shape, np.nan, dtype=complex)
        zr = 1 / rho if rho > 0 else 1.0
        z = np.concatenate([np.linspace(-0.9, 0.9, 19) * zr,
                            0.5 * zr * np.exp(2j * np.pi * np.arange(8) / 8)])
        psi = psi_Lambda(r.spectrum, z)
        if isinstance(cfg.model, (NSA, AndersonHermitian)):
            dev = float(np.max(np.abs(psi[:19].imag)))
            checks.append(validation._check("psi_real_axis", r.context, dev, cfg.tol))
        write_csv(out / f"phi_n{n}.csv", ["t_or_re", "im_of_arg", "re_val", "im_val"],
                  [[ti, 0.0, v.real, v.imag] for ti, v in zip(t, phi)])
        write_csv(out / f"psi_n{n}.csv", ["t_or_re", "im_of_arg", "re_val", "im_val"],
                  [[zi.real, zi.imag, v.real, v.imag] for zi, v in zip(z, psi)])
        mine = [c for c in checks if c.context.startswith(f"n={n}")]
        report = DOSReport(cfg.model.to_dict(), window.to_dict(), cfg.seeds, list(b),
                           [[ti, v] for ti, v in zip(t, phi)], [[zi, v] for zi, v in zip(z, psi)],
                           L, Lt, quad, pair, mc_mean, mc_se,
                           {f"{c.name} {c.context}": c.passed for c in mine})
        write_json(out / f"dos_n{n}.json", report.to_json_dict())
    _write_checks(out, "dos", checks)
    return checks


def _mc_zero_check(f: HoloPoly, est, ctx: str) -> CheckResult:
    """Uniform phases: the disorder average of ``L(f)`` is ``f(0)``."""
    dev = abs(est.mean - f.coefficients[0])
    if est.stderr == 0:
        return validation._check("mc_zero", f"{ctx} f={f.name} (structurally exact)", dev, 1e-12)
    return validation._check("mc_zero", f"{ctx} f={f.name}", dev / est.stderr, 3.0)


def run_converge(cfg: ExperimentConfig, threads: int = 1) -> list[CheckResult]:
    out = _prepare(cfg)
    seed = cfg.seeds[0]
    reals = realize_all(cfg, threads, seeds=[seed])
    rows, diffs = [], {f.name: [] for f in cfg.functions}
    sprs = []
    previous = None
    for r in reals:
        window = cfg.window(r.n)
        mu = counting_measure(r.spectrum)
        mdist = moment_distance(previous, mu, cfg.moments) if previous is not None else math.nan
        previous = mu
        rho = spectral_radius(r.spectrum)
        sprs.append(rho)
        defect = boundary_defect_trace_norm(cfg.model, window, seed)
        for f in cfg.functions:
            L = eval_L_finite(f, r.spectrum)
            Lt = eval_L_tilde(f, cfg.model, window, seed)
            diffs[f.name].append(abs(L - Lt))
            rows.append([r.n, r.matrix.size, f.name, L.real, L.imag, Lt.real, Lt.imag,
                         abs(L - Lt), mdist, rho, defect])
    write_csv(out / "converge.csv",
              ["n", "size", "f", "L_re", "L_im", "Ltilde_re", "Ltilde_im", "abs_diff",
               "moment_distance_prev", "spr", "defect_trace_norm"], rows)

    checks = []
    if len(reals) >= 2:
        for name, d in diffs.items():
            ctx = f"seed={seed} f={name}"
            if max(d) <= ROUNDOFF:
                # nothing to decrease: both traces agree to rounding at every window
                checks.append(CheckResult("trend_diff_decreasing", f"{ctx} (at rounding level)",
                                          max(d), ROUNDOFF, True, advisory=True))
                continue
            rises = sum(b >= a for a, b in zip(d, d[1:]))
            checks.append(CheckResult("trend_diff_decreasing", ctx, float(rises), 0.0, rises == 0,
                                      advisory=True))
        if isinstance(cfg.model, NSA):
            limit = cfg.model.limit_spectral_radius()
            gaps = [abs(s - limit) for s in sprs]
            checks.append(CheckResult("trend_spr_approach", f"seed={seed}", gaps[-1], gaps[0],
                                      gaps[-1] < gaps[0], advisory=True))
        write_svg_lines(out / "converge.svg", cfg.windows,
                        {f"log10|L-Lt| {k}": np.log10(np.maximum(v, 1e-300)) for k, v in diffs.items()},
                        title="finite-volume difference")
    write_json(out / "converge.json", {"config": cfg.echo(), "seed": seed,
                                       "trend_flags": {f"{c.name} {c.context}": c.passed
                                                       for c in checks}})
    _write_checks(out, "converge", checks)
    return checks


def run_kernels(cfg: ExperimentConfig, threads: int = 1) -> list[CheckResult]:
    out = _prepare(cfg)
    checks = []
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seeds[0]), 0x4B]))
    n = cfg.windows[-1]
    spec = cfg.model

    if isinstance(spec, (NSA, AndersonHermitian)):
        B, potential = spec.B, spec.potential
        window = LatticeWindow(n)
        dk, anderson_spectra = validation.anderson_dos(B, potential, window, cfg.seeds)
        checks.append(validation.herglotz_check(dk, rng))
        zs = np.linspace(-6, 6, 49) + 0.1j
        F = kernels.borel_transform(dk, zs)
        write_csv(out / "borel.csv", ["re_z", "im_z", "re_F", "im_F"],
                  [[z.real, z.imag, v.real, v.imag] for z, v in zip(zs, F)])
        if isinstance(spec, NSA):
            checks.extend(validation.psi_g_checks(dk, spec.g, spec.B, f"n={n}"))
            nsa_seeds = independent_seeds(cfg.seeds)
            reals = realize_all(cfg, threads, windows=[n], seeds=nsa_seeds)
            K = min(cfg.moments, 6) if cfg.moments >= 1 else 6
            nm = [moments_trace(r.matrix, K) for r in reals]
            if len(cfg.seeds) >= 2:
                checks.extend(validation.combined_moment_checks(anderson_spectra, nm, spec.scale,
                                                                K, f"n={n}"))
            rad = spec.scale / (2 + spec.B)
            zg = 0.9 * rad * np.exp(2j * np.pi * np.arange(32) / 32)
            direct = kernels.psi_g_nsa(dk, spec.g, spec.B, zg)
            via = kernels.psi_g_via_borel(dk, spec.g, spec.B, zg)
            write_csv(out / "psi_g.csv", ["re_z", "im_z", "re_direct", "im_direct", "re_borel",
                                          "im_borel"],
                      [[z.real, z.imag, a.real, a.imag, b.real, b.imag]
                       for z, a, b in zip(zg, direct, via)])
        extra = ()
    else:
        reals = realize_all(cfg, threads, windows=[n])
        angles = [np.mod(np.angle(r.spectrum.eigenvalues), 2 * np.pi) for r in reals]
        dk = EmpiricalMeasure.pooled([EmpiricalMeasure.uniform("circle", a) for a in angles])
        extra = (("model eigenvalue angles", dk),)
        t = 2 * np.pi * np.arange(256) / 256
        rows = []
        for rr in (0.3, 0.7, 0.95):
            vals = kernels.psi_r_unitary(dk, rr, np.exp(1j * t))
            rows.extend([rr, ti, v.real, v.imag] for ti, v in zip(t, vals))
        write_csv(out / "psi_r.csv", ["r", "t", "re_psi", "im_psi"], rows)

    checks.extend(validation.poisson_normalization_checks())
    checks.extend(validation.poisson_positivity_checks(rng, extra=extra))
    checks.append(validation.uniform_circle_check())

    r0 = realize(cfg, cfg.windows[0], cfg.seeds[0])
    checks.extend(validation.psi_two_route_checks(r0))
    if r0.matrix.size <= 256:
        checks.extend(validation.bergman_checks(r0))
    _write_checks(out, "kernels", checks)
    return checks


def run_validate(cfg: ExperimentConfig, threads: int = 1) -> list[CheckResult]:
    """Full invariant suite over every (window, seed) of the config."""
    out = _prepare(cfg)
    checks = []
    reals = realize_all(cfg, threads)
    for r in reals:
        checks.extend(validation.matrix_checks(r, SOLVER_TOL))
        checks.extend(validation.dos_checks(r, cfg.functions, cfg.tol, cfg.moments))
    firsts = [r for r in reals if r.seed == cfg.seeds[0]]
    for r in firsts:
        window = cfg.window(r.n)
        for f in cfg.functions:
            checks.append(validation.finite_propagation_check(cfg.model, window, r.seed, f,
                                                              r.context))
    for f in cfg.functions:
        checks.extend(validation.gauge_checks(firsts[0], f))
    if len(cfg.seeds) >= 2 and _phases_uniform(cfg.model):
        for n in cfg.windows:
            for f in cfg.functions:
                est = expectation_L(f, cfg.model, cfg.window(n), cfg.seeds, "tilde", threads)
                checks.append(_mc_zero_check(f, est, f"n={n}"))
    checks.extend(c for c in run_kernels(cfg, threads))

    write_csv(out / "validate_checks.csv", CHECK_HEADER, [c.row() for c in checks])
    failed = [f"{c.name} {c.context}" for c in checks if not c.passed]
    write_json(out / "validate.json", {"config": cfg.echo(), "total": len(checks),
                                       "failed": failed, "passed": not failed})
    return checks


COMMANDS = {"spectrum": run_spectrum, "dos": run_dos, "converge": run_converge,
            "kernels": run_kernels, "validate": run_validate}


def gate(checks, requested) -> bool:
    """True iff every requested check passed (all non-advisory ones if none requested)."""
    if requested:
        relevant = [c for c in checks if c.name in requested]
    else:
        relevant = [c for c in checks if not c.advisory]
    return all(c.passed for c in relevant)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contraction-dos",
                                     description="Finite-volume DOS experiments for random contractions.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--out", help="output directory (overrides 'outputs')")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    parser.add_argument("--tol", type=float, help="cross-check tolerance (overrides 'tol')")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.tol is not None:
            if not 0 < args.tol <= 1e-2:
                raise ConfigError("--tol must lie in (0, 1e-2]")
            cfg.tol = args.tol
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        cfg.outputs = Path(args.out)
    checks = COMMANDS[args.command](cfg, args.threads)
    ok = gate(checks, cfg.checks)
    failed = [c for c in checks if not c.passed]
    print(f"{args.command}: {len(checks)} checks, {len(failed)} failed -> {cfg.outputs}")
    for c in failed:
        tag = " (advisory)" if c.advisory else ""
        print(f"  FAIL {c.name} [{c.context}] value={c.value:.3g} threshold={c.threshold:.3g}{tag}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
