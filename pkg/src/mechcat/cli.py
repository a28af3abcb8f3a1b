"""Command-line front end: benchmark tables, criterion maps, cooling maps,
detector studies, and verification Monte-Carlo runs.

Output is CSV (UTF-8, '.' decimal, stable column order) or JSON; numbers are
dimensionless with hbar = 1 and vacuum quadrature variance 1/2 unless a
column says otherwise. Exit codes: 0 success, 2 golden-tolerance failure in
--check mode, 3 library error.
"""

from __future__ import annotations

import argparse
import configparser
import importlib.resources as resources
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import criteria, detector, presets, sideband, verify
from .errors import MechcatError
from .herald import CoherentInput, ProtocolParams, heralded_moment_table, heralded_state
from .opensystem import EnvParams, evolve_moments
from .presets import ALPHA_DEFAULT, OMEGA_M_DEFAULT, PHI_DEFAULT

EXIT_OK = 0
EXIT_CHECK_FAILED = 2
EXIT_ERROR = 3


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def write_csv(path, header_meta: list[str], columns: list[str], rows: list[tuple]):
    lines = [f"# {m}" for m in header_meta]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def write_json(path, payload):
    text = json.dumps(payload, indent=1, sort_keys=True) + "\n"
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def write_table(args, meta: list[str], columns: list[str], rows: list[tuple]):
    if args.format == "json":
        write_json(args.out, {"meta": meta, "rows": [dict(zip(columns, r)) for r in rows]})
    else:
        write_csv(args.out, meta, columns, rows)


def parse_grid(spec: str) -> list[float]:
    """Grid syntax: 'start:stop:num' (inclusive linspace) or 'a, b, c'."""
    spec = spec.strip()
    if ":" in spec:
        start, stop, num = spec.split(":")
        return [float(v) for v in np.linspace(float(start), float(stop), int(num))]
    return [float(v) for v in spec.split(",") if v.strip()]


def load_config(path: str | None) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    if path:
        with open(path, encoding="utf-8") as fh:
            cfg.read_file(fh)
    return cfg


def _cfg_float(cfg, section, key, default):
    if cfg.has_option(section, key):
        return cfg.getfloat(section, key)
    return default


def env_from_config(cfg) -> EnvParams:
    return EnvParams(
        omega_m=_cfg_float(cfg, "env", "omega_m", OMEGA_M_DEFAULT),
        q_factor=_cfg_float(cfg, "env", "q_factor", 1e5),
        nbar_bath=_cfg_float(cfg, "env", "nbar_bath", 500.0),
    )


def detector_from_config(cfg, resolving=True) -> detector.DetectorParams:
    dark = None
    if cfg.has_option("detector", "dark_prob"):
        dark = cfg.getfloat("detector", "dark_prob")
    elif cfg.has_option("detector", "dark_rate_hz") or cfg.has_option("detector", "window_s"):
        dark = detector.dark_prob_from_rate(
            _cfg_float(cfg, "detector", "dark_rate_hz", 1.0),
            _cfg_float(cfg, "detector", "window_s", 10e-9),
        )
    return detector.DetectorParams(
        eta=_cfg_float(cfg, "detector", "eta", presets.ETA_DEFAULT),
        dark_prob=presets.DARK_PROB_DEFAULT if dark is None else dark,
        resolving=resolving,
    )


# ---------------------------------------------------------------------------
# golden comparison


def load_golden(name: str) -> dict[tuple[str, str], tuple[float, str, float]]:
    text = resources.files("mechcat.data").joinpath(name).read_text(encoding="utf-8")
    golden = {}
    for line in text.splitlines():
        if not line or line.startswith("#") or line.startswith("row,"):
            continue
        row, quantity, value, kind, tol = line.split(",")
        golden[(row, quantity)] = (float(value), kind, float(tol))
    return golden


def check_against_golden(computed: dict[tuple[str, str], float], golden) -> list[str]:
    failures = []
    for key, (ref, kind, tol) in golden.items():
        if key not in computed:
            failures.append(f"{key}: missing from computed output")
            continue
        val = computed[key]
        if kind == "abs":
            ok = abs(val - ref) <= tol
        elif kind == "rel":
            ok = abs(val - ref) <= tol * abs(ref)
        elif kind == "geq":
            ok = val >= ref - tol
        else:
            raise ValueError(f"unknown tolerance kind {kind!r}")
        if math.copysign(1.0, ref) != math.copysign(1.0, val) and kind != "geq":
            # sign agreement is the hard gate for the determinants
            if key[1] in ("D5", "S3") and abs(ref) > 1e-12:
                ok = False
        if not ok:
            failures.append(f"{key}: computed {val:.6g} vs reference {ref:.6g} ({kind} {tol:g})")
    return failures


# ---------------------------------------------------------------------------
# subcommands


def _benchmark_row_values(row: presets.BenchmarkRow) -> dict[str, float]:
    env = EnvParams(omega_m=OMEGA_M_DEFAULT, q_factor=row.q_factor, nbar_bath=row.nbar_bath)
    protocol = ProtocolParams(
        mu=row.mu, phi=PHI_DEFAULT, input=CoherentInput(ALPHA_DEFAULT),
        nbar_1=row.nbar, nbar_2=row.nbar,
    )
    det_r = presets.default_detector(resolving=True)
    det_n = presets.default_detector(resolving=False)
    return {
        "D5": criteria.d5_evolved(row.mu, row.nbar, env, PHI_DEFAULT),
        "S3": criteria.s3_evolved(row.mu, row.nbar, env, PHI_DEFAULT),
        "F_resolving": 100 * detector.true_positive_fraction_resolving(det_r, protocol),
        "F_nonresolving": 100 * detector.true_positive_fraction_nonresolving(det_n, protocol),
        "F_resolving_opt": 100 * detector.optimize_alpha(det_r, protocol).fraction,
        "F_nonresolving_opt": 100 * detector.optimize_alpha(det_n, protocol).fraction,
    }


QUANTITIES_T1 = (
    "D5", "S3", "F_resolving", "F_nonresolving", "F_resolving_opt", "F_nonresolving_opt",
)


def cmd_table1(args) -> int:
    rows_out = []
    computed = {}
    for row in presets.BENCHMARK_ROWS:
        vals = _benchmark_row_values(row)
        for q in QUANTITIES_T1:
            computed[(row.name, q)] = vals[q]
        rows_out.append(
            (row.name, row.mu, row.q_factor, row.nbar, row.nbar_bath)
            + tuple(vals[q] for q in QUANTITIES_T1)
        )
    meta = [
        "benchmark criteria and true-positive fractions; hbar=1, Var_vac=1/2",
        f"phi=pi, alpha={ALPHA_DEFAULT}, eta={presets.ETA_DEFAULT}, "
        f"dark_prob={presets.DARK_PROB_DEFAULT}; F columns in percent",
        "columns: row, mu, q_factor, nbar, nbar_bath, " + ", ".join(QUANTITIES_T1),
    ]
    columns = ["row", "mu", "q_factor", "nbar", "nbar_bath", *QUANTITIES_T1]
    write_table(args, meta, columns, rows_out)
    if args.check:
        failures = check_against_golden(computed, load_golden("golden_table1.csv"))
        for f in failures:
            print(f"CHECK FAIL {f}", file=sys.stderr)
        if failures:
            return EXIT_CHECK_FAILED
        print(f"table1 check: all {len(computed)} values within tolerance", file=sys.stderr)
    return EXIT_OK


def cmd_table2(args) -> int:
    rows_out = []
    computed = {}
    for row in presets.CAVITY_ROWS:
        mu = sideband.mu_nominal(row.cavity)
        ratio = row.cavity.sideband_ratio
        red = sideband.percent_reduction(row.cavity)
        computed[(row.name, "mu")] = mu
        computed[(row.name, "sideband_ratio")] = ratio
        computed[(row.name, "percent_reduction")] = red
        rows_out.append((row.name, row.cavity.g0, row.cavity.kappa, row.cavity.omega_m,
                         mu, ratio, red))
    meta = [
        "sideband-ratio corrections; g0, kappa, omega_m in rad/s",
        "mu and sideband_ratio dimensionless; percent_reduction in percent",
    ]
    columns = ["row", "g0", "kappa", "omega_m", "mu", "sideband_ratio", "percent_reduction"]
    write_table(args, meta, columns, rows_out)
    if args.check:
        failures = check_against_golden(computed, load_golden("golden_table2.csv"))
        for f in failures:
            print(f"CHECK FAIL {f}", file=sys.stderr)
        if failures:
            return EXIT_CHECK_FAILED
        print(f"table2 check: all {len(computed)} values within tolerance", file=sys.stderr)
    return EXIT_OK


def _map_point(task):
    criterion, mu, phi, nbar, q_factor, nbar_bath, omega_m = task
    env = EnvParams(omega_m=omega_m, q_factor=q_factor, nbar_bath=nbar_bath)
    if criterion == "D5":
        return criteria.d5_evolved(mu, nbar, env, phi)
    if criterion == "S3":
        return criteria.s3_evolved(mu, nbar, env, phi)
    # delta: non-Gaussianity of the closed-system heralded state
    params = ProtocolParams(mu=mu, phi=phi, nbar_1=nbar, nbar_2=nbar)
    state, _ = heralded_state(params)
    return criteria.non_gaussianity(state)


def _run_tasks(tasks, fn, threads: int):
    if threads <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (8 * threads))))


def cmd_map(args) -> int:
    cfg = load_config(args.config)
    env = env_from_config(cfg)
    nbar = _cfg_float(cfg, "protocol", "nbar", 0.1)
    phis = parse_grid(cfg.get("grid", "phi", fallback="0:6.283185307179586:41"))
    mus = parse_grid(cfg.get("grid", "mu", fallback="0.05:2.0:40"))
    tasks = [
        (args.criterion, mu, phi, nbar, env.q_factor, env.nbar_bath, env.omega_m)
        for mu in mus
        for phi in phis
    ]
    values = _run_tasks(tasks, _map_point, args.threads)
    rows = [
        (mu, phi, val, int(val < 0))
        for (_, mu, phi, *_), val in zip(tasks, values)
    ]
    meta = [
        f"criterion map: {args.criterion}; hbar=1, Var_vac=1/2; phi in radians",
        f"nbar={nbar}, q_factor={env.q_factor}, nbar_bath={env.nbar_bath}"
        + (" (delta uses the closed-system state)" if args.criterion == "delta" else ""),
    ]
    write_table(args, meta, ["mu", "phi", "value", "negative"], rows)
    # zero crossings along phi for each mu
    contours = []
    idx = 0
    for mu in mus:
        vals = values[idx : idx + len(phis)]
        idx += len(phis)
        for (p1, v1), (p2, v2) in zip(zip(phis, vals), list(zip(phis, vals))[1:]):
            if v1 == 0.0 or (v1 < 0) != (v2 < 0):
                frac = abs(v1) / (abs(v1) + abs(v2)) if (abs(v1) + abs(v2)) > 0 else 0.0
                contours.append((mu, p1 + frac * (p2 - p1)))
    contour_path = args.contour_out or (
        None if args.out == "-" else args.out + ".contour.csv"
    )
    if contour_path:
        write_csv(
            contour_path,
            [f"sign-change contour of {args.criterion} along phi (linear interpolation)"],
            ["mu", "phi_zero"],
            contours,
        )
    return EXIT_OK


def _cooling_point(task):
    mu, nbar_bath, q_factor, omega_m, phi = task
    env = EnvParams(omega_m=omega_m, q_factor=q_factor, nbar_bath=nbar_bath)
    res = criteria.max_cooled_occupation(mu, env, phi)
    return res.nbar_max, res.verification_possible


def cmd_cooling_map(args) -> int:
    cfg = load_config(args.config)
    env = env_from_config(cfg)
    mus = parse_grid(cfg.get("grid", "mu", fallback="0.2:4.2:21"))
    baths = parse_grid(cfg.get("grid", "nbar_bath", fallback="0:2000:9"))
    tasks = [(mu, nb, env.q_factor, env.omega_m, PHI_DEFAULT) for mu in mus for nb in baths]
    results = _run_tasks(tasks, _cooling_point, args.threads)
    rows = [
        (mu, nb, nmax, int(ok))
        for (mu, nb, *_), (nmax, ok) in zip(tasks, results)
    ]
    meta = [
        "maximum initial occupation with S3 < 0; phi = pi",
        f"q_factor={env.q_factor}; verifiable=0 marks the NoVerification region",
    ]
    write_table(args, meta, ["mu", "nbar_bath", "nbar_max", "verifiable"], rows)
    return EXIT_OK


def cmd_detector(args) -> int:
    cfg = load_config(args.config)
    mu = _cfg_float(cfg, "protocol", "mu", 1e-2)
    phi = _cfg_float(cfg, "protocol", "phi", PHI_DEFAULT)
    nbar = _cfg_float(cfg, "protocol", "nbar", 0.1)
    alphas = parse_grid(cfg.get("grid", "alpha", fallback="0.05:3.0:60"))
    det_r = detector_from_config(cfg, resolving=True)
    det_n = detector_from_config(cfg, resolving=False)
    rows = []
    for alpha in alphas:
        protocol = ProtocolParams(mu=mu, phi=phi, input=CoherentInput(alpha),
                                  nbar_1=nbar, nbar_2=nbar)
        rows.append(
            (
                alpha,
                100 * detector.true_positive_fraction_resolving(det_r, protocol),
                100 * detector.true_positive_fraction_nonresolving(det_n, protocol),
            )
        )
    meta = [
        f"true-positive fractions vs entangling amplitude; mu={mu}, phi={phi}, nbar={nbar}",
        f"eta={det_r.eta}, dark_prob={det_r.dark_prob}; F columns in percent",
    ]
    write_table(args, meta, ["alpha", "F_resolving", "F_nonresolving"], rows)
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    mu = _cfg_float(cfg, "protocol", "mu", 1e-3)
    phi = _cfg_float(cfg, "protocol", "phi", PHI_DEFAULT)
    nbar = _cfg_float(cfg, "protocol", "nbar", 0.1)
    chi = _cfg_float(cfg, "verify", "chi", 1.0)
    n_samples = int(_cfg_float(cfg, "verify", "n_samples", 1e6))
    target_order = int(_cfg_float(cfg, "verify", "target_order", 4))
    n_seeds = int(_cfg_float(cfg, "verify", "n_seeds", 20))
    env = env_from_config(cfg)

    params = ProtocolParams(mu=mu, phi=phi, nbar_1=nbar, nbar_2=nbar)
    table = evolve_moments(heralded_moment_table(params, 2 * target_order), env)
    phase_sets = verify.default_phase_sets(target_order, phi=phi, chi=chi)
    if cfg.has_option("verify", "max_phase_sets"):
        phase_sets = phase_sets[: cfg.getint("verify", "max_phase_sets")]
    study = verify.VerificationStudy(
        table, phi=phi, chi=chi, target_order=target_order, phase_sets=phase_sets
    )
    noiseless = study.run(None)
    d5_exact = criteria.build_d5(table).value
    s3_exact = criteria.build_s3(table).value

    runs = []
    s3_signs = 0
    last_recovered = None
    for k in range(n_seeds):
        run = study.run(n_samples, (args.seed, k))
        rec = run.recovered_table
        last_recovered = rec
        s3_rec = criteria.build_s3(rec).value
        d5_rec = criteria.build_d5(rec).value
        s3_signs += (s3_rec < 0) == (s3_exact < 0)
        runs.append({"seed": [args.seed, k], "S3": s3_rec, "D5": d5_rec,
                     "max_abs_moment_error": run.max_abs_deviation()})
    report = {
        "meta": "verification Monte-Carlo; hbar=1, Var_vac=1/2",
        "protocol": {"mu": mu, "phi": phi, "nbar": nbar, "chi": chi,
                     "n_samples": n_samples, "target_order": target_order},
        "env": {"omega_m": env.omega_m, "q_factor": env.q_factor,
                "nbar_bath": env.nbar_bath},
        "noiseless_max_abs_deviation": noiseless.max_abs_deviation(),
        "exact": {"D5": d5_exact, "S3": s3_exact},
        "exact_moments": json.loads(table.to_json())["entries"],
        "recovered_moments_last_run": (
            json.loads(last_recovered.to_json())["entries"] if last_recovered else None
        ),
        "recovered_errors_last_run": (
            json.loads(last_recovered.to_json())["std_errors"] if last_recovered else None
        ),
        "s3_sign_agreement": [s3_signs, n_seeds],
        "runs": runs,
    }
    write_json(args.out, report)
    return EXIT_OK


def cmd_sideband(args) -> int:
    cav = sideband.CavityParams(g0=args.g0, kappa=args.kappa, omega_m=args.omega_m)
    mu_p, angle = sideband.mu_effective(cav, args.t if args.t is not None else 2.0 / args.kappa)
    payload = {
        "meta": "pulsed-coupling corrections; rates in rad/s, angle in radians",
        "mu_nominal": sideband.mu_nominal(cav),
        "mu_effective": mu_p,
        "rotation_angle": angle,
        "sideband_ratio": cav.sideband_ratio,
        "percent_reduction": sideband.percent_reduction(cav),
    }
    write_json(args.out, payload)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mechcat",
        description="Two-mode mechanical cat states: criteria, detector studies, verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, check=False):
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--out", default="-", help="output path ('-' = stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        if check:
            p.add_argument("--check", action="store_true",
                           help="compare against bundled golden values")

    p = sub.add_parser("table1", help="benchmark criteria and detector fractions")
    common(p, check=True)
    p = sub.add_parser("table2", help="sideband-ratio correction table")
    common(p, check=True)
    p = sub.add_parser("map", help="criterion over a (phi, mu) grid")
    common(p)
    p.add_argument("--criterion", choices=("D5", "S3", "delta"), required=True)
    p.add_argument("--contour-out", default=None)
    p = sub.add_parser("cooling-map", help="nbar_max over a (mu, nbar_bath) grid")
    common(p)
    p = sub.add_parser("detector", help="true-positive fractions vs alpha")
    common(p)
    p = sub.add_parser("verify", help="verification Monte-Carlo report")
    common(p)
    p = sub.add_parser("sideband", help="finite sideband-ratio corrections")
    common(p)
    p.add_argument("--g0", type=float, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--omega-m", dest="omega_m", type=float, required=True)
    p.add_argument("--t", type=float, default=None, help="interaction time (default 2/kappa)")
    return parser


COMMANDS = {
    "table1": cmd_table1,
    "table2": cmd_table2,
    "map": cmd_map,
    "cooling-map": cmd_cooling_map,
    "detector": cmd_detector,
    "verify": cmd_verify,
    "sideband": cmd_sideband,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except MechcatError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
