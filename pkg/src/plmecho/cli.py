"""Command-line entry point: ``plmecho {run,sweep,oracle,phasematch,materials,validate}``.

Exit codes: 0 success, 2 invalid input or failed validation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import itertools
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from . import materials, oracle, phasematch
from .envelope import FieldEnvelope
from .errors import InvalidConfig, NumericalFailure, PlmError
from .propagation import StageConfig, run_timeline
from .protocols import ProtocolTimeline, estimate_noise, validate_timescales

log = logging.getLogger("plmecho")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _fmt(v: float) -> str:
    return repr(float(v))


def envelope_csv(env: FieldEnvelope) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_s", "re", "im"])
    for t, b in zip(env.times, env.samples):
        w.writerow([_fmt(t), _fmt(b.real), _fmt(b.imag)])
    return buf.getvalue()


def oracle_efficiency(stage: StageConfig, theta0: float, timeline: ProtocolTimeline) -> float:
    """Ideal-medium prediction for the configured variant (decay not included)."""
    a_sL = stage.alpha_s(theta0) * stage.length
    if timeline.variant == "frequency-preserving":
        eta = oracle.retrieval_efficiency(1.0, a_sL, a_sL)
    else:
        a_eL = stage.alpha_e(theta0) * stage.length
        if stage.alpha0_e == 0 or math.cos(theta0 / 2) == 0:
            return 0.0
        x = math.sqrt(stage.alpha0_s / stage.alpha0_e) * math.tan(theta0 / 2)
        eta = oracle.retrieval_efficiency(abs(x), a_sL, a_eL)
    return eta * timeline.polarization**2


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _check_timescales(cfg: cfgmod.SimConfig) -> dict:
    report = validate_timescales(cfg.budget(), cfg.timescale_margin)
    if not report.passed:
        details = "; ".join(
            f"{c.name} ({c.lhs:.4g} vs {c.rhs:.4g})" for c in report.constraints if c.passed is False
        )
        raise InvalidConfig(f"timescale constraint failed: {details}")
    return report.to_dict()


def do_run(cfg: cfgmod.SimConfig, out_dir: Path) -> dict:
    timescales = _check_timescales(cfg)
    spectral = cfg.spectral_grid()
    stage = cfg.stage()
    timeline = cfg.timeline()
    rates = cfg.rates()
    report = run_timeline(timeline, stage, rates, spectral)
    summary = report.summary()
    eta_oracle = oracle_efficiency(stage, cfg.protocol.theta0_rad, timeline)
    mu, snr = estimate_noise(cfg.noise_config(), report.efficiency, cfg.noise.n_signal_photons)
    result = {
        "variant": timeline.variant,
        **summary,
        "efficiency_oracle": eta_oracle,
        "decay_active": not rates.ideal,
        "noise": {"mu_noise": mu, "snr": snr if math.isfinite(snr) else "inf"},
        "timescales": timescales,
        "effective_config": cfg.to_dict(),
    }
    prefix = cfg.output.prefix
    _write(out_dir / f"{prefix}report.json", json.dumps(result, indent=2, sort_keys=True) + "\n")
    _write(out_dir / f"{prefix}echo.csv", envelope_csv(report.echo))
    _write(out_dir / f"{prefix}transmitted.csv", envelope_csv(report.transmitted))
    _write(out_dir / f"{prefix}effective_config.yaml", cfgmod.dump(cfg))
    return result


def _medium_depths(cfg: cfgmod.SimConfig, theta0: float) -> tuple[float, float]:
    """(x, total_depth) implied by the configured medium at ``theta0``."""
    m = cfg.medium
    if m.alpha0_s_per_m is None:
        return m.x, m.total_depth
    a0s, a0e = cfg.absorption(theta0)
    st = cfg.stage(a0s, a0e)
    x = math.sqrt(a0s / a0e) * math.tan(theta0 / 2)
    return x, (st.alpha_s(theta0) + st.alpha_e(theta0)) * st.length


def sweep_point(cfg: cfgmod.SimConfig, assignment: dict) -> tuple[float, float]:
    theta0 = float(assignment.get("theta0", cfg.protocol.theta0_rad))
    if "theta0" in assignment:
        a0s, a0e = cfg.absorption()
    else:
        x, depth = _medium_depths(cfg, theta0)
        if "alpha_L" in assignment:
            x, depth = 1.0, 2.0 * assignment["alpha_L"]
        x = assignment.get("x", x)
        depth = assignment.get("total_depth", depth)
        a0s, a0e = cfgmod.depths_to_alpha0(x, depth, theta0, cfg.medium.length_m)
    stage = dataclasses.replace(cfg.stage(a0s, a0e), theta0=theta0)
    params = dataclasses.replace(cfg.protocol_params(), theta0=theta0)
    timeline = cfg.timeline(params)
    report = run_timeline(timeline, stage, cfg.rates(), cfg.spectral_grid())
    return report.efficiency, oracle_efficiency(stage, theta0, timeline)


def sweep_rows(cfg: cfgmod.SimConfig, threads: int = 1) -> tuple[list[str], list[list[float]]]:
    if cfg.sweep is None:
        raise InvalidConfig("config has no [sweep] section")
    names = list(cfg.sweep.parameters)
    grids = [cfg.sweep.parameters[n] for n in names]
    assignments = [dict(zip(names, combo)) for combo in itertools.product(*grids)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda a: sweep_point(cfg, a), assignments))
    else:
        results = [sweep_point(cfg, a) for a in assignments]
    header = (["value"] if len(names) == 1 else names) + ["efficiency_sim", "efficiency_oracle", "abs_error"]
    rows = [
        [float(a[n]) for n in names] + [sim, orc, abs(sim - orc)]
        for a, (sim, orc) in zip(assignments, results)
    ]
    return header, rows


def do_sweep(cfg: cfgmod.SimConfig, out_dir: Path, threads: int) -> Path:
    _check_timescales(cfg)
    header, rows = sweep_rows(cfg, threads)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path = out_dir / f"{cfg.output.prefix}sweep.csv"
    _write(path, buf.getvalue())
    _write(out_dir / f"{cfg.output.prefix}effective_config.yaml", cfgmod.dump(cfg))
    return path


def _vec(text: str) -> np.ndarray:
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x,y,z', got {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three components, got {text!r}")
    return np.array(parts)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o)}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plmecho", description="Photon-echo memory on a pre-created spin coherence.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("--seed", type=int, default=None, help="reserved; all runs are deterministic")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("run", parents=[common], help="simulate one memory cycle")
    sub.add_parser("sweep", parents=[common], help="efficiency sweep against the closed form")
    sub.add_parser("validate", parents=[common], help="timescale and material feasibility checks")

    orc = sub.add_parser("oracle", help="closed-form quantities")
    osub = orc.add_subparsers(dest="quantity", required=True)
    eff = osub.add_parser("efficiency")
    eff.add_argument("--x", type=float, required=True)
    eff.add_argument("--alpha-sl", type=float, required=True)
    eff.add_argument("--alpha-el", type=float, required=True)
    sym = osub.add_parser("symmetry")
    sym.add_argument("--ratio", type=float, required=True, help="|g_s/g_e|")
    sym.add_argument("--theta0", type=float, required=True)
    tr = osub.add_parser("transmitted")
    tr.add_argument("--alpha-sl", type=float, required=True)
    dep = osub.add_parser("depths")
    dep.add_argument("--x", type=float, required=True)
    dep.add_argument("--total-depth", type=float, required=True)

    pm = sub.add_parser("phasematch", help="echo and Raman wavevectors (rad/m, 'x,y,z')")
    pm.add_argument("--ks", type=_vec, default=_vec("0,0,1e7"))
    pm.add_argument("--k0", type=_vec, default=_vec("0,0,0"))
    pm.add_argument("--k1", type=_vec, default=_vec("0,0,1e7"))
    pm.add_argument("--k2", type=_vec, default=_vec("0,0,-1e7"))
    pm.add_argument("--k-target", type=float, default=1e7, help="|k(omega31)| in the medium")
    pm.add_argument("--length", type=float, default=0.01)
    pm.add_argument("--tolerance", type=float, default=0.1, help="allowed |dk| L in rad")
    pm.add_argument("--forward", action="store_true", help="expect forward emission")
    pm.add_argument("--kw", type=_vec, default=None, help="Raman write beam")
    pm.add_argument("--kr1", type=_vec, default=None, help="Raman read beam")

    mat = sub.add_parser("materials", help="material database")
    msub = mat.add_subparsers(dest="action", required=True)
    msub.add_parser("list")
    lk = msub.add_parser("lookup")
    lk.add_argument("ion")
    lk.add_argument("isotope", help="mass number, or '-' for none")
    lk.add_argument("site", help="site number, or '-' for none")
    lk.add_argument("--host", default=materials.DEFAULT_HOST)
    return parser


def _load(args) -> tuple[cfgmod.SimConfig, Path]:
    cfg = cfgmod.load(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.threads < 1:
        raise InvalidConfig("--threads must be at least 1")
    out = Path(args.out) if args.out else Path(cfg.output.dir)
    return cfg, out


def _dispatch(args) -> int:
    if args.command == "run":
        cfg, out = _load(args)
        result = do_run(cfg, out)
        keep = ("efficiency", "efficiency_oracle", "peak_time_s", "fidelity", "expected_echo_time_s", "echo_carrier")
        print(_json({k: result.get(k) for k in keep if k in result}))
        return EXIT_OK
    if args.command == "sweep":
        cfg, out = _load(args)
        path = do_sweep(cfg, out, args.threads)
        print(path)
        return EXIT_OK
    if args.command == "validate":
        cfg, _ = _load(args)
        report = validate_timescales(cfg.budget(), cfg.timescale_margin)
        payload = {"timescales": report.to_dict()}
        passed = report.passed
        if cfg.material is not None:
            m = cfg.material
            rec = materials.lookup(m.ion, m.isotope, m.site, m.host)
            feas = materials.feasibility(rec, cfg.budget(), m.b_field_T, cfg.timescale_margin)
            payload["feasibility"] = feas.to_dict()
            passed = passed and feas.passed
        payload["passed"] = passed
        print(_json(payload))
        if not passed:
            failed = list(report.failures) + (payload.get("feasibility", {}).get("failures", []))
            print(f"validation failed: {', '.join(dict.fromkeys(failed))}", file=sys.stderr)
            return EXIT_INVALID
        return EXIT_OK
    if args.command == "oracle":
        if args.quantity == "efficiency":
            value = {"efficiency": oracle.retrieval_efficiency(args.x, args.alpha_sl, args.alpha_el)}
        elif args.quantity == "symmetry":
            x = oracle.symmetry_parameter(args.ratio, args.theta0)
            value = {"x": x, "alpha_s_over_alpha_e": x * x}
        elif args.quantity == "transmitted":
            value = {"amplitude": math.exp(-args.alpha_sl / 2), "energy_fraction": math.exp(-args.alpha_sl)}
        else:
            op = oracle.OracleParams.from_depths(args.x, args.total_depth)
            value = {"alpha_sL": op.alpha_s * op.length, "alpha_eL": op.alpha_e * op.length}
        print(_json(value))
        return EXIT_OK
    if args.command == "phasematch":
        geo = phasematch.Geometry(
            k_s=args.ks, k0=args.k0, k1=args.k1, k2=args.k2, k_target=args.k_target, length=args.length,
            k_W=args.kw, k_R1=args.kr1, tolerance=args.tolerance, backward=not args.forward,
        )
        payload = phasematch.echo_wavevector(geo).to_dict()
        payload["scattered"] = phasematch.scattered_wavevector(geo.k0, geo.k1, geo.k2)
        if geo.k_W is not None and geo.k_R1 is not None:
            out1, out2 = phasematch.raman_output_wavevectors(geo)
            payload["raman"] = {"k_out1": out1, "k_out2": out2}
        print(_json(payload))
        return EXIT_OK
    if args.command == "materials":
        if args.action == "list":
            print(_json([r.to_dict() for r in materials.all_records()]))
        else:
            print(_json(materials.lookup(args.ion, args.isotope, args.site, args.host).to_dict()))
        return EXIT_OK
    raise AssertionError(args.command)  # pragma: no cover


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _dispatch(args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (PlmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
