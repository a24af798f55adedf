"""Command-line front end.

Subcommands: ``gmi``, ``threshold``, ``sc-threshold``, ``gexit`` and ``table``.
Any long option may also come from a YAML file given with ``--config``
(keys use the option names, with dashes or underscores); flags on the command
line win over the file. Results are JSON (default) or aligned text, and every
result embeds the resolved configuration, the seed and the library version.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .channel import ChannelSpec, EntropyCurve, Fading, ebn0_to_sigma, sigma_to_ebn0
from .constellation import ConfigurationError, build_constellation
from .de_coupled import ScEnsemble, sc_bp_threshold, sc_converges
from .de_flat import DemapperChannel, DeSchedule, ThresholdSearchError, bp_threshold, de_converges
from .demapper import DemapperKind, DemapperSampler
from .density import DegreeProfile
from .gexit import AreaThresholdError, CurveSettings, GexitCurve, area_threshold, bp_gexit_curve
from .gmi import cm_mutual_info, gmi, noise_threshold

EXIT_USAGE = 2
EXIT_NUMERICAL = 3

CSV_HEADER = ["alpha", "g", "stderr"]

TABLE_ROWS = [
    ("qpsk", "awgn"),
    ("16qam", "awgn"),
    ("64qam", "awgn"),
    ("qpsk", "rayleigh"),
    ("16qam", "rayleigh"),
    ("64qam", "rayleigh"),
]
TABLE_ENSEMBLES = [(3, 6), (4, 8), (6, 12)]
PRESETS = {
    "fast": {"L": 16, "w": 4, "gmi_samples": 10**6, "de_samples": 5 * 10**5},
    "paper": {"L": 64, "w": 4, "gmi_samples": 10**7, "de_samples": 2 * 10**6},
}


class NumericalFailure(RuntimeError):
    """A search or fixed-point computation did not converge."""


# ---------------------------------------------------------------------------
# Curve I/O


def emit_curve(curve: GexitCurve, path, fmt: str | None = None) -> Path:
    """Write ``curve`` as CSV (``alpha,g,stderr``) or JSON; values round-trip exactly."""
    if len(curve) == 0:
        raise ValueError("refusing to write an empty curve")
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".") or "json").lower()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in zip(curve.alpha, curve.g, curve.stderr):
            w.writerow([repr(float(v)) for v in row])
        path.write_text(buf.getvalue(), encoding="utf-8")
    elif fmt == "json":
        path.write_text(json.dumps(curve.to_dict(), indent=1), encoding="utf-8")
    else:
        raise ValueError(f"unknown curve format {fmt!r}")
    return path


def load_curve(path) -> GexitCurve:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".csv":
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0] != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {rows[0]}")
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        return GexitCurve(data[:, 0], data[:, 1], data[:, 2])
    return GexitCurve.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Argument parsing


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = (int(v) for v in str(text).split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected two comma-separated integers, got {text!r}") from exc
    return a, b


def _bracket(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in str(text).split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected LO,HI, got {text!r}") from exc
    return a, b


def _common(p: argparse.ArgumentParser, ensemble: bool = False) -> None:
    p.add_argument("--config", help="YAML file supplying any of these options")
    p.add_argument("--mod", default="qpsk", help="qpsk, 16qam or 64qam")
    p.add_argument("--channel", default="awgn", help="awgn or rayleigh")
    p.add_argument("--demapper", default="map", help="map or mlm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=None, help="Monte-Carlo samples per estimate")
    p.add_argument("--format", choices=["json", "text"], default="json")
    p.add_argument("--output", help="also write the JSON result here")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: available cores)")
    noise = p.add_mutually_exclusive_group()
    noise.add_argument("--ebn0-db", type=float, help="evaluate at this Eb/N0 instead of searching")
    noise.add_argument("--sigma", type=float, help="evaluate at this noise level instead of searching")
    noise.add_argument("--alpha", type=float, help="evaluate at this normalized entropy instead of searching")
    if ensemble:
        p.add_argument("--ensemble", type=_pair, default=(3, 6), help="dl,dr")
        p.add_argument("--id-period", type=int, default=None, help="BICM-ID demapper update period")
        p.add_argument("--max-iters", type=int, default=None)
        p.add_argument("--bracket", type=_bracket, default=None, help="LO,HI in dB for the search")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scbicm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gmi", help="GMI / CM noise threshold or rate at a point")
    _common(p)
    p.add_argument("--rate", type=float, default=0.5, help="target rate per coded bit")
    p.add_argument("--mode", choices=["gmi", "cm"], default="gmi")

    p = sub.add_parser("threshold", help="BP threshold of a regular LDPC ensemble")
    _common(p, ensemble=True)

    p = sub.add_parser("sc-threshold", help="BP threshold of a spatially-coupled ensemble")
    _common(p, ensemble=True)
    p.add_argument("--L", type=int, default=64)
    p.add_argument("--w", type=int, default=4)
    p.add_argument("--noise-threshold-db", type=float, default=None, help="reference for the gap columns")

    p = sub.add_parser("gexit", help="BP-GEXIT curve and area threshold")
    _common(p, ensemble=True)
    p.add_argument("--sc", type=_pair, default=None, help="L,w for a coupled ensemble")
    p.add_argument("--alpha-grid", type=int, default=40, help="number of grid points")
    p.add_argument("--alpha-min", type=float, default=0.3)
    p.add_argument("--alpha-max", type=float, default=0.98)
    p.add_argument("--curve-out", help="write the curve as .csv or .json")

    p = sub.add_parser("table", help="noise and BP thresholds for all modulations and channels")
    p.add_argument("--config")
    p.add_argument("--which", choices=["I", "II"], default="I", help="I: MAP demapper, II: max-log-MAP")
    p.add_argument("--preset", choices=sorted(PRESETS), default="fast")
    p.add_argument("--rows", default=None, help="subset such as qpsk/awgn,16qam/rayleigh")
    p.add_argument("--ensembles", default=None, help="subset such as 3,6;4,8")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["json", "text"], default="text")
    p.add_argument("--output")
    p.add_argument("--workers", type=int, default=None, help="rows computed in parallel (default: available cores)")
    return parser


def _load_config(argv: list[str]) -> dict:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return {}
    try:
        data = yaml.safe_load(Path(known.config).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a mapping of option names to values")
    return {str(k).replace("-", "_"): v for k, v in data.items()}


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    config = _load_config(argv)
    if config:
        sub = parser._subparsers._group_actions[0].choices  # noqa: SLF001
        cmd = next((a for a in argv if a in sub), None)
        if cmd is not None:
            target = sub[cmd]
            dests = {a.dest: a for a in target._actions}  # noqa: SLF001
            unknown = sorted(set(config) - set(dests))
            if unknown:
                raise ConfigurationError(f"unknown option(s) in config: {', '.join(unknown)}")
            conv = {}
            for k, v in config.items():
                act = dests[k]
                if act.type is not None and isinstance(v, str):
                    v = act.type(v)
                elif act.type in (_pair, _bracket) and isinstance(v, (list, tuple)):
                    v = tuple(v)
                conv[k] = v
            target.set_defaults(**conv)
    args = parser.parse_args(argv)
    n_noise = sum(getattr(args, k, None) is not None for k in ("ebn0_db", "sigma", "alpha"))
    if n_noise > 1:
        raise ConfigurationError("give at most one of --ebn0-db, --sigma, --alpha")
    return args


# ---------------------------------------------------------------------------
# Commands


def _spec(args) -> ChannelSpec:
    return ChannelSpec(build_constellation(args.mod), Fading.parse(args.channel), 1.0)


def _point_sigma(args, spec: ChannelSpec, rate: float) -> float | None:
    m = spec.constellation.bits_per_symbol
    if args.sigma is not None:
        if not args.sigma > 0:
            raise ConfigurationError("sigma must be positive")
        return float(args.sigma)
    if args.ebn0_db is not None:
        return ebn0_to_sigma(args.ebn0_db, rate, m)
    if args.alpha is not None:
        curve = EntropyCurve(spec.constellation, spec.fading, 10**6, args.seed)
        return curve.sigma_for(args.alpha)
    return None


def _schedule(args, default_iters: int, **kw) -> DeSchedule:
    iters = args.max_iters or default_iters
    if args.id_period:
        return DeSchedule.iterative(args.id_period, max_iters=iters, **kw)
    return DeSchedule.non_iterative(max_iters=iters, **kw)


def cmd_gmi(args) -> dict:
    spec = _spec(args)
    m = spec.constellation.bits_per_symbol
    n = args.samples or 10**7
    sigma = _point_sigma(args, spec, args.rate)
    if sigma is not None:
        s = spec.with_sigma(sigma)
        if args.mode == "cm":
            est = cm_mutual_info(s, n, args.seed)
            return {"sigma": sigma, "rate_per_bit": est.value / m, "stderr": est.stderr / m, "samples": n}
        res = gmi(s, args.demapper, n, args.seed)
        return {
            "sigma": sigma,
            "rate_per_bit": res.value / m,
            "stderr": res.stderr / m,
            "s_opt": res.s_opt,
            "samples": n,
        }
    th = noise_threshold(spec, args.demapper, args.rate, args.mode, n, args.seed)
    return {
        "sigma_star": th.sigma,
        "ebn0_db": th.ebn0_db,
        "stderr": th.stderr_db,
        "samples": th.samples,
        "s_opt": th.s_opt,
    }


def cmd_threshold(args) -> dict:
    spec = _spec(args)
    prof = DegreeProfile.regular(*args.ensemble)
    n = args.samples or 2 * 10**6
    sched = _schedule(args, 2000)
    rate = prof.design_rate
    sigma = _point_sigma(args, spec, rate)
    if sigma is not None:
        sampler = DemapperSampler(spec.constellation, spec.fading, n, args.seed)
        res = de_converges(prof, DemapperChannel(sampler, args.demapper, sigma), sched)
        return {
            "sigma": sigma,
            "ebn0_db": sigma_to_ebn0(sigma, rate, spec.constellation.bits_per_symbol),
            "success": res.success,
            "error_prob": res.error_prob,
            "iterations": res.iterations,
        }
    th = bp_threshold(prof, spec, args.demapper, sched, args.bracket or (-1.0, 12.0), n_samples=n, seed=args.seed)
    return {
        "ebn0_db": th.ebn0_db,
        "sigma": th.sigma,
        "design_rate": th.rate,
        "iters_at_threshold": th.iterations_at_threshold,
        "de_runs": th.evaluations,
    }


def cmd_sc_threshold(args) -> dict:
    spec = _spec(args)
    e = ScEnsemble(args.ensemble[0], args.ensemble[1], args.L, args.w)
    n = args.samples or 2 * 10**6
    sched = _schedule(args, 10_000, stall_window=200, stall_tol=1e-6)
    sigma = _point_sigma(args, spec, e.design_rate)
    if sigma is not None:
        sampler = DemapperSampler(spec.constellation, spec.fading, n, args.seed)
        res = sc_converges(e, DemapperChannel(sampler, args.demapper, sigma), sched)
        return {
            "sigma": sigma,
            "ebn0_db": sigma_to_ebn0(sigma, e.design_rate, spec.constellation.bits_per_symbol),
            "design_rate": e.design_rate,
            "success": res.success,
            "max_error_prob": res.max_error_prob,
            "iterations": res.iterations,
        }
    th = sc_bp_threshold(
        e,
        spec,
        args.demapper,
        sched,
        args.bracket or (-1.0, 12.0),
        n_samples=n,
        seed=args.seed,
        noise_ebn0_db=args.noise_threshold_db,
    )
    return {
        "ebn0_db": th.ebn0_db,
        "sigma": th.sigma,
        "design_rate": th.design_rate,
        "rate_loss_db": th.rate_loss_db,
        "gap_db": th.gap_db,
        "asympt_gap_db": th.asympt_gap_db,
        "iters_at_threshold": th.iterations_at_threshold,
        "de_runs": th.evaluations,
    }


def cmd_gexit(args) -> dict:
    spec = _spec(args)
    if args.sc:
        ens = ScEnsemble(args.ensemble[0], args.ensemble[1], *args.sc)
    else:
        ens = DegreeProfile.regular(*args.ensemble)
    if args.alpha_grid < 2:
        raise ConfigurationError("--alpha-grid needs at least two points")
    alphas = np.linspace(args.alpha_min, args.alpha_max, args.alpha_grid)
    settings = CurveSettings(seed=args.seed, schedule=_schedule(args, 5000))
    if args.samples:
        settings.gexit_samples = args.samples
    curve = bp_gexit_curve(ens, spec, args.demapper, alphas, settings)
    if args.curve_out:
        emit_curve(curve, args.curve_out)
    rate = ens.design_rate
    out = {"curve": curve.to_dict(), "area": curve.area(), "design_rate": rate}
    try:
        abar = area_threshold(curve, rate)
    except AreaThresholdError as exc:
        raise NumericalFailure(str(exc)) from exc
    sig = EntropyCurve(spec.constellation, spec.fading, 10**6, args.seed).sigma_for(abar)
    out.update(
        {
            "alpha_bar": abar,
            "sigma_bar": sig,
            "ebn0_db": sigma_to_ebn0(sig, rate, spec.constellation.bits_per_symbol),
        }
    )
    return out


def _parse_rows(text: str | None) -> list[tuple[str, str]]:
    if not text:
        return TABLE_ROWS
    rows = []
    for item in text.split(","):
        mod, _, ch = item.strip().partition("/")
        rows.append((build_constellation(mod).name, Fading.parse(ch or "awgn").value))
    return rows


def _parse_ensembles(text: str | None) -> list[tuple[int, int]]:
    if not text:
        return TABLE_ENSEMBLES
    return [_pair(t) for t in text.split(";") if t.strip()]


def _workers(args) -> int:
    n = args.workers if getattr(args, "workers", None) is not None else (os.cpu_count() or 1)
    if n < 1:
        raise ConfigurationError("--workers must be at least 1")
    return n


def _table_row(mod: str, ch: str, kind: DemapperKind, preset: dict, ensembles, seed: int) -> dict:
    spec = ChannelSpec(build_constellation(mod), Fading.parse(ch), 1.0)
    nt = noise_threshold(spec, kind, 0.5, "gmi", preset["gmi_samples"], seed)
    row = {"mod": mod, "channel": ch, "noise_threshold_db": nt.ebn0_db, "noise_stderr_db": nt.stderr_db}
    for dl, dr in ensembles:
        e = ScEnsemble(dl, dr, preset["L"], preset["w"])
        th = sc_bp_threshold(
            e,
            spec,
            kind,
            bracket=(nt.ebn0_db - 0.1, nt.ebn0_db + 1.5),
            n_samples=preset["de_samples"],
            seed=seed,
            noise_ebn0_db=nt.ebn0_db,
        )
        row[f"({dl},{dr},{e.L},{e.w})"] = {
            "bp_db": th.ebn0_db,
            "gap_db": th.gap_db,
            "asympt_gap_db": th.asympt_gap_db,
        }
    return row


def cmd_table(args) -> dict:
    preset = PRESETS[args.preset]
    kind = DemapperKind.MAP if args.which == "I" else DemapperKind.MLM
    rows = _parse_rows(args.rows)
    ensembles = _parse_ensembles(args.ensembles)
    jobs = [(mod, ch, kind, preset, ensembles, args.seed) for mod, ch in rows]
    workers = min(_workers(args), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_table_row, *zip(*jobs)))
    else:
        out = [_table_row(*job) for job in jobs]
    return {"which": args.which, "preset": args.preset, "rows": out}


def format_table(result: dict) -> str:
    rows = result["rows"]
    if not rows:
        return ""
    ens = [k for k in rows[0] if k.startswith("(")]
    head = ["Mod. / Chan.", "Noise Thresh."] + [f"{e} BP / Gap / Asympt." for e in ens]
    lines = []
    for r in rows:
        cells = [f"{r['mod'].upper()} / {r['channel']}", f"{r['noise_threshold_db']:.2f}"]
        for e in ens:
            v = r[e]
            cells.append(f"{v['bp_db']:.2f} / {v['gap_db']:.2f} / {v['asympt_gap_db']:.2f}")
        lines.append(cells)
    widths = [max(len(x) for x in col) for col in zip(head, *lines)]
    fmt = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()  # noqa: E731
    return "\n".join([fmt(head)] + [fmt(c) for c in lines])


COMMANDS = {
    "gmi": cmd_gmi,
    "threshold": cmd_threshold,
    "sc-threshold": cmd_sc_threshold,
    "gexit": cmd_gexit,
    "table": cmd_table,
}


def _echo(args) -> dict:
    skip = {"format", "output", "config", "workers"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def run(args: argparse.Namespace) -> tuple[int, dict]:
    _workers(args)
    result = COMMANDS[args.command](args)
    body = {
        "command": args.command,
        "config": _echo(args),
        "seed": args.seed,
        "version": __version__,
        "result": result,
    }
    return 0, _jsonable(body)


def _text(body: dict) -> str:
    if body["command"] == "table":
        return format_table(body["result"])
    res = {k: v for k, v in body["result"].items() if k != "curve"}
    width = max(len(k) for k in res) if res else 0
    lines = [f"{k.ljust(width)}  {v}" for k, v in res.items()]
    lines.append(f"{'seed'.ljust(width)}  {body['seed']}")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except ConfigurationError as exc:
        print(f"scbicm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        status, body = run(args)
    except ConfigurationError as exc:
        print(f"scbicm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, ThresholdSearchError, AreaThresholdError) as exc:
        print(f"scbicm: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = json.dumps(body, indent=2, sort_keys=True)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    print(text if args.format == "json" else _text(body))
    return status


if __name__ == "__main__":
    sys.exit(main())
