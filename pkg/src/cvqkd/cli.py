"""Command-line front end: ``cvqkd {keyrate,sweep,tolerance,optimize,simulate}``.

Exit codes: 0 on success, 2 on usage errors, 1 on domain or numeric errors.
Numbers are written with 12 significant digits.  Relative ``--output``
paths are resolved against ``$CVQKD_OUTPUT_DIR`` when it is set.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from . import analysis as an
from .errors import CVQKDError
from .rates import ChannelModel, ProtocolConfig, PRESETS, PRESET_ALIASES, keyrate, transmittance
from .simulation import empirical_rate, run_session

OUTPUT_DIR_ENV = "CVQKD_OUTPUT_DIR"
SIG_DIGITS = 12

PRESET_CHOICES = sorted(PRESETS) + sorted(PRESET_ALIASES) + ["optimal"]

FIGURE_COLUMNS = {
    "2a": ["loss_db", "eps_max_chiD1", "eps_max_chiD0", "eps_max_coherent_homodyne",
           "eps_max_coherent_heterodyne", "eps_max_opt"],
    "2b": ["loss_db", "K_chiD0", "K_chiD1", "K_opt"],
    "4a": ["loss_db", "K_opt", "K_chiD0", "K_chiD1"],
    "4b": ["loss_db", "chi_d_opt", "K_opt"],
}


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.{SIG_DIGITS}g}"
    return "" if v is None else str(v)


def _json_value(v):
    if isinstance(v, float):
        if not math.isfinite(v):
            return str(v)
        return float(f"{v:.{SIG_DIGITS}g}")
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


def render(table: Table, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_fmt(row.get(c)) for c in table.columns])
        return buf.getvalue()
    if fmt == "json":
        meta = dict(table.meta, version=__version__)
        points = [{c: _json_value(row.get(c)) for c in table.columns if c in row} for row in table.rows]
        return json.dumps({"meta": _json_value(meta), "points": points}, indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def _resolve(path) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def emit(table: Table, fmt: str, path=None) -> None:
    """Write ``table`` as CSV or JSON to ``path`` (atomically) or to stdout."""
    text = render(table, fmt)
    if path is None:
        sys.stdout.write(text)
        return
    target = _resolve(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def column_label(preset: str) -> str:
    key = PRESET_ALIASES.get(preset, preset)
    if key == "squeezed-homodyne":
        return "chiD0"
    if key == "squeezed-heterodyne":
        return "chiD1"
    if key == "optimal":
        return "opt"
    if key.startswith("chiD="):
        return "chiD" + key[len("chiD="):]
    return key.replace("-", "_")


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _add_channel(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--T", type=float, help="channel transmittivity")
    g.add_argument("--loss-db", type=float, help="channel loss in dB")
    n = p.add_mutually_exclusive_group(required=required)
    n.add_argument("--epsilon", type=float, help="excess noise (SNU)")
    n.add_argument("--chi-c", type=float, help="added noise referred to the input (SNU)")


def _add_protocol(p, default="squeezed-homodyne"):
    p.add_argument("--preset", choices=PRESET_CHOICES, default=default)
    p.add_argument("--V", type=float, default=40.0, help="EPR / modulation variance")
    p.add_argument("--chi-d", type=float, default=None,
                   help="Bob's added noise (squeezed homodyne only)")
    p.add_argument("--reconciliation", choices=["RR", "DR"], default="RR")
    p.add_argument("--switching", action="store_true",
                   help="random-basis homodyne variant (halves the rates)")


def _add_output(p, default_fmt):
    p.add_argument("--format", choices=["csv", "json"], default=default_fmt)
    p.add_argument("--output", default=None, help="output path (stdout if omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvqkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    k = sub.add_parser("keyrate", help="key rate of one protocol over one channel")
    _add_protocol(k)
    _add_channel(k)
    k.add_argument("--method", choices=["analytic", "entanglement"], default="analytic")
    _add_output(k, "json")

    s = sub.add_parser("sweep", help="curves versus channel loss")
    s.add_argument("--fig", choices=sorted(an.FIGURES))
    s.add_argument("--loss-min", type=float, default=0.0)
    s.add_argument("--loss-max", type=float, default=25.0)
    s.add_argument("--loss-step", type=float, default=0.5)
    s.add_argument("--epsilon", type=float, default=0.5)
    s.add_argument("--V", type=float, default=40.0)
    s.add_argument("--large-v", action="store_true", help="use the V -> infinity procedure")
    s.add_argument("--presets", nargs="+", default=["squeezed-homodyne", "squeezed-heterodyne", "optimal"],
                   help="preset names, 'optimal' or 'chiD=<value>'")
    s.add_argument("--tolerance", action="store_true", help="tabulate tolerable excess noise")
    _add_output(s, "csv")

    t = sub.add_parser("tolerance", help="tolerable excess noise at one loss")
    t.add_argument("--preset", choices=PRESET_CHOICES, default="squeezed-heterodyne")
    t.add_argument("--chi-d", type=float, default=None)
    t.add_argument("--loss-db", type=float, required=True)
    vg = t.add_mutually_exclusive_group()
    vg.add_argument("--V", type=float, default=None)
    vg.add_argument("--large-v", action="store_true")
    _add_output(t, "json")

    o = sub.add_parser("optimize", help="optimal Bob-side added noise")
    o.add_argument("--V", type=float, default=40.0)
    _add_channel(o)
    _add_output(o, "json")

    m = sub.add_parser("simulate", help="Monte Carlo session with channel estimation")
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--preset", choices=["squeezed-homodyne", "squeezed-heterodyne", "new"],
                   default="squeezed-heterodyne")
    m.add_argument("--V", type=float, default=40.0)
    m.add_argument("--chi-d", type=float, default=None)
    _add_channel(m)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--reveal-fraction", type=float, default=0.5)
    m.add_argument("--records", default=None, help="also write per-round records as CSV")
    _add_output(m, "json")
    return parser


def _channel(args) -> ChannelModel:
    T = args.T if args.T is not None else transmittance(args.loss_db)
    if args.epsilon is not None:
        return ChannelModel.from_epsilon(T, args.epsilon)
    return ChannelModel(T, args.chi_c)


def _config(preset, V, chi_d=None, reconciliation="RR", switching=False) -> ProtocolConfig:
    if chi_d is not None:
        if PRESET_ALIASES.get(preset, preset) != "squeezed-homodyne":
            raise CVQKDError("--chi-d applies to the squeezed-homodyne preset only")
        return ProtocolConfig.general(V, chi_d, reconciliation=reconciliation, switching=switching)
    return ProtocolConfig.preset(preset, V, reconciliation=reconciliation, switching=switching)


def _channel_meta(ch: ChannelModel) -> dict:
    return {"T": ch.T, "chi_C": ch.chi_C, "epsilon": ch.epsilon, "loss_db": ch.loss_dB}


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_keyrate(args) -> Table:
    ch = _channel(args)
    row = {"preset": args.preset, "V": args.V, **_channel_meta(ch)}
    if args.preset == "optimal":
        if args.reconciliation != "RR" or args.switching or args.chi_d is not None:
            raise CVQKDError("the optimal preset is RR without switching and picks chi_D itself")
        chi, K = an.optimize_chi_d(args.V, ch)
        rep = keyrate(ProtocolConfig.general(args.V, chi), ch)
        row.update(chi_D=chi, **rep.as_dict())
        row["K"] = K
    else:
        cfg = _config(args.preset, args.V, args.chi_d, args.reconciliation, args.switching)
        row.update(chi_D=cfg.chi_D, **keyrate(cfg, ch, method=args.method).as_dict())
    meta = {"command": "keyrate", "method": args.method, "reconciliation": args.reconciliation,
            "switching": args.switching}
    return Table(list(row), [row], meta)


def sweep_table(spec: an.SweepSpec, columns=None, meta=None) -> Table:
    points = an.sweep_curves(spec)
    rows = []
    for p in points:
        row = {"loss_db": p.loss_dB, "T": p.T}
        for preset, v in p.K.items():
            row[f"K_{column_label(preset)}"] = v
        for preset, v in p.epsilon_max.items():
            row[f"eps_max_{column_label(preset)}"] = v
        if p.chi_D_opt is not None:
            row["chi_d_opt"] = p.chi_D_opt
        for preset in p.errors:
            prefix = "eps_max_" if spec.tolerance else "K_"
            row.setdefault(prefix + column_label(preset), math.nan)
        rows.append(row)
    if columns is None:
        prefix = "eps_max_" if spec.tolerance else "K_"
        columns = ["loss_db"] + [prefix + column_label(p) for p in spec.presets]
        if "optimal" in spec.presets and not spec.tolerance:
            columns.append("chi_d_opt")
    errors = {f"{p.loss_dB:g}": p.errors for p in points if p.errors}
    meta = dict(meta or {}, losses=list(spec.losses), presets=list(spec.presets),
                epsilon=None if spec.tolerance else spec.epsilon,
                V="large" if spec.large_V else spec.V, tolerance=spec.tolerance,
                tolerances={"epsilon": an.EPS_TOL, "K": an.K_TOL, "chi_D": an.CHI_D_TOL,
                            "chi_D_max": an.CHI_D_MAX, "large_V": an.LARGE_V_TOL},
                errors=errors)
    return Table(columns, rows, meta)


def cmd_sweep(args) -> Table:
    if args.fig:
        spec = an.figure_spec(args.fig)
        return sweep_table(spec, FIGURE_COLUMNS[args.fig], {"command": "sweep", "figure": args.fig})
    if args.loss_step <= 0 or args.loss_max < args.loss_min:
        raise CVQKDError("need loss-step > 0 and loss-max >= loss-min")
    losses = an._grid(args.loss_min, args.loss_max, args.loss_step)
    spec = an.SweepSpec(losses, tuple(args.presets), args.epsilon,
                        None if args.large_v else args.V, args.tolerance)
    return sweep_table(spec, meta={"command": "sweep"})


def cmd_tolerance(args) -> Table:
    protocol = args.preset
    if args.chi_d is not None:
        protocol = _config(args.preset, 1.0, args.chi_d)
    if args.large_v:
        eps = an.large_V_eval(lambda V: an.tolerable_excess_noise(protocol, args.loss_db, V))
        V = "large"
    else:
        V = 40.0 if args.V is None else args.V
        eps = an.tolerable_excess_noise(protocol, args.loss_db, V)
    row = {"preset": args.preset, "loss_db": args.loss_db, "V": V, "epsilon_max": eps}
    meta = {"command": "tolerance", "chi_D": args.chi_d,
            "tolerances": {"epsilon": an.EPS_TOL, "K": an.K_TOL, "large_V": an.LARGE_V_TOL}}
    return Table(list(row), [row], meta)


def cmd_optimize(args) -> Table:
    ch = _channel(args)
    chi, K = an.optimize_chi_d(args.V, ch)
    row = {"V": args.V, **_channel_meta(ch), "chi_d_opt": chi, "K_opt": K,
           "K_chiD0": keyrate(ProtocolConfig.general(args.V, 0.0), ch).K,
           "K_chiD1": keyrate(ProtocolConfig.general(args.V, 1.0), ch).K}
    meta = {"command": "optimize", "tolerances": {"chi_D": an.CHI_D_TOL, "chi_D_max": an.CHI_D_MAX}}
    return Table(list(row), [row], meta)


def cmd_simulate(args) -> Table:
    ch = _channel(args)
    cfg = _config(args.preset, args.V, args.chi_d)
    res = run_session(args.n, cfg, ch, seed=args.seed, reveal_fraction=args.reveal_fraction)
    if args.records:
        res.to_csv(_resolve(args.records))
    I_hat, K_hat = empirical_rate(res, args.reveal_fraction)
    rep = keyrate(cfg, ch)
    row = {"n": args.n, "seed": args.seed, "preset": args.preset, "V": args.V, "chi_D": cfg.chi_D,
           **_channel_meta(ch), "T_hat": res.T_hat, "chi_C_hat": res.chi_C_hat,
           "I_hat": I_hat, "K_hat": K_hat, "I_ab": rep.I_ab, "K": rep.K}
    meta = {"command": "simulate", "reveal_fraction": args.reveal_fraction, "rng": "Philox"}
    return Table(list(row), [row], meta)


COMMANDS = {"keyrate": cmd_keyrate, "sweep": cmd_sweep, "tolerance": cmd_tolerance,
            "optimize": cmd_optimize, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            table = COMMANDS[args.command](args)
            emit(table, args.format, args.output)
    except (CVQKDError, OSError) as exc:
        print(f"cvqkd: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
