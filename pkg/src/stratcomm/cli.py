"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 domain error in the model
or channel, 4 failed consistency check or failed audit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .equilibrium import best_response, closed_form_equilibrium, solve_stackelberg, transmitter_si_audit
from .errors import DomainError, StratCommError
from .gaussian_core import ModelParams, validate_model
from .noisy_jscc import (
    ChannelParams,
    LinearStrategyPair,
    construct_matched_params,
    goblick_mappings,
    linear_si_strategies,
    matching_condition,
    optimality_audit,
    strategic_uncoded_no_si,
)
from .reports import AuditReport
from .sim import analytic_game, deviation_audit, simulate_game
from .strategic_rd import no_si_curve, printed_formula_audit, rate_loss_audit, wz_curve

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_CONSISTENCY = 0, 2, 3, 4

CSV_COLUMNS = ["R_bits", "beta", "sigma_s2", "D_E", "D_D", "D_E_paper", "D_D_paper", "I_YW_bits"]
AUDIT_KINDS = ["tx-si", "rate-loss", "match", "optimality", "deviation", "formulas"]
STRATEGIES = ["theorem1", "lemma1", "theorem5", "lemma3", "goblick", "custom"]

MODEL_FLAGS = {
    "sigma_x2": "sigma_x2",
    "r": "r_theta",
    "rho": "rho_xtheta",
    "rho_xw": "rho_xw",
    "rho_thetaw": "rho_thetaw",
    "r_w": "r_w",
}
OPTION_KEYS = {
    "si", "rates", "rate", "b_grid", "a_grid", "alpha", "grid", "n", "seed",
    "strategies", "custom", "dither_var", "threads", "nats",
}
CUSTOM_KEYS = {"enc_scale", "enc_alpha", "enc_w", "dec_y", "dec_w"}
TOP_KEYS = {"model", "channel"} | OPTION_KEYS

DEFAULT_RATES = [0.25 * i for i in range(17)]
DEFAULT_DEVIATION_GRID = [-0.5, -0.2, -0.05, 0.0, 0.05, 0.2, 0.5]


class ConfigError(Exception):
    pass


class ConsistencyFailure(Exception):
    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


def _floats(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="write output here instead of stdout")
    common.add_argument("--threads", type=int, help="worker cap for curves and simulation")
    common.add_argument("--nats", action="store_true", default=None, help="display rates in nats")
    m = common.add_argument_group("model")
    m.add_argument("--sigma-x2", type=float)
    m.add_argument("--r", type=float, help="var(theta) / var(X)")
    m.add_argument("--rho", type=float, help="cov(X, theta) / var(X)")
    m.add_argument("--rho-xw", type=float)
    m.add_argument("--rho-thetaw", type=float)
    m.add_argument("--r-w", type=float)
    c = common.add_argument_group("channel")
    c.add_argument("--pt", type=float, help="transmit power P_T")
    c.add_argument("--sigma-n2", type=float, help="channel noise variance")

    parser = argparse.ArgumentParser(prog="stratcomm", description="Quadratic-Gaussian strategic communication toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("equilibrium", parents=[common], help="noiseless Stackelberg equilibrium")
    p.add_argument("--si", action="store_true", default=None, help="receiver side information")

    p = sub.add_parser("rd-curve", parents=[common], help="strategic rate-distortion curve as CSV")
    p.add_argument("--si", action="store_true", default=None, help="Wyner-Ziv curve")
    p.add_argument("--rates", type=_floats, help="comma-separated rates in bits")

    p = sub.add_parser("audit", parents=[common], help="run an audit")
    p.add_argument("kind", choices=AUDIT_KINDS)
    p.add_argument("--rate", type=float, help="rate in bits (rate-loss)")
    p.add_argument("--rates", type=_floats, help="rate grid (formulas)")
    p.add_argument("--b-grid", type=_floats, help="encoder W-coefficients")
    p.add_argument("--alpha", type=float, help="claimed equilibrium coefficient (deviation)")
    p.add_argument("--grid", type=_floats, help="deviation offsets, must include 0")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--si", action="store_true", default=None)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo run of a strategy pair")
    p.add_argument("--strategies", choices=STRATEGIES)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--dither-var", type=float)
    for key in sorted(CUSTOM_KEYS):
        p.add_argument("--" + key.replace("_", "-"), type=float, dest="custom_" + key)

    sub.add_parser("match-construct", parents=[common], help="build matched side-information statistics")
    return parser


def _load_config(path):
    if not path:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return doc


def resolve(args) -> dict:
    """Merge the config file with command-line flags; flags win."""
    doc = _load_config(args.config)
    model = dict(doc.get("model") or {})
    for flag, key in MODEL_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            model[key] = v
    channel = dict(doc.get("channel") or {})
    if args.pt is not None:
        channel["p_t"] = args.pt
    if args.sigma_n2 is not None:
        channel["sigma_n2"] = args.sigma_n2

    opts = {k: v for k, v in doc.items() if k in OPTION_KEYS}
    for key in OPTION_KEYS - {"custom"}:
        v = getattr(args, key, None)
        if v is not None:
            opts[key] = v
    custom = dict(opts.get("custom") or {})
    if set(custom) - CUSTOM_KEYS:
        raise ConfigError(f"unknown custom strategy keys: {sorted(set(custom) - CUSTOM_KEYS)}")
    for key in CUSTOM_KEYS:
        v = getattr(args, "custom_" + key, None)
        if v is not None:
            custom[key] = v
    if custom:
        opts["custom"] = custom
    if "seed" not in opts:
        opts["seed"] = int(os.environ.get("STRATCOMM_SEED", "0"))

    model.setdefault("sigma_x2", 1.0)
    if set(model) - set(MODEL_FLAGS.values()):
        raise ConfigError(f"unknown model keys: {sorted(set(model) - set(MODEL_FLAGS.values()))}")
    return {"model": model, "channel": channel or None, **opts}


def _model(cfg) -> ModelParams:
    try:
        return ModelParams.from_dict(cfg["model"])
    except (DomainError, TypeError, ValueError) as e:
        raise ConfigError(f"model: {e}") from None


def _channel(cfg, required=False) -> ChannelParams | None:
    if not cfg.get("channel"):
        if required:
            raise ConfigError("this command needs a channel (--pt, --sigma-n2)")
        return None
    ch = cfg["channel"]
    if set(ch) != {"p_t", "sigma_n2"}:
        raise ConfigError(f"channel needs exactly p_t and sigma_n2, got {sorted(ch)}")
    return ChannelParams.from_dict(ch)


def _require_si(params: ModelParams, what: str):
    if not params.has_si:
        raise ConfigError(f"{what} needs side-information fields (--rho-xw, --rho-thetaw, --r-w)")


def _num(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _envelope(command, cfg, result) -> dict:
    return {"command": command, "version": __version__, "config": cfg, "result": result}


def cmd_equilibrium(cfg) -> dict:
    params = _model(cfg)
    use_si = bool(cfg.get("si"))
    if use_si:
        _require_si(params, "--si")
    validate_model(params)
    try:
        closed = closed_form_equilibrium(params.r_theta, params.rho_xtheta, params.sigma_x2)
    except DomainError:
        if not use_si:
            raise
        closed = None
    numeric = solve_stackelberg(params, use_si)
    checks = {}
    if not use_si:
        scale = params.sigma_x2
        checks["alpha_abs_diff"] = abs(closed.alpha - numeric.alpha)
        checks["d_e_rel_diff"] = abs(closed.distortions.d_e - numeric.distortions.d_e) / scale
        checks["d_d_rel_diff"] = abs(closed.distortions.d_d - numeric.distortions.d_d) / scale
        consistent = checks["alpha_abs_diff"] < 1e-6 and checks["d_e_rel_diff"] < 1e-6 and checks["d_d_rel_diff"] < 1e-6
    else:
        cov = validate_model(params)
        here = numeric.distortions.d_e
        worst = 0.0
        for a in np.linspace(numeric.alpha - 1.0, numeric.alpha + 1.0, 201):
            if abs(a - numeric.alpha) < 1e-9:
                continue
            worst = max(worst, here - best_response(params, a, True, 0.0, cov)[1].d_e)
        checks["max_leader_improvement"] = worst
        consistent = worst <= 1e-10
    result = {
        "closed_form": closed.to_dict() if closed else None,
        "numeric": numeric.to_dict(),
        "side_information": use_si,
        "checks": checks,
        "consistent": consistent,
    }
    if not consistent:
        raise ConsistencyFailure("closed-form and numeric equilibria disagree", result)
    return result


def _rate_display(cfg):
    return (math.log(2.0), "nats") if cfg.get("nats") else (1.0, "bits")


def cmd_rd_curve(cfg) -> str:
    params = _model(cfg)
    validate_model(params)
    rates = cfg.get("rates") or DEFAULT_RATES
    if cfg.get("si"):
        _require_si(params, "--si")
        points = wz_curve(params, rates, threads=cfg.get("threads"))
    else:
        points = no_si_curve(params.r_theta, params.rho_xtheta, params.sigma_x2, rates)
    k, unit_name = _rate_display(cfg)
    header = list(CSV_COLUMNS)
    if unit_name != "bits":
        header = [h.replace("_bits", "_" + unit_name) for h in header]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for pt in points:
        writer.writerow(
            [
                _num(pt.rate * k),
                _num(pt.beta),
                _num(pt.sigma_s2),
                _num(pt.distortions.d_e),
                _num(pt.distortions.d_d),
                _num(pt.d_e_paper),
                _num(pt.d_d_paper),
                _num(pt.i_yw * k),
            ]
        )
    return buf.getvalue()


def _default_alpha(params, channel, use_si):
    if channel is None:
        return solve_stackelberg(params, use_si).alpha
    if use_si:
        return linear_si_strategies(params, channel).strategies.enc_alpha
    return strategic_uncoded_no_si(params.r_theta, params.rho_xtheta, params.sigma_x2, channel).strategies.enc_alpha


def cmd_audit(cfg, kind) -> dict:
    params = _model(cfg)
    validate_model(params)
    b_grid = cfg.get("b_grid") or [-3.0, -1.0, 1.0, 3.0]
    if kind == "tx-si":
        _require_si(params, "audit tx-si")
        report = transmitter_si_audit(params, b_grid, a_grid=cfg.get("a_grid"))
    elif kind == "rate-loss":
        _require_si(params, "audit rate-loss")
        report = rate_loss_audit(params, float(cfg.get("rate", 1.0)), b_grid)
    elif kind == "match":
        _require_si(params, "audit match")
        m = matching_condition(params, _channel(cfg, required=True))
        report = AuditReport("match", m.holds, m.residual, 1e-9, m.to_dict())
    elif kind == "optimality":
        _require_si(params, "audit optimality")
        report = optimality_audit(params, _channel(cfg, required=True))
    elif kind == "deviation":
        channel = _channel(cfg)
        use_si = bool(cfg.get("si")) and params.has_si
        alpha = cfg.get("alpha")
        if alpha is None:
            alpha = _default_alpha(params, channel, use_si)
        report = deviation_audit(
            params,
            channel,
            float(alpha),
            cfg.get("grid") or DEFAULT_DEVIATION_GRID,
            n=int(cfg.get("n", 1_000_000)),
            seed=int(cfg["seed"]),
            use_si=use_si,
            threads=cfg.get("threads"),
        )
    else:
        report = printed_formula_audit([params], cfg.get("rates") or [0.5 * i for i in range(20)])
    result = report.to_dict()
    verdict = "PASS" if report.passed else "FAIL"
    print(
        f"audit {kind}: {verdict} max_deviation={report.max_deviation:.3e} tolerance={report.tolerance:.1e}",
        file=sys.stderr,
    )
    if not report.passed:
        raise ConsistencyFailure(f"audit {kind} failed", result)
    return result


def _strategy_pair(cfg, params, channel):
    name = cfg.get("strategies") or "theorem1"
    if name == "theorem1":
        eq = closed_form_equilibrium(params.r_theta, params.rho_xtheta, params.sigma_x2)
        return name, LinearStrategyPair(1.0, eq.alpha, 0.0, eq.decoder_y, 0.0), None
    if name == "lemma1":
        _require_si(params, "lemma1 strategies")
        eq = solve_stackelberg(params, True)
        return name, LinearStrategyPair(1.0, eq.alpha, 0.0, eq.decoder_y, eq.decoder_w), None
    if name == "custom":
        custom = cfg.get("custom") or {}
        missing = {"enc_scale", "enc_alpha", "dec_y"} - set(custom)
        if missing:
            raise ConfigError(f"custom strategies need {sorted(missing)}")
        pair = LinearStrategyPair(
            custom["enc_scale"], custom["enc_alpha"], custom.get("enc_w", 0.0), custom["dec_y"], custom.get("dec_w", 0.0)
        )
        return name, pair, channel
    channel = _channel(cfg, required=True)
    if name == "theorem5":
        sol = strategic_uncoded_no_si(params.r_theta, params.rho_xtheta, params.sigma_x2, channel)
    elif name == "lemma3":
        _require_si(params, "lemma3 strategies")
        sol = linear_si_strategies(params, channel)
    else:
        sol = goblick_mappings(params.sigma_x2, channel)
    return name, sol.strategies, channel


def cmd_simulate(cfg) -> dict:
    params = _model(cfg)
    validate_model(params)
    n = int(cfg.get("n", 1_000_000))
    if n < 2:
        raise ConfigError("n must be >= 2")
    name, pair, channel = _strategy_pair(cfg, params, _channel(cfg))
    dither = float(cfg.get("dither_var", 0.0))
    res = simulate_game(params, channel, pair, n, int(cfg["seed"]), threads=cfg.get("threads"), dither_var=dither)
    exact, power = analytic_game(params, channel, pair, dither)
    out = res.to_dict()
    out.update(strategies=name, pair=pair.to_dict(), analytic={"d_e": exact.d_e, "d_d": exact.d_d, "power": power})
    return out


def cmd_match_construct(cfg) -> dict:
    m = cfg["model"]
    missing = {"r_theta", "rho_xtheta", "rho_thetaw", "r_w"} - set(m)
    if missing:
        raise ConfigError(f"match-construct needs model fields {sorted(missing)}")
    channel = _channel(cfg, required=True)
    params = construct_matched_params(m["r_theta"], m["rho_xtheta"], m["rho_thetaw"], m["r_w"], m["sigma_x2"], channel)
    return {"model": params.to_dict(), "channel": channel.to_dict(), "matching": matching_condition(params, channel).to_dict()}


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2) + "\n"


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        if args.command == "rd-curve":
            _emit(cmd_rd_curve(cfg), args.out)
            return EXIT_OK
        if args.command == "equilibrium":
            result = cmd_equilibrium(cfg)
        elif args.command == "audit":
            result = cmd_audit(cfg, args.kind)
        elif args.command == "simulate":
            result = cmd_simulate(cfg)
        else:
            result = cmd_match_construct(cfg)
        _emit(_dump(_envelope(args.command, cfg, result)), args.out)
        return EXIT_OK
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConsistencyFailure as e:
        if e.payload is not None:
            _emit(_dump(_envelope(args.command, cfg, e.payload)), args.out)
        print(f"consistency failure: {e}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except DomainError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DOMAIN
    except StratCommError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_CONSISTENCY


if __name__ == "__main__":
    sys.exit(main())
