"""Command-line front end: ``hylcycles <subcommand> [options]``.

Subcommands: bose, phase-diagram, transitions, pressure, simulate.
Output is CSV (first line ``schema=1``, provenance footer) or JSON. A JSON
output file can be passed back with ``--config`` to rerun the same job.

Exit codes: 0 success, 2 configuration error, 3 numeric-domain error,
4 partial failure.
"""

import argparse
import hashlib
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, fields

import numpy as np

from . import __version__
from .bose import SWITCH_U, bose_g, bose_g_expansion
from .errors import AmbiguityError, HylError
from .ideal_gas import GasParams, critical_density
from .simulator import (
    chain_poisson_check,
    estimate_DK,
    estimate_mean_weight,
    estimate_pair_density,
    estimate_pressure,
    exact_pressure_finite,
    make_schedule,
    mcmc_sample,
)
from .variational import (
    COEXISTENCE,
    HylParams,
    PhaseDiagramRow,
    beta_t,
    condensate_delta,
    condensate_rho,
    default_workers,
    mu_r_closed_form,
    mu_t_closed_form_d2,
    p_sub,
    p_sup,
    phase_diagram,
    pressure,
    transition_potentials,
    x_tilde_2,
    zero_set,
)

SCHEMA = 1
EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_PARTIAL = 0, 2, 3, 4


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# parsing helpers


def parse_float(text):
    t = str(text).strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def parse_grid(text):
    """``lo:hi:n`` -> n evenly spaced points; a plain number -> one point."""
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    parts = str(text).split(":")
    if len(parts) == 1:
        return [parse_float(parts[0])]
    if len(parts) != 3:
        raise ConfigError(f"grid must be lo:hi:n, got {text!r}")
    lo, hi = parse_float(parts[0]), parse_float(parts[1])
    try:
        n = int(parts[2])
    except ValueError:
        raise ConfigError(f"grid count must be an integer, got {parts[2]!r}") from None
    if n < 1:
        raise ConfigError("grid needs at least one point")
    if n > 1 and not hi > lo:
        raise ConfigError("grid must be strictly increasing")
    return [float(v) for v in np.linspace(lo, hi, n)]


def parse_list(text, conv=float):
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return [conv(v) for v in text]
    try:
        return [conv(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad list: {text!r}") from None


# ---------------------------------------------------------------------------
# formatting


def fmt(value, precision):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.{precision}g}"


def json_value(value, precision):
    if value is None or isinstance(value, (str, bool)):
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(f"{v:.{precision}g}")


def render(command, config, columns, rows, fmt_name, precision):
    """Serialise rows; returns the full text (body plus provenance)."""
    if fmt_name == "json":
        body_rows = [{c: json_value(r.get(c), precision) for c in columns} for r in rows]
        body = json.dumps(body_rows, sort_keys=True, separators=(",", ":"))
        digest = hashlib.sha256(body.encode()).hexdigest()
        doc = {
            "schema": SCHEMA,
            "command": command,
            "config": config,
            "columns": columns,
            "rows": body_rows,
            "provenance": {"version": __version__, "content_sha256": digest, "params": config},
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"schema={SCHEMA}\n")
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(fmt(r.get(c), precision) for c in columns) + "\n")
    body = buf.getvalue()
    digest = hashlib.sha256(body.encode()).hexdigest()
    footer = (
        f"# command: {command}\n"
        f"# params: {json.dumps(config, sort_keys=True)}\n"
        f"# version: {__version__}\n"
        f"# content-sha256: {digest}\n"
    )
    return body + footer


def emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# config assembly


MODEL_KEYS = ("d", "beta", "beta_grid", "alpha", "a", "b", "mu", "mu_grid", "kappa")
SIM_KEYS = ("volumes", "seed", "steps", "burn_in", "exact", "count_cap", "k_max", "K", "ti_nodes")
OUT_KEYS = ("format", "precision")


def build_config(args):
    """Merge --config JSON (if any) with explicit flags into a plain dict."""
    cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        cfg.update(doc.get("config", doc))
    for key in ("n", "u") + MODEL_KEYS + SIM_KEYS + OUT_KEYS:
        val = getattr(args, key, None)
        if val is not None and val is not False:
            cfg[key] = val
    cfg.setdefault("format", "csv")
    cfg.setdefault("precision", 12)
    try:
        cfg["precision"] = int(cfg["precision"])
    except (TypeError, ValueError):
        raise ConfigError("precision must be an integer") from None
    if not 6 <= cfg["precision"] <= 17:
        raise ConfigError("precision must lie in [6, 17]")
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    return cfg


def _need(cfg, *keys):
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _betas(cfg):
    if cfg.get("beta_grid") is not None:
        return parse_grid(cfg["beta_grid"])
    _need(cfg, "beta")
    return [parse_float(cfg["beta"])]


def _mus(cfg):
    if cfg.get("mu_grid") is not None:
        return parse_grid(cfg["mu_grid"])
    _need(cfg, "mu")
    return [parse_float(cfg["mu"])]


def _model(cfg):
    _need(cfg, "d", "a", "b")
    try:
        d = int(cfg["d"])
    except (TypeError, ValueError):
        raise ConfigError("d must be an integer") from None
    a = parse_float(cfg["a"])
    b = parse_float(cfg["b"])
    cfg.setdefault("kappa", 0.0)
    kappa = parse_float(cfg["kappa"])
    if d < 1:
        raise ConfigError("d must be >= 1")
    if not (a > 0 and 0 <= b < a):
        raise ConfigError(f"need a > b >= 0, got a={a}, b={b}")
    if not kappa >= 0:
        raise ConfigError("kappa must be >= 0")
    for name, g in (("beta", _betas(cfg)),):
        if any(not v > 0 for v in g):
            raise ConfigError(f"{name} must be positive")
    return d, a, b, kappa


def _canonical(cfg, keys):
    """The subset of the config that determines the output (echoed as provenance)."""
    return {k: cfg[k] for k in sorted(cfg) if k in keys and cfg[k] is not None}


# ---------------------------------------------------------------------------
# subcommands


def cmd_bose(cfg):
    _need(cfg, "n", "u")
    ns = parse_list(cfg["n"], parse_float)
    us = parse_list(cfg["u"], parse_float)
    rows = []
    failures = []
    for n in ns:
        for u in us:
            row = {"n": n, "u": u, "series": None, "expansion": None, "discrepancy": None, "error": ""}
            try:
                row["series"] = bose_g(n, u)
            except HylError as exc:
                row["error"] = f"series: {exc}"
            if u != 0 and abs(u) < 2 * math.pi:
                try:
                    row["expansion"] = bose_g_expansion(n, u)
                except HylError as exc:
                    row["error"] += f" expansion: {exc}"
            if row["series"] is not None and row["expansion"] is not None:
                row["discrepancy"] = abs(row["series"] - row["expansion"])
            row["value"] = row["series"] if (u <= SWITCH_U or row["expansion"] is None) else row["expansion"]
            if row["series"] is None and row["expansion"] is None:
                failures.append(f"g({n}, {u}) is divergent: {row['error'].strip()}")
            rows.append(row)
    cols = ["n", "u", "value", "series", "expansion", "discrepancy", "error"]
    return cols, rows, failures, len(rows) - len(failures)


def _phase_columns(kappa):
    cols = [f.name for f in fields(PhaseDiagramRow)]
    if kappa == 0 or math.isinf(kappa):
        cols = [c for c in cols if c not in ("mu_star_kappa", "mu_r")]
    return cols


def cmd_phase_diagram(cfg):
    d, a, b, kappa = _model(cfg)
    rows = phase_diagram(d, _betas(cfg), _mus(cfg), a, b, kappa)
    out = [asdict(r) for r in rows]
    ok = sum(1 for r in rows if not r.error)
    failures = [f"beta={r.beta}, mu={r.mu}: {r.error}" for r in rows if r.error]
    return _phase_columns(kappa), out, failures, ok


def cmd_transitions(cfg):
    d, a, b, kappa = _model(cfg)
    rows = []
    failures = []
    for beta in _betas(cfg):
        gas = GasParams(d, beta)
        hyl = HylParams(a, b, 0.0, kappa)
        row = {"beta": beta, "mu_c": a * critical_density(d, beta), "notice": ""}
        if b == 0:
            row["notice"] = "mean-field model (b=0): no supercritical branch, mu_t = mu_star = inf"
            rows.append(row)
            continue
        try:
            tp = transition_potentials(gas, hyl)
            row.update(mu_t=tp.mu_t, alpha_bar=tp.alpha_bar, mu_star=tp.mu_star)
            if d == 2:
                cf = mu_t_closed_form_d2(beta, a, b)
                row.update(mu_t_closed_form=cf, mu_t_rel_diff=abs(cf - tp.mu_t) / abs(cf))
            if d >= 5:
                bt = beta_t(d, a, b)
                row.update(beta_t=bt, beta_t_reached=beta >= bt)
            if tp.mu_r is not None:
                mrc = mu_r_closed_form(gas, hyl)
                x2 = x_tilde_2(gas, hyl.with_mu(tp.mu_r))
                resid = abs(x2 - (tp.mu_r - kappa * (a - b)) / a)
                row.update(
                    mu_r=tp.mu_r,
                    mu_r_closed_form=mrc,
                    mu_r_definition_residual=resid,
                    mu_r_check="PASS" if resid <= 1e-6 else "FAIL",
                    mu_star_kappa=tp.mu_star_kappa,
                    mu_hat_star_kappa=tp.mu_hat_star_kappa,
                )
        except (HylError, ValueError, ArithmeticError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
            failures.append(f"beta={beta}: {exc}")
        rows.append(row)
    cols = ["beta", "mu_t", "mu_t_closed_form", "mu_t_rel_diff", "mu_c", "alpha_bar", "beta_t",
            "beta_t_reached", "mu_star", "mu_r", "mu_r_closed_form", "mu_r_definition_residual",
            "mu_r_check", "mu_star_kappa", "mu_hat_star_kappa", "notice", "error"]
    return cols, rows, failures, len(rows) - len(failures)


def cmd_pressure(cfg):
    d, a, b, kappa = _model(cfg)
    rows = []
    failures = []
    for beta in _betas(cfg):
        gas = GasParams(d, beta)
        for mu in _mus(cfg):
            hyl = HylParams(a, b, mu, kappa)
            row = {"beta": beta, "mu": mu}
            try:
                zs = zero_set(gas, hyl)
                row.update(phase=zs.regime, pressure=pressure(gas, hyl), p_sub=p_sub(gas, hyl))
                if b > 0 and mu >= transition_potentials(gas, hyl).mu_t:
                    row["p_sup"] = p_sup(gas, hyl)
                pts = zs.points
                row.update(x=pts[0].x, y=pts[0].y)
                if len(pts) == 2:
                    row.update(x2=pts[1].x, y2=pts[1].y)
            except (HylError, ValueError, ArithmeticError) as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
                failures.append(f"beta={beta}, mu={mu}: {exc}")
            rows.append(row)
    cols = ["beta", "mu", "phase", "pressure", "p_sub", "p_sup", "x", "y", "x2", "y2", "error"]
    return cols, rows, failures, len(rows) - len(failures)


def _simulate_volume(cfg, gas, hyl, volume, seed):
    steps = int(cfg.get("steps", 200_000))
    burn = int(cfg.get("burn_in", steps // 10))
    cap = cfg.get("count_cap")
    cap = None if cap is None else int(cap)
    k_max = cfg.get("k_max")
    sched = make_schedule(gas, hyl, volume, k_max=None if k_max is None else int(k_max))
    row = {"volume": volume, "seed": seed, "m_cutoff": sched.m_cutoff, "k_max": sched.k_max,
           "steps": steps, "burn_in": burn}
    stream = mcmc_sample(gas, hyl, sched, steps, burn, seed, count_cap=cap)
    m1, m2 = estimate_pair_density(stream, sched)
    row.update(accept_rate=stream.accept_rate, M1=m1.mean, M1_se=m1.std_error, M2=m2.mean,
               M2_se=m2.std_error, tau_M1=m1.tau_int, tau_M2=m2.tau_int)
    for K in parse_list(cfg.get("K", "0"), int):
        if K < sched.k_max:
            dk = estimate_DK(stream, K, sched)
            row[f"D_{K}"] = dk.mean
            row[f"D_{K}_se"] = dk.std_error
    pe = estimate_pressure(gas, hyl, sched, steps, burn, seed + 1, n_nodes=int(cfg.get("ti_nodes", 8)),
                           count_cap=cap)
    row.update(pressure_est=pe.mean, pressure_se=pe.std_error)
    if hyl.a == 0 and hyl.b == 0 and hyl.mu == gas.alpha and cap is None:
        pv = chain_poisson_check(stream, gas, sched)
        row.update(reference_pvalue=pv, reference_check="PASS" if pv > 0.01 else "FAIL")
    if cfg.get("exact"):
        ccap = 3 if cap is None else cap
        ex = exact_pressure_finite(gas, hyl, sched, ccap)
        if cap is None:
            # the chain must see the same truncated space as the enumeration
            stream = mcmc_sample(gas, hyl, sched, steps, burn, seed, count_cap=ccap)
            m1, m2 = estimate_pair_density(stream, sched)
        w = estimate_mean_weight(gas, hyl, sched, steps, burn, seed + 2, count_cap=ccap)
        agree = (
            abs(m1.mean - ex.mean_m1) <= 3 * m1.std_error + 1e-12
            and abs(m2.mean - ex.mean_m2) <= 3 * m2.std_error + 1e-12
            and abs(w.mean - ex.mean_weight) <= 3 * w.std_error + 1e-12
        )
        row.update(exact_M1=ex.mean_m1, exact_M2=ex.mean_m2, exact_weight=ex.mean_weight,
                   mcmc_weight=w.mean, mcmc_weight_se=w.std_error, exact_pressure=ex.pressure,
                   exact_tail_mass=ex.tail_mass, exact_check="PASS" if agree else "FAIL")
    if hyl.a > 0:
        g0 = GasParams(gas.d, gas.beta)
        zs = zero_set(g0, hyl)
        row.update(target_phase=zs.regime, target_x=zs.points[0].x, target_y=zs.points[0].y,
                   target_pressure=pressure(g0, hyl))
        try:
            row["target_rho"] = condensate_rho(g0, hyl)
        except AmbiguityError:
            row["target_rho"] = COEXISTENCE
        try:
            row["target_delta"] = condensate_delta(g0, hyl)
        except AmbiguityError:
            row["target_delta"] = COEXISTENCE
    return row


def cmd_simulate(cfg):
    _need(cfg, "d", "beta", "alpha", "a", "b", "mu", "volumes")
    d = int(cfg["d"])
    beta = parse_float(cfg["beta"])
    alpha = parse_float(cfg["alpha"])
    a, b = parse_float(cfg["a"]), parse_float(cfg["b"])
    mu = parse_float(cfg["mu"])
    cfg.setdefault("kappa", 0.0)
    kappa = parse_float(cfg["kappa"])
    if not alpha < 0:
        raise ConfigError("alpha must be negative for the reference process")
    if not beta > 0:
        raise ConfigError("beta must be positive")
    if not (0 <= b < a or a == b == 0):
        raise ConfigError("need a > b >= 0 (or a = b = 0)")
    volumes = parse_list(cfg["volumes"], parse_float)
    if any(not v > 0 for v in volumes):
        raise ConfigError("volumes must be positive")
    cfg.setdefault("seed", 0)
    cfg.setdefault("steps", 200_000)
    cfg.setdefault("burn_in", int(cfg["steps"]) // 10)
    cfg.setdefault("K", "0")
    cfg.setdefault("ti_nodes", 8)
    seed = int(cfg["seed"])
    steps = int(cfg["steps"])
    burn = int(cfg["burn_in"])
    if not steps > burn >= 0:
        raise ConfigError("need steps > burn-in >= 0")
    gas = GasParams(d, beta, alpha)
    hyl = HylParams(a, b, mu, kappa)

    def one(i_v):
        i, v = i_v
        try:
            return _simulate_volume(cfg, gas, hyl, v, seed + 1000 * i)
        except (HylError, ValueError, ArithmeticError) as exc:
            return {"volume": v, "seed": seed + 1000 * i, "error": f"{type(exc).__name__}: {exc}"}

    with ThreadPoolExecutor(max_workers=max(1, min(default_workers(), len(volumes)))) as ex:
        rows = list(ex.map(one, enumerate(volumes)))
    cols = []
    for r in rows:
        for c in r:
            if c not in cols:
                cols.append(c)
    if "error" not in cols:
        cols.append("error")
    failures = [f"volume={r['volume']}: {r['error']}" for r in rows if r.get("error")]
    checks = [r.get(c) for r in rows for c in ("reference_check", "exact_check") if r.get(c)]
    if "FAIL" in checks:
        failures.append("an invariant check failed (see *_check columns)")
    return cols, rows, failures, len(rows) - sum(1 for r in rows if r.get("error"))


COMMANDS = {
    "bose": (cmd_bose, ("n", "u")),
    "phase-diagram": (cmd_phase_diagram, MODEL_KEYS),
    "transitions": (cmd_transitions, MODEL_KEYS),
    "pressure": (cmd_pressure, MODEL_KEYS),
    "simulate": (cmd_simulate, MODEL_KEYS + SIM_KEYS),
}


# ---------------------------------------------------------------------------
# argparse


def _add_common(p):
    p.add_argument("--config", help="JSON file from a previous --format json run")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--precision", type=int, help="significant digits, 6..17 (default 12)")


def _add_model(p, grids=True):
    p.add_argument("--d", type=int)
    p.add_argument("--beta")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--kappa", help="0, positive, or inf")
    p.add_argument("--mu")
    if grids:
        p.add_argument("--beta-grid", dest="beta_grid", help="lo:hi:n")
        p.add_argument("--mu-grid", dest="mu_grid", help="lo:hi:n")


def build_parser():
    parser = argparse.ArgumentParser(prog="hylcycles", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bose", help="evaluate g(n, u) by series and expansion")
    p.add_argument("--n", help="order(s), comma separated")
    p.add_argument("--u", help="argument(s) u <= 0, comma separated")
    _add_common(p)

    for name, text in (("phase-diagram", "beta-mu sweep with regimes and densities"),
                       ("transitions", "transition chemical potentials per beta"),
                       ("pressure", "pressure and branch formulas along mu")):
        p = sub.add_parser(name, help=text)
        _add_model(p)
        _add_common(p)

    p = sub.add_parser("simulate", help="finite-volume Monte Carlo across volumes")
    _add_model(p, grids=False)
    p.add_argument("--alpha", help="reference chemical potential (< 0)")
    p.add_argument("--volumes", help="v1,v2,...")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--count-cap", dest="count_cap", type=int)
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--K", help="D_K cutoffs, comma separated (default 0)")
    p.add_argument("--ti-nodes", dest="ti_nodes", type=int, help="quadrature nodes for the pressure")
    p.add_argument("--exact", action="store_true", default=None,
                   help="also enumerate exactly (tiny volumes only)")
    _add_common(p)
    return parser


def _glue_negative_values(argv):
    """Turn ``--mu -0.5`` into ``--mu=-0.5`` so argparse does not read the
    value as an option."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if tok.startswith("--") and "=" not in tok and nxt is not None and nxt[:1] == "-" \
                and len(nxt) > 1 and (nxt[1].isdigit() or nxt[1] == "."):
            out.append(f"{tok}={nxt}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_glue_negative_values(argv))
    func, keys = COMMANDS[args.command]
    try:
        cfg = build_config(args)
        columns, rows, failures, n_ok = func(cfg)
    except ConfigError as exc:
        print(f"hylcycles: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HylError, ValueError, ArithmeticError) as exc:
        print(f"hylcycles: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    config = _canonical(cfg, keys + OUT_KEYS)
    text = render(args.command, config, columns, rows, cfg["format"], cfg["precision"])
    emit(text, getattr(args, "out", None))
    for msg in failures:
        print(f"hylcycles: {msg}", file=sys.stderr)
    if not failures:
        return EXIT_OK
    if n_ok == 0:
        return EXIT_DOMAIN
    if args.command == "phase-diagram":
        return EXIT_OK
    return EXIT_PARTIAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
