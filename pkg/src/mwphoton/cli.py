"""Command line front end: run / sweep / validate on TOML experiment files.

A config file is a single TOML document.  All rates are in units of the
detector's Gamma01 (which is fixed to 1), all times in units of 1/Gamma01.
The schema is strict: unknown keys or sections are hard errors, so a typo
cannot silently fall back to a default.

Subcommands
-----------
run <config> [--out DIR] [--seed U64] [--threads N]
    Simulate the configured ensembles and write trajectories.csv,
    summary.json and histogram.csv into DIR.  Reruns with the same
    effective config are byte-identical.
sweep <config> --axis name=v1,v2,... [--out DIR] [--seed U64] [--threads N]
    Repeat the run pipeline along exactly one axis; writes sweep.csv.
validate <config>
    Schema and sanity checks only; nothing is simulated.

Exit codes: 0 success, 2 invalid config or arguments, 3 numerical abort.
"""

import argparse
import copy
import hashlib
import json
import math
import os
import re
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - py<3.11
    import tomli as tomllib

from . import __version__
from . import detection, dynamics, lambda_scatter, slh, sources

DETECTOR_KINDS = ("single_transmon", "cascade", "jc_unit")
KINDS = DETECTOR_KINDS + ("lambda", "snr_analytic")


class ConfigError(Exception):
    """Carries a list of 'file:line: message' strings."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------
# value checks: real (finite float), rate (>= 0), posrate (> 0), posint,
# angle (finite float), window (pair of floats, increasing), choice tables.

_WAVEPACKET_KEYS = {
    "shape": ("choice", None, sources.SHAPES),
    "gamma_ph": ("posrate", None, None),
    "t_ph": ("real", None, None),
}
_GRID_KEYS = {
    "t0": ("real", None, None),
    "t1": ("real", None, None),
    "dt": ("posrate", None, None),
    "sample_stride": ("posint", 100, None),
}
_MEASUREMENT_KEYS = {
    "eta": ("unit", 1.0, None),
    "phi": ("real", math.pi / 2.0, None),
    "window": ("window", None, None),
    "filter": ("choice", "square", ("square", "matched")),
}
_ENSEMBLE_KEYS = {
    "M": ("posint", None, None),
    "base_seed": ("seed", 0, None),
}
_PHYSICS_KEYS = {
    "single_transmon": {
        "delta01": ("real", 0.0, None),
        "delta12": ("real", 0.0, None),
        "gamma12": ("rate", 2.0, None),
        "omega_p": ("real", 0.35, None),
    },
    "cascade": {
        "n_transmons": ("posint", None, None),
        "delta01": ("real", 0.0, None),
        "delta12": ("real", 0.0, None),
        "gamma12": ("rate", 2.0, None),
        "omega_p": ("real", 0.35, None),
    },
    "jc_unit": {
        "delta1": ("real", 0.0, None),
        "delta2": ("real", 0.0, None),
        "drive": ("real", None, None),
        "g": ("real", None, None),
        "gamma12": ("rate", 0.1, None),
        "kappa_b": ("posrate", None, None),
        "n_b_trunc": ("trunc", 10, None),
    },
    "lambda": {
        "gamma": ("rate", None, None),
        "V": ("real", None, None),
        "v_g": ("posrate", 1.0, None),
        "geometry": ("choice", "open_line", lambda_scatter.GEOMETRIES),
        "detuning": ("real", 0.0, None),
    },
}

# which sections each kind accepts / requires
_SECTIONS = {
    "single_transmon": {"wavepacket": True, "grid": True, "measurement": True,
                        "ensemble": True, "physics": False},
    "cascade": {"wavepacket": True, "grid": True, "measurement": True,
                "ensemble": True, "physics": True},
    "jc_unit": {"wavepacket": True, "grid": True, "measurement": True,
                "ensemble": True, "physics": True},
    "lambda": {"wavepacket": True, "physics": True},
    "snr_analytic": {"wavepacket": True, "grid": True, "measurement": True,
                     "physics": False},
}


def _line_of(text: str, key: str, section: str = "") -> int:
    """Best-effort line number of `key` (or `[section]`) in the raw TOML."""
    if text is None:
        return 0
    lines = text.splitlines()
    start = 0
    if section:
        pat = re.compile(r"^\s*\[" + re.escape(section) + r"\]")
        for i, ln in enumerate(lines):
            if pat.match(ln):
                start = i
                break
    pat = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    for i in range(start, len(lines)):
        if pat.match(lines[i]):
            return i + 1
    if section:
        return start + 1
    return 1


def _check_value(kind_of_check, key, value, extra):
    """Return (ok, coerced_value_or_None, message)."""
    if kind_of_check in ("real", "rate", "posrate", "unit", "angle"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return False, None, f"{key} must be a number"
        v = float(value)
        if not math.isfinite(v):
            return False, None, f"{key} must be finite"
        if kind_of_check == "rate" and v < 0:
            return False, None, f"{key} must be >= 0"
        if kind_of_check == "posrate" and v <= 0:
            return False, None, f"{key} must be > 0"
        if kind_of_check == "unit" and not 0.0 <= v <= 1.0:
            return False, None, f"{key} must lie in [0, 1]"
        return True, v, ""
    if kind_of_check in ("posint", "trunc", "seed"):
        if isinstance(value, bool) or not isinstance(value, int):
            return False, None, f"{key} must be an integer"
        v = int(value)
        if kind_of_check == "posint" and v < 1:
            return False, None, f"{key} must be >= 1"
        if kind_of_check == "trunc" and v < 2:
            return False, None, f"{key} must be >= 2"
        if kind_of_check == "seed" and not 0 <= v < 2 ** 64:
            return False, None, f"{key} must fit in an unsigned 64-bit integer"
        return True, v, ""
    if kind_of_check == "choice":
        if value not in extra:
            return False, None, f"{key} must be one of {list(extra)}"
        return True, value, ""
    if kind_of_check == "window":
        if (not isinstance(value, list) or len(value) != 2
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       for v in value)):
            return False, None, f"{key} must be a pair [t_i, t_f]"
        a, b = float(value[0]), float(value[1])
        if not (math.isfinite(a) and math.isfinite(b) and b > a):
            return False, None, f"{key} must satisfy t_f > t_i"
        return True, (a, b), ""
    raise AssertionError(kind_of_check)


def _apply_schema(section_name, raw, schema, text, problems, loc):
    out = {}
    for key, value in raw.items():
        if key not in schema:
            problems.append(f"{loc}:{_line_of(text, key, section_name)}: "
                            f"unknown key '{key}' in [{section_name}]")
            continue
        check, _, extra = schema[key]
        ok, coerced, msg = _check_value(check, key, value, extra)
        if not ok:
            problems.append(
                f"{loc}:{_line_of(text, key, section_name)}: {msg}")
        else:
            out[key] = coerced
    for key, (check, default, extra) in schema.items():
        if key in out or key in raw:
            continue
        if default is None:
            problems.append(f"{loc}:{_line_of(text, key, section_name)}: "
                            f"missing required key '{key}' in [{section_name}]")
        else:
            out[key] = default
    return out


def validate_config(cfg: dict, *, text: str = None, loc: str = "config"):
    """Check `cfg` against the schema; returns (normalized, warnings).

    Raises ConfigError with line-anchored messages on any violation.
    Normalization fills defaults and coerces numeric types; the raw dict is
    left untouched.
    """
    problems = []
    warnings = []
    norm = {}

    kind = cfg.get("kind")
    if kind not in KINDS:
        problems.append(f"{loc}:{_line_of(text, 'kind')}: kind must be one "
                        f"of {list(KINDS)} (got {kind!r})")
        raise ConfigError(problems)
    norm["kind"] = kind

    physics_kind = kind
    if kind == "snr_analytic":
        model = cfg.get("model")
        if model not in DETECTOR_KINDS:
            problems.append(f"{loc}:{_line_of(text, 'model')}: snr_analytic "
                            f"needs model = one of {list(DETECTOR_KINDS)}")
            raise ConfigError(problems)
        norm["model"] = model
        physics_kind = model

    allowed_top = {"kind", "model"} if kind == "snr_analytic" else {"kind"}
    sections = _SECTIONS[kind]
    for key, value in cfg.items():
        if key in allowed_top:
            continue
        if not isinstance(value, dict):
            problems.append(f"{loc}:{_line_of(text, key)}: unknown key "
                            f"'{key}' at top level")
        elif key not in sections:
            problems.append(f"{loc}:{_line_of(text, key)}: section [{key}] "
                            f"is not used by kind '{kind}'")
    for name, required in sections.items():
        if required and name not in cfg:
            problems.append(f"{loc}:1: missing required section [{name}] "
                            f"for kind '{kind}'")
    if problems:
        raise ConfigError(problems)

    schemas = {
        "wavepacket": _WAVEPACKET_KEYS,
        "grid": _GRID_KEYS,
        "measurement": _MEASUREMENT_KEYS,
        "ensemble": _ENSEMBLE_KEYS,
        "physics": _PHYSICS_KEYS[physics_kind],
    }
    for name in sections:
        norm[name] = _apply_schema(name, cfg.get(name, {}), schemas[name],
                                   text, problems, loc)
    if problems:
        raise ConfigError(problems)

    # cross-field checks and warnings
    if "grid" in norm:
        g = norm["grid"]
        if g["t1"] <= g["t0"]:
            problems.append(f"{loc}:{_line_of(text, 't1', 'grid')}: "
                            "grid needs t1 > t0")
        else:
            n = (g["t1"] - g["t0"]) / g["dt"]
            if abs(n - round(n)) > 1e-6 * max(1.0, abs(n)):
                problems.append(f"{loc}:{_line_of(text, 'dt', 'grid')}: "
                                "(t1 - t0) must be an integer number of dt")
    if "measurement" in norm and "grid" in norm and not problems:
        a, b = norm["measurement"]["window"]
        g = norm["grid"]
        if a < g["t0"] - 1e-9 or b > g["t1"] + 1e-9:
            problems.append(f"{loc}:{_line_of(text, 'window', 'measurement')}"
                            f": window [{a}, {b}] falls outside the grid")
    if problems:
        raise ConfigError(problems)

    rates = [1.0, norm["wavepacket"]["gamma_ph"]]
    for key in ("gamma12", "kappa_b", "omega_p", "drive", "g", "gamma"):
        if key in norm["physics"]:
            rates.append(abs(norm["physics"][key]))
    gamma_max = max(rates)
    if "grid" in norm:
        product = norm["grid"]["dt"] * gamma_max
        if product > 0.05:
            warnings.append(
                f"dt * Gamma_max = {product:.3g} > 0.05; the integrator "
                "subdivides internally but samples may be coarse")
    if norm["wavepacket"]["shape"] == sources.RISING_EXPONENTIAL \
            and "grid" in norm \
            and norm["grid"]["t1"] < norm["wavepacket"]["t_ph"]:
        warnings.append("grid ends before the rising exponential's cutoff; "
                        "most of the photon is never emitted")
    return norm, warnings


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def config_digest(cfg: dict) -> str:
    """sha256 over the canonical JSON form of the parsed config."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _assemble_detector(norm: dict, model_kind: str):
    wp = sources.make_wavepacket(norm["wavepacket"]["shape"],
                                 norm["wavepacket"]["gamma_ph"],
                                 norm["wavepacket"]["t_ph"])
    kappa = sources.kappa_of_t(wp)
    phys = norm["physics"]
    if model_kind == "single_transmon":
        net = slh.single_transmon_network(
            delta01=phys["delta01"], delta12=phys["delta12"],
            gamma12=phys["gamma12"], omega_p=phys["omega_p"], kappa=kappa)
    elif model_kind == "cascade":
        net = slh.cascade_network(
            phys["n_transmons"], delta01=phys["delta01"],
            delta12=phys["delta12"], gamma12=phys["gamma12"],
            omega_p=phys["omega_p"], kappa=kappa)
    elif model_kind == "jc_unit":
        net = slh.jc_unit_network(
            delta1=phys["delta1"], delta2=phys["delta2"], drive=phys["drive"],
            g=phys["g"], gamma12=phys["gamma12"], kappa_a=kappa,
            kappa_b=phys["kappa_b"], n_b_trunc=phys["n_b_trunc"])
    else:
        raise AssertionError(model_kind)
    kept = dynamics.states_with_count_at_most(
        net.layout, slh.control_band_weights(net.layout), 1)
    g = norm["grid"]
    grid = dynamics.TimeGrid(g["t0"], g["t1"], g["dt"],
                             sample_stride=g["sample_stride"])
    return net, kept, grid


def _filter_for(norm, net, kept, grid, model_kind):
    m = norm["measurement"]
    window = tuple(m["window"])
    if m["filter"] == "square":
        return detection.square_filter(window)
    # with an always-on probe drive the empty input is not dark; match the
    # difference current in that case
    rho_ref = net.initial_state(0) if model_kind == "jc_unit" else None
    return detection.matched_filter_template(
        net.generator, net.meas_op, m["eta"], m["phi"],
        net.initial_state(1), grid, window, rho_ref=rho_ref, kept_states=kept)


def run_detector(norm: dict, *, base_seed=None, threads=1):
    """Full two-ensemble pipeline; returns (DetectionSummary, res0, res1, extras)."""
    model_kind = norm.get("model", norm["kind"])
    net, kept, grid = _assemble_detector(norm, model_kind)
    fspec = _filter_for(norm, net, kept, grid, model_kind)
    fvals = fspec.values_on(grid.times()[:-1])
    m = norm["measurement"]
    M = norm["ensemble"]["M"]
    seed0 = norm["ensemble"]["base_seed"] if base_seed is None else int(base_seed)
    res0, _ = dynamics.run_ensemble(
        net.generator, net.meas_op, m["eta"], m["phi"], net.initial_state(0),
        grid, fvals, M, seed0, 0, kept_states=kept, threads=threads)
    res1, _ = dynamics.run_ensemble(
        net.generator, net.meas_op, m["eta"], m["phi"], net.initial_state(1),
        grid, fvals, M, seed0 + M, 1, kept_states=kept, threads=threads)
    s0 = np.array([r.S for r in res0])
    s1 = np.array([r.S for r in res1])
    summary = detection.summarize(s0, s1)
    extras = {"window": list(fspec.window), "filter": m["filter"],
              "eta": m["eta"], "phi": m["phi"], "M": M, "base_seed": seed0}
    return summary, res0, res1, extras


def run_analytic(norm: dict) -> dict:
    net, kept, grid = _assemble_detector(norm, norm["model"])
    fspec = _filter_for(norm, net, kept, grid, norm["model"])
    m = norm["measurement"]
    window = tuple(m["window"])
    fvals = None
    if fspec.kind == "matched":
        fvals = fspec.values_on(grid.times()[:-1])
    moments = dynamics.snr_analytic(
        net.generator, net.meas_op, m["eta"], m["phi"], net.initial_state(1),
        grid, window, filter_values=fvals, kept_states=kept)
    if norm["model"] != "jc_unit":
        return {"snr": moments.snr, "e_s1": moments.e_s1,
                "var_s1": moments.var_s1, "e_s0": moments.e_s0,
                "var_s0": moments.var_s0, "window": list(moments.window)}
    # the probe drive keeps the n = 0 ensemble off the shot-noise floor, so
    # both ensembles need the regression treatment
    ref = dynamics.snr_analytic(
        net.generator, net.meas_op, m["eta"], m["phi"], net.initial_state(0),
        grid, window, filter_values=fvals, kept_states=kept)
    snr = (moments.e_s1 - ref.e_s1) / math.sqrt(moments.var_s1 + ref.var_s1)
    return {"snr": snr, "e_s1": moments.e_s1, "var_s1": moments.var_s1,
            "e_s0": ref.e_s1, "var_s0": ref.var_s1,
            "window": list(moments.window)}


def run_lambda(norm: dict) -> dict:
    phys = norm["physics"]
    cfg = lambda_scatter.LambdaConfig(
        gamma=phys["gamma"], V=phys["V"], v_g=phys["v_g"],
        geometry=phys["geometry"], detuning=phys["detuning"])
    wp = sources.make_wavepacket(norm["wavepacket"]["shape"],
                                 norm["wavepacket"]["gamma_ph"],
                                 norm["wavepacket"]["t_ph"])
    p_g = lambda_scatter.scatter_efficiency(cfg, wp)
    return {"p_g": p_g, "geometry": phys["geometry"],
            "gamma_r": cfg.gamma_r}


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return repr(float(x))


def _write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _trajectories_csv(res0, res1) -> str:
    lines = ["traj_index,seed,n_control,S"]
    for i, r in enumerate(res0 + res1):
        lines.append(f"{i},{r.seed},{r.n_control},{_fmt(r.S)}")
    return "\n".join(lines) + "\n"


def _histogram_csv(s0, s1, n_bins: int = 61) -> str:
    pooled = np.concatenate([s0, s1])
    mu = float(np.mean(pooled))
    sigma = float(np.std(pooled, ddof=1)) if pooled.size > 1 else 0.0
    if sigma == 0.0:
        sigma = 0.125
    lo, hi = mu - 4.0 * sigma, mu + 4.0 * sigma
    edges = np.linspace(lo, hi, n_bins + 1)
    c0, _ = np.histogram(np.clip(s0, lo, hi), bins=edges)
    c1, _ = np.histogram(np.clip(s1, lo, hi), bins=edges)
    lines = [f"# bins={n_bins} lo={_fmt(lo)} hi={_fmt(hi)} "
             "(pooled mean +- 4 sigma; outliers clipped into edge bins)",
             "bin_left,count_n0,count_n1"]
    for k in range(n_bins):
        lines.append(f"{_fmt(edges[k])},{int(c0[k])},{int(c1[k])}")
    return "\n".join(lines) + "\n"


def _summary_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _default_out(config_path: str) -> str:
    stem, _ = os.path.splitext(config_path)
    return stem + "_out"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _load(config_path: str):
    try:
        with open(config_path, "rb") as fh:
            raw_bytes = fh.read()
    except OSError as exc:
        raise ConfigError([f"{config_path}:0: cannot read config: {exc}"])
    text = raw_bytes.decode("utf-8", errors="replace")
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{config_path}:0: TOML parse error: {exc}"])
    return cfg, text


def cmd_run(args) -> int:
    cfg, text = _load(args.config)
    if args.seed is not None:
        if cfg.get("kind") in DETECTOR_KINDS:
            cfg.setdefault("ensemble", {})["base_seed"] = args.seed
        else:
            print("warning: --seed only affects ensemble runs; ignored",
                  file=sys.stderr)
    norm, warnings = validate_config(cfg, text=text, loc=args.config)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    digest = config_digest(cfg)
    out_dir = args.out or _default_out(args.config)
    os.makedirs(out_dir, exist_ok=True)

    kind = norm["kind"]
    if kind == "lambda":
        payload = run_lambda(norm)
        payload.update(kind=kind, config_digest=digest,
                       code_version=__version__)
        _write_atomic(os.path.join(out_dir, "summary.json"),
                      _summary_json(payload))
        print(f"p_g = {payload['p_g']:.6f}  ({out_dir}/summary.json)")
        return 0
    if kind == "snr_analytic":
        payload = run_analytic(norm)
        payload.update(kind=kind, model=norm["model"], config_digest=digest,
                       code_version=__version__)
        _write_atomic(os.path.join(out_dir, "summary.json"),
                      _summary_json(payload))
        print(f"snr = {payload['snr']:.6f}  ({out_dir}/summary.json)")
        return 0

    summary, res0, res1, extras = run_detector(norm, threads=args.threads)
    payload = {
        "kind": kind,
        "snr": summary.snr,
        "snr_stderr": summary.snr_stderr,
        "fidelity": summary.fidelity,
        "thresholds": {"s0": summary.s0_threshold, "s1": summary.s1_threshold},
        "n0": summary.n0,
        "n1": summary.n1,
        "config_digest": digest,
        "code_version": __version__,
    }
    payload.update(extras)
    _write_atomic(os.path.join(out_dir, "trajectories.csv"),
                  _trajectories_csv(res0, res1))
    _write_atomic(os.path.join(out_dir, "summary.json"),
                  _summary_json(payload))
    _write_atomic(os.path.join(out_dir, "histogram.csv"),
                  _histogram_csv(summary.samples0, summary.samples1))
    print(f"snr = {summary.snr:.4f} +- {summary.snr_stderr:.4f}, "
          f"fidelity = {summary.fidelity:.4f}  ({out_dir})")
    return 0


_AXIS_SHORTHAND = ("wavepacket", "grid", "measurement", "ensemble", "physics")


def _resolve_axis(cfg: dict, name: str):
    """Map an axis name to (section, key); dotted names are explicit."""
    if "." in name:
        section, key = name.split(".", 1)
        return section, key
    hits = [s for s in _AXIS_SHORTHAND
            if isinstance(cfg.get(s), dict) and name in cfg[s]]
    if len(hits) == 1:
        return hits[0], name
    if len(hits) > 1:
        raise ConfigError([f"axis '{name}' is ambiguous (found in "
                           f"{hits}); use section.key"])
    # fall back to the schema so axes can target defaulted keys
    kind = cfg.get("kind")
    physics_kind = cfg.get("model", kind)
    schema_hits = []
    for s, table in (("wavepacket", _WAVEPACKET_KEYS), ("grid", _GRID_KEYS),
                     ("measurement", _MEASUREMENT_KEYS),
                     ("ensemble", _ENSEMBLE_KEYS),
                     ("physics", _PHYSICS_KEYS.get(physics_kind, {}))):
        if name in table:
            schema_hits.append(s)
    if len(schema_hits) == 1:
        return schema_hits[0], name
    raise ConfigError([f"axis '{name}' does not name a config key"])


def cmd_sweep(args) -> int:
    cfg, text = _load(args.config)
    if args.seed is not None and cfg.get("kind") in DETECTOR_KINDS:
        cfg.setdefault("ensemble", {})["base_seed"] = args.seed
    if "=" not in args.axis:
        raise ConfigError(["--axis must look like name=v1,v2,..."])
    name, _, valstr = args.axis.partition("=")
    name = name.strip()
    raw_vals = [v for v in (s.strip() for s in valstr.split(",")) if v]
    if not raw_vals:
        raise ConfigError([f"axis '{name}' has an empty value list"])

    base_kind = cfg.get("kind")
    if base_kind == "snr_analytic":
        raise ConfigError(["sweep needs ensembles; kind 'snr_analytic' is "
                           "for the run subcommand"])
    section, key = _resolve_axis(cfg, name)

    out_dir = args.out or _default_out(args.config)
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for v in raw_vals:
        point = copy.deepcopy(cfg)
        number = float(v)
        if number == int(number) and key in ("n_transmons", "M", "base_seed",
                                             "n_b_trunc", "sample_stride"):
            number = int(number)
        point.setdefault(section, {})[key] = number
        norm, _ = validate_config(point, text=None,
                                  loc=f"{args.config}[{name}={v}]")
        if norm["kind"] == "lambda":
            payload = run_lambda(norm)
            rows.append((number, payload["p_g"], None))
        else:
            summary, _, _, _ = run_detector(norm, threads=args.threads)
            rows.append((number, summary.snr, summary.fidelity))
        tail = rows[-1]
        print(f"{name} = {v}: " + (
            f"p_g = {tail[1]:.6f}" if tail[2] is None
            else f"snr = {tail[1]:.4f}, fidelity = {tail[2]:.4f}"))

    if rows and rows[0][2] is None:
        lines = ["axis_value,p_g"]
        lines += [f"{_fmt(a)},{_fmt(b)}" for a, b, _ in rows]
    else:
        lines = ["axis_value,snr,fidelity"]
        lines += [f"{_fmt(a)},{_fmt(b)},{_fmt(c)}" for a, b, c in rows]
    _write_atomic(os.path.join(out_dir, "sweep.csv"),
                  "\n".join(lines) + "\n")
    print(f"wrote {out_dir}/sweep.csv ({len(rows)} points)")
    return 0


def cmd_validate(args) -> int:
    cfg, text = _load(args.config)
    norm, warnings = validate_config(cfg, text=text, loc=args.config)
    kind = norm["kind"]
    print(f"ok: kind = {kind}" + (f" (model = {norm['model']})"
                                  if kind == "snr_analytic" else ""))
    if "grid" in norm:
        g = norm["grid"]
        n = int(round((g["t1"] - g["t0"]) / g["dt"]))
        print(f"ok: grid has {n} steps of dt = {g['dt']}")
    wp = norm["wavepacket"]
    print(f"ok: wavepacket {wp['shape']} (gamma_ph = {wp['gamma_ph']}, "
          f"t_ph = {wp['t_ph']})")
    if "ensemble" in norm:
        print(f"ok: M = {norm['ensemble']['M']} trajectories per ensemble")
    for w in warnings:
        print(f"warning: {w}")
    print(f"config digest {config_digest(cfg)[:16]}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mwphoton",
        description="Itinerant microwave photon detector simulations.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="TOML experiment file")
        sp.add_argument("--out", default=None, help="output directory "
                        "(default: <config stem>_out)")
        sp.add_argument("--seed", type=int, default=None,
                        help="override ensemble.base_seed")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker processes for the ensemble loop")

    sp = sub.add_parser("run", help="simulate one configuration")
    common(sp)
    sp = sub.add_parser("sweep", help="repeat along one axis")
    common(sp)
    sp.add_argument("--axis", required=True,
                    help="name=v1,v2,... (dotted section.key or bare key)")
    sp = sub.add_parser("validate", help="schema and sanity checks only")
    sp.add_argument("config", help="TOML experiment file")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_validate(args)
    except ConfigError as exc:
        for line in exc.problems:
            print(f"error: {line}", file=sys.stderr)
        return 2
    except dynamics.NumericalInstabilityError as exc:
        print(f"error: numerical abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
