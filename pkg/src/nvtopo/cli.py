"""Command-line driver: dispersion, bloch, spectrum, nu-sweep and emulate runs.

A run reads a strict JSON config, applies flag overrides, writes tab-separated
tables to ``--out`` and finishes with ``manifest.json`` (resolved config,
version, wall-clock time and a sha256 per output file). Every table starts
with a commented header carrying the sha256 of the canonical config, so two
runs of the same config produce byte-identical tables.
"""
import argparse
import copy
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import ConvergenceError, NoiseModel, ReadoutModel, sigma_from_t2star
from .nv import DEFAULT_SCALE, SUBSPACE
from .spectroscopy import (
    DEFAULT_M_MAX, DEFAULT_ZERO_PAD, AliasingError, NoPeakError, ProtocolConfig, find_peaks,
    measure_topological_number, probe_weights, resolved_peaks, sample_series, spectrum,
)
from .wire import (
    CriticalPointError, QwParams, bloch_trajectory, classify_trajectory, dispersion,
)

KINDS = ("dispersion", "bloch", "spectrum", "nu-sweep", "emulate")
EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_FIT = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


# -- config -------------------------------------------------------------------

DEFAULTS = {
    "kind": None,
    "params": {"mu": None, "delta": 0.165, "bx": 1.3},
    "mu_range": None,
    "p_grid": None,
    "p": 0.0,
    "probe": 5,
    "probes": [4, 5],
    "reverse_mw": False,
    "protocol": {
        "mode": "ideal", "m_max": DEFAULT_M_MAX, "tau": None, "window": "rect",
        "zero_pad": DEFAULT_ZERO_PAD, "theta_points": 8, "scale": DEFAULT_SCALE, "dt_max": None,
    },
    "noise": {
        "enabled": False, "t2star": 3.0, "n_realizations": 1000, "crosstalk": False,
        "reference_tracks_electron": False,
    },
    "readout": {"pl": {}, "shots": 100000, "shot_noise": False},
    "seed": 0,
    "workers": None,
    "out": "out",
}

GRID_KEYS = {"start", "stop", "num", "step"}
DEFAULT_P_GRID = {
    "dispersion": {"start": 0.0, "stop": 2.0, "num": 21},
    "bloch": {"start": 0.0, "stop": 20.0, "num": 2001},
}


def _merge(defaults, given, path):
    if not isinstance(given, dict):
        raise ConfigError(f"{path or 'config'}: expected an object, got {type(given).__name__}")
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"{where}: unknown key")
        if isinstance(defaults[key], dict) and key not in ("pl",):
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = value
    return out


def _number(value, where, integer=False, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _flag(value, where):
    if not isinstance(value, bool):
        raise ConfigError(f"{where}: expected true/false, got {value!r}")
    return value


def grid_values(spec, where):
    """Inclusive grid from a list or {"start", "stop", "num" | "step"}."""
    if isinstance(spec, list):
        vals = np.array([_number(v, f"{where}[{i}]") for i, v in enumerate(spec)])
    elif isinstance(spec, dict):
        extra = set(spec) - GRID_KEYS
        if extra:
            raise ConfigError(f"{where}.{sorted(extra)[0]}: unknown key")
        if ("num" in spec) == ("step" in spec):
            raise ConfigError(f"{where}: give exactly one of 'num' or 'step'")
        start = _number(spec.get("start"), f"{where}.start")
        stop = _number(spec.get("stop"), f"{where}.stop")
        if "num" in spec:
            num = _number(spec["num"], f"{where}.num", integer=True)
            vals = np.linspace(start, stop, max(num, 0))
        else:
            step = _number(spec["step"], f"{where}.step")
            if step == 0 or (stop - start) / step < -1e-9:
                vals = np.array([])
            else:
                n = int(np.floor((stop - start) / step + 1e-9)) + 1
                vals = np.round(start + step * np.arange(n), 12)
    else:
        raise ConfigError(f"{where}: expected a list or a range object")
    if vals.size == 0:
        raise ConfigError(f"{where}: empty range")
    d = np.diff(vals)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ConfigError(f"{where}: grid must be strictly monotone")
    return vals


def validate(cfg):
    """Check types and ranges; returns the config (already merged with defaults)."""
    kind = cfg["kind"]
    if kind not in KINDS:
        raise ConfigError(f"kind: must be one of {', '.join(KINDS)}, got {kind!r}")
    par = cfg["params"]
    for key in ("delta", "bx"):
        _number(par[key], f"params.{key}")
    if kind == "nu-sweep":
        if cfg["mu_range"] is None:
            raise ConfigError("mu_range: required for nu-sweep")
        mus = grid_values(cfg["mu_range"], "mu_range")
        if np.any(mus >= 0):
            raise ConfigError("mu_range: mu must be negative")
    else:
        _number(par["mu"], "params.mu")
        try:
            QwParams(par["mu"], par["delta"], par["bx"])
        except ValueError as exc:
            raise ConfigError(f"params: {exc}") from None
    if kind in DEFAULT_P_GRID:
        if cfg["p_grid"] is None:
            cfg["p_grid"] = copy.deepcopy(DEFAULT_P_GRID[kind])
        ps = grid_values(cfg["p_grid"], "p_grid")
        if np.any(ps < 0):
            raise ConfigError("p_grid: only p >= 0 is simulated (negative p is mirrored)")
    _number(cfg["p"], "p")
    for lab_where, lab in [("probe", cfg["probe"])] + [(f"probes[{i}]", v) for i, v in enumerate(cfg["probes"])]:
        if lab not in SUBSPACE:
            raise ConfigError(f"{lab_where}: probe must be one of {SUBSPACE}, got {lab!r}")
    _flag(cfg["reverse_mw"], "reverse_mw")
    pro = cfg["protocol"]
    if pro["mode"] not in ("ideal", "emulated"):
        raise ConfigError(f"protocol.mode: must be 'ideal' or 'emulated', got {pro['mode']!r}")
    if _number(pro["m_max"], "protocol.m_max", integer=True) < 8:
        raise ConfigError("protocol.m_max: must be >= 8")
    if pro["tau"] is not None and not _number(pro["tau"], "protocol.tau") > 0:
        raise ConfigError("protocol.tau: must be positive")
    if pro["window"] not in ("rect", "hann"):
        raise ConfigError(f"protocol.window: must be 'rect' or 'hann', got {pro['window']!r}")
    if _number(pro["zero_pad"], "protocol.zero_pad", integer=True) < 1:
        raise ConfigError("protocol.zero_pad: must be >= 1")
    if _number(pro["theta_points"], "protocol.theta_points", integer=True) < 4:
        raise ConfigError("protocol.theta_points: must be >= 4")
    if not _number(pro["scale"], "protocol.scale") > 0:
        raise ConfigError("protocol.scale: must be positive")
    if pro["dt_max"] is not None and not _number(pro["dt_max"], "protocol.dt_max") > 0:
        raise ConfigError("protocol.dt_max: must be positive")
    nz = cfg["noise"]
    for key in ("enabled", "crosstalk", "reference_tracks_electron"):
        _flag(nz[key], f"noise.{key}")
    if not _number(nz["t2star"], "noise.t2star") > 0:
        raise ConfigError("noise.t2star: must be positive")
    if _number(nz["n_realizations"], "noise.n_realizations", integer=True) < 1:
        raise ConfigError("noise.n_realizations: must be >= 1")
    ro = cfg["readout"]
    if not isinstance(ro["pl"], dict):
        raise ConfigError("readout.pl: expected an object of level -> PL")
    for key, val in ro["pl"].items():
        if key not in [str(lab) for lab in range(1, 10)]:
            raise ConfigError(f"readout.pl.{key}: level must be 1..9")
        _number(val, f"readout.pl.{key}")
    if _number(ro["shots"], "readout.shots", integer=True) < 1:
        raise ConfigError("readout.shots: must be >= 1")
    _flag(ro["shot_noise"], "readout.shot_noise")
    if _number(cfg["seed"], "seed", integer=True) < 0:
        raise ConfigError("seed: must be a non-negative integer")
    if cfg["workers"] is not None and _number(cfg["workers"], "workers", integer=True) < 1:
        raise ConfigError("workers: must be >= 1")
    if not isinstance(cfg["out"], str):
        raise ConfigError("out: expected a path string")
    return cfg


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return raw


def resolve_config(raw, overrides=None):
    """Merge ``raw`` into the defaults, apply flag overrides and validate."""
    cfg = _merge(DEFAULTS, raw, "")
    for key, value in (overrides or {}).items():
        node = cfg
        *head, last = key.split(".")
        for h in head:
            node = node[h]
        node[last] = value
    return validate(cfg)


def config_hash(cfg) -> str:
    """sha256 of the canonical config, ignoring where and how it runs."""
    body = {k: v for k, v in cfg.items() if k not in ("out", "workers")}
    text = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# -- model objects from config ------------------------------------------------

def _noise(cfg, seed) -> NoiseModel:
    nz = cfg["noise"]
    if not nz["enabled"]:
        return NoiseModel(seed=seed, crosstalk=nz["crosstalk"])
    return NoiseModel(sigma_b=sigma_from_t2star(nz["t2star"]), n_realizations=nz["n_realizations"],
                      seed=seed, crosstalk=nz["crosstalk"],
                      reference_tracks_electron=nz["reference_tracks_electron"])


def _readout(cfg) -> ReadoutModel:
    ro = cfg["readout"]
    pl = dict(ReadoutModel().pl)
    pl.update({int(k): float(v) for k, v in ro["pl"].items()})
    return ReadoutModel(pl=pl, shots=ro["shots"], shot_noise=ro["shot_noise"])


def _protocol(cfg, mode) -> ProtocolConfig:
    pro = cfg["protocol"]
    n = pro["theta_points"]
    return ProtocolConfig(mode=mode, m_max=pro["m_max"], tau=pro["tau"], window=pro["window"],
                          zero_pad=pro["zero_pad"], scale=pro["scale"],
                          theta_grid=tuple(2 * np.pi * np.arange(n) / n), readout=_readout(cfg),
                          dt_max=pro["dt_max"])


def _mode(cfg) -> str:
    if cfg["kind"] == "emulate" or cfg["noise"]["enabled"] or cfg["noise"]["crosstalk"]:
        return "emulated"
    return cfg["protocol"]["mode"]


def point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def _params(cfg, mu=None) -> QwParams:
    par = cfg["params"]
    return QwParams(par["mu"] if mu is None else mu, par["delta"], par["bx"])


# -- output -------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    return "nan" if np.isnan(x) else f"{x:.12e}"


def write_table(path: Path, header: dict, columns, rows):
    lines = [f"# {k}: {v}" for k, v in header.items()]
    lines.append("# " + "\t".join(columns))
    lines += ["\t".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _map(fn, args, workers):
    if workers and workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, args))
    return [fn(a) for a in args]


# -- runs ---------------------------------------------------------------------

def _gate(pk, spec):
    return max(0.5 * spec.resolution, 1.18 * pk.sigma)


def _band_index(pk, spec, bands):
    j = int(np.argmin(np.abs(bands - pk.center)))
    return j + 1 if abs(bands[j] - pk.center) <= _gate(pk, spec) else 0


def _dispersion_point(task):
    cfg, idx, p = task
    params = _params(cfg)
    bands = dispersion(params, [p])[0]
    rows = []
    tiers = [("ideal", None)]
    if cfg["noise"]["enabled"] or cfg["noise"]["crosstalk"]:
        tiers.append(("noisy", "emulated"))
    for tier, mode in tiers:
        for probe in cfg["probes"]:
            if mode is None:
                series = sample_series(params, p, probe, _protocol(cfg, "ideal"))
                spec = spectrum(series, cfg["protocol"]["window"], cfg["protocol"]["zero_pad"])
                peaks = find_peaks(spec)
            else:
                noise = _noise(cfg, point_seed(cfg["seed"], len(SUBSPACE) * idx + SUBSPACE.index(probe)))
                series = sample_series(params, p, probe, _protocol(cfg, mode), noise=noise)
                spec = spectrum(series, cfg["protocol"]["window"], cfg["protocol"]["zero_pad"])
                peaks = resolved_peaks(spec, (spec.energies[0], spec.energies[-1]))
            for pk in sorted(peaks, key=lambda q: q.center):
                rows.append((p, tier, probe, pk.center, pk.sigma, pk.height, pk.center_error,
                             _band_index(pk, spec, bands), spec.resolution))
    return bands, rows


def run_dispersion(cfg, out: Path, header):
    ps = grid_values(cfg["p_grid"], "p_grid")
    results = _map(_dispersion_point, [(cfg, i, p) for i, p in enumerate(ps)], cfg["workers"])
    band_rows, peak_rows = [], []
    for p, (bands, rows) in zip(ps, results):
        band_rows.append((p, *bands, 0))
        peak_rows += [(*r, 0) for r in rows]
    for p, (bands, rows) in zip(ps, results):
        if p > 0:
            band_rows.append((-p, *bands, 1))
            peak_rows += [(-r[0], *r[1:], 1) for r in rows]
    order = np.argsort([r[0] for r in band_rows], kind="stable")
    band_rows = [band_rows[i] for i in order]
    peak_rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    files = [
        write_table(out / "bands.tsv", {**header, "units": "QW energy"},
                    ["p", "E1", "E2", "E3", "E4", "mirrored"], band_rows),
        write_table(out / "peaks.tsv", {**header, "units": "QW energy; band 0 = unmatched"},
                    ["p", "tier", "probe", "center", "sigma", "height", "center_error", "band",
                     "resolution", "mirrored"], peak_rows),
    ]
    return files, {"n_points": int(len(ps))}


def run_bloch(cfg, out: Path, header):
    params = _params(cfg)
    traj = bloch_trajectory(params, grid_values(cfg["p_grid"], "p_grid"))
    kind = classify_trajectory(traj)
    rows = [(p, *v, n) for p, v, n in zip(traj.momenta, traj.vectors, traj.raw_length)]
    path = write_table(out / "bloch.tsv", {**header, "classification": kind},
                       ["p", "x", "y", "z", "raw_length"], rows)
    return [path], {"classification": kind}


def run_spectrum(cfg, out: Path, header):
    params = _params(cfg)
    mode = _mode(cfg)
    p, probe, rev = cfg["p"], cfg["probe"], cfg["reverse_mw"]
    series = sample_series(params, p, probe, _protocol(cfg, mode), reverse_mw=rev,
                           noise=_noise(cfg, point_seed(cfg["seed"], 0)))
    spec = spectrum(series, cfg["protocol"]["window"], cfg["protocol"]["zero_pad"])
    if mode == "ideal":
        peaks = find_peaks(spec)
    else:
        peaks = resolved_peaks(spec, (spec.energies[0], spec.energies[-1]))
    energies, weights = probe_weights(params, p, probe, rev)
    hdr = {**header, "mode": mode, "probe": probe, "p": _fmt(p), "reverse_mw": int(rev)}
    low = series.low_confidence if series.low_confidence is not None else np.zeros(len(series.values), bool)
    files = [
        write_table(out / "series.tsv", {**hdr, "units": "t in QW time units"},
                    ["m", "t", "re_a", "im_a", "low_confidence"],
                    [(m, m * series.tau, a.real, a.imag, f) for m, (a, f) in enumerate(zip(series.values, low))]),
        write_table(out / "spectrum.tsv", {**hdr, "units": "QW energy"},
                    ["energy", "amplitude", "re", "im"],
                    [(e, a, v.real, v.imag) for e, a, v in zip(spec.energies, spec.amplitude, spec.values)]),
        write_table(out / "fits.tsv", {**hdr, "units": "QW energy"},
                    ["center", "sigma", "height", "center_error", "baseline", "band", "exact", "weight"],
                    [(pk.center, pk.sigma, pk.height, pk.center_error, pk.baseline,
                      _band_index(pk, spec, energies),
                      energies[_band_index(pk, spec, energies) - 1] if _band_index(pk, spec, energies) else np.nan,
                      weights[_band_index(pk, spec, energies) - 1] if _band_index(pk, spec, energies) else np.nan)
                     for pk in sorted(peaks, key=lambda q: q.center)]),
    ]
    if series.pl_curves is not None:
        rows = [(m, th, series.pl_curves[m, k]) for m in range(series.pl_curves.shape[0])
                for k, th in enumerate(series.theta)]
        files.append(write_table(out / "pl.tsv", {**hdr, "units": "PL per shot"}, ["m", "theta", "pl"], rows))
    return files, {"mode": mode, "n_peaks": len(peaks)}


def _nu_point(task):
    cfg, idx, mu = task
    params = _params(cfg, mu)
    mode = _mode(cfg)
    try:
        nu, meta = measure_topological_number(params, _protocol(cfg, mode),
                                              noise=_noise(cfg, point_seed(cfg["seed"], idx)))
    except (NoPeakError, AliasingError, ConvergenceError) as exc:
        return (mu, np.nan, np.nan, np.nan, f"failed:{type(exc).__name__}")
    return (mu, nu, meta["E_c"], meta["sigma"], "ok")


def run_nu_sweep(cfg, out: Path, header):
    mus = grid_values(cfg["mu_range"], "mu_range")
    rows = _map(_nu_point, [(cfg, i, mu) for i, mu in enumerate(mus)], cfg["workers"])
    path = write_table(out / "nu_sweep.tsv", {**header, "mode": _mode(cfg), "units": "QW energy"},
                       ["mu", "nu_bar", "E_c", "sigma", "status"], rows)
    return [path], {"n_points": len(rows), "n_failed": sum(r[4] != "ok" for r in rows)}


RUNNERS = {
    "dispersion": run_dispersion, "bloch": run_bloch, "spectrum": run_spectrum,
    "nu-sweep": run_nu_sweep, "emulate": run_spectrum,
}


def execute(cfg, out=None):
    """Run a resolved config; returns the manifest dict."""
    out = Path(out or cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    chash = config_hash(cfg)
    header = {"nvtopo": f"{cfg['kind']} v{__version__}", "config_sha256": chash}
    files, results = RUNNERS[cfg["kind"]](cfg, out, header)
    manifest = {
        "config": cfg,
        "config_sha256": chash,
        "version": __version__,
        "wall_clock_s": time.perf_counter() - start,
        "results": results,
        "outputs": {f.name: sha256_file(f) for f in files},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# -- argument parsing ---------------------------------------------------------

def _on_off(text):
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def build_parser():
    ap = argparse.ArgumentParser(prog="nvtopo", description=__doc__.splitlines()[0])
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--config", help="JSON run config")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    ap.add_argument("--noise", type=_on_off, help="quasi-static dephasing on|off")
    ap.add_argument("--crosstalk", type=_on_off, help="lab-frame crosstalk tier on|off")
    ap.add_argument("--shots", type=int, help="shots per PL point (turns on shot noise)")
    ap.add_argument("--ideal", action="store_true", help="ideal protocol, no noise")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config) if args.config else {}
        if "kind" in raw and raw["kind"] != args.kind:
            raise ConfigError(f"kind: config says {raw['kind']!r} but the subcommand is {args.kind!r}")
        raw = {**raw, "kind": args.kind}
        over = {}
        if args.out is not None:
            over["out"] = args.out
        if args.seed is not None:
            over["seed"] = args.seed
        over["workers"] = args.workers if args.workers is not None else raw.get("workers", os.cpu_count())
        if args.noise is not None:
            over["noise.enabled"] = args.noise
        if args.crosstalk is not None:
            over["noise.crosstalk"] = args.crosstalk
        if args.shots is not None:
            over["readout.shots"] = args.shots
            over["readout.shot_noise"] = True
        if args.ideal:
            over.update({"protocol.mode": "ideal", "noise.enabled": False, "noise.crosstalk": False})
        cfg = resolve_config(raw, over)
        manifest = execute(cfg)
    except (ConfigError, CriticalPointError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (NoPeakError, AliasingError) as exc:
        print(f"fit failure: {exc}", file=sys.stderr)
        return EXIT_FIT
    print(json.dumps({"out": cfg["out"], "outputs": manifest["outputs"], "results": manifest["results"]},
                     indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
