"""Scenario files: load, validate and run simulations described in YAML."""
from __future__ import annotations

import copy
import json
import math
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .circuit import Component, Netlist, assemble_dae, reference_netlist
from .emt import build_stepped, integrate, write_trajectory_csv, read_trajectory_csv
from .errors import ConfigError, DecoupledPartitionWarning
from .hetero import HeteroConfig, hetero_run
from .partition import DEFAULT_SPLIT, circuit_partition, replicate
from .schwarz import SchwarzConfig, ddm_integrate, ddm_integrate_ts, exact_error_operator, spectrum_report
from .ts import HarmonicSet, build_ts, reconstruct, ts_integrate, write_phasors_csv

SCHEMA = {
    "name": None,
    "circuit": {"netlist": None, "amplitude": None, "nodes": None, "ground": None,
                "omega0": None, "components": None, "variable_order": None, "events": None},
    "model": {"kind": None, "dt": None, "dT": None, "harmonics": None, "t0": None, "t1": None},
    "partition": {"enabled": None, "split": None, "overlap": None},
    "schwarz": {"mode": None, "max_iter": None, "stagnation_tol": None, "accel": None,
                "frozen_operator": None},
    "hetero": {"m": None, "mode": None, "n_iterates": None, "emt_side": None, "warmup": None,
               "harmonics": None, "accelerate": None},
    "output": {"dir": None, "stem": None},
}

DEFAULTS = {
    "name": "scenario",
    "circuit": {"netlist": "reference", "amplitude": 100.0, "ground": 1, "events": []},
    "model": {"kind": "emt", "dt": 1e-4, "dT": 2e-3, "harmonics": [0, 1], "t0": 0.0, "t1": 0.1},
    "partition": {"enabled": False, "split": list(DEFAULT_SPLIT), "overlap": 0},
    "schwarz": {"mode": None, "max_iter": 9, "stagnation_tol": 1e-13, "accel": "exact",
                "frozen_operator": False},
    "hetero": {},
    "output": {"dir": "out", "stem": None},
}

_COMPONENT_KEYS = {"kind", "nodes", "value", "name", "amplitude", "omega", "zs"}


def _check_keys(cfg: dict, schema: dict, where: str = "") -> None:
    if not isinstance(cfg, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping")
    for key, val in cfg.items():
        path = f"{where}.{key}" if where else str(key)
        if key not in schema:
            raise ConfigError(f"unknown config key '{path}'")
        if isinstance(schema[key], dict):
            _check_keys(val or {}, schema[key], path)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class Scenario:
    raw: dict
    base_dir: Path

    @classmethod
    def from_dict(cls, cfg: dict, base_dir=".") -> "Scenario":
        cfg = cfg or {}
        _check_keys(cfg, SCHEMA)
        sc = cls(_merge(DEFAULTS, cfg), Path(base_dir))
        sc.validate()
        return sc

    @classmethod
    def load(cls, path) -> "Scenario":
        path = Path(path)
        try:
            cfg = yaml.safe_load(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
        return cls.from_dict(cfg, path.parent)

    def override(self, **kw) -> "Scenario":
        """Command-line overrides: ``dt``, ``dT``, ``overlap``, ``outdir``."""
        raw = copy.deepcopy(self.raw)
        if kw.get("dt") is not None:
            raw["model"]["dt"] = float(kw["dt"])
        if kw.get("dT") is not None:
            raw["model"]["dT"] = float(kw["dT"])
        if kw.get("overlap") is not None:
            raw["partition"]["overlap"] = kw["overlap"]
        if kw.get("outdir") is not None:
            raw["output"]["dir"] = str(kw["outdir"])
        sc = Scenario(raw, self.base_dir)
        sc.validate()
        return sc

    # accessors
    @property
    def name(self) -> str:
        return str(self.raw["name"])

    @property
    def kind(self) -> str:
        return self.raw["model"]["kind"]

    @property
    def span(self) -> tuple[float, float]:
        m = self.raw["model"]
        return float(m["t0"]), float(m["t1"])

    @property
    def overlaps(self) -> list[int]:
        ov = self.raw["partition"]["overlap"]
        return [int(o) for o in (ov if isinstance(ov, (list, tuple)) else [ov])]

    @property
    def outdir(self) -> Path:
        d = Path(self.raw["output"]["dir"])
        return d if d.is_absolute() else self.base_dir / d

    @property
    def stem(self) -> str:
        return self.raw["output"]["stem"] or self.name

    def validate(self) -> None:
        m = self.raw["model"]
        if m["kind"] not in ("emt", "ts", "hetero"):
            raise ConfigError(f"model.kind must be emt, ts or hetero, got {m['kind']!r}")
        for key in ("dt", "dT"):
            if not (isinstance(m[key], (int, float)) and m[key] > 0):
                raise ConfigError(f"model.{key} must be a positive number")
        t0, t1 = self.span
        if not t1 > t0:
            raise ConfigError("model.t1 must exceed model.t0")
        for ev in self.raw["circuit"]["events"] or []:
            if not (isinstance(ev, (list, tuple)) and len(ev) == 2):
                raise ConfigError(f"circuit.events entries are [time, amplitude], got {ev!r}")
            if not t0 <= float(ev[0]) <= t1:
                raise ConfigError(f"event time {ev[0]} outside the span [{t0}, {t1}]")
        for ov in self.overlaps:
            if ov < 0:
                raise ConfigError("partition.overlap must be >= 0")
        mode = self.raw["schwarz"]["mode"]
        if mode is not None and str(mode).lower() not in ("additive", "multiplicative", "ras", "rms"):
            raise ConfigError(f"schwarz.mode must be additive or multiplicative, got {mode!r}")
        if self.raw["schwarz"]["accel"] not in ("exact", "numeric", "none", None):
            raise ConfigError("schwarz.accel must be exact, numeric or none")
        c = self.raw["circuit"]
        if c["netlist"] not in ("reference", "inline"):
            raise ConfigError("circuit.netlist must be 'reference' or 'inline'")
        if c["netlist"] == "inline":
            if not c.get("components") or not c.get("nodes"):
                raise ConfigError("inline netlists need 'nodes' and 'components'")
            for comp in c["components"]:
                bad = set(comp) - _COMPONENT_KEYS
                if bad:
                    raise ConfigError(f"unknown config key 'circuit.components.{sorted(bad)[0]}'")

    # model construction
    def netlist(self) -> Netlist:
        c = self.raw["circuit"]
        if c["netlist"] == "reference":
            return reference_netlist(float(c["amplitude"]))
        comps = []
        for comp in c["components"]:
            kw = dict(comp)
            kw["nodes"] = tuple(kw["nodes"])
            try:
                comps.append(Component(**kw))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"circuit.components: {exc}") from exc
        kw = {"ground": int(c["ground"])}
        if c.get("omega0") is not None:
            kw["omega0"] = float(c["omega0"])
        if c.get("variable_order"):
            kw["variable_order"] = tuple(c["variable_order"])
        try:
            return Netlist(int(c["nodes"]), tuple(comps), **kw)
        except ValueError as exc:
            raise ConfigError(f"circuit: {exc}") from exc

    def dae(self):
        dae = assemble_dae(self.netlist())
        events = [(float(t), float(a)) for t, a in self.raw["circuit"]["events"] or []]
        return dae.with_events(events) if events else dae

    def schwarz_config(self, default_mode: str) -> SchwarzConfig:
        s = self.raw["schwarz"]
        return SchwarzConfig(s["mode"] or default_mode, int(s["max_iter"]), float(s["stagnation_tol"]),
                             True, bool(s["frozen_operator"]))

    def hetero_config(self) -> HeteroConfig:
        h = dict(self.raw["hetero"])
        m = self.raw["model"]
        if "m" not in h:
            ratio = m["dT"] / m["dt"]
            if abs(ratio - round(ratio)) > 1e-9 * ratio:
                raise ConfigError("model.dT must be an integer multiple of model.dt")
            h["m"] = int(round(ratio))
        h["overlap"] = self.overlaps[0]
        return HeteroConfig(dt=float(m["dt"]), **h)


def _cplx(z) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _conjugate_pair(ev: np.ndarray) -> list:
    """Dominant eigenvalue together with its conjugate when present."""
    if ev.size == 0:
        return []
    lead = ev[0]
    if abs(lead.imag) > 1e-12 * max(1.0, abs(lead)):
        return [_cplx(lead), _cplx(np.conj(lead))]
    return [_cplx(lead)]


def _emt_spectrum_rows(sc: Scenario, dae) -> list[dict]:
    m = sc.raw["model"]
    rows = []
    sys = build_stepped(dae, float(m["dt"]))
    cfg = sc.schwarz_config("additive")
    for ov in sc.overlaps:
        part = circuit_partition(sys.H, dae.names, sc.raw["partition"]["split"], ov)
        rep = spectrum_report(exact_error_operator(sys.H, part, cfg.mode))
        rows.append({"model": "emt", "harmonic": None, "overlap": ov, "mode": cfg.mode,
                     "step": float(m["dt"]), "dominant": _conjugate_pair(rep.eigenvalues),
                     "modulus": rep.spectral_radius, "verdict": rep.verdict})
    return rows


def _ts_spectrum_rows(sc: Scenario, dae) -> list[dict]:
    m = sc.raw["model"]
    hs = HarmonicSet(tuple(m["harmonics"]), dae.omega0)
    ts = build_ts(dae, hs, float(m["dT"]))
    cfg = sc.schwarz_config("multiplicative")
    rows = []
    for ov in sc.overlaps:
        base = circuit_partition(ts.H, dae.names, sc.raw["partition"]["split"], ov)
        for k, blk in zip(hs, ts.blocks):
            part = replicate(base, blk, 1 if k == 0 else 2)
            rep = spectrum_report(exact_error_operator(blk, part, cfg.mode))
            rows.append({"model": "ts", "harmonic": k, "overlap": ov, "mode": cfg.mode,
                         "step": float(m["dT"]), "dominant": _conjugate_pair(rep.eigenvalues),
                         "modulus": rep.spectral_radius, "verdict": rep.verdict})
    return rows


def analyze_spectrum(sc: Scenario | str | Path) -> dict:
    """Dominant error-operator eigenvalues for every requested configuration."""
    if not isinstance(sc, Scenario):
        sc = Scenario.load(sc)
    dae = sc.dae()
    t = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DecoupledPartitionWarning)
        rows = _ts_spectrum_rows(sc, dae) if sc.kind == "ts" else _emt_spectrum_rows(sc, dae)
    return {"scenario": sc.name, "verb": "spectrum", "rows": rows,
            "timings": {"spectrum_s": time.perf_counter() - t}}


def write_summary(path, summary: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (complex, np.complexfloating)):
        return _cplx(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o))


def run_scenario(sc: Scenario | str | Path) -> dict:
    """Run a scenario and write its CSV artefacts; returns the summary dict."""
    if not isinstance(sc, Scenario):
        sc = Scenario.load(sc)
    dae = sc.dae()
    t0, t1 = sc.span
    out, stem = sc.outdir, sc.stem
    out.mkdir(parents=True, exist_ok=True)
    m = sc.raw["model"]
    summary = {"scenario": sc.name, "verb": "run", "model": sc.kind, "outputs": {}, "timings": {}}
    accel = sc.raw["schwarz"]["accel"]
    accel = None if accel in ("none", None) else accel
    ddm = bool(sc.raw["partition"]["enabled"])
    tic = time.perf_counter()
    if sc.kind == "emt":
        sys = build_stepped(dae, float(m["dt"]))
        summary["step"] = float(m["dt"])
        if ddm:
            cfg = sc.schwarz_config("additive")
            part = circuit_partition(sys.H, dae.names, sc.raw["partition"]["split"], sc.overlaps[0])
            traj, infos = ddm_integrate(sys, part, t0, t1, cfg, accel)
            summary.update(_ddm_summary(part, cfg, infos, out, stem, summary))
        else:
            traj = integrate(sys, t0, t1)
        p = out / f"{stem}_trajectory.csv"
        traj.to_csv(p)
        summary["outputs"]["trajectory"] = p
        summary["rows"] = len(traj.times)
    elif sc.kind == "ts":
        hs = HarmonicSet(tuple(m["harmonics"]), dae.omega0)
        ts = build_ts(dae, hs, float(m["dT"]))
        summary["step"] = float(m["dT"])
        if ddm:
            cfg = sc.schwarz_config("multiplicative")
            base = circuit_partition(ts.H, dae.names, sc.raw["partition"]["split"], sc.overlaps[0])
            part = replicate(base, ts.H_TS, hs.real_dim(dae.n) // dae.n)
            times, states, infos = ddm_integrate_ts(ts, part, t0, t1, cfg, accel)
            summary.update(_ddm_summary(part, cfg, infos, out, stem, summary))
        else:
            times, states = ts_integrate(ts, t0, t1)
        p = out / f"{stem}_phasors.csv"
        write_phasors_csv(p, times, states, dae.names)
        summary["outputs"]["phasors"] = p
        p = out / f"{stem}_trajectory.csv"
        write_trajectory_csv(p, times, np.array([reconstruct(s, t) for s, t in zip(states, times)]), dae.names)
        summary["outputs"]["trajectory"] = p
        summary["rows"] = len(times)
    else:
        hc = sc.hetero_config()
        res = hetero_run(dae, hc, t1, sc.raw["partition"]["split"])
        paths = res.write(out, stem)
        summary["outputs"].update(paths)
        summary["step"] = [hc.dt, hc.dT]
        summary["hetero"] = {
            "mode": hc.mode, "m": hc.m, "emt_side": hc.emt_side, "harmonics": list(hc.harmonics),
            "max_interface_residual": max((i.residual for i in res.infos), default=0.0),
            "steps": [{"T": i.T, "residual": i.residual, "rank": i.rank,
                       "dominant": _conjugate_pair(i.eigenvalues), "iterations": len(i.trace)}
                      for i in res.infos],
        }
        summary["rows"] = len(res.emt_times)
    summary["timings"]["run_s"] = time.perf_counter() - tic
    p = out / f"{stem}_summary.json"
    summary["outputs"]["summary"] = p
    write_summary(p, summary)
    return summary


def _ddm_summary(part, cfg, infos, out, stem, summary) -> dict:
    rep = spectrum_report(exact_error_operator(part.H, part, cfg.mode))
    p = out / f"{stem}_convergence.csv"
    if infos and len(infos[0].trace) > 1:
        infos[0].trace.to_csv(p)
        summary["outputs"]["convergence"] = p
    return {"schwarz": {"mode": cfg.mode, "overlap": part.overlap,
                        "dominant": _conjugate_pair(rep.eigenvalues), "verdict": rep.verdict,
                        "max_step_residual": max((i.residual for i in infos), default=0.0)}}


def compare_trajectories(path_a, path_b, columns=None) -> dict:
    """Max and RMS deviation per shared column; ``b`` is interpolated onto ``a``'s times."""
    a, b = read_trajectory_csv(path_a), read_trajectory_csv(path_b)
    shared = [c for c in a.names if c in b.names]
    if columns:
        missing = [c for c in columns if c not in shared]
        if missing:
            raise ConfigError(f"columns not present in both files: {missing}")
        shared = list(columns)
    if not shared:
        raise ConfigError("the two trajectories share no column")
    lo, hi = max(a.times[0], b.times[0]), min(a.times[-1], b.times[-1])
    sel = (a.times >= lo - 1e-12) & (a.times <= hi + 1e-12)
    t = a.times[sel]
    report = {}
    for c in shared:
        d = a[c][sel] - np.interp(t, b.times, b[c])
        report[c] = {"max": float(np.max(np.abs(d), initial=0.0)),
                     "rms": float(math.sqrt(np.mean(d ** 2))) if d.size else 0.0}
    return {"verb": "compare", "a": str(path_a), "b": str(path_b), "samples": int(t.size), "columns": report}
