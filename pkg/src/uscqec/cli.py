"""Command-line entry point: one subcommand per experiment.

Every run writes its data file(s) and a ``<subcommand>.manifest.json`` into
``--out``.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure, 4 verification failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional

import numpy as np

from . import __version__
from .errors import UscError, VerificationFailure

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "qubit-sweep": {
        "E_J_GHz": 221.0,
        "E_C_ratio": 32.0,
        "alpha": 0.8,
        "beta": 0.1,
        "gamma": 0.5,
        "f1": 0.5,
        "f2": 0.0,
        "f3": 0.0,
        "n_max": 10,
        "alpha_grid": {"start": 0.6, "stop": 1.0, "num": 9},
        "f1_grid": {"start": 0.46, "stop": 0.54, "num": 17},
    },
    "modes": {
        "N": 5,
        "band_GHz": 5.0,
        "E_J_GHz": 221.0,
        "length_m": None,
        "l_per_m": 4.16e-7,
        "c_per_m": 1.66e-10,
        "C_J_F": None,
        "L_J_H": None,
        "gamma": 0.5,
        "beta": 0.1,
        "max_freq_GHz": 12.0,
        "samples_per_segment": 512,
    },
    "gate-fidelity": {
        "omega_GHz": 5.0,
        "g_over_omega": 1.0 / (4.0 * math.sqrt(2.0)),
        "wq_over_omega": 0.5,
        "cx": [0.0, 0.05, 0.1, 0.2, 0.3],
        "cavity": [
            {"kind": "coherent", "gamma": 1.0},
            {"kind": "coherent", "gamma": 0.5},
            {"kind": "coherent", "gamma": 0.25},
            {"kind": "vacuum"},
            {"kind": "thermal", "temp_mK": 15.0},
        ],
        "cutoff": 15,
    },
    "adiabatic": {
        "omega_GHz": 5.0,
        "wq_over_omega": 1.0,
        "cx": 1.0,
        "cutoff": 8,
        "ramp": {
            "g0_over_omega": 1.0 / (4.0 * math.sqrt(2.0)),
            "T_over_omega": 250.0,
            "shape": "linear-in-g",
            "steps": 1000,
        },
        "check_halving": True,
    },
    "code": {"name": "five-qubit", "graph_file": None, "verify": False, "w_max": 3},
    "montecarlo": {
        "code": "five-qubit",
        "p1_grid": {"start": 0.0, "stop": 0.05, "num": 6},
        "p2_grid": {"start": 0.0, "stop": 0.05, "num": 6},
        "p_m": 0.0,
        "trials": 5000,
        "seed": 0,
        "mode": "trajectory",
        "measurement": "corrected",
        "noisy_corrections": False,
    },
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config handling


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(cfg: dict, key: str, value) -> None:
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"unknown config section {key!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = value


def _merge(base: dict, extra: dict, where: str = "") -> None:
    for k, v in extra.items():
        if k not in base:
            raise ConfigError(f"unknown config key {where + k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict) and k not in ("alpha_grid", "f1_grid", "p1_grid", "p2_grid"):
            _merge(base[k], v, where + k + ".")
        else:
            base[k] = v


def resolve_config(command: str, config_path: Optional[str], sets: List[str], overrides: dict) -> dict:
    cfg = copy.deepcopy(DEFAULTS[command])
    if config_path:
        try:
            with open(config_path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        if command in doc and isinstance(doc[command], dict):
            doc = doc[command]
        elif any(k in DEFAULTS for k in doc):
            doc = {}
        _merge(cfg, doc)
    for item in sets or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        _set_dotted(cfg, k.strip(), _parse_value(v.strip()))
    for k, v in overrides.items():
        if v is not None:
            _set_dotted(cfg, k, v)
    return cfg


def grid(spec, name: str) -> np.ndarray:
    """A list of values or {start, stop, num}; must be non-empty and sorted."""
    if isinstance(spec, dict):
        try:
            g = np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{name} needs start, stop and num") from exc
    elif isinstance(spec, (list, tuple)):
        try:
            g = np.array([float(v) for v in spec])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name} must hold numbers") from exc
    else:
        g = np.array([float(spec)]) if isinstance(spec, (int, float)) else None
        if g is None:
            raise ConfigError(f"{name} must be a list or a range object")
    if g.size == 0:
        raise ConfigError(f"{name} is empty")
    if np.any(np.diff(g) < 0):
        raise ConfigError(f"{name} must be sorted")
    return g


# ---------------------------------------------------------------------------
# output


def atomic_write(path: str, data: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: List[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


class Run:
    """Collects outputs of one subcommand and writes them with a manifest."""

    def __init__(self, command: str, config: dict, out_dir: str, seed: Optional[int]):
        self.command = command
        self.config = config
        self.out_dir = out_dir
        self.seed = seed
        self.outputs: List[str] = []
        self.notes: Dict[str, Any] = {}
        self.t0 = time.perf_counter()

    def write(self, filename: str, text: str) -> str:
        path = os.path.join(self.out_dir, filename)
        atomic_write(path, text)
        self.outputs.append(path)
        return path

    def finish(self) -> str:
        manifest = {
            "subcommand": self.command,
            "config": self.config,
            "seed": self.seed,
            "version": __version__,
            "outputs": self.outputs,
            "wall_clock_s": round(time.perf_counter() - self.t0, 3),
            "notes": self.notes,
        }
        path = os.path.join(self.out_dir, f"{self.command}.manifest.json")
        atomic_write(path, json.dumps(manifest, indent=2, default=_json_default) + "\n")
        return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serialisable: {type(o)}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_qubit_sweep(cfg: dict, run: Run, jobs: int) -> int:
    from .fluxqubit import BiasPoint, ChargeBasisSpec, FluxQubitParams, sweep_bias

    EJ = float(cfg["E_J_GHz"])
    params = FluxQubitParams(EJ, EJ / float(cfg["E_C_ratio"]), float(cfg["alpha"]), float(cfg["beta"]), float(cfg["gamma"]))
    surface = sweep_bias(
        params,
        grid(cfg["alpha_grid"], "alpha_grid"),
        grid(cfg["f1_grid"], "f1_grid"),
        template=BiasPoint(float(cfg["f1"]), float(cfg["f2"]), float(cfg["f3"])),
        basis=ChargeBasisSpec(int(cfg["n_max"])),
        jobs=jobs,
    )
    run.write("qubit-sweep.csv", csv_text(["alpha", "f1", "omega_q_GHz", "c0", "cx", "cy", "cz"], surface.rows()))
    c = surface.normalized()
    run.notes.update(
        max_abs_cx=float(np.abs(c[..., 1]).max()),
        max_abs_cz=float(np.abs(c[..., 3]).max()),
        coefficients="normalised so that cx^2 + cy^2 + cz^2 = 1; omega_q_GHz is the ordinary frequency",
    )
    return EXIT_OK


def cmd_modes(cfg: dict, run: Run, jobs: int) -> int:
    from dataclasses import replace

    from .resonator import ResonatorParams, default_params, mode_equation_roots

    base = default_params(int(cfg["N"]), float(cfg["band_GHz"]), float(cfg["E_J_GHz"]), float(cfg["gamma"]), float(cfg["beta"]))
    p = ResonatorParams(
        length_L=float(cfg["length_m"] or base.length_L),
        induct_per_len_l=float(cfg["l_per_m"]),
        cap_per_len_c=float(cfg["c_per_m"]),
        N_qubits=int(cfg["N"]),
        C_J=float(cfg["C_J_F"] or base.C_J),
        L_J=float(cfg["L_J_H"] or base.L_J),
        gamma=float(cfg["gamma"]),
        beta=float(cfg["beta"]),
    )
    modes = mode_equation_roots(p, 2 * math.pi * float(cfg["max_freq_GHz"]), int(cfg["samples_per_segment"]))
    header = ["index", "freq_GHz", "mass"] + [f"flux_drop_j{j + 1}" for j in range(p.N_qubits)]
    rows = []
    for i, (f, m) in enumerate(zip(modes.freqs_ghz, modes.effective_masses)):
        rows.append([i, float(f), float(m)] + [float(d) for d in modes.flux_drops[i]])
    run.write("modes.csv", csv_text(header, rows))
    run.notes.update(band_GHz=p.band_frequency / (2e9 * math.pi), max_residual=float(np.max(modes.residuals, initial=0.0)))
    return EXIT_OK


def _cavity(spec: dict):
    from .dynamics import CavityFieldSpec

    kind = spec.get("kind")
    if kind == "vacuum":
        return CavityFieldSpec.vacuum()
    if kind == "thermal":
        return CavityFieldSpec.thermal(float(spec["temp_mK"]) * 1e-3)
    if kind == "coherent":
        return CavityFieldSpec.coherent(float(spec["gamma"]))
    raise ConfigError(f"unknown cavity kind {kind!r}")


def _fidelity_rows(args):
    from .dynamics import gate_fidelity_table, reference_system

    cfg, cx = args
    system = reference_system(cfg["omega_GHz"], cfg["g_over_omega"], cfg["wq_over_omega"], 0.0, int(cfg["cutoff"]))
    return gate_fidelity_table(system, [_cavity(c) for c in cfg["cavity"]], [cx])


def cmd_gate_fidelity(cfg: dict, run: Run, jobs: int) -> int:
    cxs = cfg["cx"] if isinstance(cfg["cx"], list) else [cfg["cx"]]
    if not cxs:
        raise ConfigError("cx grid is empty")
    if not cfg["cavity"]:
        raise ConfigError("cavity list is empty")
    for c in cfg["cavity"]:
        _cavity(c)
    tasks = [(cfg, float(cx)) for cx in cxs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_fidelity_rows, tasks))
    else:
        chunks = [_fidelity_rows(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    run.write("gate-fidelity.csv", csv_text(["cx", "cavity_kind", "fidelity"], rows))
    run.notes.update(qubit_frequency="omega_q = wq_over_omega * omega", thermal_modes="all modes i.i.d. thermal")
    return EXIT_OK


def cmd_adiabatic(cfg: dict, run: Run, jobs: int) -> int:
    from .dynamics import AdiabaticRamp, adiabatic_initialize, reference_system

    w_ghz = float(cfg["omega_GHz"])
    system = reference_system(w_ghz, 0.0, float(cfg["wq_over_omega"]), float(cfg["cx"]), int(cfg["cutoff"]))
    w = system.mode_freqs[0]
    r = cfg["ramp"]
    ramp = AdiabaticRamp(float(r["g0_over_omega"]) * w, float(r["T_over_omega"]) / w, r["shape"], int(r["steps"]))
    res = adiabatic_initialize(system, ramp, check_halving=bool(cfg["check_halving"]))
    rows = [(float(t / ramp.T_total), float(f)) for t, f in zip(res.times, res.fidelity)]
    run.write("adiabatic.csv", csv_text(["t_over_T", "fidelity"], rows))
    run.notes.update(final_fidelity=res.final_fidelity, halving_change=res.halving_change, g0_assumption="g0/omega = 1/(4 sqrt 2) unless configured")
    return EXIT_OK


def _five_qubit_report(w_max: int) -> dict:
    from .graphcode import (
        build_cluster_statevector,
        cluster_stabilizers,
        code_distance,
        five_cycle,
        five_qubit_code,
        transport_five_qubit,
    )

    g = five_cycle()
    K = cluster_stabilizers(g)
    psi = build_cluster_statevector(g)
    ev = K.expectations(psi.data)
    mapped, xl, zl = transport_five_qubit()
    code = five_qubit_code()
    logical_ok = bool(
        all(code.commutes_with(xl)) and all(code.commutes_with(zl)) and not xl.commutes(zl)
        and code.decompose(xl) is None and code.decompose(zl) is None
    )
    d = code_distance(code, w_max)
    return {
        "code": "five-qubit",
        "generators": [str(g) for g in K.generators],
        "stabilizer_expectations": ev.tolist(),
        "code_generators": [str(g) for g in mapped.generators],
        "lu_group_equal": bool(mapped.same_group(code)),
        "logical_x": str(xl),
        "logical_z": str(zl),
        "logicals_valid": logical_ok,
        "distance": d.value if d.exact else None,
        "distance_exact": d.exact,
        "checks_passed": bool(np.all(np.abs(ev - 1) < 1e-9) and mapped.same_group(code) and logical_ok and d == (3, True)),
    }


def _steane_report(graph, w_max: int) -> dict:
    from .graphcode import cluster_stabilizers, code_distance, lc_orbit_check, measure_x, steane_code
    from .graphcode.graphs import build_cluster_statevector

    t = cluster_stabilizers(graph)
    res = measure_x(t, graph.measure_set, mode="corrected")
    code = steane_code()
    lc = lc_orbit_check(graph, code)
    d = code_distance(code, w_max)
    psi = build_cluster_statevector(graph)
    ev = t.expectations(psi.data)
    return {
        "code": "steane",
        "graph_edges": [[u + 1, v + 1] for u, v in graph.edges],
        "measured": [q + 1 for q in graph.measure_set],
        "stabilizer_expectations": ev.tolist(),
        "post_measurement_generators": [str(g) for g in res.state.generators],
        "post_measurement_rank": res.state.m,
        "code_generators": [str(g) for g in code.generators],
        "lc_equivalent": bool(lc.found),
        "lc_sequence": [v + 1 for v in lc.lc_sequence],
        "local_words": lc.local_words,
        "codeword": lc.completion,
        "distance": d.value if d.exact else None,
        "distance_exact": d.exact,
        "checks_passed": bool(lc.found and d == (3, True) and res.state.m == 7 and np.all(np.abs(ev - 1) < 1e-9)),
    }


def cmd_code(cfg: dict, run: Run, jobs: int) -> int:
    from .graphcode import GraphSpec, steane_graph

    name = cfg["name"]
    w_max = int(cfg["w_max"])
    if name == "five-qubit":
        report = _five_qubit_report(w_max)
    elif name == "steane":
        if cfg["graph_file"]:
            try:
                with open(cfg["graph_file"]) as fh:
                    graph = GraphSpec.parse(fh.read())
            except OSError as exc:
                raise ConfigError(f"cannot read graph file: {exc}") from exc
        else:
            graph = steane_graph()
        report = _steane_report(graph, w_max)
    else:
        raise ConfigError(f"unknown code {name!r}")
    run.write(f"code-{name}.json", json.dumps(report, indent=2, default=_json_default) + "\n")
    run.notes["checks_passed"] = report["checks_passed"]
    if cfg["verify"] and not report["checks_passed"]:
        raise VerificationFailure(f"{name} verification failed")
    return EXIT_OK


def cmd_montecarlo(cfg: dict, run: Run, jobs: int) -> int:
    from .noise import fidelity_surface

    mode = cfg["mode"]
    if mode not in ("trajectory", "channel"):
        raise ConfigError(f"mode must be trajectory or channel, got {mode!r}")
    trials = int(cfg["trials"])
    if trials < 1:
        raise ConfigError("trials must be at least 1")
    rows = fidelity_surface(
        cfg["code"],
        grid(cfg["p1_grid"], "p1_grid"),
        grid(cfg["p2_grid"], "p2_grid"),
        float(cfg["p_m"]),
        trials,
        int(cfg["seed"]),
        path="frame" if mode == "trajectory" else "channel",
        mode=cfg["measurement"],
        noisy_corrections=bool(cfg["noisy_corrections"]),
    )
    run.write("montecarlo.csv", csv_text(["p1", "p2", "mean", "std_error", "trials"], rows))
    run.notes.update(depolarizing="uniform over the 4^k - 1 non-identity Paulis", noise_placement="p1 after |+> preparations, p2 after each CZ")
    return EXIT_OK


COMMANDS = {
    "qubit-sweep": cmd_qubit_sweep,
    "modes": cmd_modes,
    "gate-fidelity": cmd_gate_fidelity,
    "adiabatic": cmd_adiabatic,
    "code": cmd_code,
    "montecarlo": cmd_montecarlo,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (flat, or keyed by subcommand)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="master seed (montecarlo)")
    common.add_argument("--jobs", type=int, default=1, help="worker processes")
    common.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key (dotted, JSON value)")

    parser = argparse.ArgumentParser(prog="uscqec", description="Ultrastrong-coupling graph-code toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("qubit-sweep", parents=[common], help="flux-qubit coupling coefficients over (alpha, f1)")
    sub.add_parser("modes", parents=[common], help="resonator eigenmodes")
    sub.add_parser("gate-fidelity", parents=[common], help="CZ fidelity versus transversal coupling")
    p = sub.add_parser("adiabatic", parents=[common], help="adiabatic switch-off of the coupling")
    p.add_argument("--T", type=float, dest="T_over_omega", help="ramp duration in units of 1/omega")
    p = sub.add_parser("code", parents=[common], help="build and verify a graph code")
    p.add_argument("name", nargs="?", help="five-qubit or steane")
    p.add_argument("--verify", action="store_true", default=None, help="exit 4 if any check fails")
    p.add_argument("--graph", dest="graph_file", help="edge-list file for the Steane construction")
    p = sub.add_parser("montecarlo", parents=[common], help="Monte Carlo fidelity surface")
    p.add_argument("--code", help="five-qubit, steane or a toy code")
    p.add_argument("--trials", type=int)
    p.add_argument("--pm", type=float, dest="p_m", help="measurement flip probability")
    return parser


def _overrides(args) -> dict:
    o = {}
    if args.command == "adiabatic":
        o["ramp.T_over_omega"] = args.T_over_omega
    elif args.command == "code":
        o.update(name=args.name, verify=args.verify, graph_file=args.graph_file)
    elif args.command == "montecarlo":
        o.update(code=args.code, trials=args.trials, p_m=args.p_m, seed=args.seed)
    return o


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = resolve_config(args.command, args.config, args.set, _overrides(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        print(json.dumps(cfg, indent=2))
        return EXIT_OK
    seed = cfg.get("seed", args.seed)
    run = Run(args.command, cfg, args.out, seed)
    try:
        code = COMMANDS[args.command](cfg, run, max(1, args.jobs))
    except VerificationFailure as exc:
        run.notes["error"] = str(exc)
        run.finish()
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (ConfigError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (UscError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = run.finish()
    print(manifest)
    return code


if __name__ == "__main__":
    sys.exit(main())


def main_exit() -> None:
    sys.exit(main())
