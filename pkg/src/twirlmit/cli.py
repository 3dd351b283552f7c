"""Command-line entry point: ``twirlmit {simulate,mitigate,correct-counts,calibrate}``.

Exit codes: 0 success, 1 usage or input error, 2 an output failed its self-check.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import circuit as circuit_mod
from .algorithms import BvInstance, QaeInstance, build_bv, build_deutsch, build_qae, p_tilde
from .circuit import Histogram, MeasurementModel, chop, run_exact, run_with_twirl, sample, table_to_dict
from .config import ConfigError, RunConfig, build_config, load_json, parse_noise
from .mitigation import (
    CONDITIONS,
    ETA_PRESETS,
    MitigationConfig,
    bitstring_score,
    calibrate_eta,
    correct_joint,
    mitigate_pipeline,
    simulator_runner,
)
from .presets import PRESETS, get_preset, qae_window_score, with_ancilla_noise

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2


class UsageError(Exception):
    pass


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 is reserved for failed self-checks here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# output helpers

def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x: float) -> str:
    return repr(float(x))


def _check_weights(name: str, weights) -> None:
    total = float(sum(weights))
    if abs(total - 1.0) > 1e-9:
        raise InvariantError(f"{name}: weights sum to {total!r}")


def _check_hist(name: str, h: Histogram) -> None:
    if sum(h.counts.values()) != h.shots:
        raise InvariantError(f"{name}: counts do not sum to shots")


def _table_csv(table: np.ndarray, qae_m: int | None, value_name: str = "probability") -> str:
    n = int(round(np.log2(table.size)))
    if value_name == "probability":
        table = chop(table)
    if qae_m is not None:
        pt = p_tilde(np.arange(table.size), qae_m)
        rows = [(z, _fmt(pt[z]), _fmt(v)) for z, v in enumerate(table)]
        return _csv(rows, ["z", "p_tilde", value_name])
    rows = [(format(i, f"0{n}b"), _fmt(v)) for i, v in enumerate(table) if v != 0]
    return _csv(rows, ["bitstring", value_name])


# ---------------------------------------------------------------------------
# config assembly

def _resolve(args, keys) -> RunConfig:
    file_values = load_json(args.config) if getattr(args, "config", None) else None
    overrides = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "noise", None):
        overrides["noise"] = [parse_noise(t) for t in args.noise]
    if getattr(args, "eta_qubit", None):
        eta = {}
        for tok in args.eta_qubit:
            try:
                q, v = tok.split("=")
                eta[int(q)] = float(v)
            except ValueError:
                raise ConfigError(f"--eta-qubit expects QUBIT=ETA, got {tok!r}") from None
        overrides["eta"] = eta
    if getattr(args, "twirl", False):
        overrides["twirl"] = True
    return build_config(file_values, overrides)


def _build_circuit(cfg: RunConfig):
    """Circuit, QAE register size (or None), and a default score function."""
    if cfg.circuit:
        try:
            circ = circuit_mod.loads(Path(cfg.circuit).read_text())
        except circuit_mod.CircuitParseError as exc:
            raise ConfigError(f"{cfg.circuit}: {exc}") from None
        return circ, None, None
    if cfg.algo == "bv":
        if cfg.s is None:
            raise ConfigError("bv needs --s")
        if cfg.n is not None and cfg.n != len(cfg.s):
            raise ConfigError(f"--n {cfg.n} does not match len(--s) = {len(cfg.s)}")
        return build_bv(BvInstance(cfg.s)), None, bitstring_score(cfg.s)
    if cfg.algo == "qae":
        if cfg.m is None or cfg.p is None:
            raise ConfigError("qae needs --m and --p")
        return build_qae(QaeInstance(cfg.m, cfg.p)), cfg.m, qae_window_score(cfg.m, cfg.p)
    if cfg.algo == "deutsch":
        if cfg.case is None:
            raise ConfigError("deutsch needs --case")
        return build_deutsch(cfg.case), None, None
    raise ConfigError("give --algo, --circuit or --preset")


def _mitigation_cfg(cfg: RunConfig, noise_qubits) -> MitigationConfig:
    if cfg.eta_preset:
        return MitigationConfig(default_eta=ETA_PRESETS[cfg.eta_preset], negative_policy=cfg.policy)
    if isinstance(cfg.eta, dict):
        return MitigationConfig(eta=dict(cfg.eta), negative_policy=cfg.policy)
    if cfg.eta is not None:
        return MitigationConfig(eta={q: cfg.eta for q in noise_qubits}, negative_policy=cfg.policy)
    return MitigationConfig(negative_policy=cfg.policy)


# ---------------------------------------------------------------------------
# commands

SIM_KEYS = ("preset", "algo", "circuit", "s", "n", "m", "p", "case", "noise_placement", "noise_impl",
            "mode", "shots", "seed", "out")


def cmd_simulate(args) -> int:
    cfg = _resolve(args, SIM_KEYS)
    if cfg.preset:
        exp = get_preset(cfg.preset)
        circ, qae_m = exp.circuit, exp.params.get("m")
        specs = [n.spec() for n in cfg.noise] or list(exp.noise)
    else:
        circ, qae_m, _ = _build_circuit(cfg)
        specs = [n.spec() for n in cfg.noise]
    if cfg.noise_impl == "ancilla" and specs:
        if cfg.noise_placement != "state":
            raise ConfigError("ancilla noise acts on the state; use --noise-placement state")
        circ = with_ancilla_noise(circ, specs)
        meas = MeasurementModel()
    else:
        mode = "state_noise" if cfg.noise_placement == "state" else "detector_noise"
        meas = MeasurementModel(mode, {s.qubit: s.channel() for s in specs}) if specs else MeasurementModel()
    out = Path(cfg.out or ".")
    if cfg.twirl and meas.mode == "detector_noise":
        raise ConfigError("twirling needs state-placed noise")
    if cfg.mode == "exact":
        dist = run_with_twirl(circ, meas) if cfg.twirl else run_exact(circ, meas)
        _check_weights("distribution", dist)
        payload = {"n_bits": circ.n_bits, "measured": list(circ.measured), "probabilities": table_to_dict(chop(dist))}
        _write(out / "distribution.json", _dump(payload))
        _write(out / "distribution.csv", _table_csv(dist, qae_m))
    else:
        shots = cfg.shots or 8192
        if cfg.twirl:
            hist = run_with_twirl(circ, meas, mode="per_shot", shots=shots, seed=cfg.seed)
        else:
            hist = sample(run_exact(circ, meas), shots, cfg.seed)
        _check_hist("histogram", hist)
        _write(out / "histogram.json", _dump({"counts": hist.counts, "shots": hist.shots}))
        counts = np.zeros(2**hist.n_bits)
        for k, v in hist.counts.items():
            counts[int(k, 2)] = v
        _write(out / "histogram.csv", _table_csv(counts.astype(int), qae_m, "count"))
    return EXIT_OK


MIT_KEYS = ("preset", "algo", "circuit", "s", "n", "m", "p", "case", "noise_impl", "eta", "eta_preset",
            "policy", "mode", "shots", "seed", "out")


def cmd_mitigate(args) -> int:
    cfg = _resolve(args, MIT_KEYS)
    if cfg.preset:
        exp = get_preset(cfg.preset)
        circ, qae_m, score = exp.circuit, exp.params.get("m"), exp.score
        specs = [n.spec() for n in cfg.noise] or list(exp.noise)
        mcfg = exp.cfg if (cfg.eta is None and cfg.eta_preset is None) else _mitigation_cfg(cfg, [s.qubit for s in specs])
        if cfg.policy != mcfg.negative_policy:
            mcfg = MitigationConfig(mcfg.eta, mcfg.default_eta, mcfg.twirl_set, cfg.policy)
    else:
        circ, qae_m, score = _build_circuit(cfg)
        specs = [n.spec() for n in cfg.noise]
        if not specs:
            raise ConfigError("mitigate needs at least one --noise spec (or a --preset)")
        mcfg = _mitigation_cfg(cfg, [s.qubit for s in specs])
    shots = cfg.shots if cfg.mode == "sampled" or cfg.shots else None
    if cfg.mode == "sampled" and shots is None:
        shots = 8192
    if cfg.noise_impl == "ancilla":
        circ = with_ancilla_noise(circ, specs)
        noise = {}
    else:
        noise = {s.qubit: s.channel() for s in specs}
    report = mitigate_pipeline(circ, noise, mcfg, shots=shots, seed=cfg.seed, score=score)
    report.meta["preset"] = cfg.preset
    report.meta["noise"] = [{"qubit": s.qubit, "axis": s.axis, "p": s.p} for s in specs]
    out = Path(cfg.out or ".")
    _write(out / "report.json", report.to_json())
    tables = {c: chop(t) for c, t in report.exact.items()}
    size = next(iter(tables.values())).size
    if qae_m is not None:
        pt = p_tilde(np.arange(size), qae_m)
        rows = [[z, _fmt(pt[z])] + [_fmt(tables[c][z]) for c in CONDITIONS] for z in range(size)]
        header = ["z", "p_tilde", *CONDITIONS]
    else:
        n = int(round(np.log2(size)))
        rows = [[format(i, f"0{n}b")] + [_fmt(tables[c][i]) for c in CONDITIONS]
                for i in range(size) if any(tables[c][i] != 0 for c in CONDITIONS)]
        header = ["bitstring", *CONDITIONS]
    _write(out / "report.csv", _csv(rows, header))
    if report.sampled:
        srows = [[c, _fmt(report.scores_sampled[c])] for c in CONDITIONS]
        _write(out / "scores_sampled.csv", _csv(srows, ["condition", "score"]))
    srows = [[c, _fmt(report.scores_exact[c])] for c in CONDITIONS]
    _write(out / "scores.csv", _csv(srows, ["condition", "score"]))
    for c in CONDITIONS:
        print(f"{c:>9}: exact {report.scores_exact[c]:.6f}"
              + (f"  sampled {report.scores_sampled[c]:.6f}" if report.sampled else ""))
    if not report.ok:
        for v in report.violations:
            print(f"invariant violated: {v}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_correct_counts(args) -> int:
    path = Path(args.input)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict) or "counts" not in raw:
        raise ConfigError(f"{path}: expected an object with a 'counts' field")
    unknown = set(raw) - {"counts", "shots", "eta"}
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {sorted(unknown)}")
    try:
        hist = Histogram.from_dict(raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    eta = {int(k): float(v) for k, v in (raw.get("eta") or {}).items()}
    default = 0.0
    if args.eta_preset:
        default = ETA_PRESETS[args.eta_preset]
    if args.eta is not None:
        default = args.eta
    for tok in args.eta_qubit or []:
        try:
            q, v = tok.split("=")
            eta[int(q)] = float(v)
        except ValueError:
            raise ConfigError(f"--eta-qubit expects QUBIT=ETA, got {tok!r}") from None
    try:
        mcfg = MitigationConfig(eta=eta, default_eta=default, negative_policy=args.policy)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    q = correct_joint(hist, mcfg)
    _check_weights("corrected", q.weights)
    text = _dump({"weights": q.to_dict(), "policy": q.policy, "tv_clip_loss": float(q.tv_clip_loss)})
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


CAL_KEYS = ("n_qubits", "shots", "seed", "out", "noise_placement")


def cmd_calibrate(args) -> int:
    cfg = _resolve(args, CAL_KEYS)
    n = cfg.n_qubits or (max((x.qubit for x in cfg.noise), default=0) + 1)
    specs = [x.spec() for x in cfg.noise]
    for s in specs:
        if s.qubit >= n:
            raise ConfigError(f"noise qubit {s.qubit} outside {n} qubits")
    mode = "state_noise" if cfg.noise_placement == "state" else "detector_noise"
    runner = simulator_runner({s.qubit: s.channel() for s in specs}, mode)
    res = calibrate_eta(runner, n, cfg.shots or 100_000, cfg.seed)
    payload = {str(q): {"eta": res.eta[q], "asymmetry": res.asymmetry[q]} for q in sorted(res.eta)}
    text = _dump(payload)
    if cfg.out:
        _write(Path(cfg.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------

def _add_common(p, *, noise=True):
    p.add_argument("--config", help="JSON run configuration (flags override it)")
    p.add_argument("--seed", type=int)
    p.add_argument("--shots", type=int)
    if noise:
        p.add_argument("--noise", action="append", metavar="Q:AXIS:P",
                       help="readout noise, e.g. 4:X:0.3, 6:Y:theta=1.1593, 0:dep:0.4 (repeatable)")


def _add_circuit(p):
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--algo", choices=["bv", "qae", "deutsch"])
    p.add_argument("--circuit", help="circuit file in the line format")
    p.add_argument("--s", help="BV hidden string")
    p.add_argument("--n", type=int, help="BV size (checked against --s)")
    p.add_argument("--m", type=int, help="QAE evaluation qubits")
    p.add_argument("--p", type=float, help="QAE amplitude")
    p.add_argument("--case", choices=["constant0", "constant1", "balanced_id", "balanced_not"])
    p.add_argument("--noise-impl", dest="noise_impl", choices=["kraus", "ancilla"])
    p.add_argument("--mode", choices=["exact", "sampled"])
    p.add_argument("--out", help="output directory")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="twirlmit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="exact or sampled run of a circuit")
    _add_circuit(p)
    _add_common(p)
    p.add_argument("--noise-placement", dest="noise_placement", choices=["state", "detector"])
    p.add_argument("--twirl", action="store_true", help="apply the three-unitary collective twirl")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mitigate", help="ideal / noisy / twirled / corrected comparison")
    _add_circuit(p)
    _add_common(p)
    p.add_argument("--eta", type=float, help="correction strength for every noisy qubit")
    p.add_argument("--eta-qubit", dest="eta_qubit", action="append", metavar="Q=ETA")
    p.add_argument("--eta-preset", dest="eta_preset", choices=sorted(ETA_PRESETS))
    p.add_argument("--policy", choices=["quasi", "clip_renormalize"])
    p.set_defaults(func=cmd_mitigate)

    p = sub.add_parser("correct-counts", help="post-process recorded counts")
    p.add_argument("input", help='JSON {"counts": {...}, "shots": N, "eta": {...}}')
    p.add_argument("--eta", type=float, help="eta for every bit without its own value")
    p.add_argument("--eta-qubit", dest="eta_qubit", action="append", metavar="Q=ETA")
    p.add_argument("--eta-preset", dest="eta_preset", choices=sorted(ETA_PRESETS))
    p.add_argument("--policy", choices=["quasi", "clip_renormalize"], default="quasi")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_correct_counts)

    p = sub.add_parser("calibrate", help="estimate per-qubit eta on the simulator")
    _add_common(p)
    p.add_argument("--n-qubits", dest="n_qubits", type=int)
    p.add_argument("--noise-placement", dest="noise_placement", choices=["state", "detector"])
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
