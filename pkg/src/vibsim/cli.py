"""Command-line front end.

Subcommands build term lists (``terms``), run Trotter dynamics
(``evolve``), Fourier-analyse a run (``spectrum``), tabulate eigenstates
(``table``) and report encoding resources (``resources``). Every run
writes its resolved configuration to ``<out>/run.json``; passing that file
back through ``--config`` reproduces the artifacts.

Exit codes: 0 success, 2 usage/config error, 3 resource-cap error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, gm, model, trotter
from .encoding import EncodingScheme, scheme_resources
from .model import Convention, ResourceLimitError, VibrationalModel

log = logging.getLogger("vibsim")

EXIT_USAGE = 2
EXIT_RESOURCE = 3

FS_PER_PS = 1000.0

PRESET_DEFAULTS = {
    "co2": {"dt_ps": 0.01, "n_steps": 100, "initial_state": [1, 0], "spectrum_grid": [0.0, 200.0, 2001]},
    "h2o": {"dt_ps": 0.53 / FS_PER_PS, "n_steps": 76, "initial_state": [2, 0, 0],
            "spectrum_grid": [0.0, 8000.0, 8001]},
}

# reference excitation energies for the H2O preset (cm^-1), lowest four states
H2O_EXPERIMENT = [1594.75, 3151.63, 3755.93, 3657.05]


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    model: str = "co2"
    vmax: int = 3
    encoding: str = "qudit"
    convention: str = Convention.EXACT.value
    dt_ps: float | None = None
    n_steps: int | None = None
    eps2q: float = 1e-3
    initial_state: list | None = None
    tracked_states: list | None = None
    spectrum_grid: list | None = None
    detrend: bool = True
    trace: str = "noisy"
    engine: str = trotter.Engine.STATEVECTOR.value
    with_reference: bool = False
    emax: float = 13000.0
    threshold: float = 0.2
    output_dir: str = "out"
    extra: dict = field(default_factory=dict)

    def resolve(self, vib: VibrationalModel) -> "RunConfig":
        base = PRESET_DEFAULTS.get(self.model.lower(), {})
        if self.dt_ps is None:
            self.dt_ps = base.get("dt_ps", 0.01)
        if self.n_steps is None:
            self.n_steps = base.get("n_steps", 100)
        if self.initial_state is None:
            self.initial_state = base.get("initial_state", [1] + [0] * (vib.n_modes - 1))
        if self.tracked_states is None:
            self.tracked_states = [list(self.initial_state)]
        if self.spectrum_grid is None:
            self.spectrum_grid = base.get("spectrum_grid", [0.0, 5000.0, 5001])
        self.initial_state = [int(x) for x in self.initial_state]
        self.tracked_states = [[int(x) for x in v] for v in self.tracked_states]
        self.spectrum_grid = [float(self.spectrum_grid[0]), float(self.spectrum_grid[1]),
                              int(self.spectrum_grid[2])]
        self.validate()
        return self

    def validate(self):
        if self.dt_ps is not None and self.dt_ps <= 0:
            raise UsageError("dt must be positive")
        if self.n_steps is not None and self.n_steps < 1:
            raise UsageError("need at least one Trotter step (trace would be empty)")
        if not 0.0 <= self.eps2q <= 1.0:
            raise UsageError("eps2q must lie in [0, 1]")
        if self.vmax < 0:
            raise UsageError("vmax must be >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d


def load_model(spec: str) -> VibrationalModel:
    path = Path(spec)
    if path.suffix == ".json" or path.exists():
        if not path.exists():
            raise UsageError(f"model file {spec} not found")
        return VibrationalModel.from_json(path)
    try:
        return model.preset(spec)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def parse_dt(text: str) -> float:
    """Time step in ps; accepts a 'fs' or 'ps' suffix."""
    s = text.strip().lower()
    try:
        if s.endswith("fs"):
            return float(s[:-2]) / FS_PER_PS
        if s.endswith("ps"):
            return float(s[:-2])
        return float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad time step {text!r}") from None


def parse_state(text: str) -> list[int]:
    parts = text.replace(",", " ").split()
    if not parts:
        raise argparse.ArgumentTypeError("empty state")
    if len(parts) == 1 and len(parts[0]) > 1 and parts[0].isdigit():
        parts = list(parts[0])
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad state {text!r}") from None


def parse_grid(text: str) -> list:
    parts = text.replace(",", " ").split()
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid is nu_min,nu_max,n_points")
    try:
        return [float(parts[0]), float(parts[1]), int(parts[2])]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def _add_common(p: argparse.ArgumentParser, dynamics: bool):
    p.add_argument("--config", help="run.json from a previous run")
    p.add_argument("--model", help="preset (co2, h2o) or model JSON file")
    p.add_argument("--vmax", type=int)
    p.add_argument("--encoding", choices=["binary", "direct", "qudit"])
    p.add_argument("--convention", choices=[c.value for c in Convention])
    p.add_argument("--out", dest="output_dir")
    if dynamics:
        p.add_argument("--dt", dest="dt_ps", type=parse_dt, help="Trotter step, ps (or e.g. 0.53fs)")
        p.add_argument("--steps", dest="n_steps", type=int)
        p.add_argument("--eps2q", type=float)
        p.add_argument("--initial", dest="initial_state", type=parse_state)
        p.add_argument("--track", dest="tracked_states", type=parse_state, action="append")
        p.add_argument("--engine", choices=[e.value for e in trotter.Engine])
        p.add_argument("--with-reference", dest="with_reference", action="store_const", const=True)
        p.add_argument("--grid", dest="spectrum_grid", type=parse_grid)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vibsim", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("terms", help="encoded term list and N_Hq histogram"), False)
    _add_common(sub.add_parser("resources", help="site counts for an encoding"), False)
    p = sub.add_parser("evolve", help="Trotter dynamics with depolarizing noise")
    _add_common(p, True)
    p = sub.add_parser("spectrum", help="Fourier spectrum of a population trace")
    _add_common(p, True)
    p.add_argument("--trace", choices=["noisy", "ideal", "exact"])
    p.add_argument("--no-detrend", dest="detrend", action="store_const", const=False)
    p = sub.add_parser("table", help="eigenvalues with dominant configurations")
    _add_common(p, False)
    p.add_argument("--emax", type=float)
    p.add_argument("--threshold", type=float)
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        known = set(RunConfig.__dataclass_fields__) - {"extra"}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        cfg = RunConfig(**data)
    for key in RunConfig.__dataclass_fields__:
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=1) + "\n"


def _scheme(cfg: RunConfig, vib: VibrationalModel) -> EncodingScheme:
    try:
        return EncodingScheme(cfg.encoding, cfg.vmax, vib.n_modes)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_resources(cfg, vib, out):
    report = scheme_resources(_scheme(cfg, vib))
    _write(out, "resources.json", _dump(report))
    return report


def cmd_terms(cfg, vib, out):
    scheme = _scheme(cfg, vib)
    terms = gm.build_encoded_hamiltonian(vib, cfg.vmax, scheme, Convention(cfg.convention))
    hist = terms.histogram()
    report = {
        "encoding": scheme.kind.value,
        "n_hq": terms.n_hq,
        "n_hq_by_order": {str(k): v for k, v in hist.items()},
        "n2q": gm.two_site_gate_count(terms),
        **scheme_resources(scheme),
    }
    _write(out, "terms.json", terms.to_json() + "\n")
    _write(out, "terms.csv", terms.to_csv())
    _write(out, "histogram.json", _dump(report))
    return report


def _run_dynamics(cfg, vib):
    scheme = _scheme(cfg, vib)
    terms = gm.build_encoded_hamiltonian(vib, cfg.vmax, scheme, Convention(cfg.convention))
    ordered = trotter.optimize_ordering(terms, cfg.dt_ps)
    try:
        result = trotter.evolve(ordered, cfg.initial_state, cfg.dt_ps, cfg.n_steps,
                                trotter.NoiseSpec(cfg.eps2q), cfg.tracked_states, cfg.engine)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return terms, ordered, result


def _exact_traces(cfg, vib, times):
    eig = model.diagonalize(model.build_full_hamiltonian(vib, cfg.vmax, Convention(cfg.convention)),
                            cfg.vmax, vib.n_modes)
    traces = {tuple(v): model.exact_populations(eig, cfg.initial_state, v, times)
              for v in cfg.tracked_states}
    return eig, traces


def _ideal_traces(cfg, ordered, result):
    if result.ideal is not None:
        return result.ideal
    clean = trotter.evolve(ordered, cfg.initial_state, cfg.dt_ps, cfg.n_steps, 0.0,
                           cfg.tracked_states, cfg.engine)
    return clean.populations


def cmd_evolve(cfg, vib, out):
    terms, ordered, result = _run_dynamics(cfg, vib)
    tau = trotter.predicted_decay_time(terms, cfg.dt_ps, cfg.eps2q)
    summary = {
        "n_hq": terms.n_hq,
        "n2q": gm.two_site_gate_count(terms),
        "st_error": ordered.st_error,
        "tau_predicted_ps": None if tau == float("inf") else tau,
        "final_fidelity": float(result.fidelity[-1]),
    }
    extra = {}
    if cfg.with_reference:
        _, exact = _exact_traces(cfg, vib, result.times)
        ideal = _ideal_traces(cfg, ordered, result)
        summary["no_noise_vs_exact"] = {}
        for v in result.populations:
            label = trotter.state_label(v)
            extra[f"exact_p_{label}"] = exact[v]
            extra[f"nonoise_p_{label}"] = ideal[v]
            summary["no_noise_vs_exact"][label] = analysis.compare_series(ideal[v], exact[v])
    _write(out, "populations.csv", result.to_csv(extra))
    _write(out, "ordering.json", ordered.to_json() + "\n")
    _write(out, "summary.json", _dump(summary))
    return summary


def cmd_spectrum(cfg, vib, out):
    terms, ordered, result = _run_dynamics(cfg, vib)
    eig, exact = _exact_traces(cfg, vib, result.times)
    v0 = tuple(cfg.initial_state)
    v = tuple(cfg.tracked_states[0])
    if cfg.trace == "noisy":
        trace = result.populations[v]
    elif cfg.trace == "ideal":
        trace = _ideal_traces(cfg, ordered, result)[v]
    else:
        trace = exact[v]
    sticks = model.transition_sticks(eig, v0, v, weight_floor=0.01)
    lo, hi, n = cfg.spectrum_grid
    try:
        spec = analysis.dft_spectrum(result.times, trace, lo, hi, n, cfg.detrend, sticks)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sticks_in = [s for s in sticks if lo <= s[0] <= hi]
    spec = analysis.Spectrum(spec.wavenumbers, spec.amplitudes, spec.scale, sticks_in)
    _write(out, "spectrum.csv", spec.to_csv())
    _write(out, "sticks.csv", spec.sticks_csv())
    summary = {"trace": cfg.trace, "peak_cm1": spec.peak(), "raw_max": spec.scale,
               "n_sticks": len(sticks_in)}
    _write(out, "summary.json", _dump(summary))
    return summary


def cmd_table(cfg, vib, out):
    conv = Convention(cfg.convention)
    eig = model.diagonalize(model.build_full_hamiltonian(vib, cfg.vmax, conv), cfg.vmax, vib.n_modes)
    labels = model.label_eigenstates(eig, vib, cfg.threshold)
    rows = []
    lines = ["n,symmetry,energy_cm1,configurations,resonance"]
    for lab in labels:
        if lab.energy > cfg.emax:
            break
        weights = sorted((w for _, w in lab.configs), reverse=True)
        resonance = len(weights) >= 2 and weights[1] >= 0.3
        cfgs = " ".join(f"{trotter.state_label(c)}({w:.2f})" for c, w in lab.configs)
        rows.append({"n": lab.index, "symmetry": lab.symmetry, "energy_cm1": lab.energy,
                     "configurations": [[list(c), w] for c, w in lab.configs], "resonance": resonance})
        lines.append(f"{lab.index},{lab.symmetry or ''},{lab.energy:.17g},{cfgs},{int(resonance)}")
    excitation = [float(e - eig.energies[0]) for e in eig.energies[1:5]]
    report = {"n_rows": len(rows), "convention": conv.value, "rows": rows,
              "excitation_cm1": excitation}
    if vib.name == "h2o":
        report["excitation_experiment_cm1"] = H2O_EXPERIMENT
    _write(out, "table.csv", "\n".join(lines) + "\n")
    _write(out, "table.json", _dump(report))
    return {"n_rows": len(rows), "excitation_cm1": excitation,
            "resonance_rows": [r["n"] for r in rows if r["resonance"]]}


COMMANDS = {"terms": cmd_terms, "resources": cmd_resources, "evolve": cmd_evolve,
            "spectrum": cmd_spectrum, "table": cmd_table}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        vib = load_model(cfg.model)
        cfg.resolve(vib)
        out = Path(cfg.output_dir)
        result = COMMANDS[args.command](cfg, vib, out)
        _write(out, "run.json", _dump(cfg.to_dict()))
    except ResourceLimitError as exc:
        print(f"vibsim: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (UsageError, ValueError, KeyError) as exc:
        print(f"vibsim: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(result, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
