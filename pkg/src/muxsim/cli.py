"""Scenario-driven command-line front end.

Commands evaluate the analytic models over a power sweep, run the pulse
train simulator, fit observation CSVs, and emit CAR and spectral-overlap
reports.  CSV files are the authoritative outputs; SVG charts are
generated natively as a convenience.
"""

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import defaults
from .eventsim import PulseTrainConfig, run_pulse_train
from .fitting import load_observations_csv, fit_all, write_fit_table_csv
from .hsps import SourceParams, calibrate_coupling, squeezing_from_power
from .hsps import pass2_coincidence_prob, pass2_trigger_split, p_trig_signal
from .mux import (
    MuxBin,
    MuxProbabilities,
    MuxTopology,
    evaluate_mux,
    saturated_report,
)
from .report import RateReport
from .saturation import DeadtimeChain
from .spectral import fit_gaussian, indistinguishability_table


class ScenarioError(ValueError):
    """The scenario document is malformed."""


@dataclass(frozen=True)
class PowerSweep:
    start_mw: float
    stop_mw: float
    steps: int

    def __post_init__(self):
        if self.steps < 1:
            raise ScenarioError(f"steps must be >= 1, got {self.steps}")
        if self.steps > 1 and self.stop_mw <= self.start_mw:
            raise ScenarioError("power sweep must be strictly increasing")

    def powers(self) -> np.ndarray:
        return np.linspace(self.start_mw, self.stop_mw, self.steps)


@dataclass(frozen=True)
class Scenario:
    topology: MuxTopology
    sweep: PowerSweep
    amplifier_chain: DeadtimeChain
    idle_time_s: float
    cycles: int
    seed: int
    reference_power_mw: float

    @property
    def full_chain(self) -> DeadtimeChain:
        return self.amplifier_chain.extended(self.idle_time_s)


def _reject_unknown(obj: dict, allowed: Sequence[str], where: str) -> None:
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ScenarioError(f"unknown keys in {where}: {sorted(unknown)}")


def _parse_bin(obj: dict, index: int) -> MuxBin:
    where = f"topology.bins[{index}]"
    allowed = (
        "pass",
        "delay",
        "eta_i",
        "eta_s",
        "p_seed_mw",
        "back_reflection_fraction",
        "pump_fraction",
        "eta_sw",
    )
    _reject_unknown(obj, allowed, where)
    try:
        source = SourceParams(
            eta_i=obj["eta_i"],
            eta_s=obj["eta_s"],
            p_seed_mw=obj["p_seed_mw"],
            back_reflection_fraction=obj.get("back_reflection_fraction", 0.0),
        )
        return MuxBin(
            pass_id=obj["pass"],
            delay_id=obj["delay"],
            source=source,
            pump_fraction=obj["pump_fraction"],
            eta_sw=obj["eta_sw"],
        )
    except KeyError as exc:
        raise ScenarioError(f"{where}: missing key {exc}") from exc


def _parse_topology(obj: dict) -> MuxTopology:
    _reject_unknown(
        obj, ("eta_sw_mode", "bins", "rep_rate_hz", "bin_spacing_ns"), "topology"
    )
    if "bins" in obj:
        bins = tuple(_parse_bin(b, i) for i, b in enumerate(obj["bins"]))
        return MuxTopology(
            bins,
            rep_rate_hz=obj.get("rep_rate_hz", defaults.REP_RATE_HZ),
            bin_spacing_s=obj.get("bin_spacing_ns", 3.0) * 1e-9,
        )
    return defaults.default_topology(obj.get("eta_sw_mode", "composed"))


def parse_scenario(doc: dict) -> Scenario:
    allowed = (
        "topology",
        "power_sweep_mw",
        "deadtime_chain_s",
        "idle_time_s",
        "simulation",
    )
    _reject_unknown(doc, allowed, "scenario")
    sweep_obj = doc.get("power_sweep_mw", {"start": 0.0, "stop": 25.0, "steps": 26})
    _reject_unknown(sweep_obj, ("start", "stop", "steps"), "power_sweep_mw")
    sim_obj = doc.get("simulation", {})
    _reject_unknown(
        sim_obj, ("cycles", "seed", "reference_power_mw"), "simulation"
    )
    return Scenario(
        topology=_parse_topology(doc.get("topology", {})),
        sweep=PowerSweep(
            start_mw=sweep_obj.get("start", 0.0),
            stop_mw=sweep_obj.get("stop", 25.0),
            steps=sweep_obj.get("steps", 26),
        ),
        amplifier_chain=DeadtimeChain(
            tuple(doc.get("deadtime_chain_s", defaults.AMPLIFIER_CHAIN.stages))
        ),
        idle_time_s=doc.get("idle_time_s", defaults.IDLE_TIME_S),
        cycles=sim_obj.get("cycles", 1_000_000),
        seed=sim_obj.get("seed", 12345),
        reference_power_mw=sim_obj.get("reference_power_mw", 5.0),
    )


def load_scenario(path: Optional[str]) -> Scenario:
    if path is None:
        return parse_scenario({})
    with open(path) as fh:
        return parse_scenario(json.load(fh))


# --- native SVG line charts -------------------------------------------------

_COLORS = (
    "#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#d35400",
    "#16a085", "#7f8c8d", "#2c3e50", "#f39c12", "#3498db",
)


def svg_line_chart(
    path: Path,
    series: Dict[str, List[Tuple[float, float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    logy: bool = False,
) -> None:
    width, height, margin = 800, 500, 70
    points = [p for pts in series.values() for p in pts]
    if logy:
        points = [(x, y) for x, y in points if y > 0]
    if not points:
        points = [(0.0, 0.0), (1.0, 1.0)]
    xs = [p[0] for p in points]
    ys = [math.log10(p[1]) if logy else p[1] for p in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x: float) -> float:
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(y: float) -> float:
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="25" text-anchor="middle" font-size="16">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 20}" text-anchor="middle" '
        f'font-size="13">{xlabel}</text>',
        f'<text x="20" y="{height / 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 20 {height / 2})">{ylabel}'
        + ("(log10)" if logy else "") + "</text>",
    ]
    for i, (label, pts) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        draw = [(x, y) for x, y in pts if (y > 0 or not logy)]
        coords = " ".join(
            f"{sx(x):.2f},{sy(math.log10(y) if logy else y):.2f}" for x, y in draw
        )
        if coords:
            lines.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" '
                f'stroke-width="1.5"/>'
            )
        lines.append(
            f'<text x="{width - margin + 5}" y="{margin + 16 * i}" '
            f'font-size="11" fill="{color}">{label}</text>'
        )
    lines.append("</svg>")
    path.write_text("\n".join(lines) + "\n")


# --- model evaluation helpers ------------------------------------------------

def _single_source_probs(bin_: MuxBin, reference_power_mw: float) -> MuxProbabilities:
    """Per-cycle probabilities of one bin measured without the switch network."""
    power = reference_power_mw * bin_.pump_fraction
    if bin_.pass_id == 2:
        power *= 0.5
    c = calibrate_coupling(bin_.source.p_seed_mw)
    xi = squeezing_from_power(c, power).xi
    _, _, p_total = pass2_trigger_split(
        xi, bin_.source.eta_i, bin_.source.back_reflection_fraction
    )
    return MuxProbabilities(
        p_trig=p_total,
        p_coincidence=pass2_coincidence_prob(bin_.source, xi),
        p_accidental=p_total * p_trig_signal(xi, bin_.source.eta_s),
    )


def _extrinsic_removed_topology(topology: MuxTopology) -> MuxTopology:
    bins = tuple(
        MuxBin(
            b.pass_id,
            b.delay_id,
            b.source,
            b.pump_fraction,
            min(b.eta_sw / defaults.MEMS_ASYMMETRY, 1.0),
        )
        for b in topology.bins
    )
    return MuxTopology(bins, topology.rep_rate_hz, topology.bin_spacing_s)


def _model_rows(scenario: Scenario) -> List[dict]:
    """One row per (power, source) with saturated / unsaturated / extrinsic-
    removed rate variants."""
    topo = scenario.topology
    chain = scenario.full_chain
    rep = topo.rep_rate_hz
    extr_topo = _extrinsic_removed_topology(topo)
    pass1 = topo.subset(1)
    labels: List[Tuple[str, object]] = [("MUX8", topo), ("MUX4", pass1)]
    labels += [
        (defaults.source_label(b.pass_id, b.delay_id), b) for b in topo.bins
    ]
    rows = []
    for power in scenario.sweep.powers():
        for label, item in labels:
            if isinstance(item, MuxTopology):
                probs = evaluate_mux(item, power)
                extr = evaluate_mux(
                    extr_topo if label == "MUX8" else extr_topo.subset(1), power
                )
            else:
                probs = _single_source_probs(item, power)
                extr = probs
            sat = saturated_report(probs, rep, chain)
            unsat = saturated_report(probs, rep)
            extr_rep = saturated_report(extr, rep)
            rows.append(
                {
                    "power_mw": power,
                    "source": label,
                    "r_trig_hz": sat.r_trig_hz,
                    "r_c_hz": sat.r_coincidence_hz,
                    "r_a_hz": sat.r_accidental_hz,
                    "car": sat.car,
                    "r_trig_nosat_hz": unsat.r_trig_hz,
                    "r_c_nosat_hz": unsat.r_coincidence_hz,
                    "r_a_nosat_hz": unsat.r_accidental_hz,
                    "car_nosat": unsat.car,
                    "r_trig_extr_hz": extr_rep.r_trig_hz,
                    "r_c_extr_hz": extr_rep.r_coincidence_hz,
                    "r_a_extr_hz": extr_rep.r_accidental_hz,
                    "car_extr": extr_rep.car,
                }
            )
    return rows


def _write_csv(path: Path, fieldnames: Sequence[str], rows: Sequence[dict]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {
                    k: ("" if v is None else (f"{v:.10g}" if isinstance(v, float) else v))
                    for k, v in row.items()
                }
            )


# --- commands ----------------------------------------------------------------

def cmd_model(scenario: Scenario, out_dir: Path) -> List[Path]:
    rows = _model_rows(scenario)
    csv_path = out_dir / "rates_vs_power.csv"
    _write_csv(csv_path, list(rows[0].keys()), rows)
    series: Dict[str, List[Tuple[float, float]]] = {}
    for row in rows:
        series.setdefault(row["source"], []).append(
            (row["power_mw"], row["r_trig_hz"])
        )
    svg_path = out_dir / "rates_vs_power.svg"
    svg_line_chart(
        svg_path, series, "Trigger rates vs reference power",
        "reference power (mW)", "trigger rate (Hz)",
    )
    return [csv_path, svg_path]


def cmd_simulate(
    scenario: Scenario, out_dir: Path, export_trace: bool = False
) -> List[Path]:
    config = PulseTrainConfig(
        topology=scenario.topology,
        reference_power_mw=scenario.reference_power_mw,
        n_clock_cycles=scenario.cycles,
        deadtime_chain=scenario.amplifier_chain,
        idle_time_s=scenario.idle_time_s,
        rng_seed=scenario.seed,
    )
    trace, report = run_pulse_train(config)
    probs = evaluate_mux(scenario.topology, scenario.reference_power_mw)
    analytic = saturated_report(
        probs, scenario.topology.rep_rate_hz, scenario.full_chain
    )
    rows = []
    for name, sim, err, ana in (
        ("r_trig_hz", report.r_trig_hz, report.r_trig_err_hz, analytic.r_trig_hz),
        (
            "r_coincidence_hz",
            report.r_coincidence_hz,
            report.r_coincidence_err_hz,
            analytic.r_coincidence_hz,
        ),
        (
            "r_accidental_hz",
            report.r_accidental_hz,
            report.r_accidental_err_hz,
            analytic.r_accidental_hz,
        ),
    ):
        z = (sim - ana) / err if err and err > 0 else None
        rows.append(
            {"quantity": name, "simulated": sim, "std_error": err,
             "analytic": ana, "z_score": z}
        )
        z_text = f"{z:+.2f}" if z is not None else "n/a"
        print(f"{name}: sim={sim:.6g} Hz analytic={ana:.6g} Hz z={z_text}")
    csv_path = out_dir / "simulation_report.csv"
    _write_csv(
        csv_path, ["quantity", "simulated", "std_error", "analytic", "z_score"], rows
    )
    written = [csv_path]
    if export_trace:
        trace_path = out_dir / "trace.csv"
        trace.to_csv(trace_path)
        written.append(trace_path)
    return written


def cmd_fit(
    observations_csv: str, model_kind: str, out_dir: Path, scenario: Scenario
) -> List[Path]:
    by_source = load_observations_csv(observations_csv)
    kinds = {label: model_kind for label in by_source}
    results = fit_all(
        by_source,
        kinds,
        scenario.full_chain,
        rep_rate_hz=scenario.topology.rep_rate_hz,
        seed=scenario.seed,
    )
    csv_path = out_dir / "fit_results.csv"
    write_fit_table_csv(csv_path, results)
    return [csv_path]


def cmd_car(scenario: Scenario, out_dir: Path) -> List[Path]:
    rows = _model_rows(scenario)
    car_rows = []
    for row in rows:
        if row["car"] is None:
            continue
        car_rows.append(
            {
                "source": row["source"],
                "power_mw": row["power_mw"],
                "car": row["car"],
                "r_c_hz": row["r_c_hz"],
                "car_extr": row["car_extr"],
                "r_c_extr_hz": row["r_c_extr_hz"],
            }
        )
    csv_path = out_dir / "car_curves.csv"
    _write_csv(
        csv_path,
        ["source", "power_mw", "car", "r_c_hz", "car_extr", "r_c_extr_hz"],
        car_rows,
    )
    series: Dict[str, List[Tuple[float, float]]] = {}
    for row in car_rows:
        series.setdefault(row["source"], []).append((row["car"], row["r_c_hz"]))
    svg_path = out_dir / "car_curves.svg"
    svg_line_chart(
        svg_path, series, "Coincidence rate vs CAR", "CAR",
        "coincidence rate (Hz)", logy=True,
    )
    return [csv_path, svg_path]


def cmd_spectra(spectra_dir: str, out_dir: Path) -> List[Path]:
    directory = Path(spectra_dir)
    files = sorted(directory.glob("*.csv"))
    if not files:
        raise FileNotFoundError(f"no spectra CSV files in {spectra_dir}")
    labels, models = [], []
    for file in files:
        data = np.genfromtxt(file, delimiter=",", names=True)
        samples = list(zip(data["wavelength_nm"], data["counts"]))
        model, _ = fit_gaussian(samples)
        labels.append(file.stem)
        models.append(model)
    if len(models) == 1:
        table = np.ones((1, 1))
    else:
        table = indistinguishability_table(models)
    csv_path = out_dir / "gamma_matrix.csv"
    rows = []
    for label, row in zip(labels, table):
        entry = {"source": label}
        entry.update({l: float(v) for l, v in zip(labels, row)})
        rows.append(entry)
    _write_csv(csv_path, ["source"] + labels, rows)
    return [csv_path]


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="muxsim",
        description="Multiplexed heralded single-photon source toolkit",
    )
    parser.add_argument("command", choices=["model", "simulate", "fit", "car", "spectra"])
    parser.add_argument("--scenario", help="scenario JSON file (defaults built in)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, help="override simulation seed")
    parser.add_argument("--cycles", type=int, help="override simulation cycles")
    parser.add_argument("--trace", action="store_true", help="export per-cycle trace CSV")
    parser.add_argument("--observations", help="observations CSV (fit command)")
    parser.add_argument(
        "--model-kind", choices=["pass1", "pass2"], default="pass1",
        help="source model used by the fit command",
    )
    parser.add_argument("--spectra-dir", help="directory of spectrum CSVs (spectra command)")
    args = parser.parse_args(argv)

    try:
        scenario = load_scenario(args.scenario)
        if args.seed is not None or args.cycles is not None:
            scenario = Scenario(
                topology=scenario.topology,
                sweep=scenario.sweep,
                amplifier_chain=scenario.amplifier_chain,
                idle_time_s=scenario.idle_time_s,
                cycles=args.cycles if args.cycles is not None else scenario.cycles,
                seed=args.seed if args.seed is not None else scenario.seed,
                reference_power_mw=scenario.reference_power_mw,
            )
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "model":
            written = cmd_model(scenario, out_dir)
        elif args.command == "simulate":
            written = cmd_simulate(scenario, out_dir, export_trace=args.trace)
        elif args.command == "fit":
            if not args.observations:
                raise ScenarioError("fit requires --observations")
            written = cmd_fit(args.observations, args.model_kind, out_dir, scenario)
        elif args.command == "car":
            written = cmd_car(scenario, out_dir)
        else:
            if not args.spectra_dir:
                raise ScenarioError("spectra requires --spectra-dir")
            written = cmd_spectra(args.spectra_dir, out_dir)
    except Exception as exc:  # noqa: BLE001 - single CLI error funnel
        print(
            json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
            file=sys.stderr,
        )
        return 1
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
