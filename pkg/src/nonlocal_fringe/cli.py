"""``nonlocal-fringe`` command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import fisher, mcsim, phaselock, visibility
from .config import ConfigError, RunConfig
from .errors import InputError, NumericError, SingularityError
from .sources import CoherenceModel, EntangledAncilla

COMMANDS = ("vh-curve", "budget", "fisher-scan", "mc", "g2", "phase-check")
BUDGET_COLUMNS = ("local-20ns", "20km-20ns", "20km-60ns", "delay-60ns")


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".12g")
    return str(v)


def to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


class Output:
    """CSV goes to ``--out`` (or stdout); human-readable reports go to the other stream."""

    def __init__(self, path: str | None):
        self.path = Path(path) if path else None
        self.report_stream = sys.stdout if self.path else sys.stderr

    def write(self, text: str, suffix: str = "") -> None:
        if self.path is None:
            sys.stdout.write(text)
            if suffix:
                sys.stdout.write("\n")
            return
        target = self.path if not suffix else self.path.with_name(self.path.stem + suffix + self.path.suffix)
        with open(target, "w", newline="\n") as fh:
            fh.write(text)

    def report(self, line: str) -> None:
        print(line, file=self.report_stream)


# ---------------------------------------------------------------- commands


def cmd_vh_curve(cfg: RunConfig, out: Output, seed: int | None) -> None:
    s = "vh-curve"
    g2_e = cfg.floats(s, "g2_e_list")
    if not g2_e:
        raise ConfigError(f"{cfg.where(s, 'g2_e_list')}: g2_e_list is empty")
    if cfg.has(s, "g2_s_list"):
        g2_s = cfg.floats(s, "g2_s_list")
    else:
        g2_s = [cfg.float(s, "g2_s")] * len(g2_e)
    if len(g2_s) != len(g2_e):
        raise ConfigError(f"{cfg.where(s, 'g2_s_list')}: need one g2_s per g2_e value")
    labels = cfg.strings(s, "labels", [f"{g:g}" for g in g2_e])
    if len(labels) != len(g2_e):
        raise ConfigError(f"{cfg.where(s, 'labels')}: need one label per g2_e value")
    lo, hi, n = cfg.float(s, "x_min"), cfg.float(s, "x_max"), cfg.int(s, "x_points")
    if not 0 < lo < hi or n < 2:
        raise ConfigError(f"{cfg.where(s, 'x_min')}: need 0 < x_min < x_max and x_points >= 2")
    optima = {lab: visibility.optimal_ratio(gs, ge) for lab, gs, ge in zip(labels, g2_s, g2_e)}
    xs = np.geomspace(lo, hi, n)
    marks = [x for x in optima.values() if lo <= x <= hi]
    xs = np.unique(np.concatenate([xs, marks]))
    rows = []
    for x in xs:
        vals = [visibility.v_h(x, gs, ge) for gs, ge in zip(g2_s, g2_e)]
        opt = ";".join(lab for lab, xo in optima.items() if xo == x)
        rows.append([x, *vals, opt])
    out.write(to_csv(["x", *[f"v_h_{lab}" for lab in labels], "optimum"], rows))
    for lab, gs, ge in zip(labels, g2_s, g2_e):
        xo = optima[lab]
        vmax = visibility.v_h(xo, gs, ge) if xo > 0 else 1.0
        note = " (limit x -> 0)" if xo == 0 else ""
        out.report(f"{lab}: g2_E={fmt(ge)} x*={xo:.4f} V_H(x*)={vmax:.4f}{note}")


def budget_inputs(cfg: RunConfig, section: str) -> visibility.BudgetInputs:
    names = {
        "snr": "snr", "eta_ro": "eta_ro", "p_ro": "p_ro", "x": "x", "g2_s": "g2_s", "g2_e": "g2_e",
        "g2_windowed": "g2_windowed", "sigma_thi": "sigma_thi_rad", "sigma_woi": "sigma_woi_rad",
        "sigma_wri": "sigma_wri_rad", "eta_l": "eta_l", "eta_r": "eta_r",
        "v_snr": "v_snr", "v_h": "v_h", "v_c": "v_c", "v_p": "v_p", "v_i": "v_i",
    }  # fmt: skip
    kw = {field: cfg.opt_float(section, key) for field, key in names.items()}
    inputs = visibility.BudgetInputs(**kw)
    missing = visibility.missing_inputs(inputs)
    if missing:
        keys = ", ".join(names[m] for m in missing)
        raise ConfigError(f"{cfg.source}: [{section}] is missing budget inputs: {keys}")
    return inputs


def cmd_budget(cfg: RunConfig, out: Output, seed: int | None) -> None:
    sections = [f"budget.{c}" for c in BUDGET_COLUMNS if cfg.parser.has_section(f"budget.{c}")]
    sections += [s for s in cfg.sections("budget") if s not in sections and s != "budget"]
    if not sections:
        raise ConfigError(f"{cfg.source}: no [budget.<column>] sections")
    header = ["column", "v_snr", "v_h", "v_c", "v_p", "v_i", "v_theory", "v_h_closed_form"]
    rows = []
    for sec in sections:
        inputs = budget_inputs(cfg, sec)
        b = visibility.budget(inputs)
        closed = (
            visibility.v_h(inputs.x, inputs.g2_s, inputs.g2_e)
            if None not in (inputs.x, inputs.g2_s, inputs.g2_e)
            else float("nan")
        )
        rows.append([sec.split(".", 1)[1], b.v_snr, b.v_h, b.v_c, b.v_p, b.v_i, b.v_theory, closed])
    out.write(to_csv(header, rows))
    out.report(f"{'column':<12} {'V_SNR':>7} {'V_H':>7} {'V_C':>7} {'V_P':>7} {'V_I':>7} {'V_theory':>9}")
    for r in rows:
        out.report(f"{r[0]:<12} " + " ".join(f"{v:7.4f}" for v in r[1:6]) + f" {r[6]:9.4f}")


def cmd_fisher_scan(cfg: RunConfig, out: Output, seed: int | None) -> None:
    s = "fisher-scan"
    eps, eta = cfg.float(s, "epsilon"), cfg.float(s, "eta")
    g, v = cfg.float(s, "g"), cfg.float(s, "v")
    phi = cfg.float(s, "phi_rad", 0.0)
    deltas = np.linspace(cfg.float(s, "delta_min_rad"), cfg.float(s, "delta_max_rad"), cfg.int(s, "delta_points"))
    rows = []
    singular = 0
    for d in deltas:
        notes = []
        try:
            ideal = fisher.fisher_ideal(eps, g, phi, d).trace_norm
        except SingularityError:
            ideal, notes = math.inf, notes + ["ideal"]
        try:
            prac = fisher.fisher_practical(eta, eps, v, phi, d).trace_norm
        except SingularityError:
            prac, notes = math.inf, notes + ["practical"]
        singular += bool(notes)
        rows.append([d, ideal, prac, eps**2, ";".join(f"singular_{n}" for n in notes)])
    out.write(to_csv(["delta", "trace_norm_ideal", "trace_norm_practical", "local_bound", "flag"], rows))
    if v < 1:
        bound = fisher.practical_upper_bound(eta, eps, v)
        out.report(f"practical bound eta*eps/(2(1-V^2)) = {bound:.6g}; local bound eps^2 = {eps**2:.6g}")
    if singular:
        out.report(f"{singular} singular delta value(s) flagged")


def experiment_config(cfg: RunConfig, seed: int | None) -> tuple[mcsim.ExperimentConfig, int]:
    base = "mc"
    scenario = cfg.str(base, "scenario", "local")
    sec_name = f"mc.{scenario}"
    if not cfg.parser.has_section(sec_name) and scenario != "local":
        raise ConfigError(f"{cfg.source}: unknown mc scenario {scenario!r} (no [{sec_name}])")

    def pick(key: str) -> str:
        return sec_name if cfg.has(sec_name, key) else base

    def f(key, default=None):
        return cfg.float(pick(key), key, default)

    ancilla = EntangledAncilla.from_retrieval(f("p1"), f("g2_e"), coherence=f("coherence_d", 1.0))
    det = mcsim.DetectorSpec(
        efficiency=f("efficiency", 1.0),
        window_ns=f("window_ns"),
        snr=f("snr", math.inf),
        p_ro=f("p_ro", 0.0),
        eta_ro=f("eta_ro", f("p1")),
        g2_windowed=cfg.opt_float(pick("g2_windowed"), "g2_windowed"),
    )
    sig = tuple(f(k, 0.0) for k in ("sigma_thi_rad", "sigma_woi_rad", "sigma_wri_rad"))
    points = cfg.int(pick("phase_points"), "phase_points", 12)
    ec = mcsim.ExperimentConfig.for_ratio(
        ancilla,
        f("x"),
        coherence=CoherenceModel(cfg.str(pick("coherence_form"), "coherence_form", "gaussian"), f("tau_c_ns", 15.4)),
        detectors=det,
        phase_points=mcsim.default_phase_grid(points),
        trials_per_point=cfg.int(pick("trials_per_point"), "trials_per_point"),
        seed=seed if seed is not None else cfg.int(pick("seed"), "seed", 0),
        signal_g=f("signal_g", 1.0),
        signal_phi=f("signal_phi_rad", 0.0),
        phase_sigmas=sig,
        mode_overlap=f("mode_overlap", 1.0),
        delay_ns=f("delay_ns", 0.0),
        arm_loss_db=f("arm_loss_db", 0.0),
    )
    return ec, cfg.int(pick("workers"), "workers", 1)


def cmd_mc(cfg: RunConfig, out: Output, seed: int | None) -> None:
    ec, workers = experiment_config(cfg, seed)
    scan = mcsim.run_fringe_scan(ec, workers=workers)
    rows = [[psi, *c] for psi, c in zip(scan.psi, scan.counts)]
    out.write(to_csv(["psi_rad", "N13", "N14", "N23", "N24"], rows))
    fit = scan.fit()
    out.report(f"V_fit={fit.amplitude:.4f} +- {fit.stderr:.4f}")
    out.report(
        f"predicted V={mcsim.predicted_visibility(ec):.4f} (two-photon order), "
        f"{mcsim.exact_visibility(ec):.4f} (full model)"
    )


def cmd_g2(cfg: RunConfig, out: Output, seed: int | None) -> None:
    s = "g2"
    path = cfg.str(s, "stream_file", "")
    model = CoherenceModel(cfg.str(s, "coherence_form", "gaussian"), cfg.float(s, "tau_c_ns", 15.4))
    seed = seed if seed is not None else cfg.int(s, "seed", 0)
    if path:
        stream = mcsim.EventStream.read(path)
    else:
        light = cfg.str(s, "light", "thermal")
        rate, dur = cfg.float(s, "rate_per_ns"), cfg.float(s, "duration_ns")
        if light == "thermal":
            stream = mcsim.simulate_thermal_stream(rate, model, dur, seed)
        elif light == "coherent":
            stream = mcsim.simulate_poisson_stream(rate, dur, seed)
        else:
            raise ConfigError(f"{cfg.where(s, 'light')}: light must be 'thermal' or 'coherent'")
    curve = mcsim.estimate_g2(stream, cfg.float(s, "bin_ns", 2.5), cfg.float(s, "tau_max_ns", 100.0))
    out.write(to_csv(["tau_ns", "g2"], zip(curve.tau_ns, curve.g2)))
    widths = cfg.floats(s, "windows_ns", [2.5, 5, 10, 20, 40, 60, 100])
    wg = mcsim.windowed_g2_stream(stream, widths)
    out.write(to_csv(["window_ns", "g2_windowed"], zip(widths, wg)), suffix="_windowed")
    out.report(f"g2(0)={curve.at_zero():.4f} from {stream.total} events")


def path_config(cfg: RunConfig) -> tuple[phaselock.PathConfig, phaselock.LockState]:
    s = "phase-check"
    lengths = {
        name: cfg.float(s, f"{name.lower()}_m", 0.0)
        for name in ("L_A", "L_B", "delta_A", "delta_B", "Lw_A", "Lw_B", "Lwo_A", "Lwo_B", "Lr_A", "Lr_B", "Lro_A", "Lro_B")
    }
    ks = 2 * math.pi / cfg.float(s, "wavelength_signal_m", 780.241e-9)
    kc = 2 * math.pi / cfg.float(s, "wavelength_control_m", 795.0e-9)
    waves = {"k_th": ks, "k_p": ks, "k_wo": ks, "k_ro": ks, "k_wr": kc, "k_w": kc, "k_r": kc}
    for k in waves:
        if cfg.has(s, f"{k}_per_m"):
            waves[k] = cfg.float(s, f"{k}_per_m")
    phases = {
        k: cfg.float(s, f"{k.lower()}_rad", 0.0)
        for k in ("Phi_w_A", "Phi_w_B", "Phi_r_A", "Phi_r_B", "pzt", "stretcher", "waveplate")
    }
    pc = phaselock.PathConfig(**lengths, **waves, **phases)
    lock = phaselock.LockState(cfg.float(s, "phi_th_rad"), cfg.float(s, "phi_woro_rad"), cfg.float(s, "phi_wr_rad"))
    return pc, lock


def cmd_phase_check(cfg: RunConfig, out: Output, seed: int | None) -> None:
    s = "phase-check"
    pc, lock = path_config(cfg)
    if cfg.bool(s, "engage", True):
        pc = phaselock.engage_locks(pc, lock)
    minus = cfg.bool(s, "minus_herald", False)
    res = phaselock.lock_residuals(pc, lock)
    rows = [[k, v] for k, v in res.items()]
    final = phaselock.residual_phase(pc, lock, minus_herald=minus)
    expected = phaselock.expected_phase(lock, minus_herald=minus)
    laser = phaselock.wrap(
        Fraction(pc.Phi_w_B) - Fraction(pc.Phi_w_A)
        + Fraction(pc.Phi_r_B) - Fraction(pc.Phi_r_A)
    )  # fmt: skip
    deviation = phaselock.wrap(Fraction(final) - Fraction(expected) - Fraction(laser))
    rows += [["final_phase", final], ["phi_th-phi_woro-phi_wr", expected], ["deviation", deviation]]

    n = cfg.int(s, "random_configs", 0)
    worst = 0.0
    if n:
        rng = np.random.default_rng(seed if seed is not None else cfg.int(s, "seed", 0))
        for _ in range(n):
            scale = rng.uniform(0.0, 2.0, 12)
            names = ("L_A", "L_B", "delta_A", "delta_B", "Lw_A", "Lw_B", "Lwo_A", "Lwo_B", "Lr_A", "Lr_B", "Lro_A", "Lro_B")
            moved = replace(pc, **{k: float(getattr(pc, k) * f) for k, f in zip(names, scale)})
            moved = phaselock.engage_locks(moved, lock)
            d = phaselock.wrap(
                Fraction(phaselock.residual_phase(moved, lock, minus_herald=minus))
                - Fraction(final)
            )
            worst = max(worst, abs(d))
        rows.append([f"max_deviation_over_{n}_relocked_configs", worst])
    for k, v in pc.wavenumber_deviations().items():
        rows.append([f"rel_detuning_{k}", v])
    out.write(to_csv(["quantity", "value_rad"], rows))
    for k, v in res.items():
        out.report(f"{k} residual = {v:.3e} rad")
    out.report(f"final phase {final:+.12f} rad, expected {expected:+.12f} rad")


HANDLERS = {
    "vh-curve": (cmd_vh_curve, ["vh-curve"]),
    "budget": (cmd_budget, None),
    "fisher-scan": (cmd_fisher_scan, ["fisher-scan"]),
    "mc": (cmd_mc, ["mc"]),
    "g2": (cmd_g2, ["g2"]),
    "phase-check": (cmd_phase_check, ["phase-check"]),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nonlocal-fringe", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="INI config file (default: shipped paper.cfg)")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("--seed", type=int, help="master random seed")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="set a config value; 'section.key=value' or bare 'key=value'")  # fmt: skip
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler, defaults = HANDLERS[args.command]
    try:
        cfg = RunConfig.load(args.config)
        if defaults is None:
            defaults = [s for s in cfg.sections("budget") if s != "budget"]
        if args.command == "mc":
            # a bare key must win over whichever scenario ends up selected
            defaults = cfg.sections("mc")
        cfg.apply_overrides(args.override, defaults)
        handler(cfg, Output(args.out), args.seed)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
