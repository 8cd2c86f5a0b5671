"""Command-line front end: config parsing, experiment presets, CSV/JSON output.

Configs are INI files with sections [scenario], [sweep], [beampattern],
[clusters], [validate], and [output].  Keys carry explicit unit suffixes
(eta_thr_db, noise_power_linear, *_deg); everything internal is linear and in
radians, and dB conversion happens only at this boundary.  Unknown sections or
keys are rejected at parse time.

Every run writes a manifest: the fully resolved config plus a [provenance]
section.  Re-running the same subcommand with --config <manifest> reproduces
the output files byte-for-byte (given the same kernel backend).

Exit codes: 0 success, 2 config error, 3 non-convergence (a selection run or
sweep point failed to converge), 4 validation failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from ._kernels import BACKEND
from .beampattern import (ActiveCluster, average_beampattern,
                          average_total_inr, default_angle_grid,
                          sample_beampattern, synchronize,
                          write_beampattern_csv)
from .core import PrefixedStreams, RngStreams, Scenario, sample_network
from .montecarlo import (SweepSpec, _M64, _mix64, empirical_ccdf,
                         negative_binomial_trials, phase_difference_moments,
                         sweep_average_inr, sweep_expected_trials,
                         write_sweep_csv)
from .selection import (FIXED_CHANNEL, REDRAW_PER_TRIAL,
                        multi_cluster_scenarios, run_multi_cluster,
                        run_selection, sample_cluster_networks, verify_outcome,
                        write_trial_log_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_VALIDATION = 4

_CASES = ("case1", "case2", "case3", "case4")
_SWEEP_KIND = {"sweep-trials": "trials", "sweep-inr": "inr", "ccdf": "ccdf"}

# kind is "int", "float", "int_list", "float_list", or a tuple of enum values
_SCHEMA: dict[str, tuple] = {
    "scenario": (
        ("num_candidates", "int", True, None),
        ("num_selected", "int", True, None),
        ("group_size", "int", True, None),
        ("disk_radius_wavelengths", "float", True, None),
        ("intended_direction_deg", "float", True, None),
        ("unintended_directions_deg", "float_list", True, None),
        ("eta_thr_db", "float", True, None),
        ("target_snr_db", "float", True, None),
        ("noise_power_linear", "float", True, None),
        ("lognormal_mean", "float", True, None),
        ("lognormal_var", "float", True, None),
        ("node_distribution", ("uniform_disk", "gaussian_disk"), False,
         "uniform_disk"),
        ("seed", "int", False, 0),
    ),
    "sweep": (
        ("kind", ("trials", "inr", "ccdf"), True, None),
        ("axis", ("eta_thr", "L", "D", "K", "N"), True, None),
        ("values_db", "float_list", False, None),
        ("values", "int_list", False, None),
        ("curve_key", ("group_size", "D"), False, None),
        ("curve_values", "int_list", False, None),
        ("grid_db", "float_list", False, None),
        ("cluster_targets_deg", "float_list", False, None),
        ("runs_per_point", "int", True, None),
        ("mode", (FIXED_CHANNEL, REDRAW_PER_TRIAL), True, None),
        ("seed_base", "int", True, None),
        ("max_trials", "int", False, None),
        ("skip_predicted_above", "float", False, None),
    ),
    "beampattern": (
        ("angle_points", "int", False, 3601),
        ("average_realizations", "int", False, 200),
    ),
    "clusters": (
        ("targets_deg", "float_list", True, None),
    ),
    "validate": (
        ("draws", "int", False, 1000000),
        ("sequences", "int", False, 100000),
        ("seed", "int", False, 0),
    ),
    "output": (
        ("format", ("csv", "json"), False, "csv"),
    ),
}

_REQUIRED_SECTIONS = {
    "beampattern": ("scenario",),
    "select": ("scenario",),
    "sweep-trials": ("scenario", "sweep"),
    "sweep-inr": ("scenario", "sweep"),
    "ccdf": ("scenario", "sweep"),
    "validate-appendix": (),
}
for _c in _CASES:
    _REQUIRED_SECTIONS[_c] = ("scenario",)

# sections added with pure defaults when a subcommand needs them
_AUTO_SECTIONS = {
    "beampattern": ("beampattern", "output"),
    "select": ("output",),
    "sweep-trials": ("output",),
    "sweep-inr": ("output",),
    "ccdf": ("output",),
    "validate-appendix": ("validate", "output"),
}
for _c in _CASES:
    _AUTO_SECTIONS[_c] = ("beampattern", "output")


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


def _parse_scalar(kind, raw: str, where: str):
    raw = raw.strip()
    if isinstance(kind, tuple):
        if raw not in kind:
            raise ConfigError(
                f"{where}: expected one of {', '.join(kind)}, got {raw!r}")
        return raw
    if kind == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{where}: expected an integer, got {raw!r}") \
                from None
    if kind == "float":
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError(f"{where}: expected a number, got {raw!r}") \
                from None
        if not math.isfinite(value):
            raise ConfigError(f"{where}: value must be finite")
        return value
    raise AssertionError(kind)


def _parse_value(kind, raw: str, where: str):
    if kind in ("int_list", "float_list"):
        parts = [p for p in raw.split(",")]
        if not parts or not any(p.strip() for p in parts):
            raise ConfigError(f"{where}: expected a comma-separated list")
        scalar = kind[:-5]
        return tuple(_parse_scalar(scalar, p, where) for p in parts)
    return _parse_scalar(kind, raw, where)


def _format_value(kind, value) -> str:
    if kind == "int":
        return str(int(value))
    if kind == "float":
        return repr(float(value))
    if kind == "int_list":
        return ",".join(str(int(v)) for v in value)
    if kind == "float_list":
        return ",".join(repr(float(v)) for v in value)
    return str(value)


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    """INI text -> {section: {key: raw string}}; [provenance] is dropped."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   strict=True)
    try:
        cp.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {exc}") from None
    if cp.defaults():
        raise ConfigError(f"{origin}: [DEFAULT] section is not supported")
    raw = {}
    for section in cp.sections():
        if section == "provenance":
            continue
        raw[section] = dict(cp.items(section))
    return raw


def resolve_config(raw: dict, subcommand: str) -> dict:
    """Validate a raw config against the schema and fill in defaults.

    Returns a typed config dict in canonical section and key order; unknown
    sections or keys raise ConfigError.
    """
    for section in raw:
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
    for section in _REQUIRED_SECTIONS[subcommand]:
        if section not in raw:
            raise ConfigError(f"missing required section [{section}]")
    sections = dict(raw)
    for section in _AUTO_SECTIONS[subcommand]:
        sections.setdefault(section, {})
    cfg: dict[str, dict] = {}
    for section in _SCHEMA:
        if section not in sections:
            continue
        entries = sections[section]
        schema = _SCHEMA[section]
        known = {key for key, _, _, _ in schema}
        for key in entries:
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
        resolved = {}
        for key, kind, required, default in schema:
            if key in entries:
                value = entries[key]
                if isinstance(value, str):
                    value = _parse_value(kind, value, f"[{section}] {key}")
                resolved[key] = value
            elif required:
                raise ConfigError(f"[{section}] is missing required key {key!r}")
            elif default is not None:
                resolved[key] = default
        cfg[section] = resolved
    return cfg


def serialize_config(cfg: dict, provenance: dict | None = None) -> str:
    """Canonical INI text for a resolved config (same order, repr floats)."""
    lines = []
    for section in _SCHEMA:
        if section not in cfg:
            continue
        lines.append(f"[{section}]")
        for key, kind, _required, _default in _SCHEMA[section]:
            if key in cfg[section] and cfg[section][key] is not None:
                lines.append(f"{key} = {_format_value(kind, cfg[section][key])}")
        lines.append("")
    if provenance:
        lines.append("[provenance]")
        for key, value in provenance.items():
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply --set SECTION.KEY=VALUE items onto a raw string config."""
    out = {section: dict(entries) for section, entries in raw.items()}
    for item in overrides:
        head, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set needs SECTION.KEY=VALUE, got {item!r}")
        section, dot, key = head.strip().partition(".")
        if not dot or not section or not key:
            raise ConfigError(f"--set needs SECTION.KEY=VALUE, got {item!r}")
        if section not in _SCHEMA:
            raise ConfigError(f"--set: unknown section [{section}]")
        if key not in {k for k, _, _, _ in _SCHEMA[section]}:
            raise ConfigError(f"--set: unknown key {key!r} in [{section}]")
        out.setdefault(section, {})[key] = value
    return out


def available_presets() -> list[str]:
    root = resources.files("beamselect").joinpath("presets")
    return sorted(entry.name[:-4] for entry in root.iterdir()
                  if entry.name.endswith(".ini"))


def load_preset_text(name: str) -> str:
    entry = resources.files("beamselect").joinpath("presets", f"{name}.ini")
    if not entry.is_file():
        raise ConfigError(f"unknown preset {name!r}; "
                          f"available: {', '.join(available_presets())}")
    return entry.read_text(encoding="utf-8")


def build_scenario(cfg: dict) -> Scenario:
    s = cfg["scenario"]
    try:
        return Scenario(
            num_candidates=s["num_candidates"],
            num_selected=s["num_selected"],
            group_size=s["group_size"],
            disk_radius_wavelengths=s["disk_radius_wavelengths"],
            intended_direction=math.radians(s["intended_direction_deg"]),
            unintended_directions=tuple(
                math.radians(d) for d in s["unintended_directions_deg"]),
            inr_threshold=10.0 ** (s["eta_thr_db"] / 10.0),
            target_snr=10.0 ** (s["target_snr_db"] / 10.0),
            noise_power=s["noise_power_linear"],
            lognormal_mean=s["lognormal_mean"],
            lognormal_var=s["lognormal_var"],
            node_distribution=s["node_distribution"],
            seed=s["seed"],
        )
    except ValueError as exc:
        raise ConfigError(f"invalid scenario: {exc}") from None


def curve_seed(seed_base: int, curve_value: int) -> int:
    """Independent seed base for one curve of a multi-curve sweep."""
    return _mix64(_mix64(seed_base & _M64) ^ (curve_value & _M64))


def build_sweeps(cfg: dict, subcommand: str) -> list[tuple[str, SweepSpec]]:
    """One (label, SweepSpec) per curve; a single-curve sweep has label ''."""
    sw = cfg["sweep"]
    kind = sw["kind"]
    if kind != _SWEEP_KIND[subcommand]:
        raise ConfigError(
            f"config declares kind = {kind} but the subcommand is {subcommand}")
    axis = sw["axis"]
    allowed = {"trials": ("eta_thr", "L", "D"), "inr": ("eta_thr", "L"),
               "ccdf": ("eta_thr", "K")}[kind]
    if axis not in allowed:
        raise ConfigError(
            f"axis {axis!r} is not valid for a {kind} sweep "
            f"(allowed: {', '.join(allowed)})")
    if axis == "eta_thr":
        if sw.get("values") is not None:
            raise ConfigError("threshold sweeps take values_db, not values")
        if sw.get("values_db") is None:
            raise ConfigError("[sweep] needs values_db")
        values = tuple(10.0 ** (v / 10.0) for v in sw["values_db"])
    else:
        if sw.get("values_db") is not None:
            raise ConfigError(f"{axis} sweeps take values, not values_db")
        if sw.get("values") is None:
            raise ConfigError("[sweep] needs values")
        values = tuple(sw["values"])
    if kind == "ccdf":
        if sw.get("grid_db") is None:
            raise ConfigError("ccdf sweeps need grid_db")
        if sw.get("curve_key") is not None or sw.get("curve_values") is not None:
            raise ConfigError("ccdf sweeps do not take curves; the axis "
                              "values are the curves")
    else:
        if sw.get("grid_db") is not None:
            raise ConfigError("grid_db only applies to ccdf sweeps")
        if sw.get("cluster_targets_deg") is not None:
            raise ConfigError("cluster_targets_deg only applies to ccdf sweeps")
    has_key = sw.get("curve_key") is not None
    has_vals = sw.get("curve_values") is not None
    if has_key != has_vals:
        raise ConfigError("curve_key and curve_values go together")

    base = build_scenario(cfg)
    cluster_targets = None
    if sw.get("cluster_targets_deg") is not None:
        cluster_targets = tuple(
            math.radians(t) for t in sw["cluster_targets_deg"])

    curves: list[tuple[str, Scenario, int]] = []
    if has_key:
        key = sw["curve_key"]
        for v in sw["curve_values"]:
            seed = curve_seed(sw["seed_base"], v)
            if key == "group_size":
                curves.append((f"L{v}", base.replace(group_size=v), seed))
            else:
                if not 1 <= v <= len(base.unintended_directions):
                    raise ConfigError(
                        f"curve D={v} needs {v} unintended directions, the "
                        f"scenario has {len(base.unintended_directions)}")
                sub = base.replace(
                    unintended_directions=base.unintended_directions[:v])
                curves.append((f"D{v}", sub, seed))
    else:
        curves.append(("", base, sw["seed_base"]))

    specs = []
    for label, scen, seed in curves:
        try:
            specs.append((label, SweepSpec(
                base=scen, axis=axis, values=values,
                runs_per_point=sw["runs_per_point"], mode=sw["mode"],
                seed_base=seed, max_trials=sw.get("max_trials"),
                cluster_targets=cluster_targets,
                skip_predicted_above=sw.get("skip_predicted_above"))))
        except ValueError as exc:
            raise ConfigError(f"invalid sweep: {exc}") from None
    return specs


def _db_or_none(value: float | None) -> float | None:
    if value is None or value <= 0.0:
        return None
    return 10.0 * math.log10(value)


def _deg_label(direction: float) -> str:
    # rounding hides radians->degrees round-trip jitter in report keys
    return repr(round(math.degrees(direction), 9))


def _sweep_records(rows, axis: str, with_eta0: bool) -> list[dict]:
    recs = []
    for row in rows:
        rec: dict = {}
        if axis == "eta_thr":
            rec["eta_thr_db"] = 10.0 * math.log10(row.axis_value)
        else:
            rec[axis] = int(row.axis_value)
        if with_eta0:
            rec["eta0_db"] = _db_or_none(row.eta0)
        rec.update(estimate=row.estimate, std_error=row.std_error,
                   prediction=row.prediction, n=row.n,
                   nonconverged=row.nonconverged)
        recs.append(rec)
    return recs


def _write_json(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _write_rows(rows, path_base: Path, axis: str, fmt: str,
                with_eta0: bool = False) -> Path:
    if fmt == "json":
        path = path_base.with_suffix(".json")
        _write_json(_sweep_records(rows, axis, with_eta0), path)
    else:
        path = path_base.with_suffix(".csv")
        write_sweep_csv(rows, str(path), axis, with_eta0=with_eta0)
    return path


def _write_manifest(cfg: dict, subcommand: str, outdir: Path) -> Path:
    provenance = {
        "package_version": __version__,
        "kernel_backend": BACKEND,
        "subcommand": subcommand,
    }
    path = outdir / f"{subcommand.replace('-', '_')}_manifest.ini"
    path.write_text(serialize_config(cfg, provenance), encoding="utf-8")
    return path


def _scenario_json(cfg: dict) -> dict:
    out = {}
    for key, kind, _req, _default in _SCHEMA["scenario"]:
        if key in cfg["scenario"]:
            value = cfg["scenario"][key]
            out[key] = list(value) if isinstance(value, tuple) else value
    return out


def _final_inr_db(network, selected, scenario) -> dict[str, float | None]:
    """Selected-set INR at each unintended BS under the data-phase power."""
    cluster = ActiveCluster(network, selected, scenario.intended_direction)
    out = {}
    for victim in scenario.unintended_directions:
        inr = average_total_inr([cluster], victim, scenario.num_selected,
                                scenario.target_snr, scenario.noise_power)
        out[_deg_label(victim)] = _db_or_none(inr)
    return out


def _max_group_inr_db(outcome, scenario) -> dict[str, float | None]:
    """Worst approved-group INR per BS under the test-phase power."""
    log = outcome.state.trial_log
    out = {}
    for d, victim in enumerate(scenario.unintended_directions):
        worst = None
        for rec in log:
            if rec.approved:
                inr = rec.per_bs_inr[d]
                worst = inr if worst is None else max(worst, inr)
        out[_deg_label(victim)] = _db_or_none(worst)
    return out


def cmd_sweep(cfg: dict, outdir: Path, fmt: str, subcommand: str) -> int:
    kind = _SWEEP_KIND[subcommand]
    specs = build_sweeps(cfg, subcommand)
    stem = {"trials": "trials", "inr": "average_inr", "ccdf": "ccdf"}[kind]
    flagged = False
    for label, spec in specs:
        if kind == "trials":
            rows = sweep_expected_trials(spec)
        elif kind == "inr":
            rows = sweep_average_inr(spec)
        else:
            grid = tuple(10.0 ** (g / 10.0) for g in cfg["sweep"]["grid_db"])
            rows = empirical_ccdf(spec, grid)
        name = f"{stem}_{label}" if label else stem
        path = _write_rows(rows, outdir / name, spec.axis, fmt,
                           with_eta0=(kind == "ccdf"))
        bad = [r for r in rows if r.flagged]
        flagged = flagged or bool(bad)
        note = f" [{len(bad)} flagged points]" if bad else ""
        print(f"wrote {path.name}: {len(rows)} rows{note}")
    _write_manifest(cfg, subcommand, outdir)
    if flagged:
        print("some sweep points had more than 10% non-converged runs",
              file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_select(cfg: dict, outdir: Path, fmt: str, subcommand: str) -> int:
    scenario = build_scenario(cfg)
    network = sample_network(scenario)
    outcome = run_selection(network, full_log=True)
    write_trial_log_csv(outcome, str(outdir / "trial_log.csv"))
    report = {
        "scenario": _scenario_json(cfg),
        "seed": scenario.seed,
        "converged": outcome.converged,
        "trials": outcome.trials,
        "selected_size": len(outcome.selected),
        "selected": list(outcome.selected),
        "kernel_backend": outcome.backend,
        "replay_verified": (verify_outcome(outcome, network)
                            if outcome.converged else None),
    }
    if outcome.converged:
        report["final_inr_db"] = _final_inr_db(network, outcome.selected,
                                               scenario)
        report["max_group_inr_db"] = _max_group_inr_db(outcome, scenario)
    _write_json(report, outdir / "outcome.json")
    _write_manifest(cfg, subcommand, outdir)
    print(f"wrote trial_log.csv ({outcome.trials} trials) and outcome.json")
    if not outcome.converged:
        print(f"selection did not converge within {outcome.max_trials} trials",
              file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _beampattern_curves(network, selected, target, scenario, grid, streams,
                        averaging, outdir, suffix: str) -> list[str]:
    """Write the selected / unselected / average curve trio; returns names."""
    power = scenario.noise_power * scenario.target_snr / scenario.num_selected
    names = []
    if selected is not None:
        phases = synchronize(network, selected, target)
        sample = sample_beampattern(network, selected, phases, power, grid)
        name = f"beampattern_selected{suffix}.csv"
        write_beampattern_csv(sample, str(outdir / name))
        names.append(name)
    perm = streams.get("unselected").permutation(scenario.num_candidates)
    random_set = tuple(int(i) for i in perm[:scenario.num_selected])
    phases = synchronize(network, random_set, target)
    sample = sample_beampattern(network, random_set, phases, power, grid)
    name = f"beampattern_unselected{suffix}.csv"
    write_beampattern_csv(sample, str(outdir / name))
    names.append(name)
    sample = average_beampattern(scenario, grid, averaging, streams)
    name = f"beampattern_average{suffix}.csv"
    write_beampattern_csv(sample, str(outdir / name))
    names.append(name)
    return names


def _cmd_beampattern_single(cfg: dict, outdir: Path, subcommand: str) -> int:
    scenario = build_scenario(cfg)
    grid = default_angle_grid(cfg["beampattern"]["angle_points"])
    averaging = cfg["beampattern"]["average_realizations"]
    streams = RngStreams(scenario.seed)
    network = sample_network(scenario)
    outcome = run_selection(network, full_log=True)
    selected = outcome.selected if outcome.converged else None
    names = _beampattern_curves(network, selected, scenario.intended_direction,
                                scenario, grid, streams, averaging, outdir, "")
    report = {
        "scenario": _scenario_json(cfg),
        "seed": scenario.seed,
        "converged": outcome.converged,
        "trials": outcome.trials,
        "selected_size": len(outcome.selected),
        "kernel_backend": outcome.backend,
        "replay_verified": (verify_outcome(outcome, network)
                            if outcome.converged else None),
    }
    if outcome.converged:
        report["final_inr_db"] = _final_inr_db(network, outcome.selected,
                                               scenario)
        report["max_group_inr_db"] = _max_group_inr_db(outcome, scenario)
    _write_json(report, outdir / "beampattern.json")
    _write_manifest(cfg, subcommand, outdir)
    print(f"wrote {', '.join(names)} and beampattern.json "
          f"({outcome.trials} trials)")
    if not outcome.converged:
        print(f"selection did not converge within {outcome.max_trials} trials;"
              " selected-set curve omitted", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _cmd_beampattern_multi(cfg: dict, outdir: Path, subcommand: str) -> int:
    base = build_scenario(cfg)
    targets = tuple(math.radians(t) for t in cfg["clusters"]["targets_deg"])
    try:
        scenarios = multi_cluster_scenarios(base, targets)
    except ValueError as exc:
        raise ConfigError(f"invalid cluster targets: {exc}") from None
    if (scenarios[0].intended_direction != base.intended_direction
            or scenarios[0].unintended_directions
            != base.unintended_directions):
        raise ConfigError(
            "[scenario] must describe the first cluster: intended direction "
            "= first target, unintended directions = the other targets")
    grid = default_angle_grid(cfg["beampattern"]["angle_points"])
    averaging = cfg["beampattern"]["average_realizations"]
    streams = RngStreams(base.seed)
    networks = sample_cluster_networks(scenarios, streams)
    outcomes = run_multi_cluster(networks, streams=streams, full_log=True)

    all_names = []
    cluster_reports = []
    active = []
    for k, (scen, net, out) in enumerate(zip(scenarios, networks, outcomes)):
        sub = PrefixedStreams(streams, f"cluster/{k}")
        selected = out.selected if out.converged else None
        names = _beampattern_curves(net, selected, scen.intended_direction,
                                    scen, grid, sub, averaging, outdir,
                                    f"_cluster{k}")
        all_names += names
        entry = {
            "target_deg": round(math.degrees(scen.intended_direction), 9),
            "converged": out.converged,
            "trials": out.trials,
            "selected_size": len(out.selected),
            "replay_verified": (verify_outcome(out, net)
                                if out.converged else None),
        }
        if out.converged:
            entry["final_inr_db"] = _final_inr_db(net, out.selected, scen)
            entry["max_group_inr_db"] = _max_group_inr_db(out, scen)
            active.append(ActiveCluster(net, out.selected,
                                        scen.intended_direction))
        else:
            active.append(None)
        cluster_reports.append(entry)

    # what each station hears from every cluster it is not served by
    station_inr = {}
    for k, target in enumerate(targets):
        others = [c for j, c in enumerate(active) if j != k and c is not None]
        if others:
            inr = average_total_inr(others, target, base.num_selected,
                                    base.target_snr, base.noise_power)
            station_inr[_deg_label(target)] = _db_or_none(inr)
        else:
            station_inr[_deg_label(target)] = None

    report = {
        "scenario": _scenario_json(cfg),
        "targets_deg": [round(math.degrees(t), 9) for t in targets],
        "seed": base.seed,
        "clusters": cluster_reports,
        "station_inr_db": station_inr,
        "kernel_backend": BACKEND,
    }
    _write_json(report, outdir / "beampattern.json")
    _write_manifest(cfg, subcommand, outdir)
    print(f"wrote {len(all_names)} beampattern curves and beampattern.json")
    bad = [r for r in cluster_reports if not r["converged"]]
    if bad:
        print(f"{len(bad)} cluster selection(s) did not converge",
              file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def cmd_beampattern(cfg: dict, outdir: Path, fmt: str, subcommand: str) -> int:
    if "clusters" in cfg:
        return _cmd_beampattern_multi(cfg, outdir, subcommand)
    return _cmd_beampattern_single(cfg, outdir, subcommand)


def cmd_validate_appendix(cfg: dict, outdir: Path, fmt: str,
                          subcommand: str) -> int:
    v = cfg["validate"]
    streams = RngStreams(v["seed"])
    moments = phase_difference_moments(v["draws"],
                                       streams.get("appendix/moments"))
    tol = 0.005
    moment_checks = []
    for name, expected in (("cos_mean", 0.0), ("sin_mean", 0.0),
                           ("cos_var", 0.5), ("sin_var", 0.5)):
        measured = float(moments[name])
        moment_checks.append({
            "name": name, "measured": measured, "expected": expected,
            "tolerance": tol, "pass": abs(measured - expected) <= tol,
        })
    nb_checks = []
    rel_tol = 0.02
    for t0 in (1, 4, 8):
        for p in (0.1, 0.5, 0.9):
            stream = streams.get(f"appendix/nb/{t0}/{p}")
            trials = negative_binomial_trials(t0, p, v["sequences"], stream)
            mean = float(trials.mean())
            expected = t0 / p
            nb_checks.append({
                "num_groups": t0, "p": p, "sequences": v["sequences"],
                "measured_mean": mean, "expected_mean": expected,
                "rel_error": abs(mean - expected) / expected,
                "tolerance": rel_tol,
                "pass": abs(mean - expected) <= rel_tol * expected,
            })
    passed = (all(c["pass"] for c in moment_checks)
              and all(c["pass"] for c in nb_checks))
    report = {
        "draws": v["draws"],
        "moments": moment_checks,
        "negative_binomial": nb_checks,
        "passed": passed,
    }
    _write_json(report, outdir / "appendix_report.json")
    _write_manifest(cfg, subcommand, outdir)
    for c in moment_checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['name']}: "
              f"{c['measured']:+.5f} (expected {c['expected']} +/- {tol})")
    for c in nb_checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'} mean trials "
              f"T0={c['num_groups']} p={c['p']}: {c['measured_mean']:.3f} "
              f"(expected {c['expected_mean']:.3f} +/- 2%)")
    return EXIT_OK if passed else EXIT_VALIDATION


_DISPATCH = {
    "beampattern": cmd_beampattern,
    "select": cmd_select,
    "sweep-trials": cmd_sweep,
    "sweep-inr": cmd_sweep,
    "ccdf": cmd_sweep,
    "validate-appendix": cmd_validate_appendix,
}
for _c in _CASES:
    _DISPATCH[_c] = cmd_beampattern


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamselect",
        description="Node-selection sidelobe control for collaborative "
                    "beamforming: simulation and analysis runs.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(sp, with_config=True):
        if with_config:
            sp.add_argument("--preset", metavar="NAME",
                            help="named preset shipped with the package")
            sp.add_argument("--config", type=Path, metavar="FILE",
                            help="INI config file")
        sp.add_argument("--output", type=Path, default=Path("."),
                        metavar="DIR", help="output directory (default: .)")
        sp.add_argument("--set", dest="overrides", action="append",
                        default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
        sp.add_argument("--format", choices=("csv", "json"),
                        help="sweep row format (default from [output])")

    helps = {
        "beampattern": "sample, random-set, and average beampattern curves",
        "select": "one full selection run with a trial log",
        "sweep-trials": "average trial count along a sweep axis",
        "sweep-inr": "average accepted-set interference along a sweep axis",
        "ccdf": "empirical interference CCDF against the closed form",
        "validate-appendix": "phase-difference moment and trial-count checks",
    }
    for name, text in helps.items():
        common(sub.add_parser(name, help=text))
    for name in _CASES:
        sp = sub.add_parser(name, help=f"{name} beampattern preset")
        common(sp, with_config=False)
    return parser


def _load_effective_config(args) -> dict:
    subcommand = args.subcommand
    if subcommand in _CASES:
        text = load_preset_text(subcommand)
    else:
        preset = getattr(args, "preset", None)
        config = getattr(args, "config", None)
        if preset and config:
            raise ConfigError("--preset and --config are mutually exclusive")
        if preset:
            text = load_preset_text(preset)
        elif config:
            try:
                text = Path(config).read_text(encoding="utf-8")
            except OSError as exc:
                raise ConfigError(f"cannot read {config}: {exc}") from None
        elif subcommand == "validate-appendix":
            text = ""
        else:
            raise ConfigError("one of --preset or --config is required")
    raw = parse_config_text(text)
    raw = apply_overrides(raw, args.overrides)
    cfg = resolve_config(raw, subcommand)
    if args.format:
        cfg["output"]["format"] = args.format
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_effective_config(args)
        outdir = Path(args.output)
        outdir.mkdir(parents=True, exist_ok=True)
        fmt = cfg["output"]["format"]
        return _DISPATCH[args.subcommand](cfg, outdir, fmt, args.subcommand)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
