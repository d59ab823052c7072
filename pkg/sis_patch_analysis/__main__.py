"""Command-line entry point for sis-patch-analysis.

Every subcommand reads a JSON scenario and writes its result to stdout, or into the
directory given by ``--out``.

Examples:
    $ python -m sis_patch_analysis r0 scenarios/homogeneous.json
    $ python -m sis_patch_analysis equilibria scenarios/homogeneous.json --out results/
    $ python -m sis_patch_analysis sweep scenarios/multiple_ee.json \
        --param dS --from 1e-3 --to 200 --points 60 --log --workers 4 --out results/
    $ python -m sis_patch_analysis asymptotics scenarios/multiple_ee.json --limit branches
"""

import argparse
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from loguru import logger as glogger
from pydantic import ValidationError
from tabulate import tabulate

from sis_patch_analysis import __version__, configure_logging
from sis_patch_analysis.asymptotics import (
    critical_N_estimate,
    multiple_ee_branch_limits,
    profile_dI_to_zero,
    profile_dS_to_zero,
    sigma_profile,
    sigma_sublimits,
)
from sis_patch_analysis.config import AnalysisSettings
from sis_patch_analysis.dynamics import convergence_horizon, random_interior_state, simulate
from sis_patch_analysis.equilibria import bifurcation_sweep_dS, find_endemic_equilibria, uniqueness_margin
from sis_patch_analysis.errors import NotApplicable, SisPatchError
from sis_patch_analysis.model import (
    Model,
    classify_dfe_global_stability,
    dfe,
    ee_nonexistence_check,
    local_reproduction_numbers,
    multiple_ee_window,
    reduced_threshold,
    reproduction_analysis,
    symmetric_uniqueness_bound,
)
from sis_patch_analysis.reporting import (
    dump_yaml,
    dumps_json,
    equilibria_frame,
    model_document,
    strip_none,
    sweep_frame,
    to_jsonable,
    trajectory_frame,
    write_csv,
    write_json,
)
from sis_patch_analysis.schemas import ScenarioConfig

configure_logging()
glogger.enable("sis_patch_analysis")

logger = glogger.bind(classname="cli")

EXIT_OK = 0
EXIT_INVALID = 2


def _boxed_table(title: str, rows: list[list[object]]) -> str:
    table_str = tabulate(rows, tablefmt="mixed_grid")
    lines = table_str.split("\n")
    table_width = len(lines[0])
    title_border = "┍" + "━" * (table_width - 2) + "┑"
    title_row = "│ " + title.center(table_width - 4) + " │"
    separator = lines[0].replace("┍", "┝").replace("┑", "┥").replace("┯", "┿")
    return title_border + "\n" + title_row + "\n" + separator + "\n" + "\n".join(lines[1:])


def _print_banner(command: str) -> None:
    """Log the startup banner with version and subcommand."""
    rows: list[list[object]] = [["version", __version__], ["subcommand", command]]
    glogger.opt(raw=True).info("\n{}\n", _boxed_table("sis-patch-analysis", rows))


def _print_config(settings: AnalysisSettings) -> None:
    rows: list[list[object]] = [[f.name, getattr(settings, f.name)] for f in fields(settings)]
    glogger.opt(raw=True).debug("\n{}\n", _boxed_table("settings", rows))


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


@dataclass
class _Context:
    """Parsed flags, validated scenario, model and resolved settings of one invocation."""

    parsed: argparse.Namespace
    scenario: ScenarioConfig
    model: Model
    settings: AnalysisSettings

    @property
    def out(self) -> Path | None:
        out: Path | None = self.parsed.out
        return out

    def emit_json(self, name: str, data: object) -> None:
        text = write_json(data, self.out / name if self.out else None)
        if self.out is None:
            sys.stdout.write(text)
        else:
            logger.info("wrote {}", self.out / name)

    def emit_csv(self, name: str, frame: pd.DataFrame, to_stdout: bool = True) -> None:
        text = write_csv(frame, self.out / name if self.out else None)
        if self.out is None and to_stdout:
            sys.stdout.write(text)
        elif self.out is not None:
            logger.info("wrote {}", self.out / name)


def _parse_context(
    args: list[str],
    prog: str,
    description: str,
    extra_args_fn: Callable[[argparse.ArgumentParser], None] | None = None,
    points_field: str | None = "scan_points",
) -> _Context:
    """Parse the shared flags, load the scenario and resolve settings.

    Precedence is defaults < ``SISPATCH_*`` environment < scenario tolerances < flags.
    """
    parser = argparse.ArgumentParser(prog=prog, description=description)
    parser.add_argument("config", type=Path, help="JSON scenario file")
    parser.add_argument("--tol-rel", type=float, default=None, help="Relative ODE tolerance")
    parser.add_argument("--tol-abs", type=float, default=None, help="Absolute ODE tolerance")
    parser.add_argument("--lmax-cap", type=float, default=None, help="Hard limit for the l-scan cap")
    parser.add_argument("--seed", type=int, default=None, help="Seed for randomly drawn initial data")
    parser.add_argument("--out", type=Path, default=None, help="Write result files into this directory")
    parser.add_argument("--workers", type=int, default=None, help="Worker threads for sweeps")
    if points_field is not None:
        parser.add_argument("--points", type=int, default=None, help=f"Override {points_field}")
    if extra_args_fn is not None:
        extra_args_fn(parser)
    parsed = parser.parse_args(args)

    scenario = ScenarioConfig.model_validate_json(parsed.config.read_text(encoding="utf-8"))
    settings = scenario.settings(AnalysisSettings.from_env())
    overrides = {
        "ode_rtol": parsed.tol_rel,
        "ode_atol": parsed.tol_abs,
        "lmax_cap": parsed.lmax_cap,
        "seed": parsed.seed,
        "workers": parsed.workers,
    }
    if points_field is not None:
        overrides[points_field] = parsed.points
    settings = replace(settings, **{k: v for k, v in overrides.items() if v is not None})
    _print_config(settings)

    if parsed.out is not None:
        parsed.out.mkdir(parents=True, exist_ok=True)
    model = scenario.to_model(settings)
    return _Context(parsed, scenario, model, settings)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def r0(args: list[str]) -> None:
    """Reproduction number with its limits, local numbers, ``R*`` and the multiple-EE window."""
    ctx = _parse_context(args, "sis-patch-analysis r0", "Basic reproduction number")
    m, settings = ctx.model, ctx.settings
    analysis = reproduction_analysis(m, settings)
    logger.info("r0={:.12g} ({})", analysis.r0, analysis.threshold)
    ctx.emit_json(
        "r0.json",
        {
            **to_jsonable(analysis),
            "local_reproduction_numbers": local_reproduction_numbers(m),
            "R_star": reduced_threshold(m, settings),
            "multiple_ee_window": multiple_ee_window(m),
        },
    )


def dfe_cmd(args: list[str]) -> None:
    ctx = _parse_context(args, "sis-patch-analysis dfe", "Disease-free equilibrium and its classification")
    m, settings = ctx.model, ctx.settings
    analysis = reproduction_analysis(m, settings)
    classification = classify_dfe_global_stability(m, settings)
    logger.info(
        "DFE linear stability {}, globally stable: {}", classification.linear_stability, classification.globally_stable
    )
    ctx.emit_json(
        "dfe.json",
        {
            "dfe": dfe(m, settings),
            "classification": classification,
            "ee_nonexistence": ee_nonexistence_check(m, analysis, settings),
        },
    )


def equilibria(args: list[str]) -> None:
    """All endemic equilibria with stability, as JSON and CSV."""
    ctx = _parse_context(args, "sis-patch-analysis equilibria", "Endemic equilibria")
    m, settings = ctx.model, ctx.settings
    analysis = reproduction_analysis(m, settings)
    found = find_endemic_equilibria(m, settings)
    logger.info("{} endemic equilibria (r0={:.12g})", len(found), analysis.r0)

    symmetric_bound = None
    if m.conn.is_symmetric and analysis.threshold == "supercritical":
        symmetric_bound = symmetric_uniqueness_bound(m)
    ctx.emit_json(
        "equilibria.json",
        strip_none(
            to_jsonable(
                {
                    "r0": analysis.r0,
                    "count": len(found),
                    "uniqueness_margin": uniqueness_margin(m, settings),
                    "symmetric_uniqueness_bound": symmetric_bound,
                    "equilibria": found,
                }
            )
        ),
    )
    ctx.emit_csv("equilibria.csv", equilibria_frame(found), to_stdout=False)


def simulate_cmd(args: list[str]) -> None:
    """Trajectory from the scenario's initial data, or seeded interior data."""

    def _add_horizon(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--horizon", type=float, default=None, help="Final time (default: convergence horizon)")

    ctx = _parse_context(
        args, "sis-patch-analysis simulate", "Integrate the patch model", _add_horizon, points_field="output_samples"
    )
    m, settings, scenario = ctx.model, ctx.settings, ctx.scenario
    if scenario.S0 is not None and scenario.I0 is not None:
        S0, I0 = np.asarray(scenario.S0), np.asarray(scenario.I0)
    else:
        S0, I0 = random_interior_state(m, np.random.default_rng(settings.seed))
        logger.info("drew interior initial data with seed {}", settings.seed)

    horizon = ctx.parsed.horizon
    if horizon is None:
        horizon = 500.0
        if reproduction_analysis(m, settings).threshold == "subcritical":
            horizon = convergence_horizon(m, dfe(m, settings), settings)
        else:
            found = find_endemic_equilibria(m, settings)
            if len(found) == 1:
                horizon = convergence_horizon(m, found[0], settings)
    traj = simulate(m, S0, I0, horizon, settings)
    logger.info(
        "T={:.6g}: {} accepted / {} rejected steps, conservation drift {:.3e}",
        horizon,
        traj.accepted_steps,
        traj.rejected_steps,
        traj.max_conservation_drift,
    )
    ctx.emit_csv("trajectory.csv", trajectory_frame(traj))


def sweep(args: list[str]) -> None:
    """Endemic-equilibrium counts over a ``d_s`` grid."""

    def _add_grid(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--param", choices=["dS"], default="dS", help="Swept parameter")
        parser.add_argument("--from", dest="start", type=float, required=True, help="First grid value")
        parser.add_argument("--to", dest="stop", type=float, required=True, help="Last grid value")
        parser.add_argument("--points", type=int, default=50, help="Number of grid points")
        parser.add_argument("--log", action="store_true", help="Use a geometric grid")

    ctx = _parse_context(args, "sis-patch-analysis sweep", "Equilibrium count sweep", _add_grid, points_field=None)
    parsed = ctx.parsed
    if parsed.points < 2 or not 0.0 < parsed.start < parsed.stop:
        raise NotApplicable("sweep needs 0 < --from < --to and --points >= 2")
    spacing = np.geomspace if parsed.log else np.linspace
    grid = spacing(parsed.start, parsed.stop, parsed.points)
    result = bifurcation_sweep_dS(ctx.model, grid, ctx.settings)
    ctx.emit_csv("sweep.csv", sweep_frame(result))
    if ctx.out is not None:
        write_json(result, ctx.out / "sweep.json")
        logger.info("wrote {}", ctx.out / "sweep.json")


def asymptotics(args: list[str]) -> None:
    def _add_limit(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--limit", choices=["dS0", "dI0", "branches"], required=True, help="Which limit")

    ctx = _parse_context(args, "sis-patch-analysis asymptotics", "Limit profiles", _add_limit)
    m, settings = ctx.model, ctx.settings
    limit = ctx.parsed.limit
    result: object
    if limit == "dS0":
        result = profile_dS_to_zero(m, settings)
    elif limit == "dI0":
        result = profile_dI_to_zero(m, settings)
    else:
        result = multiple_ee_branch_limits(m, settings)
    ctx.emit_json("asymptotics.json", {"limit": limit, "profile": result})


def sigma_profile_cmd(args: list[str]) -> None:
    def _add_sigma(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--sigma", type=float, required=True, help="Limit ratio d_I / d_S")

    ctx = _parse_context(args, "sis-patch-analysis sigma-profile", "Joint small-dispersal limit", _add_sigma)
    m = ctx.model
    profile = sigma_profile(m, ctx.parsed.sigma)
    sublimits = sigma_sublimits(m)
    ctx.emit_json("sigma_profile.json", strip_none(to_jsonable({"profile": profile, "sublimits": sublimits})))


def critical_n(args: list[str]) -> None:
    ctx = _parse_context(
        args, "sis-patch-analysis critical-n", "Critical population estimate", points_field="critical_points"
    )
    ctx.emit_json("critical_n.json", critical_N_estimate(ctx.model, ctx.settings))


def dumpconfig(args: list[str]) -> None:
    """Print the normalised scenario and resolved settings as YAML (default) or JSON."""

    def _add_output_flag(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--json-output", action="store_true", help="Output JSON instead of YAML")

    ctx = _parse_context(args, "sis-patch-analysis dumpconfig", "Show the validated scenario", _add_output_flag)
    data = {"model": model_document(ctx.model), "settings": ctx.settings}
    if ctx.parsed.json_output:
        sys.stdout.write(dumps_json(data))
    else:
        sys.stdout.write(dump_yaml(data))


COMMANDS: dict[str, Callable[[list[str]], None]] = {
    "r0": r0,
    "dfe": dfe_cmd,
    "equilibria": equilibria,
    "simulate": simulate_cmd,
    "sweep": sweep,
    "asymptotics": asymptotics,
    "sigma-profile": sigma_profile_cmd,
    "critical-n": critical_n,
    "dumpconfig": dumpconfig,
}


def _report_error(kind: str, exit_code: int, reason: str) -> int:
    flat = " ".join(reason.split()).replace('"', "'")
    print(f'error kind={kind} exit={exit_code} reason="{flat}"', file=sys.stderr)
    return exit_code


def main(argv: list[str] | None = None) -> int:
    """Dispatch to a subcommand and map library errors to exit codes.

    Returns ``0`` on success, ``2`` for invalid input and ``3`` for numerical failures.
    """
    argv = sys.argv[1:] if argv is None else argv
    if not argv or argv[0] not in COMMANDS:
        return _report_error("UnknownCommand", EXIT_INVALID, f"expected one of {', '.join(COMMANDS)}")
    command, rest = argv[0], argv[1:]
    _print_banner(command)
    try:
        COMMANDS[command](rest)
    except SisPatchError as exc:
        return _report_error(type(exc).__name__, exc.exit_code, str(exc))
    except ValidationError as exc:
        return _report_error("ValidationError", EXIT_INVALID, str(exc))
    except (OSError, ValueError) as exc:
        return _report_error(type(exc).__name__, EXIT_INVALID, str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
