"""
Command handlers. Each returns a process exit code and maps failures the
way an API route maps them to status codes.
"""

import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import numpy as np
import pandas as pd
import yaml

from semnoma import __version__
from semnoma.cli.models import MANIFEST_VERSION_KEY, ConfigError, RunConfig
from semnoma.core.errors import ArgumentError, InfeasibleError, ParameterError
from semnoma.core.experiments import (
    FigureId,
    SchemeId,
    brute_force_oracle,
    run_figure,
    solve_scheme,
)
from semnoma.core.link_model import FadingStates, policy_rates, sample_states, static_state
from semnoma.core.rate_region import region_frame, sweep_boundary
from semnoma.core.scenario1 import Scenario1Solution
from semnoma.core.scenario2 import solve_s2

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4
EXIT_ORACLE_MISMATCH = 5

FLOAT_FORMAT = "%.12g"
STATE_COLUMNS = ["index", "rho", "alpha", "p", "r", "s"]


def write_csv(df: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info(f"Wrote {len(df)} rows to {path}")


def _guarded(name: str, body: Callable[[], int]) -> int:
    try:
        return body()
    except ConfigError as e:
        logger.error(f"{name}: configuration error at '{e.key}': {e.message}")
        return EXIT_CONFIG
    except InfeasibleError as e:
        logger.error(f"{name}: infeasible: {str(e)}")
        return EXIT_INFEASIBLE
    except (ArgumentError, ParameterError, ValueError) as e:
        logger.error(f"{name}: invalid arguments: {str(e)}")
        return EXIT_CONFIG
    except OSError as e:
        logger.error(f"{name}: I/O error: {str(e)}", exc_info=True)
        return EXIT_IO
    except Exception as e:
        logger.error(f"{name}: unexpected error: {str(e)}", exc_info=True)
        return EXIT_UNEXPECTED


def _states(cfg: RunConfig, count: Optional[int] = None) -> FadingStates:
    mc = cfg.monte_carlo
    return sample_states(mc.seed, count or mc.state_count, cfg.system_params())


def cmd_region(cfg: RunConfig, out_dir: Path) -> int:
    """Boundary of both rate regions for every configured F-user budget; one CSV per objective."""

    def body() -> int:
        params = cfg.system_params()
        st = static_state(params)
        frames: Dict[str, list] = {}
        for spec in cfg.region.specs():
            df = region_frame(sweep_boundary(spec, st, params), spec.objective)
            df.insert(0, "p_f_max", spec.p_f_max)
            frames.setdefault(spec.objective.value, []).append(df)
        for objective, parts in frames.items():
            write_csv(pd.concat(parts, ignore_index=True), out_dir / f"region_{objective}.csv")
        return EXIT_OK

    return _guarded("region", body)


def _summary(solution: Any, scheme: SchemeId, ev: Any) -> Dict[str, Any]:
    row: Dict[str, Any] = {"scheme": scheme.label}
    if isinstance(solution, Scenario1Solution):
        row.update(
            lambda_star=solution.lambda_star,
            bisections=solution.bisections,
        )
    else:
        row.update(
            beta_star=solution.duals.beta,
            delta_star=solution.duals.delta,
            p_avg=solution.p_avg,
            converged=solution.converged,
            iterations=solution.iterations,
            lp_infeasible=solution.lp_infeasible,
            fractional=solution.fractional_count,
        )
    row.update(
        r_bar=solution.r_bar,
        ergodic_s=solution.ergodic_s,
        ergodic_r=solution.ergodic_r,
        avg_power=ev.avg_power,
        dual_value=solution.dual_value,
        duality_gap=solution.duality_gap,
        frac_off=ev.time_fractions["off"],
        frac_bitcom=ev.time_fractions["bitcom"],
        frac_semcom=ev.time_fractions["semcom"],
    )
    return row


def cmd_solve(cfg: RunConfig, out_dir: Path, scenario: str, scheme: SchemeId) -> int:
    """Solve one scenario on the sampled states; writes per-state and summary CSVs."""

    def body() -> int:
        if scenario not in ("s1", "s2"):
            raise ArgumentError(f"Unknown scenario: {scenario}", details={"known": ["s1", "s2"]})
        params = cfg.system_params()
        states = _states(cfg)
        scenario_cfg = cfg.scenario1 if scenario == "s1" else cfg.scenario2
        logger.info(f"Solving {scenario} with scheme {scheme.label} on {len(states)} states")
        solution, ev = solve_scheme(scheme, states, scenario_cfg, params)

        policy = solution.policy
        r, s = policy_rates(policy, states, params)
        per_state = pd.DataFrame(
            {
                "index": states.index,
                "rho": policy.rho.astype(int),
                "alpha": policy.alpha,
                "p": policy.p,
                "r": r,
                "s": s,
            },
            columns=STATE_COLUMNS,
        )
        write_csv(per_state, out_dir / f"solve_{scenario}_states.csv")
        write_csv(pd.DataFrame([_summary(solution, scheme, ev)]), out_dir / f"solve_{scenario}_summary.csv")
        return EXIT_OK

    return _guarded("solve", body)


def write_manifest(cfg: RunConfig, out_dir: Path, command: str, **extra: Any) -> Path:
    """Resolved configuration plus what is needed to reproduce a run (no timestamps)."""
    manifest = {
        MANIFEST_VERSION_KEY: __version__,
        "command": command,
        **extra,
        "seed": cfg.monte_carlo.seed,
        "state_count": cfg.monte_carlo.state_count,
        "config": cfg.resolved(),
    }
    path = out_dir / "manifest.yaml"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(yaml.safe_dump(manifest, sort_keys=False), encoding="utf-8")
    return path


def cmd_figure(cfg: RunConfig, out_dir: Path, fig_id: str, threads: int = 1) -> int:
    """Sweep data of one figure plus manifest.yaml."""

    def body() -> int:
        fig = FigureId.parse(fig_id)
        params = cfg.system_params()
        states = [static_state(params)] if fig is FigureId.FIG2 else _states(cfg)
        df = run_figure(
            fig,
            cfg.figure,
            states,
            params,
            s1=cfg.scenario1,
            s2=cfg.scenario2,
            regions=cfg.region.specs(),
            threads=threads,
        )
        write_csv(df, out_dir / f"figure_{fig.value}.csv")
        write_manifest(cfg, out_dir, "figure", figure=fig.value)
        return EXIT_OK

    return _guarded("figure", body)


def cmd_oracle_check(cfg: RunConfig, out_dir: Path) -> int:
    """Certify the continuous solver against the quantised optimum on a small instance."""

    def body() -> int:
        params = cfg.system_params()
        oc = cfg.oracle
        states = _states(cfg, oc.states)
        s2 = cfg.scenario2
        oracle = brute_force_oracle(states, oc.quant, s2, params)

        try:
            solution = solve_s2(states, s2, params)
            solver_s, dual_value = solution.ergodic_s, solution.dual_value
        except InfeasibleError:
            solver_s, dual_value = np.nan, np.nan

        if not oracle.feasible or np.isnan(solver_s):
            agree = (not oracle.feasible) and np.isnan(solver_s)
            shortfall = np.nan
        else:
            shortfall = (oracle.best_objective - solver_s) / max(oracle.best_objective, 1e-12)
            agree = shortfall <= oc.tolerance
        row = {
            "states": len(states),
            "solver_objective": solver_s,
            "solver_dual_value": dual_value,
            "oracle_objective": oracle.best_objective if oracle.feasible else np.nan,
            "oracle_dual_bound": oracle.dual_bound,
            "relative_shortfall": shortfall,
            "agree": bool(agree),
        }
        write_csv(pd.DataFrame([row]), out_dir / "oracle_check.csv")
        if not agree:
            logger.error(
                f"oracle-check: solver {solver_s:.6g} vs oracle {row['oracle_objective']:.6g} "
                f"(tolerance {oc.tolerance:.2%})"
            )
            return EXIT_ORACLE_MISMATCH
        logger.info(f"oracle-check: solver and oracle agree on {len(states)} states")
        return EXIT_OK

    return _guarded("oracle-check", body)
