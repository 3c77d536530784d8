"""
pbesolve command-line interface.

    pbesolve <command> [--config PATH] [--out DIR] [--seed N] [--threads N] [--verbose]

Exit codes: 0 success, 1 input error (configuration, parsing, I/O),
2 solver failure (breakdown, non-convergence, assembly, failed checks).
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from src.core_model import (
    ChargeSystem,
    IonSpecies,
    PBEProblem,
    RegionTag,
    SolventPermittivity,
    UnitMode,
    symmetric_electrolyte,
)
from src.exceptions import ConfigurationError, InputError, PBEError
from src.geometry import BallUnion, VoxelGrid, analytic_disk_regions, build_region_map, load_pqr
from src.mesh import Mesh, generate_disk_mesh, read_mesh_file, refine_times, write_mesh_file
from src.pbe_pipeline import PBEPipeline
from src.solver import NewtonSettings
from src.verification import convergence_study, manufactured_case, run_invariant_suite
from .config import COMMANDS, RunConfig, echo_config, parse_config
from .writers import write_csv, write_jsonl, write_vtk_mask, write_vtk_mesh

logger = logging.getLogger(__name__)

THREADS_ENV = "PBESOLVE_THREADS"


@dataclass
class RunResult:
    exit_code: int
    artifacts: List[Path] = field(default_factory=list)
    summary: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# config -> domain objects


def build_problem(config: RunConfig) -> PBEProblem:
    p = config.problem
    unit_mode = UnitMode(p.unit_mode)
    if p.ionic_strength is not None:
        if unit_mode is UnitMode.PHYSICAL:
            species = symmetric_electrolyte(p.ionic_strength)
        else:
            species = (IonSpecies(p.ionic_strength, 1), IonSpecies(p.ionic_strength, -1))
    else:
        species = tuple(IonSpecies(M, z) for M, z in p.species)
    return PBEProblem(
        eps_m=p.eps_m,
        eps_s=SolventPermittivity(p.eps_s, p.eps_s_gradient),
        temperature=p.temperature,
        species=species,
        unit_mode=unit_mode,
        length_unit=p.length_unit,
    )


def build_charges(config: RunConfig, base_dir: Path, dimension: int = 2) -> ChargeSystem:
    g = config.geometry
    if g.pqr_path is not None:
        return load_pqr(base_dir / g.pqr_path, length_unit=g.length_scale, dimension=dimension)
    if not config.charges.charge:
        raise ConfigurationError("no charges given: add charge lines to [charges] or a pqr_path")
    rows = config.charges.charge
    positions = [row[:2] for row in rows]
    valences = [row[2] for row in rows]
    radii = [row[3] if len(row) > 3 else 0.0 for row in rows]
    return ChargeSystem.from_arrays(positions, valences, radii)


def build_mesh(config: RunConfig, base_dir: Path) -> Mesh:
    g = config.geometry
    if g.mesh_path is not None:
        mesh = read_mesh_file(base_dir / g.mesh_path)
    elif g.kind == "disk":
        mesh = generate_disk_mesh(g.r_m, g.r_iel, g.half_width, g.n)
    else:
        raise ConfigurationError("kind = pqr needs an interface-fitted mesh_path to build a mesh")
    return refine_times(mesh, g.refinements) if g.refinements else mesh


def newton_settings(config: RunConfig) -> NewtonSettings:
    s = config.solver
    return NewtonSettings(tol=s.tol, maxit=s.maxit, armijo_c=s.armijo_c, backtrack=s.backtrack,
                          min_step=s.min_step, cg_tol=s.cg_tol, cg_maxit=s.cg_maxit,
                          precond=s.precond)


def resolve_threads(config: RunConfig) -> int:
    """--threads / [run] threads, then PBESOLVE_THREADS, then 1"""
    if config.run.threads is not None:
        return config.run.threads
    value = os.getenv(THREADS_ENV)
    if value:
        try:
            threads = int(value)
        except ValueError:
            raise ConfigurationError(f"{THREADS_ENV} must be an integer, got '{value}'") from None
        if threads < 1:
            raise ConfigurationError(f"{THREADS_ENV} must be >= 1, got {threads}")
        return threads
    return 1


# --------------------------------------------------------------------------
# commands


def _surface(config: RunConfig, out: Path, base_dir: Path) -> RunResult:
    g = config.geometry
    if g.kind == "disk":
        spacing = g.grid_spacing
        steps = int(np.ceil(2 * g.half_width / spacing)) + 1
        grid = VoxelGrid(np.array([-g.half_width, -g.half_width]), spacing, (steps, steps))
        regions = analytic_disk_regions(g.r_m, g.r_iel, g.half_width)
        tags = regions.classify(grid.points()).reshape(grid.extents)
    else:
        charges = build_charges(config, base_dir, g.dimension)
        union = BallUnion.from_charges(charges)
        grid = VoxelGrid.covering(union, g.ion_radius + 2 * g.grid_spacing, g.grid_spacing)
        regions = build_region_map(union, g.probe_radius, g.ion_radius, grid)
        tags = regions.tags
    cell = grid.spacing ** grid.dimension
    areas = {tag.name.lower(): float(np.count_nonzero(tags == tag) * cell) for tag in RegionTag}
    artifacts = [write_vtk_mask(grid, tags, out / "regions.vtk"),
                 write_jsonl([{'provenance': regions.provenance, 'extents': list(grid.extents),
                               'spacing': grid.spacing, 'measure': areas}], out / "regions.jsonl")]
    return RunResult(0, artifacts, {'measure': areas})


def _mesh(config: RunConfig, out: Path, base_dir: Path) -> RunResult:
    mesh = build_mesh(config, base_dir).validate()
    artifacts = [write_mesh_file(mesh, out / "mesh.txt"),
                 write_vtk_mesh(mesh, None, out / "mesh.vtk")]
    summary = {'n_nodes': mesh.n_nodes, 'n_triangles': mesh.n_triangles,
               'h': mesh.max_edge_length, 'min_angle_deg': float(np.degrees(mesh.min_angles.min()))}
    return RunResult(0, artifacts, summary)


def _pipeline(config: RunConfig, base_dir: Path) -> PBEPipeline:
    s = config.solver
    return PBEPipeline(
        build_problem(config),
        build_charges(config, base_dir),
        mesh=build_mesh(config, base_dir),
        model=s.model,
        splitting=s.splitting,
        bc_mode=s.bc_mode,
        settings=newton_settings(config),
    )


def _solve(config: RunConfig, out: Path, base_dir: Path) -> RunResult:
    result = _pipeline(config, base_dir).process()
    solution, phi = result.solution, result.phi
    mesh = solution.mesh
    artifacts = [
        write_vtk_mesh(mesh, {'phi': phi.values, 'masked': phi.masked.astype(float)}, out / "phi.vtk"),
        write_vtk_mesh(mesh, {'u': solution.u.values}, out / "u.vtk"),
    ]
    if solution.uH is not None:
        artifacts.append(write_vtk_mesh(mesh, {'uH': solution.uH.values}, out / "uH.vtk"))
    else:
        artifacts.append(write_vtk_mesh(mesh, {'G': solution.G_at_nodes}, out / "G.vtk"))
    report = solution.report
    artifacts.append(write_jsonl(
        [json.loads(line) for line in report.to_json_lines(include_timing=False).splitlines()],
        out / "report.jsonl"))
    iterations = pd.DataFrame([asdict(r) for r in report.records])
    artifacts.append(write_csv(iterations, out / "iterations.csv"))
    logger.info("Solve finished in %.3f s", report.wall_time)
    return RunResult(0, artifacts, result.to_dict())


def _energy(config: RunConfig, out: Path, base_dir: Path) -> RunResult:
    if config.solver.splitting != "two_term":
        raise ConfigurationError("the energy command needs splitting = two_term")
    result = _pipeline(config, base_dir).process()
    if result.energy is None:
        raise ConfigurationError("; ".join(result.warnings) or "solvation energy unavailable")
    record = {**result.energy, 'model': result.model, 'n_nodes': result.n_nodes,
              **result.solution.problem.to_dict()}
    return RunResult(0, [write_jsonl([record], out / "energy.jsonl")], record)


def _verify(config: RunConfig, out: Path, base_dir: Path) -> RunResult:
    table = run_invariant_suite(seed=config.run.seed)
    path = write_csv(table, out / "verify.csv")
    failed = table.loc[~table["passed"], "check"].tolist()
    for name in failed:
        logger.error("invariant check failed: %s", name)
    return RunResult(2 if failed else 0, [path], {'failed': failed, 'checks': len(table)})


def _convergence(config: RunConfig, out: Path, base_dir: Path) -> RunResult:
    v = config.verify
    case = manufactured_case(v.case)
    result = convergence_study(case, levels=v.levels, n=v.n, settings=newton_settings(config),
                               threads=resolve_threads(config))
    footer = {f"slope_{k}": value for k, value in result.slopes.items()}
    footer['saturated'] = float(result.saturated)
    path = write_csv(result.table, out / "convergence.csv", footer=footer)
    return RunResult(0, [path], result.to_dict())


HANDLERS = {
    'surface': _surface,
    'mesh': _mesh,
    'solve': _solve,
    'energy': _energy,
    'verify': _verify,
    'convergence': _convergence,
}


def run(config: RunConfig, base_dir: Optional[Path] = None) -> RunResult:
    """Execute the configured command and write its artifacts"""
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    out = Path(config.run.output)
    logger.info("Running '%s' into %s", config.command, out)
    result = HANDLERS[config.command](config, out, base_dir)
    result.artifacts.append(_write_echo(config, out))
    return result


def _write_echo(config: RunConfig, out: Path) -> Path:
    path = out / "config.echo.cfg"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(echo_config(config), encoding="utf-8")
    return path


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbesolve",
        description="General Poisson-Boltzmann solver with two- and three-term splittings",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="configuration file")
    parser.add_argument("--out", help="output directory (overrides [run] output)")
    parser.add_argument("--seed", type=int, help="seed of the verification generator")
    parser.add_argument("--threads", type=int, help=f"worker threads (fallback: ${THREADS_ENV})")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    overrides = {'run': {'command': args.command, 'output': args.out, 'seed': args.seed,
                         'threads': args.threads}}
    try:
        if args.config is not None:
            text = args.config.read_text(encoding="utf-8")
            base_dir = args.config.parent
        else:
            text, base_dir = "", Path.cwd()
        config = parse_config(text, overrides, base_dir=base_dir)
        result = run(config, base_dir)
    except (InputError, ValueError, OSError) as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1
    except PBEError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 2
    for path in result.artifacts:
        logger.debug("artifact: %s", path)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
