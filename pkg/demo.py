#!/usr/bin/env python3
"""
pbesolve Demo Script
Solves the bundled disk examples and prints the pipeline results
"""

import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

from src.pbe_pipeline import PBEPipeline
from src.verification import disk_charges, disk_problem, run_invariant_suite


def print_banner():
    """Print welcome banner"""
    print("=" * 70)
    print("  pbesolve: General Poisson-Boltzmann Equation")
    print("  Regularizing splittings with damped Newton and P1 elements")
    print("=" * 70)
    print()


def print_result(result, title=None):
    """Pretty print a PBEResult"""
    if title is not None:
        print(f"\n{'='*70}")
        print(title)
        print('='*70)

    print(f"\nMESH: {result.n_nodes} nodes, {result.n_triangles} triangles")
    print(f"SOLVER: {result.model.upper()} ({result.splitting}, bc = {result.bc_mode})")
    print(f"  converged: {result.converged} after {result.iterations} iterations, "
          f"|F| = {result.final_residual:.3e}")
    print(f"  ||u||_inf = {result.u_max:.6g}, max |b| = {result.max_abs_b:.6g}")

    if result.energy:
        print(f"\nSOLVATION ENERGY: {result.energy['value']:.8g} kT")

    if result.warnings:
        print(f"\nWARNINGS:")
        for warning in result.warnings:
            print(f"  {warning}")

    print()


def run_basic_demo():
    """Solve the dipole example with both splittings"""
    print_banner()
    print("Running the dipole example in synthetic units")
    print()

    runs = [
        ("1:1 electrolyte, two-term splitting", "neutral", "two_term"),
        ("Single counterion, two-term splitting", "cell_model", "two_term"),
        ("Single counterion, three-term splitting", "cell_model", "three_term"),
    ]

    for title, kind, splitting in runs:
        pipeline = PBEPipeline(disk_problem(kind), disk_charges(), n=16, refinements=1,
                               splitting=splitting)
        print_result(pipeline.process(verbose=False), title=title)

    print("=" * 70)
    print("Demo complete! Try the command-line interface:")
    print("  pbesolve solve --config configs/disk_solve.cfg")
    print("=" * 70)


def run_sweep_demo():
    """Solvation energy against the ion concentration"""
    print_banner()
    print("Running concentration sweep")
    print()

    base = disk_problem("neutral")
    print(f"{'factor':>10}  {'energy [kT]':>16}  {'iterations':>10}")
    for factor in (1e-3, 1e-2, 1e-1, 1.0, 2.0):
        result = PBEPipeline(base.scaled_species(factor), disk_charges(), n=16).process()
        print(f"{factor:>10g}  {result.energy['value']:>16.8g}  {result.iterations:>10d}")
    print()


def run_verify_demo():
    """Run the invariant checks"""
    print_banner()
    table = run_invariant_suite()
    print(table.to_string(index=False))
    print(f"\n{int(table['passed'].sum())}/{len(table)} checks passed")


def main():
    """Main entry point"""
    import argparse

    parser = argparse.ArgumentParser(description="pbesolve Demo")
    parser.add_argument(
        '--mode',
        choices=['basic', 'sweep', 'verify'],
        default='basic',
        help='Demo mode to run (default: basic)'
    )

    args = parser.parse_args()

    try:
        if args.mode == 'basic':
            run_basic_demo()
        elif args.mode == 'sweep':
            run_sweep_demo()
        elif args.mode == 'verify':
            run_verify_demo()
    except KeyboardInterrupt:
        print("\n\nDemo interrupted by user")
    except Exception as e:
        print(f"\nError: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
