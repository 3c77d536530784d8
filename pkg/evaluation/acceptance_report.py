"""
Acceptance Report
Convergence rates, splitting equivalence, L-infinity diagnostics and the
dilute limit, written to evaluation/results/
"""

import os
import sys
from pathlib import Path
import json
import numpy as np
import pandas as pd
from tqdm import tqdm
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.core_model import Splitting
from src.solver import solve_gpbe_regular, solve_lgpbe
from src.verification import (
    CASE_IDS,
    apriori_bound,
    convergence_study,
    disk_charges,
    disk_family,
    disk_problem,
    disk_setup,
    extinction_check,
    manufactured_case,
    measure_data_norms,
    run_invariant_suite,
    splitting_equivalence,
    theta_curve,
)

RESULTS_DIR = Path(__file__).parent / 'results'


class AcceptanceEvaluator:
    """
    Runs the verification studies and collects their tables.
    """

    def __init__(self, levels: int = 4, threads: int = 1):
        """
        Initialize the evaluator.

        Args:
            levels: meshes per refinement study
            threads: mesh levels solved concurrently
        """
        self.levels = levels
        self.threads = threads
        self.results = {}
        RESULTS_DIR.mkdir(exist_ok=True)

    def run_convergence(self):
        """Convergence study of every manufactured case"""
        print(f"\n{'='*60}")
        print("Manufactured solutions")
        print('='*60)

        tables = {}
        for case_id in tqdm(CASE_IDS, desc="Cases"):
            result = convergence_study(manufactured_case(case_id), levels=self.levels,
                                       threads=self.threads)
            tables[case_id] = result
            slopes = ", ".join(f"{k} {v:.2f}" for k, v in result.slopes.items())
            tqdm.write(f"  {case_id}: {slopes}{' (saturated)' if result.saturated else ''}")

        self.results['convergence'] = {k: r.to_dict() for k, r in tables.items()}
        combined = pd.concat([r.table.assign(case=k) for k, r in tables.items()], ignore_index=True)
        combined.to_csv(RESULTS_DIR / 'convergence.csv', index=False)
        return tables

    def run_splitting(self):
        """Two-term against three-term on the cell model"""
        print(f"\n{'='*60}")
        print("Splitting equivalence")
        print('='*60)

        report = splitting_equivalence(disk_problem("cell_model"), disk_charges(),
                                       disk_family(levels=self.levels), threads=self.threads)
        print(report.table.to_string(index=False))
        self.results['splitting'] = report.to_dict()
        report.table.to_csv(RESULTS_DIR / 'splitting.csv', index=False)
        return report

    def run_bounds(self):
        """A priori bound and extinction check on the neutral example"""
        print(f"\n{'='*60}")
        print("L-infinity diagnostics")
        print('='*60)

        problem, mesh, field = disk_setup("neutral", n=16)
        bound = apriori_bound(measure_data_norms(problem, mesh, field))
        u = solve_gpbe_regular(problem, mesh, field, Splitting.TWO_TERM).u
        u_max = u.max_abs()
        levels = np.unique(np.r_[np.linspace(0.0, 1.05 * u_max, 64), bound.k0, bound.k1])
        curve = theta_curve(u, levels)
        C, alpha, beta = bound.extinction_parameters()
        verdict = extinction_check(curve, C, alpha, beta, k0=bound.k0)

        print(f"  ||u_h||_inf = {u_max:.6g}, k1 = {bound.k1:.6g}")
        print(f"  extinction: {verdict.detail}")
        self.results['bounds'] = {
            'u_max': u_max,
            'bound': bound.to_dict(),
            'extinction': verdict.to_dict(),
        }
        pd.DataFrame(curve, columns=['k', 'theta']).to_csv(RESULTS_DIR / 'theta.csv', index=False)
        return bound, verdict

    def run_dilute_limit(self, factors=(1.0, 1e-1, 1e-2, 1e-3, 1e-4)):
        """GPBE minus LGPBE as the ion concentrations vanish"""
        print(f"\n{'='*60}")
        print("Dilute limit")
        print('='*60)

        problem, mesh, field = disk_setup("neutral", n=16)
        rows = []
        for factor in tqdm(factors, desc="Concentrations"):
            scaled = problem.scaled_species(factor)
            gpbe = solve_gpbe_regular(scaled, mesh, field).u.values
            lgpbe = solve_lgpbe(scaled, mesh, field).u.values
            rows.append({'factor': factor,
                         'max_difference': float(np.max(np.abs(gpbe - lgpbe))),
                         'u_max': float(np.max(np.abs(gpbe)))})
        df = pd.DataFrame(rows)
        print(df.to_string(index=False))
        self.results['dilute'] = df.to_dict(orient='records')
        df.to_csv(RESULTS_DIR / 'dilute_limit.csv', index=False)
        return df

    def run_invariants(self):
        table = run_invariant_suite()
        print(f"\nInvariant checks: {int(table['passed'].sum())}/{len(table)} passed")
        self.results['invariants'] = table.to_dict(orient='records')
        table.to_csv(RESULTS_DIR / 'invariants.csv', index=False)
        return table

    def save_results(self):
        """Save detailed results to JSON"""
        output_path = RESULTS_DIR / 'acceptance.json'
        with open(output_path, 'w') as f:
            json.dump(self.results, f, indent=2, default=float)
        print(f"Detailed results saved to: {output_path}")

    def generate_visualizations(self):
        """Log-log error plot and the level-set measure curve"""
        print("\nGenerating visualizations...")

        fig, axes = plt.subplots(1, 2, figsize=(14, 5))

        ax = axes[0]
        for case_id, data in self.results.get('convergence', {}).items():
            if data['saturated']:
                continue
            table = pd.DataFrame(data['rows'])
            ax.loglog(table['h'], table['l2_error'], 'o-', label=f"{case_id} L2")
            ax.loglog(table['h'], table['h1_error'], 's--', label=f"{case_id} H1")
        ax.set_xlabel('h')
        ax.set_ylabel('error')
        ax.set_title('Manufactured solutions')
        ax.legend(fontsize=8)

        ax = axes[1]
        theta_path = RESULTS_DIR / 'theta.csv'
        if theta_path.exists():
            theta = pd.read_csv(theta_path)
            ax.semilogy(theta['k'], theta['theta'].clip(lower=1e-16), '-')
        ax.set_xlabel('k')
        ax.set_ylabel('|{|u| > k}|')
        ax.set_title('Level-set measure of the regular component')

        plt.tight_layout()
        output_path = RESULTS_DIR / 'acceptance_plot.png'
        plt.savefig(output_path, dpi=200, bbox_inches='tight')
        print(f"Visualization saved to: {output_path}")
        plt.close()


def main():
    """Main evaluation entry point"""
    evaluator = AcceptanceEvaluator(threads=int(os.getenv("PBESOLVE_THREADS", "1")))

    print("="*80)
    print("PBESOLVE ACCEPTANCE REPORT")
    print("="*80)

    evaluator.run_invariants()
    evaluator.run_convergence()
    evaluator.run_splitting()
    evaluator.run_bounds()
    evaluator.run_dilute_limit()
    evaluator.save_results()

    try:
        evaluator.generate_visualizations()
    except Exception as e:
        print(f"Visualization failed: {e}")

    print("\n" + "="*80)
    print("EVALUATION COMPLETE")
    print("="*80)
    print(f"Results saved to: {RESULTS_DIR}")


if __name__ == "__main__":
    main()
