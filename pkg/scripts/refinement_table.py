#!/usr/bin/env python3
"""Input and output errors under mesh refinement.

Builds the low-wavenumber conditioning table for the unit square and
the unit equilateral triangle at k in {5, 10}: three mesh refinements
per shape, with the embedded far field compared against a reference
solver four times finer than the finest refinement over a full
observation-incidence grid. Columns: k, shape, n_elements, e_in, e_out,
ratio, cond.
"""

import sys

from embedfar.cli import ExperimentConfig, cmd_table


def run(out="refinement_table.csv"):
    # 200x200 torus error grid, the package-wide desk-scale default
    config = ExperimentConfig(out=out, n_theta=200).validate()
    return cmd_table(
        config,
        k_list=[5.0, 10.0],
        shape_list=["square", "equilateral"],
        epw_list=[4.0, 8.0, 16.0],
    )


if __name__ == "__main__":
    sys.exit(run(*sys.argv[1:]))
