#!/usr/bin/env python3
"""Recovery from degenerate canonical angles, and conditioning blowup.

Part one runs the screen recovery experiment at k = 20: the canonical
angles {pi/2, 3pi/2} make the coefficient system exactly singular, so
the method fails outright; adding a third angle restores it, for both
solve strategies and a range of truncation thresholds. Part two sweeps
the near-degenerate equilateral-triangle angle sets a + (m-1) pi/6 at
k = 10 and records the condition blowup as a -> 0 together with its
effect on the coefficient norm and the output error.
"""

import sys

from embedfar.cli import ExperimentConfig, cmd_oversampling_study


def run(out="oversampling_study.csv"):
    config = ExperimentConfig(out=out).validate()
    return cmd_oversampling_study(
        config, mtilde_list=[2, 3, 4], delta_list=[1e-2, 1e-8, 1e-12]
    )


if __name__ == "__main__":
    sys.exit(run(*sys.argv[1:]))
