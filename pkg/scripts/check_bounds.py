"""Compare each preset's step size with the convergence bound of its setup.

Prints one row per preset variant: the configured eta, the bound (delay-scaled),
the window over which the union graph is connected, and their ratio.
"""

import sys

from momsched.harness import presets
from momsched.harness.runner import build_setup, setup_bound


def main() -> int:
    print(f"{'variant':28} {'eta':>8} {'eta_tau_bar':>12} {'window':>6} {'ratio':>8}")
    for name in sorted(presets.PRESETS):
        for label, cfg in presets.preset(name).variants():
            bound, window = setup_bound(build_setup(cfg))
            tag = f"{name}/{label}" if label else name
            if bound is None:
                print(f"{tag:28} {cfg.eta:8.4g} {'none':>12} {'-':>6} {'-':>8}")
                continue
            ratio = cfg.eta / bound.eta_tau_bar
            print(f"{tag:28} {cfg.eta:8.4g} {bound.eta_tau_bar:12.4g} {window:6d} {ratio:8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
