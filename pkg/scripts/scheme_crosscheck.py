"""IMEX against explicit Euler at a small fixed step on the reference datum."""

import argparse
from dataclasses import dataclass

import numpy as np

from anideg import AnisotropySpec, RegularizedMaterial, TorusGrid, log_quench
from anideg.material import regularize_initial
from anideg.stepper import SimState, SolverConfig, advance


@dataclass
class CrossCheckConfig:
    n: int = 128
    length: float = 32.0
    delta: float = 0.05
    dt: float = 1e-6
    steps: int = 1000
    seed: int = 1


def max_difference(cfg: CrossCheckConfig):
    grid = TorusGrid.uniform(1, cfg.n, cfg.length)
    material = RegularizedMaterial(log_quench(1.0, 2.0), cfg.delta)
    aniso = AnisotropySpec.isotropic(1)
    rng = np.random.default_rng(cfg.seed)
    phi0 = regularize_initial(0.2 + 0.1 * rng.uniform(-1, 1, grid.shape), cfg.delta)
    finals = {}
    for scheme in ("imex", "explicit"):
        solver = SolverConfig(
            scheme=scheme, dt_init=cfg.dt, dt_min=cfg.dt, dt_max=cfg.dt, t_final=cfg.dt * cfg.steps,
            snapshot_stride=10**9, diagnostics_stride=10**9,
        )
        finals[scheme] = advance(SimState.from_phi(grid, phi0, material, aniso), solver)
    return finals, float(np.max(np.abs(finals["imex"].phi - finals["explicit"].phi)))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=1000)
    cfg = CrossCheckConfig(steps=ap.parse_args().steps)
    finals, diff = max_difference(cfg)
    print(f"steps: imex={finals['imex'].step_count} explicit={finals['explicit'].step_count}")
    print(f"max |phi_imex - phi_explicit| = {diff:.3e}")


if __name__ == "__main__":
    main()
