"""Tabulate b(x) for the Bessel(3) and CEV Cobb-Douglas set-ups with
alpha = beta = r = 1/2 (CEV: sigma = 1, gamma = 1/2).

Writes two plot-ready CSV files next to this script and prints a short
summary comparing the closed form with the generic solver.

    python3 demos/boundary_tables.py
"""
from pathlib import Path

import numpy as np

from freebound import CEV, Bessel3, CobbDouglas, closed_form_boundary, solve_on_grid

OUT = Path(__file__).resolve().parent
GRID = np.geomspace(1e-2, 1e2, 200)


def tabulate(label, diffusion, profit):
    closed = closed_form_boundary(diffusion, profit)(GRID)
    generic = solve_on_grid(diffusion, profit, GRID).values
    rel = np.abs(generic / closed - 1)
    path = OUT / f"{label}.csv"
    np.savetxt(path, np.column_stack([GRID, closed, generic]), delimiter=",",
               header="x,b_closed,b_generic", comments="", fmt="%.17g")
    print(f"{label:18s} b(0.01)={closed[0]:.6g}  b(1)={np.interp(0.0, np.log(GRID), closed):.6g}"
          f"  b(100)={closed[-1]:.6g}  max rel diff={rel.max():.2e}  -> {path.name}")


if __name__ == "__main__":
    cd = CobbDouglas(0.5, 0.5)
    tabulate("bessel3_cd_table", Bessel3(0.5), cd)
    tabulate("cev_cd_table", CEV(0.5, 1.0, 0.5), cd)
