"""Green columns for a nonsymmetric operator on the unit cube.

Writes the nodal values of G(., y) for three sources, the weak norms of each
column, and the symmetry deviation against the adjoint kernel.

    python3 demos/green_columns.py [OUTDIR]
"""
import sys
from pathlib import Path

import numpy as np

from neumannlab import CoefficientField, ProblemSpec, check_symmetry, green_table, unit_cube


def main(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    mesh = unit_cube(3, 12)
    A = CoefficientField.constant([[1.0, 0.3, 0.0], [-0.1, 1.0, 0.2], [0.0, 0.0, 1.2]])
    b = CoefficientField.analytic(lambda X: -0.3 * (X - 0.5), (3,))
    spec = ProblemSpec(mesh, A=A, b=b, d=1.0)
    sources = np.array([[0.3, 0.4, 0.5], [0.6, 0.55, 0.4], [0.45, 0.7, 0.65]])
    table = green_table(spec, sources)
    (out / "green.csv").write_text(table.to_csv())
    (out / "green_norms.json").write_text(table.norms_json())
    for k, norms in enumerate(table.norms):
        print(f"y{k} = {sources[k]}: " + ", ".join(f"{key} {val:.4g}" for key, val in norms.items()))
    for mode in ("matched", "nodal"):
        rep = check_symmetry(spec, sources, mode=mode)
        print(f"symmetry ({mode}): relative deviation {rep.relative:.3e}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path("runs/green-demo"))
