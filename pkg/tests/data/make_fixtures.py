"""Regenerate the synthetic FCIDUMP fixtures used by the test suite."""

from pathlib import Path

from forgeqse.chemio import random_integrals, write_fcidump

FIXTURES = {
    "2e2o_a1b1.fcidump": (2, 2, ("A1", "B1"), 0),
    "2e2o_a1a1.fcidump": (2, 2, ("A1", "A1"), 1),
    "2e2o_b1b2.fcidump": (2, 2, ("B1", "B2"), 2),
    "4e4o_mixed.fcidump": (4, 4, ("A1", "B1", "B1", "A1"), 5),
}

if __name__ == "__main__":
    here = Path(__file__).parent
    for name, (n, ne, irreps, seed) in FIXTURES.items():
        (here / name).write_text(write_fcidump(random_integrals(n, ne, irreps, seed=seed)))
