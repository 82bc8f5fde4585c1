#!/usr/bin/env python3
"""Generate the FCIDUMP integral fixtures used by the test suite.

Requires pyscf. Run from the repository root:

    python3 scripts/make_fixtures.py            # default fixtures
    python3 scripts/make_fixtures.py --extended # large Li2 / H2O cc-pVTZ fixtures

All fixtures use canonical RHF orbitals and correlate every electron.
"""
import argparse
import math
import os

from pyscf import gto, scf
from pyscf.tools import fcidump

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures")


def write(name, mol, tol=1e-15):
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    path = os.path.join(OUT, name)
    fcidump.from_scf(mf, path, tol=tol)
    print(f"{name}: nmo={mf.mo_coeff.shape[1]} nelec={mol.nelectron} e_hf={mf.e_tot:.10f}")


def default():
    write("be_ccpvdz.fcidump", gto.M(atom="Be 0 0 0", basis="cc-pvdz", verbose=0))
    write("h2_631g.fcidump", gto.M(atom="H 0 0 0; H 0 0 0.74", basis="6-31g", verbose=0))
    write("lih_sto3g.fcidump", gto.M(atom="Li 0 0 0; H 0 0 1.6", basis="sto-3g", verbose=0))
    write("h2o_sto3g.fcidump",
          gto.M(atom="O 0 0 0.1173; H 0 0.7572 -0.4692; H 0 -0.7572 -0.4692",
                basis="sto-3g", verbose=0))


def extended():
    write("li2_ccpvtz_2.67300.fcidump",
          gto.M(atom="Li 0 0 0; Li 0 0 2.67300", basis="cc-pvtz", cart=False, verbose=0),
          tol=1e-12)
    r, theta = 0.96183, math.radians(103.9215)
    y, z = r * math.sin(theta / 2), r * math.cos(theta / 2)
    write("h2o_ccpvtz_re.fcidump",
          gto.M(atom=f"O 0 0 0; H 0 {y:.8f} {-z:.8f}; H 0 {-y:.8f} {-z:.8f}",
                basis="cc-pvtz", verbose=0),
          tol=1e-12)


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--extended", action="store_true")
    args = ap.parse_args()
    os.makedirs(OUT, exist_ok=True)
    extended() if args.extended else default()
