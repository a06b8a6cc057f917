"""Perturbative algebraic QFT of the scalar field on a discretized 1+1D conformal-static spacetime."""
