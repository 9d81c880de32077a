"""Spectral toolkit for magnetically perturbed square-lattice media.

Bulk band structures and Chern numbers, effective 1D edge operators of
second-order (quadratic degeneracy) and first-order (Dirac) type, and full
edge-strip spectra, with the two-scale correspondence between them.
"""

__version__ = "0.1.0"
