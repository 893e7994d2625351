"""Resonances and generalized geometric phases of a vibrating quantum cavity.

Subpackages cover: the static cavity eigenproblem (`cavity`), full spectral
time evolution (`evolve`), geometric-phase extraction (`phases`), the
two-level rotating-frame model (`rwa`), the exact two-level product-form
evolution (`su2`), frequency scans and width fits (`scan`), the analytic
spin-1/2 rotating-field model (`spin`), and a CLI (`cli`).
"""

__version__ = "0.1.0"
