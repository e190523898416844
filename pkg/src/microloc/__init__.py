"""Numerical microlocal analysis of free fields on curved spacetimes.

Submodules: ``geometry`` (metrics, Christoffels, tetrads, geodesics),
``spin`` (curved gammas, spin connection, bispinor algebra), ``symbols``
(operator symbols and real-principal-type factorizations), ``flow``
(bicharacteristics and polarization transport), ``hadamard`` (two-point
functions and wave front set predictors), ``wfdetect`` (Fourier-decay
detectors) and ``cli``.
"""

__version__ = "0.1.0"
