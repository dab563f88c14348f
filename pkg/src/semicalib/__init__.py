"""Emulation and Bayesian calibration for semi-continuous spatial model output.

Ice-sheet style fields are zero over much of the domain and positive
elsewhere.  The package reduces ensemble output with logistic PCA (presence)
and PPCA with missing data (positive thickness), emulates the scores with
Gaussian processes, and calibrates model inputs against an observed field.
"""

__version__ = "0.1.0"
