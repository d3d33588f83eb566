"""Figure scripts for nestedenkf experiment outputs.

This package consumes only the flat-file interface of the experiment
harness — schema-versioned CSVs and the JSON run summary — and renders
publication-style figures: parameter-convergence traces, RMSE curves and
heatmaps over parameter lattices, replicate box plots, and residual
covariance bars.
"""

__version__ = "0.1.0"
