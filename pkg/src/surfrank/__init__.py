"""surfrank: rank noisy response surfaces with small neural classifiers.

Modules:

* :mod:`surfrank.surfaces` -- synthetic surface families, samplers, loss metric
* :mod:`surfrank.nn`       -- dense/conv layers, manual backprop, Adam, builders
* :mod:`surfrank.ranking`  -- designs, labeled data, experiment pipeline
* :mod:`surfrank.bermudan` -- decision-map training and Monte Carlo pricing
* :mod:`surfrank.lattice`  -- two-asset binomial oracle
* :mod:`surfrank.cli`      -- command-line front end
"""

__version__ = "0.1.0"
