"""Compressed sensing with random ReLU network priors.

Submodules:

* :mod:`genprior.network` -- generative networks, activation patterns, collisions
* :mod:`genprior.wdc` -- expectation matrices, weight distribution deviation, smoothing
* :mod:`genprior.pseudolip` -- pseudo-balls, wideness, aspherical nets, concentration
* :mod:`genprior.recover` -- measurement models, descent recovery, RRIC, landscapes
* :mod:`genprior.harness` -- seeded experiment runner and command line
"""

__version__ = "0.1.0"
