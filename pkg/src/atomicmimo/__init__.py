"""Link-level simulation and detection for magnitude-only atomic MU-MIMO receivers.

Subpackages and modules:

* ``rng`` / ``numerics`` -- seeded splittable randomness and complex matrix helpers
* ``autodiff`` -- tape-based reverse-mode differentiation over a fixed primitive set
* ``constellation`` / ``channel`` -- QAM alphabets, channels, magnitude measurements
* ``classical`` -- two-step pipelines (PGD / biased Gerchberg-Saxton) and exhaustive ML
* ``icl`` -- the prompt-based transformer detector (tokenize, train, cached inference)
* ``bench`` -- experiment harness and command line interface
"""

from atomicmimo.rng import RngState

__all__ = ["RngState"]
__version__ = "0.1.0"
