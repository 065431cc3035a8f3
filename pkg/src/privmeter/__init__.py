"""Privacy-preserving network measurement, desk scale.

Synthetic relay traces with known ground truth are fed through two
secure aggregation protocols (blinded counters and a private set-union
cardinality protocol), and the noisy local results are turned into
network-wide estimates with confidence intervals.
"""

__version__ = "0.1.0"

from privmeter._kernels import BACKEND as KERNEL_BACKEND

__all__ = ["KERNEL_BACKEND", "__version__"]
