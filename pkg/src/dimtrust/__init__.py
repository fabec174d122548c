"""Dimension-aware trust-region policy optimization toolkit.

Closed-form clipping-probability math for diagonal Gaussian policies,
TRPO / beta-surrogate update analysis, a small numpy autodiff with an
edge-conditioned graph policy, a variable-link swimmer and a PPO trainer
with optional sqrt(dim)-compensated clipping.
"""

__version__ = "0.1.0"
