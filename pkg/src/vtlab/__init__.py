"""vtlab: a desk-scale visuo-tactile imitation-learning laboratory.

Pipeline stages: simulated demonstration collection (simworld), multi-rate
stream synchronization (sync), binary episode storage (dataio), contrastive
tactile pre-training (pretrain), diffusion-policy cloning (policy),
latency-compensated closed-loop execution (deploy), and the experimental
protocol (evalharness). The `vtlab` CLI wires them together.
"""

from .config import RunConfig, load_config, write_resolved_config
from .errors import DataError, NumericalError, UsageError, VtlabError

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "NumericalError",
    "RunConfig",
    "UsageError",
    "VtlabError",
    "__version__",
    "load_config",
    "write_resolved_config",
]
