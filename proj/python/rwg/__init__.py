"""Mode coupling in randomly perturbed rectangular waveguides."""

from ._rwg import ConfigError, __version__, analyze, modes, resolved_config, run

__all__ = ["ConfigError", "__version__", "analyze", "modes", "resolved_config", "run"]
