"""
Experiment configuration support.
"""
from whitlab.config.parser import (
    ConfigParser,
    ExperimentConfig,
    create_example_config,
    load_config,
)

__all__ = ['ConfigParser', 'ExperimentConfig', 'create_example_config', 'load_config']
