from .config import ConfigError, ExperimentConfig, SCENARIOS, config_from_dict, load_config
from .report import emit, to_csv
from .runner import ResultRow, run_experiment
