"""
Configuration settings for the STVS Lab application.
"""
import os
import logging

from dotenv import load_dotenv

# Optional overrides from a local .env file; nothing is required.
load_dotenv()

# Base directory of the application
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# Data directory (created lazily by the writers)
DATA_DIR = os.environ.get("STVS_DATA_DIR", os.path.join(BASE_DIR, "data"))

# Run registry path
DB_PATH = os.path.join(DATA_DIR, "stvs_runs.db")

DEFAULT_LOG_LEVEL = os.environ.get("STVS_LOG_LEVEL", "INFO")

# Grid defaults
GRID_CONFIG = {
    "builtin_prefix": "builtin:",
    "default_grid": "builtin:ne39",
}

# Power flow and dynamic simulation
SIM_CONFIG = {
    "pf_tol": 1e-8,
    "pf_max_iter": 50,
    "dt": 0.01,
    "horizon": 5.0,
    "t_on": 0.1,
    "fault_admittance": 1e4,
    "frequency": 60.0,
    "v_cutoff": 0.3,
    "newton_tol": 1e-8,
    "newton_max_iter": 20,
    "equilibrium_tol": 1e-6,
}

# Third-order induction motor parameters on the motor's own base
MOTOR_DEFAULTS = {
    "rs": 0.01,
    "xs": 0.10,
    "xm": 3.0,
    "rr": 0.018,
    "xr": 0.18,
    "h": 0.5,
    "torque_exponent": 2.0,
}

DEFAULT_MOTOR_FRACTION = 0.5

# Feature construction and labeling
FEATURE_CONFIG = {
    "window": 0.8,
    "window_offset": 0.0,
    "v_thresh": 0.8,
    "dwell_thresh": 1.0,
    "noise_sigma_mag": 0.3,
    "noise_sigma_ang_deg": 1.5,
}

# CNN and optimizer
TRAIN_CONFIG = {
    "channels": (16, 32, 64, 64),
    "kernel": 3,
    "pool_after": (1, 3),
    "learning_rate": 1e-3,
    "batch_size": 64,
    "epochs": 50,
    "patience": 5,
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
    "finetune_lr_scale": 0.1,
    "finetune_epochs": 10,
    "bn_momentum": 0.9,
    "bn_eps": 1e-5,
}

# Dataset generation
DATASET_CONFIG = {
    "load_scale_range": (0.8, 1.2),
    "duration_range": (0.1, 0.4),
    "source_count": 5000,
    "split": (0.6, 0.2, 0.2),
    "target_finetune": 1000,
    "target_test": 500,
    "min_class_fraction": 0.10,
    "balance_budget": 3.0,
    "max_redraws": 5,
    "kfold": 10,
}

# Transfer topology changes (lines disconnected from the base 39-bus grid)
TRANSFER_SCENARIOS = {
    "G1": ((2, 3),),
    "G2": ((5, 8),),
    "G3": ((14, 15),),
    "G4": ((4, 14),),
    "G5": ((16, 24),),
    "G6": ((17, 18),),
    "G7": ((2, 3), (5, 8)),
    "G8": ((4, 14), (14, 15)),
    "G9": ((16, 24), (17, 18)),
    "G10": ((14, 15), (16, 24)),
    "G11": ((4, 14), (17, 18)),
    "G12": ((14, 15), (17, 18)),
}


# Logging configuration
def configure_logging(log_level: str = "INFO") -> None:
    """Configure logging for the application."""
    log_dir = os.path.join(DATA_DIR, "logs")
    os.makedirs(log_dir, exist_ok=True)

    log_file = os.path.join(log_dir, "stvs.log")

    log_levels = {
        "DEBUG": logging.DEBUG,
        "INFO": logging.INFO,
        "WARNING": logging.WARNING,
        "ERROR": logging.ERROR,
        "CRITICAL": logging.CRITICAL
    }

    level = log_levels.get(log_level.upper(), logging.INFO)

    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_file),
            logging.StreamHandler()
        ]
    )
