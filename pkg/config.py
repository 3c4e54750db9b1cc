#!/usr/bin/env python3
"""
Shared configuration for cmhi experiments
"""

import os
from dotenv import load_dotenv

load_dotenv()

SEED = int(os.getenv('CMHI_SEED', '0'))
THREADS = int(os.getenv('CMHI_THREADS', '1'))
LOG_LEVEL = os.getenv('CMHI_LOG_LEVEL', 'INFO').upper()
OUTPUT_DIR = os.getenv('CMHI_OUTPUT_DIR', '.')
MODE_TOL = float(os.getenv('CMHI_MODE_TOL', '1e-8'))
MODE_MAX_ITER = int(os.getenv('CMHI_MODE_MAX_ITER', '50000'))
BURNIN = int(os.getenv('CMHI_BURNIN', '10000'))
BLOCK_SIZE = int(os.getenv('CMHI_BLOCK_SIZE', '1024'))
DOMINANCE_PROBES = int(os.getenv('CMHI_DOMINANCE_PROBES', '2000'))


def get_seed():
    """Default base seed when --seed is not given"""
    return SEED


def get_threads():
    """Replica-level worker threads"""
    return THREADS


def get_log_level():
    return LOG_LEVEL


def get_output_dir():
    return OUTPUT_DIR


def get_mode_tol():
    """Gradient-norm tolerance for the posterior mode"""
    return MODE_TOL


def get_mode_max_iter():
    return MODE_MAX_ITER


def get_burnin():
    """Burn-in steps for the stationary partner chain in couplings"""
    return BURNIN


def get_block_size():
    """Replicas simulated together on one random stream"""
    return BLOCK_SIZE


def set_block_size(size):
    """Override the block size for the current run (the CLI passes --block-size here)"""
    global BLOCK_SIZE
    if int(size) < 1:
        raise ValueError(f"INVALID_REQUEST: block size must be at least 1, got {size}")
    BLOCK_SIZE = int(size)


def get_dominance_probes():
    return DOMINANCE_PROBES


def print_config():
    """Print current configuration"""
    print(f"Seed: {SEED}")
    print(f"Threads: {THREADS}")
    print(f"Log level: {LOG_LEVEL}")
    print(f"Output dir: {OUTPUT_DIR}")
    print(f"Mode tolerance: {MODE_TOL}")
    print(f"Mode max iterations: {MODE_MAX_ITER}")
    print(f"Burn-in: {BURNIN}")
    print(f"Block size: {BLOCK_SIZE}")
    print(f"Dominance probes: {DOMINANCE_PROBES}")


if __name__ == "__main__":
    print_config()
