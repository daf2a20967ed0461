"""
Constants for the shiftlab application.
This file contains constants for error messages, log messages, error codes and
the fixed numbers the toy environment and the file formats rely on.
"""

# Rendering intensities
AGENT_INTENSITY = 1.0
CAR_INTENSITY = 0.6
LANE_INTENSITY = 0.2
BACKGROUND_INTENSITY = 0.0

# Format versions
CHECKPOINT_FORMAT_VERSION = 1
TRAJECTORY_LOG_VERSION = 1
STATE_SPACE_VERSION = 1
DATASET_VERSION = 1
CLEAN_STATS_VERSION = 1

MAX_ENUMERATED_STATES = 1_000_000
PROJECTION_TIE_TOLERANCE = 1e-9

# Error messages
ERROR_INVALID_CONFIG = "Invalid configuration"
ERROR_INVALID_STATE = "State is not valid under the environment configuration"
ERROR_NOT_A_RENDER = "Frame is not an exact render of any environment state"
ERROR_STATE_SPACE_TOO_LARGE = "State space exceeds the enumeration capacity"
ERROR_SHAPE_MISMATCH = "Input shape does not match the architecture"
ERROR_NON_FINITE = "Non-finite value encountered"
ERROR_CORRUPT_FILE = "File is corrupt or has an unsupported format"
ERROR_TRAINING_THRESHOLD = "Training budget exhausted before reaching the quality threshold"
ERROR_COLD_HISTORY = "History window is not full yet"
ERROR_ZERO_MASS = "Frame has zero total mass"
ERROR_ZERO_MAD = "Clean statistics have zero MAD"
ERROR_MISSING_CHECKPOINT = "Required checkpoint is missing"
ERROR_NO_CLEAN_LOGS = "No clean trajectory logs available for detector statistics"

# Log messages
LOG_CONFIG_LOADED = "Experiment configuration loaded"
LOG_STATE_SPACE_ENUMERATED = "Valid state space enumerated"
LOG_STATE_SPACE_CACHE_HIT = "Valid state space loaded from cache"
LOG_DATASET_CACHE_HIT = "Transition dataset loaded from cache"
LOG_VALUE_ITERATION_DONE = "Value iteration converged"
LOG_VICTIM_EVAL = "Victim evaluated"
LOG_VICTIM_TRAINED = "Victim trained successfully"
LOG_DIFFUSION_TRAINED = "Diffusion model trained successfully"
LOG_AE_TRAINED = "Autoencoder trained successfully"
LOG_CHECKPOINT_SAVED = "Checkpoint saved"
LOG_CHECKPOINT_LOADED = "Checkpoint loaded"
LOG_EPISODE_DONE = "Episode finished"
LOG_CELL_DONE = "Evaluation cell finished"
LOG_DETECTION_DONE = "Detection evaluation finished"
LOG_REPORT_WRITTEN = "Report written"

# Error codes
ERROR_CODE_CONFIG = "CONFIG_ERROR"
ERROR_CODE_STATE = "STATE_ERROR"
ERROR_CODE_NOT_A_RENDER = "NOT_A_VALID_RENDER"
ERROR_CODE_CAPACITY = "CAPACITY_ERROR"
ERROR_CODE_SHAPE = "SHAPE_ERROR"
ERROR_CODE_NUMERICS = "NUMERICS_ERROR"
ERROR_CODE_FORMAT = "FORMAT_ERROR"
ERROR_CODE_TRAINING = "TRAINING_ERROR"
ERROR_CODE_DOMAIN = "DOMAIN_ERROR"
ERROR_CODE_WARMUP = "WARMUP_ERROR"
ERROR_CODE_DEGENERATE_MASS = "DEGENERATE_MASS"
ERROR_CODE_DEGENERATE_STATS = "DEGENERATE_STATS"
ERROR_CODE_NOT_FOUND = "NOT_FOUND"
