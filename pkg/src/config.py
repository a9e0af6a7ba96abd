import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


class Config:
    # Window Configuration
    # Upper bound on the number of vertices any single enumeration may produce
    WINDOW_LIMIT = int(os.getenv("TREESHIFT_WINDOW_LIMIT", "100000"))
    DEFAULT_UP = int(os.getenv("TREESHIFT_DEFAULT_UP", "32"))
    DEFAULT_DOWN = int(os.getenv("TREESHIFT_DEFAULT_DOWN", "32"))

    # Evidence Configuration
    PROBE_DEPTH = int(os.getenv("TREESHIFT_PROBE_DEPTH", "4"))
    N_MAX = int(os.getenv("TREESHIFT_N_MAX", "10"))
    DECAY_MARGIN = 1e-6

    # Oracle Configuration
    ORACLE_TOLERANCE = 1e-6
    ORACLE_MAX_ITERATIONS = 10000

    # Run Configuration
    SEED = int(os.getenv("TREESHIFT_SEED", "0"))
    LOG_LEVEL = os.getenv("TREESHIFT_LOG_LEVEL", "WARNING")
    LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"
    LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"

    # Document schema identifiers
    TREE_SCHEMA = "treeshift/tree/v1"
    WEIGHTS_SCHEMA = "treeshift/weights/v1"


# Create a global config instance
config = Config()
