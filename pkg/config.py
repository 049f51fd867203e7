import os


def _env_bool(name: str, default: str = "false") -> bool:
    return os.environ.get(name, default).lower() == "true"


class Config:
    """Base configuration class"""

    DEBUG = False
    TESTING = False

    # Application Settings
    APP_NAME = "funhash-nets"
    APP_VERSION = "1.0.0"

    # Paths
    DATA_DIR = os.environ.get("FUNHASH_DATA_DIR", "data")
    RESULTS_DIR = os.environ.get("FUNHASH_RESULTS_DIR", "results")

    # Hashing
    HASH_MODE = os.environ.get("FUNHASH_HASH_MODE", "cached")
    MAX_CACHE_ENTRIES = int(os.environ.get("FUNHASH_MAX_CACHE_ENTRIES", 64_000_000))

    # Virtual matrix scratch buffer (entries of V materialized at once)
    MAX_SCRATCH_ENTRIES = int(os.environ.get("FUNHASH_MAX_SCRATCH_ENTRIES", 4_000_000))

    # Largest K^U the reformulation oracles accept
    ENUMERATION_CAP = int(os.environ.get("FUNHASH_ENUMERATION_CAP", 4096))

    # Parallelism
    LAYER_WORKERS = int(os.environ.get("FUNHASH_LAYER_WORKERS", 1))
    SWEEP_WORKERS = int(os.environ.get("FUNHASH_SWEEP_WORKERS", 1))

    # Verification
    LEMMA_TRIALS = int(os.environ.get("FUNHASH_LEMMA_TRIALS", 100_000))

    # Logging
    LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO")
    LOG_FILE = os.environ.get("LOG_FILE")
    LOG_JSON = _env_bool("LOG_JSON")
    LOG_MAX_BYTES = 10485760  # 10MB
    LOG_BACKUP_COUNT = 5

    @classmethod
    def layer_settings(cls) -> dict:
        """Runtime settings handed to every layer."""
        return {
            "max_cache_entries": cls.MAX_CACHE_ENTRIES,
            "max_scratch_entries": cls.MAX_SCRATCH_ENTRIES,
            "workers": cls.LAYER_WORKERS,
            "hash_mode": cls.HASH_MODE,
        }


class DevelopmentConfig(Config):
    """Development environment configuration"""

    DEBUG = True


class ProductionConfig(Config):
    """Production environment configuration"""

    DEBUG = False
    TESTING = False

    # Long sweeps write machine-readable logs
    LOG_JSON = _env_bool("LOG_JSON", "true")


class TestingConfig(Config):
    """Testing environment configuration"""

    TESTING = True
    DEBUG = True

    # Small budgets so tests exercise the streamed path
    MAX_CACHE_ENTRIES = 1_000_000
    MAX_SCRATCH_ENTRIES = 64
    LEMMA_TRIALS = 20_000
    LOG_LEVEL = "WARNING"


# Configuration dictionary
config = {
    "development": DevelopmentConfig,
    "production": ProductionConfig,
    "testing": TestingConfig,
    "default": DevelopmentConfig,
}


def get_config():
    """Get configuration based on environment variable"""
    env = os.environ.get("FUNHASH_ENV", "development")
    return config.get(env, config["default"])
