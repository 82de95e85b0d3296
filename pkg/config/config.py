"""
Configuration settings for the point-count workbench.
"""
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))


class Config:
    """Base configuration."""
    CACHE_PATH = os.getenv('POINTCOUNT_CACHE', 'pointcounts.jsonl')
    DATA_DIR = os.getenv('POINTCOUNT_DATA_DIR', os.path.join(PROJECT_ROOT, 'data'))
    JOBS = int(os.getenv('POINTCOUNT_JOBS', 1))
    SEED = int(os.getenv('POINTCOUNT_SEED', 20240601))
    
    # Prime ceilings per pipeline
    BRUTE_PRIME_CEILING = 31
    FIBRATION_PRIME_CEILING = 199
    HYPERGEOMETRIC_PRIME_CEILING = 499
    QUOTIENT_PRIME_CEILING = 19
    CONJECTURE_VERIFIED_BELOW = 20
    
    # Enumeration parameters
    CENSUS_INNER_DIMS = 3
    FP2_BRUTE_MAX_POINTS = 20_000_000
    H90_RETRIES = 50
    
    # Hypergeometric rounding gates
    F32_IMAG_TOL = 1e-6
    F32_ROUND_TOL = 1e-4
    
    # Arrangement analysis
    CH_MAX_FORMS = 16
    CH_MAX_DIM = 8
    AUT_SEARCH_MODULUS = 2**31 - 1
    
    # |[S]_p - (p^2+p+1)| <= WEIL_K3_CONSTANT * p for surface covers
    WEIL_K3_CONSTANT = 22
    
    # Bundled data files, relative to DATA_DIR
    DATA_FILES = {
        'f1': 'arrangements/f1.json',
        'v32': 'arrangements/v32.json',
        'k_lambda': 'arrangements/k_lambda.json',
        'l_lambda': 'arrangements/l_lambda.json',
        'k_minus_one': 'arrangements/k_minus_one.json',
        'l_minus_one': 'arrangements/l_minus_one.json',
        'k32': 'arrangements/k32.json',
        'l32_lambda': 'arrangements/l32_lambda.json',
        'f1_involutions': 'quotients/f1_involutions.json',
        'v32_involutions': 'quotients/v32_involutions.json',
        'level8_weight4': 'qexpansions/level8_weight4.json',
        'level8_weight6': 'qexpansions/level8_weight6.json',
    }


class DevelopmentConfig(Config):
    """Development configuration."""
    VERBOSE = True


class ProductionConfig(Config):
    """Production configuration."""
    VERBOSE = False


class TestingConfig(Config):
    """Configuration used by the unit tests."""
    VERBOSE = False
    CACHE_PATH = os.getenv('POINTCOUNT_CACHE', os.path.join(PROJECT_ROOT, 'tests', '.pointcounts-test.jsonl'))


# Select configuration based on environment
config_by_name = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}

config = config_by_name[os.getenv('ENVIRONMENT', 'default')]
