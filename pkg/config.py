import os
from dotenv import load_dotenv

load_dotenv()


def _float(name, default):
    return float(os.environ.get(name, default))


def _int(name, default):
    return int(os.environ.get(name, default))


class Config:
    SECRET_KEY = os.environ.get('SECRET_KEY') or 'dev-secret-key-change-in-production'
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO').upper()

    # Execution
    WORKERS = _int('TFOC_WORKERS', 4)
    SEED = _int('TFOC_SEED', 1234)
    REPORT_DIR = os.environ.get('TFOC_REPORT_DIR', 'reports')

    # Thresholds for empirical constants and experiment acceptance
    MODERATE_CAP = _float('TFOC_MODERATE_CAP', 1e6)
    LHS_POINTS = _int('TFOC_LHS_POINTS', 100000)
    PAIRING_RTOL = _float('TFOC_PAIRING_RTOL', 1e-3)
    DRIFT_FACTOR = _float('TFOC_DRIFT_FACTOR', 2.0)
    CV_THRESHOLD = _float('TFOC_CV_THRESHOLD', 0.05)
    HESSIAN_MIN_DET = _float('TFOC_HESSIAN_MIN_DET', 0.5)
    EQUIVALENCE_CAP = _float('TFOC_EQUIVALENCE_CAP', 10.0)
    WINDOW_SPREAD_CAP = _float('TFOC_WINDOW_SPREAD_CAP', 5.0)

    # Quadrature
    GAUSS_LEGENDRE_POINTS = _int('TFOC_GAUSS_LEGENDRE_POINTS', 32)
    SYMBOL_NORM_POINTS = _int('TFOC_SYMBOL_NORM_POINTS', 16)
    CELL_RADIUS = _int('TFOC_CELL_RADIUS', 2)

    # App configuration
    APP_NAME = "tfoc"
    APP_VERSION = "1.0.0"
