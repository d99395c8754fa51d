from tvwave.utils.base_logger import logger

__version__ = '0.1.0'
