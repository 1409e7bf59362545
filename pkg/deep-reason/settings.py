"""
Environment configuration for the deep-reason tool
"""
import os

from dotenv import load_dotenv

load_dotenv()

VERSION = "1.0.0"

LOG_LEVEL = os.getenv("DEEP_REASON_LOG_LEVEL", "INFO")

# Default worker count for commands that accept --jobs
JOBS = int(os.getenv("DEEP_REASON_JOBS", "1"))

DATA_DIR = os.getenv("DEEP_REASON_DATA_DIR", "data")
