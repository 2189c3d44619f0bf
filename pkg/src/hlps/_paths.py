import os
from pathlib import Path

# Use environment variable if it exists, otherwise fallback to ./runs relative to the working directory
path_out = Path(os.getenv("HLPS_OUT_DIR", Path.cwd() / "runs"))

# Experiment configs of a source or editable checkout; they are not installed with the package,
# so pass --config explicitly when running from a regular install.
path_configs = Path(__file__).resolve().parents[2] / "configs"


def default_out_dir() -> Path:
    """Output root, re-read from the environment so tests can monkeypatch it."""
    return Path(os.getenv("HLPS_OUT_DIR", path_out))
