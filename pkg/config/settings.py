# config/settings.py

from __future__ import annotations

import os
from typing import Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel

load_dotenv()


class DGDNSettings(BaseModel):
    # --- NUMERICS ---
    dtype: Literal["float64", "float32"] = os.getenv("DGDN_DTYPE", "float64")  # float32 is opt-in for speed
    default_seed: int = int(os.getenv("DGDN_DEFAULT_SEED", "0"))

    # --- LOGGING ---
    log_level: str = os.getenv("DGDN_LOG_LEVEL", "INFO")
    log_file: Optional[str] = os.getenv("DGDN_LOG_FILE") or None
    log_json: bool = os.getenv("DGDN_LOG_JSON", "0").lower() in {"1", "true", "yes"}

    def logging_config(self) -> dict:
        return {
            "level": self.log_level,
            "console": True,
            "file": self.log_file is not None,
            "log_file": self.log_file,
            "json_console": self.log_json,
        }


settings = DGDNSettings()
