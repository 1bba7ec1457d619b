"""
Environment configuration and logging setup.
"""
import logging
import os
from typing import Optional

from dotenv import load_dotenv

API_KEY_VAR = "TRUST_LLM_API_KEY"
ENDPOINT_VAR = "TRUST_LLM_ENDPOINT"
MODEL_VAR = "TRUST_LLM_MODEL"
LOG_LEVEL_VAR = "TRUST_LOG_LEVEL"

DEFAULT_ENDPOINT = "https://api.openai.com/v1"
DEFAULT_CHAT_MODEL = "gpt-4o-mini"

_configured = False


def load_environment() -> None:
    """Load variables from a local .env file without overriding the process environment."""
    load_dotenv(override=False)


def env_value(name: str, default: Optional[str] = None) -> Optional[str]:
    value = os.getenv(name)
    return value if value else default


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging once; the level falls back to TRUST_LOG_LEVEL, then WARNING."""
    global _configured
    if _configured:
        return
    level_name = (level or env_value(LOG_LEVEL_VAR, "WARNING")).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    _configured = True
