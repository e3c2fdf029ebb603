"""
Django settings for the alignproject skill-gap pipeline.

The project runs as a batch tool through ``manage.py align``; there is no web
front end and no database. Everything the pipeline can be tuned with lives in
the ``ALIGN`` dictionary at the bottom of this file.
"""

from pathlib import Path
import os

BASE_DIR = Path(__file__).resolve().parent.parent

# ───────────────────────────────────────────────────────────────────────────────
# Security / Environment
# ───────────────────────────────────────────────────────────────────────────────
# Nothing is signed by this project, but Django refuses to start without a key.
SECRET_KEY = os.environ.get("SECRET_KEY", "align-batch-only-not-secret")

DEBUG = os.environ.get("DEBUG", "False").lower() == "true"

ALLOWED_HOSTS = []

# ───────────────────────────────────────────────────────────────────────────────
# Applications
# ───────────────────────────────────────────────────────────────────────────────
INSTALLED_APPS = [
    "alignapp",
]

# ───────────────────────────────────────────────────────────────────────────────
# Templates (summaries are plain text, so no HTML escaping)
# ───────────────────────────────────────────────────────────────────────────────
TEMPLATES = [
    {
        "BACKEND": "django.template.backends.django.DjangoTemplates",
        "DIRS": [],
        "APP_DIRS": True,
        "OPTIONS": {
            "autoescape": False,
        },
    },
]

# Outputs are plain files; the pipeline never touches a database.
DATABASES = {}

# ───────────────────────────────────────────────────────────────────────────────
# Internationalization
# ───────────────────────────────────────────────────────────────────────────────
LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# ───────────────────────────────────────────────────────────────────────────────
# Logging
# ───────────────────────────────────────────────────────────────────────────────
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "%(asctime)s %(levelname)s %(name)s %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "loggers": {
        "alignapp": {
            "handlers": ["console"],
            "level": os.environ.get("ALIGN_LOG_LEVEL", "INFO"),
            "propagate": False,
        },
    },
}

# ───────────────────────────────────────────────────────────────────────────────
# Pipeline defaults (overridden by --config files, then by command flags)
# ───────────────────────────────────────────────────────────────────────────────
ALIGN = {
    "TAU": 0.70,
    "BANDS": {"high": 0.80, "medium": 0.60},
    "K": 5,
    "K_PER_GAP": False,
    "INCLUDE_EXAMS": False,
    "MODES": {
        "preferences": "rule",
        "proficiency": "rule",
        "diagnose": "rule",
        "compat": "rule",
        "summary": "template",
    },
    "MODEL_ID": os.environ.get("ALIGN_MODEL", "gpt-4o"),
    "LABEL_MODELS": [],
    "AGENT_MODELS": [],
    "WORKERS": int(os.environ.get("ALIGN_WORKERS", "4")),
    "PROMPTS_DIR": BASE_DIR / "prompts",
    "LLM_URL": os.environ.get("ALIGN_LLM_URL", ""),
    "LLM_KEY": os.environ.get("ALIGN_LLM_KEY", ""),
    "SEARCH_URL": os.environ.get("ALIGN_SEARCH_URL", ""),
    "SEARCH_KEY": os.environ.get("ALIGN_SEARCH_KEY", ""),
    "HTTP_TIMEOUT": 20,
    "USER_AGENT": "alignapp-resource-check/1.0",
}
