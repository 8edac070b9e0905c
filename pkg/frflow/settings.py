from pathlib import Path
import os

from dotenv import load_dotenv
import dj_database_url

# ====================
# Paths
# ====================
BASE_DIR = Path(__file__).resolve().parent.parent
load_dotenv(BASE_DIR / ".env")

# ====================
# Secret & Debug
# ====================
SECRET_KEY = os.getenv("SECRET_KEY", "unsafe-secret-key")
DEBUG = os.getenv("DEBUG", "False") == "True"

ALLOWED_HOSTS = []

# ====================
# Applications
# ====================
INSTALLED_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",

    "rest_framework",

    "measures",
    "lp_geometry",
    "flow",
    "mdp_core",
    "npg",
    "games",
    "experiments",
]

# ====================
# Templates (SVG figures are rendered from app templates)
# ====================
TEMPLATES = [
    {
        "BACKEND": "django.template.backends.django.DjangoTemplates",
        "DIRS": [],
        "APP_DIRS": True,
        "OPTIONS": {"context_processors": []},
    },
]

# ====================
# Database (experiment manifests only)
# ====================
DATABASES = {
    "default": dj_database_url.config(
        default=f"sqlite:///{BASE_DIR / 'db.sqlite3'}",
        conn_max_age=600,
    )
}

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# ====================
# i18n / tz
# ====================
LANGUAGE_CODE = "en-us"
TIME_ZONE = "UTC"
USE_I18N = False
USE_TZ = True

# ====================
# REST Framework (serializers + JSON rendering of manifests)
# ====================
REST_FRAMEWORK = {
    "DEFAULT_RENDERER_CLASSES": ("rest_framework.renderers.JSONRenderer",),
    "COERCE_DECIMAL_TO_STRING": False,
    "UNAUTHENTICATED_USER": None,
}

# ====================
# Logging
# ====================
LOG_LEVEL = os.getenv("FRFLOW_LOG_LEVEL", "INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "plain": {"format": "%(asctime)s %(levelname)s %(name)s: %(message)s"},
    },
    "handlers": {
        "console": {"class": "logging.StreamHandler", "formatter": "plain"},
    },
    "root": {"handlers": ["console"], "level": LOG_LEVEL},
}

# ====================
# FRFLOW (overrides of frflow.conf.DEFAULTS)
# ====================
FRFLOW_ENVIRONMENT = {
    "NEWTON_TOL": ("FRFLOW_NEWTON_TOL", float),
    "NEWTON_MAX_ITER": ("FRFLOW_NEWTON_MAX_ITER", int),
    "VERTEX_ENUMERATION_BUDGET": ("FRFLOW_VERTEX_BUDGET", int),
    "THREADS": ("FRFLOW_THREADS", int),
    "OUTPUT_DIR": ("FRFLOW_OUTPUT_DIR", Path),
}

FRFLOW = {"OUTPUT_DIR": BASE_DIR / "out"}
FRFLOW.update({
    name: cast(os.environ[variable])
    for name, (variable, cast) in FRFLOW_ENVIRONMENT.items()
    if os.getenv(variable)
})
