"""Access to the ``FRFLOW`` settings dict with library defaults.

``DEFAULTS`` is the only place the numerical defaults live; the project
settings hold overrides only. The numerical apps are importable without a
configured Django project, in which case the defaults apply unchanged.
"""
import os

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

DEFAULTS = {
    "NEWTON_TOL": 1e-12,
    "NEWTON_MAX_ITER": 200,
    "ARMIJO": 1e-4,
    "FACE_TIE_RTOL": 1e-9,
    "VERTEX_MERGE_TOL": 1e-9,
    "VERTEX_ENUMERATION_BUDGET": 10**6,
    "JOINT_SIZE_BUDGET": 10**6,
    "GRID_POINTS": 200,
    "GRID_T_MIN": 1e-2,
    "GRID_RATE_HORIZON": 100.0,
    "NPG_STEPSIZE": 1e-2,
    "NPG_ITERS": 3000,
    "PINV_REL_TOL": 1e-10,
    "BLOWUP_THRESHOLD": 1e8,
    "THREADS": os.cpu_count() or 1,
    "OUTPUT_DIR": "out",
}


def frflow_setting(name):
    try:
        overrides = getattr(settings, "FRFLOW", {})
    except ImproperlyConfigured:
        overrides = {}
    if name in overrides:
        return overrides[name]
    return DEFAULTS[name]
