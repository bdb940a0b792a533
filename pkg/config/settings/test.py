"""
With these settings, tests run faster.
"""

from .base import *  # noqa
from .base import env

# GENERAL
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#secret-key
SECRET_KEY = env(
    "DJANGO_SECRET_KEY",
    default="vQ3tY0c9Rk2LwE7mXb5NfHs8Ud1Ga4Jp6Zi0Ox3Ct9Ve2Ky7Mn5Bq8Wr1Ls4Hd6Fj",
)
# https://docs.djangoproject.com/en/dev/ref/settings/#test-runner
TEST_RUNNER = "django.test.runner.DiscoverRunner"

# PASSWORDS
# ------------------------------------------------------------------------------
# https://docs.djangoproject.com/en/dev/ref/settings/#password-hashers
PASSWORD_HASHERS = ["django.contrib.auth.hashers.MD5PasswordHasher"]

# MESHLESS DDM
# ------------------------------------------------------------------------------
DDM_CHECK_INVARIANTS = True
# Tests that run experiments shrink the grid explicitly; keep the default coarse.
DDM_EVAL_GRID = env.int("DDM_EVAL_GRID", default=21)
