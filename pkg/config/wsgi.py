"""
WSGI config for the Meshless DDM project.

Serves the Django admin over the recorded experiment runs. Django's ``runserver``
discovers this application via the ``WSGI_APPLICATION`` setting.
"""
import os
import sys
from pathlib import Path

from django.core.wsgi import get_wsgi_application

# This allows easy placement of apps within the interior
# meshless_ddm directory.
BASE_DIR = Path(__file__).resolve(strict=True).parent.parent
sys.path.append(str(BASE_DIR / "meshless_ddm"))
os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings.production")

application = get_wsgi_application()
