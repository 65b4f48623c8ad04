"""
Pytest wiring: configure Django with the test settings before collection.
"""
import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "itsus.settings.test")
django.setup()
