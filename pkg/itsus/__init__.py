"""
Integrated tempering sampling combined with umbrella sampling on analytic surfaces.
"""
__version__ = "0.1.1"

default_app_config = "itsus.apps.ItsUsConfig"
