"""
itsus Django application initialization.
"""
from django.apps import AppConfig


class ItsUsConfig(AppConfig):
    """
    Configuration for the itsus enhanced sampling Django application.
    """
    name = 'itsus'
    verbose_name = 'Integrated tempering and umbrella sampling toolkit.'
