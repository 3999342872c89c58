"""
Django settings for the beamtrack project.

Only the pieces the simulator uses are configured: installed apps, logging
and the knobs the run_tracking command reads. There is no web surface and no
database; every test is a SimpleTestCase.
"""

from pathlib import Path
from decouple import config

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = config('SECRET_KEY', default='beamtrack-development-only')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='localhost', cast=lambda v: [s.strip() for s in v.split(',')])

# Application definition

DJANGO_APPS = [
    'django.contrib.contenttypes',
    'django.contrib.auth',
]

TRIGGER_APPS = [
    'rest_framework',
]

MY_APPS = [
    'core.apps.CoreConfig',
    'scenarios.apps.ScenariosConfig',
]

INSTALLED_APPS = DJANGO_APPS + TRIGGER_APPS + MY_APPS

DATABASES = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

# Simulation
# Directory used when neither the manifest nor --out names one.

BEAMTRACK_OUTPUT_DIR = config('BEAMTRACK_OUTPUT_DIR', default=str(BASE_DIR / 'results'))

# Process pool width for scenario batches; 1 runs everything in-process.
BEAMTRACK_WORKERS = config('BEAMTRACK_WORKERS', default=1, cast=int)

BEAMTRACK_LOG_LEVEL = config('BEAMTRACK_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'core': {
            'handlers': ['console'],
            'level': BEAMTRACK_LOG_LEVEL,
            'propagate': False,
        },
        'scenarios': {
            'handlers': ['console'],
            'level': BEAMTRACK_LOG_LEVEL,
            'propagate': False,
        },
    },
}

REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
}
