"""
Django settings for the irl_workbench project.

The project has no web surface: Django provides the settings layer, the
management commands that drive experiments and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = 'django-insecure-irl-workbench-local-only'

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'mdp_app',
    'gridworld_app',
    'sampling_app',
    'estimation_app',
    'analysis_app',
    'experiments_app',
]

MIDDLEWARE = []


# Database
# The workbench keeps no state in a database; results are plain files.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db.sqlite3',
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging
# https://docs.djangoproject.com/en/5.2/topics/logging/

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {'handlers': ['console'], 'level': 'INFO', 'propagate': False}
        for app in (
            'mdp_app', 'gridworld_app', 'sampling_app',
            'estimation_app', 'analysis_app', 'experiments_app',
        )
    },
}


# Workbench defaults
# Values used whenever a run config omits a key.

WORKBENCH = {
    'SOLVER_TOL': 1e-10,
    'SOLVER_MAX_ITER': 100_000,
    'SMOOTHING': 1.0,
    'LAMBDA_GRID': [0.001, 0.5, 10.0],
    'GRIDWORLD': {
        'width': 5,
        'height': 5,
        'start': [0, 0],
        'goal_logit': 20.0,
        'discount': 0.7,
        'expert_trajectories': 100,
        'expert_horizon': 50,
        'seed': 0,
    },
    'TRAIN': {
        'outer_iters': 2000,
        'reward_lr': 0.05,
        'dynamics_lr': 0.05,
        'dynamics_steps_per_outer': 5,
        'rollout_batch': 256,
        'rollout_steps': 40,
        'snapshot_every': 100,
    },
    'OUTPUT': {
        'directory': 'runs',
        'eval_rollouts': 100,
        'witness_fraction': 0.1,
        'witness_lambda': 1.0,
    },
}
