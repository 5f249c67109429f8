"""
Django settings for the diffprog project.
Differentiable-programming engine with an experiment harness on SQLite3.
"""
from pathlib import Path

import environ

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

env = environ.Env(
    DEBUG=(bool, True),
    DP_SEED=(int, None),
    DP_OUTPUT_ROOT=(str, 'runs'),
    DP_LOG_LEVEL=(str, 'INFO'),
    DP_WORKERS=(int, 1),
)

# Load environment variables from .env file when present
environ.Env.read_env(BASE_DIR / '.env', overwrite=False)

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = env('SECRET_KEY', default='django-insecure-change-this-in-production-diffprog-secret-key')

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = env('DEBUG')

ALLOWED_HOSTS = env.list('ALLOWED_HOSTS', default=['localhost', '127.0.0.1'])

# Application definition
INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',

    # Third-party apps
    'django_extensions',

    # Local apps
    'apps.core',
    'apps.experiments',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'config.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'config.wsgi.application'

# Database - SQLite3 holds the experiment run ledger
DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': BASE_DIR / 'db' / 'diffprog.sqlite3',
        'OPTIONS': {
            'timeout': 30,
        },
    }
}

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

STATIC_URL = 'static/'

# Default primary key field type
DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Experiment harness
DP_SEED = env('DP_SEED')  # overrides the seed of every experiment config when set
DP_OUTPUT_ROOT = BASE_DIR / env('DP_OUTPUT_ROOT')
DP_WORKERS = env('DP_WORKERS')
DP_LOG_LEVEL = env('DP_LOG_LEVEL').upper()

# Engine defaults handed to library code by the management commands
DIFFERENTIABLE_ENGINE = {
    'SCORE_HIDDEN': 16,  # tanh width a of the feedforward attention score
    'GRADCHECK_STEP': 1e-6,
    'GRADCHECK_TOL': 1e-5,
    'GRADCHECK_TOL_PLASTIC': 1e-4,
}

# Logging Configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {process:d} {thread:d} {message}',
            'style': '{',
        },
        'simple': {
            'format': '{levelname} {name} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': env('DJANGO_LOG_LEVEL', default='INFO'),
            'propagate': False,
        },
        'apps': {
            'handlers': ['console'],
            'level': DP_LOG_LEVEL,
            'propagate': False,
        },
        'services': {
            'handlers': ['console'],
            'level': DP_LOG_LEVEL,
            'propagate': False,
        },
    },
}

# Create necessary directories
for directory in ['db']:
    (BASE_DIR / directory).mkdir(parents=True, exist_ok=True)
