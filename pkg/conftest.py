import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "pphi.settings")
django.setup()
