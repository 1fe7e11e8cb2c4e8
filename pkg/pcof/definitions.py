import os

ROOT = os.path.dirname(__file__)
PROFILES_DIR = os.path.join(ROOT, "resources", "profiles")
