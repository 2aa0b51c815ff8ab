import os
import sys

from hypothesis import settings

settings.register_profile("ci", deadline=None, max_examples=40)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
