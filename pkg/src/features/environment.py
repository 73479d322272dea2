import os
import sys

# Step modules import from src/; hooks load before steps, so extend the path here.
SRC_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if SRC_DIR not in sys.path:
    sys.path.insert(0, SRC_DIR)


def before_scenario(context, scenario):
  context.verdict = None
