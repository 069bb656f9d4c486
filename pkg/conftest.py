"""Collect the python blocks of the README as tests of the fullstab usage examples."""

import os
from pytest_readme import setup

README_TESTS = os.path.join("tests", "test_readme.py")

setup()
os.replace("test_readme.py", README_TESTS)
