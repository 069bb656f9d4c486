"""Submodule locating the instance fixtures shipped with the package."""

import os
from typing import List
from typeguard import typechecked

FIXTURES_DIRECTORY = os.path.join(os.path.dirname(os.path.dirname(__file__)), "fixtures")


@typechecked
def fixture_path(name: str) -> str:
    """Return the absolute path of a shipped instance fixture.

    Parameters
    ----------
    name : str
        File name of the fixture, with or without the ".json" extension.
    """
    if not name.endswith(".json"):
        name = f"{name}.json"
    path = os.path.join(FIXTURES_DIRECTORY, name)
    if not os.path.exists(path):
        raise FileNotFoundError(
            f"Unknown fixture '{name}'. Available fixtures: {', '.join(list_fixtures())}"
        )
    return path


@typechecked
def list_fixtures() -> List[str]:
    """Return the names of the shipped instance fixtures."""
    return sorted(
        file_name for file_name in os.listdir(FIXTURES_DIRECTORY) if file_name.endswith(".json")
    )
