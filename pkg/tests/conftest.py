import pytest
from importlib import resources

from steadyscan import load_model


def builtin_model_path(name):
    return resources.files("steadyscan").joinpath("models", f"{name}.model")


@pytest.fixture(scope="session")
def iron():
    return load_model(builtin_model_path("iron_v2"))


@pytest.fixture(scope="session")
def iron_pre():
    return load_model(builtin_model_path("iron_v2_pre_revision"))
