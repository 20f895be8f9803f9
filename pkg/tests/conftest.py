import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).parent
GOLDEN = TESTS / "fixtures" / "golden"

# lets test modules import the plain-Python oracles
sys.path.insert(0, str(TESTS))


@pytest.fixture
def golden_config():
    from captionmcdm.pipeline import PipelineConfig

    return PipelineConfig.from_json(GOLDEN / "config.json")


@pytest.fixture(scope="session")
def golden_resources():
    from captionmcdm.pipeline import PipelineConfig, load_resources

    return load_resources(PipelineConfig.from_json(GOLDEN / "config.json"))
