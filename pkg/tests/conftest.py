import sys
from pathlib import Path

import pytest

from miembed import kernels

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run the test under every available kernel backend."""
    with kernels.use_backend(request.param):
        yield request.param
