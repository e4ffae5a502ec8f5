import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("edslab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("edslab")


@pytest.fixture
def report_line(capsys):
    """Print a line to the terminal even when output is captured."""

    def emit(text: str) -> None:
        with capsys.disabled():
            print("\n" + text)

    return emit
