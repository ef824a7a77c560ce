from hypothesis import HealthCheck, settings

SEED = 20261016

# (criterion, line) pairs filled by test_acceptance.py and echoed in the terminal summary
ACCEPTANCE_LINES = []

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
