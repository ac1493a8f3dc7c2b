from hypothesis import settings

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")

CRITERIA = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA):
            terminalreporter.write_line(line)
