def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance  # noqa: F401 - imported for its RESULTS

    lines = test_acceptance.RESULTS
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
