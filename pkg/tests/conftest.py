def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print the acceptance scorecard even when output capture is on."""
    try:
        from test_acceptance import SCORECARD
    except ImportError:
        return
    if not SCORECARD:
        return
    terminalreporter.section("acceptance scorecard")
    for num, ok, detail in sorted(SCORECARD):
        terminalreporter.write_line(
            f"criterion {num}: {'PASS' if ok else 'FAIL'} -- {detail}"
        )
