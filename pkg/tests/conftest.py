import re


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run.

    A criterion split across several test functions gets one combined line;
    it fails if any of its parts failed.
    """
    found = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)",
                          nodeid)
            if m:
                num = int(m.group(1))
                label = m.group(2).replace("_", " ")
                labels, any_failed = found.get(num, ([], False))
                if label not in labels:
                    labels.append(label)
                found[num] = (labels, any_failed or outcome != "passed")
    if found:
        terminalreporter.write_sep("=", "acceptance criteria")
        for num in sorted(found):
            labels, any_failed = found[num]
            verdict = "FAIL" if any_failed else "PASS"
            terminalreporter.write_line(
                f"criterion {num:2d} ({' / '.join(labels)}): {verdict}")
