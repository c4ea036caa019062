import re

_AC_NODE = re.compile(r"test_acceptance\.py::test_ac(\d+)")

_TITLES = {
    1: "DLT exactness (1000 seeded homographies, 1e-9)",
    2: "midpoint law and reflection symmetry (1e5 boxes)",
    3: "indoor reproduction: 100% detection, X/Y mean <= 0.6 cm",
    4: "oracle-detector localisation band <= 0.05 cm",
    5: "degradation direction under direct sun / disturbances",
    6: "HSV illumination fragility under value-gain sweep",
    7: "greedy matching equals brute-force optimal count",
    8: "wire-protocol conformance and error mapping",
    9: "external adapter protocol conformance",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes: dict[int, str] = {}
    for status, label in (
        ("passed", "PASS"),
        ("failed", "FAIL"),
        ("error", "FAIL"),
        ("skipped", "SKIP"),
    ):
        for report in terminalreporter.stats.get(status, []):
            match = _AC_NODE.search(getattr(report, "nodeid", ""))
            if not match:
                continue
            if status == "passed" and report.when != "call":
                continue
            number = int(match.group(1))
            # a failure in any phase trumps an earlier pass
            if outcomes.get(number) != "FAIL":
                outcomes[number] = label
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(outcomes):
        title = _TITLES.get(number, "")
        terminalreporter.write_line(f"AC-{number} {outcomes[number]}: {title}")
