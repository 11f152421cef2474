"""Collects one verdict line per acceptance criterion for the end-of-run summary."""

LINES: dict[int, str] = {}


def record(number: int, title: str, passed: bool, seconds: float, detail: str) -> str:
    line = f"criterion {number} {'PASS' if passed else 'FAIL'} ({seconds:.1f} s) {title}: {detail}"
    LINES[number] = line
    print(line)
    return line
