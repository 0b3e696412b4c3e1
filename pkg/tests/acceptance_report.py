"""Collects one summary line per acceptance criterion for the terminal report."""

LINES = {}


def record(number, title, passed, detail, seconds):
    status = "PASS" if passed else "FAIL"
    LINES[number] = f"[{status}] {number}. {title}: {detail} ({seconds:.1f} s)"
    return passed
