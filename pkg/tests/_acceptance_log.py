"""Collects one result line per acceptance criterion for the terminal summary."""

LINES: list[str] = []


def record(number: int, ok: bool, detail: str, seconds: float) -> str:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}  [{seconds:.2f}s]"
    LINES.append(line)
    print(line)
    return line
