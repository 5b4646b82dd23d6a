import numpy as np
import pytest

from rps.market_data import PriceMatrix, synthetic_block_market


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_block():
    return synthetic_block_market(seed=0)


@pytest.fixture
def toy_prices():
    """Three assets, 30 periods, no zero-variance columns."""
    rng = np.random.default_rng(7)
    rets = 0.001 + 0.01 * rng.standard_normal((29, 3))
    values = 100 * np.vstack([np.ones(3), np.cumprod(1 + rets, axis=0)])
    return PriceMatrix(["AAA", "BBB", "CCC"], list(range(30)), values)


@pytest.fixture
def toy_csv(tmp_path, toy_prices):
    path = tmp_path / "toy.csv"
    lines = ["t," + ",".join(toy_prices.assets)]
    for t, row in zip(toy_prices.timestamps, toy_prices.values):
        lines.append(f"{t}," + ",".join(repr(float(v)) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def pytest_terminal_summary(terminalreporter):
    from _acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
