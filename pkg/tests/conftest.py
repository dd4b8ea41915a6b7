import pathlib

import numpy as np
import pytest

from ocs import parse_pedigree

DATA = pathlib.Path(__file__).parent / "data"

# the nine-member example pedigree, exact entries scaled by 1/32
RELATIONSHIP_9 = np.array(
    [
        [32, 0, 16, 16, 0, 16, 16, 16, 8],
        [0, 32, 16, 16, 16, 16, 8, 12, 12],
        [16, 16, 32, 16, 8, 24, 12, 18, 10],
        [16, 16, 16, 32, 8, 24, 12, 18, 10],
        [0, 16, 8, 8, 32, 8, 16, 12, 24],
        [16, 16, 24, 24, 8, 40, 12, 26, 10],
        [16, 8, 12, 12, 16, 12, 32, 22, 24],
        [16, 12, 18, 18, 12, 26, 22, 38, 17],
        [8, 12, 10, 10, 24, 10, 24, 17, 40],
    ],
    dtype=float,
) / 32.0

# its sparse inverse, exact entries scaled by 1/42
INVERSE_9 = np.array(
    [
        [105, 42, -42, -42, 21, 0, -42, 0, 0],
        [42, 98, -42, -42, -28, 0, 0, 0, 0],
        [-42, -42, 105, 21, 0, -42, 0, 0, 0],
        [-42, -42, 21, 105, 0, -42, 0, 0, 0],
        [21, -28, 0, 0, 98, 0, -21, 0, -42],
        [0, 0, -42, -42, 0, 108, 24, -48, 0],
        [-42, 0, 0, 0, -21, 24, 129, -48, -42],
        [0, 0, 0, 0, 0, -48, -48, 96, 0],
        [0, 0, 0, 0, -42, 0, -42, 0, 84],
    ],
    dtype=float,
) / 42.0

INBREEDING_9 = np.array([0, 0, 0, 0, 0, 0.25, 0, 0.1875, 0.25])


@pytest.fixture(scope="session")
def fig1_text() -> str:
    return (DATA / "fig1.csv").read_text()


@pytest.fixture(scope="session")
def fig1(fig1_text):
    return parse_pedigree(fig1_text)


@pytest.fixture(scope="session")
def two_founders():
    return parse_pedigree("id,sire,dam,ebv\n1,0,0,1\n2,0,0,0\n")
