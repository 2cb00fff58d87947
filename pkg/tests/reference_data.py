"""Printed reference values used by several test modules."""

import numpy as np


def _e21_n3() -> np.ndarray:
    # each row: (-1 col, +1 col, -1 col, +1 col)
    rows = [
        (0, 3, 12, 15), (3, 6, 13, 16), (6, 9, 14, 17),
        (1, 4, 15, 18), (4, 7, 16, 19), (7, 10, 17, 20),
        (2, 5, 18, 21), (5, 8, 19, 22), (8, 11, 20, 23),
    ]
    E = np.zeros((9, 24), dtype=int)
    for r, (a, b, c, d) in enumerate(rows):
        E[r, [a, c]] = -1
        E[r, [b, d]] = 1
    return E


PRINTED_E21_N3 = _e21_n3()

# (+1 column, -1 column) per row of the printed 8 x 64 connectivity matrix for K=2x2, N=2
PRINTED_EN_2X2_N2 = [(4, 16), (5, 17), (36, 48), (37, 49), (10, 38), (11, 39), (26, 54), (27, 55)]


def printed_en() -> np.ndarray:
    E = np.zeros((8, 64), dtype=int)
    for r, (plus, minus) in enumerate(PRINTED_EN_2X2_N2):
        E[r, plus], E[r, minus] = 1, -1
    return E


# (N, full, lambda) at K=3x3 and (K, full, lambda) at N=3
TABLE1_LEFT = [(5, 825, 60), (10, 3000, 120), (15, 6525, 180), (20, 11400, 240), (25, 17625, 300)]
TABLE1_RIGHT = [(400, 15480, 2280), (1600, 62160, 9360), (3600, 140040, 21240), (6400, 249120, 37920), (10000, 389400, 59400)]
TABLE2_LEFT = [(5, 16875, 1350), (10, 121500, 5400), (15, 394875, 12150), (20, 918000, 21600), (25, 1771875, 33750)]
TABLE2_RIGHT = [
    (8000, 1285200, 205200),
    (64000, 10324800, 1684800),
    (216000, 34894800, 5734800),
    (512000, 82771200, 13651200),
    (1000000, 161730000, 26730000),
]
TABLE1_RATIOS_LEFT = [0.07, 0.04, 0.03, 0.02, 0.02]
TABLE2_RATIOS_RIGHT = [0.16, 0.16, 0.16, 0.16, 0.17]

GLOBAL_NNZ_3X3_N6 = 66384
