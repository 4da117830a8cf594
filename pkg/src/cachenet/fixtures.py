"""A small hand-placed network used in the docs and tests.

Four helpers, six users, a_cell = 200 m, a_interf = 240 m.  The conflict graph
needs three colors, and with groups {1,2,5}, {3,6}, {4} (L = 3, t' = 1) both
the reuse and the avalanche schemes finish in 3 F / C_access.
"""
from __future__ import annotations

import numpy as np

from .model import CacheAssignment, CacheScheme, LibraryParams, subpacketize
from .scenario import Layout

HELPERS = [(128.0, -300.0), (0.0, 0.0), (256.0, 0.0), (128.0, 222.0)]
USERS = [(128.0, -350.0), (-20.0, -130.0), (128.0, 0.0), (192.0, 111.0), (276.0, -130.0), (64.0, 111.0)]
GROUPS = {1: 1, 2: 1, 3: 2, 4: 3, 5: 1, 6: 2}


def example_layout(c_front: float = 1.0, c_access: float = 1.0) -> Layout:
    return Layout(np.array(HELPERS), np.array(USERS), 400.0, a_sig=220.0, a_cell=200.0,
                  a_interf=240.0, c_front=c_front, c_access=c_access)


def example_assignment() -> CacheAssignment:
    return CacheAssignment(dict(GROUPS), 3)


def example_scheme() -> CacheScheme:
    return subpacketize(LibraryParams(N=3, F=1, M=1), 3)
