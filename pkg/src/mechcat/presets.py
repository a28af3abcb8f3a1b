"""Bundled benchmark parameter sets and reference values.

The benchmark rows pair four proposed operating points (i)-(iv) with three
demonstrated experimental platforms (membrane, sliced photonic crystal,
nanobeam), each of the latter in its demonstrated configuration and with
near-future cooling improvements. Reference values live in the golden CSV
files next to this module and drive the --check mode of the CLI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .detector import DetectorParams
from .sideband import CavityParams

ETA_DEFAULT = 0.8
DARK_PROB_DEFAULT = 1e-8
ALPHA_DEFAULT = 1.0
PHI_DEFAULT = math.pi
OMEGA_M_DEFAULT = 2.0 * math.pi * 1.0e6  # rad/s; criteria depend only on Q and nbar_B


@dataclass(frozen=True)
class BenchmarkRow:
    name: str
    mu: float
    q_factor: float
    nbar: float
    nbar_bath: float


BENCHMARK_ROWS: tuple[BenchmarkRow, ...] = (
    BenchmarkRow("i", 1e-3, 1e5, 0.1, 1000.0),
    BenchmarkRow("ii", 1e-2, 1e5, 0.1, 1000.0),
    BenchmarkRow("iii", 1e-1, 1e5, 0.1, 1000.0),
    BenchmarkRow("iv", 1e0, 1e5, 0.1, 1000.0),
    BenchmarkRow("membrane", 2.26e-5, 1.03e9, 0.29, 1e5),
    BenchmarkRow("membrane-cooled", 2.26e-5, 1.03e9, 0.1, 1e3),
    BenchmarkRow("photonic-crystal", 1.29e-4, 7.54e5, 5.3, 2.1e4),
    BenchmarkRow("photonic-crystal-cooled", 1.29e-4, 7.54e5, 0.1, 484.0),
    BenchmarkRow("nanobeam", 1.12e-2, 3.74e4, 1.7e4, 1.7e4),
    BenchmarkRow("nanobeam-cooled", 1.12e-2, 3.74e4, 0.1, 559.0),
)


def default_detector(resolving: bool = True) -> DetectorParams:
    return DetectorParams(eta=ETA_DEFAULT, dark_prob=DARK_PROB_DEFAULT, resolving=resolving)


@dataclass(frozen=True)
class CavityRow:
    name: str
    cavity: CavityParams


CAVITY_ROWS: tuple[CavityRow, ...] = (
    CavityRow("membrane", CavityParams(g0=2 * math.pi * 127.0, kappa=2 * math.pi * 15.9e6,
                                       omega_m=2 * math.pi * 1.139e6)),
    CavityRow("photonic-crystal", CavityParams(g0=2 * math.pi * 20e3, kappa=2 * math.pi * 0.44e9,
                                               omega_m=2 * math.pi * 4.3e6)),
    CavityRow("nanobeam", CavityParams(g0=2 * math.pi * 35e6, kappa=2 * math.pi * 8.8e9,
                                       omega_m=2 * math.pi * 3.74e6)),
)
