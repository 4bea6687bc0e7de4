"""Measured values reported for the hardware router, kept here for comparison.

Simulated results are set against these in the CLI summary. Values are
(mean, uncertainty) pairs where an uncertainty was reported, else None.
"""

INPUT_STATES = ("H", "V", "D", "R")

# switching extinction ratio (dB) per input state, port 1 at 1.0 kV, port 2 at 0 kV
SER_DB = {
    1: {"H": (19.9, 0.1), "V": (19.8, 0.1), "D": (19.4, 0.1), "R": (19.9, 0.1)},
    2: {"H": (20.5, 0.2), "V": (20.5, 0.3), "D": (20.0, 0.1), "R": (20.5, 0.1)},
}

# 1 - P1/Pin - P2/Pin at the port-1 setting, percent
INSERTION_LOSS_PCT = {"H": (1.9, 0.2), "V": (1.4, 0.4), "D": (1.9, 0.3), "R": (1.3, 0.3)}

# 1 - P_port/Pin at that port's setting, percent
LOSS_PCT = {
    1: {"H": (2.74, 0.04), "V": (2.12, 0.04), "D": (3.01, 0.10), "R": (2.10, 0.05)},
    2: {"H": (2.90, 0.10), "V": (2.92, 0.12), "D": (3.68, 0.09), "R": (2.90, 0.08)},
}

FRINGE_VISIBILITY = 0.98
HALF_WAVE_VOLTAGE_KV = 1.0

# process fidelity to the identity; std over ten tomography datasets
PROCESS_FIDELITY = {1: (0.9948, 0.0009), 2: (0.9955, 0.0017)}

# port-1 switching edges under a 100 ns half-wave pulse, ns
RISE_10_90_NS = 2.9
FALL_90_20_NS = 2.2
FALL_90_10_NS = 15.6

# bandwidth for < 1 % visibility loss with 302 fs^2/mm GVD, as stated; see README
ACCEPTANCE_BANDWIDTH_NM = 30.0
RTP_GVD_FS2_PER_MM = 302.0
MEASUREMENT_BANDWIDTH_NM = 2.0
