import numpy as np

from phaselatch.transient import WaveformTrace


def cosine_trace(f, phase_deg=0.0, cycles=30, spc=200, amp=1.0, t0=0.0):
    t = t0 + np.arange(cycles * spc + 1) / (f * spc)
    x = amp * np.cos(2 * np.pi * f * t + np.radians(phase_deg))
    return WaveformTrace(t, {"x": x})


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
