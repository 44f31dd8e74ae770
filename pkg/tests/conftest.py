import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gaitdict.signal import RAW_AXES, SENSORS, IMURecording, SignalChannel


@pytest.fixture
def rng():
    return np.random.default_rng(20260815)


def make_recording(
    subject="u01", session=1, rate=46.0, n=460, seed=7, sensors=SENSORS
) -> IMURecording:
    """Random raw recording (no magnitude channels) for pipeline tests."""
    gen = np.random.default_rng(seed)
    channels = {
        (sensor, axis): SignalChannel(gen.normal(size=n), rate)
        for sensor in sensors
        for axis in RAW_AXES
    }
    return IMURecording(subject, session, channels)
