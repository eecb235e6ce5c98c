import xml.etree.ElementTree as ET

import numpy as np
import pytest

from lockin_thermo.core import spatial_average_3x3
from lockin_thermo.ecg import detect_rpeaks
from lockin_thermo.lockin import LockInConfig, bin_cycles, synchronous_average
from lockin_thermo.report import render_report
from lockin_thermo.synth import SynthConfig, synth_dataset
from lockin_thermo.timewarp import build_warp


@pytest.fixture(scope="module")
def parts():
    ecg, seq, _ = synth_dataset(SynthConfig(duration=16, width=12, height=12, seed=1))
    peaks = detect_rpeaks(ecg)
    series = spatial_average_3x3(seq, (6, 6))
    profile = synchronous_average(bin_cycles(series, build_warp(peaks), series.times[0], LockInConfig()))
    return ecg, peaks, series, profile


def test_svg_is_well_formed_and_has_three_panels(parts):
    root = ET.fromstring(render_report(*parts).split("\n", 1)[1])
    groups = root.findall("{http://www.w3.org/2000/svg}g")
    assert len(groups) == 3
    circles = groups[0].findall("{http://www.w3.org/2000/svg}circle")
    assert len(circles) == len(parts[1])


def test_error_bar_choice(parts):
    se = render_report(*parts)
    sd = render_report(*parts, error="sd")
    assert se != sd and "SE" in se and "SD" in sd
    assert se == render_report(*parts)
    with pytest.raises(ValueError):
        render_report(*parts, error="ci")
