from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import leakscope as ls


@pytest.fixture(scope="session")
def cacheset():
    return ls.load_dut("cacheset")


@pytest.fixture(scope="session")
def cacheset_multiway():
    return ls.load_dut("cacheset_multiway")


@pytest.fixture(scope="session")
def serdiv():
    return ls.load_dut("serdiv")


@pytest.fixture(scope="session")
def ct_alu():
    return ls.load_dut("ct_alu")


@pytest.fixture(scope="session")
def cacheset_runs(cacheset):
    """The three golden cache-set runs, simulated once per session."""
    h = cacheset.hierarchy
    return {
        name: ls.simulate(h, stim, seed_id=name)
        for name, stim in cacheset.stimuli.items()
    }


@pytest.fixture(scope="session")
def serdiv_runs(serdiv):
    h = serdiv.hierarchy
    return {
        name: ls.simulate(h, stim, seed_id=name)
        for name, stim in serdiv.stimuli.items()
    }
