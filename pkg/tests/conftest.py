from __future__ import annotations

from random import Random

import numpy as np
import pytest

from pufsense import certibs, niwi, puf
from pufsense.roles import TrustedAuthority, TrustedSensor


@pytest.fixture(scope="session")
def master() -> certibs.MasterKeys:
    return certibs.setup(Random("master"))


@pytest.fixture(scope="session")
def crs_hiding() -> niwi.Crs:
    crs, _ = niwi.crs_gen(niwi.HIDING, Random("crs-hiding"))
    return crs


@pytest.fixture(scope="session")
def crs_binding() -> tuple[niwi.Crs, niwi.ExtractKey]:
    crs, xk = niwi.crs_gen(niwi.BINDING, Random("crs-binding"))
    assert xk is not None
    return crs, xk


@pytest.fixture(scope="session")
def authority() -> TrustedAuthority:
    return TrustedAuthority.setup(Random("ta"))


@pytest.fixture(scope="session")
def sensors(authority: TrustedAuthority) -> list[TrustedSensor]:
    """Four enrolled SRAM-PUF sensors with a fixed clock."""
    out = []
    for i in range(4):
        model = puf.make_profile("sram8", seed=100 + i, device_id=f"s{i}")
        enrollment = authority.enroll_sensor(f"sensor-{i}".encode(), model,
                                             rng=np.random.default_rng(i))
        out.append(TrustedSensor(enrollment, model, clock=lambda: 1_700_000_000.0))
    return out
