import numpy as np
import pytest

from mec_ppo.scenario import ProgramSpec, Scenario, ServerProfile, UEProfile


def make_ue(uid, *, D=200e6, F=2e3, v=2e9, p_max=0.2, E=4.0, rho=0.05, k=0.001, b=1.5e6,
            pos=(0.0, 0.0)):
    return UEProfile(uid, pos, v, p_max, E, rho, ProgramSpec(D, F, k, b))


def make_scenario(gains, *, ues=None, v_srv=6e11, W=20e6, n0=1e-20, access="noma", seed=None):
    gains = np.atleast_2d(np.asarray(gains, dtype=float))
    I, N = gains.shape
    ues = ues or [make_ue(n) for n in range(N)]
    servers = tuple(ServerProfile(i, (0.0, 0.0), v_srv) for i in range(I))
    return Scenario(servers, tuple(ues), tuple(map(tuple, gains)), W, n0, access, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
