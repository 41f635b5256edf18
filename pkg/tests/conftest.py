import numpy as np
import pytest

from nomalink import corrchan
from nomalink.scenario import load_scenario


@pytest.fixture(scope="session")
def paper_v():
    """The reference scenario: N_t=N_r=M=3, eps=0.7, rho=0.5, 70 dB, R=2,
    four clusters at 10/20/30/40 m."""
    return load_scenario(preset="paper-v")


def make_config(m_streams, snr_db=70.0, rho=0.5, n_t=3, n_r=3, alpha=3.0):
    return corrchan.SystemConfig(
        n_t=n_t,
        n_r=n_r,
        n_streams=m_streams,
        alpha=alpha,
        k_friis=1.0,
        snr_db=snr_db,
        rho_t=rho,
        rho_r=rho,
    )


def eig_descending(mat):
    return np.sort(np.linalg.eigvalsh(mat))[::-1]
