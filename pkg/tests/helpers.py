"""Shared strategies and reference formulas for the tests."""

import numpy as np
from hypothesis import strategies as st


@st.composite
def spectra(draw, min_dim=1, max_dim=8, scale=2.0):
    """Sorted random spectra as float arrays."""
    d = draw(st.integers(min_dim, max_dim))
    vals = draw(
        st.lists(
            st.floats(-scale, scale, allow_nan=False, allow_infinity=False),
            min_size=d,
            max_size=d,
        )
    )
    return np.sort(np.array(vals, dtype=float))


def naive_sff_bgl(e, beta, gamma, t):
    """Direct transcription of the BGL form factor without any stabilisation."""
    e = np.asarray(e, dtype=float)
    num = abs(np.sum(np.exp(-(beta + 1j * t) * e - gamma * t * e**2))) ** 2
    den = np.sum(np.exp(-beta * e)) * np.sum(np.exp(-beta * e - 2 * gamma * t * e**2))
    return num / den
